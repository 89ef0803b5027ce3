//! Propensity histogram on a process with a nearly untreated region.

use dr_att::crossfit::{assign_folds, fit_nuisances, CrossFitOptions};
use dr_att::estimators::overlap_diagnostic;
use dr_att::learners::LearnerSpec;
use dr_att::sim::{generate, DgpSpec};

fn main() -> dr_att::Result<()> {
    for name in ["reference", "low_overlap"] {
        let dgp = DgpSpec::preset(name)?;
        let n = 20_000;
        let sample = generate(&dgp, n, 61)?;
        let folds = assign_folds(n, 10, 62)?;
        let surface = fit_nuisances(&sample.dataset, &LearnerSpec::logistic(), &folds, &CrossFitOptions::default())?;
        let report = overlap_diagnostic(&surface.pi);
        println!(
            "{name}: {} rows ({:.1}%) below {}, {} clipped at the propensity bound",
            report.below_threshold,
            100.0 * report.fraction_below,
            report.threshold,
            surface.clip_counts.pi
        );
        for (i, &c) in report.counts.iter().enumerate().filter(|(_, &c)| c > 0) {
            println!("  [{:.2}, {:.2})  {c}", report.edges[i], report.edges[i + 1]);
        }
    }
    Ok(())
}
