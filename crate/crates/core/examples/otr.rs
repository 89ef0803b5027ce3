//! Overall treatment removal effect E[Y] - E[Y0], with additive sensitivity bounds.

use dr_att::crossfit::{assign_folds, fit_nuisances, CrossFitOptions};
use dr_att::estimators::{estimate_otr, otr_influence_values, OtrCorrection};
use dr_att::learners::LearnerSpec;
use dr_att::sensitivity::otr_additive_bounds;
use dr_att::sim::{generate, oracle_otr, DgpSpec};

fn main() -> dr_att::Result<()> {
    let dgp = DgpSpec::preset("reference")?;
    let n = 30_000;
    let sample = generate(&dgp, n, 21)?;
    let folds = assign_folds(n, 10, 22)?;
    let opts = CrossFitOptions { want_mu_y: true, ..Default::default() };
    let surface = fit_nuisances(&sample.dataset, &LearnerSpec::logistic(), &folds, &opts)?;

    println!("true OTR {:.4}", oracle_otr(&dgp).value);
    for correction in [OtrCorrection::Efficient, OtrCorrection::PiWeighted] {
        let records = otr_influence_values(&sample.dataset, &surface, correction)?;
        let otr = estimate_otr(&records, correction)?;
        println!("{correction:?}: {:.4} [{:.4}, {:.4}]", otr.estimate, otr.ci[0], otr.ci[1]);
        if correction == OtrCorrection::Efficient {
            for delta in [0.0, 0.01, 0.02, 0.05] {
                let b = otr_additive_bounds(&records, &otr, delta)?;
                println!("  delta {delta:.2}: [{:.4}, {:.4}]", b.lower.estimate, b.upper.estimate);
            }
        }
    }
    Ok(())
}
