//! How much would leaving out covariates move the untreated-outcome mean of the
//! treated? Used to pick a plausible range for the sensitivity parameter.

use dr_att::crossfit::{assign_folds, fit_nuisances, CrossFitOptions};
use dr_att::learners::LearnerSpec;
use dr_att::sensitivity::{calibrate_delta, Aggregation};
use dr_att::sim::{calibration_ratio, generate, DgpSpec};

fn main() -> dr_att::Result<()> {
    // Same process as the omitted-confounder example, but with u observed.
    let dgp = DgpSpec::preset("omitted_confounder")?.with_observed(vec![0, 1]);
    let n = 40_000;
    let sample = generate(&dgp, n, 51)?;
    let folds = assign_folds(n, 10, 52)?;
    let spec = LearnerSpec::logistic();
    let surface = fit_nuisances(&sample.dataset, &spec, &folds, &CrossFitOptions::default())?;

    let names = &dgp.feature_names;
    for (idx, agg) in [(vec![0], Aggregation::MarginalRatio), (vec![1], Aggregation::MarginalRatio), (vec![0], Aggregation::StratumMax)] {
        let subset: Vec<String> = idx.iter().map(|&j| names[j].clone()).collect();
        let c = calibrate_delta(&sample.dataset, &surface, &folds, &subset, &spec, agg)?;
        println!(
            "keep {:?} ({agg:?}): delta_hat {:.3} (marginal {:.3}, stratum max {:.3}); exact marginal {:.3}",
            c.subset,
            c.delta_hat,
            c.marginal_ratio,
            c.stratum_max.unwrap_or(f64::NAN),
            calibration_ratio(&dgp, &idx)?
        );
    }
    Ok(())
}
