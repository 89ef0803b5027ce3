//! Per-group ATT and the test that all groups share one effect.

use dr_att::crossfit::{assign_folds, fit_nuisances, CrossFitOptions};
use dr_att::data::SubgroupPartition;
use dr_att::estimators::{homogeneity_test, influence_values, subgroup_estimates, DEFAULT_MIN_GROUP_SIZE};
use dr_att::learners::LearnerSpec;
use dr_att::sim::{generate, DgpSpec};

fn main() -> dr_att::Result<()> {
    for name in ["homogeneous_groups", "two_group_gap"] {
        let dgp = DgpSpec::preset(name)?;
        let n = 20_000;
        let sample = generate(&dgp, n, 31)?;
        let folds = assign_folds(n, 10, 32)?;
        let surface = fit_nuisances(&sample.dataset, &LearnerSpec::logistic(), &folds, &CrossFitOptions::default())?;
        let records = influence_values(&sample.dataset, &surface)?;
        let partition = SubgroupPartition::from_labels(sample.dataset.group().expect("grouped dgp"));
        let report = subgroup_estimates(&records, &partition, DEFAULT_MIN_GROUP_SIZE, 0.01)?;

        println!("{name}");
        for g in &report.groups {
            let e = &g.estimate;
            println!("  {:<4} n={:<6} ATT {:+.4} [{:+.4}, {:+.4}]", g.label, e.n, e.estimate, e.ci[0], e.ci[1]);
        }
        let t = homogeneity_test(&report.groups)?;
        println!("  T = {:.2} on {} df, p = {:.4}", t.t_n, t.df, t.p_value);
    }
    Ok(())
}
