//! Bias of the ATT estimator when some nuisance regressions are replaced by
//! constants. Any of the combinations {omega, pi}, {omega, mu0} or
//! {pi, mu0, mu1} being right is enough.
//!
//! cargo run --release --example double_robustness [reps]

use dr_att::crossfit::Nuisance::{self, Mu0, Mu1, Omega, Pi};
use dr_att::learners::LearnerSpec;
use dr_att::sim::{run_experiment, DgpSpec, ExperimentConfig, Mechanism, MisspecFlags, NuisanceSource};

fn main() -> dr_att::Result<()> {
    let reps: usize = std::env::args().nth(1).map_or(50, |s| s.parse().expect("reps"));
    let dgp = DgpSpec::preset("strong_confounding")?;
    let scenarios: [&[Nuisance]; 6] = [&[Omega, Pi, Mu0, Mu1], &[Omega, Pi], &[Omega, Mu0], &[Pi, Mu0, Mu1], &[Pi], &[Mu0]];
    println!("{:<24} {:>9} {:>8} {:>9}", "correct", "bias", "rmse", "coverage");
    for (i, correct) in scenarios.iter().enumerate() {
        let mut cfg = ExperimentConfig::new(20_000, reps, NuisanceSource::Learned(LearnerSpec::logistic()), i as u64);
        cfg.flags = MisspecFlags::all_but(correct, Mechanism::ConstantFit);
        let r = run_experiment(&dgp, &cfg)?;
        let label = correct.iter().map(|n| n.name()).collect::<Vec<_>>().join("+");
        println!("{label:<24} {:>+9.4} {:>8.4} {:>9.3}", r.bias, r.rmse, r.coverage);
    }
    Ok(())
}
