//! Cross-fitted ATT on a simulated sample with missing follow-up.
//!
//! cargo run --release --example estimate_att [n] [learners]

use dr_att::crossfit::{assign_folds, fit_nuisances, CrossFitOptions};
use dr_att::estimators::{estimate_att, influence_values};
use dr_att::learners::LearnerSpec;
use dr_att::sim::{generate, oracle_att, DgpSpec};

fn main() -> dr_att::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map_or(20_000, |s| s.parse().expect("n"));
    let spec = match args.next() {
        Some(s) => LearnerSpec::parse(&s, 5)?,
        None => LearnerSpec::logistic(),
    };

    let dgp = DgpSpec::preset("reference")?;
    let sample = generate(&dgp, n, 11)?;
    let folds = assign_folds(n, 10, 12)?;
    let surface = fit_nuisances(&sample.dataset, &spec, &folds, &CrossFitOptions::default())?;
    let est = estimate_att(&influence_values(&sample.dataset, &surface)?, 0.01)?;

    println!("learner            {}", spec.name());
    println!("true ATT           {:.4}", oracle_att(&dgp).value);
    println!("estimated ATT      {:.4}  95% CI [{:.4}, {:.4}]", est.estimate, est.ci[0], est.ci[1]);
    println!("  E[AY1]={:.4} E[AY0]={:.4} P(A=1)={:.4}", est.components.psi_ay1, est.components.psi_ay0, est.components.psi_a);
    if let Some(rr) = est.relative_reduction {
        println!("relative reduction {:.3}  95% CI [{:.3}, {:.3}]", rr.estimate, rr.ci[0], rr.ci[1]);
    }
    Ok(())
}
