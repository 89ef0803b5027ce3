//! Coverage with learned nuisances, and the root-n rate with true nuisances.
//!
//! cargo run --release --example monte_carlo [reps]

use dr_att::learners::LearnerSpec;
use dr_att::sim::{convergence_study, run_experiment, DgpSpec, ExperimentConfig, NuisanceSource};

fn main() -> dr_att::Result<()> {
    let reps: usize = std::env::args().nth(1).map_or(200, |s| s.parse().expect("reps"));

    let smooth = DgpSpec::preset("smooth")?;
    let r = run_experiment(&smooth, &ExperimentConfig::new(2_000, reps, NuisanceSource::Learned(LearnerSpec::logistic()), 1))?;
    println!(
        "smooth, n=2000: coverage {:.3}, bias {:+.4}, mean SE {:.4} vs sd {:.4} ({:.1}s)",
        r.coverage,
        r.bias,
        r.mean_se,
        r.bias_se * (r.estimates.len() as f64).sqrt(),
        r.wall_time
    );

    let reference = DgpSpec::preset("reference")?;
    let table = convergence_study(&reference, &[500, 2_000, 8_000, 32_000], &ExperimentConfig::new(0, reps, NuisanceSource::Oracle, 2))?;
    table.write_csv(std::io::stdout().lock())
}
