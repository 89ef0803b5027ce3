//! Ratio bounds on the ATT as the allowed confounding grows, written as CSV.
//!
//! cargo run --release --example sensitivity_curve > curve.csv

use dr_att::crossfit::{assign_folds, fit_nuisances, CrossFitOptions};
use dr_att::estimators::influence_values;
use dr_att::learners::LearnerSpec;
use dr_att::sensitivity::{default_delta_grid, sensitivity_curve};
use dr_att::sim::{generate, oracle_att, true_delta, DgpSpec};

fn main() -> dr_att::Result<()> {
    // u is hidden from the analyst
    let dgp = DgpSpec::preset("omitted_confounder")?;
    let n = 50_000;
    let sample = generate(&dgp, n, 41)?;
    let folds = assign_folds(n, 10, 42)?;
    let surface = fit_nuisances(&sample.dataset, &LearnerSpec::logistic(), &folds, &CrossFitOptions::default())?;
    let curve = sensitivity_curve(&influence_values(&sample.dataset, &surface)?, &default_delta_grid())?;

    eprintln!("true ATT {:.4}, true delta {:.3}", oracle_att(&dgp).value, true_delta(&dgp)?);
    match curve.lower_crosses_zero() {
        Some(d) => eprintln!("lower bound reaches zero at delta = {d:.2}"),
        None => eprintln!("lower bound stays positive on the grid"),
    }
    curve.write_csv(std::io::stdout().lock())
}
