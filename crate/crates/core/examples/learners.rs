//! The nuisance learners on their own: logistic regression, a random forest,
//! and the cross-validated stack of both.

use dr_att::crossfit::Nuisance;
use dr_att::learners::{fit, FittedModel, LearnerSpec, TargetKind};
use dr_att::sim::{generate, DgpSpec};

fn main() -> dr_att::Result<()> {
    // pi(x) is a logistic function of a 3-d uniform covariate
    let dgp = DgpSpec::preset("smooth")?;
    let sample = generate(&dgp, 3_000, 71)?;
    let x = sample.dataset.require_design()?;
    let targets = Nuisance::Pi.targets(&sample.dataset);
    let rows: Vec<usize> = (0..targets.len()).filter(|&i| targets[i].is_some()).collect();
    let t: Vec<f64> = rows.iter().map(|&i| targets[i].unwrap()).collect();
    let x = x.select_rows(&rows);

    for spec in ["logistic", "forest:trees=100", "logistic,forest:trees=100"] {
        let spec = LearnerSpec::parse(spec, 5)?;
        let model = fit(&spec, &x, &t, TargetKind::Probability, 72)?;
        let pred = model.predict(&x);
        let brier = pred.iter().zip(&t).map(|(p, y)| (p - y).powi(2)).sum::<f64>() / t.len() as f64;
        println!("{:<40} in-sample Brier {brier:.4}", spec.name());
        if let FittedModel::Stacked(s) = &model {
            for ((name, w), risk) in s.names.iter().zip(&s.weights).zip(&s.cv_risk) {
                println!("  {name:<20} weight {w:.3}  cv risk {risk:.4}");
            }
            println!("  ensemble cv risk {:.4}", s.ensemble_cv_risk);
        }
    }
    Ok(())
}
