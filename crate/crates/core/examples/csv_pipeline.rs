//! From a CSV file to an estimate: load, impute, encode, cross-fit, estimate,
//! and save the fitted nuisance values.
//!
//! cargo run --release --example csv_pipeline [file.csv]
//!
//! Without an argument it reads the bundled reference sample, whose columns
//! are id, x, r (follow-up), a (treatment) and y (outcome).

use std::path::PathBuf;

use dr_att::crossfit::{assign_folds, fit_nuisances, CrossFitOptions};
use dr_att::data::{encode, impute_covariates, load_csv, LoadOptions, RoleMap};
use dr_att::estimators::{estimate_att, influence_values};
use dr_att::learners::LearnerSpec;

fn main() -> dr_att::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/reference_n50000.csv"));
    let roles = RoleMap {
        covariates: vec!["x".into()],
        treatment: "a".into(),
        outcome: "y".into(),
        followup: "r".into(),
        id: Some("id".into()),
        filters: vec!["x=1".parse()?],
        ..Default::default()
    };

    let (raw, load) = load_csv(&path, None, &roles, LoadOptions::default())?;
    println!("{} rows kept, {} filtered out", raw.n(), load.filtered_out);
    let (imputed, imp) = impute_covariates(&raw)?;
    println!("imputed columns: {:?}", imp.imputed);
    let (ds, _) = encode(&imputed)?;

    let folds = assign_folds(ds.n(), 10, 81)?;
    let surface = fit_nuisances(&ds, &LearnerSpec::logistic(), &folds, &CrossFitOptions::default())?;
    let est = estimate_att(&influence_values(&ds, &surface)?, 0.01)?;
    println!("ATT among x=1: {:.4} [{:.4}, {:.4}]", est.estimate, est.ci[0], est.ci[1]);

    let out = std::env::temp_dir().join("dr_att_surface.csv");
    surface.write_csv(std::fs::File::create(&out)?, ds.ids())?;
    println!("nuisance values written to {}", out.display());
    Ok(())
}
