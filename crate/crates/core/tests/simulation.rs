use dr_att::crossfit::{assign_folds, fit_nuisances, CrossFitOptions};
use dr_att::estimators::{estimate_att, influence_values};
use dr_att::learners::LearnerSpec;
use dr_att::sensitivity::{calibrate_delta, ratio_bounds, Aggregation};
use dr_att::sim::{calibration_ratio, generate, oracle_att, oracle_components, true_delta, true_surface, DgpSpec};
use dr_att::stats::{mean, sample_variance};

#[test]
fn influence_means_match_enumerated_components() {
    let dgp = DgpSpec::preset("reference").unwrap();
    let truth = oracle_components(&dgp);
    let n = 200_000;
    let sample = generate(&dgp, n, 17).unwrap();
    let surface = true_surface(&dgp, &sample, 0.01).unwrap();
    let records = influence_values(&sample.dataset, &surface).unwrap();
    let check = |values: Vec<f64>, target: f64, label: &str| {
        let se = (sample_variance(&values) / n as f64).sqrt();
        let m = mean(&values);
        assert!((m - target).abs() < 3.0 * se, "{label}: {m} vs {target} (se {se})");
    };
    check(records.iter().map(|r| r.phi_ay0).collect(), truth.psi_ay0, "E[A Y0]");
    check(records.iter().map(|r| r.phi_ay1).collect(), truth.psi_ay1, "E[A Y1]");
    check(records.iter().map(|r| r.phi_a).collect(), truth.psi_a, "P(A=1)");
    assert!((truth.psi_ay0 - 0.17).abs() < 1e-12);
}

#[test]
fn learned_nuisances_recover_att() {
    let dgp = DgpSpec::preset("strong_confounding").unwrap();
    let n = 40_000;
    let sample = generate(&dgp, n, 5).unwrap();
    let folds = assign_folds(n, 10, 6).unwrap();
    let surface = fit_nuisances(&sample.dataset, &LearnerSpec::logistic(), &folds, &CrossFitOptions::default()).unwrap();
    let est = estimate_att(&influence_values(&sample.dataset, &surface).unwrap(), 0.01).unwrap();
    let truth = oracle_att(&dgp).value;
    assert!((est.estimate - truth).abs() < 3.0 * est.se(), "{} vs {truth}", est.estimate);
}

#[test]
fn calibrated_delta_tracks_enumerated_ratio() {
    let dgp = DgpSpec::preset("omitted_confounder").unwrap().with_observed(vec![0, 1]);
    let n = 100_000;
    let sample = generate(&dgp, n, 8).unwrap();
    let folds = assign_folds(n, 10, 9).unwrap();
    let spec = LearnerSpec::logistic();
    let surface = fit_nuisances(&sample.dataset, &spec, &folds, &CrossFitOptions::default()).unwrap();

    let exact = calibration_ratio(&dgp, &[0]).unwrap();
    let c = calibrate_delta(&sample.dataset, &surface, &folds, &["x".to_string()], &spec, Aggregation::MarginalRatio).unwrap();
    assert!((c.delta_hat - exact).abs() < 0.03, "delta_hat {} vs exact {exact}", c.delta_hat);
    assert!(c.stratum_max.unwrap() >= c.marginal_ratio - 1e-12);

    let full = calibrate_delta(&sample.dataset, &surface, &folds, &["x".to_string(), "u".to_string()], &spec, Aggregation::MarginalRatio)
        .unwrap();
    assert!((full.delta_hat - 1.0).abs() < 0.01, "full-set ratio {}", full.delta_hat);
}

#[test]
fn oracle_bounds_at_true_delta_contain_att() {
    let dgp = DgpSpec::preset("omitted_confounder").unwrap();
    let delta = true_delta(&dgp).unwrap();
    let sample = generate(&dgp, 200_000, 10).unwrap();
    let surface = true_surface(&dgp, &sample, 0.01).unwrap();
    let records = influence_values(&sample.dataset, &surface).unwrap();
    let naive = estimate_att(&records, 0.01).unwrap();
    let truth = oracle_att(&dgp).value;
    assert!(!naive.covers(truth), "naive estimate {} should be biased", naive.estimate);
    assert!(ratio_bounds(&records, delta).unwrap().contains(truth));
}
