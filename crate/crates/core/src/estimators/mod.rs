//! One-step estimators built from per-observation influence values.

mod heterogeneity;
mod otr;
mod overlap;

use serde::{Deserialize, Serialize};

pub use heterogeneity::{
    homogeneity_test, subgroup_estimates, successive_difference_statistic, GroupEstimate, HomogeneityTest, SubgroupReport,
    DEFAULT_MIN_GROUP_SIZE,
};
pub use otr::{estimate_otr, otr_influence_values, OtrCorrection, OtrEstimate, OtrRecord};
pub use overlap::{overlap_diagnostic, OverlapReport, LOW_PROPENSITY_THRESHOLD, OVERLAP_BINS};

use crate::crossfit::NuisanceSurface;
use crate::data::CausalDataset;
use crate::error::{Error, Result};
use crate::stats::{mean, sample_variance, Z_95};

/// Uncentered influence values of one observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InfluenceRecord {
    /// Treated outcome mean, E[AY].
    pub phi_ay1: f64,
    /// Treated fraction, E[A].
    pub phi_a: f64,
    /// Counterfactual untreated outcome mass among the treated, E[π(X)μ₀(X)].
    pub phi_ay0: f64,
}

pub fn influence_values(dataset: &CausalDataset, surface: &NuisanceSurface) -> Result<Vec<InfluenceRecord>> {
    check_alignment(dataset, surface)?;
    (0..dataset.n())
        .map(|i| {
            let (w, p, m0, m1) = (surface.omega[i], surface.pi[i], surface.mu0[i], surface.mu1[i]);
            let rec = if dataset.r()[i] {
                let a = dataset.a_value(i).expect("observed row has treatment");
                let y = dataset.y()[i].expect("observed row has outcome");
                let ipw = 1.0 / w;
                InfluenceRecord {
                    phi_ay1: ipw * (a * y - m1) + m1,
                    phi_a: ipw * (a - p) + p,
                    phi_ay0: ipw * (a - p) * m0 + ipw * ((1.0 - a) * p / (1.0 - p)) * (y - m0) + p * m0,
                }
            } else {
                InfluenceRecord { phi_ay1: m1, phi_a: p, phi_ay0: p * m0 }
            };
            if !(rec.phi_ay1.is_finite() && rec.phi_a.is_finite() && rec.phi_ay0.is_finite()) {
                return Err(Error::Numeric(format!("non-finite influence value at row {} ({})", i + 1, dataset.ids()[i])));
            }
            Ok(rec)
        })
        .collect()
}

pub(crate) fn check_alignment(dataset: &CausalDataset, surface: &NuisanceSurface) -> Result<()> {
    if surface.n() != dataset.n() {
        return Err(Error::Data(format!("nuisance surface has {} rows, dataset has {}", surface.n(), dataset.n())));
    }
    Ok(())
}

/// A point estimate with its influence-function variance and Wald interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarEstimate {
    pub estimate: f64,
    pub sigma2: f64,
    pub ci: [f64; 2],
    pub n: usize,
}

impl ScalarEstimate {
    /// `influence` need not be centered; only its sample variance is used.
    pub fn from_influence(estimate: f64, influence: &[f64]) -> Self {
        let n = influence.len();
        let sigma2 = if n > 1 { sample_variance(influence) } else { 0.0 };
        let half = Z_95 * (sigma2 / n as f64).sqrt();
        Self { estimate, sigma2, ci: [estimate - half, estimate + half], n }
    }

    pub fn se(&self) -> f64 {
        (self.sigma2 / self.n as f64).sqrt()
    }

    pub fn covers(&self, value: f64) -> bool {
        self.ci[0] <= value && value <= self.ci[1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Components {
    pub psi_ay1: f64,
    pub psi_ay0: f64,
    pub psi_a: f64,
}

impl Components {
    pub fn from_records(records: &[InfluenceRecord]) -> Self {
        Self {
            psi_ay1: mean(&records.iter().map(|r| r.phi_ay1).collect::<Vec<_>>()),
            psi_ay0: mean(&records.iter().map(|r| r.phi_ay0).collect::<Vec<_>>()),
            psi_a: mean(&records.iter().map(|r| r.phi_a).collect::<Vec<_>>()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelativeReduction {
    pub estimate: f64,
    pub ci: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttEstimate {
    pub estimate: f64,
    pub components: Components,
    pub sigma2: f64,
    pub ci: [f64; 2],
    pub n: usize,
    /// ATT as a fraction of the treated outcome mean; absent when that mean is 0.
    pub relative_reduction: Option<RelativeReduction>,
}

impl AttEstimate {
    pub fn se(&self) -> f64 {
        (self.sigma2 / self.n as f64).sqrt()
    }

    pub fn covers(&self, value: f64) -> bool {
        self.ci[0] <= value && value <= self.ci[1]
    }
}

/// Combined ATT from influence records. `eps` bounds the estimated treated
/// fraction away from 0 and 1.
pub fn estimate_att(records: &[InfluenceRecord], eps: f64) -> Result<AttEstimate> {
    if records.is_empty() {
        return Err(Error::Data("no observations".into()));
    }
    let c = Components::from_records(records);
    if !(c.psi_a > eps && c.psi_a < 1.0 - eps) {
        return Err(Error::Numeric(format!(
            "treated fraction degenerate: estimated {:.6} outside ({eps}, {})",
            c.psi_a,
            1.0 - eps
        )));
    }
    let psi = (c.psi_ay1 - c.psi_ay0) / c.psi_a;
    let inf: Vec<f64> = records.iter().map(|r| (r.phi_ay1 - r.phi_ay0 - r.phi_a * psi) / c.psi_a).collect();
    let att = ScalarEstimate::from_influence(psi, &inf);

    let relative_reduction = (c.psi_ay1 != 0.0).then(|| {
        let ratio = c.psi_ay0 / c.psi_ay1;
        let inf: Vec<f64> = records.iter().map(|r| (ratio * r.phi_ay1 - r.phi_ay0) / c.psi_ay1).collect();
        let rr = ScalarEstimate::from_influence(psi * c.psi_a / c.psi_ay1, &inf);
        RelativeReduction { estimate: rr.estimate, ci: rr.ci }
    });

    Ok(AttEstimate { estimate: psi, components: c, sigma2: att.sigma2, ci: att.ci, n: records.len(), relative_reduction })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::OutcomeKind;
    use crate::matrix::DesignMatrix;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn dataset(r: Vec<bool>, a: Vec<Option<bool>>, y: Vec<Option<f64>>) -> CausalDataset {
        let n = r.len();
        CausalDataset::from_design(DesignMatrix::empty(n), r, a, y, OutcomeKind::Binary).unwrap()
    }

    fn surface(n: usize, w: f64, p: f64, m0: f64, m1: f64) -> NuisanceSurface {
        NuisanceSurface::from_values(vec![w; n], vec![p; n], vec![m0; n], vec![m1; n], None, 0.01).unwrap()
    }

    #[test]
    fn unobserved_row_uses_plug_in_terms() {
        let ds = dataset(vec![false], vec![None], vec![None]);
        let rec = influence_values(&ds, &surface(1, 0.5, 0.4, 0.2, 0.3)).unwrap()[0];
        assert_eq!(rec, InfluenceRecord { phi_ay1: 0.3, phi_a: 0.4, phi_ay0: 0.4 * 0.2 });
    }

    #[test]
    fn observed_treated_row_arithmetic() {
        let ds = dataset(vec![true], vec![Some(true)], vec![Some(1.0)]);
        let rec = influence_values(&ds, &surface(1, 0.5, 0.5, 0.2, 0.3)).unwrap()[0];
        assert_relative_eq!(rec.phi_ay1, 1.7, epsilon = 1e-12);
        assert_relative_eq!(rec.phi_a, 1.5, epsilon = 1e-12);
        assert_relative_eq!(rec.phi_ay0, 0.3, epsilon = 1e-12);
    }

    #[test]
    fn observed_control_row_arithmetic() {
        // (R/w)(A-p)m0 = 2(-0.4)(0.2); weighted residual 2 * (0.4/0.6) * 0.8; plug-in 0.08
        let ds = dataset(vec![true], vec![Some(false)], vec![Some(1.0)]);
        let rec = influence_values(&ds, &surface(1, 0.5, 0.4, 0.2, 0.3)).unwrap()[0];
        assert_relative_eq!(rec.phi_ay0, -0.16 + 2.0 * (0.4 / 0.6) * 0.8 + 0.08, epsilon = 1e-12);
        assert_relative_eq!(rec.phi_ay1, 2.0 * (0.0 - 0.3) + 0.3, epsilon = 1e-12);
    }

    #[test]
    fn null_outcome_gives_zero() {
        let n = 40;
        let ds = dataset(
            vec![true; n],
            (0..n).map(|i| Some(i % 3 == 0)).collect(),
            vec![Some(0.0); n],
        );
        let recs = influence_values(&ds, &surface(n, 0.9, 0.4, 0.0, 0.0)).unwrap();
        let est = estimate_att(&recs, 0.01).unwrap();
        assert_eq!(est.estimate, 0.0);
        assert!(est.covers(0.0));
        assert!(est.relative_reduction.is_none());
    }

    #[test]
    fn degenerate_treated_fraction_is_rejected() {
        let recs = vec![InfluenceRecord { phi_ay1: 0.0, phi_a: 0.0, phi_ay0: 0.0 }; 5];
        let err = estimate_att(&recs, 0.01).unwrap_err();
        assert!(err.to_string().contains("treated fraction degenerate"));
    }

    #[test]
    fn full_followup_unit_weights_telescope() {
        let a: Vec<Option<bool>> = (0..30).map(|i| Some(i % 4 == 1)).collect();
        let y: Vec<Option<f64>> = (0..30).map(|i| Some(((i * 7) % 5 == 0) as u8 as f64)).collect();
        let ds = dataset(vec![true; 30], a.clone(), y.clone());
        let mut s = surface(30, 1.0, 0.37, 0.21, 0.13);
        s.omega = vec![1.0; 30]; // bypass clipping
        let c = Components::from_records(&influence_values(&ds, &s).unwrap());
        let ay: f64 = a.iter().zip(&y).map(|(a, y)| a.unwrap() as u8 as f64 * y.unwrap()).sum::<f64>() / 30.0;
        let am: f64 = a.iter().map(|a| a.unwrap() as u8 as f64).sum::<f64>() / 30.0;
        assert_relative_eq!(c.psi_ay1, ay, epsilon = 1e-14);
        assert_relative_eq!(c.psi_a, am, epsilon = 1e-14);
    }

    /// Delta-method CI of the relative reduction against a numerical gradient
    /// of `1 - b/a` applied to the sample covariance of the component means.
    #[test]
    fn relative_reduction_matches_numeric_delta_method() {
        let recs: Vec<InfluenceRecord> = (0..200)
            .map(|i| {
                let t = i as f64;
                InfluenceRecord {
                    phi_ay1: 0.3 + 0.2 * (t * 0.37).sin(),
                    phi_a: 0.5 + 0.3 * (t * 0.11).cos(),
                    phi_ay0: 0.2 + 0.15 * (t * 0.53).sin() + 0.05 * (t * 0.37).sin(),
                }
            })
            .collect();
        let est = estimate_att(&recs, 0.01).unwrap();
        let rr = est.relative_reduction.unwrap();
        let c = est.components;
        assert_relative_eq!(rr.estimate, 1.0 - c.psi_ay0 / c.psi_ay1, epsilon = 1e-12);

        let n = recs.len() as f64;
        let x: Vec<f64> = recs.iter().map(|r| r.phi_ay1).collect();
        let z: Vec<f64> = recs.iter().map(|r| r.phi_ay0).collect();
        let (mx, mz) = (mean(&x), mean(&z));
        let cov = |u: &[f64], mu: f64, v: &[f64], mv: f64| u.iter().zip(v).map(|(a, b)| (a - mu) * (b - mv)).sum::<f64>() / (n - 1.0);
        let f = |a: f64, b: f64| 1.0 - b / a;
        let h = 1e-6;
        let ga = (f(mx + h, mz) - f(mx - h, mz)) / (2.0 * h);
        let gb = (f(mx, mz + h) - f(mx, mz - h)) / (2.0 * h);
        let var = ga * ga * cov(&x, mx, &x, mx) + 2.0 * ga * gb * cov(&x, mx, &z, mz) + gb * gb * cov(&z, mz, &z, mz);
        let half = Z_95 * (var / n).sqrt();
        assert_relative_eq!(rr.ci[1] - rr.estimate, half, max_relative = 1e-6);
    }

    proptest! {
        #[test]
        fn ratio_identity_and_interval_order(
            vals in prop::collection::vec((0.0f64..2.0, 0.05f64..0.95, 0.0f64..1.5), 3..60)
        ) {
            let recs: Vec<InfluenceRecord> = vals.iter().map(|&(y1, a, y0)| InfluenceRecord { phi_ay1: y1, phi_a: a, phi_ay0: y0 }).collect();
            let est = estimate_att(&recs, 0.01).unwrap();
            let c = est.components;
            prop_assert!((est.estimate * c.psi_a - (c.psi_ay1 - c.psi_ay0)).abs() <= 1e-12 * (1.0 + c.psi_ay1.abs() + c.psi_ay0.abs()));
            prop_assert!(est.ci[0] <= est.estimate && est.estimate <= est.ci[1]);
            prop_assert!(est.sigma2 >= 0.0);
        }
    }
}
