use serde::{Deserialize, Serialize};

use super::{check_alignment, ScalarEstimate};
use crate::crossfit::NuisanceSurface;
use crate::data::CausalDataset;
use crate::error::{Error, Result};
use crate::stats::mean;

/// Weighting of the untreated-outcome residual in the E[Y⁰] term.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OtrCorrection {
    /// `R(1-A) / (ω(1-π))`, the influence function of E[μ₀(X)].
    #[default]
    Efficient,
    /// `R(1-A)π / (ω(1-π))`. Not doubly robust; kept for comparison only.
    PiWeighted,
}

/// Uncentered influence values for the overall treatment removal effect.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OtrRecord {
    /// E[Y]
    pub phi_y: f64,
    /// E[Y⁰]
    pub phi_y0: f64,
    /// E[A], used by the additive sensitivity bounds.
    pub phi_a: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OtrEstimate {
    pub estimate: f64,
    pub psi_y: f64,
    pub psi_y0: f64,
    pub psi_a: f64,
    pub sigma2: f64,
    pub ci: [f64; 2],
    pub n: usize,
    pub correction: OtrCorrection,
}

pub fn otr_influence_values(dataset: &CausalDataset, surface: &NuisanceSurface, correction: OtrCorrection) -> Result<Vec<OtrRecord>> {
    check_alignment(dataset, surface)?;
    let mu_y = surface
        .mu_y
        .as_ref()
        .ok_or_else(|| Error::Config("OTR needs the E[Y | X, R=1] nuisance; fit it with want_mu_y".into()))?;
    (0..dataset.n())
        .map(|i| {
            let (w, p, m0, my) = (surface.omega[i], surface.pi[i], surface.mu0[i], mu_y[i]);
            let rec = if dataset.r()[i] {
                let a = dataset.a_value(i).expect("observed row has treatment");
                let y = dataset.y()[i].expect("observed row has outcome");
                let weight = match correction {
                    OtrCorrection::Efficient => (1.0 - a) / (w * (1.0 - p)),
                    OtrCorrection::PiWeighted => (1.0 - a) * p / (w * (1.0 - p)),
                };
                OtrRecord { phi_y: (y - my) / w + my, phi_y0: weight * (y - m0) + m0, phi_a: (a - p) / w + p }
            } else {
                OtrRecord { phi_y: my, phi_y0: m0, phi_a: p }
            };
            if !(rec.phi_y.is_finite() && rec.phi_y0.is_finite() && rec.phi_a.is_finite()) {
                return Err(Error::Numeric(format!("non-finite OTR influence value at row {} ({})", i + 1, dataset.ids()[i])));
            }
            Ok(rec)
        })
        .collect()
}

pub fn estimate_otr(records: &[OtrRecord], correction: OtrCorrection) -> Result<OtrEstimate> {
    if records.is_empty() {
        return Err(Error::Data("no observations".into()));
    }
    let psi_y = mean(&records.iter().map(|r| r.phi_y).collect::<Vec<_>>());
    let psi_y0 = mean(&records.iter().map(|r| r.phi_y0).collect::<Vec<_>>());
    let psi_a = mean(&records.iter().map(|r| r.phi_a).collect::<Vec<_>>());
    let diff: Vec<f64> = records.iter().map(|r| r.phi_y - r.phi_y0).collect();
    let s = ScalarEstimate::from_influence(psi_y - psi_y0, &diff);
    Ok(OtrEstimate { estimate: s.estimate, psi_y, psi_y0, psi_a, sigma2: s.sigma2, ci: s.ci, n: s.n, correction })
}

impl OtrEstimate {
    pub fn se(&self) -> f64 {
        (self.sigma2 / self.n as f64).sqrt()
    }
}
