//! Synthetic data-generating processes with known ground truth, and Monte
//! Carlo experiments over them.

mod experiment;
mod generate;
mod oracle;
mod presets;

use serde::{Deserialize, Serialize};

pub use experiment::{
    convergence_study, homogeneity_experiment, run_experiment, ConvergenceRow, ConvergenceTable, ExperimentConfig,
    ExperimentReport, HomogeneityReport, Mechanism, MisspecFlags, NuisanceSource,
};
pub use generate::{generate, true_surface, SimSample};
pub use oracle::{calibration_ratio, oracle_att, oracle_components, oracle_otr, true_delta, OracleValue, TrueNuisances};

use crate::error::{Error, Result};
use crate::learners::logistic::expit;

/// Lower bound on P(R=1|X) and on P(A=0|X) that every DGP must respect.
pub const POSITIVITY_FLOOR: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum CovariateLaw {
    /// Finitely many covariate vectors with given probabilities.
    Discrete {
        cells: Vec<Vec<f64>>,
        probs: Vec<f64>,
        /// Optional subgroup label per cell.
        #[serde(default)]
        groups: Option<Vec<String>>,
    },
    /// Independent uniforms on `[-1, 1]^dim`.
    UniformCube { dim: usize },
}

/// A conditional mean as a function of the full covariate vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum Response {
    /// One value per discrete cell.
    Table { values: Vec<f64> },
    /// `expit(intercept + coef · x)`.
    Logistic { intercept: f64, coef: Vec<f64> },
}

impl Response {
    pub fn eval(&self, cell: Option<usize>, x: &[f64]) -> f64 {
        match self {
            Response::Table { values } => values[cell.expect("table response needs a discrete cell")],
            Response::Logistic { intercept, coef } => expit(intercept + coef.iter().zip(x).map(|(b, v)| b * v).sum::<f64>()),
        }
    }
}

/// How the treated potential-outcome mean is specified.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "form")]
pub enum TreatedOutcome {
    /// E[Y¹ | x] directly.
    Mean { response: Response },
    /// E[A·Y¹ | x] = π(x)·E[Y¹ | x].
    TreatedProduct { response: Response },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignEncoding {
    /// Indicators of every non-reference level of each observed feature and
    /// all their cross products: a saturated design for discrete covariates.
    #[default]
    Saturated,
    /// Observed feature values as columns.
    Raw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub name: String,
    pub feature_names: Vec<String>,
    pub law: CovariateLaw,
    /// Indices of the features the analyst sees; the rest are hidden.
    pub observed: Vec<usize>,
    pub encoding: DesignEncoding,
    pub treatment: Response,
    pub followup: Response,
    pub control_outcome: Response,
    pub treated_outcome: TreatedOutcome,
    /// Observed features withheld from a learner under the drop-covariates
    /// misspecification.
    #[serde(default)]
    pub drop_for_misspec: Vec<usize>,
}

/// Population quantities at one covariate vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct CellLaw {
    pub omega: f64,
    pub pi: f64,
    pub m0: f64,
    pub m1: f64,
}

impl DgpSpec {
    pub fn dim(&self) -> usize {
        self.feature_names.len()
    }

    pub fn has_hidden(&self) -> bool {
        self.observed.len() < self.dim()
    }

    pub(crate) fn cell_law(&self, cell: Option<usize>, x: &[f64]) -> CellLaw {
        let pi = self.treatment.eval(cell, x);
        let m1 = match &self.treated_outcome {
            TreatedOutcome::Mean { response } => response.eval(cell, x),
            TreatedOutcome::TreatedProduct { response } => response.eval(cell, x) / pi,
        };
        CellLaw { omega: self.followup.eval(cell, x), pi, m0: self.control_outcome.eval(cell, x), m1 }
    }

    /// Checks shapes and the positivity and range conditions. Logistic
    /// responses are monotone in each coordinate, so the cube's corners bound them.
    pub fn validate(&self) -> Result<()> {
        let dim = self.dim();
        let bad = |m: String| Err(Error::Config(format!("dgp `{}`: {m}", self.name)));
        if self.observed.is_empty() || self.observed.iter().any(|&j| j >= dim) {
            return bad("observed feature indices out of range".into());
        }
        if self.drop_for_misspec.iter().any(|j| !self.observed.contains(j)) {
            return bad("misspecification drops a feature that is not observed".into());
        }
        let points: Vec<(Option<usize>, Vec<f64>)> = match &self.law {
            CovariateLaw::Discrete { cells, probs, groups } => {
                if cells.is_empty() || cells.len() != probs.len() {
                    return bad("cells and probabilities differ in length".into());
                }
                if cells.iter().any(|c| c.len() != dim) {
                    return bad("cell width differs from feature count".into());
                }
                if probs.iter().any(|&p| !(p >= 0.0)) || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                    return bad("cell probabilities must be nonnegative and sum to 1".into());
                }
                if groups.as_ref().is_some_and(|g| g.len() != cells.len()) {
                    return bad("group labels differ in length from cells".into());
                }
                cells.iter().cloned().enumerate().map(|(c, x)| (Some(c), x)).collect()
            }
            CovariateLaw::UniformCube { dim: d } => {
                if *d != dim {
                    return bad("cube dimension differs from feature count".into());
                }
                if self.has_hidden() {
                    return bad("continuous laws cannot have hidden features".into());
                }
                (0..1usize << dim)
                    .map(|m| (None, (0..dim).map(|j| if m >> j & 1 == 1 { 1.0 } else { -1.0 }).collect()))
                    .collect()
            }
        };
        for r in [&self.treatment, &self.followup, &self.control_outcome] {
            self.check_response(r)?;
        }
        match &self.treated_outcome {
            TreatedOutcome::Mean { response } | TreatedOutcome::TreatedProduct { response } => self.check_response(response)?,
        }
        for (cell, x) in &points {
            let l = self.cell_law(*cell, x);
            if l.omega < POSITIVITY_FLOOR {
                return bad(format!("follow-up probability {} below {POSITIVITY_FLOOR} at {x:?}", l.omega));
            }
            if l.pi > 1.0 - POSITIVITY_FLOOR || l.pi <= 0.0 {
                return bad(format!("treatment probability {} outside (0, {}] at {x:?}", l.pi, 1.0 - POSITIVITY_FLOOR));
            }
            for (what, v) in [("omega", l.omega), ("control outcome", l.m0), ("treated outcome", l.m1)] {
                if !(0.0..=1.0).contains(&v) {
                    return bad(format!("{what} mean {v} outside [0, 1] at {x:?}"));
                }
            }
        }
        Ok(())
    }

    fn check_response(&self, r: &Response) -> Result<()> {
        match (r, &self.law) {
            (Response::Table { values }, CovariateLaw::Discrete { cells, .. }) if values.len() == cells.len() => Ok(()),
            (Response::Table { .. }, CovariateLaw::Discrete { .. }) => {
                Err(Error::Config(format!("dgp `{}`: table length differs from cell count", self.name)))
            }
            (Response::Table { .. }, _) => Err(Error::Config(format!("dgp `{}`: table responses need a discrete law", self.name))),
            (Response::Logistic { coef, .. }, _) if coef.len() == self.dim() => Ok(()),
            (Response::Logistic { .. }, _) => {
                Err(Error::Config(format!("dgp `{}`: logistic coefficient count differs from feature count", self.name)))
            }
        }
    }

    pub fn preset(name: &str) -> Result<DgpSpec> {
        Ok(match name {
            "reference" => presets::reference(),
            "strong_confounding" => presets::strong_confounding(),
            "omitted_confounder" => presets::omitted_confounder(),
            "smooth" => presets::smooth(),
            "homogeneous_groups" => presets::homogeneous_groups(),
            "two_group_gap" => presets::two_group_gap(),
            "low_overlap" => presets::low_overlap(),
            other => {
                return Err(Error::Config(format!(
                    "unknown dgp `{other}`; expected one of {}",
                    PRESETS.join(", ")
                )))
            }
        })
    }

    /// Same process with a different set of observed features.
    pub fn with_observed(mut self, observed: Vec<usize>) -> Self {
        self.observed = observed;
        self
    }
}

pub const PRESETS: [&str; 7] =
    ["reference", "strong_confounding", "omitted_confounder", "smooth", "homogeneous_groups", "two_group_gap", "low_overlap"];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for name in PRESETS {
            DgpSpec::preset(name).unwrap().validate().unwrap();
        }
        assert!(DgpSpec::preset("nope").is_err());
    }

    #[test]
    fn positivity_violation_rejected() {
        let mut d = presets::reference();
        d.followup = Response::Table { values: vec![0.8, 0.01] };
        assert!(d.validate().unwrap_err().to_string().contains("follow-up"));
        let mut d = presets::reference();
        d.treatment = Response::Table { values: vec![0.3, 0.99] };
        assert!(d.validate().is_err());
    }

    #[test]
    fn shape_errors() {
        let mut d = presets::reference();
        d.control_outcome = Response::Table { values: vec![0.2] };
        assert!(d.validate().is_err());
        let mut d = presets::smooth();
        d.observed = vec![0, 1];
        assert!(d.validate().is_err());
        let d = presets::reference().with_observed(vec![3]);
        assert!(d.validate().is_err());
    }

    #[test]
    fn spec_round_trips_through_json() {
        let d = presets::omitted_confounder();
        let s = serde_json::to_string(&d).unwrap();
        assert_eq!(serde_json::from_str::<DgpSpec>(&s).unwrap(), d);
    }
}
