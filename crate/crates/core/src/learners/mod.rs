//! Supervised learners for the nuisance regressions.
//!
//! Three learner families are available: ridge-penalized logistic regression
//! fit by IRLS, a bagged CART random forest, and a super learner that stacks
//! any of them with simplex-constrained weights chosen by cross-validation.
//! All fits are deterministic functions of `(data, spec, seed)`.

mod forest;
pub(crate) mod logistic;
mod stacking;

use serde::{Deserialize, Serialize};

pub use forest::{fit_random_forest, ForestModel, ForestSpec, SplitCriterion};
pub use logistic::{fit_logistic, LogisticModel, LogisticSpec};
pub use stacking::{fit_super_learner, simplex_least_squares, StackedModel, SuperLearnerSpec};

use crate::error::{Error, Result};
use crate::matrix::DesignMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    /// Targets in `[0, 1]`; predictions are probabilities.
    Probability,
    Real,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum LearnerSpec {
    Logistic(LogisticSpec),
    RandomForest(ForestSpec),
    SuperLearner(SuperLearnerSpec),
}

impl Default for LearnerSpec {
    /// Logistic regression and a random forest stacked with 5-fold CV.
    fn default() -> Self {
        LearnerSpec::SuperLearner(SuperLearnerSpec {
            bases: vec![
                LearnerSpec::Logistic(LogisticSpec::default()),
                LearnerSpec::RandomForest(ForestSpec::default()),
            ],
            folds: 5,
        })
    }
}

impl LearnerSpec {
    pub fn logistic() -> Self {
        LearnerSpec::Logistic(LogisticSpec::default())
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            LearnerSpec::Logistic(s) => {
                if !(s.lambda >= 0.0) {
                    return Err(Error::Config(format!("ridge penalty must be >= 0, got {}", s.lambda)));
                }
            }
            LearnerSpec::RandomForest(s) => {
                if s.trees == 0 {
                    return Err(Error::Config("forest needs at least one tree".into()));
                }
                if s.min_leaf == 0 {
                    return Err(Error::Config("min_leaf must be >= 1".into()));
                }
                if let Some(f) = s.feature_fraction {
                    if !(f > 0.0 && f <= 1.0) {
                        return Err(Error::Config(format!("feature_fraction must lie in (0, 1], got {f}")));
                    }
                }
            }
            LearnerSpec::SuperLearner(s) => {
                if s.folds < 2 {
                    return Err(Error::Config("super learner needs at least 2 folds".into()));
                }
                if s.bases.is_empty() {
                    return Err(Error::Config("super learner needs at least one base learner".into()));
                }
                s.bases.iter().try_for_each(LearnerSpec::validate)?;
            }
        }
        Ok(())
    }

    /// Parses `name[:key=value]*` entries separated by commas, e.g.
    /// `logistic:lambda=1e-3,forest:trees=100:max_depth=6`. More than one entry
    /// yields a super learner with `stack_folds` folds.
    pub fn parse(s: &str, stack_folds: usize) -> Result<Self> {
        let mut bases = Vec::new();
        for entry in s.split(',').map(str::trim).filter(|e| !e.is_empty()) {
            let mut parts = entry.split(':');
            let name = parts.next().unwrap_or_default();
            let kv: Vec<(&str, &str)> = parts
                .map(|p| {
                    p.split_once('=')
                        .map(|(k, v)| (k.trim(), v.trim()))
                        .ok_or_else(|| Error::Config(format!("expected key=value in learner option `{p}`")))
                })
                .collect::<Result<_>>()?;
            let num = |k: &str, v: &str| -> Result<f64> {
                v.parse::<f64>().map_err(|_| Error::Config(format!("learner option `{k}` expects a number, got `{v}`")))
            };
            let spec = match name {
                "logistic" | "glm" => {
                    let mut l = LogisticSpec::default();
                    for (k, v) in kv {
                        match k {
                            "lambda" => l.lambda = num(k, v)?,
                            _ => return Err(Error::Config(format!("unknown logistic option `{k}`"))),
                        }
                    }
                    LearnerSpec::Logistic(l)
                }
                "forest" | "random_forest" | "rf" => {
                    let mut f = ForestSpec::default();
                    for (k, v) in kv {
                        match k {
                            "trees" => f.trees = num(k, v)? as usize,
                            "max_depth" => f.max_depth = num(k, v)? as usize,
                            "min_leaf" => f.min_leaf = num(k, v)? as usize,
                            "feature_fraction" => f.feature_fraction = Some(num(k, v)?),
                            "bootstrap" => f.bootstrap = v == "true" || v == "1",
                            _ => return Err(Error::Config(format!("unknown forest option `{k}`"))),
                        }
                    }
                    LearnerSpec::RandomForest(f)
                }
                other => return Err(Error::Config(format!("unknown learner `{other}`"))),
            };
            bases.push(spec);
        }
        let spec = match bases.len() {
            0 => return Err(Error::Config("empty learner list".into())),
            1 => bases.pop().unwrap(),
            _ => LearnerSpec::SuperLearner(SuperLearnerSpec { bases, folds: stack_folds }),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Human-readable name used in warnings.
    pub fn name(&self) -> String {
        match self {
            LearnerSpec::Logistic(_) => "logistic".into(),
            LearnerSpec::RandomForest(_) => "random_forest".into(),
            LearnerSpec::SuperLearner(s) => {
                format!("super_learner({})", s.bases.iter().map(LearnerSpec::name).collect::<Vec<_>>().join(","))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FittedModel {
    Logistic(LogisticModel),
    Forest(ForestModel),
    Stacked(StackedModel),
}

impl FittedModel {
    pub fn target_kind(&self) -> TargetKind {
        match self {
            FittedModel::Logistic(_) => TargetKind::Probability,
            FittedModel::Forest(f) => f.target_kind,
            FittedModel::Stacked(s) => s.target_kind,
        }
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        match self {
            FittedModel::Logistic(m) => m.predict_row(x),
            FittedModel::Forest(m) => m.predict_row(x),
            FittedModel::Stacked(m) => m.predict_row(x),
        }
    }

    pub fn predict(&self, x: &DesignMatrix) -> Vec<f64> {
        (0..x.nrows()).map(|i| self.predict_row(x.row(i))).collect()
    }
}

/// Fits the learner described by `spec`.
pub fn fit(spec: &LearnerSpec, x: &DesignMatrix, t: &[f64], kind: TargetKind, seed: u64) -> Result<FittedModel> {
    if x.nrows() != t.len() {
        return Err(Error::Learner(format!("{} rows but {} targets", x.nrows(), t.len())));
    }
    if x.nrows() == 0 {
        return Err(Error::Learner("cannot fit on zero rows".into()));
    }
    match spec {
        LearnerSpec::Logistic(s) => fit_logistic(x, t, s).map(FittedModel::Logistic),
        LearnerSpec::RandomForest(s) => fit_random_forest(x, t, kind, s, seed).map(FittedModel::Forest),
        LearnerSpec::SuperLearner(s) => fit_super_learner(x, t, kind, s, seed).map(FittedModel::Stacked),
    }
}

/// Predictions clamped into `[eps, 1 - eps]`, with the number of clamped rows.
pub fn predict_clipped(model: &FittedModel, x: &DesignMatrix, eps: f64) -> Result<(Vec<f64>, usize)> {
    if model.target_kind() != TargetKind::Probability {
        return Err(Error::Config("clipping applies to probability models only".into()));
    }
    let raw = model.predict(x);
    clip(&raw, eps)
}

pub fn clip(values: &[f64], eps: f64) -> Result<(Vec<f64>, usize)> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::Config(format!("clip bound must lie in (0, 0.5), got {eps}")));
    }
    let mut clipped = 0;
    let out = values
        .iter()
        .map(|&p| {
            let c = p.clamp(eps, 1.0 - eps);
            if c != p {
                clipped += 1;
            }
            c
        })
        .collect();
    Ok((out, clipped))
}

/// SplitMix64 finalizer; derives independent seeds from a base seed and tags.
pub fn mix_seed(seed: u64, tags: &[u64]) -> u64 {
    let mut z = seed ^ 0x9E37_79B9_7F4A_7C15;
    for &t in tags {
        z = splitmix(z ^ splitmix(t.wrapping_add(0x632B_E59B_D9B4_E019)));
    }
    splitmix(z)
}

pub fn name_tag(name: &str) -> u64 {
    // FNV-1a
    name.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
