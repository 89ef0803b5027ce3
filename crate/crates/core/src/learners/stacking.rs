use serde::{Deserialize, Serialize};

use super::{fit, mix_seed, FittedModel, LearnerSpec, TargetKind};
use crate::crossfit::assign_folds;
use crate::error::{Error, Result};
use crate::matrix::DesignMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperLearnerSpec {
    pub bases: Vec<LearnerSpec>,
    pub folds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackedModel {
    pub models: Vec<FittedModel>,
    pub weights: Vec<f64>,
    /// Names of the surviving base learners, aligned with `weights`.
    pub names: Vec<String>,
    /// Cross-validated mean squared error per surviving base learner.
    pub cv_risk: Vec<f64>,
    /// Cross-validated mean squared error of the weighted combination.
    pub ensemble_cv_risk: f64,
    pub target_kind: TargetKind,
}

impl StackedModel {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        self.models.iter().zip(&self.weights).map(|(m, w)| w * m.predict_row(x)).sum()
    }
}

/// Convex stacking of base learners by V-fold cross-validated squared error.
pub fn fit_super_learner(x: &DesignMatrix, t: &[f64], kind: TargetKind, spec: &SuperLearnerSpec, seed: u64) -> Result<StackedModel> {
    let n = x.nrows();
    if spec.bases.is_empty() {
        return Err(Error::Learner("super learner has no base learners".into()));
    }
    if spec.folds < 2 || n < 2 * spec.folds {
        return Err(Error::Learner(format!("super learner needs at least {} rows for {} folds, got {n}", 2 * spec.folds, spec.folds)));
    }
    let folds = assign_folds(n, spec.folds, mix_seed(seed, &[u64::MAX]))?;

    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut survivors: Vec<usize> = Vec::new();
    'base: for (b, base) in spec.bases.iter().enumerate() {
        let mut cv = vec![0.0; n];
        for k in 0..spec.folds {
            let (train, test) = folds.split(k);
            let xt = x.select_rows(&train);
            let tt: Vec<f64> = train.iter().map(|&i| t[i]).collect();
            match fit(base, &xt, &tt, kind, mix_seed(seed, &[b as u64, k as u64])) {
                Ok(m) => {
                    for &i in &test {
                        cv[i] = m.predict_row(x.row(i));
                    }
                }
                Err(e) => {
                    log::warn!("super learner: dropping base `{}`: {e}", base.name());
                    continue 'base;
                }
            }
        }
        columns.push(cv);
        survivors.push(b);
    }
    if survivors.is_empty() {
        return Err(Error::Learner("every super learner base failed".into()));
    }

    let weights = simplex_least_squares(&columns, t);
    let mse = |pred: &dyn Fn(usize) -> f64| (0..n).map(|i| (t[i] - pred(i)).powi(2)).sum::<f64>() / n as f64;
    let cv_risk: Vec<f64> = columns.iter().map(|c| mse(&|i| c[i])).collect();
    let ensemble_cv_risk = mse(&|i| columns.iter().zip(&weights).map(|(c, w)| w * c[i]).sum());

    let mut models = Vec::with_capacity(survivors.len());
    for &b in &survivors {
        models.push(fit(&spec.bases[b], x, t, kind, mix_seed(seed, &[b as u64, u64::MAX - 1]))?);
    }
    Ok(StackedModel {
        models,
        weights,
        names: survivors.iter().map(|&b| spec.bases[b].name()).collect(),
        cv_risk,
        ensemble_cv_risk,
        target_kind: kind,
    })
}

/// Minimizes `|Z w - t|^2` over the probability simplex, where `Z` has the
/// given columns. Accelerated projected gradient; if no iterate beats the best
/// single column, that vertex is returned.
pub fn simplex_least_squares(columns: &[Vec<f64>], t: &[f64]) -> Vec<f64> {
    let b = columns.len();
    if b == 1 {
        return vec![1.0];
    }
    // Gram matrix and Z^T t
    let mut g = vec![vec![0.0; b]; b];
    let mut zt = vec![0.0; b];
    for j in 0..b {
        zt[j] = columns[j].iter().zip(t).map(|(a, y)| a * y).sum();
        for k in j..b {
            let v: f64 = columns[j].iter().zip(&columns[k]).map(|(a, c)| a * c).sum();
            g[j][k] = v;
            g[k][j] = v;
        }
    }
    let tt: f64 = t.iter().map(|y| y * y).sum();
    let objective = |w: &[f64]| -> f64 {
        let mut q = 0.0;
        for j in 0..b {
            for k in 0..b {
                q += w[j] * g[j][k] * w[k];
            }
        }
        q - 2.0 * w.iter().zip(&zt).map(|(a, c)| a * c).sum::<f64>() + tt
    };
    // Lipschitz constant of the gradient: 2 * largest eigenvalue <= 2 * max row sum
    let lip = 2.0 * g.iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    if !(lip > 0.0) {
        return vec![1.0 / b as f64; b];
    }
    let mut w = vec![1.0 / b as f64; b];
    let mut v = w.clone();
    let mut theta = 1.0f64;
    for _ in 0..20_000 {
        let grad: Vec<f64> = (0..b).map(|j| 2.0 * ((0..b).map(|k| g[j][k] * v[k]).sum::<f64>() - zt[j])).collect();
        let step: Vec<f64> = v.iter().zip(&grad).map(|(a, gr)| a - gr / lip).collect();
        let w_next = project_simplex(&step);
        let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
        let mom = (theta - 1.0) / theta_next;
        v = w_next.iter().zip(&w).map(|(a, p)| a + mom * (a - p)).collect();
        let delta = w_next.iter().zip(&w).map(|(a, p)| (a - p).abs()).fold(0.0, f64::max);
        // restart momentum when the objective goes up
        if objective(&w_next) > objective(&w) {
            v = w_next.clone();
            theta = 1.0;
        } else {
            theta = theta_next;
        }
        w = w_next;
        if delta < 1e-15 {
            break;
        }
    }
    let best_vertex = (0..b).min_by(|&j, &k| (g[j][j] - 2.0 * zt[j]).total_cmp(&(g[k][k] - 2.0 * zt[k]))).unwrap();
    let mut vertex = vec![0.0; b];
    vertex[best_vertex] = 1.0;
    if objective(&vertex) < objective(&w) {
        return vertex;
    }
    w
}

/// Euclidean projection onto `{w >= 0, sum w = 1}`.
fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut css = 0.0;
    let mut tau = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        css += uj;
        let cand = (css - 1.0) / (j + 1) as f64;
        if uj - cand > 0.0 {
            tau = cand;
        }
    }
    let mut w: Vec<f64> = v.iter().map(|x| (x - tau).max(0.0)).collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    w
}
