use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{mix_seed, TargetKind};
use crate::error::{Error, Result};
use crate::matrix::DesignMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestSpec {
    pub trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Fraction of features tried per split; `None` means `sqrt(d) / d`.
    pub feature_fraction: Option<f64>,
    pub bootstrap: bool,
}

impl Default for ForestSpec {
    fn default() -> Self {
        Self { trees: 200, max_depth: 8, min_leaf: 5, feature_fraction: None, bootstrap: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplitCriterion {
    Gini,
    Variance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Node {
    Leaf(f64),
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        let mut k = 0;
        loop {
            match self.nodes[k] {
                Node::Leaf(v) => return v,
                Node::Split { feature, threshold, left, right } => {
                    k = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], k: usize) -> usize {
            match nodes[k] {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        go(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<Tree>,
    pub target_kind: TargetKind,
    pub criterion: SplitCriterion,
}

impl ForestModel {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict_row(x)).sum::<f64>() / self.trees.len() as f64
    }
}

/// Bagged CART regression/classification trees. Gini impurity for binary
/// targets, squared-error reduction otherwise; leaves hold target means.
pub fn fit_random_forest(x: &DesignMatrix, t: &[f64], kind: TargetKind, spec: &ForestSpec, seed: u64) -> Result<ForestModel> {
    let n = x.nrows();
    if n < spec.min_leaf.max(1) {
        return Err(Error::Learner(format!("forest needs at least min_leaf = {} rows, got {n}", spec.min_leaf)));
    }
    if spec.trees == 0 {
        return Err(Error::Learner("forest needs at least one tree".into()));
    }
    if t.iter().any(|v| !v.is_finite()) {
        return Err(Error::Learner("non-finite forest target".into()));
    }
    let binary = t.iter().all(|&v| v == 0.0 || v == 1.0);
    let criterion = if binary { SplitCriterion::Gini } else { SplitCriterion::Variance };
    let d = x.ncols();
    let mtry = match spec.feature_fraction {
        Some(f) => ((f * d as f64).round() as usize).clamp(1, d.max(1)),
        None => ((d as f64).sqrt().round() as usize).clamp(1, d.max(1)),
    };
    let ctx = TreeContext { x, t, spec, criterion, mtry };
    let trees = (0..spec.trees)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, &[k as u64]));
            let rows: Vec<usize> = if spec.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            ctx.grow(rows, &mut rng)
        })
        .collect();
    Ok(ForestModel { trees, target_kind: kind, criterion })
}

struct TreeContext<'a> {
    x: &'a DesignMatrix,
    t: &'a [f64],
    spec: &'a ForestSpec,
    criterion: SplitCriterion,
    mtry: usize,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl TreeContext<'_> {
    fn grow(&self, rows: Vec<usize>, rng: &mut ChaCha8Rng) -> Tree {
        let mut nodes = Vec::new();
        self.build(rows, 0, &mut nodes, rng);
        Tree { nodes }
    }

    fn build(&self, mut rows: Vec<usize>, depth: usize, nodes: &mut Vec<Node>, rng: &mut ChaCha8Rng) -> usize {
        let id = nodes.len();
        let n = rows.len();
        let sum: f64 = rows.iter().map(|&i| self.t[i]).sum();
        let mean = sum / n as f64;
        nodes.push(Node::Leaf(mean));
        let pure = rows.iter().all(|&i| self.t[i] == self.t[rows[0]]);
        if depth >= self.spec.max_depth || n < 2 * self.spec.min_leaf || pure || self.x.ncols() == 0 {
            return id;
        }
        let Some(best) = self.best_split(&mut rows, rng) else {
            return id;
        };
        let (left, right): (Vec<usize>, Vec<usize>) =
            rows.into_iter().partition(|&i| self.x.get(i, best.feature) <= best.threshold);
        let l = self.build(left, depth + 1, nodes, rng);
        let r = self.build(right, depth + 1, nodes, rng);
        nodes[id] = Node::Split { feature: best.feature, threshold: best.threshold, left: l, right: r };
        id
    }

    /// Impurity of a node scaled by its size: `n * impurity`.
    fn weighted_impurity(&self, n: f64, sum: f64, sum_sq: f64) -> f64 {
        match self.criterion {
            // n * 2p(1-p) with p = sum/n
            SplitCriterion::Gini => 2.0 * sum * (n - sum) / n,
            SplitCriterion::Variance => sum_sq - sum * sum / n,
        }
    }

    fn best_split(&self, rows: &mut [usize], rng: &mut ChaCha8Rng) -> Option<BestSplit> {
        let n = rows.len();
        let min_leaf = self.spec.min_leaf.max(1);
        let total: f64 = rows.iter().map(|&i| self.t[i]).sum();
        let total_sq: f64 = rows.iter().map(|&i| self.t[i] * self.t[i]).sum();
        let parent = self.weighted_impurity(n as f64, total, total_sq);
        let mut best: Option<BestSplit> = None;
        let features = sample(rng, self.x.ncols(), self.mtry);
        for f in features.iter() {
            rows.sort_unstable_by(|&a, &b| self.x.get(a, f).total_cmp(&self.x.get(b, f)));
            let mut ls = 0.0;
            let mut lsq = 0.0;
            for k in 0..n - 1 {
                let i = rows[k];
                let ti = self.t[i];
                ls += ti;
                lsq += ti * ti;
                let nl = k + 1;
                let nr = n - nl;
                if nl < min_leaf {
                    continue;
                }
                if nr < min_leaf {
                    break;
                }
                let xv = self.x.get(i, f);
                let xn = self.x.get(rows[k + 1], f);
                if xv == xn {
                    continue;
                }
                let child = self.weighted_impurity(nl as f64, ls, lsq)
                    + self.weighted_impurity(nr as f64, total - ls, total_sq - lsq);
                let gain = parent - child;
                if gain > 1e-12 && best.as_ref().is_none_or(|b| gain > b.gain) {
                    best = Some(BestSplit { feature: f, threshold: 0.5 * (xv + xn), gain });
                }
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::{fit_logistic, LogisticSpec};

    fn xor_data() -> (DesignMatrix, Vec<f64>) {
        let mut rows = Vec::new();
        let mut t = Vec::new();
        for rep in 0..25 {
            for (a, b) in [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)] {
                let jitter = rep as f64 * 1e-3;
                rows.push(vec![a + jitter, b - jitter]);
                t.push(if (a == 1.0) != (b == 1.0) { 1.0 } else { 0.0 });
            }
        }
        (DesignMatrix::from_rows(&rows).unwrap(), t)
    }

    fn accuracy(pred: impl Fn(&[f64]) -> f64, x: &DesignMatrix, t: &[f64]) -> f64 {
        (0..x.nrows()).filter(|&i| (pred(x.row(i)) >= 0.5) == (t[i] == 1.0)).count() as f64 / t.len() as f64
    }

    #[test]
    fn constant_target_gives_constant_prediction() {
        let x = DesignMatrix::from_rows(&(0..20).map(|i| vec![i as f64, (i % 3) as f64]).collect::<Vec<_>>()).unwrap();
        let t = vec![0.3; 20];
        let m = fit_random_forest(&x, &t, TargetKind::Real, &ForestSpec { trees: 5, ..Default::default() }, 1).unwrap();
        for i in 0..20 {
            assert!((m.predict_row(x.row(i)) - 0.3).abs() < 1e-12);
        }
        assert!(m.trees.iter().all(|tr| tr.depth() == 0));
    }

    #[test]
    fn beats_linear_model_on_xor() {
        let (x, t) = xor_data();
        let spec = ForestSpec { trees: 50, max_depth: 4, min_leaf: 1, feature_fraction: Some(1.0), bootstrap: true };
        let rf = fit_random_forest(&x, &t, TargetKind::Probability, &spec, 3).unwrap();
        let lr = fit_logistic(&x, &t, &LogisticSpec::default()).unwrap();
        let acc_rf = accuracy(|r| rf.predict_row(r), &x, &t);
        let acc_lr = accuracy(|r| lr.predict_row(r), &x, &t);
        assert!(acc_rf > acc_lr, "forest {acc_rf} vs logistic {acc_lr}");
        assert_eq!(acc_rf, 1.0);
    }

    #[test]
    fn single_stump_matches_branch_means() {
        // hand enumeration: x=0 -> targets {0,0,1} mean 1/3; x=1 -> {1,1,0,1} mean 3/4
        let xs = [0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0];
        let t = [0.0, 0.0, 1.0, 1.0, 1.0, 0.0, 1.0];
        let x = DesignMatrix::from_rows(&xs.iter().map(|&v| vec![v]).collect::<Vec<_>>()).unwrap();
        let spec = ForestSpec { trees: 1, max_depth: 1, min_leaf: 1, feature_fraction: Some(1.0), bootstrap: false };
        let m = fit_random_forest(&x, &t, TargetKind::Probability, &spec, 0).unwrap();
        assert!((m.predict_row(&[0.0]) - 1.0 / 3.0).abs() < 1e-15);
        assert!((m.predict_row(&[1.0]) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn deterministic_given_seed() {
        let (x, t) = xor_data();
        let spec = ForestSpec { trees: 10, ..Default::default() };
        let a = fit_random_forest(&x, &t, TargetKind::Probability, &spec, 42).unwrap();
        let b = fit_random_forest(&x, &t, TargetKind::Probability, &spec, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn tree_order_and_duplication_invariance() {
        let (x, t) = xor_data();
        let spec = ForestSpec { trees: 7, max_depth: 3, min_leaf: 2, ..Default::default() };
        let m = fit_random_forest(&x, &t, TargetKind::Probability, &spec, 9).unwrap();
        let mut rev = m.clone();
        rev.trees.reverse();
        let copies = ForestModel { trees: vec![m.trees[0].clone(); 5], ..m.clone() };
        for i in 0..x.nrows() {
            let r = x.row(i);
            assert!((m.predict_row(r) - rev.predict_row(r)).abs() < 1e-12);
            assert!((copies.predict_row(r) - m.trees[0].predict_row(r)).abs() < 1e-12);
        }
    }

    #[test]
    fn real_targets_use_variance_criterion() {
        let x = DesignMatrix::from_rows(&(0..40).map(|i| vec![i as f64]).collect::<Vec<_>>()).unwrap();
        let t: Vec<f64> = (0..40).map(|i| if i < 20 { 0.2 } else { 0.7 }).collect();
        let spec = ForestSpec { trees: 1, max_depth: 1, min_leaf: 1, feature_fraction: Some(1.0), bootstrap: false };
        let m = fit_random_forest(&x, &t, TargetKind::Real, &spec, 0).unwrap();
        assert_eq!(m.criterion, SplitCriterion::Variance);
        assert!((m.predict_row(&[3.0]) - 0.2).abs() < 1e-12);
        assert!((m.predict_row(&[30.0]) - 0.7).abs() < 1e-12);
    }

    #[test]
    fn respects_min_leaf() {
        assert!(fit_random_forest(&DesignMatrix::from_rows(&[vec![1.0]]).unwrap(), &[1.0], TargetKind::Real, &ForestSpec::default(), 0).is_err());
    }
}
