//! K-fold cross-fitting of the nuisance regressions.
//!
//! Every prediction for a row in fold `k` comes from a model trained only on
//! rows outside fold `k`.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{CausalDataset, OutcomeKind};
use crate::error::{Error, Result};
use crate::learners::{self, clip, mix_seed, name_tag, LearnerSpec, TargetKind};
use crate::matrix::DesignMatrix;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub k: usize,
    pub fold_of: Vec<usize>,
    pub seed: u64,
}

impl FoldAssignment {
    pub fn n(&self) -> usize {
        self.fold_of.len()
    }

    /// `(training rows, held-out rows)` for fold `k`, each in row order.
    pub fn split(&self, k: usize) -> (Vec<usize>, Vec<usize>) {
        let mut train = Vec::with_capacity(self.n());
        let mut test = Vec::new();
        for (i, &f) in self.fold_of.iter().enumerate() {
            if f == k {
                test.push(i);
            } else {
                train.push(i);
            }
        }
        (train, test)
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        self.fold_of.iter().for_each(|&f| s[f] += 1);
        s
    }
}

/// Seeded uniform permutation cut into `k` contiguous blocks whose sizes differ by at most one.
pub fn assign_folds(n: usize, k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::Config(format!("fold count must be >= 2, got {k}")));
    }
    if k > n {
        return Err(Error::Config(format!("fold count {k} exceeds sample size {n}")));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let base = n / k;
    let extra = n % k;
    let mut fold_of = vec![0; n];
    let mut pos = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        for &i in &perm[pos..pos + size] {
            fold_of[i] = f;
        }
        pos += size;
    }
    Ok(FoldAssignment { k, fold_of, seed })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Nuisance {
    /// P(R=1 | X)
    Omega,
    /// E[A | X, R=1]
    Pi,
    /// E[Y | X, R=1, A=0]
    Mu0,
    /// E[AY | X, R=1]
    Mu1,
    /// E[Y | X, R=1]
    MuY,
}

impl Nuisance {
    pub const ALL: [Nuisance; 5] = [Nuisance::Omega, Nuisance::Pi, Nuisance::Mu0, Nuisance::Mu1, Nuisance::MuY];

    pub fn name(self) -> &'static str {
        match self {
            Nuisance::Omega => "omega",
            Nuisance::Pi => "pi",
            Nuisance::Mu0 => "mu0",
            Nuisance::Mu1 => "mu1",
            Nuisance::MuY => "mu_y",
        }
    }

    /// Training population and target for each row; `None` rows are never trained on.
    pub fn targets(self, ds: &CausalDataset) -> Vec<Option<f64>> {
        (0..ds.n())
            .map(|i| {
                let r = ds.r()[i];
                let a = ds.a_value(i);
                let y = ds.y()[i];
                match self {
                    Nuisance::Omega => Some(if r { 1.0 } else { 0.0 }),
                    Nuisance::Pi => a,
                    Nuisance::Mu0 => (a == Some(0.0)).then_some(y).flatten(),
                    Nuisance::Mu1 => a.zip(y).map(|(a, y)| a * y),
                    Nuisance::MuY => y,
                }
            })
            .collect()
    }

    fn target_kind(self, outcome: OutcomeKind) -> TargetKind {
        match (self, outcome) {
            (Nuisance::Omega | Nuisance::Pi, _) | (_, OutcomeKind::Binary) => TargetKind::Probability,
            (_, OutcomeKind::Bounded) => TargetKind::Real,
        }
    }

    fn subset_description(self) -> &'static str {
        match self {
            Nuisance::Omega => "all rows",
            Nuisance::Pi | Nuisance::Mu1 | Nuisance::MuY => "rows with R=1",
            Nuisance::Mu0 => "rows with R=1 and A=0",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipCounts {
    pub omega: usize,
    pub pi: usize,
}

/// Out-of-fold nuisance predictions for every row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NuisanceSurface {
    pub omega: Vec<f64>,
    pub pi: Vec<f64>,
    pub mu0: Vec<f64>,
    pub mu1: Vec<f64>,
    pub mu_y: Option<Vec<f64>>,
    pub clip: f64,
    pub clip_counts: ClipCounts,
    pub folds: Option<FoldAssignment>,
}

impl NuisanceSurface {
    /// Surface from externally supplied nuisance values (true nuisances in
    /// simulation, or hand-built fixtures). `omega` and `pi` are clipped at `clip`.
    pub fn from_values(omega: Vec<f64>, pi: Vec<f64>, mu0: Vec<f64>, mu1: Vec<f64>, mu_y: Option<Vec<f64>>, clip_eps: f64) -> Result<Self> {
        let n = omega.len();
        if pi.len() != n || mu0.len() != n || mu1.len() != n || mu_y.as_ref().is_some_and(|m| m.len() != n) {
            return Err(Error::Data("nuisance vectors have different lengths".into()));
        }
        let (omega, co) = clip(&omega, clip_eps)?;
        let (pi, cp) = clip(&pi, clip_eps)?;
        Ok(Self { omega, pi, mu0, mu1, mu_y, clip: clip_eps, clip_counts: ClipCounts { omega: co, pi: cp }, folds: None })
    }

    pub fn n(&self) -> usize {
        self.omega.len()
    }

    pub fn select_rows(&self, idx: &[usize]) -> NuisanceSurface {
        let pick = |v: &Vec<f64>| idx.iter().map(|&i| v[i]).collect::<Vec<_>>();
        NuisanceSurface {
            omega: pick(&self.omega),
            pi: pick(&self.pi),
            mu0: pick(&self.mu0),
            mu1: pick(&self.mu1),
            mu_y: self.mu_y.as_ref().map(pick),
            clip: self.clip,
            clip_counts: self.clip_counts.clone(),
            folds: None,
        }
    }

    /// Audit export: `id,fold,omega,pi,mu0,mu1[,mu_y]`.
    pub fn write_csv<W: Write>(&self, writer: W, ids: &[String]) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["id", "fold", "omega", "pi", "mu0", "mu1"];
        if self.mu_y.is_some() {
            header.push("mu_y");
        }
        w.write_record(&header)?;
        for i in 0..self.n() {
            let fold = self.folds.as_ref().map(|f| f.fold_of[i].to_string()).unwrap_or_default();
            let mut rec = vec![
                ids[i].clone(),
                fold,
                self.omega[i].to_string(),
                self.pi[i].to_string(),
                self.mu0[i].to_string(),
                self.mu1[i].to_string(),
            ];
            if let Some(m) = &self.mu_y {
                rec.push(m[i].to_string());
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Which design columns each nuisance learner sees; `None` means all.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureMasks {
    pub omega: Option<Vec<usize>>,
    pub pi: Option<Vec<usize>>,
    pub mu0: Option<Vec<usize>>,
    pub mu1: Option<Vec<usize>>,
    pub mu_y: Option<Vec<usize>>,
}

impl FeatureMasks {
    pub fn get(&self, n: Nuisance) -> Option<&Vec<usize>> {
        match n {
            Nuisance::Omega => self.omega.as_ref(),
            Nuisance::Pi => self.pi.as_ref(),
            Nuisance::Mu0 => self.mu0.as_ref(),
            Nuisance::Mu1 => self.mu1.as_ref(),
            Nuisance::MuY => self.mu_y.as_ref(),
        }
    }

    pub fn set(&mut self, n: Nuisance, cols: Vec<usize>) {
        let slot = match n {
            Nuisance::Omega => &mut self.omega,
            Nuisance::Pi => &mut self.pi,
            Nuisance::Mu0 => &mut self.mu0,
            Nuisance::Mu1 => &mut self.mu1,
            Nuisance::MuY => &mut self.mu_y,
        };
        *slot = Some(cols);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossFitOptions {
    pub clip: f64,
    pub want_mu_y: bool,
    pub features: FeatureMasks,
}

impl Default for CrossFitOptions {
    fn default() -> Self {
        Self { clip: 0.01, want_mu_y: false, features: FeatureMasks::default() }
    }
}

/// Cross-fitted predictions of one regression. Rows whose target is `None`
/// are excluded from training but still receive predictions.
pub fn cross_fit_predict(
    x: &DesignMatrix,
    targets: &[Option<f64>],
    kind: TargetKind,
    spec: &LearnerSpec,
    folds: &FoldAssignment,
    seed: u64,
    label: &str,
) -> Result<Vec<f64>> {
    if folds.n() != x.nrows() || targets.len() != x.nrows() {
        return Err(Error::Data(format!("{label}: fold assignment, design and targets disagree on n")));
    }
    let per_fold: Vec<Result<(Vec<usize>, Vec<f64>)>> = (0..folds.k)
        .into_par_iter()
        .map(|k| {
            let (train, test) = folds.split(k);
            let train: Vec<usize> = train.into_iter().filter(|&i| targets[i].is_some()).collect();
            if train.is_empty() {
                return Err(Error::Data(format!(
                    "fold {k}: no training rows for `{label}`; use fewer folds"
                )));
            }
            let xt = x.select_rows(&train);
            let tt: Vec<f64> = train.iter().map(|&i| targets[i].unwrap()).collect();
            let model = learners::fit(spec, &xt, &tt, kind, mix_seed(seed, &[k as u64, name_tag(label)]))?;
            let preds = test.iter().map(|&i| model.predict_row(x.row(i))).collect();
            Ok((test, preds))
        })
        .collect();
    let mut out = vec![f64::NAN; x.nrows()];
    for r in per_fold {
        let (idx, preds) = r?;
        for (i, p) in idx.into_iter().zip(preds) {
            out[i] = p;
        }
    }
    Ok(out)
}

/// Cross-fits ω, π, μ₀, μ₁ (and μ_y when requested) on an encoded dataset.
pub fn fit_nuisances(
    dataset: &CausalDataset,
    spec: &LearnerSpec,
    folds: &FoldAssignment,
    opts: &CrossFitOptions,
) -> Result<NuisanceSurface> {
    spec.validate()?;
    let design = dataset.require_design()?;
    if folds.n() != dataset.n() {
        return Err(Error::Config("fold assignment size differs from dataset".into()));
    }
    let mut wanted = vec![Nuisance::Omega, Nuisance::Pi, Nuisance::Mu0, Nuisance::Mu1];
    if opts.want_mu_y {
        wanted.push(Nuisance::MuY);
    }
    // empty-subset check up front so the error names the subset
    for &nu in &wanted {
        let targets = nu.targets(dataset);
        for k in 0..folds.k {
            let any = folds.fold_of.iter().zip(&targets).any(|(&f, t)| f != k && t.is_some());
            if !any {
                return Err(Error::Data(format!(
                    "fold {k}: training subset for {} ({}) is empty; use a smaller K",
                    nu.name(),
                    nu.subset_description()
                )));
            }
        }
    }
    let outcome = dataset.outcome_kind();
    let fitted: Vec<Result<Vec<f64>>> = wanted
        .par_iter()
        .map(|&nu| {
            let x = match opts.features.get(nu) {
                Some(cols) => design.select_columns(cols),
                None => design.clone(),
            };
            cross_fit_predict(&x, &nu.targets(dataset), nu.target_kind(outcome), spec, folds, folds.seed, nu.name())
        })
        .collect();
    let mut fitted = fitted.into_iter().collect::<Result<Vec<_>>>()?.into_iter();
    let omega = fitted.next().unwrap();
    let pi = fitted.next().unwrap();
    let mut mu0 = fitted.next().unwrap();
    let mut mu1 = fitted.next().unwrap();
    let mut mu_y = fitted.next();
    if outcome == OutcomeKind::Binary {
        let unit = |v: &mut Vec<f64>| v.iter_mut().for_each(|p| *p = p.clamp(0.0, 1.0));
        unit(&mut mu0);
        unit(&mut mu1);
        if let Some(m) = mu_y.as_mut() {
            unit(m);
        }
    }
    let mut surface = NuisanceSurface::from_values(omega, pi, mu0, mu1, mu_y, opts.clip)?;
    surface.folds = Some(folds.clone());
    Ok(surface)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn fold_sizes() {
        let f = assign_folds(10, 10, 1).unwrap();
        assert!(f.sizes().iter().all(|&s| s == 1));
        let f = assign_folds(11, 10, 1).unwrap();
        let mut s = f.sizes();
        s.sort_unstable();
        assert_eq!(s, vec![1, 1, 1, 1, 1, 1, 1, 1, 1, 2]);
    }

    #[test]
    fn folds_deterministic_and_validated() {
        assert_eq!(assign_folds(50, 7, 3).unwrap(), assign_folds(50, 7, 3).unwrap());
        assert_ne!(assign_folds(50, 7, 3).unwrap(), assign_folds(50, 7, 4).unwrap());
        assert!(assign_folds(5, 6, 0).is_err());
        assert!(assign_folds(5, 1, 0).is_err());
    }

    fn coin_dataset(n: usize, seed: u64, all_observed: bool) -> CausalDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut r = Vec::new();
        let mut a = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let x: f64 = rng.random_range(-1.0..1.0);
            rows.push(vec![x]);
            let obs = all_observed || rng.random::<f64>() < 0.7;
            r.push(obs);
            let ai = rng.random::<bool>();
            let yi = if ai { (rng.random::<f64>() < 0.4) as u8 as f64 } else { 0.0 };
            a.push(obs.then_some(ai));
            y.push(obs.then_some(yi));
        }
        CausalDataset::from_design(DesignMatrix::from_rows(&rows).unwrap(), r, a, y, OutcomeKind::Binary).unwrap()
    }

    #[test]
    fn fair_coin_treatment_propensity_near_half() {
        let ds = coin_dataset(4000, 5, true);
        let folds = assign_folds(ds.n(), 10, 0).unwrap();
        let s = fit_nuisances(&ds, &LearnerSpec::logistic(), &folds, &CrossFitOptions::default()).unwrap();
        let m = s.pi.iter().sum::<f64>() / s.n() as f64;
        assert!((m - 0.5).abs() < 0.05, "mean pi {m}");
        // R == 1 everywhere: omega clipped to 1 - eps
        assert!(s.omega.iter().all(|&w| w == 0.99));
        assert_eq!(s.clip_counts.omega, ds.n());
        // Y == 0 among controls
        assert!(s.mu0.iter().all(|&m| m.abs() < 1e-6));
    }

    #[test]
    fn empty_subset_is_an_error() {
        // no controls at all
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64]).collect();
        let ds = CausalDataset::from_design(
            DesignMatrix::from_rows(&rows).unwrap(),
            vec![true; 20],
            vec![Some(true); 20],
            (0..20).map(|i| Some((i % 2) as f64)).collect(),
            OutcomeKind::Binary,
        )
        .unwrap();
        let folds = assign_folds(20, 4, 0).unwrap();
        let err = fit_nuisances(&ds, &LearnerSpec::logistic(), &folds, &CrossFitOptions::default()).unwrap_err();
        assert!(err.to_string().contains("mu0"), "{err}");
    }

    #[test]
    fn held_out_fold_is_never_trained_on() {
        let ds = coin_dataset(600, 9, false);
        let folds = assign_folds(ds.n(), 5, 2).unwrap();
        let spec = LearnerSpec::logistic();
        let design = ds.require_design().unwrap();
        let targets = Nuisance::Mu1.targets(&ds);
        let base = cross_fit_predict(design, &targets, TargetKind::Probability, &spec, &folds, 1, "mu1").unwrap();
        // poison fold 3's targets
        let poisoned: Vec<Option<f64>> = targets
            .iter()
            .zip(&folds.fold_of)
            .map(|(t, &f)| if f == 3 { t.map(|v| 1.0 - v) } else { *t })
            .collect();
        let after = cross_fit_predict(design, &poisoned, TargetKind::Probability, &spec, &folds, 1, "mu1").unwrap();
        for i in 0..ds.n() {
            if folds.fold_of[i] == 3 {
                assert_eq!(base[i], after[i]);
            }
        }
        assert!((0..ds.n()).any(|i| folds.fold_of[i] != 3 && base[i] != after[i]));
    }

    #[test]
    fn surface_is_deterministic() {
        let ds = coin_dataset(300, 1, false);
        let folds = assign_folds(ds.n(), 3, 8).unwrap();
        let spec = LearnerSpec::parse("logistic,forest:trees=5", 3).unwrap();
        let opts = CrossFitOptions { want_mu_y: true, ..Default::default() };
        let a = fit_nuisances(&ds, &spec, &folds, &opts).unwrap();
        let b = fit_nuisances(&ds, &spec, &folds, &opts).unwrap();
        assert_eq!(a, b);
        assert!(a.mu_y.is_some());
        assert!(a.pi.iter().all(|&p| (0.01..=0.99).contains(&p)));
    }

    #[test]
    fn csv_export_has_expected_header() {
        let s = NuisanceSurface::from_values(vec![0.5], vec![0.5], vec![0.1], vec![0.2], Some(vec![0.3]), 0.01).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf, &["a".to_string()]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "id,fold,omega,pi,mu0,mu1,mu_y");
        assert_eq!(text.lines().nth(1).unwrap(), "a,,0.5,0.5,0.1,0.2,0.3");
    }
}
