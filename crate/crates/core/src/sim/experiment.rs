use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{generate, oracle_att, true_surface, DgpSpec, SimSample};
use crate::crossfit::{assign_folds, fit_nuisances, CrossFitOptions, FeatureMasks, Nuisance, NuisanceSurface};
use crate::data::SubgroupPartition;
use crate::error::{Error, Result};
use crate::estimators::{estimate_att, homogeneity_test, influence_values, subgroup_estimates, AttEstimate, DEFAULT_MIN_GROUP_SIZE};
use crate::learners::{mix_seed, name_tag, LearnerSpec};
use crate::stats::{mean, ols_slope};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NuisanceSource {
    /// Plug in the true observed-level nuisances.
    Oracle,
    /// Cross-fit with the given learner.
    Learned(LearnerSpec),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mechanism {
    /// The learner sees the design without the DGP's designated features.
    DropCovariates,
    /// Intercept-only fit: the nuisance becomes its marginal mean.
    #[default]
    ConstantFit,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MisspecFlags {
    #[serde(default)]
    pub break_omega: bool,
    #[serde(default)]
    pub break_pi: bool,
    #[serde(default)]
    pub break_mu0: bool,
    #[serde(default)]
    pub break_mu1: bool,
    #[serde(default)]
    pub mechanism: Mechanism,
}

impl MisspecFlags {
    pub fn any(&self) -> bool {
        self.break_omega || self.break_pi || self.break_mu0 || self.break_mu1
    }

    /// Flags breaking every nuisance not listed in `correct`.
    pub fn all_but(correct: &[Nuisance], mechanism: Mechanism) -> Self {
        let broken = |n: Nuisance| !correct.contains(&n);
        Self {
            break_omega: broken(Nuisance::Omega),
            break_pi: broken(Nuisance::Pi),
            break_mu0: broken(Nuisance::Mu0),
            break_mu1: broken(Nuisance::Mu1),
            mechanism,
        }
    }

    fn masks(&self, dgp: &DgpSpec, sample: &SimSample) -> FeatureMasks {
        let cols = match self.mechanism {
            Mechanism::ConstantFit => Vec::new(),
            Mechanism::DropCovariates => sample.columns_without(&dgp.drop_for_misspec),
        };
        let mut m = FeatureMasks::default();
        for (flag, nu) in [
            (self.break_omega, Nuisance::Omega),
            (self.break_pi, Nuisance::Pi),
            (self.break_mu0, Nuisance::Mu0),
            (self.break_mu1, Nuisance::Mu1),
            (self.break_mu1, Nuisance::MuY),
        ] {
            if flag {
                m.set(nu, cols.clone());
            }
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n: usize,
    pub reps: usize,
    pub source: NuisanceSource,
    #[serde(default)]
    pub flags: MisspecFlags,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default = "default_clip")]
    pub clip: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_folds() -> usize {
    10
}

fn default_clip() -> f64 {
    0.01
}

impl ExperimentConfig {
    pub fn new(n: usize, reps: usize, source: NuisanceSource, seed: u64) -> Self {
        Self { n, reps, source, flags: MisspecFlags::default(), folds: default_folds(), clip: default_clip(), seed }
    }

    fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::Config("reps must be >= 1".into()));
        }
        if self.flags.any() && self.source == NuisanceSource::Oracle {
            return Err(Error::Config("misspecification flags need learned nuisances".into()));
        }
        if let NuisanceSource::Learned(spec) = &self.source {
            spec.validate()?;
            if self.folds < 2 {
                return Err(Error::Config("folds must be >= 2".into()));
            }
        }
        Ok(())
    }

    fn rep_seed(&self, rep: usize) -> u64 {
        mix_seed(self.seed, &[rep as u64, name_tag("rep")])
    }
}

/// Nuisance surface for one generated sample under `cfg`.
fn surface_for(dgp: &DgpSpec, sample: &SimSample, cfg: &ExperimentConfig, seed: u64) -> Result<NuisanceSurface> {
    match &cfg.source {
        NuisanceSource::Oracle => true_surface(dgp, sample, cfg.clip),
        NuisanceSource::Learned(spec) => {
            let folds = assign_folds(sample.dataset.n(), cfg.folds, mix_seed(seed, &[name_tag("folds")]))?;
            let opts = CrossFitOptions { clip: cfg.clip, want_mu_y: false, features: cfg.flags.masks(dgp, sample) };
            fit_nuisances(&sample.dataset, spec, &folds, &opts)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub dgp: String,
    pub n: usize,
    pub reps: usize,
    pub failures: usize,
    pub truth: f64,
    pub mean_estimate: f64,
    pub bias: f64,
    pub rmse: f64,
    /// Monte Carlo standard error of the bias.
    pub bias_se: f64,
    pub coverage: f64,
    pub mean_ci_width: f64,
    pub mean_se: f64,
    pub estimates: Vec<f64>,
    #[serde(skip)]
    pub wall_time: f64,
}

fn run_reps<T: Send>(cfg: &ExperimentConfig, one: impl Fn(u64) -> Result<T> + Sync) -> Result<(Vec<T>, usize)> {
    let results: Vec<Result<T>> = (0..cfg.reps).into_par_iter().map(|r| one(cfg.rep_seed(r))).collect();
    let mut ok = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (r, res) in results.into_iter().enumerate() {
        match res {
            Ok(v) => ok.push(v),
            Err(e) => {
                log::warn!("replication {r} failed: {e}");
                failures.push(e);
            }
        }
    }
    if failures.len() * 10 > cfg.reps {
        return Err(Error::Numeric(format!(
            "{} of {} replications failed; first error: {}",
            failures.len(),
            cfg.reps,
            failures[0]
        )));
    }
    Ok((ok, failures.len()))
}

/// Repeated generate, fit, estimate; summarizes the ATT estimates against the oracle.
pub fn run_experiment(dgp: &DgpSpec, cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    dgp.validate()?;
    cfg.validate()?;
    let start = Instant::now();
    let truth = oracle_att(dgp).value;
    let (fits, failures) = run_reps(cfg, |seed| -> Result<AttEstimate> {
        let sample = generate(dgp, cfg.n, seed)?;
        let surface = surface_for(dgp, &sample, cfg, seed)?;
        estimate_att(&influence_values(&sample.dataset, &surface)?, cfg.clip)
    })?;
    let estimates: Vec<f64> = fits.iter().map(|f| f.estimate).collect();
    let m = estimates.len() as f64;
    let mean_estimate = mean(&estimates);
    let bias = mean_estimate - truth;
    let rmse = (estimates.iter().map(|e| (e - truth).powi(2)).sum::<f64>() / m).sqrt();
    let sd = (estimates.iter().map(|e| (e - mean_estimate).powi(2)).sum::<f64>() / (m - 1.0).max(1.0)).sqrt();
    Ok(ExperimentReport {
        dgp: dgp.name.clone(),
        n: cfg.n,
        reps: cfg.reps,
        failures,
        truth,
        mean_estimate,
        bias,
        rmse,
        bias_se: sd / m.sqrt(),
        coverage: fits.iter().filter(|f| f.covers(truth)).count() as f64 / m,
        mean_ci_width: mean(&fits.iter().map(|f| f.ci[1] - f.ci[0]).collect::<Vec<_>>()),
        mean_se: mean(&fits.iter().map(AttEstimate::se).collect::<Vec<_>>()),
        estimates,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomogeneityReport {
    pub dgp: String,
    pub n: usize,
    pub reps: usize,
    pub failures: usize,
    pub level: f64,
    pub rejections: usize,
    pub rejection_rate: f64,
}

/// Rejection rate of the homogeneity test across the DGP's groups.
pub fn homogeneity_experiment(dgp: &DgpSpec, cfg: &ExperimentConfig, level: f64) -> Result<HomogeneityReport> {
    dgp.validate()?;
    cfg.validate()?;
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Config(format!("test level must lie in (0, 1), got {level}")));
    }
    let (pvals, failures) = run_reps(cfg, |seed| -> Result<f64> {
        let sample = generate(dgp, cfg.n, seed)?;
        let labels = sample.dataset.group().ok_or_else(|| Error::Config(format!("dgp `{}` has no groups", dgp.name)))?;
        let partition = SubgroupPartition::from_labels(labels);
        let surface = surface_for(dgp, &sample, cfg, seed)?;
        let records = influence_values(&sample.dataset, &surface)?;
        let groups = subgroup_estimates(&records, &partition, DEFAULT_MIN_GROUP_SIZE, cfg.clip)?;
        Ok(homogeneity_test(&groups.groups)?.p_value)
    })?;
    let rejections = pvals.iter().filter(|&&p| p < level).count();
    Ok(HomogeneityReport {
        dgp: dgp.name.clone(),
        n: cfg.n,
        reps: cfg.reps,
        failures,
        level,
        rejections,
        rejection_rate: rejections as f64 / pvals.len() as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub rmse: f64,
    pub bias: f64,
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of log rmse on log n.
    pub slope: f64,
}

pub fn convergence_study(dgp: &DgpSpec, n_grid: &[usize], cfg: &ExperimentConfig) -> Result<ConvergenceTable> {
    if n_grid.len() < 2 || n_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("n grid needs at least two strictly increasing sizes".into()));
    }
    let rows = n_grid
        .iter()
        .map(|&n| {
            let c = ExperimentConfig { n, seed: mix_seed(cfg.seed, &[n as u64]), ..cfg.clone() };
            let r = run_experiment(dgp, &c)?;
            Ok(ConvergenceRow { n, rmse: r.rmse, bias: r.bias, coverage: r.coverage })
        })
        .collect::<Result<Vec<_>>>()?;
    let x: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.rmse.ln()).collect();
    Ok(ConvergenceTable { slope: ols_slope(&x, &y), rows })
}

impl ConvergenceTable {
    /// `n,rmse,bias,coverage` rows followed by a `# slope=` footer line.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["n", "rmse", "bias", "coverage"])?;
        for r in &self.rows {
            w.write_record([r.n.to_string(), r.rmse.to_string(), r.bias.to_string(), r.coverage.to_string()])?;
        }
        let mut inner = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        writeln!(inner, "# slope={}", self.slope)?;
        Ok(())
    }
}
