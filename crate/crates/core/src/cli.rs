//! Command-line front end: flag and config-file resolution, the
//! load-to-estimate pipeline, and output writing for each subcommand.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::crossfit::{assign_folds, fit_nuisances, ClipCounts, CrossFitOptions, FoldAssignment, NuisanceSurface};
use crate::data::{
    encode, impute_covariates, load_csv, partition_by_age, CausalDataset, Filter, ImputationReport, LoadOptions, LoadReport,
    OutcomeKind, RoleMap, SubgroupPartition,
};
use crate::error::{Error, Result};
use crate::estimators::{
    estimate_att, estimate_otr, homogeneity_test, influence_values, otr_influence_values, overlap_diagnostic, subgroup_estimates,
    OtrCorrection, DEFAULT_MIN_GROUP_SIZE,
};
use crate::learners::{mix_seed, name_tag, LearnerSpec};
use crate::sensitivity::{calibrate_delta, default_delta_grid, otr_additive_bounds, sensitivity_curve, Aggregation};
use crate::sim::{self, DgpSpec, ExperimentConfig, Mechanism, MisspecFlags, NuisanceSource};

pub const SCHEMA_VERSION: u32 = 1;
const AGE_POOL_LOW: i64 = 12;
const AGE_POOL_HIGH: i64 = 19;

#[derive(Debug, Parser)]
#[command(name = "dr-att", version, about = "Doubly robust ATT estimation with missing follow-up")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// ATT with 95% CI and relative reduction.
    Estimate(Options),
    /// Overall treatment removal effect, optionally with additive sensitivity bounds.
    Otr(Options),
    /// Per-group ATT and a test of equal effects across groups.
    Heterogeneity(Options),
    /// Ratio sensitivity bounds over a grid of delta values.
    Sensitivity(Options),
    /// Calibrate delta from covariate subsets.
    Calibrate(Options),
    /// Histogram of estimated treatment propensities.
    Overlap(Options),
    /// Monte Carlo experiments on built-in or file-defined processes.
    Simulate(Options),
}

impl Command {
    pub fn kind(&self) -> CommandKind {
        match self {
            Command::Estimate(_) => CommandKind::Estimate,
            Command::Otr(_) => CommandKind::Otr,
            Command::Heterogeneity(_) => CommandKind::Heterogeneity,
            Command::Sensitivity(_) => CommandKind::Sensitivity,
            Command::Calibrate(_) => CommandKind::Calibrate,
            Command::Overlap(_) => CommandKind::Overlap,
            Command::Simulate(_) => CommandKind::Simulate,
        }
    }

    pub fn options(&self) -> &Options {
        match self {
            Command::Estimate(o)
            | Command::Otr(o)
            | Command::Heterogeneity(o)
            | Command::Sensitivity(o)
            | Command::Calibrate(o)
            | Command::Overlap(o)
            | Command::Simulate(o) => o,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandKind {
    Estimate,
    Otr,
    Heterogeneity,
    Sensitivity,
    Calibrate,
    Overlap,
    Simulate,
}

impl CommandKind {
    fn name(self) -> &'static str {
        match self {
            CommandKind::Estimate => "estimate",
            CommandKind::Otr => "otr",
            CommandKind::Heterogeneity => "heterogeneity",
            CommandKind::Sensitivity => "sensitivity",
            CommandKind::Calibrate => "calibrate",
            CommandKind::Overlap => "overlap",
            CommandKind::Simulate => "simulate",
        }
    }
}

/// Every setting, as given by flags or a TOML config file with the same keys
/// (underscores instead of dashes). Flags win over the file.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Options {
    /// TOML file with default values for any of these settings.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Print the merged settings as TOML and exit.
    #[arg(long)]
    #[serde(skip)]
    pub print_config: bool,

    #[arg(long, help_heading = "Data")]
    pub input: Option<PathBuf>,
    /// Comma-separated covariate columns.
    #[arg(long, value_delimiter = ',', help_heading = "Data")]
    pub covariates: Vec<String>,
    #[arg(long, help_heading = "Data")]
    pub treatment: Option<String>,
    #[arg(long, help_heading = "Data")]
    pub outcome: Option<String>,
    /// Follow-up indicator column (1 = outcome observed).
    #[arg(long, help_heading = "Data")]
    pub followup: Option<String>,
    #[arg(long, help_heading = "Data")]
    pub id: Option<String>,
    #[arg(long = "group-by", visible_alias = "group", help_heading = "Data")]
    pub group_by: Option<String>,
    /// Age column; groups ages <=12, 13..18, >=19.
    #[arg(long, help_heading = "Data")]
    pub age_column: Option<String>,
    /// Row filter such as `victim_w1=0`; repeatable, all must hold.
    #[arg(long = "filter", help_heading = "Data")]
    pub filters: Vec<String>,
    /// Mask treatment and outcome values on rows without follow-up instead of failing.
    #[arg(long, help_heading = "Data")]
    pub lenient: bool,
    /// `binary` (default) or `bounded` for outcomes in [0, 1].
    #[arg(long, help_heading = "Data")]
    pub outcome_kind: Option<String>,

    /// Cross-fitting folds (default 10).
    #[arg(long, help_heading = "Fitting")]
    pub folds: Option<usize>,
    #[arg(long, help_heading = "Fitting")]
    pub seed: Option<u64>,
    /// Learner list, e.g. `logistic,forest:trees=200`; several entries are stacked.
    #[arg(long, help_heading = "Fitting")]
    pub learners: Option<String>,
    /// Cross-validation folds of the stacked learner (default 5).
    #[arg(long, help_heading = "Fitting")]
    pub stack_folds: Option<usize>,
    /// Propensity clipping bound (default 0.01).
    #[arg(long, help_heading = "Fitting")]
    pub clip: Option<f64>,
    /// Write the cross-fitted nuisance values to this CSV.
    #[arg(long, help_heading = "Fitting")]
    pub surface_output: Option<PathBuf>,

    /// `start:stop:step` or a comma list (default 1:2:0.01).
    #[arg(long, help_heading = "Sensitivity")]
    pub delta_grid: Option<String>,
    /// Additive bound for the OTR interval.
    #[arg(long, help_heading = "Sensitivity")]
    pub delta_add: Option<f64>,
    /// `efficient` (default) or `pi_weighted`.
    #[arg(long, help_heading = "Sensitivity")]
    pub otr_correction: Option<String>,
    /// Covariate subset joined by `+`; repeatable.
    #[arg(long = "subsets", help_heading = "Sensitivity")]
    pub subsets: Vec<String>,
    /// Draw this many random subsets of every size below the full set.
    #[arg(long, help_heading = "Sensitivity")]
    pub random_subsets: Option<usize>,
    /// `marginal_ratio` (default) or `stratum_max`.
    #[arg(long, help_heading = "Sensitivity")]
    pub aggregation: Option<String>,
    /// Groups smaller than this are dropped (default 30).
    #[arg(long, help_heading = "Sensitivity")]
    pub min_group_size: Option<usize>,

    #[arg(long, help_heading = "Output")]
    pub output: Option<PathBuf>,
    /// `json` or `csv`.
    #[arg(long, help_heading = "Output")]
    pub format: Option<String>,

    /// Built-in process name.
    #[arg(long, help_heading = "Simulation")]
    pub dgp: Option<String>,
    /// Process definition in TOML or JSON.
    #[arg(long, help_heading = "Simulation")]
    pub dgp_file: Option<PathBuf>,
    #[arg(long, help_heading = "Simulation")]
    pub n: Option<usize>,
    #[arg(long, help_heading = "Simulation")]
    pub reps: Option<usize>,
    /// Sample sizes for a convergence study, comma-separated.
    #[arg(long, value_delimiter = ',', help_heading = "Simulation")]
    pub n_grid: Vec<usize>,
    /// Plug in the true nuisances instead of learning them.
    #[arg(long, help_heading = "Simulation")]
    pub oracle: bool,
    /// Nuisances to misspecify: omega, pi, mu0, mu1.
    #[arg(long = "break", value_delimiter = ',', help_heading = "Simulation")]
    #[serde(rename = "break")]
    pub break_nuisances: Vec<String>,
    /// `constant` (default) or `drop`.
    #[arg(long, help_heading = "Simulation")]
    pub mechanism: Option<String>,
    /// Write one generated sample to this CSV instead of running an experiment.
    #[arg(long, help_heading = "Simulation")]
    pub write_sample: Option<PathBuf>,
}

macro_rules! merge_options {
    ($cli:ident, $file:ident; opt: $($o:ident),*; vec: $($v:ident),*; flag: $($f:ident),*) => {
        Options {
            config: None,
            print_config: $cli.print_config,
            $($o: $cli.$o.or($file.$o),)*
            $($v: if $cli.$v.is_empty() { $file.$v } else { $cli.$v },)*
            $($f: $cli.$f || $file.$f,)*
        }
    };
}

impl Options {
    pub fn from_toml_file(path: &Path) -> Result<Options> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("config {}: {e}", path.display())))
    }

    /// Flags over config-file values.
    pub fn merged(self) -> Result<Options> {
        let file = match &self.config {
            Some(p) => Options::from_toml_file(p)?,
            None => Options::default(),
        };
        let cli = self;
        Ok(merge_options!(cli, file;
            opt: input, treatment, outcome, followup, id, group_by, age_column, outcome_kind, folds, seed, learners,
                 stack_folds, clip, surface_output, delta_grid, delta_add, otr_correction, random_subsets, aggregation,
                 min_group_size, output, format, dgp, dgp_file, n, reps, mechanism, write_sample;
            vec: covariates, filters, subsets, n_grid, break_nuisances;
            flag: lenient, oracle))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulateConfig {
    pub dgp: DgpSpec,
    pub n: Option<usize>,
    pub reps: usize,
    pub n_grid: Vec<usize>,
    pub source: NuisanceSource,
    pub flags: MisspecFlags,
    pub write_sample: Option<PathBuf>,
}

/// Fully resolved and validated settings for one command.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: CommandKind,
    pub input: Option<PathBuf>,
    pub roles: RoleMap,
    pub age_column: Option<String>,
    pub lenient: bool,
    pub outcome_kind: OutcomeKind,
    pub folds: usize,
    pub seed: u64,
    pub learners: LearnerSpec,
    pub clip: f64,
    pub delta_grid: Vec<f64>,
    pub delta_add: Option<f64>,
    pub otr_correction: OtrCorrection,
    pub subsets: Vec<Vec<String>>,
    pub random_subsets: Option<usize>,
    pub aggregation: Aggregation,
    pub min_group_size: usize,
    pub output: Option<PathBuf>,
    pub format: Format,
    pub surface_output: Option<PathBuf>,
    pub simulate: Option<SimulateConfig>,
}

fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| Error::Config(format!("bad number `{t}` in delta grid")));
    let grid: Vec<f64> = if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::Config(format!("delta grid `{s}` must be start:stop:step")));
        }
        let (start, stop, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if !(step > 0.0) || stop < start {
            return Err(Error::Config(format!("delta grid `{s}` needs step > 0 and stop >= start")));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize;
        (0..=count).map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12).collect()
    } else {
        s.split(',').map(num).collect::<Result<_>>()?
    };
    if grid.is_empty() || grid.iter().any(|&d| !(d >= 1.0)) {
        return Err(Error::Config("delta grid values must all be >= 1".into()));
    }
    if grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Config("delta grid must be ascending".into()));
    }
    Ok(grid)
}

fn require<'a>(v: &'a Option<String>, flag: &str, cmd: CommandKind) -> Result<&'a String> {
    v.as_ref().ok_or_else(|| Error::Config(format!("`{}` needs --{flag}", cmd.name())))
}

impl RunConfig {
    /// Validates everything that can be checked without reading data.
    pub fn resolve(command: CommandKind, o: &Options) -> Result<RunConfig> {
        let folds = o.folds.unwrap_or(10);
        if folds < 2 {
            return Err(Error::Config(format!("--folds must be >= 2, got {folds}")));
        }
        let clip = o.clip.unwrap_or(0.01);
        if !(clip > 0.0 && clip < 0.5) {
            return Err(Error::Config(format!("--clip must lie in (0, 0.5), got {clip}")));
        }
        let learners = match &o.learners {
            Some(s) => LearnerSpec::parse(s, o.stack_folds.unwrap_or(5))?,
            None => LearnerSpec::default(),
        };
        let format = match o.format.as_deref().unwrap_or("json") {
            "json" => Format::Json,
            "csv" => Format::Csv,
            other => return Err(Error::Config(format!("unknown format `{other}`"))),
        };
        let csv_ok = match command {
            CommandKind::Estimate | CommandKind::Otr => false,
            CommandKind::Simulate => !o.n_grid.is_empty(),
            _ => true,
        };
        if format == Format::Csv && !csv_ok {
            return Err(Error::Config(format!("`{}` does not write CSV here; use --format json", command.name())));
        }
        let outcome_kind = match o.outcome_kind.as_deref().unwrap_or("binary") {
            "binary" => OutcomeKind::Binary,
            "bounded" => OutcomeKind::Bounded,
            other => return Err(Error::Config(format!("unknown outcome kind `{other}`"))),
        };
        let delta_grid = match &o.delta_grid {
            Some(s) => parse_grid(s)?,
            None => default_delta_grid(),
        };
        if let Some(d) = o.delta_add {
            if !(d >= 0.0) {
                return Err(Error::Config(format!("--delta-add must be >= 0, got {d}")));
            }
        }
        let otr_correction = match o.otr_correction.as_deref().unwrap_or("efficient") {
            "efficient" => OtrCorrection::Efficient,
            "pi_weighted" => OtrCorrection::PiWeighted,
            other => return Err(Error::Config(format!("unknown OTR correction `{other}`"))),
        };
        let aggregation = match o.aggregation.as_deref().unwrap_or("marginal_ratio") {
            "marginal_ratio" => Aggregation::MarginalRatio,
            "stratum_max" => Aggregation::StratumMax,
            other => return Err(Error::Config(format!("unknown aggregation `{other}`"))),
        };
        let filters = o.filters.iter().map(|f| f.parse::<Filter>()).collect::<Result<Vec<_>>>()?;
        let subsets: Vec<Vec<String>> =
            o.subsets.iter().map(|s| s.split('+').map(|c| c.trim().to_string()).filter(|c| !c.is_empty()).collect()).collect();
        if subsets.iter().any(Vec::is_empty) {
            return Err(Error::Config("empty covariate subset".into()));
        }

        let mut roles = RoleMap { filters, id: o.id.clone(), group: o.group_by.clone(), ..Default::default() };
        let simulate = if command == CommandKind::Simulate {
            Some(resolve_simulate(o, &learners)?)
        } else {
            roles.treatment = require(&o.treatment, "treatment", command)?.clone();
            roles.outcome = require(&o.outcome, "outcome", command)?.clone();
            roles.followup = require(&o.followup, "followup", command)?.clone();
            if o.covariates.is_empty() {
                return Err(Error::Config(format!("`{}` needs --covariates", command.name())));
            }
            roles.covariates = o.covariates.clone();
            if o.input.is_none() {
                return Err(Error::Config(format!("`{}` needs --input", command.name())));
            }
            None
        };
        match command {
            CommandKind::Heterogeneity if o.group_by.is_none() && o.age_column.is_none() => {
                return Err(Error::Config("`heterogeneity` needs --group-by or --age-column".into()))
            }
            CommandKind::Calibrate if subsets.is_empty() && o.random_subsets.is_none() => {
                return Err(Error::Config("`calibrate` needs --subsets or --random-subsets".into()))
            }
            CommandKind::Calibrate => {
                for s in &subsets {
                    if let Some(c) = s.iter().find(|c| !roles.covariates.contains(c)) {
                        return Err(Error::Config(format!("subset covariate `{c}` is not among --covariates")));
                    }
                }
            }
            _ => {}
        }
        Ok(RunConfig {
            command,
            input: o.input.clone(),
            roles,
            age_column: o.age_column.clone(),
            lenient: o.lenient,
            outcome_kind,
            folds,
            seed: o.seed.unwrap_or(1),
            learners,
            clip,
            delta_grid,
            delta_add: o.delta_add,
            otr_correction,
            subsets,
            random_subsets: o.random_subsets,
            aggregation,
            min_group_size: o.min_group_size.unwrap_or(DEFAULT_MIN_GROUP_SIZE),
            output: o.output.clone(),
            format,
            surface_output: o.surface_output.clone(),
            simulate,
        })
    }
}

fn resolve_simulate(o: &Options, learners: &LearnerSpec) -> Result<SimulateConfig> {
    let dgp = match (&o.dgp, &o.dgp_file) {
        (Some(_), Some(_)) => return Err(Error::Config("give either --dgp or --dgp-file, not both".into())),
        (Some(name), None) => DgpSpec::preset(name)?,
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            let parsed = if path.extension().is_some_and(|e| e == "json") {
                serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
            } else {
                toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
            };
            parsed?
        }
        (None, None) => return Err(Error::Config("`simulate` needs --dgp or --dgp-file".into())),
    };
    dgp.validate()?;
    let mut flags = MisspecFlags {
        mechanism: match o.mechanism.as_deref().unwrap_or("constant") {
            "constant" | "constant-fit" | "constant_fit" => Mechanism::ConstantFit,
            "drop" | "drop-covariates" | "drop_covariates" => Mechanism::DropCovariates,
            other => return Err(Error::Config(format!("unknown mechanism `{other}`"))),
        },
        ..Default::default()
    };
    for b in &o.break_nuisances {
        match b.as_str() {
            "omega" => flags.break_omega = true,
            "pi" => flags.break_pi = true,
            "mu0" => flags.break_mu0 = true,
            "mu1" => flags.break_mu1 = true,
            other => return Err(Error::Config(format!("unknown nuisance `{other}` in --break"))),
        }
    }
    let source = if o.oracle { NuisanceSource::Oracle } else { NuisanceSource::Learned(learners.clone()) };
    if o.oracle && flags.any() {
        return Err(Error::Config("--break needs learned nuisances; drop --oracle".into()));
    }
    if o.n_grid.is_empty() && o.n.is_none() {
        return Err(Error::Config("`simulate` needs --n or --n-grid".into()));
    }
    if o.n_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("--n-grid must be strictly increasing".into()));
    }
    let reps = o.reps.unwrap_or(100);
    if reps == 0 {
        return Err(Error::Config("--reps must be >= 1".into()));
    }
    if o.write_sample.is_some() && o.n.is_none() {
        return Err(Error::Config("--write-sample needs --n".into()));
    }
    Ok(SimulateConfig { dgp, n: o.n, reps, n_grid: o.n_grid.clone(), source, flags, write_sample: o.write_sample.clone() })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub n: usize,
    pub load: LoadReport,
    pub imputation: ImputationReport,
    pub constant_columns: Vec<String>,
    pub clipped: ClipCounts,
}

/// A loaded, imputed, encoded dataset with its cross-fitted nuisances.
pub struct Prepared {
    /// As loaded, before imputation.
    pub raw: CausalDataset,
    pub dataset: CausalDataset,
    pub folds: FoldAssignment,
    pub surface: NuisanceSurface,
    pub diagnostics: Diagnostics,
}

/// load -> impute -> encode -> fold assignment -> cross-fit.
pub fn prepare(cfg: &RunConfig, want_mu_y: bool) -> Result<Prepared> {
    let input = cfg.input.as_ref().ok_or_else(|| Error::Config("no --input".into()))?;
    let (raw, load) = load_csv(input, None, &cfg.roles, LoadOptions { lenient: cfg.lenient, outcome_kind: cfg.outcome_kind })?;
    log::info!("loaded {} rows ({} filtered out)", raw.n(), load.filtered_out);
    let (imputed, imputation) = impute_covariates(&raw)?;
    let (dataset, enc) = encode(&imputed)?;
    let folds = assign_folds(dataset.n(), cfg.folds, mix_seed(cfg.seed, &[name_tag("folds")]))?;
    let surface = fit_nuisances(
        &dataset,
        &cfg.learners,
        &folds,
        &CrossFitOptions { clip: cfg.clip, want_mu_y, ..Default::default() },
    )?;
    if let Some(p) = &cfg.surface_output {
        surface.write_csv(create(p)?, dataset.ids())?;
    }
    let diagnostics = Diagnostics {
        n: dataset.n(),
        load,
        imputation,
        constant_columns: enc.constant_columns,
        clipped: surface.clip_counts.clone(),
    };
    Ok(Prepared { raw, dataset, folds, surface, diagnostics })
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    let f = std::fs::File::create(path).map_err(|e| Error::Data(format!("cannot create {}: {e}", path.display())))?;
    Ok(std::io::BufWriter::new(f))
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema_version: u32,
    command: &'static str,
    config: &'a RunConfig,
    result: T,
    #[serde(skip_serializing_if = "Option::is_none")]
    diagnostics: Option<&'a Diagnostics>,
}

fn emit(cfg: &RunConfig, write: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match &cfg.output {
        Some(p) => {
            let mut w = create(p)?;
            write(&mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut w = stdout.lock();
            write(&mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn emit_json<T: Serialize>(cfg: &RunConfig, result: T, diagnostics: Option<&Diagnostics>) -> Result<()> {
    let env = Envelope { schema_version: SCHEMA_VERSION, command: cfg.command.name(), config: cfg, result, diagnostics };
    emit(cfg, |w| {
        serde_json::to_writer_pretty(&mut *w, &env)?;
        writeln!(w)?;
        Ok(())
    })
}

pub fn run(cli: Cli) -> Result<()> {
    let kind = cli.command.kind();
    let opts = cli.command.options().clone().merged()?;
    if opts.print_config {
        let text = toml::to_string(&opts).map_err(|e| Error::Config(format!("cannot render config: {e}")))?;
        print!("{text}");
        return Ok(());
    }
    let cfg = RunConfig::resolve(kind, &opts)?;
    execute(&cfg)
}

pub fn execute(cfg: &RunConfig) -> Result<()> {
    match cfg.command {
        CommandKind::Estimate => cmd_estimate(cfg),
        CommandKind::Otr => cmd_otr(cfg),
        CommandKind::Heterogeneity => cmd_heterogeneity(cfg),
        CommandKind::Sensitivity => cmd_sensitivity(cfg),
        CommandKind::Calibrate => cmd_calibrate(cfg),
        CommandKind::Overlap => cmd_overlap(cfg),
        CommandKind::Simulate => cmd_simulate(cfg),
    }
}

fn cmd_estimate(cfg: &RunConfig) -> Result<()> {
    let p = prepare(cfg, false)?;
    let est = estimate_att(&influence_values(&p.dataset, &p.surface)?, cfg.clip)?;
    emit_json(cfg, est, Some(&p.diagnostics))
}

#[derive(Serialize)]
struct OtrResult {
    otr: crate::estimators::OtrEstimate,
    #[serde(skip_serializing_if = "Option::is_none")]
    additive_bounds: Option<crate::sensitivity::AdditiveBounds>,
}

fn cmd_otr(cfg: &RunConfig) -> Result<()> {
    let p = prepare(cfg, true)?;
    let records = otr_influence_values(&p.dataset, &p.surface, cfg.otr_correction)?;
    let otr = estimate_otr(&records, cfg.otr_correction)?;
    let additive_bounds = cfg.delta_add.map(|d| otr_additive_bounds(&records, &otr, d)).transpose()?;
    emit_json(cfg, OtrResult { otr, additive_bounds }, Some(&p.diagnostics))
}

#[derive(Serialize)]
struct HeterogeneityResult {
    groups: Vec<crate::estimators::GroupEstimate>,
    dropped: Vec<(String, usize)>,
    t_n: f64,
    df: usize,
    p_value: f64,
}

fn cmd_heterogeneity(cfg: &RunConfig) -> Result<()> {
    let p = prepare(cfg, false)?;
    let partition = match (&cfg.age_column, p.dataset.group()) {
        (Some(col), _) => partition_by_age(&p.raw, col, AGE_POOL_LOW, AGE_POOL_HIGH)?,
        (None, Some(labels)) => SubgroupPartition::from_labels(labels),
        (None, None) => return Err(Error::Config("no grouping column".into())),
    };
    let records = influence_values(&p.dataset, &p.surface)?;
    let report = subgroup_estimates(&records, &partition, cfg.min_group_size, cfg.clip)?;
    let test = homogeneity_test(&report.groups)?;
    match cfg.format {
        Format::Json => emit_json(
            cfg,
            HeterogeneityResult { groups: report.groups, dropped: report.dropped, t_n: test.t_n, df: test.df, p_value: test.p_value },
            Some(&p.diagnostics),
        ),
        Format::Csv => emit(cfg, |w| {
            let mut c = csv::Writer::from_writer(&mut *w);
            c.write_record(["group", "n", "estimate", "ci_lo", "ci_hi", "sigma2"])?;
            for g in &report.groups {
                let e = &g.estimate;
                c.write_record([g.label.clone(), e.n.to_string(), e.estimate.to_string(), e.ci[0].to_string(), e.ci[1].to_string(), e.sigma2.to_string()])?;
            }
            c.flush()?;
            drop(c);
            writeln!(w, "# t_n={},df={},p_value={}", test.t_n, test.df, test.p_value)?;
            Ok(())
        }),
    }
}

#[derive(Serialize)]
struct SensitivityResult {
    att: crate::estimators::AttEstimate,
    lower_crosses_zero: Option<f64>,
    curve: Vec<crate::sensitivity::RatioBounds>,
}

fn cmd_sensitivity(cfg: &RunConfig) -> Result<()> {
    let p = prepare(cfg, false)?;
    let records = influence_values(&p.dataset, &p.surface)?;
    let curve = sensitivity_curve(&records, &cfg.delta_grid)?;
    match cfg.format {
        Format::Csv => emit(cfg, |w| curve.write_csv(w)),
        Format::Json => {
            let att = estimate_att(&records, cfg.clip)?;
            let result = SensitivityResult { att, lower_crosses_zero: curve.lower_crosses_zero(), curve: curve.points };
            emit_json(cfg, result, Some(&p.diagnostics))
        }
    }
}

fn random_subsets(covariates: &[String], per_size: usize, seed: u64) -> Vec<Vec<String>> {
    let p = covariates.len();
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, &[name_tag("subsets")]));
    let mut out = Vec::new();
    for size in 1..p {
        for _ in 0..per_size {
            let mut idx = rand::seq::index::sample(&mut rng, p, size).into_vec();
            idx.sort_unstable();
            out.push(idx.into_iter().map(|j| covariates[j].clone()).collect());
        }
    }
    out
}

fn cmd_calibrate(cfg: &RunConfig) -> Result<()> {
    let p = prepare(cfg, false)?;
    let mut subsets = cfg.subsets.clone();
    if let Some(k) = cfg.random_subsets {
        subsets.extend(random_subsets(&cfg.roles.covariates, k, cfg.seed));
    }
    let results = subsets
        .iter()
        .map(|s| calibrate_delta(&p.dataset, &p.surface, &p.folds, s, &cfg.learners, cfg.aggregation))
        .collect::<Result<Vec<_>>>()?;
    match cfg.format {
        Format::Json => emit_json(cfg, results, Some(&p.diagnostics)),
        Format::Csv => emit(cfg, |w| {
            let mut c = csv::Writer::from_writer(w);
            c.write_record(["subset", "size", "delta_hat", "marginal_ratio", "stratum_max"])?;
            for r in &results {
                c.write_record([
                    r.subset.join("+"),
                    r.size.to_string(),
                    r.delta_hat.to_string(),
                    r.marginal_ratio.to_string(),
                    r.stratum_max.map(|v| v.to_string()).unwrap_or_default(),
                ])?;
            }
            c.flush()?;
            Ok(())
        }),
    }
}

fn cmd_overlap(cfg: &RunConfig) -> Result<()> {
    let p = prepare(cfg, false)?;
    let report = overlap_diagnostic(&p.surface.pi);
    if report.fraction_below > 0.0 {
        log::warn!(
            "{:.1}% of rows have estimated treatment probability below {}",
            100.0 * report.fraction_below,
            report.threshold
        );
    }
    match cfg.format {
        Format::Csv => emit(cfg, |w| report.write_csv(w)),
        Format::Json => emit_json(cfg, report, Some(&p.diagnostics)),
    }
}

#[derive(Serialize)]
struct SampleResult {
    rows: usize,
    path: PathBuf,
    oracle_att: f64,
}

fn cmd_simulate(cfg: &RunConfig) -> Result<()> {
    let s = cfg.simulate.as_ref().expect("simulate settings resolved");
    let exp = ExperimentConfig {
        n: s.n.unwrap_or(0),
        reps: s.reps,
        source: s.source.clone(),
        flags: s.flags,
        folds: cfg.folds,
        clip: cfg.clip,
        seed: cfg.seed,
    };
    if let Some(path) = &s.write_sample {
        let n = s.n.expect("validated");
        let sample = sim::generate(&s.dgp, n, cfg.seed)?;
        sample.write_csv(&s.dgp, create(path)?)?;
        return emit_json(cfg, SampleResult { rows: n, path: path.clone(), oracle_att: sim::oracle_att(&s.dgp).value }, None);
    }
    if !s.n_grid.is_empty() {
        let table = sim::convergence_study(&s.dgp, &s.n_grid, &exp)?;
        return match cfg.format {
            Format::Csv => emit(cfg, |w| table.write_csv(w)),
            Format::Json => emit_json(cfg, table, None),
        };
    }
    let report = sim::run_experiment(&s.dgp, &exp)?;
    eprintln!("wall time: {:.2}s", report.wall_time);
    emit_json(cfg, report, None)
}
