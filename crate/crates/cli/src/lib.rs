//! Command-line surface for `dqreg`: CSV ingestion, fitting, prediction,
//! bootstrap, simulation and limit diagnostics. Every command returns a
//! JSON document holding the fully resolved configuration next to its
//! result, so any output can be fed back as a configuration file.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 numerical failure.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use dqreg_core::copula::{CopulaFamily, CopulaSpec};
use dqreg_core::fitter::{fit, FitConfig, FitResult};
use dqreg_core::inference::{
    bootstrap_se, h_limit_diagnostic, predict_table, BootstrapReport, Direction, HLimitReport, QuantilePrediction,
    QuantileRequest,
};
use dqreg_core::laguerre_eal::EalParams;
use dqreg_core::likelihood::Dataset;
use dqreg_core::margins::{LambdaMode, NormalRegression, TMarginParams, UpperTruncatedNormal};
use dqreg_core::simulate::{render_table, run_scenario, ScenarioConfig, ScenarioReport};
use dqreg_core::Error;

/// Environment variable that overrides every seed.
pub const SEED_ENV: &str = "DQREG_SEED";

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Usage(String),
    Data(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(m) => CliError::Usage(m),
            Error::Data(m) => CliError::Data(m),
            Error::Domain(m) | Error::Fit(m) => CliError::Numerical(m),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn data_err(msg: impl Into<String>) -> CliError {
    CliError::Data(msg.into())
}

/// Column means and standard deviations applied to covariates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl Standardization {
    fn apply(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter().zip(&self.mean).zip(&self.sd).map(|((v, m), s)| (v - m) / s).collect()
    }
}

/// Parsed CSV: dataset plus covariate names and any standardisation used.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub data: Dataset,
    pub covariates: Vec<String>,
    pub standardization: Option<Standardization>,
}

/// Read a CSV with header; `y` and `delta` are required, every other
/// column is a numeric covariate. An intercept column is prepended.
pub fn read_csv(path: &Path, log_time: bool, standardize: bool) -> CliResult<Ingested> {
    let text = fs::read_to_string(path).map_err(|e| data_err(format!("cannot read {}: {e}", path.display())))?;
    parse_csv(&text, log_time, standardize)
}

pub fn parse_csv(text: &str, log_time: bool, standardize: bool) -> CliResult<Ingested> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| data_err(format!("cannot read CSV header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    let find = |name: &str| header.iter().position(|h| h == name).ok_or_else(|| data_err(format!("missing required column '{name}'")));
    let (iy, id) = (find("y")?, find("delta")?);
    let cov_idx: Vec<usize> = (0..header.len()).filter(|&i| i != iy && i != id).collect();
    let covariates: Vec<String> = cov_idx.iter().map(|&i| header[i].clone()).collect();

    let mut y = Vec::new();
    let mut delta = Vec::new();
    let mut cov_rows: Vec<Vec<f64>> = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let row = r + 1;
        let record = record.map_err(|e| data_err(format!("row {row}: {e}")))?;
        let num = |i: usize| -> CliResult<f64> {
            let field = record.get(i).unwrap_or("");
            let v: f64 = field
                .parse()
                .map_err(|_| data_err(format!("row {row}: column '{}' value '{field}' is not a number", header[i])))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(data_err(format!("row {row}: column '{}' is not finite", header[i])))
            }
        };
        let mut yy = num(iy)?;
        if log_time {
            if yy <= 0.0 {
                return Err(data_err(format!("row {row}: y = {yy} has no logarithm")));
            }
            yy = yy.ln();
        }
        let d = num(id)?;
        let d = if d == 0.0 {
            false
        } else if d == 1.0 {
            true
        } else {
            return Err(data_err(format!("row {row}: delta must be 0 or 1, found {d}")));
        };
        y.push(yy);
        delta.push(d);
        cov_rows.push(cov_idx.iter().map(|&i| num(i)).collect::<CliResult<_>>()?);
    }
    if y.is_empty() {
        return Err(data_err("the CSV has no data rows"));
    }

    let standardization = if standardize && !covariates.is_empty() {
        let n = cov_rows.len() as f64;
        let k = covariates.len();
        let mean: Vec<f64> = (0..k).map(|j| cov_rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
        let sd: Vec<f64> = (0..k)
            .map(|j| (cov_rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt())
            .collect();
        if let Some(j) = sd.iter().position(|s| !(*s > 0.0)) {
            return Err(data_err(format!("column '{}' is constant and cannot be standardised", covariates[j])));
        }
        Some(Standardization { mean, sd })
    } else {
        None
    };

    let dim = covariates.len() + 1;
    let mut x = Vec::with_capacity(cov_rows.len() * dim);
    for r in &cov_rows {
        x.push(1.0);
        match &standardization {
            Some(s) => x.extend(s.apply(r)),
            None => x.extend_from_slice(r),
        }
    }
    let data = Dataset::from_flat(dim, y, delta, x)?;
    Ok(Ingested { data, covariates, standardization })
}

fn default_family() -> CopulaFamily {
    CopulaFamily::Frank
}

fn default_fit() -> FitConfig {
    FitConfig::new(default_family(), true, LambdaMode::Variable)
}

/// Diagnostic request: copula and the synthetic margins it is probed with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnoseConfig {
    pub family: CopulaFamily,
    pub theta: f64,
}

/// Resolved configuration of one run, echoed in every output document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub data: Option<PathBuf>,
    #[serde(default)]
    pub log_time: bool,
    #[serde(default)]
    pub standardize: bool,
    #[serde(default = "default_fit")]
    pub fit: FitConfig,
    #[serde(default)]
    pub quantiles: QuantileRequest,
    #[serde(default)]
    pub bootstrap_replications: Option<usize>,
    #[serde(default)]
    pub scenario: Option<ScenarioConfig>,
    #[serde(default)]
    pub reps: Option<usize>,
    #[serde(default)]
    pub diagnose: Option<DiagnoseConfig>,
    /// Execution resource only; never echoed so outputs match across
    /// thread counts.
    #[serde(default, skip_serializing)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: None,
            log_time: false,
            standardize: false,
            fit: default_fit(),
            quantiles: QuantileRequest::default(),
            bootstrap_replications: None,
            scenario: None,
            reps: None,
            diagnose: None,
            threads: None,
            seed: 0,
        }
    }
}

/// Accept either a bare [`RunConfig`] or an output document carrying one
/// under `"config"`.
pub fn load_config(path: &Path) -> CliResult<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> CliResult<RunConfig> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| usage(format!("invalid JSON: {e}")))?;
    let inner = match value {
        serde_json::Value::Object(mut map) if map.contains_key("config") && map.contains_key("result") => {
            map.remove("config").unwrap_or_default()
        }
        other => other,
    };
    serde_json::from_value(inner).map_err(|e| usage(format!("invalid configuration: {e}")))
}

/// JSON output: resolved configuration plus the command's result.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Document<R> {
    pub command: String,
    pub config: RunConfig,
    pub result: R,
}

fn to_json<R: Serialize>(command: &str, config: &RunConfig, result: R) -> CliResult<String> {
    let doc = Document { command: command.to_string(), config: config.clone(), result };
    serde_json::to_string_pretty(&doc).map_err(|e| CliError::Numerical(format!("cannot serialise output: {e}")))
}

fn parse_lambda(s: &str) -> std::result::Result<LambdaMode, String> {
    if s.eq_ignore_ascii_case("free") || s.eq_ignore_ascii_case("variable") {
        return Ok(LambdaMode::Variable);
    }
    let v: f64 = s.parse().map_err(|_| format!("expected a number in (0,1) or 'free', got '{s}'"))?;
    Ok(LambdaMode::Fixed(v))
}

fn parse_family(s: &str) -> std::result::Result<CopulaFamily, String> {
    s.parse::<CopulaFamily>().map_err(|e| e.to_string())
}

/// Comma-separated numbers given as one flag value.
#[derive(Debug, Clone, PartialEq)]
pub struct Values(pub Vec<f64>);

fn parse_vector(s: &str) -> std::result::Result<Values, String> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| format!("'{t}' is not a number")))
        .collect::<std::result::Result<_, _>>()
        .map(Values)
}

#[derive(Debug, Parser)]
#[command(name = "dqreg", version, about = "Copula quantile regression for survival data under dependent censoring")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Default, Clone)]
pub struct CommonArgs {
    /// JSON configuration (a bare config or any output document).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to all available cores.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Write the JSON document here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Default, Clone)]
pub struct FitArgs {
    #[arg(long, value_parser = parse_family)]
    pub copula: Option<CopulaFamily>,
    #[arg(long, conflicts_with = "homo")]
    pub hetero: bool,
    #[arg(long)]
    pub homo: bool,
    /// Fixed λ in (0,1) or `free`.
    #[arg(long, value_parser = parse_lambda)]
    pub lambda: Option<LambdaMode>,
    #[arg(long)]
    pub max_degree: Option<usize>,
    #[arg(long)]
    pub starts: Option<usize>,
    /// Take the natural logarithm of `y` on ingestion.
    #[arg(long)]
    pub log_time: bool,
    /// Z-score the covariate columns on ingestion.
    #[arg(long)]
    pub standardize: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model to a CSV file.
    Fit {
        csv: Option<PathBuf>,
        #[command(flatten)]
        fit: FitArgs,
        #[command(flatten)]
        common: CommonArgs,
        /// Ingest and echo the configuration without fitting.
        #[arg(long)]
        dry_run: bool,
    },
    /// Conditional quantiles from a fit document.
    Quantiles {
        fit_json: PathBuf,
        /// Comma-separated levels in (0,1).
        #[arg(long, value_parser = parse_vector)]
        levels: Option<Values>,
        /// Covariate values without the intercept, comma-separated; repeatable.
        #[arg(long = "x", value_parser = parse_vector)]
        x: Vec<Values>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Bootstrap standard errors with full refits.
    Bootstrap {
        csv: Option<PathBuf>,
        #[arg(long, short = 'B')]
        replications: Option<usize>,
        #[command(flatten)]
        fit: FitArgs,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Replication study for a named scenario or a scenario JSON file.
    Simulate {
        scenario: Option<String>,
        #[arg(long)]
        reps: Option<usize>,
        /// Override the sample size.
        #[arg(long)]
        n: Option<usize>,
        #[command(flatten)]
        fit: FitArgs,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Limit behaviour of the h-functions for a copula family.
    Diagnose {
        family: Option<String>,
        #[arg(long)]
        theta: Option<f64>,
        #[command(flatten)]
        common: CommonArgs,
    },
}

fn base_config(common: &CommonArgs) -> CliResult<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => load_config(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(t) = common.threads {
        cfg.threads = Some(t);
    }
    Ok(cfg)
}

fn apply_fit_args(cfg: &mut RunConfig, args: &FitArgs) {
    let f = &mut cfg.fit;
    if let Some(c) = args.copula {
        f.family = c;
    }
    if args.hetero {
        f.hetero = true;
    }
    if args.homo {
        f.hetero = false;
    }
    if let Some(l) = args.lambda {
        f.lambda_mode = l;
    }
    if let Some(k) = args.max_degree {
        f.max_degree = k;
    }
    if let Some(s) = args.starts {
        f.starts = s;
    }
    cfg.log_time |= args.log_time;
    cfg.standardize |= args.standardize;
}

/// Seed resolution: the environment variable wins over file and flags.
fn finalize_seed(cfg: &mut RunConfig) -> CliResult<()> {
    if let Ok(v) = std::env::var(SEED_ENV) {
        cfg.seed = v.trim().parse().map_err(|_| usage(format!("{SEED_ENV} must be an unsigned integer, got '{v}'")))?;
    }
    cfg.fit.seed = cfg.seed;
    if let Some(sc) = cfg.scenario.as_mut() {
        sc.fit.seed = cfg.seed;
    }
    Ok(())
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> CliResult<T> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(usage("--threads must be at least 1")),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| usage(format!("cannot build thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

fn data_path(cli: Option<&PathBuf>, cfg: &mut RunConfig) -> CliResult<PathBuf> {
    if let Some(p) = cli {
        cfg.data = Some(p.clone());
    }
    cfg.data.clone().ok_or_else(|| usage("no CSV file given"))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DryRun {
    pub n: usize,
    pub p: usize,
    pub covariates: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitOutput {
    pub covariates: Vec<String>,
    pub standardization: Option<Standardization>,
    pub fit: FitResult,
}

pub fn cmd_fit(csv: Option<&PathBuf>, fit_args: &FitArgs, common: &CommonArgs, dry_run: bool) -> CliResult<String> {
    let mut cfg = base_config(common)?;
    apply_fit_args(&mut cfg, fit_args);
    finalize_seed(&mut cfg)?;
    let path = data_path(csv, &mut cfg)?;
    let ing = read_csv(&path, cfg.log_time, cfg.standardize)?;
    if dry_run {
        let result = DryRun { n: ing.data.n(), p: ing.covariates.len(), covariates: ing.covariates };
        return to_json("fit", &cfg, result);
    }
    cfg.fit.validate()?;
    let fitted = with_threads(cfg.threads, || fit(&ing.data, &cfg.fit))??;
    to_json(
        "fit",
        &cfg,
        FitOutput { covariates: ing.covariates, standardization: ing.standardization, fit: fitted },
    )
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuantilesOutput {
    pub predictions: Vec<QuantilePrediction>,
}

pub fn cmd_quantiles(fit_json: &Path, levels: Option<Vec<f64>>, x: &[Vec<f64>], common: &CommonArgs) -> CliResult<String> {
    let text = fs::read_to_string(fit_json).map_err(|e| usage(format!("cannot read {}: {e}", fit_json.display())))?;
    let doc: Document<FitOutput> =
        serde_json::from_str(&text).map_err(|e| usage(format!("{} is not a fit document: {e}", fit_json.display())))?;
    let mut cfg = doc.config.clone();
    if common.config.is_some() {
        cfg.quantiles = base_config(common)?.quantiles;
    }
    if let Some(l) = levels {
        cfg.quantiles.levels = l;
    }
    if !x.is_empty() {
        cfg.quantiles.points = x
            .iter()
            .map(|raw| {
                let scaled = match &doc.result.standardization {
                    Some(s) if s.mean.len() == raw.len() => s.apply(raw),
                    _ => raw.clone(),
                };
                std::iter::once(1.0).chain(scaled).collect()
            })
            .collect();
    }
    let predictions = predict_table(&doc.result.fit, &cfg.quantiles)?;
    to_json("quantiles", &cfg, QuantilesOutput { predictions })
}

pub fn cmd_bootstrap(csv: Option<&PathBuf>, b: Option<usize>, fit_args: &FitArgs, common: &CommonArgs) -> CliResult<String> {
    let mut cfg = base_config(common)?;
    apply_fit_args(&mut cfg, fit_args);
    finalize_seed(&mut cfg)?;
    if let Some(b) = b {
        cfg.bootstrap_replications = Some(b);
    }
    let b = cfg.bootstrap_replications.unwrap_or(100);
    cfg.bootstrap_replications = Some(b);
    let path = data_path(csv, &mut cfg)?;
    let ing = read_csv(&path, cfg.log_time, cfg.standardize)?;
    cfg.fit.validate()?;
    let report: BootstrapReport =
        with_threads(cfg.threads, || bootstrap_se(&ing.data, &cfg.fit, b, cfg.seed, &cfg.quantiles))??;
    to_json("bootstrap", &cfg, report)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulateOutput {
    pub table: String,
    pub report: ScenarioReport,
}

pub fn cmd_simulate(
    scenario: Option<&str>,
    reps: Option<usize>,
    n: Option<usize>,
    fit_args: &FitArgs,
    common: &CommonArgs,
) -> CliResult<String> {
    let mut cfg = base_config(common)?;
    if let Some(s) = scenario {
        let path = Path::new(s);
        cfg.scenario = Some(if path.exists() {
            let text = fs::read_to_string(path).map_err(|e| usage(format!("cannot read {s}: {e}")))?;
            serde_json::from_str(&text).map_err(|e| usage(format!("invalid scenario file {s}: {e}")))?
        } else {
            ScenarioConfig::preset(s)?
        });
    }
    let mut sc = cfg.scenario.clone().ok_or_else(|| usage("no scenario given"))?;
    if let Some(n) = n {
        sc.n = n;
    }
    let mut fit_cfg = RunConfig { fit: sc.fit.clone(), ..RunConfig::default() };
    apply_fit_args(&mut fit_cfg, fit_args);
    sc.fit = fit_cfg.fit;
    if let Some(r) = reps {
        cfg.reps = Some(r);
    }
    let reps = cfg.reps.unwrap_or(sc.reps);
    cfg.reps = Some(reps);
    cfg.scenario = Some(sc);
    finalize_seed(&mut cfg)?;
    let sc = cfg.scenario.clone().expect("scenario set above");
    sc.fit.validate()?;
    let report = with_threads(cfg.threads, || run_scenario(&sc, reps, &cfg.quantiles, cfg.seed))??;
    let table = render_table(&report);
    to_json("simulate", &cfg, SimulateOutput { table, report })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagnoseOutput {
    pub margins: String,
    pub reports: Vec<HLimitReport>,
}

/// Run the lower-limit probe (and the upper-endpoint probe for Gumbel)
/// on synthetic margins suited to the family.
pub fn diagnose(cfg: &DiagnoseConfig) -> CliResult<DiagnoseOutput> {
    let copula = if cfg.family == CopulaFamily::Independence {
        CopulaSpec::independence()
    } else {
        CopulaSpec::new(cfg.family, cfg.theta)?
    };
    let x = [1.0];
    let t = NormalRegression::new(vec![0.0], vec![0.0])?;
    let mut reports = Vec::new();
    let margins = match cfg.family {
        CopulaFamily::Clayton => {
            let c = TMarginParams::new(vec![0.0], vec![0.0], EalParams::asymmetric_laplace(0.5)?, LambdaMode::Fixed(0.5))?;
            reports.push(h_limit_diagnostic(&copula, &t, &c, &x, Direction::Lower)?);
            "T ~ N(0,1); C ~ asymmetric Laplace(λ=0.5), heavier lower tail than T"
        }
        CopulaFamily::Gumbel => {
            let c_lower = NormalRegression::new(vec![0.5], vec![0.2])?;
            reports.push(h_limit_diagnostic(&copula, &t, &c_lower, &x, Direction::Lower)?);
            let c = UpperTruncatedNormal::new(vec![0.5], 1.0, 1.5)?;
            reports.push(h_limit_diagnostic(&copula, &t, &c, &x, Direction::Upper)?);
            "T ~ N(0,1); C ~ N(0.5, e^0.2) for the lower probe, N(0.5,1) truncated above at 1.5 for the upper probe"
        }
        _ => {
            let c = NormalRegression::new(vec![0.5], vec![0.2])?;
            reports.push(h_limit_diagnostic(&copula, &t, &c, &x, Direction::Lower)?);
            "T ~ N(0,1); C ~ N(0.5, e^0.2)"
        }
    };
    Ok(DiagnoseOutput { margins: margins.to_string(), reports })
}

fn default_theta(family: CopulaFamily) -> f64 {
    match family {
        CopulaFamily::Independence => 0.0,
        CopulaFamily::Clayton | CopulaFamily::Gumbel => 2.0,
        CopulaFamily::Frank | CopulaFamily::FrankPos => 5.74,
    }
}

pub fn cmd_diagnose(family: Option<&str>, theta: Option<f64>, common: &CommonArgs) -> CliResult<String> {
    let mut cfg = base_config(common)?;
    let mut d = cfg.diagnose.clone().unwrap_or(DiagnoseConfig { family: CopulaFamily::Frank, theta: 5.74 });
    if let Some(f) = family {
        d.family = f.parse::<CopulaFamily>()?;
        d.theta = default_theta(d.family);
    }
    if let Some(t) = theta {
        d.theta = t;
    }
    cfg.diagnose = Some(d.clone());
    finalize_seed(&mut cfg)?;
    let out = diagnose(&d)?;
    to_json("diagnose", &cfg, out)
}

fn out_path(cmd: &Command) -> Option<&PathBuf> {
    match cmd {
        Command::Fit { common, .. }
        | Command::Quantiles { common, .. }
        | Command::Bootstrap { common, .. }
        | Command::Simulate { common, .. }
        | Command::Diagnose { common, .. } => common.out.as_ref(),
    }
}

/// Execute a parsed command and return its JSON document.
pub fn execute(cli: &Cli) -> CliResult<String> {
    match &cli.command {
        Command::Fit { csv, fit, common, dry_run } => cmd_fit(csv.as_ref(), fit, common, *dry_run),
        Command::Quantiles { fit_json, levels, x, common } => {
            let points: Vec<Vec<f64>> = x.iter().map(|v| v.0.clone()).collect();
            cmd_quantiles(fit_json, levels.as_ref().map(|v| v.0.clone()), &points, common)
        }
        Command::Bootstrap { csv, replications, fit, common } => cmd_bootstrap(csv.as_ref(), *replications, fit, common),
        Command::Simulate { scenario, reps, n, fit, common } => cmd_simulate(scenario.as_deref(), *reps, *n, fit, common),
        Command::Diagnose { family, theta, common } => cmd_diagnose(family.as_deref(), *theta, common),
    }
}

/// Parse `args` (program name first), run, and write the output to
/// `--out` when given. Returns the JSON document.
pub fn run<I, S>(args: I) -> CliResult<String>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| usage(e.to_string()))?;
    let json = execute(&cli)?;
    if let Some(path) = out_path(&cli.command) {
        fs::write(path, &json).map_err(|e| usage(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(json)
}
