//! Data generation from copula-coupled margins and replication studies.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Open01;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::copula::{CopulaFamily, CopulaSpec};
use crate::error::{Error, Result};
use crate::fitter::{fit, FitConfig, FitResult};
use crate::inference::{predict_quantile, QuantileRequest};
use crate::laguerre_eal::EalParams;
use crate::likelihood::Dataset;
use crate::margins::{CMarginParams, ConditionalMargin, LambdaMode, NormalRegression, TMarginParams};

/// Law of the survival time used to generate data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum GeneratorMargin {
    Normal {
        beta: Vec<f64>,
        gamma: Vec<f64>,
    },
    Eal {
        beta: Vec<f64>,
        gamma: Vec<f64>,
        lambda: f64,
        phi_neg: Vec<f64>,
        phi_pos: Vec<f64>,
    },
}

/// Instantiated generator margin.
#[derive(Debug, Clone)]
pub enum Generator {
    Normal(NormalRegression<f64>),
    Eal(TMarginParams<f64>),
}

impl GeneratorMargin {
    pub fn build(&self) -> Result<Generator> {
        Ok(match self {
            Self::Normal { beta, gamma } => Generator::Normal(NormalRegression::new(beta.clone(), gamma.clone())?),
            Self::Eal { beta, gamma, lambda, phi_neg, phi_pos } => {
                let eal = EalParams::new(*lambda, phi_neg.clone(), phi_pos.clone())?;
                Generator::Eal(TMarginParams::new(beta.clone(), gamma.clone(), eal, LambdaMode::Variable)?)
            }
        })
    }
}

impl ConditionalMargin<f64> for Generator {
    fn location(&self, x: &[f64]) -> f64 {
        match self {
            Self::Normal(m) => m.location(x),
            Self::Eal(m) => m.location(x),
        }
    }
    fn scale(&self, x: &[f64]) -> f64 {
        match self {
            Self::Normal(m) => m.scale(x),
            Self::Eal(m) => m.scale(x),
        }
    }
    fn cdf(&self, y: f64, x: &[f64]) -> f64 {
        match self {
            Self::Normal(m) => m.cdf(y, x),
            Self::Eal(m) => m.cdf(y, x),
        }
    }
    fn pdf(&self, y: f64, x: &[f64]) -> f64 {
        match self {
            Self::Normal(m) => m.pdf(y, x),
            Self::Eal(m) => m.pdf(y, x),
        }
    }
    fn quantile(&self, p: f64, x: &[f64]) -> Result<f64> {
        match self {
            Self::Normal(m) => m.quantile(p, x),
            Self::Eal(m) => m.quantile(p, x),
        }
    }
}

/// Distribution of one non-intercept covariate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum CovariateLaw {
    Uniform { low: f64, high: f64 },
}

impl CovariateLaw {
    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            Self::Uniform { low, high } => low + (high - low) * rng.random::<f64>(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub t_margin: GeneratorMargin,
    pub c_margin: CMarginParams<f64>,
    pub copula: CopulaFamily,
    /// Kendall's tau of the generating copula.
    pub tau: f64,
    pub covariates: Vec<CovariateLaw>,
    pub n: usize,
    pub reps: usize,
    pub fit: FitConfig,
    /// Approximate uncensored fraction, informational only.
    #[serde(default)]
    pub target_uncensored: Option<f64>,
}

pub const PRESET_NAMES: [&str; 18] = [
    "basis-het",
    "basis-hom",
    "less-cens",
    "more-cens",
    "size-s",
    "size-l",
    "size-xl",
    "less-dep",
    "more-dep",
    "fit-pos",
    "hom0.3",
    "hom0.7",
    "fit-indep",
    "gen-indep",
    "all-indep",
    "fit-indep-hom",
    "mscop-het",
    "mscop-hom",
];

impl ScenarioConfig {
    fn basis_het() -> Self {
        Self {
            name: "basis-het".into(),
            t_margin: GeneratorMargin::Normal { beta: vec![2.8, 0.6], gamma: vec![-1.5, 0.45] },
            c_margin: CMarginParams { alpha: vec![3.15, 0.45], sigma_c: 0.8 },
            copula: CopulaFamily::Frank,
            tau: 0.5,
            covariates: vec![CovariateLaw::Uniform { low: 0.0, high: 4.0 }],
            n: 500,
            reps: 200,
            fit: FitConfig::new(CopulaFamily::Frank, true, LambdaMode::Variable),
            target_uncensored: Some(0.54),
        }
    }

    fn basis_hom(lambda: f64) -> Self {
        let mut sc = Self::basis_het();
        sc.t_margin = GeneratorMargin::Normal { beta: vec![2.8, 0.6], gamma: vec![-1.7, 0.0] };
        sc.copula = CopulaFamily::Clayton;
        sc.fit = FitConfig::new(CopulaFamily::Clayton, false, LambdaMode::Fixed(lambda));
        sc.target_uncensored = Some(0.51);
        sc
    }

    /// Named replication settings of the first simulation scenario.
    pub fn preset(name: &str) -> Result<Self> {
        let mut sc = match name {
            "basis-het" => Self::basis_het(),
            "basis-hom" => Self::basis_hom(0.5),
            "hom0.3" => Self::basis_hom(0.3),
            "hom0.7" => Self::basis_hom(0.7),
            "less-cens" | "more-cens" => {
                let mut sc = Self::basis_het();
                let (a0, rate) = if name == "less-cens" { (3.5, 0.74) } else { (2.85, 0.35) };
                sc.c_margin.alpha[0] = a0;
                sc.target_uncensored = Some(rate);
                sc
            }
            "size-s" | "size-l" | "size-xl" => {
                let mut sc = Self::basis_het();
                sc.n = match name {
                    "size-s" => 250,
                    "size-l" => 1000,
                    _ => 2000,
                };
                sc
            }
            "less-dep" | "more-dep" => {
                let mut sc = Self::basis_het();
                sc.tau = if name == "less-dep" { 0.25 } else { 0.75 };
                sc
            }
            "fit-pos" => {
                let mut sc = Self::basis_het();
                sc.fit.family = CopulaFamily::FrankPos;
                sc
            }
            "fit-indep" => {
                let mut sc = Self::basis_het();
                sc.fit.family = CopulaFamily::Independence;
                sc
            }
            "gen-indep" | "all-indep" => {
                let mut sc = Self::basis_het();
                sc.copula = CopulaFamily::Independence;
                sc.tau = 0.0;
                sc.target_uncensored = Some(0.53);
                if name == "all-indep" {
                    sc.fit.family = CopulaFamily::Independence;
                }
                sc
            }
            "fit-indep-hom" => {
                let mut sc = Self::basis_hom(0.5);
                sc.fit.family = CopulaFamily::Independence;
                sc
            }
            "mscop-het" => {
                let mut sc = Self::basis_het();
                sc.fit.family = CopulaFamily::Gumbel;
                sc
            }
            "mscop-hom" => {
                let mut sc = Self::basis_hom(0.5);
                sc.fit.family = CopulaFamily::Gumbel;
                sc
            }
            other => {
                return Err(Error::config(format!(
                    "unknown scenario '{other}'; known: {}",
                    PRESET_NAMES.join(", ")
                )))
            }
        };
        sc.name = name.to_string();
        Ok(sc)
    }

    pub fn generating_copula(&self) -> Result<CopulaSpec<f64>> {
        if self.copula == CopulaFamily::Independence {
            Ok(CopulaSpec::independence())
        } else {
            CopulaSpec::from_tau(self.copula, self.tau)
        }
    }

    /// Generator quantile at level `p` and covariate vector `x`.
    pub fn true_quantile(&self, p: f64, x: &[f64]) -> Result<f64> {
        self.t_margin.build()?.quantile(p, x)
    }
}

fn open01(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(Open01)
}

/// One `(T, C)` draw: `u` for `T`, `v = h⁻¹(w | u)` for `C`.
pub fn sample_pair<M: ConditionalMargin<f64>>(
    copula: &CopulaSpec<f64>,
    t: &M,
    c: &CMarginParams<f64>,
    x: &[f64],
    rng: &mut ChaCha8Rng,
) -> Result<(f64, f64)> {
    let u = open01(rng);
    let w = open01(rng);
    let v = copula.inverse_h(w, u);
    Ok((t.quantile(u, x)?, c.quantile(v, x)?))
}

/// `n` rows of `(min(T, C), 1{T ≤ C}, x)`.
pub fn generate_dataset(sc: &ScenarioConfig, seed: u64) -> Result<Dataset> {
    let copula = sc.generating_copula()?;
    let t = sc.t_margin.build()?;
    let dim = sc.covariates.len() + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut y, mut delta, mut xs) = (Vec::with_capacity(sc.n), Vec::with_capacity(sc.n), Vec::with_capacity(sc.n * dim));
    for _ in 0..sc.n {
        let start = xs.len();
        xs.push(1.0);
        for law in &sc.covariates {
            xs.push(law.draw(&mut rng));
        }
        let (tt, cc) = sample_pair(&copula, &t, &sc.c_margin, &xs[start..], &mut rng)?;
        y.push(tt.min(cc));
        delta.push(tt <= cc);
    }
    Dataset::from_flat(dim, y, delta, xs)
}

/// Seeds `(data, fit)` for replication `rep`.
pub fn replication_seeds(master: u64, rep: usize) -> (u64, u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(rep as u64 + 1);
    (rng.next_u64(), rng.next_u64())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellMetrics {
    pub scenario: String,
    pub p: f64,
    pub x: Vec<f64>,
    #[serde(rename = "true")]
    pub truth: f64,
    pub avg: f64,
    pub evar10: f64,
    pub rbias: f64,
    pub reps: usize,
    pub dropped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub scenario: ScenarioConfig,
    pub seed: u64,
    pub reps: usize,
    pub dropped: usize,
    pub mean_uncensored: f64,
    pub cells: Vec<CellMetrics>,
}

/// Per-replication outcome: uncensored fraction and predictions, or `None`
/// for a failed fit.
pub type Replication = (f64, Option<Vec<f64>>);

fn predictions(fit: &FitResult, grid: &QuantileRequest) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(grid.levels.len() * grid.points.len());
    for &p in &grid.levels {
        for x in &grid.points {
            out.push(predict_quantile(fit, p, x)?);
        }
    }
    Ok(out)
}

/// Generate and fit one replication.
pub fn run_replication(sc: &ScenarioConfig, grid: &QuantileRequest, master: u64, rep: usize) -> Result<Replication> {
    let (data_seed, fit_seed) = replication_seeds(master, rep);
    let data = generate_dataset(sc, data_seed)?;
    let frac = data.n_uncensored() as f64 / data.n() as f64;
    let cfg = FitConfig { seed: fit_seed, ..sc.fit.clone() };
    let preds = fit(&data, &cfg).and_then(|f| predictions(&f, grid)).ok();
    Ok((frac, preds))
}

/// Aggregate replication outcomes into cell metrics.
pub fn summarize(sc: &ScenarioConfig, grid: &QuantileRequest, seed: u64, outcomes: &[Replication]) -> Result<ScenarioReport> {
    let ok: Vec<&Vec<f64>> = outcomes.iter().filter_map(|o| o.1.as_ref()).collect();
    let dropped = outcomes.len() - ok.len();
    if ok.len() < 2 {
        return Err(Error::Fit(format!("only {} of {} replications succeeded", ok.len(), outcomes.len())));
    }
    let m = ok.len() as f64;
    let mut cells = Vec::new();
    let mut k = 0;
    for &p in &grid.levels {
        for x in &grid.points {
            let truth = sc.true_quantile(p, x)?;
            let avg = ok.iter().map(|v| v[k]).sum::<f64>() / m;
            let var = ok.iter().map(|v| (v[k] - avg).powi(2)).sum::<f64>() / (m - 1.0);
            cells.push(CellMetrics {
                scenario: sc.name.clone(),
                p,
                x: x.clone(),
                truth,
                avg,
                evar10: 10.0 * var,
                rbias: (avg - truth) / truth,
                reps: ok.len(),
                dropped,
            });
            k += 1;
        }
    }
    Ok(ScenarioReport {
        scenario: sc.clone(),
        seed,
        reps: outcomes.len(),
        dropped,
        mean_uncensored: outcomes.iter().map(|o| o.0).sum::<f64>() / outcomes.len() as f64,
        cells,
    })
}

/// Replication study: `reps` datasets, one fit each, scored on `grid`.
pub fn run_scenario(sc: &ScenarioConfig, reps: usize, grid: &QuantileRequest, seed: u64) -> Result<ScenarioReport> {
    if reps < 2 {
        return Err(Error::config("a replication study needs at least 2 replications"));
    }
    let outcomes: Vec<Replication> = (0..reps)
        .into_par_iter()
        .map(|r| run_replication(sc, grid, seed, r))
        .collect::<Result<_>>()?;
    summarize(sc, grid, seed, &outcomes)
}

/// Aligned text rendering with one column per `(p, x)` cell.
pub fn render_table(report: &ScenarioReport) -> String {
    let mut out = format!(
        "scenario {}  reps {}  dropped {}  uncensored {:.3}\n",
        report.scenario.name, report.reps, report.dropped, report.mean_uncensored
    );
    let head: Vec<String> = report
        .cells
        .iter()
        .map(|c| format!("p={:.2},x={}", c.p, c.x.iter().skip(1).map(|v| format!("{v}")).collect::<Vec<_>>().join("/")))
        .collect();
    out.push_str(&format!("{:<8}", ""));
    for h in &head {
        out.push_str(&format!("{h:>14}"));
    }
    out.push('\n');
    type Getter = fn(&CellMetrics) -> f64;
    let rows: [(&str, Getter); 4] = [
        ("true", |c| c.truth),
        ("avg", |c| c.avg),
        ("eVar10", |c| c.evar10),
        ("rBias", |c| c.rbias),
    ];
    for (label, get) in rows {
        out.push_str(&format!("{label:<8}"));
        for c in &report.cells {
            out.push_str(&format!("{:>14.3}", get(c)));
        }
        out.push('\n');
    }
    out
}
