//! Three-step fitting pipeline.
//!
//! 1. Basis: all parameters with Laguerre degrees `(0, 0)`, Nelder-Mead from
//!    several data-driven starts.
//! 2. Intermediate: survival-margin parameters only, copula and censoring
//!    margin frozen, over the degree grid `{0..K}²`; the pair with the
//!    smallest AIC is kept.
//! 3. Final: all parameters at the selected degrees, hybrid constrained
//!    search from warm starts.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::copula::{CopulaFamily, CopulaSpec};
use crate::error::{Error, Result};
use crate::laguerre_eal::EalParams;
use crate::likelihood::{continuity_of_block, loglik, Dataset, FrozenCensoring, Layout, ModelParams, PENALTY};
use crate::margins::{CMarginParams, LambdaMode, TMarginParams};
use crate::optimizer::{nelder_mead, nmcob, OptBudget, OptResult, FEASIBILITY_TOL};

const STREAM_STARTS: u64 = 1;
const STREAM_FINAL: u64 = 2;
const STREAM_GRID: u64 = 1000;

fn default_max_degree() -> usize {
    4
}
fn default_starts() -> usize {
    10
}
fn default_perturb_sd() -> f64 {
    0.2
}

/// Budgets for each optimisation phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Budgets {
    pub basis: OptBudget,
    pub nm_phase: OptBudget,
    pub constrained_phase: OptBudget,
}

impl Default for Budgets {
    fn default() -> Self {
        Self {
            basis: OptBudget::BASIS,
            nm_phase: OptBudget::NM_PHASE,
            constrained_phase: OptBudget::CONSTRAINED_PHASE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub family: CopulaFamily,
    pub hetero: bool,
    pub lambda_mode: LambdaMode,
    /// Upper bound of both Laguerre degrees in the intermediate grid.
    #[serde(default = "default_max_degree")]
    pub max_degree: usize,
    /// Number of starts in every step.
    #[serde(default = "default_starts")]
    pub starts: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub budgets: Budgets,
    /// Standard deviation of start perturbations on the packed scale.
    #[serde(default = "default_perturb_sd")]
    pub perturb_sd: f64,
}

impl FitConfig {
    pub fn new(family: CopulaFamily, hetero: bool, lambda_mode: LambdaMode) -> Self {
        Self {
            family,
            hetero,
            lambda_mode,
            max_degree: default_max_degree(),
            starts: default_starts(),
            seed: 0,
            budgets: Budgets::default(),
            perturb_sd: default_perturb_sd(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.hetero && self.lambda_mode == LambdaMode::Variable {
            return Err(Error::config("homoscedastic models require a fixed λ"));
        }
        if let LambdaMode::Fixed(l) = self.lambda_mode {
            if !(l > 0.0 && l < 1.0) {
                return Err(Error::config(format!("fixed λ must lie in (0,1), got {l}")));
            }
        }
        if self.starts == 0 {
            return Err(Error::config("at least one start is required"));
        }
        if !(self.perturb_sd >= 0.0 && self.perturb_sd.is_finite()) {
            return Err(Error::config("perturbation sd must be a finite non-negative number"));
        }
        Ok(())
    }

    pub fn layout(&self, dim: usize, deg_neg: usize, deg_pos: usize) -> Layout {
        Layout {
            family: self.family,
            dim,
            lambda_mode: self.lambda_mode,
            hetero: self.hetero,
            deg_neg,
            deg_pos,
        }
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

/// Natural-scale estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaturalParams {
    pub family: CopulaFamily,
    pub theta: f64,
    pub tau: f64,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub lambda: f64,
    pub phi_neg: Vec<f64>,
    pub phi_pos: Vec<f64>,
    pub alpha: Vec<f64>,
    pub sigma_c: f64,
}

impl From<&ModelParams> for NaturalParams {
    fn from(m: &ModelParams) -> Self {
        Self {
            family: m.copula.family,
            theta: m.copula.theta,
            tau: m.copula.tau(),
            beta: m.t.beta.clone(),
            gamma: m.t.gamma.clone(),
            lambda: m.t.eal.lambda(),
            phi_neg: m.t.eal.phi_neg().to_vec(),
            phi_pos: m.t.eal.phi_pos().to_vec(),
            alpha: m.c.alpha.clone(),
            sigma_c: m.c.sigma_c,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepTrace {
    pub step: String,
    pub loglik: f64,
    pub best_start: usize,
    pub iters: usize,
    pub evals: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub deg_neg: usize,
    pub deg_pos: usize,
    pub loglik: f64,
    pub aic: f64,
    pub continuity_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub config: FitConfig,
    pub layout: Layout,
    pub n: usize,
    pub dim: usize,
    pub packed: Vec<f64>,
    pub params: NaturalParams,
    pub loglik: f64,
    pub aic: f64,
    /// Number of free coordinates.
    pub q: usize,
    pub degrees: (usize, usize),
    pub continuity_residual: f64,
    pub converged: bool,
    pub traces: Vec<StepTrace>,
    pub grid: Vec<GridCell>,
}

impl FitResult {
    pub fn model(&self) -> Result<ModelParams> {
        self.layout.unpack(&self.packed)
    }
}

pub fn aic(q: usize, loglik: f64) -> f64 {
    2.0 * q as f64 - 2.0 * loglik
}

/// Check loss `ρ_λ(z) = z(λ − 1{z < 0})`.
pub fn check_loss(z: f64, lambda: f64) -> f64 {
    z * (lambda - if z < 0.0 { 1.0 } else { 0.0 })
}

fn design(data: &Dataset, rows: &[usize]) -> (DMatrix<f64>, DVector<f64>) {
    let d = data.dim();
    let x = DMatrix::from_fn(rows.len(), d, |r, c| data.x(rows[r])[c]);
    let y = DVector::from_iterator(rows.len(), rows.iter().map(|&i| data.y()[i]));
    (x, y)
}

fn least_squares(data: &Dataset, rows: &[usize]) -> Result<Vec<f64>> {
    let (x, y) = design(data, rows);
    let coef = x
        .svd(true, true)
        .solve(&y, 1e-12)
        .map_err(|e| Error::Fit(format!("least squares failed: {e}")))?;
    Ok(coef.iter().copied().collect())
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let m = values.len();
    if m % 2 == 1 {
        values[m / 2]
    } else {
        0.5 * (values[m / 2 - 1] + values[m / 2])
    }
}

fn perturb(base: &[f64], sd: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    base.iter().map(|&v| v + sd * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Data-driven starting points at degrees `(0, 0)`.
pub fn initial_values(data: &Dataset, config: &FitConfig) -> Result<Vec<Vec<f64>>> {
    config.validate()?;
    let layout = config.layout(data.dim(), 0, 0);
    let q = layout.len();
    if data.n() < 10 * q {
        return Err(Error::Data(format!(
            "{} observations are too few for {q} parameters (need at least {})",
            data.n(),
            10 * q
        )));
    }
    let uncens: Vec<usize> = (0..data.n()).filter(|&i| data.delta()[i]).collect();
    let cens: Vec<usize> = (0..data.n()).filter(|&i| !data.delta()[i]).collect();
    if uncens.len() < data.dim() + 1 || cens.len() < data.dim() + 1 {
        return Err(Error::config("both censored and uncensored observations are required"));
    }

    let level = match config.lambda_mode {
        LambdaMode::Fixed(l) => l,
        LambdaMode::Variable => 0.5,
    };
    let ols = least_squares(data, &uncens)?;
    let beta = nelder_mead(
        |b: &[f64]| {
            uncens
                .iter()
                .map(|&i| check_loss(data.y()[i] - crate::margins::dot(data.x(i), b), level))
                .sum::<f64>()
        },
        &ols,
        &OptBudget::BASIS,
    )
    .x;
    let mut resid: Vec<f64> = uncens
        .iter()
        .map(|&i| data.y()[i] - crate::margins::dot(data.x(i), &beta))
        .collect();
    let centre = median(&mut resid.clone());
    let mut abs_dev: Vec<f64> = resid.iter_mut().map(|r| (*r - centre).abs()).collect();
    let mad = median(&mut abs_dev).max(1e-3);

    let alpha = least_squares(data, &cens)?;
    let rss: f64 = cens
        .iter()
        .map(|&i| (data.y()[i] - crate::margins::dot(data.x(i), &alpha)).powi(2))
        .sum();
    let sigma_c = (rss / (cens.len() - data.dim()).max(1) as f64).sqrt().max(1e-3);

    let mut gamma = vec![0.0; data.dim()];
    gamma[0] = mad.ln();
    let eal = EalParams::asymmetric_laplace(level)?;
    let t = TMarginParams::new(beta, gamma, eal, config.lambda_mode)?;
    let c = CMarginParams::new(alpha, sigma_c)?;

    let copulas: Vec<CopulaSpec<f64>> = if config.family == CopulaFamily::Independence {
        vec![CopulaSpec::independence()]
    } else {
        [-0.4, 0.0, 0.4]
            .iter()
            .filter(|&&tau| config.family.tau_attainable(tau))
            .filter_map(|&tau| CopulaSpec::from_tau(config.family, tau).ok())
            .collect()
    };
    let mut bases: Vec<Vec<f64>> = copulas
        .into_iter()
        .filter_map(|copula| layout.pack(&ModelParams { copula, t: t.clone(), c: c.clone() }).ok())
        .collect();
    if bases.is_empty() {
        return Err(Error::Fit("no admissible starting copula parameter".into()));
    }
    bases.truncate(config.starts);

    let mut rng = config.rng(STREAM_STARTS);
    let n_bases = bases.len();
    let mut out = bases.clone();
    for k in n_bases..config.starts {
        out.push(perturb(&bases[k % n_bases], config.perturb_sd, &mut rng));
    }
    Ok(out)
}

fn trace(step: &str, index: usize, res: &OptResult<f64>) -> StepTrace {
    StepTrace {
        step: step.to_string(),
        loglik: -res.f,
        best_start: index,
        iters: res.iters,
        evals: res.evals,
        converged: res.converged,
    }
}

/// Index of the best result; ties keep the earlier start.
fn best_of(results: &[OptResult<f64>], feasible: impl Fn(&OptResult<f64>) -> bool) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, r) in results.iter().enumerate() {
        if r.degenerate || !r.f.is_finite() || !feasible(r) {
            continue;
        }
        if best.is_none_or(|b| r.f < results[b].f) {
            best = Some(i);
        }
    }
    best
}

pub struct BasisOutcome {
    pub packed: Vec<f64>,
    pub model: ModelParams,
    pub trace: StepTrace,
}

/// Nelder-Mead at degrees `(0, 0)` from every start; the best is kept.
pub fn basis_step(data: &Dataset, config: &FitConfig, starts: &[Vec<f64>]) -> Result<BasisOutcome> {
    let layout = config.layout(data.dim(), 0, 0);
    let results: Vec<OptResult<f64>> = starts
        .par_iter()
        .map(|x0| nelder_mead(|x: &[f64]| -loglik(&layout, x, data), x0, &config.budgets.basis))
        .collect();
    let best = best_of(&results, |r| -r.f > PENALTY)
        .ok_or_else(|| Error::Fit("every basis start is infeasible".into()))?;
    let packed = results[best].x.clone();
    Ok(BasisOutcome {
        model: layout.unpack(&packed)?,
        trace: trace("basis", best, &results[best]),
        packed,
    })
}

pub struct IntermediateOutcome {
    pub degrees: (usize, usize),
    pub t: TMarginParams<f64>,
    pub loglik: f64,
    pub grid: Vec<GridCell>,
    pub trace: StepTrace,
}

/// Survival-margin search over the degree grid with the copula and the
/// censoring margin frozen at the basis estimate.
pub fn intermediate_step(data: &Dataset, config: &FitConfig, basis: &ModelParams) -> Result<IntermediateOutcome> {
    let frozen = FrozenCensoring::new(basis.copula, &basis.c, data);
    let base_layout = config.layout(data.dim(), 0, 0);
    let base_packed = base_layout.pack(basis)?;
    let base_t = &base_packed[base_layout.t_range()];

    let k = config.max_degree;
    let cells: Vec<(usize, usize)> = (0..=k).flat_map(|a| (0..=k).map(move |b| (a, b))).collect();
    let fitted: Vec<(OptResult<f64>, usize)> = cells
        .par_iter()
        .enumerate()
        .map(|(ci, &(dn, dp))| {
            let layout = base_layout.with_degrees(dn, dp);
            let mut x0 = base_t.to_vec();
            x0.resize(layout.t_len(), 0.0);
            let mut rng = config.rng(STREAM_GRID + ci as u64);
            let mut starts = vec![x0.clone()];
            for _ in 1..config.starts {
                starts.push(perturb(&x0, config.perturb_sd, &mut rng));
            }
            let phi_start = layout.t_len() - dn - dp;
            let objective = |x: &[f64]| match layout.unpack_t(x) {
                Ok(t) => -frozen.loglik(&t, data),
                Err(_) => -PENALTY,
            };
            let residual = |x: &[f64]| continuity_of_block(&x[phi_start..], dn);
            let results: Vec<OptResult<f64>> = starts
                .iter()
                .map(|s| nmcob(objective, residual, s, &config.budgets.nm_phase, &config.budgets.constrained_phase))
                .collect();
            let feasible = |r: &OptResult<f64>| r.residual.is_some_and(|v| v.abs() < FEASIBILITY_TOL);
            let best = best_of(&results, feasible).or_else(|| best_of(&results, |_| true)).unwrap_or(0);
            (results[best].clone(), best)
        })
        .collect();

    let mut grid = Vec::with_capacity(cells.len());
    let mut chosen: Option<usize> = None;
    for (ci, &(dn, dp)) in cells.iter().enumerate() {
        let (res, _) = &fitted[ci];
        let q = base_layout.with_degrees(dn, dp).len();
        let ll = -res.f;
        let resid = res.residual.unwrap_or(0.0);
        let cell = GridCell { deg_neg: dn, deg_pos: dp, loglik: ll, aic: aic(q, ll), continuity_residual: resid };
        let admissible = ll > PENALTY && resid.abs() < FEASIBILITY_TOL && !res.degenerate;
        if admissible {
            let better = match chosen {
                None => true,
                Some(b) => {
                    let cur: &GridCell = &grid[b];
                    (cell.aic, dn + dp, dn) < (cur.aic, cur.deg_neg + cur.deg_pos, cur.deg_neg)
                }
            };
            if better {
                chosen = Some(ci);
            }
        }
        grid.push(cell);
    }
    let ci = chosen.ok_or_else(|| Error::Fit("no feasible cell in the degree grid".into()))?;
    let (dn, dp) = cells[ci];
    let (res, start) = &fitted[ci];
    let t = base_layout.with_degrees(dn, dp).unpack_t(&res.x)?;
    Ok(IntermediateOutcome {
        degrees: (dn, dp),
        t,
        loglik: -res.f,
        grid,
        trace: trace("intermediate", *start, res),
    })
}

/// Hybrid constrained search over all parameters at fixed degrees.
pub fn final_step(data: &Dataset, config: &FitConfig, degrees: (usize, usize), warm: &ModelParams) -> Result<(Vec<f64>, StepTrace)> {
    let layout = config.layout(data.dim(), degrees.0, degrees.1);
    let x0 = layout.pack(warm)?;
    let mut rng = config.rng(STREAM_FINAL);
    let mut starts = vec![x0.clone()];
    for _ in 1..config.starts {
        starts.push(perturb(&x0, config.perturb_sd, &mut rng));
    }
    let results: Vec<OptResult<f64>> = starts
        .par_iter()
        .map(|s| {
            nmcob(
                |x: &[f64]| -loglik(&layout, x, data),
                |x: &[f64]| layout.continuity_residual(x),
                s,
                &config.budgets.nm_phase,
                &config.budgets.constrained_phase,
            )
        })
        .collect();
    let feasible = |r: &OptResult<f64>| -r.f > PENALTY && r.residual.is_some_and(|v| v.abs() < FEASIBILITY_TOL);
    let best = best_of(&results, feasible)
        .or_else(|| best_of(&results, |r| -r.f > PENALTY))
        .ok_or_else(|| Error::Fit("every final start is infeasible".into()))?;
    Ok((results[best].x.clone(), trace("final", best, &results[best])))
}

/// Full pipeline: starts, basis, intermediate grid, final refinement.
pub fn fit(data: &Dataset, config: &FitConfig) -> Result<FitResult> {
    let starts = initial_values(data, config)?;
    let basis = basis_step(data, config, &starts)?;
    let inter = intermediate_step(data, config, &basis.model)?;
    let warm = ModelParams { copula: basis.model.copula, t: inter.t.clone(), c: basis.model.c.clone() };
    let (packed, final_trace) = final_step(data, config, inter.degrees, &warm)?;

    let layout = config.layout(data.dim(), inter.degrees.0, inter.degrees.1);
    let model = layout.unpack(&packed)?;
    let ll = loglik(&layout, &packed, data);
    let residual = layout.continuity_residual(&packed);
    let q = layout.len();
    Ok(FitResult {
        config: config.clone(),
        layout,
        n: data.n(),
        dim: data.dim(),
        params: NaturalParams::from(&model),
        loglik: ll,
        aic: aic(q, ll),
        q,
        degrees: inter.degrees,
        continuity_residual: residual,
        converged: residual.abs() < FEASIBILITY_TOL && ll > PENALTY,
        traces: vec![basis.trace, inter.trace, final_trace],
        grid: inter.grid,
        packed,
    })
}
