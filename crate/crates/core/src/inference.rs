//! Post-fit inference: quantile prediction, bootstrap standard errors,
//! likelihood-ratio comparison and limit diagnostics for the h-functions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::copula::CopulaSpec;
use crate::error::{Error, Result};
use crate::fitter::{fit, FitConfig, FitResult};
use crate::likelihood::Dataset;
use crate::margins::{ConditionalMargin, LambdaMode};

/// Largest fraction of failed bootstrap replications tolerated.
pub const MAX_BOOTSTRAP_FAILURE_RATE: f64 = 0.2;
/// Threshold below which a limit sequence counts as vanishing.
pub const VANISHING_THRESHOLD: f64 = 1e-3;

/// Quantile levels and covariate vectors at which to predict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantileRequest {
    pub levels: Vec<f64>,
    pub points: Vec<Vec<f64>>,
}

impl Default for QuantileRequest {
    fn default() -> Self {
        Self {
            levels: vec![0.25, 0.5, 0.75],
            points: vec![vec![1.0, 1.0], vec![1.0, 2.0], vec![1.0, 3.0]],
        }
    }
}

impl QuantileRequest {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if let Some(p) = self.levels.iter().find(|&&p| !(p > 0.0 && p < 1.0)) {
            return Err(Error::domain(format!("quantile level {p} is outside (0,1)")));
        }
        if let Some(x) = self.points.iter().find(|x| x.len() != dim) {
            return Err(Error::domain(format!("covariate point {x:?} does not have dimension {dim}")));
        }
        Ok(())
    }

    /// `(p, x)` pairs, levels outermost.
    pub fn cells(&self) -> impl Iterator<Item = (f64, &[f64])> + '_ {
        self.levels
            .iter()
            .flat_map(move |&p| self.points.iter().map(move |x| (p, x.as_slice())))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantilePrediction {
    pub p: f64,
    pub x: Vec<f64>,
    pub value: f64,
}

/// `xᵀβ̂ + σ(x; γ̂)·Q_ε̂(p)`.
pub fn predict_quantile(fit: &FitResult, p: f64, x: &[f64]) -> Result<f64> {
    if x.len() != fit.dim {
        return Err(Error::domain(format!("covariate vector has length {}, fit expects {}", x.len(), fit.dim)));
    }
    fit.model()?.t.quantile(p, x)
}

pub fn predict_table(fit: &FitResult, request: &QuantileRequest) -> Result<Vec<QuantilePrediction>> {
    request.validate(fit.dim)?;
    let model = fit.model()?;
    request
        .cells()
        .map(|(p, x)| Ok(QuantilePrediction { p, x: x.to_vec(), value: model.t.quantile(p, x)? }))
        .collect()
}

/// Names of the parameters shared by every fit regardless of the selected
/// Laguerre degrees.
pub fn common_parameter_names(config: &FitConfig, dim: usize) -> Vec<String> {
    let mut out = Vec::new();
    if config.family.has_parameter() {
        out.push("theta".to_string());
    }
    out.extend((0..dim).map(|i| format!("beta[{i}]")));
    let n_gamma = if config.hetero { dim } else { 1 };
    out.extend((0..n_gamma).map(|i| format!("gamma[{i}]")));
    if config.lambda_mode == LambdaMode::Variable {
        out.push("lambda".to_string());
    }
    out.extend((0..dim).map(|i| format!("alpha[{i}]")));
    out.push("sigma_c".to_string());
    out
}

/// Values of [`common_parameter_names`] for a fit.
pub fn common_parameters(fit: &FitResult) -> Vec<(String, f64)> {
    let p = &fit.params;
    let mut values = Vec::new();
    if p.family.has_parameter() {
        values.push(p.theta);
    }
    values.extend_from_slice(&p.beta);
    values.extend_from_slice(&p.gamma[..if fit.config.hetero { p.gamma.len() } else { 1 }]);
    if fit.config.lambda_mode == LambdaMode::Variable {
        values.push(p.lambda);
    }
    values.extend_from_slice(&p.alpha);
    values.push(p.sigma_c);
    common_parameter_names(&fit.config, fit.dim).into_iter().zip(values).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedSe {
    pub name: String,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileSe {
    pub p: f64,
    pub x: Vec<f64>,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapReport {
    pub replications: usize,
    pub dropped: usize,
    pub seed: u64,
    pub parameters: Vec<NamedSe>,
    pub quantiles: Vec<QuantileSe>,
}

/// Sample standard deviation of a stably sorted copy of `values`.
fn sample_sd(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() as f64;
    let mean = v.iter().sum::<f64>() / m;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt()
}

/// Row indices drawn uniformly with replacement.
pub fn resample_rows(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

/// Nonparametric bootstrap with full refits, degree selection included.
/// Common parameters and quantile predictions of one replication fit.
type Draw = (Vec<f64>, Vec<f64>);

pub fn bootstrap_se(
    data: &Dataset,
    config: &FitConfig,
    b: usize,
    seed: u64,
    request: &QuantileRequest,
) -> Result<BootstrapReport> {
    bootstrap_se_with(data, config, b, seed, request, resample_rows)
}

/// [`bootstrap_se`] with a caller-supplied resampling scheme.
pub fn bootstrap_se_with<S>(
    data: &Dataset,
    config: &FitConfig,
    b: usize,
    seed: u64,
    request: &QuantileRequest,
    resample: S,
) -> Result<BootstrapReport>
where
    S: Fn(usize, &mut ChaCha8Rng) -> Vec<usize> + Sync,
{
    if b < 2 {
        return Err(Error::config("the bootstrap needs at least 2 replications"));
    }
    request.validate(data.dim())?;
    let outcomes: Vec<Option<Draw>> = (0..b)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64 + 1);
            let rows = resample(data.n(), &mut rng);
            let fitted = fit(&data.subset(&rows), config).ok()?;
            let params: Vec<f64> = common_parameters(&fitted).into_iter().map(|(_, v)| v).collect();
            let quants: Option<Vec<f64>> = request.cells().map(|(p, x)| predict_quantile(&fitted, p, x).ok()).collect();
            Some((params, quants?))
        })
        .collect();

    let ok: Vec<&Draw> = outcomes.iter().flatten().collect();
    let dropped = b - ok.len();
    if dropped as f64 > MAX_BOOTSTRAP_FAILURE_RATE * b as f64 || ok.len() < 2 {
        return Err(Error::Fit(format!("{dropped} of {b} bootstrap replications failed")));
    }
    let column = |pick: &dyn Fn(&Draw) -> f64| sample_sd(&ok.iter().map(|o| pick(o)).collect::<Vec<_>>());
    let parameters = common_parameter_names(config, data.dim())
        .into_iter()
        .enumerate()
        .map(|(k, name)| NamedSe { name, se: column(&|o| o.0[k]) })
        .collect();
    let quantiles = request
        .cells()
        .enumerate()
        .map(|(k, (p, x))| QuantileSe { p, x: x.to_vec(), se: column(&|o| o.1[k]) })
        .collect();
    Ok(BootstrapReport { replications: b, dropped, seed, parameters, quantiles })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrtResult {
    pub statistic: f64,
    pub critical_value: f64,
    pub reject: bool,
}

/// `(AIC_a − AIC_b) − 2(q_a − q_b)` against the 95% χ² quantile.
pub fn lrt_from_aic(aic_nested: f64, aic_full: f64, q_nested: f64, q_full: f64, df: usize) -> Result<LrtResult> {
    if df == 0 {
        return Err(Error::domain("LRT degrees of freedom must be positive"));
    }
    let chi = ChiSquared::new(df as f64).map_err(|e| Error::domain(e.to_string()))?;
    let critical_value = chi.inverse_cdf(0.95);
    let statistic = (aic_nested - aic_full) - 2.0 * (q_nested - q_full);
    Ok(LrtResult { statistic, critical_value, reject: statistic > critical_value })
}

pub fn lrt(fit_nested: &FitResult, fit_full: &FitResult, df: usize) -> Result<LrtResult> {
    lrt_from_aic(fit_nested.aic, fit_full.aic, fit_nested.q as f64, fit_full.q as f64, df)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Lower,
    Upper,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HLimitReport {
    pub direction: Direction,
    pub y: Vec<f64>,
    /// `h_{T|C}(F_T | F_C)` along the grid.
    pub h_t_given_c: Vec<f64>,
    /// `h_{C|T}(F_C | F_T)` along the grid.
    pub h_c_given_t: Vec<f64>,
    pub t_given_c_vanishes: bool,
    pub c_given_t_vanishes: bool,
}

/// Last value below [`VANISHING_THRESHOLD`] and no increase along the way.
pub fn is_vanishing(seq: &[f64]) -> bool {
    let Some(&last) = seq.last() else { return false };
    last < VANISHING_THRESHOLD && seq.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12) + 1e-300)
}

fn linspace(a: f64, b: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| a + (b - a) * i as f64 / (n - 1) as f64)
}

/// Both h-functions along 20 points approaching the lower limit
/// (`y = loc_T − k·scale_T`, `k ∈ [5, 40]`) or the finite upper endpoint
/// of the censoring support (`y = M − scale_C·10^{−k/3}`).
pub fn h_limit_diagnostic<MT, MC>(
    copula: &CopulaSpec<f64>,
    tp: &MT,
    cp: &MC,
    x: &[f64],
    direction: Direction,
) -> Result<HLimitReport>
where
    MT: ConditionalMargin<f64>,
    MC: ConditionalMargin<f64>,
{
    let y: Vec<f64> = match direction {
        Direction::Lower => {
            let (loc, scale) = (tp.location(x), tp.scale(x));
            linspace(5.0, 40.0, 20).map(|k| loc - k * scale).collect()
        }
        Direction::Upper => {
            let end = cp
                .upper_endpoint(x)
                .ok_or_else(|| Error::domain("upper-limit diagnostic needs a censoring law with a finite upper endpoint"))?;
            let scale = cp.scale(x);
            linspace(5.0, 40.0, 20).map(|k| end - scale * 10f64.powf(-k / 3.0)).collect()
        }
    };
    let mut h_tc = Vec::with_capacity(y.len());
    let mut h_ct = Vec::with_capacity(y.len());
    for &yy in &y {
        let (ln_u, ln_v) = (tp.ln_cdf(yy, x), cp.ln_cdf(yy, x));
        h_tc.push(copula.h_t_given_c_ln(ln_u, ln_v));
        h_ct.push(copula.h_c_given_t_ln(ln_v, ln_u));
    }
    Ok(HLimitReport {
        direction,
        t_given_c_vanishes: is_vanishing(&h_tc),
        c_given_t_vanishes: is_vanishing(&h_ct),
        y,
        h_t_given_c: h_tc,
        h_c_given_t: h_ct,
    })
}

/// Kendall's tau-a by pair counting.
pub fn kendall_tau(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let mut score = 0i64;
    for i in 0..n {
        for j in i + 1..n {
            let s = (a[i] - a[j]) * (b[i] - b[j]);
            score += (s > 0.0) as i64 - (s < 0.0) as i64;
        }
    }
    score as f64 / (n * (n - 1) / 2) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::copula::CopulaFamily;
    use crate::laguerre_eal::EalParams;
    use crate::margins::{NormalRegression, TMarginParams, UpperTruncatedNormal};

    #[test]
    fn lrt_arithmetic() {
        let r = lrt_from_aic(1157.20, 1150.55, 1.0, 0.0, 1).unwrap();
        assert!((r.statistic - 4.65).abs() < 1e-9);
        assert!((r.critical_value - 3.841458820694124).abs() < 1e-9);
        assert!(r.reject);
        let same = lrt_from_aic(1000.0, 1000.0, 5.0, 5.0, 3).unwrap();
        assert!(same.statistic <= 0.0 && !same.reject);
        assert!(lrt_from_aic(1.0, 1.0, 1.0, 1.0, 0).is_err());
    }

    #[test]
    fn kendall_examples() {
        assert_eq!(kendall_tau(&[1.0, 2.0, 3.0], &[2.0, 4.0, 9.0]), 1.0);
        assert_eq!(kendall_tau(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), -1.0);
    }

    #[test]
    fn vanishing_rule() {
        assert!(is_vanishing(&[0.5, 0.1, 1e-4]));
        assert!(!is_vanishing(&[0.5, 0.6, 1e-4]));
        assert!(!is_vanishing(&[0.5, 0.1, 0.01]));
        assert!(!is_vanishing(&[]));
    }

    fn normal(loc: f64, log_scale: f64) -> NormalRegression<f64> {
        NormalRegression::new(vec![loc], vec![log_scale]).unwrap()
    }

    #[test]
    fn frank_and_independence_vanish() {
        let (t, c) = (normal(0.0, 0.0), normal(0.5, 0.2));
        for cop in [CopulaSpec::new(CopulaFamily::Frank, 5.74).unwrap(), CopulaSpec::independence()] {
            let r = h_limit_diagnostic(&cop, &t, &c, &[1.0], Direction::Lower).unwrap();
            assert!(r.t_given_c_vanishes && r.c_given_t_vanishes, "{cop:?}");
        }
        let r = h_limit_diagnostic(&CopulaSpec::independence(), &t, &c, &[1.0], Direction::Lower).unwrap();
        for (h, &y) in r.h_c_given_t.iter().zip(&r.y) {
            assert!((h - c.cdf(y, &[1.0])).abs() <= 1e-12 * h.max(1e-300));
        }
    }

    #[test]
    fn clayton_depends_on_tail_order() {
        let cop = CopulaSpec::new(CopulaFamily::Clayton, 2.0).unwrap();
        let light = normal(0.0, 0.0);
        let heavy = TMarginParams::new(vec![0.0], vec![0.0], EalParams::asymmetric_laplace(0.5).unwrap(), LambdaMode::Fixed(0.5)).unwrap();
        let r = h_limit_diagnostic(&cop, &light, &heavy, &[1.0], Direction::Lower).unwrap();
        assert!(r.t_given_c_vanishes && !r.c_given_t_vanishes);
        // reversed tail order reverses the verdict
        let r = h_limit_diagnostic(&cop, &heavy, &light, &[1.0], Direction::Lower).unwrap();
        assert!(!r.t_given_c_vanishes && r.c_given_t_vanishes);
    }

    #[test]
    fn gumbel_upper_endpoint() {
        let cop = CopulaSpec::new(CopulaFamily::Gumbel, 2.0).unwrap();
        let t = normal(0.0, 0.0);
        let c = UpperTruncatedNormal::new(vec![0.0], 1.0, 1.5).unwrap();
        let r = h_limit_diagnostic(&cop, &t, &c, &[1.0], Direction::Upper).unwrap();
        assert!(r.t_given_c_vanishes);
        assert!(h_limit_diagnostic(&cop, &t, &t, &[1.0], Direction::Upper).is_err());
    }

    fn small_fit_setup() -> (Dataset, FitConfig) {
        let mut sc = crate::simulate::ScenarioConfig::preset("all-indep").unwrap();
        sc.n = 200;
        let data = crate::simulate::generate_dataset(&sc, 4).unwrap();
        let mut cfg = FitConfig::new(CopulaFamily::Independence, false, LambdaMode::Fixed(0.5));
        cfg.max_degree = 1;
        cfg.starts = 2;
        (data, cfg)
    }

    #[test]
    fn identical_resamples_give_zero_se() {
        let (data, cfg) = small_fit_setup();
        let req = QuantileRequest::default();
        let rep = bootstrap_se_with(&data, &cfg, 2, 1, &req, |n, _| (0..n).collect()).unwrap();
        assert_eq!(rep.dropped, 0);
        assert!(rep.parameters.iter().all(|p| p.se == 0.0));
        assert!(rep.quantiles.iter().all(|q| q.se == 0.0));
        assert_eq!(rep.parameters.len(), 2 + 1 + 2 + 1);
    }

    #[test]
    fn prediction_at_lambda_is_regression_line() {
        let (data, cfg) = small_fit_setup();
        let fitted = fit(&data, &cfg).unwrap();
        let x = [1.0, 2.5];
        let line = fitted.params.beta[0] + 2.5 * fitted.params.beta[1];
        assert!((predict_quantile(&fitted, 0.5, &x).unwrap() - line).abs() < 1e-12);
        let table = predict_table(&fitted, &QuantileRequest { levels: vec![0.1, 0.5, 0.9], points: vec![x.to_vec()] }).unwrap();
        assert!(table[0].value < table[1].value && table[1].value < table[2].value);
        assert!(predict_quantile(&fitted, 1.0, &x).is_err());
    }

    #[test]
    fn sample_sd_is_order_free() {
        let a = sample_sd(&[1.0, 2.0, 4.0, 8.0]);
        assert_eq!(a, sample_sd(&[8.0, 1.0, 4.0, 2.0]));
        assert_eq!(sample_sd(&[3.0, 3.0]), 0.0);
    }
}
