//! Parameter packing and the censored-data log-likelihood.
//!
//! Packed order: `[θ'] β [logit λ] γ φ̃_1..φ̃_m̃ φ_1..φ_m α log σ_C`, where
//! `θ'` is absent for the independence copula, `logit λ` only appears when
//! λ is estimated, and `γ` is reduced to its intercept in homoscedastic
//! models. The survival-time coordinates form one contiguous block.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::copula::{CopulaFamily, CopulaSpec, FRANK_MAX_ABS_THETA, FRANK_MIN_ABS_THETA};
use crate::error::{Error, Result};
use crate::laguerre_eal::EalParams;
use crate::margins::{CMarginParams, ConditionalMargin, LambdaMode, TMarginParams};
use crate::scalar::clamp_prob;
use crate::special::pairwise_sum;

/// Log-likelihood reported for infeasible or non-finite evaluations.
pub const PENALTY: f64 = -1e10;
/// Floor applied to densities and to `1 − h` before taking logs.
pub const DENSITY_FLOOR: f64 = 1e-300;

/// Shape of a packed parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub family: CopulaFamily,
    /// Covariate dimension including the intercept.
    pub dim: usize,
    pub lambda_mode: LambdaMode,
    pub hetero: bool,
    pub deg_neg: usize,
    pub deg_pos: usize,
}

impl Layout {
    pub fn with_degrees(self, deg_neg: usize, deg_pos: usize) -> Self {
        Self { deg_neg, deg_pos, ..self }
    }

    pub fn n_theta(&self) -> usize {
        usize::from(self.family.has_parameter())
    }

    fn n_lambda(&self) -> usize {
        usize::from(self.lambda_mode == LambdaMode::Variable)
    }

    fn n_gamma(&self) -> usize {
        if self.hetero {
            self.dim
        } else {
            1
        }
    }

    /// Length of the survival-time block.
    pub fn t_len(&self) -> usize {
        self.dim + self.n_lambda() + self.n_gamma() + self.deg_neg + self.deg_pos
    }

    /// Number of free coordinates.
    pub fn len(&self) -> usize {
        self.n_theta() + self.t_len() + self.dim + 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn t_range(&self) -> Range<usize> {
        let s = self.n_theta();
        s..s + self.t_len()
    }

    pub fn c_range(&self) -> Range<usize> {
        let s = self.t_range().end;
        s..s + self.dim + 1
    }

    /// Positions of `(φ̃, φ)` within the full vector.
    pub fn phi_range(&self) -> Range<usize> {
        let end = self.t_range().end;
        end - self.deg_neg - self.deg_pos..end
    }

    fn check_len(&self, got: usize, want: usize, what: &str) -> Result<()> {
        if got == want {
            Ok(())
        } else {
            Err(Error::domain(format!("{what} has length {got}, layout expects {want}")))
        }
    }

    pub fn unpack_theta(&self, packed: &[f64]) -> Result<CopulaSpec<f64>> {
        let family = self.family;
        let theta = match family {
            CopulaFamily::Independence => return Ok(CopulaSpec::independence()),
            CopulaFamily::Frank => packed[0],
            CopulaFamily::FrankPos | CopulaFamily::Clayton => packed[0].exp(),
            CopulaFamily::Gumbel => 1.0 + packed[0].exp(),
        };
        if matches!(family, CopulaFamily::Frank | CopulaFamily::FrankPos) && theta.abs() > FRANK_MAX_ABS_THETA {
            return Err(Error::domain(format!("Frank θ = {theta} is outside [-{FRANK_MAX_ABS_THETA}, {FRANK_MAX_ABS_THETA}]")));
        }
        CopulaSpec::new(family, theta)
    }

    fn pack_theta(&self, copula: &CopulaSpec<f64>, out: &mut Vec<f64>) -> Result<()> {
        if copula.family != self.family {
            return Err(Error::domain(format!("copula {} does not match layout {}", copula.family, self.family)));
        }
        let t = copula.theta;
        let v = match self.family {
            CopulaFamily::Independence => return Ok(()),
            CopulaFamily::Frank => {
                if t.abs() < FRANK_MIN_ABS_THETA || t.abs() > FRANK_MAX_ABS_THETA {
                    return Err(Error::domain(format!("Frank θ = {t} is outside the fitting box")));
                }
                t
            }
            CopulaFamily::FrankPos | CopulaFamily::Clayton => t.ln(),
            CopulaFamily::Gumbel => (t - 1.0).ln(),
        };
        if !v.is_finite() {
            return Err(Error::domain(format!("θ = {t} cannot be packed for {}", self.family)));
        }
        out.push(v);
        Ok(())
    }

    /// Survival-time margin from its packed block.
    pub fn unpack_t(&self, block: &[f64]) -> Result<TMarginParams<f64>> {
        self.check_len(block.len(), self.t_len(), "survival block")?;
        let d = self.dim;
        let (beta, rest) = block.split_at(d);
        let (lambda, rest) = match self.lambda_mode {
            LambdaMode::Fixed(l) => (l, rest),
            LambdaMode::Variable => (1.0 / (1.0 + (-rest[0]).exp()), &rest[1..]),
        };
        let (gamma_packed, rest) = rest.split_at(self.n_gamma());
        let mut gamma = vec![0.0; d];
        gamma[..gamma_packed.len()].copy_from_slice(gamma_packed);
        let (neg, pos) = rest.split_at(self.deg_neg);
        let eal = EalParams::from_free(lambda, neg, pos)?;
        TMarginParams::new(beta.to_vec(), gamma, eal, self.lambda_mode)
    }

    fn pack_t(&self, t: &TMarginParams<f64>, out: &mut Vec<f64>) -> Result<()> {
        self.check_len(t.beta.len(), self.dim, "β")?;
        if t.eal.degrees() != (self.deg_neg, self.deg_pos) {
            return Err(Error::domain("Laguerre degrees do not match the layout"));
        }
        if t.lambda_mode != self.lambda_mode {
            return Err(Error::domain("λ mode does not match the layout"));
        }
        out.extend_from_slice(&t.beta);
        if self.lambda_mode == LambdaMode::Variable {
            let l = t.eal.lambda();
            out.push((l / (1.0 - l)).ln());
        }
        if !self.hetero && !t.is_homoscedastic() {
            return Err(Error::domain("homoscedastic layout requires γ̃ = 0"));
        }
        out.extend_from_slice(&t.gamma[..self.n_gamma()]);
        out.extend_from_slice(&t.eal.phi_neg()[1..]);
        out.extend_from_slice(&t.eal.phi_pos()[1..]);
        Ok(())
    }

    pub fn unpack_c(&self, block: &[f64]) -> Result<CMarginParams<f64>> {
        self.check_len(block.len(), self.dim + 1, "censoring block")?;
        CMarginParams::new(block[..self.dim].to_vec(), block[self.dim].exp())
    }

    pub fn unpack(&self, packed: &[f64]) -> Result<ModelParams> {
        self.check_len(packed.len(), self.len(), "packed vector")?;
        if packed.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("packed vector has a non-finite entry"));
        }
        Ok(ModelParams {
            copula: self.unpack_theta(packed)?,
            t: self.unpack_t(&packed[self.t_range()])?,
            c: self.unpack_c(&packed[self.c_range()])?,
        })
    }

    pub fn pack(&self, params: &ModelParams) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.len());
        self.pack_theta(&params.copula, &mut out)?;
        self.pack_t(&params.t, &mut out)?;
        self.check_len(params.c.alpha.len(), self.dim, "α")?;
        out.extend_from_slice(&params.c.alpha);
        out.push(params.c.sigma_c.ln());
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("parameters map to a non-finite packed value"));
        }
        Ok(out)
    }

    /// Continuity residual of the EAL encoded in `packed`.
    pub fn continuity_residual(&self, packed: &[f64]) -> f64 {
        continuity_of_block(&packed[self.phi_range()], self.deg_neg)
    }
}

/// Continuity residual from the free `(φ̃, φ)` coordinates.
pub fn continuity_of_block(phi_free: &[f64], deg_neg: usize) -> f64 {
    let (neg, pos) = phi_free.split_at(deg_neg);
    let stats = |free: &[f64]| {
        let s = 1.0 + free.iter().sum::<f64>();
        let q = 1.0 + free.iter().map(|v| v * v).sum::<f64>();
        s * s / q
    };
    stats(neg) - stats(pos)
}

/// Natural-scale parameters `π = (θ, θ_T, θ_C)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub copula: CopulaSpec<f64>,
    pub t: TMarginParams<f64>,
    pub c: CMarginParams<f64>,
}

/// Observations `(y_i, δ_i, x_i)` with `x_i` starting with the intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    dim: usize,
    y: Vec<f64>,
    delta: Vec<bool>,
    x: Vec<f64>,
}

impl Dataset {
    /// `x` is row-major with `dim` entries per row.
    pub fn from_flat(dim: usize, y: Vec<f64>, delta: Vec<bool>, x: Vec<f64>) -> Result<Self> {
        let n = y.len();
        if dim == 0 {
            return Err(Error::Data("covariate dimension must be at least 1 (intercept)".into()));
        }
        if delta.len() != n || x.len() != n * dim {
            return Err(Error::Data(format!(
                "inconsistent sizes: {n} responses, {} indicators, {} covariate values for dimension {dim}",
                delta.len(),
                x.len()
            )));
        }
        for i in 0..n {
            if !y[i].is_finite() {
                return Err(Error::Data(format!("row {i}: response is not finite")));
            }
            let row = &x[i * dim..(i + 1) * dim];
            if row[0] != 1.0 {
                return Err(Error::Data(format!("row {i}: first covariate must be the intercept 1")));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Data(format!("row {i}: covariate is not finite")));
            }
        }
        Ok(Self { dim, y, delta, x })
    }

    pub fn from_rows(rows: &[(f64, bool, Vec<f64>)]) -> Result<Self> {
        let dim = rows.first().map_or(1, |r| r.2.len());
        let mut x = Vec::with_capacity(rows.len() * dim);
        for (i, r) in rows.iter().enumerate() {
            if r.2.len() != dim {
                return Err(Error::Data(format!("row {i}: expected {dim} covariates, found {}", r.2.len())));
            }
            x.extend_from_slice(&r.2);
        }
        Self::from_flat(
            dim,
            rows.iter().map(|r| r.0).collect(),
            rows.iter().map(|r| r.1).collect(),
            x,
        )
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn delta(&self) -> &[bool] {
        &self.delta
    }

    pub fn x(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }

    pub fn n_uncensored(&self) -> usize {
        self.delta.iter().filter(|&&d| d).count()
    }

    pub fn rows(&self) -> impl Iterator<Item = (f64, bool, &[f64])> + '_ {
        (0..self.n()).map(move |i| (self.y[i], self.delta[i], self.x(i)))
    }

    /// Rows at `indices`, repeats allowed.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut x = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            x.extend_from_slice(self.x(i));
        }
        Self {
            dim: self.dim,
            y: indices.iter().map(|&i| self.y[i]).collect(),
            delta: indices.iter().map(|&i| self.delta[i]).collect(),
            x,
        }
    }

    pub fn concat(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::Data("cannot concatenate datasets of different dimension".into()));
        }
        let mut out = self.clone();
        out.y.extend_from_slice(&other.y);
        out.delta.extend_from_slice(&other.delta);
        out.x.extend_from_slice(&other.x);
        Ok(out)
    }
}

#[inline]
fn ln_floored(v: f64) -> f64 {
    v.max(DENSITY_FLOOR).ln()
}

/// One observation's contribution.
pub fn loglik_contribution(params: &ModelParams, y: f64, x: &[f64], delta: bool) -> f64 {
    let (ft, ft_dens) = params.t.cdf_pdf(y, x);
    let ft = clamp_prob(ft);
    let fc = clamp_prob(params.c.cdf(y, x));
    let v = if delta {
        ln_floored(ft_dens) + ln_floored(1.0 - params.copula.h_c_given_t(fc, ft))
    } else {
        ln_floored(params.c.pdf(y, x)) + ln_floored(1.0 - params.copula.h_t_given_c(ft, fc))
    };
    if v.is_finite() {
        v
    } else {
        PENALTY
    }
}

fn sum_or_penalty(values: &[f64]) -> f64 {
    if values.iter().any(|v| !v.is_finite() || *v <= PENALTY) {
        return PENALTY;
    }
    let total = pairwise_sum(values);
    if total.is_finite() {
        total.max(PENALTY)
    } else {
        PENALTY
    }
}

impl ModelParams {
    pub fn loglik(&self, data: &Dataset) -> f64 {
        let parts: Vec<f64> = data.rows().map(|(y, d, x)| loglik_contribution(self, y, x, d)).collect();
        sum_or_penalty(&parts)
    }
}

/// Log-likelihood at a packed vector; infeasible vectors give [`PENALTY`].
pub fn loglik(layout: &Layout, packed: &[f64], data: &Dataset) -> f64 {
    match layout.unpack(packed) {
        Ok(p) => p.loglik(data),
        Err(_) => PENALTY,
    }
}

/// Copula and censoring margin held fixed, with the per-row censoring
/// quantities evaluated once.
#[derive(Debug, Clone)]
pub struct FrozenCensoring {
    copula: CopulaSpec<f64>,
    fc: Vec<f64>,
    ln_fc_dens: Vec<f64>,
}

impl FrozenCensoring {
    pub fn new(copula: CopulaSpec<f64>, c: &CMarginParams<f64>, data: &Dataset) -> Self {
        let fc = data.rows().map(|(y, _, x)| clamp_prob(c.cdf(y, x))).collect();
        let ln_fc_dens = data.rows().map(|(y, _, x)| ln_floored(c.pdf(y, x))).collect();
        Self { copula, fc, ln_fc_dens }
    }

    pub fn loglik(&self, t: &TMarginParams<f64>, data: &Dataset) -> f64 {
        let parts: Vec<f64> = data
            .rows()
            .enumerate()
            .map(|(i, (y, d, x))| {
                let (ft, ft_dens) = t.cdf_pdf(y, x);
                let ft = clamp_prob(ft);
                let fc = self.fc[i];
                let v = if d {
                    ln_floored(ft_dens) + ln_floored(1.0 - self.copula.h_c_given_t(fc, ft))
                } else {
                    self.ln_fc_dens[i] + ln_floored(1.0 - self.copula.h_t_given_c(ft, fc))
                };
                if v.is_finite() {
                    v
                } else {
                    PENALTY
                }
            })
            .collect();
        sum_or_penalty(&parts)
    }
}

/// Log-likelihood with the copula and censoring margin of `frozen` held
/// fixed and the survival margin replaced by `t`.
pub fn loglik_t_only(frozen: &ModelParams, t: &TMarginParams<f64>, data: &Dataset) -> f64 {
    FrozenCensoring::new(frozen.copula, &frozen.c, data).loglik(t, data)
}
