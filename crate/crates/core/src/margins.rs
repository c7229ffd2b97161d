//! Conditional margins given covariates `x = (1, x̃)`.
//!
//! The survival time follows an EAL location-scale regression
//! `T = xᵀβ + exp(xᵀγ)·ε` whose λ-quantile is the regression line; the
//! censoring time follows a homoscedastic normal regression. Further
//! families implement [`ConditionalMargin`] so simulation and diagnostics
//! can use them interchangeably.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laguerre_eal::EalParams;
use crate::scalar::Real;
use crate::special::{ln_norm_cdf, norm_cdf, norm_pdf, norm_sf, probit};

/// Whether λ is estimated or held at a known value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LambdaMode {
    Fixed(f64),
    Variable,
}

#[inline]
pub(crate) fn dot<T: Real>(x: &[T], coef: &[T]) -> T {
    debug_assert_eq!(x.len(), coef.len());
    x.iter().zip(coef).fold(T::zero(), |acc, (&a, &b)| acc + a * b)
}

/// Distribution of a response given covariates.
pub trait ConditionalMargin<T: Real> {
    fn location(&self, x: &[T]) -> T;
    fn scale(&self, x: &[T]) -> T;
    fn cdf(&self, y: T, x: &[T]) -> T;
    fn pdf(&self, y: T, x: &[T]) -> T;
    fn quantile(&self, p: T, x: &[T]) -> Result<T>;

    fn ln_cdf(&self, y: T, x: &[T]) -> T {
        self.cdf(y, x).ln()
    }

    fn ln_sf(&self, y: T, x: &[T]) -> T {
        (-self.cdf(y, x)).ln_1p()
    }

    /// Finite upper end of the support, if any.
    fn upper_endpoint(&self, _x: &[T]) -> Option<T> {
        None
    }
}

fn check_prob<T: Real>(p: T) -> Result<()> {
    if p > T::zero() && p < T::one() {
        Ok(())
    } else {
        Err(Error::domain(format!("probability must lie in (0,1), got {p}")))
    }
}

/// EAL location-scale regression for `T | X`.
#[derive(Debug, Clone, PartialEq)]
pub struct TMarginParams<T> {
    pub beta: Vec<T>,
    pub gamma: Vec<T>,
    pub eal: EalParams<T>,
    pub lambda_mode: LambdaMode,
}

impl<T: Real> TMarginParams<T> {
    pub fn new(beta: Vec<T>, gamma: Vec<T>, eal: EalParams<T>, lambda_mode: LambdaMode) -> Result<Self> {
        if beta.is_empty() || beta.len() != gamma.len() {
            return Err(Error::domain(format!(
                "β and γ must have the same non-zero length (got {} and {})",
                beta.len(),
                gamma.len()
            )));
        }
        if let LambdaMode::Fixed(l) = lambda_mode {
            if eal.lambda() != T::lit(l) {
                return Err(Error::domain(format!(
                    "fixed λ = {l} disagrees with EAL λ = {}",
                    eal.lambda()
                )));
            }
        }
        Ok(Self { beta, gamma, eal, lambda_mode })
    }

    /// `σ(x; γ) = exp(xᵀγ)`.
    #[inline]
    pub fn sigma(&self, x: &[T]) -> T {
        dot(x, &self.gamma).exp()
    }

    #[inline]
    pub fn standardize(&self, y: T, x: &[T]) -> (T, T) {
        let sigma = self.sigma(x);
        ((y - dot(x, &self.beta)) / sigma, sigma)
    }

    /// `(F(y|x), f(y|x))` with one standardisation.
    #[inline]
    pub fn cdf_pdf(&self, y: T, x: &[T]) -> (T, T) {
        let (z, sigma) = self.standardize(y, x);
        let (f, d) = self.eal.cdf_pdf(z);
        (f, d / sigma)
    }

    pub fn is_homoscedastic(&self) -> bool {
        self.gamma.iter().skip(1).all(|g| *g == T::zero())
    }
}

impl<T: Real> ConditionalMargin<T> for TMarginParams<T> {
    fn location(&self, x: &[T]) -> T {
        dot(x, &self.beta)
    }

    fn scale(&self, x: &[T]) -> T {
        self.sigma(x)
    }

    fn cdf(&self, y: T, x: &[T]) -> T {
        let (z, _) = self.standardize(y, x);
        self.eal.cdf(z)
    }

    fn pdf(&self, y: T, x: &[T]) -> T {
        let (z, sigma) = self.standardize(y, x);
        self.eal.pdf(z) / sigma
    }

    /// `xᵀβ + σ(x;γ)·Q_ε(p)`.
    fn quantile(&self, p: T, x: &[T]) -> Result<T> {
        Ok(dot(x, &self.beta) + self.sigma(x) * self.eal.quantile(p)?)
    }

    fn ln_cdf(&self, y: T, x: &[T]) -> T {
        self.eal.ln_cdf(self.standardize(y, x).0)
    }

    fn ln_sf(&self, y: T, x: &[T]) -> T {
        self.eal.ln_sf(self.standardize(y, x).0)
    }
}

pub fn t_cdf<T: Real>(tp: &TMarginParams<T>, y: T, x: &[T]) -> T {
    tp.cdf(y, x)
}

pub fn t_pdf<T: Real>(tp: &TMarginParams<T>, y: T, x: &[T]) -> T {
    tp.pdf(y, x)
}

pub fn t_quantile<T: Real>(tp: &TMarginParams<T>, p: T, x: &[T]) -> Result<T> {
    tp.quantile(p, x)
}

/// Homoscedastic normal regression for `C | X`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CMarginParams<T> {
    pub alpha: Vec<T>,
    pub sigma_c: T,
}

impl<T: Real> CMarginParams<T> {
    pub fn new(alpha: Vec<T>, sigma_c: T) -> Result<Self> {
        if !(sigma_c > T::zero() && sigma_c.is_finite()) {
            return Err(Error::domain(format!("σ_C must be positive, got {sigma_c}")));
        }
        if alpha.is_empty() {
            return Err(Error::domain("α must contain at least the intercept"));
        }
        Ok(Self { alpha, sigma_c })
    }

    #[inline]
    fn z(&self, y: T, x: &[T]) -> T {
        (y - dot(x, &self.alpha)) / self.sigma_c
    }
}

impl<T: Real> ConditionalMargin<T> for CMarginParams<T> {
    fn location(&self, x: &[T]) -> T {
        dot(x, &self.alpha)
    }

    fn scale(&self, _x: &[T]) -> T {
        self.sigma_c
    }

    fn cdf(&self, y: T, x: &[T]) -> T {
        norm_cdf(self.z(y, x))
    }

    fn pdf(&self, y: T, x: &[T]) -> T {
        norm_pdf(self.z(y, x)) / self.sigma_c
    }

    fn quantile(&self, p: T, x: &[T]) -> Result<T> {
        check_prob(p)?;
        Ok(dot(x, &self.alpha) + self.sigma_c * probit(p))
    }

    fn ln_cdf(&self, y: T, x: &[T]) -> T {
        ln_norm_cdf(self.z(y, x))
    }

    fn ln_sf(&self, y: T, x: &[T]) -> T {
        ln_norm_cdf(-self.z(y, x))
    }
}

pub fn c_cdf<T: Real>(cp: &CMarginParams<T>, y: T, x: &[T]) -> T {
    cp.cdf(y, x)
}

pub fn c_pdf<T: Real>(cp: &CMarginParams<T>, y: T, x: &[T]) -> T {
    cp.pdf(y, x)
}

pub fn c_quantile<T: Real>(cp: &CMarginParams<T>, p: T, x: &[T]) -> Result<T> {
    cp.quantile(p, x)
}

/// Normal regression with log-linear scale, `xᵀβ + exp(xᵀγ)·N(0,1)`;
/// the data-generating law of the survival time in the simulations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalRegression<T> {
    pub beta: Vec<T>,
    pub gamma: Vec<T>,
}

impl<T: Real> NormalRegression<T> {
    pub fn new(beta: Vec<T>, gamma: Vec<T>) -> Result<Self> {
        if beta.is_empty() || beta.len() != gamma.len() {
            return Err(Error::domain("β and γ must have the same non-zero length"));
        }
        Ok(Self { beta, gamma })
    }

    #[inline]
    fn z(&self, y: T, x: &[T]) -> T {
        (y - dot(x, &self.beta)) / dot(x, &self.gamma).exp()
    }
}

impl<T: Real> ConditionalMargin<T> for NormalRegression<T> {
    fn location(&self, x: &[T]) -> T {
        dot(x, &self.beta)
    }

    fn scale(&self, x: &[T]) -> T {
        dot(x, &self.gamma).exp()
    }

    fn cdf(&self, y: T, x: &[T]) -> T {
        norm_cdf(self.z(y, x))
    }

    fn pdf(&self, y: T, x: &[T]) -> T {
        norm_pdf(self.z(y, x)) / self.scale(x)
    }

    fn quantile(&self, p: T, x: &[T]) -> Result<T> {
        check_prob(p)?;
        Ok(self.location(x) + self.scale(x) * probit(p))
    }

    fn ln_cdf(&self, y: T, x: &[T]) -> T {
        ln_norm_cdf(self.z(y, x))
    }

    fn ln_sf(&self, y: T, x: &[T]) -> T {
        ln_norm_cdf(-self.z(y, x))
    }
}

/// Normal regression truncated above at a fixed `upper` bound; gives the
/// censoring law a finite right endpoint independent of its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpperTruncatedNormal<T> {
    pub alpha: Vec<T>,
    pub sigma: T,
    pub upper: T,
}

impl<T: Real> UpperTruncatedNormal<T> {
    pub fn new(alpha: Vec<T>, sigma: T, upper: T) -> Result<Self> {
        if !(sigma > T::zero()) || alpha.is_empty() || !upper.is_finite() {
            return Err(Error::domain("truncated normal needs σ > 0, an intercept and a finite bound"));
        }
        Ok(Self { alpha, sigma, upper })
    }

    fn z(&self, y: T, x: &[T]) -> (T, T) {
        let mu = dot(x, &self.alpha);
        ((y - mu) / self.sigma, (self.upper - mu) / self.sigma)
    }

    /// `P(C > y)` before normalisation, computed from the nearer tail.
    fn raw_tail_mass(z: T, z_max: T) -> T {
        if z > T::zero() {
            norm_sf(z) - norm_sf(z_max)
        } else {
            norm_cdf(z_max) - norm_cdf(z)
        }
    }
}

impl<T: Real> ConditionalMargin<T> for UpperTruncatedNormal<T> {
    fn location(&self, x: &[T]) -> T {
        dot(x, &self.alpha)
    }

    fn scale(&self, _x: &[T]) -> T {
        self.sigma
    }

    fn cdf(&self, y: T, x: &[T]) -> T {
        if y >= self.upper {
            return T::one();
        }
        let (z, zm) = self.z(y, x);
        norm_cdf(z) / norm_cdf(zm)
    }

    fn pdf(&self, y: T, x: &[T]) -> T {
        if y >= self.upper {
            return T::zero();
        }
        let (z, zm) = self.z(y, x);
        norm_pdf(z) / (self.sigma * norm_cdf(zm))
    }

    fn quantile(&self, p: T, x: &[T]) -> Result<T> {
        check_prob(p)?;
        let (_, zm) = self.z(self.upper, x);
        Ok(self.location(x) + self.sigma * probit(p * norm_cdf(zm)))
    }

    fn ln_cdf(&self, y: T, x: &[T]) -> T {
        if y >= self.upper {
            return T::zero();
        }
        let (z, zm) = self.z(y, x);
        if z > T::zero() {
            (-(Self::raw_tail_mass(z, zm) / norm_cdf(zm))).ln_1p()
        } else {
            ln_norm_cdf(z) - ln_norm_cdf(zm)
        }
    }

    fn ln_sf(&self, y: T, x: &[T]) -> T {
        if y >= self.upper {
            return T::neg_infinity();
        }
        let (z, zm) = self.z(y, x);
        Self::raw_tail_mass(z, zm).ln() - norm_cdf(zm).ln()
    }

    fn upper_endpoint(&self, _x: &[T]) -> Option<T> {
        Some(self.upper)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario_truth() -> NormalRegression<f64> {
        NormalRegression::new(vec![2.8, 0.6], vec![-1.5, 0.45]).unwrap()
    }

    #[test]
    fn regression_line_is_lambda_quantile() {
        let eal = EalParams::new(0.35, vec![1.0, 0.4], vec![1.0, -0.2, 0.1]).unwrap();
        let tp = TMarginParams::new(vec![1.0, -0.5], vec![0.2, 0.3], eal, LambdaMode::Variable).unwrap();
        let x = [1.0_f64, 2.0];
        assert_eq!(tp.cdf(0.0, &x), 0.35);
        assert_eq!(tp.quantile(0.35, &x).unwrap(), 0.0);
        for &p in &[0.05, 0.3, 0.5, 0.9] {
            let q = tp.quantile(p, &x).unwrap();
            assert!((tp.cdf(q, &x) - p).abs() < 1e-9);
        }
    }

    #[test]
    fn unit_scale_al_matches_plain_al() {
        let eal = EalParams::asymmetric_laplace(0.5).unwrap();
        let tp = TMarginParams::new(vec![1.5, 0.2], vec![0.0, 0.0], eal.clone(), LambdaMode::Fixed(0.5)).unwrap();
        let x = [1.0_f64, 3.0];
        assert!((tp.cdf(1.0, &x) - eal.cdf(1.0 - 2.1)).abs() < 1e-15);
        assert!(tp.is_homoscedastic());
    }

    #[test]
    fn fixed_lambda_must_match() {
        let eal = EalParams::asymmetric_laplace(0.4).unwrap();
        assert!(TMarginParams::new(vec![0.0], vec![0.0], eal, LambdaMode::Fixed(0.5)).is_err());
    }

    #[test]
    fn scenario_one_truth_values() {
        let g = scenario_truth();
        let x = [1.0, 1.0];
        assert!((g.quantile(0.5, &x).unwrap() - 3.400).abs() < 5e-4);
        assert!((g.quantile(0.25, &x).unwrap() - 3.164).abs() < 5e-4);
        assert!((g.quantile(0.75, &[1.0, 3.0]).unwrap() - 5.181).abs() < 5e-4);
    }

    #[test]
    fn censoring_margin_examples() {
        let cp = CMarginParams::new(vec![3.15, 0.45], 0.8).unwrap();
        let x = [1.0_f64, 2.0];
        assert!((cp.cdf(4.05, &x) - 0.5).abs() < 1e-15);
        for k in -40..=40 {
            let y = 4.05 + 0.8 * k as f64 / 10.0;
            let back = cp.quantile(cp.cdf(y, &x), &x).unwrap();
            assert!((back - y).abs() < 1e-9, "y={y} back={back}");
        }
        assert!(CMarginParams::new(vec![0.0], 0.0).is_err());
    }

    #[test]
    fn truncated_normal_endpoint() {
        let m = UpperTruncatedNormal::new(vec![0.0], 1.0, 1.5).unwrap();
        let x = [1.0_f64];
        assert_eq!(m.cdf(1.5, &x), 1.0);
        assert!(m.cdf(1.5 - 1e-9, &x) < 1.0);
        let q = m.quantile(0.3, &x).unwrap();
        assert!((m.cdf(q, &x) - 0.3).abs() < 1e-12);
        assert!((m.ln_cdf(1.0, &x) - m.cdf(1.0, &x).ln()).abs() < 1e-14);
        assert!((m.ln_sf(1.0, &x) - (1.0 - m.cdf(1.0, &x)).ln()).abs() < 1e-12);
    }
}
