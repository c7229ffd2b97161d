//! Laguerre orthonormal polynomials and the enriched asymmetric Laplace
//! (EAL) family built on them.
//!
//! The EAL density multiplies each side of an asymmetric Laplace density by
//! a normalised squared Laguerre series,
//!
//! ```text
//! f(y) = λ(1-λ) e^{-λy}     ‖φ‖⁻² (Σ φ_k L_k(λy))²        y > 0
//!        λ(1-λ) e^{-(λ-1)y} ‖φ̃‖⁻² (Σ φ̃_k L_k((λ-1)y))²    y ≤ 0
//! ```
//!
//! which keeps `F(0) = λ` for every coefficient choice. The CDF is closed
//! form: the squared series is expanded into monomials once, at
//! construction, and integrated against `e^{-u}` with integer-order
//! incomplete gamma sums.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Highest Laguerre degree accepted by [`laguerre_eval`].
pub const MAX_LAGUERRE_DEGREE: usize = 60;

/// Monomial coefficients of `L_k`, built with the ratio recurrence
/// `a_{j+1} / a_j = -(k - j) / (j + 1)²` so no factorial is ever formed.
fn laguerre_monomials<T: Real>(k: usize) -> Vec<T> {
    let mut coeffs = Vec::with_capacity(k + 1);
    let mut a = T::one();
    coeffs.push(a);
    for j in 0..k {
        let num = T::lit((k - j) as f64);
        let den = T::lit(((j + 1) * (j + 1)) as f64);
        a = -a * num / den;
        coeffs.push(a);
    }
    coeffs
}

#[inline]
fn horner<T: Real>(coeffs: &[T], x: T) -> T {
    coeffs.iter().rev().fold(T::zero(), |acc, &c| acc * x + c)
}

/// `L_k(x) = Σ_j C(k,j) (-1)^j x^j / j!`.
pub fn laguerre_eval<T: Real>(k: usize, x: T) -> Result<T> {
    if k > MAX_LAGUERRE_DEGREE {
        return Err(Error::domain(format!(
            "Laguerre degree {k} exceeds the supported maximum {MAX_LAGUERRE_DEGREE}"
        )));
    }
    Ok(horner(&laguerre_monomials::<T>(k), x))
}

/// `Σ_k coeffs[k] · L_k(x)`.
pub fn laguerre_series<T: Real>(coeffs: &[T], x: T) -> Result<T> {
    if coeffs.is_empty() {
        return Err(Error::domain("Laguerre series needs at least one coefficient"));
    }
    Ok(horner(&series_monomials(coeffs)?, x))
}

/// Monomial coefficients of `Σ_k w_k L_k(u)`.
fn series_monomials<T: Real>(weights: &[T]) -> Result<Vec<T>> {
    let degree = weights.len() - 1;
    if degree > MAX_LAGUERRE_DEGREE {
        return Err(Error::domain(format!(
            "Laguerre degree {degree} exceeds the supported maximum {MAX_LAGUERRE_DEGREE}"
        )));
    }
    let mut out = vec![T::zero(); degree + 1];
    for (k, &w) in weights.iter().enumerate() {
        for (j, c) in laguerre_monomials::<T>(k).into_iter().enumerate() {
            out[j] = out[j] + w * c;
        }
    }
    Ok(out)
}

/// `(Σφ̃)²/‖φ̃‖² − (Σφ)²/‖φ‖²`: zero exactly when the EAL density is
/// continuous at the origin.
pub fn continuity_residual<T: Real>(phi_neg: &[T], phi_pos: &[T]) -> T {
    origin_ratio(phi_neg) - origin_ratio(phi_pos)
}

fn origin_ratio<T: Real>(phi: &[T]) -> T {
    let sum: T = phi.iter().copied().sum();
    let norm_sq: T = phi.iter().map(|&p| p * p).sum();
    sum * sum / norm_sq
}

/// Cached expansion for one side of the density.
#[derive(Debug, Clone, PartialEq)]
struct Branch<T> {
    /// Monomial coefficients of the Laguerre series `S(u)`.
    series: Vec<T>,
    /// `‖φ‖²`.
    norm_sq: T,
    /// Coefficients `t_k` with `∫_z^∞ e^{-u} S(u)² du = e^{-z} Σ_k t_k z^k`.
    tail: Vec<T>,
    /// `∫_0^∞ e^{-u} S(u)² du`, equal to `‖φ‖²` by orthonormality.
    mass: T,
}

impl<T: Real> Branch<T> {
    fn new(phi: &[T]) -> Result<Self> {
        let series = series_monomials(phi)?;
        let n = series.len();
        // c_j: monomial coefficients of S(u)^2
        let mut squared = vec![T::zero(); 2 * n - 1];
        for (i, &a) in series.iter().enumerate() {
            for (j, &b) in series.iter().enumerate() {
                squared[i + j] = squared[i + j] + a * b;
            }
        }
        // ∫_z^∞ u^j e^{-u} du = j! e^{-z} Σ_{k≤j} z^k / k!, so
        // t_k = (Σ_{j≥k} c_j j!) / k!.
        let len = squared.len();
        let mut factorials = vec![T::one(); len];
        for j in 1..len {
            factorials[j] = factorials[j - 1] * T::lit(j as f64);
        }
        let mut tail = vec![T::zero(); len];
        let mut acc = T::zero();
        for k in (0..len).rev() {
            acc = acc + squared[k] * factorials[k];
            tail[k] = acc / factorials[k];
        }
        let mass = tail[0];
        let norm_sq = phi.iter().map(|&p| p * p).sum();
        Ok(Self { series, norm_sq, tail, mass })
    }

    /// `e^{-u} S(u)² / ‖φ‖²` for `u ≥ 0`.
    #[inline]
    fn weight(&self, u: T) -> T {
        let s = horner(&self.series, u);
        (-u).exp() * s * s / self.norm_sq
    }

    /// Fraction of the branch mass beyond `z ≥ 0`.
    #[inline]
    fn upper_fraction(&self, z: T) -> T {
        (-z).exp() * horner(&self.tail, z) / self.mass
    }

    /// `(weight(z), upper_fraction(z))` sharing one exponential.
    #[inline]
    fn weight_and_upper(&self, z: T) -> (T, T) {
        let e = (-z).exp();
        let s = horner(&self.series, z);
        (e * s * s / self.norm_sq, e * horner(&self.tail, z) / self.mass)
    }

    #[inline]
    fn ln_upper_fraction(&self, z: T) -> T {
        -z + horner(&self.tail, z).ln() - self.mass.ln()
    }
}

/// Parameters `(λ, φ̃, φ)` of an EAL distribution with the monomial
/// expansions it needs already computed.
#[derive(Debug, Clone, PartialEq)]
pub struct EalParams<T> {
    lambda: T,
    phi_neg: Vec<T>,
    phi_pos: Vec<T>,
    neg: Branch<T>,
    pos: Branch<T>,
}

impl<T: Real> EalParams<T> {
    /// Build from full coefficient vectors; each must start with exactly 1.
    pub fn new(lambda: T, phi_neg: Vec<T>, phi_pos: Vec<T>) -> Result<Self> {
        if !(lambda > T::zero() && lambda < T::one()) {
            return Err(Error::domain(format!("EAL λ must lie in (0,1), got {lambda}")));
        }
        for (name, phi) in [("φ̃", &phi_neg), ("φ", &phi_pos)] {
            if phi.first() != Some(&T::one()) {
                return Err(Error::domain(format!("{name} must start with the fixed entry 1")));
            }
            if phi.iter().any(|v| !v.is_finite()) {
                return Err(Error::domain(format!("{name} has a non-finite entry")));
            }
        }
        let neg = Branch::new(&phi_neg)?;
        let pos = Branch::new(&phi_pos)?;
        Ok(Self { lambda, phi_neg, phi_pos, neg, pos })
    }

    /// Build from the free coefficients `(φ̃_1..φ̃_m̃)` and `(φ_1..φ_m)`.
    pub fn from_free(lambda: T, neg_free: &[T], pos_free: &[T]) -> Result<Self> {
        let with_one = |free: &[T]| {
            let mut v = Vec::with_capacity(free.len() + 1);
            v.push(T::one());
            v.extend_from_slice(free);
            v
        };
        Self::new(lambda, with_one(neg_free), with_one(pos_free))
    }

    /// Plain asymmetric Laplace: both degrees zero.
    pub fn asymmetric_laplace(lambda: T) -> Result<Self> {
        Self::new(lambda, vec![T::one()], vec![T::one()])
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn phi_neg(&self) -> &[T] {
        &self.phi_neg
    }

    pub fn phi_pos(&self) -> &[T] {
        &self.phi_pos
    }

    /// `(m̃, m)`.
    pub fn degrees(&self) -> (usize, usize) {
        (self.phi_neg.len() - 1, self.phi_pos.len() - 1)
    }

    pub fn continuity_residual(&self) -> T {
        continuity_residual(&self.phi_neg, &self.phi_pos)
    }

    pub fn pdf(&self, y: T) -> T {
        let l = self.lambda;
        let scale = l * (T::one() - l);
        if y > T::zero() {
            scale * self.pos.weight(l * y)
        } else {
            scale * self.neg.weight((l - T::one()) * y)
        }
    }

    pub fn cdf(&self, y: T) -> T {
        let l = self.lambda;
        if y > T::zero() {
            l + (T::one() - l) * (T::one() - self.pos.upper_fraction(l * y))
        } else {
            l * self.neg.upper_fraction((l - T::one()) * y)
        }
    }

    /// `(F(y), f(y))` in one pass.
    pub fn cdf_pdf(&self, y: T) -> (T, T) {
        let l = self.lambda;
        let one = T::one();
        let scale = l * (one - l);
        if y > T::zero() {
            let (w, up) = self.pos.weight_and_upper(l * y);
            (l + (one - l) * (one - up), scale * w)
        } else {
            let (w, up) = self.neg.weight_and_upper((l - one) * y);
            (l * up, scale * w)
        }
    }

    /// `1 - F(y)`, accurate in the upper tail.
    pub fn sf(&self, y: T) -> T {
        let l = self.lambda;
        if y > T::zero() {
            (T::one() - l) * self.pos.upper_fraction(l * y)
        } else {
            T::one() - self.cdf(y)
        }
    }

    /// `ln F(y)`, finite deep into the lower tail.
    pub fn ln_cdf(&self, y: T) -> T {
        let l = self.lambda;
        if y > T::zero() {
            self.cdf(y).ln()
        } else {
            l.ln() + self.neg.ln_upper_fraction((l - T::one()) * y)
        }
    }

    /// `ln(1 - F(y))`, finite deep into the upper tail.
    pub fn ln_sf(&self, y: T) -> T {
        let l = self.lambda;
        if y > T::zero() {
            (T::one() - l).ln() + self.pos.ln_upper_fraction(l * y)
        } else {
            (-self.cdf(y)).ln_1p()
        }
    }

    /// Quantile of level `prob`, found by safeguarded Newton iteration
    /// inside a bracket grown geometrically from the AL quantile.
    pub fn quantile(&self, prob: T) -> Result<T> {
        if !(prob > T::zero() && prob < T::one()) {
            return Err(Error::domain(format!("probability must lie in (0,1), got {prob}")));
        }
        let l = self.lambda;
        if prob == l {
            return Ok(T::zero());
        }
        let one = T::one();
        let al = if prob < l {
            (prob / l).ln() / (one - l)
        } else {
            -((one - prob) / (one - l)).ln() / l
        };
        let (mut lo, mut hi) = if prob < l {
            let mut lo = al.min(-T::lit(1e-3));
            while self.cdf(lo) > prob {
                lo = lo * T::lit(2.0);
            }
            (lo, T::zero())
        } else {
            let mut hi = al.max(T::lit(1e-3));
            while self.cdf(hi) < prob {
                hi = hi * T::lit(2.0);
            }
            (T::zero(), hi)
        };
        let mut x = al.max(lo).min(hi);
        let eps = T::epsilon();
        for _ in 0..300 {
            let resid = self.cdf(x) - prob;
            if resid == T::zero() {
                break;
            }
            if resid < T::zero() {
                lo = x;
            } else {
                hi = x;
            }
            if hi - lo <= T::lit(4.0) * eps * (one + x.abs()) {
                break;
            }
            let dens = self.pdf(x);
            let newton = x - resid / dens;
            x = if dens > T::zero() && newton > lo && newton < hi {
                newton
            } else {
                (lo + hi) * T::lit(0.5)
            };
        }
        Ok(x)
    }

    /// Inverse-transform draw for a uniform `u`.
    pub fn sample(&self, u: T) -> Result<T> {
        self.quantile(u)
    }
}

/// Free-function forms mirroring the method API.
pub fn eal_pdf<T: Real>(p: &EalParams<T>, y: T) -> T {
    p.pdf(y)
}

pub fn eal_cdf<T: Real>(p: &EalParams<T>, y: T) -> T {
    p.cdf(y)
}

pub fn eal_quantile<T: Real>(p: &EalParams<T>, prob: T) -> Result<T> {
    p.quantile(prob)
}

pub fn eal_sample<T: Real>(p: &EalParams<T>, u: T) -> Result<T> {
    p.sample(u)
}
