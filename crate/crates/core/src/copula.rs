//! Bivariate copula families used to couple the survival and censoring
//! margins: independence, Frank (optionally restricted to positive
//! dependence), Clayton and Gumbel.
//!
//! Argument order follows the conditional notation: `h_c_given_t(v, u)` is
//! `∂C(u,v)/∂u`, the conditional CDF of the censoring PIT `v` given the
//! survival PIT `u`; `h_t_given_c(u, v)` is `∂C(u,v)/∂v`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{clamp_prob, Real};
use crate::special::debye1;

/// Smallest admissible `|θ|` for the Frank family.
pub const FRANK_MIN_ABS_THETA: f64 = 1e-6;
/// Box used for the Frank parameter while fitting.
pub const FRANK_MAX_ABS_THETA: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CopulaFamily {
    Independence,
    Frank,
    /// Frank restricted to `θ > 0`, i.e. Kendall's tau in `(0, 1)`.
    FrankPos,
    Clayton,
    Gumbel,
}

impl CopulaFamily {
    pub const ALL: [CopulaFamily; 5] = [
        CopulaFamily::Independence,
        CopulaFamily::Frank,
        CopulaFamily::FrankPos,
        CopulaFamily::Clayton,
        CopulaFamily::Gumbel,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CopulaFamily::Independence => "independence",
            CopulaFamily::Frank => "frank",
            CopulaFamily::FrankPos => "frankpos",
            CopulaFamily::Clayton => "clayton",
            CopulaFamily::Gumbel => "gumbel",
        }
    }

    /// Whether the family carries a free parameter.
    pub fn has_parameter(self) -> bool {
        self != CopulaFamily::Independence
    }

    /// Whether Kendall's tau `tau` is attainable (open range, tau = 0
    /// only for independence and Gumbel at θ = 1).
    pub fn tau_attainable(self, tau: f64) -> bool {
        match self {
            CopulaFamily::Independence => tau == 0.0,
            CopulaFamily::Frank => tau > -1.0 && tau < 1.0 && tau != 0.0,
            CopulaFamily::FrankPos | CopulaFamily::Clayton => tau > 0.0 && tau < 1.0,
            CopulaFamily::Gumbel => (0.0..1.0).contains(&tau),
        }
    }
}

impl fmt::Display for CopulaFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CopulaFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "independence" | "indep" => Ok(CopulaFamily::Independence),
            "frank" => Ok(CopulaFamily::Frank),
            "frankpos" => Ok(CopulaFamily::FrankPos),
            "clayton" => Ok(CopulaFamily::Clayton),
            "gumbel" => Ok(CopulaFamily::Gumbel),
            other => Err(Error::config(format!("unknown copula family '{other}'"))),
        }
    }
}

/// A copula family together with a parameter inside its domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CopulaSpec<T> {
    pub family: CopulaFamily,
    pub theta: T,
}

impl<T: Real> CopulaSpec<T> {
    pub fn new(family: CopulaFamily, theta: T) -> Result<Self> {
        let ok = theta.is_finite()
            && match family {
                CopulaFamily::Independence => true,
                CopulaFamily::Frank => theta.abs() >= T::lit(FRANK_MIN_ABS_THETA),
                CopulaFamily::FrankPos => theta >= T::lit(FRANK_MIN_ABS_THETA),
                CopulaFamily::Clayton => theta > T::zero(),
                CopulaFamily::Gumbel => theta >= T::one(),
            };
        if !ok {
            return Err(Error::domain(format!("θ = {theta} is outside the {family} domain")));
        }
        let theta = if family == CopulaFamily::Independence { T::zero() } else { theta };
        Ok(Self { family, theta })
    }

    pub fn independence() -> Self {
        Self { family: CopulaFamily::Independence, theta: T::zero() }
    }

    /// Build from Kendall's tau.
    pub fn from_tau(family: CopulaFamily, tau: T) -> Result<Self> {
        Self::new(family, tau_to_theta(family, tau)?)
    }

    pub fn tau(&self) -> T {
        theta_to_tau(self.family, self.theta).unwrap_or(T::zero())
    }

    fn is_frank(&self) -> bool {
        matches!(self.family, CopulaFamily::Frank | CopulaFamily::FrankPos)
    }

    /// Frank parameters this close to zero are evaluated as independence.
    fn acts_independent(&self) -> bool {
        self.family == CopulaFamily::Independence
            || (self.is_frank() && self.theta.abs() < T::lit(FRANK_MIN_ABS_THETA))
            || (self.family == CopulaFamily::Gumbel && self.theta == T::one())
    }

    /// `C_θ(u, v)`; arguments are clipped to `[0, 1]`.
    pub fn cdf(&self, u: T, v: T) -> T {
        let (zero, one) = (T::zero(), T::one());
        let u = u.max(zero).min(one);
        let v = v.max(zero).min(one);
        if u == zero || v == zero {
            return zero;
        }
        if u == one {
            return v;
        }
        if v == one {
            return u;
        }
        if self.acts_independent() {
            return u * v;
        }
        let th = self.theta;
        match self.family {
            CopulaFamily::Frank | CopulaFamily::FrankPos => {
                let a = em1(-th * u);
                let b = em1(-th * v);
                let c = em1(-th);
                -(a * b / c).ln_1p() / th
            }
            CopulaFamily::Clayton => (u.powf(-th) + v.powf(-th) - one).powf(-one / th),
            CopulaFamily::Gumbel => {
                let a = (-u.ln()).powf(th) + (-v.ln()).powf(th);
                (-a.powf(one / th)).exp()
            }
            CopulaFamily::Independence => u * v,
        }
    }

    /// `h_{C|T}(v | u) = ∂C(u,v)/∂u`, arguments clamped to `[ε, 1-ε]`.
    pub fn h_c_given_t(&self, v: T, u: T) -> T {
        self.partial(clamp_prob(v), clamp_prob(u))
    }

    /// `h_{T|C}(u | v) = ∂C(u,v)/∂v`, arguments clamped to `[ε, 1-ε]`.
    pub fn h_t_given_c(&self, u: T, v: T) -> T {
        // every family here is exchangeable: ∂C(u,v)/∂v = ∂C(v,u)/∂(first)
        self.partial(clamp_prob(u), clamp_prob(v))
    }

    /// `h_{C|T}` evaluated from `ln v`, `ln u` without clamping; stays
    /// accurate when the probabilities themselves underflow.
    pub fn h_c_given_t_ln(&self, ln_v: T, ln_u: T) -> T {
        self.partial_ln(ln_v, ln_u)
    }

    /// `h_{T|C}` evaluated from `ln u`, `ln v` without clamping.
    pub fn h_t_given_c_ln(&self, ln_u: T, ln_v: T) -> T {
        self.partial_ln(ln_u, ln_v)
    }

    /// Derivative of `C(s, r)` in its first argument `s`, reported as a
    /// conditional CDF of `r` given `s`.
    fn partial(&self, r: T, s: T) -> T {
        if self.acts_independent() {
            return r;
        }
        match self.family {
            CopulaFamily::Frank | CopulaFamily::FrankPos => frank_partial(self.theta, r, s),
            _ => self.partial_ln(r.ln(), s.ln()),
        }
    }

    fn partial_ln(&self, ln_r: T, ln_s: T) -> T {
        let one = T::one();
        if self.acts_independent() {
            return ln_r.exp();
        }
        let th = self.theta;
        let h = match self.family {
            CopulaFamily::Frank | CopulaFamily::FrankPos => frank_partial(th, ln_r.exp(), ln_s.exp()),
            CopulaFamily::Clayton => {
                // (1 + s^θ (r^{-θ} - 1))^{-(1+θ)/θ}
                let s_pow = (th * ln_s).exp();
                let t = th * (ln_s - ln_r);
                let ln_base = if t > T::zero() {
                    t + ((one - s_pow) * (-t).exp()).ln_1p()
                } else {
                    (t.exp() - s_pow).ln_1p()
                };
                (-(one + th) / th * ln_base).exp()
            }
            CopulaFamily::Gumbel => {
                let ls = -ln_s;
                let lr = -ln_r;
                if ls <= T::zero() {
                    // s = 1: C(1, r) = r, derivative limit depends on r only
                    return if lr <= T::zero() { one } else { T::zero() };
                }
                let a = ls.powf(th) + lr.powf(th);
                let ln_h = -a.powf(one / th) + (one / th - one) * a.ln()
                    + (th - one) * ls.ln()
                    + ls;
                ln_h.exp()
            }
            CopulaFamily::Independence => ln_r.exp(),
        };
        if h.is_nan() {
            h
        } else {
            h.max(T::zero()).min(one)
        }
    }

    /// `v` solving `h_c_given_t(v, u) = w`: closed form for independence
    /// and Frank, bisection otherwise.
    pub fn inverse_h(&self, w: T, u: T) -> T {
        let (zero, one) = (T::zero(), T::one());
        let w = w.max(zero).min(one);
        if self.acts_independent() {
            return w;
        }
        if self.is_frank() {
            if w <= zero || w >= one {
                return w;
            }
            // v = -ln[(e^{-θu}(1-w) + w e^{-θ}) / (w + e^{-θu}(1-w))] / θ
            let th = self.theta;
            let u = clamp_prob(u);
            let a = -th * u + (one - w).ln();
            let num = log_add_exp(a, -th + w.ln());
            let den = log_add_exp(w.ln(), a);
            let v = -(num - den) / th;
            return v.max(zero).min(one);
        }
        let (mut lo, mut hi) = (zero, one);
        for _ in 0..200 {
            let mid = (lo + hi) * T::lit(0.5);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.h_c_given_t(mid, u) < w {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (lo + hi) * T::lit(0.5)
    }
}

/// Free-function forms.
pub fn copula_cdf<T: Real>(c: &CopulaSpec<T>, u: T, v: T) -> T {
    c.cdf(u, v)
}

pub fn h_c_given_t<T: Real>(c: &CopulaSpec<T>, v: T, u: T) -> T {
    c.h_c_given_t(v, u)
}

pub fn h_t_given_c<T: Real>(c: &CopulaSpec<T>, u: T, v: T) -> T {
    c.h_t_given_c(u, v)
}

pub fn inverse_h<T: Real>(c: &CopulaSpec<T>, w: T, u: T) -> T {
    c.inverse_h(w, u)
}

fn frank_tau<T: Real>(theta: T) -> T {
    if theta.abs() < T::lit(1e-3) {
        // series: τ = θ/9 − θ³/900 + O(θ⁵)
        let t2 = theta * theta;
        return theta / T::lit(9.0) - theta * t2 / T::lit(900.0);
    }
    T::one() - T::lit(4.0) / theta * (T::one() - debye1(theta))
}

/// `e^x − 1`; `exp_m1` only where cancellation would cost accuracy.
#[inline]
fn log_add_exp<T: Real>(a: T, b: T) -> T {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Frank `∂C(s, r)/∂s` as `1 / (1 + e^{θ(s-r)} (e^{-θ(1-r)}-1)/(e^{-θr}-1))`,
/// free of the cancellation in the textbook quotient when `|θ|` is large.
fn frank_partial<T: Real>(th: T, r: T, s: T) -> T {
    let (zero, one) = (T::zero(), T::one());
    if r <= zero {
        return zero;
    }
    if r >= one {
        return one;
    }
    let z = th * (s - r) + (em1(-th * (one - r)) / em1(-th * r)).ln();
    if z > T::lit(700.0) {
        return zero;
    }
    (one / (one + z.exp())).max(zero).min(one)
}

fn em1<T: Real>(x: T) -> T {
    if x.abs() < T::lit(0.5) {
        x.exp_m1()
    } else {
        x.exp() - T::one()
    }
}

/// Kendall's tau implied by `θ`.
pub fn theta_to_tau<T: Real>(family: CopulaFamily, theta: T) -> Result<T> {
    let one = T::one();
    match family {
        CopulaFamily::Independence => Ok(T::zero()),
        CopulaFamily::Clayton if theta > T::zero() => Ok(theta / (theta + T::lit(2.0))),
        CopulaFamily::Gumbel if theta >= one => Ok(one - one / theta),
        CopulaFamily::Frank if theta.is_finite() => Ok(frank_tau(theta)),
        CopulaFamily::FrankPos if theta > T::zero() && theta.is_finite() => Ok(frank_tau(theta)),
        _ => Err(Error::domain(format!("θ = {theta} is outside the {family} domain"))),
    }
}

/// Copula parameter for a target Kendall's tau.
pub fn tau_to_theta<T: Real>(family: CopulaFamily, tau: T) -> Result<T> {
    let tau_f = tau.to_f64().unwrap_or(f64::NAN);
    if !family.tau_attainable(tau_f) {
        return Err(Error::domain(format!("Kendall's tau {tau} is not attainable for {family}")));
    }
    let one = T::one();
    match family {
        CopulaFamily::Independence => Ok(T::zero()),
        CopulaFamily::Clayton => Ok(T::lit(2.0) * tau / (one - tau)),
        CopulaFamily::Gumbel => Ok(one / (one - tau)),
        CopulaFamily::Frank | CopulaFamily::FrankPos => {
            let target = tau.abs();
            let mut hi = T::lit(10.0);
            while frank_tau(hi) < target {
                hi = hi * T::lit(4.0);
                if hi > T::lit(1e12) {
                    return Err(Error::domain(format!("Kendall's tau {tau} too close to 1")));
                }
            }
            let mut lo = T::zero();
            for _ in 0..200 {
                let mid = (lo + hi) * T::lit(0.5);
                if mid <= lo || mid >= hi {
                    break;
                }
                if frank_tau(mid) < target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let theta = (lo + hi) * T::lit(0.5);
            Ok(if tau < T::zero() { -theta } else { theta })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(f: CopulaFamily, th: f64) -> CopulaSpec<f64> {
        CopulaSpec::new(f, th).unwrap()
    }

    fn fd_u(c: &CopulaSpec<f64>, u: f64, v: f64) -> f64 {
        let h = 1e-6;
        (c.cdf(u + h, v) - c.cdf(u - h, v)) / (2.0 * h)
    }

    #[test]
    fn domains() {
        assert!(CopulaSpec::new(CopulaFamily::Clayton, 0.0f64).is_err());
        assert!(CopulaSpec::new(CopulaFamily::Gumbel, 0.99f64).is_err());
        assert!(CopulaSpec::new(CopulaFamily::Frank, 0.0f64).is_err());
        assert!(CopulaSpec::new(CopulaFamily::FrankPos, -1.0f64).is_err());
        assert!(CopulaSpec::new(CopulaFamily::Frank, -3.0f64).is_ok());
        assert!(CopulaSpec::new(CopulaFamily::Gumbel, f64::NAN).is_err());
    }

    #[test]
    fn names_round_trip() {
        for f in CopulaFamily::ALL {
            assert_eq!(f.name().parse::<CopulaFamily>().unwrap(), f);
        }
        assert!("gaussian".parse::<CopulaFamily>().is_err());
    }

    #[test]
    fn cdf_examples_and_boundaries() {
        let ind = CopulaSpec::<f64>::independence();
        assert!((ind.cdf(0.3, 0.7) - 0.21).abs() < 1e-16);
        for c in [
            ind,
            spec(CopulaFamily::Frank, -4.0),
            spec(CopulaFamily::Clayton, 2.0),
            spec(CopulaFamily::Gumbel, 3.0),
        ] {
            for &u in &[0.0, 0.2, 0.9, 1.0] {
                assert_eq!(c.cdf(u, 1.0), u);
                assert_eq!(c.cdf(0.0, u), 0.0);
            }
        }
    }

    #[test]
    fn h_examples() {
        let ind = CopulaSpec::<f64>::independence();
        assert!((ind.h_c_given_t(0.42, 0.9) - 0.42).abs() < 1e-15);
        assert!((ind.h_t_given_c(0.42, 0.9) - 0.42).abs() < 1e-15);
        for th in [1e-6, -1e-6] {
            let c = spec(CopulaFamily::Frank, th);
            assert!((c.h_c_given_t(0.4, 0.8) - 0.4).abs() < 1e-4);
        }
        let cl = spec(CopulaFamily::Clayton, 2.0);
        assert!((cl.h_c_given_t(0.6, 0.3) - fd_u(&cl, 0.3, 0.6)).abs() < 1e-6);
        let gu = spec(CopulaFamily::Gumbel, 2.0);
        // ∂C/∂v at (u, v) = (0.7, 0.2)
        let h = 1e-6;
        let fd = (gu.cdf(0.7, 0.2 + h) - gu.cdf(0.7, 0.2 - h)) / (2.0 * h);
        assert!((gu.h_t_given_c(0.7, 0.2) - fd).abs() < 1e-6);
    }

    #[test]
    fn log_argument_forms_agree_with_clamped_forms() {
        for c in [
            spec(CopulaFamily::Frank, 5.74),
            spec(CopulaFamily::Frank, -7.0),
            spec(CopulaFamily::Clayton, 2.0),
            spec(CopulaFamily::Gumbel, 1.7),
        ] {
            for &(u, v) in &[(0.3, 0.6), (0.01, 0.9), (0.95, 0.05)] {
                let a = c.h_c_given_t(v, u);
                let b = c.h_c_given_t_ln(f64::ln(v), f64::ln(u));
                assert!((a - b).abs() < 1e-12, "{:?} {a} {b}", c.family);
            }
        }
    }

    #[test]
    fn inverse_h_examples() {
        let ind = CopulaSpec::<f64>::independence();
        assert_eq!(ind.inverse_h(0.35, 0.77), 0.35);
        let fr = spec(CopulaFamily::Frank, 5.74);
        // bisection oracle on the forward map
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if fr.h_c_given_t(mid, 0.5) < 0.5 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((fr.inverse_h(0.5, 0.5) - 0.5 * (lo + hi)).abs() < 1e-8);
    }

    #[test]
    fn tau_examples() {
        assert_eq!(tau_to_theta(CopulaFamily::Clayton, 0.5f64).unwrap(), 2.0);
        assert_eq!(theta_to_tau(CopulaFamily::Gumbel, 1.0f64).unwrap(), 0.0);
        let th = tau_to_theta(CopulaFamily::Frank, 0.5f64).unwrap();
        assert!((theta_to_tau(CopulaFamily::Frank, th).unwrap() - 0.5).abs() < 1e-8);
        assert!((th - 5.736).abs() < 1e-3, "Frank θ for τ=0.5 is {th}");
        let neg = tau_to_theta(CopulaFamily::Frank, -0.3f64).unwrap();
        assert!(neg < 0.0);
        assert!((theta_to_tau(CopulaFamily::Frank, neg).unwrap() + 0.3).abs() < 1e-10);
        assert!(tau_to_theta(CopulaFamily::FrankPos, -0.3f64).is_err());
        assert!(tau_to_theta(CopulaFamily::Clayton, 1.0f64).is_err());
        assert!(tau_to_theta(CopulaFamily::Independence, 0.2f64).is_err());
    }

    #[test]
    fn frank_tau_is_continuous_across_series_switch() {
        let t = 1.0e-3f64;
        let series = t / 9.0 - t * t * t / 900.0;
        let closed = 1.0 - 4.0 / t * (1.0 - debye1(t));
        assert!((series - closed).abs() < 1e-12);
        assert!((frank_tau(0.999e-3f64) - frank_tau(1.001e-3f64)).abs() < 3e-7);
    }

    #[test]
    fn frank_near_zero_approaches_independence() {
        let c = spec(CopulaFamily::Frank, 1e-4);
        let mut worst = 0.0f64;
        for i in 1..50 {
            for j in 1..50 {
                let (u, v) = (i as f64 / 50.0, j as f64 / 50.0);
                worst = worst.max((c.cdf(u, v) - u * v).abs());
            }
        }
        assert!(worst <= 1e-4);
    }

    #[test]
    fn single_precision_kernel() {
        let c = CopulaSpec::new(CopulaFamily::Clayton, 2.0f32).unwrap();
        let v = c.inverse_h(0.3, 0.6);
        assert!((c.h_c_given_t(v, 0.6) - 0.3).abs() < 1e-5);
    }
}
