//! Special functions: standard normal law, Debye function, summation.

use crate::quad;
use crate::scalar::Real;

#[inline]
pub fn norm_pdf<T: Real>(z: T) -> T {
    (-(z * z) * T::lit(0.5)).exp() / T::lit((2.0 * std::f64::consts::PI).sqrt())
}

#[inline]
pub fn norm_cdf<T: Real>(z: T) -> T {
    T::lit(0.5) * (-z * T::FRAC_1_SQRT_2()).erfc()
}

/// Upper tail `1 - Φ(z)` without cancellation.
#[inline]
pub fn norm_sf<T: Real>(z: T) -> T {
    T::lit(0.5) * (z * T::FRAC_1_SQRT_2()).erfc()
}

/// Mills ratio `Φ(-x)/φ(x)` for large positive `x` by continued fraction.
fn mills_ratio<T: Real>(x: T) -> T {
    let mut acc = x;
    for k in (1..=60).rev() {
        acc = x + T::lit(k as f64) / acc;
    }
    T::one() / acc
}

/// `ln Φ(z)`, finite far into the lower tail where `Φ(z)` underflows.
pub fn ln_norm_cdf<T: Real>(z: T) -> T {
    let cut = if T::epsilon() > T::lit(1e-10) { -6.0 } else { -15.0 };
    if z >= T::lit(cut) {
        if z > T::zero() {
            (-norm_sf(z)).ln_1p()
        } else {
            norm_cdf(z).ln()
        }
    } else {
        let x = -z;
        -(x * x) * T::lit(0.5) - T::lit(0.5 * (2.0 * std::f64::consts::PI).ln())
            + mills_ratio(x).ln()
    }
}

/// `ln(1 - Φ(z))`, the mirror of [`ln_norm_cdf`].
#[inline]
pub fn ln_norm_sf<T: Real>(z: T) -> T {
    ln_norm_cdf(-z)
}

/// Standard normal quantile: rational approximation refined by one
/// Newton step on the erfc-based CDF.
pub fn probit<T: Real>(p: T) -> T {
    if p <= T::zero() {
        return T::neg_infinity();
    }
    if p >= T::one() {
        return T::infinity();
    }
    let pf = p.to_f64().unwrap_or(0.5);
    let z0 = acklam(pf);
    let z = T::lit(z0);
    let dens = norm_pdf(z);
    if dens > T::zero() {
        // Work with the smaller tail to keep the residual accurate.
        let step = if p < T::lit(0.5) {
            (norm_cdf(z) - p) / dens
        } else {
            ((T::one() - p) - norm_sf(z)) / dens
        };
        z - step
    } else {
        z
    }
}

fn acklam(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.024_25;
    let tail = |q: f64| {
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    if p < P_LOW {
        tail((-2.0 * p.ln()).sqrt())
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -tail((-2.0 * (1.0 - p).ln()).sqrt())
    }
}

/// `t / (e^t - 1)`, continuous at `t = 0`.
#[inline]
fn debye_integrand<T: Real>(t: T) -> T {
    if t.abs() < T::lit(1e-10) {
        T::one() - t * T::lit(0.5)
    } else {
        t / t.exp_m1()
    }
}

/// First-order Debye function `D_1(x) = x^{-1} ∫_0^x t/(e^t - 1) dt`.
pub fn debye1<T: Real>(x: T) -> T {
    if x.abs() < T::lit(1e-10) {
        return T::one() - x * T::lit(0.25);
    }
    let tol = T::lit(1e-15).max(T::epsilon() * T::lit(4.0));
    quad::integrate(debye_integrand, T::zero(), x, tol * x.abs()) / x
}

/// Pairwise (cascade) summation; deterministic and order-stable.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if values.len() <= BLOCK {
        values.iter().sum()
    } else {
        let mid = values.len() / 2;
        pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_reference_values() {
        assert!((norm_cdf(0.0f64) - 0.5).abs() < 1e-16);
        assert!((norm_cdf(1.959_963_984_540_054f64) - 0.975).abs() < 1e-15);
        assert!((norm_cdf(-1.0f64) - 0.158_655_253_931_457_05).abs() < 1e-15);
    }

    #[test]
    fn probit_inverts_cdf() {
        for &p in &[1e-12, 1e-6, 0.01, 0.024, 0.025, 0.25, 0.5, 0.75, 0.975, 0.999_999] {
            let z: f64 = probit(p);
            let back = if p < 0.5 { norm_cdf(z) } else { 1.0 - norm_sf(z) };
            assert!(((back - p) / p).abs() < 1e-12, "p={p} z={z} back={back}");
        }
        assert!((probit(0.25f64) + 0.674_489_750_196_081_7).abs() < 1e-12);
    }

    #[test]
    fn ln_cdf_matches_direct_and_extends_tail() {
        for &z in &[-14.0f64, -10.0, -3.0, 0.0, 2.0] {
            assert!((ln_norm_cdf(z) - norm_cdf(z).ln()).abs() < 1e-12 * norm_cdf(z).ln().abs().max(1.0));
        }
        // continuity across the switch point
        let a = ln_norm_cdf(-15.0f64 + 1e-9);
        let b = ln_norm_cdf(-15.0f64 - 1e-9);
        assert!((a - b).abs() < 1e-6);
        let far: f64 = ln_norm_cdf(-60.0);
        assert!(far.is_finite() && far < -1800.0);
    }

    #[test]
    fn debye_limits() {
        assert!((debye1(1e-12f64) - 1.0).abs() < 1e-12);
        // D1(x) ≈ π²/(6x) for large x
        let x = 60.0f64;
        assert!((debye1(x) - std::f64::consts::PI.powi(2) / (6.0 * x)).abs() < 1e-12);
        // D1(-x) = D1(x) + x/2
        assert!((debye1(-2.0f64) - debye1(2.0) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn pairwise_matches_naive_on_small_ints() {
        let v: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&v), 499_500.0);
    }
}
