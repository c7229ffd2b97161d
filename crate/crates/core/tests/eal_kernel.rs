use dqreg_core::laguerre_eal::{eal_cdf, eal_pdf, eal_quantile, laguerre_eval, EalParams};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Adaptive Simpson, kept separate from the crate's own quadrature.
fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let diff = left + right - whole;
        if depth == 0 || diff.abs() <= 15.0 * tol {
            return left + right + diff / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    rec(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 50)
}

/// Integral over `[a, b]` split into unit-length panels.
fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    let panels = ((b - a).ceil() as usize).max(1);
    let h = (b - a) / panels as f64;
    (0..panels).map(|i| simpson(&f, a + i as f64 * h, a + (i + 1) as f64 * h, 1e-13)).sum()
}

fn random_params(rng: &mut ChaCha8Rng) -> EalParams<f64> {
    let lambda = rng.random_range(0.1..0.9);
    let dn = rng.random_range(0..=4);
    let dp = rng.random_range(0..=4);
    let neg: Vec<f64> = (0..dn).map(|_| rng.random_range(-1.5..1.5)).collect();
    let pos: Vec<f64> = (0..dp).map(|_| rng.random_range(-1.5..1.5)).collect();
    EalParams::from_free(lambda, &neg, &pos).unwrap()
}

/// Integration window beyond which the remaining mass is negligible.
fn window(p: &EalParams<f64>) -> (f64, f64) {
    let l = p.lambda();
    (-120.0 / (1.0 - l), 120.0 / l)
}

#[test]
fn hundred_random_densities_integrate_to_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let p = random_params(&mut rng);
        let (lo, hi) = window(&p);
        let neg = integrate(|y| eal_pdf(&p, y), lo, 0.0);
        let pos = integrate(|y| eal_pdf(&p, y), 0.0, hi);
        assert!((neg + pos - 1.0).abs() < 1e-8, "mass {} for {:?}", neg + pos, p);
        assert!((neg - p.lambda()).abs() < 1e-8);
    }
}

#[test]
fn cdf_at_origin_is_lambda() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..100 {
        let p = random_params(&mut rng);
        assert!((eal_cdf(&p, 0.0) - p.lambda()).abs() < 1e-14);
    }
}

#[test]
fn closed_form_cdf_matches_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..40 {
        let p = random_params(&mut rng);
        let (lo, _) = window(&p);
        for &y in &[-6.0, -2.5, -0.7, 0.3, 1.9, 4.0, 9.0] {
            let oracle = if y <= 0.0 {
                integrate(|s| eal_pdf(&p, s), lo, y)
            } else {
                p.lambda() + integrate(|s| eal_pdf(&p, s), 0.0, y)
            };
            assert!((eal_cdf(&p, y) - oracle).abs() < 1e-8, "y={y}: {} vs {oracle}", eal_cdf(&p, y));
        }
    }
}

#[test]
fn quantile_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..100 {
        let p = random_params(&mut rng);
        for &u in &[1e-6, 0.01, 0.1, 0.25, 0.5, 0.75, 0.9, 0.99, 1.0 - 1e-6] {
            let q = eal_quantile(&p, u).unwrap();
            assert!((eal_cdf(&p, q) - u).abs() < 1e-8, "u={u}");
        }
    }
}

#[test]
fn laguerre_polynomials_are_orthonormal() {
    for j in 0..=6 {
        for k in 0..=6 {
            let v = integrate(|x| (-x).exp() * laguerre_eval(j, x).unwrap() * laguerre_eval(k, x).unwrap(), 0.0, 150.0);
            let want = if j == k { 1.0 } else { 0.0 };
            assert!((v - want).abs() < 1e-9, "<L{j},L{k}> = {v}");
        }
    }
}

proptest! {
    #[test]
    fn cdf_is_monotone_and_bounded(
        lambda in 0.05f64..0.95,
        neg in proptest::collection::vec(-2.0f64..2.0, 0..4),
        pos in proptest::collection::vec(-2.0f64..2.0, 0..4),
        a in -20.0f64..20.0,
        d in 0.0f64..5.0,
    ) {
        let p = EalParams::from_free(lambda, &neg, &pos).unwrap();
        let (fa, fb) = (eal_cdf(&p, a), eal_cdf(&p, a + d));
        prop_assert!((0.0..=1.0).contains(&fa) && (0.0..=1.0).contains(&fb));
        prop_assert!(fb >= fa - 1e-14);
        prop_assert!(eal_pdf(&p, a) >= 0.0);
    }

    #[test]
    fn quantile_inverts_cdf(lambda in 0.05f64..0.95, pos in proptest::collection::vec(-2.0f64..2.0, 0..3), u in 0.001f64..0.999) {
        let p = EalParams::from_free(lambda, &[], &pos).unwrap();
        let q = eal_quantile(&p, u).unwrap();
        prop_assert!((eal_cdf(&p, q) - u).abs() < 1e-9);
    }

    #[test]
    fn f32_tracks_f64(lambda in 0.1f64..0.9, c in -1.0f64..1.0, y in -5.0f64..5.0) {
        let p64 = EalParams::from_free(lambda, &[c], &[c]).unwrap();
        let p32 = EalParams::from_free(lambda as f32, &[c as f32], &[c as f32]).unwrap();
        prop_assert!((eal_cdf(&p32, y as f32) as f64 - eal_cdf(&p64, y)).abs() < 1e-4);
    }
}
