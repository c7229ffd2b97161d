use dqreg_core::inference::kendall_tau;
use dqreg_core::margins::ConditionalMargin;
use dqreg_core::simulate::{generate_dataset, sample_pair, ScenarioConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn uncensored_fraction(name: &str, n: usize, seed: u64) -> f64 {
    let mut sc = ScenarioConfig::preset(name).unwrap();
    sc.n = n;
    let data = generate_dataset(&sc, seed).unwrap();
    data.n_uncensored() as f64 / n as f64
}

#[test]
fn censoring_rates_match_the_scenario_table() {
    let basis = uncensored_fraction("basis-het", 5000, 1);
    let more = uncensored_fraction("more-cens", 5000, 1);
    let less = uncensored_fraction("less-cens", 5000, 1);
    assert!((basis - 0.54).abs() <= 0.04, "basis {basis}");
    assert!((more - 0.35).abs() <= 0.04, "more-cens {more}");
    assert!(less > basis && basis > more, "{less} {basis} {more}");
}

fn pit_pairs(name: &str, x: &[f64], n: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let sc = ScenarioConfig::preset(name).unwrap();
    let copula = sc.generating_copula().unwrap();
    let t = sc.t_margin.build().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut u, mut v, mut ts) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for _ in 0..n {
        let (tt, cc) = sample_pair(&copula, &t, &sc.c_margin, x, &mut rng).unwrap();
        u.push(t.cdf(tt, x));
        v.push(sc.c_margin.cdf(cc, x));
        ts.push(tt);
    }
    (u, v, ts)
}

#[test]
fn frank_pairs_carry_the_target_tau() {
    let (u, v, _) = pit_pairs("basis-het", &[1.0, 2.0], 10_000);
    let tau = kendall_tau(&u, &v);
    assert!((0.47..=0.53).contains(&tau), "τ = {tau}");
}

#[test]
fn independent_pairs_are_uncorrelated() {
    let (u, v, _) = pit_pairs("all-indep", &[1.0, 2.0], 10_000);
    let n = u.len() as f64;
    let mean = |a: &[f64]| a.iter().sum::<f64>() / n;
    let (mu, mv) = (mean(&u), mean(&v));
    let cov: f64 = u.iter().zip(&v).map(|(a, b)| (a - mu) * (b - mv)).sum::<f64>() / n;
    let sd = |a: &[f64], m: f64| (a.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt();
    let r = cov / (sd(&u, mu) * sd(&v, mv));
    assert!(r.abs() <= 0.03, "correlation {r}");
}

#[test]
fn survival_sample_matches_its_cdf() {
    let (mut u, _, _) = pit_pairs("basis-het", &[1.0, 3.0], 10_000);
    u.sort_by(f64::total_cmp);
    let n = u.len() as f64;
    let d = u
        .iter()
        .enumerate()
        .map(|(i, &f)| (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs()))
        .fold(0.0, f64::max);
    assert!(d < 0.02, "KS distance {d}");
}

#[test]
fn observed_time_is_the_minimum() {
    let sc = ScenarioConfig::preset("basis-het").unwrap();
    let copula = sc.generating_copula().unwrap();
    let t = sc.t_margin.build().unwrap();
    let mut a = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..1000 {
        let (tt, cc) = sample_pair(&copula, &t, &sc.c_margin, &[1.0, 2.0], &mut a).unwrap();
        let (y, delta) = (tt.min(cc), tt <= cc);
        assert_eq!(delta, y == tt);
    }
}

#[test]
fn generation_is_deterministic() {
    let mut sc = ScenarioConfig::preset("basis-het").unwrap();
    sc.n = 300;
    let a = generate_dataset(&sc, 42).unwrap();
    let b = generate_dataset(&sc, 42).unwrap();
    let c = generate_dataset(&sc, 43).unwrap();
    assert_eq!(a.y(), b.y());
    assert_eq!(a.delta(), b.delta());
    assert_ne!(a.y(), c.y());
}
