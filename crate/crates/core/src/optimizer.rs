//! Derivative-free minimisers.
//!
//! [`nelder_mead`] is a plain simplex search. [`constrained_refine`] adds an
//! equality constraint through a quadratic penalty schedule followed by a
//! Newton projection onto the constraint surface, and [`nmcob`] chains the
//! two. All routines minimise; callers maximising a log-likelihood pass its
//! negation. Objective values at or above [`PENALTY_LEVEL`] mark infeasible
//! points.

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

/// Objective values at or above this level are treated as infeasible.
pub const PENALTY_LEVEL: f64 = 1e10;

/// Residual magnitude accepted as satisfying an equality constraint.
pub const FEASIBILITY_TOL: f64 = 1e-6;

const PENALTY_SCHEDULE: [f64; 3] = [1e2, 1e4, 1e6];
const PROJECTION_STEPS: usize = 50;

/// Iteration budget and stopping tolerances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptBudget {
    pub max_iters: usize,
    pub xtol: f64,
    pub ftol: f64,
}

impl OptBudget {
    pub const BASIS: Self = Self::iters(500);
    pub const NM_PHASE: Self = Self::iters(400);
    pub const CONSTRAINED_PHASE: Self = Self::iters(100);

    pub const fn iters(max_iters: usize) -> Self {
        Self { max_iters, xtol: 1e-6, ftol: 1e-8 }
    }
}

impl Default for OptBudget {
    fn default() -> Self {
        Self::BASIS
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptResult<T> {
    pub x: Vec<T>,
    pub f: T,
    pub iters: usize,
    pub evals: usize,
    /// Stopped on a tolerance rather than the iteration budget.
    pub converged: bool,
    /// Every vertex of the initial simplex was infeasible.
    pub degenerate: bool,
    /// Constraint residual at `x`, when a constraint was imposed.
    pub residual: Option<T>,
}

#[inline]
fn sanitize<T: Real>(v: T) -> T {
    if v.is_nan() {
        T::infinity()
    } else {
        v
    }
}

#[inline]
fn is_penalty<T: Real>(v: T) -> bool {
    v >= T::lit(PENALTY_LEVEL)
}

/// Nelder-Mead simplex minimisation with coefficients (1, 2, 0.5, 0.5).
pub fn nelder_mead<T, F>(f: F, x0: &[T], budget: &OptBudget) -> OptResult<T>
where
    T: Real,
    F: Fn(&[T]) -> T,
{
    let n = x0.len();
    let mut evals = 0usize;
    let mut eval = |x: &[T]| {
        evals += 1;
        sanitize(f(x))
    };

    let f0 = eval(x0);
    if n == 0 || budget.max_iters == 0 {
        return OptResult {
            x: x0.to_vec(),
            f: f0,
            iters: 0,
            evals,
            converged: n == 0,
            degenerate: is_penalty(f0),
            residual: None,
        };
    }

    let mut simplex: Vec<Vec<T>> = Vec::with_capacity(n + 1);
    let mut values: Vec<T> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    values.push(f0);
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] = v[i] + T::lit(0.05).max(T::lit(0.1) * x0[i].abs());
        values.push(eval(&v));
        simplex.push(v);
    }
    if values.iter().all(|&v| is_penalty(v)) {
        return OptResult {
            x: x0.to_vec(),
            f: f0,
            iters: 0,
            evals,
            converged: false,
            degenerate: true,
            residual: None,
        };
    }

    let half = T::lit(0.5);
    let two = T::lit(2.0);
    let ftol = T::lit(budget.ftol);
    let xtol = T::lit(budget.xtol);
    let mut order: Vec<usize> = (0..=n).collect();
    let mut centroid = vec![T::zero(); n];
    let mut trial = vec![T::zero(); n];
    let mut trial2 = vec![T::zero(); n];
    let mut iters = 0;
    let mut converged = false;

    while iters < budget.max_iters {
        // stable sort keeps the earlier vertex first on ties
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(std::cmp::Ordering::Equal));
        let (best, worst, second) = (order[0], order[n], order[n - 1]);

        let spread = values[worst] - values[best];
        let diameter = simplex
            .iter()
            .flat_map(|v| v.iter().zip(&simplex[best]).map(|(a, b)| (*a - *b).abs()))
            .fold(T::zero(), T::max);
        if spread.is_finite() && spread < ftol && diameter < xtol {
            converged = true;
            break;
        }
        iters += 1;

        centroid.iter_mut().for_each(|c| *c = T::zero());
        for &i in &order[..n] {
            for (c, &v) in centroid.iter_mut().zip(&simplex[i]) {
                *c = *c + v;
            }
        }
        let inv = T::one() / T::from_usize(n).unwrap();
        centroid.iter_mut().for_each(|c| *c = *c * inv);

        let xw = &simplex[worst];
        for j in 0..n {
            trial[j] = centroid[j] + (centroid[j] - xw[j]);
        }
        let fr = eval(&trial);

        if fr < values[best] {
            for j in 0..n {
                trial2[j] = centroid[j] + two * (centroid[j] - xw[j]);
            }
            let fe = eval(&trial2);
            if fe < fr {
                simplex[worst].copy_from_slice(&trial2);
                values[worst] = fe;
            } else {
                simplex[worst].copy_from_slice(&trial);
                values[worst] = fr;
            }
            continue;
        }
        if fr < values[second] {
            simplex[worst].copy_from_slice(&trial);
            values[worst] = fr;
            continue;
        }

        let (fc, accept) = if fr < values[worst] {
            for j in 0..n {
                trial2[j] = centroid[j] + half * (trial[j] - centroid[j]);
            }
            let fc = eval(&trial2);
            (fc, fc <= fr)
        } else {
            for j in 0..n {
                trial2[j] = centroid[j] + half * (xw[j] - centroid[j]);
            }
            let fc = eval(&trial2);
            (fc, fc < values[worst])
        };
        if accept {
            simplex[worst].copy_from_slice(&trial2);
            values[worst] = fc;
            continue;
        }

        let anchor = simplex[best].clone();
        for &i in &order[1..] {
            for (v, &a) in simplex[i].iter_mut().zip(&anchor) {
                *v = a + half * (*v - a);
            }
            values[i] = eval(&simplex[i]);
        }
    }

    let best = (0..=n).fold(0, |b, i| if values[i] < values[b] { i } else { b });
    OptResult {
        x: simplex.swap_remove(best),
        f: values[best],
        iters,
        evals,
        converged,
        degenerate: false,
        residual: None,
    }
}

fn residual_gradient<T, R>(r: &R, x: &[T], buf: &mut [T]) -> Vec<T>
where
    T: Real,
    R: Fn(&[T]) -> T,
{
    buf.copy_from_slice(x);
    let eps = T::epsilon().cbrt();
    (0..x.len())
        .map(|j| {
            let h = eps * x[j].abs().max(T::one());
            buf[j] = x[j] + h;
            let up = r(buf);
            buf[j] = x[j] - h;
            let down = r(buf);
            buf[j] = x[j];
            (up - down) / (h + h)
        })
        .collect()
}

/// Newton steps along the residual gradient until `|r| ≤ tol`.
fn project<T, R>(r: &R, x: &mut [T], tol: T) -> T
where
    T: Real,
    R: Fn(&[T]) -> T,
{
    let mut buf = x.to_vec();
    let mut res = r(x);
    for _ in 0..PROJECTION_STEPS {
        if !res.is_finite() || res.abs() <= tol {
            break;
        }
        let g = residual_gradient(r, x, &mut buf);
        let gg = g.iter().fold(T::zero(), |a, &v| a + v * v);
        if !(gg > T::zero()) {
            break;
        }
        let step = res / gg;
        let mut scale = T::one();
        let mut improved = false;
        for _ in 0..30 {
            for j in 0..x.len() {
                buf[j] = x[j] - scale * step * g[j];
            }
            let cand = r(&buf);
            if cand.is_finite() && cand.abs() < res.abs() {
                x.copy_from_slice(&buf);
                res = cand;
                improved = true;
                break;
            }
            scale = scale * T::lit(0.5);
        }
        if !improved {
            break;
        }
    }
    res
}

/// Minimise `f` subject to `r(x) = 0`.
///
/// The budget is split across the penalty weights 1e2, 1e4 and 1e6, each
/// stage a Nelder-Mead run warm-started from the last. A stage minimises
/// `f(P(z)) + μ·(r(z)² + r(P(z))²)`, where `P` projects onto `r = 0` by
/// Newton steps, so every accepted point is feasible whenever the
/// projection succeeds. A feasible `x0` that beats the refined point is
/// returned unchanged.
pub fn constrained_refine<T, F, R>(f: F, r: R, x0: &[T], budget: &OptBudget) -> OptResult<T>
where
    T: Real,
    F: Fn(&[T]) -> T,
    R: Fn(&[T]) -> T,
{
    let tol = T::lit(FEASIBILITY_TOL);
    let r0 = r(x0);
    let f0 = sanitize(f(x0));
    let mut evals = 1;
    let mut iters = 0;
    let mut converged = false;
    let mut degenerate = false;
    let proj_tol = T::lit(FEASIBILITY_TOL * 1e-4);
    let mut x = x0.to_vec();

    let per_stage = budget.max_iters / PENALTY_SCHEDULE.len();
    for (k, &mu) in PENALTY_SCHEDULE.iter().enumerate() {
        let stage_iters = if k + 1 == PENALTY_SCHEDULE.len() {
            budget.max_iters - per_stage * k
        } else {
            per_stage
        };
        let mu = T::lit(mu);
        let stage = nelder_mead(
            |z: &[T]| {
                let raw = r(z);
                let mut p = z.to_vec();
                let res = project(&r, &mut p, proj_tol);
                f(&p) + mu * (raw * raw + res * res)
            },
            &x,
            &OptBudget { max_iters: stage_iters, ..*budget },
        );
        evals += stage.evals;
        iters += stage.iters;
        converged = stage.converged;
        degenerate |= stage.degenerate;
        x = stage.x;
    }

    let res = project(&r, &mut x, proj_tol);
    let fx = sanitize(f(&x));
    evals += 1;

    if r0.abs() < tol && f0 <= fx {
        return OptResult {
            x: x0.to_vec(),
            f: f0,
            iters,
            evals,
            converged,
            degenerate,
            residual: Some(r0),
        };
    }
    OptResult { x, f: fx, iters, evals, converged, degenerate, residual: Some(res) }
}

/// Unconstrained Nelder-Mead phase followed by a constrained phase.
pub fn nmcob<T, F, R>(f: F, r: R, x0: &[T], nm_budget: &OptBudget, constrained_budget: &OptBudget) -> OptResult<T>
where
    T: Real,
    F: Fn(&[T]) -> T,
    R: Fn(&[T]) -> T,
{
    let first = nelder_mead(&f, x0, nm_budget);
    let mut second = constrained_refine(&f, &r, &first.x, constrained_budget);
    second.iters += first.iters;
    second.evals += first.evals;
    second.degenerate |= first.degenerate;

    let r0 = r(x0);
    if r0.abs() < T::lit(FEASIBILITY_TOL) {
        let f0 = sanitize(f(x0));
        if f0 < second.f {
            return OptResult { x: x0.to_vec(), f: f0, residual: Some(r0), ..second };
        }
    }
    second
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bowl(x: &[f64]) -> f64 {
        x.iter().map(|v| (v - 1.0).powi(2)).sum()
    }

    fn rosenbrock(x: &[f64]) -> f64 {
        100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2)
    }

    #[test]
    fn quadratic_bowl() {
        let res = nelder_mead(bowl, &[0.0; 2], &OptBudget::iters(2000));
        for v in &res.x {
            assert!((v - 1.0).abs() < 1e-5, "{v}");
        }
        assert!(res.converged);
    }

    #[test]
    fn rosenbrock_benchmark() {
        let res = nelder_mead(rosenbrock, &[-1.2, 1.0], &OptBudget::iters(500));
        assert!(res.f < 1e-4, "f* = {}", res.f);
    }

    #[test]
    fn start_at_minimum() {
        let res = nelder_mead(bowl, &[1.0, 1.0], &OptBudget::iters(500));
        assert!(res.x.iter().all(|v| (v - 1.0).abs() < 1e-4));
        assert!(res.f <= 0.0);
    }

    #[test]
    fn penalty_start_is_degenerate() {
        let res = nelder_mead(|_: &[f64]| PENALTY_LEVEL, &[0.3, 0.4], &OptBudget::iters(50));
        assert!(res.degenerate);
        assert_eq!(res.x, vec![0.3, 0.4]);
    }

    #[test]
    fn nan_is_treated_as_infinite() {
        let f = |x: &[f64]| if x[0] < 0.0 { f64::NAN } else { (x[0] - 0.5).powi(2) };
        let res = nelder_mead(f, &[0.01], &OptBudget::iters(200));
        assert!((res.x[0] - 0.5).abs() < 1e-4);
    }

    #[test]
    fn constrained_toy() {
        let f = |x: &[f64]| (x[0] - 2.0).powi(2);
        let r = |x: &[f64]| x[0] - 1.0;
        let res = constrained_refine(f, r, &[0.0], &OptBudget::iters(100));
        assert!((res.x[0] - 1.0).abs() < 1e-4);
        assert!(res.residual.unwrap().abs() < 1e-6);
        let hybrid = nmcob(f, r, &[0.0], &OptBudget::NM_PHASE, &OptBudget::CONSTRAINED_PHASE);
        assert!((hybrid.x[0] - res.x[0]).abs() < 1e-3);
    }

    #[test]
    fn constraint_on_subset_leaves_others_free() {
        let f = |x: &[f64]| (x[0] - 3.0).powi(2) + (x[1] - 2.0).powi(2) + (x[2] + 1.0).powi(2);
        let r = |x: &[f64]| x[1] * x[1] - x[2] * x[2];
        let res = nmcob(f, r, &[0.0, 0.5, 0.5], &OptBudget::NM_PHASE, &OptBudget::CONSTRAINED_PHASE);
        assert!(res.residual.unwrap().abs() < 1e-6);
        assert!(res.f < 0.501, "{res:?}");
    }

    #[test]
    fn vacuous_constraint_matches_plain_search() {
        let plain = nelder_mead(rosenbrock, &[-1.2, 1.0], &OptBudget::iters(500));
        let hybrid = nmcob(rosenbrock, |_: &[f64]| 0.0, &[-1.2, 1.0], &OptBudget::NM_PHASE, &OptBudget::CONSTRAINED_PHASE);
        assert!((plain.f - hybrid.f).abs() < 1e-4);
        assert_eq!(hybrid.residual, Some(0.0));
    }

    #[test]
    fn deterministic() {
        let a = nelder_mead(rosenbrock, &[-1.2, 1.0], &OptBudget::iters(300));
        let b = nelder_mead(rosenbrock, &[-1.2, 1.0], &OptBudget::iters(300));
        assert_eq!(a, b);
    }

    #[test]
    fn single_precision() {
        let res = nelder_mead(|x: &[f32]| (x[0] - 1.0) * (x[0] - 1.0), &[0.0f32], &OptBudget::iters(200));
        assert!((res.x[0] - 1.0).abs() < 1e-3);
    }
}
