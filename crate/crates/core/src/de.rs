//! Density evolution on the binary erasure channel.
//!
//! The erasure fraction on variable-to-check messages evolves as
//! `x ← ε λ(1 - ρ(1 - x))` from `x₀ = ε`; decoding succeeds iff the
//! iteration goes to zero.

use serde::{Deserialize, Serialize};

use crate::poly::Poly;
use crate::scalar::Scalar;

pub const DEFAULT_MAX_ITER: usize = 10_000;
pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_BISECT_TOL: f64 = 1e-4;

/// Relative slack allowed before a step counts as an increase.
const MONOTONE_SLACK: f64 = 1e-12;

pub fn de_step<T: Scalar>(x: T, epsilon: T, lambda: &Poly<T>, rho: &Poly<T>) -> T {
    epsilon * lambda.eval(T::one() - rho.eval(T::one() - x))
}

/// Outcome of iterating the recursion at one erasure probability.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeRun<T> {
    pub epsilon: T,
    pub converged: bool,
    pub final_erasure: T,
    pub iterations: usize,
    /// False if any step increased the erasure fraction.
    pub monotone: bool,
}

pub fn de_converges<T: Scalar>(
    epsilon: T,
    lambda: &Poly<T>,
    rho: &Poly<T>,
    max_iter: usize,
    tol: T,
) -> DeRun<T> {
    let slack = T::lit(MONOTONE_SLACK);
    let mut x = epsilon;
    let mut monotone = true;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        let next = de_step(x, epsilon, lambda, rho);
        iterations += 1;
        if next > x + slack * x {
            monotone = false;
        }
        let stuck = next == x;
        x = next;
        if x <= tol {
            converged = true;
            break;
        }
        if stuck {
            break;
        }
    }
    debug_assert!(monotone, "density evolution increased at epsilon {epsilon}");
    DeRun {
        epsilon,
        converged,
        final_erasure: x,
        iterations,
        monotone,
    }
}

/// Iterates from `x₀ = ε` and records every value, `x₀` included.
pub fn de_trajectory<T: Scalar>(
    epsilon: T,
    lambda: &Poly<T>,
    rho: &Poly<T>,
    max_iter: usize,
    tol: T,
) -> Vec<T> {
    let mut out = vec![epsilon];
    let mut x = epsilon;
    for _ in 0..max_iter {
        let next = de_step(x, epsilon, lambda, rho);
        let stuck = next == x;
        x = next;
        out.push(x);
        if x <= tol || stuck {
            break;
        }
    }
    out
}

/// Largest erasure probability for which density evolution converges,
/// located by bisection on `[0, 1]` to width `tol`.
pub fn threshold_bisect<T: Scalar>(lambda: &Poly<T>, rho: &Poly<T>, tol: T) -> T {
    let conv_tol = T::lit(DEFAULT_TOL);
    let (mut lo, mut hi) = (T::zero(), T::one());
    let two = T::lit(2.0);
    while hi - lo >= tol {
        let mid = (lo + hi) / two;
        if de_converges(mid, lambda, rho, DEFAULT_MAX_ITER, conv_tol).converged {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo + hi) / two
}

/// Minimum of `q` over the uniform grid `k / n`, `k = 0..=n`.
pub fn grid_check<T: Scalar>(q: &Poly<T>, n: usize) -> T {
    grid_min_by(|x| q.eval(x), n)
}

/// Minimum of `f` over the uniform grid `k / n`, `k = 0..=n`.
pub fn grid_min_by<T: Scalar>(f: impl Fn(T) -> T, n: usize) -> T {
    let nf = T::from_count(n.max(1));
    (0..=n)
        .map(|k| f(T::from_count(k) / nf))
        .fold(T::infinity(), T::min)
}

/// Density-evolution cross-check of a designed ensemble.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeReport {
    pub epsilon_tested: f64,
    pub converged: bool,
    pub final_erasure: f64,
    pub iterations_used: usize,
    pub threshold_estimate: f64,
    /// Minimum of the design constraint polynomial over the check grid.
    pub grid_min: f64,
}

impl DeReport {
    /// Runs the recursion at `epsilon_tested`, bisects the threshold and
    /// grid-checks `constraint` on `grid` intervals.
    pub fn run(
        lambda: &Poly<f64>,
        rho: &Poly<f64>,
        epsilon_tested: f64,
        constraint: impl Fn(f64) -> f64,
        grid: usize,
    ) -> Self {
        let eps = epsilon_tested.clamp(0.0, 1.0);
        let run = de_converges(eps, lambda, rho, DEFAULT_MAX_ITER, DEFAULT_TOL);
        DeReport {
            epsilon_tested: eps,
            converged: run.converged,
            final_erasure: run.final_erasure,
            iterations_used: run.iterations,
            threshold_estimate: threshold_bisect(lambda, rho, DEFAULT_BISECT_TOL),
            grid_min: grid_min_by(constraint, grid),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mono(k: usize) -> Poly<f64> {
        Poly::monomial(1.0, k)
    }

    #[test]
    fn step_fixed_point_at_zero() {
        assert_eq!(de_step(0.0, 0.4, &mono(2), &mono(5)), 0.0);
    }

    #[test]
    fn step_from_full_erasure() {
        assert!((de_step(1.0, 0.4, &mono(2), &mono(5)) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn regular_three_six_below_threshold_converges() {
        let run = de_converges(0.42, &mono(2), &mono(5), DEFAULT_MAX_ITER, DEFAULT_TOL);
        assert!(run.converged);
        assert!(run.monotone);
        assert!(run.final_erasure <= 1e-10);
    }

    #[test]
    fn regular_three_six_above_threshold_stalls() {
        let run = de_converges(0.5, &mono(2), &mono(5), DEFAULT_MAX_ITER, DEFAULT_TOL);
        assert!(!run.converged);
        assert!(run.final_erasure > 1e-3);
    }

    #[test]
    fn zero_erasure_converges_in_one_step() {
        let run = de_converges(0.0, &mono(2), &mono(5), DEFAULT_MAX_ITER, DEFAULT_TOL);
        assert!(run.converged);
        assert_eq!(run.iterations, 1);
    }

    #[test]
    fn linear_recursion_threshold_near_one() {
        // x ← εx needs about 23 / (1 - ε) steps, so the iteration cap binds.
        let t = threshold_bisect(&mono(1), &mono(1), 1e-4);
        assert!(t > 0.99 && t < 1.0, "{t}");
    }

    #[test]
    fn regular_three_six_threshold() {
        let t = threshold_bisect(&mono(2), &mono(5), 1e-4);
        assert!((t - 0.4294).abs() < 1e-3, "{t}");
    }

    #[test]
    fn grid_check_cases() {
        let q = Poly::new(vec![0.0, 1.0, -1.0]);
        assert_eq!(grid_check(&q, 10), 0.0);
        let sq = Poly::new(vec![0.09, -0.6, 1.0]);
        let m = grid_check(&sq, 100_000);
        assert!(m >= -1e-15 && m < 1e-9);
    }

    #[test]
    fn trajectory_is_non_increasing() {
        let tr = de_trajectory(0.42, &mono(2), &mono(5), 200, 1e-10);
        assert_eq!(tr[0], 0.42);
        assert!(tr.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn single_precision_recursion() {
        let run = de_converges(0.3f32, &Poly::monomial(1.0f32, 2), &Poly::monomial(1.0f32, 5), 10_000, 1e-6);
        assert!(run.converged);
    }
}
