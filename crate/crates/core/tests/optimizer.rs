use bec_design::de::grid_min_by;
use bec_design::ensemble::{DegreeDistribution, Side};
use bec_design::optimizer::{
    de_confirms, design_program, solve_baseline_lp, solve_design, DesignMode, DesignProblem, DesignResult,
    SosProgram, VarDomain,
};
use bec_design::poly::{AffinePoly, Poly};
use bec_design::sdp::{self, SolveStatus, SolverSettings};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rho(d: usize) -> DegreeDistribution<f64> {
    DegreeDistribution::regular(Side::Rho, d).unwrap()
}

fn settings() -> SolverSettings {
    SolverSettings::default()
}

/// `min a` subject to `p(x) + a ≥ 0` on `[0, 1]`, so `a* = -min p`.
fn shift_program(p: &Poly<f64>) -> SosProgram {
    let q = p.degree().max(1);
    let c = AffinePoly::from_constant(p, 1).add(&AffinePoly::from_var_term(&Poly::one(), 0, 1).unwrap()).unwrap();
    SosProgram::from_constraint(&c, q, vec![VarDomain::Free], Vec::new(), vec![1.0]).unwrap()
}

#[test]
fn sdp_value_equals_interval_minimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..40 {
        let deg = rng.gen_range(1..=8);
        let p = Poly::new((0..=deg).map(|_| rng.gen_range(-1.0..=1.0)).collect());
        let out = shift_program(&p).solve(&settings()).unwrap();
        assert_eq!(out.status, SolveStatus::Optimal, "{p:?}");
        let grid_min = grid_min_by(|x| p.eval(x), 200_000);
        assert!((out.z[0] + grid_min).abs() < 1e-6, "{p:?}: a = {}, grid min {grid_min}", out.z[0]);
        assert!(out.certificate.unwrap().accepted);
    }
}

#[test]
fn nonnegative_polynomials_are_certified() {
    // (x - 0.3)² (1.5 - x) is nonnegative on [0, 1] with a double root inside.
    let p = Poly::new(vec![-0.3, 1.0]).pow(2).mul(&Poly::new(vec![1.5, -1.0]));
    let out = shift_program(&p).solve(&settings()).unwrap();
    assert!(out.z[0].abs() < 1e-7, "{}", out.z[0]);
}

#[test]
fn smallest_ensemble_is_feasible_below_its_threshold() {
    let r = solve_design(&DesignProblem::max_rate(rho(2), 2, 0.5), &settings()).unwrap();
    assert_eq!(r.solver_status, SolveStatus::Optimal);
    assert!((r.lambda().unwrap().fraction(2) - 1.0).abs() < 1e-9);
}

#[test]
fn cycle_ensemble_stays_feasible_at_high_erasure() {
    // x ← εx converges for every ε < 1, so the only candidate λ = x stays admissible.
    let r = solve_design(&DesignProblem::max_rate(rho(2), 2, 0.6), &settings()).unwrap();
    assert!(r.is_optimal(), "{:?}", r.solver_status);
    assert!(r.rate.unwrap().abs() < 1e-9);
    assert!(de_confirms(&r));
}

#[test]
fn rate_design_at_half_capacity_gap_regime() {
    let r = solve_design(&DesignProblem::max_rate(rho(6), 7, 0.49), &settings()).unwrap();
    assert!(r.is_optimal());
    assert!((r.rate.unwrap() - 0.4922).abs() < 5e-4, "{:?}", r.rate);
    assert!((r.delta.unwrap() - 0.0349).abs() < 5e-4, "{:?}", r.delta);
    let lam = r.lambda().unwrap();
    assert!((lam.fraction(2) - 0.4005).abs() < 1e-3);
    assert!((lam.fraction(7) - 0.3773).abs() < 1e-3);
}

#[test]
fn threshold_is_monotone_in_max_degree() {
    let mut prev = 0.0;
    for dv in 3..=8 {
        let r = solve_design(&DesignProblem::max_threshold(rho(6), dv), &settings()).unwrap();
        assert!(r.is_optimal(), "dv {dv}: {:?}", r.solver_status);
        let eps = r.epsilon_used.unwrap();
        assert!(eps >= prev - 1e-6, "dv {dv}: {eps} < {prev}");
        assert!(r.t_star.unwrap() >= 1.0);
        prev = eps;
    }
}

#[test]
fn grid_relaxation_bounds_the_exact_value() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..5 {
        let rd = rng.gen_range(4..=7);
        let dv = rng.gen_range(3..=8);
        let p = DesignProblem::max_threshold(rho(rd), dv);
        let exact = solve_design(&p, &settings()).unwrap().t_star.unwrap();
        let mut prev = 0.0;
        for n in [50, 200, 800] {
            let t = solve_baseline_lp(&p.clone().with_grid(n), &settings()).unwrap().t_star.unwrap();
            assert!(t <= exact + 1e-9, "rho {rd} dv {dv} grid {n}: {t} > {exact}");
            assert!(t >= prev - 1e-9);
            prev = t;
        }
    }
}

#[test]
fn coarse_grid_is_optimistic_and_fails_the_fine_check() {
    let p = DesignProblem::max_threshold(rho(6), 7);
    let exact = solve_design(&p, &settings()).unwrap().t_star.unwrap();
    for (n, margin) in [(2, 1e-4), (3, 1e-1)] {
        let coarse = solve_baseline_lp(&p.clone().with_grid(n), &settings()).unwrap();
        assert_eq!(coarse.solver_status, SolveStatus::Optimal);
        assert!(coarse.t_star.unwrap() < exact - margin, "grid {n}");
        assert!(coarse.de_verification.unwrap().grid_min < -1e-6, "grid {n}");
    }
}

#[test]
fn rate_relaxation_is_optimistic() {
    let p = DesignProblem::max_rate(rho(6), 7, 0.49);
    let exact = solve_design(&p, &settings()).unwrap().rate.unwrap();
    let lp = solve_baseline_lp(&p.clone().with_grid(200), &settings()).unwrap().rate.unwrap();
    assert!(lp >= exact - 1e-7, "{lp} < {exact}");
}

#[test]
fn check_side_design() {
    let lambda = DegreeDistribution::regular(Side::Lambda, 3).unwrap();
    let r = solve_design(&DesignProblem::min_check_average(lambda, 12, 0.42), &settings()).unwrap();
    assert!(r.is_optimal(), "{:?}", r.solver_status);
    assert!(de_confirms(&r));
    assert!(r.rate.unwrap() <= 1.0 - 0.42 + 1e-6);
    assert!(grid_min_by(|x| r.constraint_value(x).unwrap(), 100_000) >= -1e-6);
}

#[test]
fn min_gap_recovers_rate_optimal_epsilon() {
    let r = solve_design(&DesignProblem::min_gap(rho(6), 7), &settings()).unwrap();
    assert_eq!(r.mode, DesignMode::MinGap);
    assert!(r.is_optimal());
    let eps = r.epsilon_used.unwrap();
    assert!((eps - 0.49).abs() < 0.01, "{eps}");
    assert!(r.delta.unwrap() <= 0.0349 + 1e-3);
}

#[test]
fn high_degree_problem_solves() {
    let r = solve_design(&DesignProblem::max_rate(rho(8), 15, 0.45), &settings()).unwrap();
    assert!(r.is_optimal(), "{:?}", r.solver_status);
    assert_eq!(r.certificate.as_ref().unwrap().q, 98);
}

#[test]
fn weak_duality_along_the_path() {
    let asm = design_program(&DesignProblem::max_rate(rho(6), 7, 0.49)).unwrap().assemble_reduced().unwrap();
    let s = settings();
    let sol = sdp::solve(&asm.problem, &s).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    for h in sol.history.iter().filter(|h| h.primal_residual <= s.feas_tol && h.dual_residual <= s.feas_tol) {
        assert!(h.primal_objective >= h.dual_objective - 1e-6);
    }
}

#[test]
fn tighter_tolerances_reach_smaller_gaps() {
    let p = DesignProblem::max_threshold(rho(6), 7);
    let tight = SolverSettings {
        gap_tol: 1e-11,
        feas_tol: 1e-11,
        ..settings()
    };
    let r = solve_design(&p, &tight).unwrap();
    assert!(r.is_optimal());
    assert!(r.solver_gap < 1e-9);
}

#[test]
fn result_json_round_trip() {
    let r = solve_design(&DesignProblem::max_threshold(rho(5), 5), &settings()).unwrap();
    let s = serde_json::to_string(&r).unwrap();
    let back: DesignResult = serde_json::from_str(&s).unwrap();
    assert_eq!(back.solver_status, r.solver_status);
    assert_eq!(back.lambda(), r.lambda());
    assert_eq!(back.t_star, r.t_star);
    assert_eq!(serde_json::to_string(&back).unwrap(), s);
}

#[test]
fn infeasible_rate_problem_is_reported() {
    let r = solve_design(&DesignProblem::max_rate(rho(6), 3, 0.5), &settings()).unwrap();
    assert_eq!(r.solver_status, SolveStatus::Infeasible);
    assert!(r.certificate.is_none());
}
