use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use super::{ConicProblem, ConicSolution, SolverSettings};

/// Checks are flagged only beyond this multiple of the solver tolerance.
pub const KKT_SLACK: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum KktViolation {
    PrimalResidual,
    DualResidual,
    DualityGap,
    PrimalCone,
    DualCone,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    /// `‖Ax - b‖∞`
    pub primal_residual_abs: f64,
    /// `‖Aᵀy + s - c‖∞`
    pub dual_residual_abs: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub duality_gap: f64,
    /// Most negative orthant entry / eigenvalue of the primal block (0 if none).
    pub primal_cone_violation: f64,
    pub dual_cone_violation: f64,
    pub violations: Vec<KktViolation>,
}

impl KktReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

fn cone_violation(p: &ConicProblem, v: &nalgebra::DVector<f64>) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..p.orthant_dim {
        worst = worst.min(v[i]);
    }
    if p.psd_order > 0 {
        let m = p.psd_block(v);
        worst = worst.min(SymmetricEigen::new(m).eigenvalues.min());
    }
    -worst
}

/// Recomputes optimality conditions from scratch, independently of the
/// iteration that produced `sol`.
pub fn check_kkt(p: &ConicProblem, sol: &ConicSolution, settings: &SolverSettings) -> KktReport {
    let b_norm = p.b.amax();
    let c_norm = p.c.amax();
    let pr = (&p.a * &sol.x - &p.b).amax();
    let dr = (p.a.transpose() * &sol.y + &sol.s - &p.c).amax();
    let pobj = p.c.dot(&sol.x);
    let dobj = p.b.dot(&sol.y);
    let gap = (pobj - dobj).abs().max(sol.x.dot(&sol.s).abs());
    let x_scale = 1.0 + sol.x.amax();
    let s_scale = 1.0 + sol.s.amax();
    let pcv = cone_violation(p, &sol.x);
    let dcv = cone_violation(p, &sol.s);

    let mut violations = Vec::new();
    let feas = KKT_SLACK * settings.feas_tol;
    if pr / (1.0 + b_norm) > feas {
        violations.push(KktViolation::PrimalResidual);
    }
    if dr / (1.0 + c_norm) > feas {
        violations.push(KktViolation::DualResidual);
    }
    if gap > KKT_SLACK * settings.gap_tol * (1.0 + pobj.abs()) {
        violations.push(KktViolation::DualityGap);
    }
    if pcv > feas * x_scale {
        violations.push(KktViolation::PrimalCone);
    }
    if dcv > feas * s_scale {
        violations.push(KktViolation::DualCone);
    }
    KktReport {
        primal_residual_abs: pr,
        dual_residual_abs: dr,
        primal_residual: pr / (1.0 + b_norm),
        dual_residual: dr / (1.0 + c_norm),
        duality_gap: gap,
        primal_cone_violation: pcv,
        dual_cone_violation: dcv,
        violations,
    }
}
