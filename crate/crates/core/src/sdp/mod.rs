//! Dense primal-dual interior-point solver for conic programs over the
//! product of a nonnegative orthant and a single PSD block.
//!
//! Primal: `min cᵀx  s.t.  A x = b,  x ∈ K`.
//! Dual:   `max bᵀy  s.t.  Aᵀy + s = c,  s ∈ K`.
//!
//! Variables are laid out as `orthant_dim` scalars followed by the
//! `m(m+1)/2` entries of the symmetric block in row-major upper-triangle
//! order, off-diagonals scaled by √2 so that `svec(X)·svec(Y) = tr(XY)`.

mod kkt;
mod solver;

pub use kkt::{check_kkt, KktReport, KktViolation};
pub use solver::solve;

use std::f64::consts::SQRT_2;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn svec_len(m: usize) -> usize {
    m * (m + 1) / 2
}

/// Position of entry `(i, j)`, `i ≤ j`, inside an svec of order `m`.
pub fn svec_index(i: usize, j: usize, m: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * (2 * m + 1 - i) / 2 + (j - i)
}

pub fn svec(mat: &DMatrix<f64>) -> DVector<f64> {
    let m = mat.nrows();
    let mut v = DVector::zeros(svec_len(m));
    let mut k = 0;
    for i in 0..m {
        v[k] = mat[(i, i)];
        k += 1;
        for j in i + 1..m {
            v[k] = SQRT_2 * 0.5 * (mat[(i, j)] + mat[(j, i)]);
            k += 1;
        }
    }
    v
}

pub fn smat(v: &[f64], m: usize) -> DMatrix<f64> {
    debug_assert_eq!(v.len(), svec_len(m));
    let mut mat = DMatrix::zeros(m, m);
    let mut k = 0;
    for i in 0..m {
        mat[(i, i)] = v[k];
        k += 1;
        for j in i + 1..m {
            let e = v[k] / SQRT_2;
            mat[(i, j)] = e;
            mat[(j, i)] = e;
            k += 1;
        }
    }
    mat
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConicProblem {
    pub c: DVector<f64>,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub orthant_dim: usize,
    pub psd_order: usize,
}

impl ConicProblem {
    pub fn new(
        c: DVector<f64>,
        a: DMatrix<f64>,
        b: DVector<f64>,
        orthant_dim: usize,
        psd_order: usize,
    ) -> Result<Self> {
        let n = orthant_dim + svec_len(psd_order);
        if c.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: c.len(),
            });
        }
        if a.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: a.ncols(),
            });
        }
        if a.nrows() != b.len() {
            return Err(Error::DimensionMismatch {
                expected: a.nrows(),
                found: b.len(),
            });
        }
        Ok(Self {
            c,
            a,
            b,
            orthant_dim,
            psd_order,
        })
    }

    pub fn n_vars(&self) -> usize {
        self.orthant_dim + svec_len(self.psd_order)
    }

    pub fn n_rows(&self) -> usize {
        self.a.nrows()
    }

    /// Symmetric PSD block of a primal (or dual slack) vector.
    pub fn psd_block(&self, v: &DVector<f64>) -> DMatrix<f64> {
        smat(&v.as_slice()[self.orthant_dim..], self.psd_order)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub gap_tol: f64,
    pub feas_tol: f64,
    pub max_iter: usize,
    /// Fraction-to-boundary factor.
    pub step_factor: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            gap_tol: 1e-8,
            feas_tol: 1e-8,
            max_iter: 200,
            step_factor: 0.98,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    /// No `x ∈ K` satisfies `Ax = b`.
    Infeasible,
    /// Primal objective unbounded below (dual infeasible).
    Unbounded,
    MaxIterations,
    NumericalFailure,
}

/// Per-iteration diagnostics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationStats {
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub mu: f64,
    pub step_primal: f64,
    pub step_dual: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConicSolution {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub s: DVector<f64>,
    pub status: SolveStatus,
    pub iterations: usize,
    pub duality_gap: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub primal_objective: f64,
    pub dual_objective: f64,
    /// Squared ratio of extreme diagonal entries of the Newton-system
    /// triangular factor, reported on linear-algebra breakdown.
    pub condition_estimate: Option<f64>,
    pub history: Vec<IterationStats>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svec_layout() {
        assert_eq!(svec_len(3), 6);
        assert_eq!(svec_index(0, 0, 3), 0);
        assert_eq!(svec_index(0, 2, 3), 2);
        assert_eq!(svec_index(1, 1, 3), 3);
        assert_eq!(svec_index(2, 1, 3), 4);
        assert_eq!(svec_index(2, 2, 3), 5);
        assert_eq!(svec_index(3, 3, 4), 9);
    }

    #[test]
    fn svec_inner_product_is_trace() {
        let x = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, -0.5, 1.0, 3.0, 0.25, -0.5, 0.25, 1.0]);
        let y = DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.0, 0.5, -1.0, 2.0, 0.0, 2.0, 4.0]);
        let tr = (&x * &y).trace();
        assert!((svec(&x).dot(&svec(&y)) - tr).abs() < 1e-12);
        assert_eq!(smat(svec(&x).as_slice(), 3), x);
    }

    #[test]
    fn problem_dimension_checks() {
        let ok = ConicProblem::new(
            DVector::zeros(4),
            DMatrix::zeros(1, 4),
            DVector::zeros(1),
            1,
            2,
        );
        assert!(ok.is_ok());
        assert!(ConicProblem::new(DVector::zeros(3), DMatrix::zeros(1, 4), DVector::zeros(1), 1, 2)
            .is_err());
        assert!(ConicProblem::new(DVector::zeros(4), DMatrix::zeros(2, 4), DVector::zeros(1), 1, 2)
            .is_err());
    }
}
