//! Degree-distribution design as sum-of-squares programs.
//!
//! Every design problem asks for weights `z` such that a polynomial
//! `Q(x; z)`, affine in `z`, is nonnegative on `[0, 1]`. The exact route
//! lifts `Q` and searches for a PSD Gram matrix; the baseline route only
//! enforces `Q(k/N) ≥ 0` on a grid and solves a linear program.

use std::collections::BTreeMap;
use std::f64::consts::SQRT_2;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bernstein::Bernstein;
use crate::de::DeReport;
use crate::ensemble::{capacity_gap, DegreeDistribution, Ensemble, Side, PRUNE_TOL};
use crate::error::{Error, Result};
use crate::poly::{AffinePoly, Poly};
use crate::scalar::binomial;
use crate::sdp::{self, smat, svec_index, svec_len, ConicProblem, ConicSolution, SolveStatus, SolverSettings};
use crate::sos::{antidiagonal, lift_affine, verify_lifted, GramCertificate};

pub const DEFAULT_GRID: usize = 1000;
/// Points used to grid-check a solved constraint polynomial.
pub const VERIFY_GRID: usize = 100_000;
/// Offset below the design threshold at which convergence is re-checked.
pub const DE_MARGIN: f64 = 0.005;
pub const THRESHOLD_TOL: f64 = 2e-3;
pub const GRID_TOL: f64 = 1e-6;

const PIVOT_TOL: f64 = 1e-12;
const VANISH_TOL: f64 = 1e-12;
const GOLDEN_TOL: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DesignMode {
    /// Fixed ρ: maximize the erasure threshold (minimize `t = 1/ε`).
    MaxThreshold,
    /// Fixed ρ and ε: maximize the rate.
    MaxRateVariableSide,
    /// Fixed λ and ε: minimize `Σ ρ_j / j`.
    MinCheckAverage,
    /// Fixed ρ: choose ε to minimize the capacity gap of the rate-optimal λ.
    MinGap,
}

impl DesignMode {
    fn fixed_side(self) -> Side {
        match self {
            DesignMode::MinCheckAverage => Side::Lambda,
            _ => Side::Rho,
        }
    }

    fn needs_epsilon(self) -> bool {
        matches!(self, DesignMode::MaxRateVariableSide | DesignMode::MinCheckAverage)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Sdp,
    GridLp,
}

fn default_grid() -> usize {
    DEFAULT_GRID
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignProblem {
    pub mode: DesignMode,
    pub fixed_side: DegreeDistribution<f64>,
    /// Largest degree on the optimized side.
    pub max_free_degree: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default = "default_grid")]
    pub grid_size: usize,
}

impl DesignProblem {
    pub fn max_threshold(rho: DegreeDistribution<f64>, dv_max: usize) -> Self {
        Self {
            mode: DesignMode::MaxThreshold,
            fixed_side: rho,
            max_free_degree: dv_max,
            epsilon: None,
            grid_size: DEFAULT_GRID,
        }
    }

    pub fn max_rate(rho: DegreeDistribution<f64>, dv_max: usize, epsilon: f64) -> Self {
        Self {
            mode: DesignMode::MaxRateVariableSide,
            fixed_side: rho,
            max_free_degree: dv_max,
            epsilon: Some(epsilon),
            grid_size: DEFAULT_GRID,
        }
    }

    pub fn min_check_average(lambda: DegreeDistribution<f64>, dc_max: usize, epsilon: f64) -> Self {
        Self {
            mode: DesignMode::MinCheckAverage,
            fixed_side: lambda,
            max_free_degree: dc_max,
            epsilon: Some(epsilon),
            grid_size: DEFAULT_GRID,
        }
    }

    pub fn min_gap(rho: DegreeDistribution<f64>, dv_max: usize) -> Self {
        Self {
            mode: DesignMode::MinGap,
            ..Self::max_threshold(rho, dv_max)
        }
    }

    pub fn with_grid(mut self, n: usize) -> Self {
        self.grid_size = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let report = self.fixed_side.validate();
        if !report.is_valid() {
            return Err(Error::InvalidDistribution(
                report
                    .violations
                    .iter()
                    .map(|v| v.to_string())
                    .collect::<Vec<_>>()
                    .join("; "),
            ));
        }
        if self.fixed_side.side() != self.mode.fixed_side() {
            return Err(Error::Config(format!(
                "mode {:?} expects a fixed {} distribution",
                self.mode,
                self.mode.fixed_side()
            )));
        }
        if self.max_free_degree < 2 {
            return Err(Error::Config(format!(
                "maximum free degree must be at least 2, got {}",
                self.max_free_degree
            )));
        }
        match (self.mode.needs_epsilon(), self.epsilon) {
            (true, None) => Err(Error::Config(format!("mode {:?} requires epsilon", self.mode))),
            (true, Some(e)) if !(e > 0.0 && e < 1.0) => Err(Error::InvalidChannel(e)),
            (false, Some(_)) => Err(Error::Config(format!(
                "mode {:?} takes no epsilon",
                self.mode
            ))),
            _ => Ok(()),
        }
    }

    /// Order parameter `q` of the lifting, `max(1, (D_free - 1)(D_fixed - 1))`.
    pub fn constraint_degree(&self) -> usize {
        ((self.max_free_degree - 1) * (self.fixed_side.max_degree().max(1) - 1)).max(1)
    }

    fn n_weights(&self) -> usize {
        self.max_free_degree - 1
    }

    fn has_t(&self) -> bool {
        matches!(self.mode, DesignMode::MaxThreshold | DesignMode::MinGap)
    }

    fn free_side(&self) -> Side {
        match self.fixed_side.side() {
            Side::Rho => Side::Lambda,
            Side::Lambda => Side::Rho,
        }
    }
}

/// Constraint polynomial `Q(x; z)` whose nonnegativity on `[0, 1]` is the
/// density-evolution condition. Variables are the free-side weights for
/// degrees `2..=max_free_degree`, then `t` when the threshold is optimized.
///
/// `MinGap` yields the threshold-mode polynomial.
pub fn build_constraint_poly(problem: &DesignProblem) -> Result<AffinePoly<f64>> {
    problem.validate()?;
    let nw = problem.n_weights();
    let fixed = problem.fixed_side.to_poly();
    let fixed = fixed.scale(1.0 / problem.fixed_side.sum());
    let one = Poly::one();
    match problem.mode {
        DesignMode::MinCheckAverage => {
            let eps = problem.epsilon.expect("validated");
            let inner = one.sub(&fixed.scale(eps));
            let mut q = AffinePoly::from_constant(&Poly::new(vec![-1.0, 1.0]), nw);
            for (v, j) in (2..=problem.max_free_degree).enumerate() {
                q = q.add(&AffinePoly::from_var_term(&inner.pow(j as u32 - 1), v, nw)?)?;
            }
            Ok(q)
        }
        _ => {
            let n_vars = nw + usize::from(problem.has_t());
            let inner = one.sub(&fixed.compose(&Poly::new(vec![1.0, -1.0])));
            let mut q = if problem.has_t() {
                AffinePoly::from_var_term(&Poly::x(), nw, n_vars)?
            } else {
                let eps = problem.epsilon.expect("validated");
                AffinePoly::from_constant(&Poly::monomial(1.0 / eps, 1), n_vars)
            };
            for (v, i) in (2..=problem.max_free_degree).enumerate() {
                let basis = inner.pow(i as u32 - 1).scale(-1.0);
                q = q.add(&AffinePoly::from_var_term(&basis, v, n_vars)?)?;
            }
            Ok(q)
        }
    }
}

/// Sign constraint on one decision variable.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum VarDomain {
    NonNegative,
    AtLeast(f64),
    Free,
}

/// `Σ_v coeffs[v] z_v = rhs`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearEquality {
    pub coeffs: Vec<f64>,
    pub rhs: f64,
}

/// Minimize `objective · z` subject to linear equalities, per-variable
/// domains and `Q(x; z) ≥ 0` on `[0, 1]`.
///
/// `Q` is stored through its degree-`q` Bernstein coefficients: row `j` of
/// `bernstein` is the affine form `[c, c_1, .., c_n]` of `β_j(z)`. The lifted
/// coefficient `Π_2j` equals `C(q, j) β_j`.
#[derive(Clone, Debug, PartialEq)]
pub struct SosProgram {
    pub bernstein: Vec<Vec<f64>>,
    pub domains: Vec<VarDomain>,
    pub equalities: Vec<LinearEquality>,
    pub objective: Vec<f64>,
}

/// Maps decision variables to orthant columns: `z_v = offset_v + Σ c·col`.
#[derive(Clone, Debug, PartialEq)]
struct ColumnMap {
    offset: Vec<f64>,
    terms: Vec<Vec<(usize, f64)>>,
    n_cols: usize,
}

impl ColumnMap {
    fn new(domains: &[VarDomain]) -> Self {
        let mut offset = Vec::with_capacity(domains.len());
        let mut terms = Vec::with_capacity(domains.len());
        let mut col = 0;
        for d in domains {
            match *d {
                VarDomain::NonNegative => {
                    offset.push(0.0);
                    terms.push(vec![(col, 1.0)]);
                    col += 1;
                }
                VarDomain::AtLeast(l) => {
                    offset.push(l);
                    terms.push(vec![(col, 1.0)]);
                    col += 1;
                }
                VarDomain::Free => {
                    offset.push(0.0);
                    terms.push(vec![(col, 1.0), (col + 1, -1.0)]);
                    col += 2;
                }
            }
        }
        Self {
            offset,
            terms,
            n_cols: col,
        }
    }

    fn decode(&self, x: &[f64]) -> Vec<f64> {
        self.offset
            .iter()
            .zip(&self.terms)
            .map(|(&o, t)| o + t.iter().map(|&(c, w)| w * x[c]).sum::<f64>())
            .collect()
    }
}

/// A [`SosProgram`] in conic standard form, with the bookkeeping needed to
/// read decision variables and the Gram matrix back out.
///
/// The PSD block holds `B'` with `B = D B' D`, `D_i = sqrt(C(q, i))`, and
/// each Gram equation is divided by `D_⌊l/2⌋ D_⌈l/2⌉`.
#[derive(Clone, Debug, PartialEq)]
pub struct AssembledSdp {
    pub problem: ConicProblem,
    pub q: usize,
    /// Leading Gram indices removed from the block; their rows and columns
    /// are zero in the decoded matrix.
    pub skip: usize,
    /// Constant added to the conic objective to recover `objective · z`.
    pub objective_offset: f64,
    columns: ColumnMap,
    gram_scale: Vec<f64>,
}

impl AssembledSdp {
    pub fn decode_vars(&self, x: &DVector<f64>) -> Vec<f64> {
        self.columns.decode(x.as_slice())
    }

    pub fn decode_gram(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let m = self.q + 1;
        let k = self.skip;
        let scaled = smat(&x.as_slice()[self.columns.n_cols..], m - k);
        DMatrix::from_fn(m, m, |i, j| {
            if i < k || j < k {
                0.0
            } else {
                scaled[(i - k, j - k)] * self.gram_scale[i] * self.gram_scale[j]
            }
        })
    }
}

/// Raw outcome of solving a [`SosProgram`].
#[derive(Clone, Debug, PartialEq)]
pub struct SosOutcome {
    pub status: SolveStatus,
    pub z: Vec<f64>,
    pub objective: f64,
    /// Present when the conic solver reports optimality.
    pub certificate: Option<GramCertificate>,
    pub iterations: usize,
    pub gap: f64,
}

/// Raw outcome of solving the grid relaxation of a [`SosProgram`].
#[derive(Clone, Debug, PartialEq)]
pub struct GridOutcome {
    pub status: SolveStatus,
    pub z: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub gap: f64,
}

impl SosProgram {
    /// Program for a constraint given in the monomial basis, lifted at `q`.
    pub fn from_constraint(
        constraint: &AffinePoly<f64>,
        q: usize,
        domains: Vec<VarDomain>,
        equalities: Vec<LinearEquality>,
        objective: Vec<f64>,
    ) -> Result<Self> {
        let lifted = lift_affine(constraint, q)?;
        let bernstein = (0..=q)
            .map(|j| {
                let norm = binomial::<f64>(q, j);
                lifted.pi.coeff_form(2 * j).iter().map(|v| v / norm).collect()
            })
            .collect();
        let out = Self {
            bernstein,
            domains,
            equalities,
            objective,
        };
        out.check()?;
        Ok(out)
    }

    pub fn q(&self) -> usize {
        self.bernstein.len() - 1
    }

    pub fn n_vars(&self) -> usize {
        self.domains.len()
    }

    /// Bernstein coefficients of `Q(·; z)`.
    pub fn bernstein_at(&self, z: &[f64]) -> Bernstein<f64> {
        Bernstein::new(self.bernstein.iter().map(|f| f[0] + dot(&f[1..], z)).collect())
    }

    /// Lifted coefficients of `Q(·; z)`.
    pub fn lifted_at(&self, z: &[f64]) -> Poly<f64> {
        let q = self.q();
        let beta = self.bernstein_at(z);
        let mut pi = vec![0.0; 2 * q + 1];
        for (j, &b) in beta.coeffs().iter().enumerate() {
            pi[2 * j] = binomial::<f64>(q, j) * b;
        }
        Poly::new(pi)
    }

    fn check(&self) -> Result<()> {
        let n = self.n_vars();
        if self.bernstein.is_empty() {
            return Err(Error::Degree { q: 0, degree: 0 });
        }
        for len in [self.objective.len() + 1]
            .into_iter()
            .chain(self.bernstein.iter().map(|f| f.len()))
            .map(|l| l - 1)
            .chain(self.equalities.iter().map(|e| e.coeffs.len()))
        {
            if len != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: len,
                });
            }
        }
        Ok(())
    }

    /// Full Gram block of order `q + 1`.
    pub fn assemble(&self) -> Result<AssembledSdp> {
        self.assemble_with_skip(0)
    }

    /// Drops leading Gram indices whose diagonal entry is forced to zero,
    /// which happens when the constraint vanishes at `x = 0`.
    pub fn assemble_reduced(&self) -> Result<AssembledSdp> {
        self.check()?;
        let nv = self.n_vars();
        let Some((z0, basis)) = affine_solutions(&self.equalities, nv) else {
            return self.assemble_with_skip(0);
        };
        let vanishes = |form: &[f64]| {
            let scale = 1.0 + form.iter().map(|v| v.abs()).fold(0.0, f64::max);
            let tol = VANISH_TOL * scale;
            let at_z0 = form[0] + dot(&form[1..], &z0);
            let dir = basis.tr_mul(&DVector::from_column_slice(&form[1..]));
            at_z0.abs() <= tol && dir.iter().all(|v| v.abs() <= tol)
        };
        let mut skip = 0;
        while skip < self.q() && vanishes(&self.bernstein[skip]) {
            skip += 1;
        }
        self.assemble_with_skip(skip)
    }

    fn assemble_with_skip(&self, skip: usize) -> Result<AssembledSdp> {
        self.check()?;
        let q = self.q();
        let m = q + 1 - skip;
        let cols = ColumnMap::new(&self.domains);
        let n0 = cols.n_cols;
        let n = n0 + svec_len(m);
        let gram_rows: Vec<usize> = (2 * skip..=2 * q).collect();
        let n_rows = self.equalities.len() + gram_rows.len();
        let gram_scale: Vec<f64> = (0..=q).map(|i| binomial::<f64>(q, i).sqrt()).collect();

        let mut a = DMatrix::zeros(n_rows, n);
        let mut b = DVector::zeros(n_rows);
        // Moves an affine form in z to the left-hand side of row r.
        let put_form = |a: &mut DMatrix<f64>, b: &mut DVector<f64>, r: usize, form: &[f64], sign: f64| {
            let mut rhs = form[0];
            for (v, &f) in form[1..].iter().enumerate() {
                if f == 0.0 {
                    continue;
                }
                rhs += f * cols.offset[v];
                for &(c, w) in &cols.terms[v] {
                    a[(r, c)] += sign * f * w;
                }
            }
            b[r] = -sign * rhs;
        };

        for (r, eq) in self.equalities.iter().enumerate() {
            let mut form = vec![-eq.rhs];
            form.extend_from_slice(&eq.coeffs);
            put_form(&mut a, &mut b, r, &form, 1.0);
        }
        let zero_form = vec![0.0; self.n_vars() + 1];
        for (k, &l) in gram_rows.iter().enumerate() {
            let r = self.equalities.len() + k;
            let form = if l % 2 == 0 { &self.bernstein[l / 2] } else { &zero_form };
            put_form(&mut a, &mut b, r, form, -1.0);
            let norm = gram_scale[l / 2] * gram_scale[(l + 1) / 2];
            for (i, j) in antidiagonal(q, l).filter(|&(i, _)| i >= skip) {
                let w = if i == j {
                    gram_scale[i] * gram_scale[i]
                } else {
                    SQRT_2 * gram_scale[i] * gram_scale[j]
                };
                a[(r, n0 + svec_index(i - skip, j - skip, m))] += w / norm;
            }
        }

        let mut c = DVector::zeros(n);
        let mut objective_offset = 0.0;
        for (v, &o) in self.objective.iter().enumerate() {
            objective_offset += o * cols.offset[v];
            for &(col, w) in &cols.terms[v] {
                c[col] += o * w;
            }
        }
        Ok(AssembledSdp {
            problem: ConicProblem::new(c, a, b, n0, m)?,
            q,
            skip,
            objective_offset,
            columns: cols,
            gram_scale,
        })
    }

    pub fn solve(&self, settings: &SolverSettings) -> Result<SosOutcome> {
        let asm = self.assemble_reduced()?;
        let sol = sdp::solve(&asm.problem, settings)?;
        let z = asm.decode_vars(&sol.x);
        let certificate = if sol.status == SolveStatus::Optimal {
            let gram = asm.decode_gram(&sol.x);
            Some(verify_lifted(&self.lifted_at(&z), self.q(), &gram)?)
        } else {
            None
        };
        Ok(SosOutcome {
            status: sol.status,
            objective: dot(&self.objective, &z),
            z,
            certificate,
            iterations: sol.iterations,
            gap: sol.duality_gap,
        })
    }

    /// Solves with `constraint(k/n) ≥ 0` for `k = 1..=n` in place of
    /// nonnegativity on the whole interval.
    pub fn solve_on_grid(&self, n: usize, settings: &SolverSettings) -> Result<GridOutcome> {
        self.check()?;
        if n < 2 {
            return Err(Error::Config(format!("grid size must be at least 2, got {n}")));
        }
        let nv = self.n_vars();
        let Some((z0, basis)) = affine_solutions(&self.equalities, nv) else {
            return Ok(GridOutcome {
                status: SolveStatus::Infeasible,
                z: vec![0.0; nv],
                objective: f64::NAN,
                iterations: 0,
                gap: f64::NAN,
            });
        };
        let ny = basis.ncols();

        // Inequalities g0 + g·y ≥ 0 in the reduced variables y.
        let mut g0 = Vec::new();
        let mut g: Vec<DVector<f64>> = Vec::new();
        for (v, d) in self.domains.iter().enumerate() {
            let lower = match *d {
                VarDomain::NonNegative => 0.0,
                VarDomain::AtLeast(l) => l,
                VarDomain::Free => continue,
            };
            g0.push(z0[v] - lower);
            g.push(basis.row(v).transpose());
        }
        let columns: Vec<Bernstein<f64>> = (0..=nv)
            .map(|c| Bernstein::new(self.bernstein.iter().map(|f| f[c]).collect()))
            .collect();
        let z0v = DVector::from_column_slice(&z0);
        for k in 1..=n {
            let x = k as f64 / n as f64;
            let vals = DVector::from_iterator(nv, columns[1..].iter().map(|p| p.eval(x)));
            g0.push(columns[0].eval(x) + vals.dot(&z0v));
            g.push(basis.tr_mul(&vals));
        }

        let obj = DVector::from_column_slice(&self.objective);
        let finish = |status, y: &DVector<f64>, iterations, gap| {
            let z: Vec<f64> = (&z0v + &basis * y).iter().copied().collect();
            GridOutcome {
                status,
                objective: obj.dot(&DVector::from_column_slice(&z)),
                z,
                iterations,
                gap,
            }
        };
        if ny == 0 {
            let ok = g0.iter().all(|&v| v >= -GRID_TOL);
            let status = if ok { SolveStatus::Optimal } else { SolveStatus::Infeasible };
            return Ok(finish(status, &DVector::zeros(0), 0, 0.0));
        }

        // Dual form: max bᵀy s.t. Aᵀy + s = c, s ≥ 0, one slack per inequality.
        let m = g.len();
        let mut a = DMatrix::zeros(ny, m);
        for (k, gk) in g.iter().enumerate() {
            a.set_column(k, &(-gk));
        }
        let c = DVector::from_vec(g0);
        let b = -basis.tr_mul(&obj);
        let sol: ConicSolution = sdp::solve(&ConicProblem::new(c, a, b, m, 0)?, settings)?;
        let status = match sol.status {
            SolveStatus::Unbounded => SolveStatus::Infeasible,
            SolveStatus::Infeasible => SolveStatus::Unbounded,
            s => s,
        };
        Ok(finish(status, &sol.y, sol.iterations, sol.duality_gap))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Particular solution and null-space basis of the equalities, by
/// Gauss-Jordan elimination; `None` if they are inconsistent.
fn affine_solutions(eqs: &[LinearEquality], nv: usize) -> Option<(Vec<f64>, DMatrix<f64>)> {
    let mut rows: Vec<Vec<f64>> = eqs
        .iter()
        .map(|e| {
            let mut r = e.coeffs.clone();
            r.push(e.rhs);
            r
        })
        .collect();
    let mut pivots = Vec::new();
    let mut r = 0;
    for col in 0..nv {
        let Some(p) = (r..rows.len()).max_by(|&i, &j| rows[i][col].abs().total_cmp(&rows[j][col].abs()))
        else {
            break;
        };
        if rows[p][col].abs() <= PIVOT_TOL {
            continue;
        }
        rows.swap(r, p);
        let pv = rows[r][col];
        rows[r].iter_mut().for_each(|v| *v /= pv);
        for i in 0..rows.len() {
            if i != r {
                let f = rows[i][col];
                if f != 0.0 {
                    for k in 0..=nv {
                        rows[i][k] -= f * rows[r][k];
                    }
                }
            }
        }
        pivots.push(col);
        r += 1;
    }
    if rows[r..].iter().any(|row| row[nv].abs() > PIVOT_TOL) {
        return None;
    }
    let free: Vec<usize> = (0..nv).filter(|c| !pivots.contains(c)).collect();
    let mut z0 = vec![0.0; nv];
    let mut basis = DMatrix::zeros(nv, free.len());
    for (k, &f) in free.iter().enumerate() {
        basis[(f, k)] = 1.0;
    }
    for (i, &p) in pivots.iter().enumerate() {
        z0[p] = rows[i][nv];
        for (k, &f) in free.iter().enumerate() {
            basis[(p, k)] = -rows[i][f];
        }
    }
    Some((z0, basis))
}

/// The SoS program of a design problem (`MinGap`: its threshold stage).
pub fn design_program(problem: &DesignProblem) -> Result<SosProgram> {
    problem.validate()?;
    let q = problem.constraint_degree();
    let nw = problem.n_weights();
    let fixed = problem.fixed_side.to_poly().scale(1.0 / problem.fixed_side.sum());
    let fixed = Bernstein::from_poly(&fixed, fixed.degree().max(1));
    let mut columns: Vec<Bernstein<f64>> = Vec::with_capacity(nw + 2);
    let mut domains = vec![VarDomain::NonNegative; nw];
    let mut simplex = vec![1.0; nw];
    let mut objective: Vec<f64> = (2..=problem.max_free_degree)
        .map(|d| 1.0 / d as f64)
        .collect();
    match problem.mode {
        DesignMode::MinCheckAverage => {
            let eps = problem.epsilon.expect("validated");
            let inner = Bernstein::constant(1.0, 0).sub(&fixed.scale(eps));
            columns.push(Bernstein::x(1).sub(&Bernstein::constant(1.0, 1)));
            for j in 2..=problem.max_free_degree {
                columns.push(inner.pow(j as u32 - 1));
            }
        }
        _ => {
            let inner = Bernstein::constant(1.0, 0).sub(&fixed.reflect());
            columns.push(match problem.epsilon {
                Some(eps) if !problem.has_t() => Bernstein::x(1).scale(1.0 / eps),
                _ => Bernstein::constant(0.0, 0),
            });
            for i in 2..=problem.max_free_degree {
                columns.push(inner.pow(i as u32 - 1).scale(-1.0));
            }
            if problem.has_t() {
                columns.push(Bernstein::x(1));
                domains.push(VarDomain::AtLeast(1.0));
                simplex.push(0.0);
                objective = vec![0.0; nw];
                objective.push(1.0);
            }
            if problem.mode == DesignMode::MaxRateVariableSide {
                objective.iter_mut().for_each(|o| *o = -*o);
            }
        }
    }
    let columns: Vec<Bernstein<f64>> = columns.iter().map(|c| c.elevate(q)).collect();
    let bernstein = (0..=q)
        .map(|k| columns.iter().map(|c| c.coeffs()[k]).collect())
        .collect();
    let program = SosProgram {
        bernstein,
        domains,
        equalities: vec![LinearEquality {
            coeffs: simplex,
            rhs: 1.0,
        }],
        objective,
    };
    program.check()?;
    Ok(program)
}

pub fn assemble_sdp(problem: &DesignProblem) -> Result<ConicProblem> {
    Ok(design_program(problem)?.assemble()?.problem)
}

/// A solved design. Fields derived from the solution are `None` unless the
/// solver returned a point.
#[derive(Clone, Debug, PartialEq)]
pub struct DesignResult {
    pub mode: DesignMode,
    pub method: Method,
    pub fixed_side: DegreeDistribution<f64>,
    pub free_side: Option<DegreeDistribution<f64>>,
    pub t_star: Option<f64>,
    pub objective: Option<f64>,
    pub rate: Option<f64>,
    pub epsilon_used: Option<f64>,
    pub delta: Option<f64>,
    pub certificate: Option<GramCertificate>,
    pub solver_status: SolveStatus,
    pub solver_iterations: usize,
    pub solver_gap: f64,
    pub de_verification: Option<DeReport>,
    pub grid_size: Option<usize>,
}

impl DesignResult {
    pub fn is_optimal(&self) -> bool {
        self.solver_status == SolveStatus::Optimal
    }

    pub fn ensemble(&self) -> Option<Ensemble<f64>> {
        let free = self.free_side.clone()?;
        Some(match free.side() {
            Side::Lambda => Ensemble::new(free, self.fixed_side.clone()),
            Side::Rho => Ensemble::new(self.fixed_side.clone(), free),
        })
    }

    pub fn lambda(&self) -> Option<&DegreeDistribution<f64>> {
        self.side(Side::Lambda)
    }

    pub fn rho(&self) -> Option<&DegreeDistribution<f64>> {
        self.side(Side::Rho)
    }

    fn side(&self, side: Side) -> Option<&DegreeDistribution<f64>> {
        if self.fixed_side.side() == side {
            Some(&self.fixed_side)
        } else {
            self.free_side.as_ref()
        }
    }

    /// Constraint polynomial at the reported (pruned) design, evaluated at
    /// `x` without expanding in monomials.
    pub fn constraint_value(&self, x: f64) -> Option<f64> {
        let ens = self.ensemble()?;
        let eps = self.epsilon_used?;
        let (lam, rho) = (ens.lambda.to_poly(), ens.rho.to_poly());
        Some(match self.mode {
            DesignMode::MinCheckAverage => rho.eval(1.0 - eps * lam.eval(x)) - (1.0 - x),
            _ => {
                let s = self.t_star.unwrap_or(1.0 / eps);
                s * x - lam.eval(1.0 - rho.eval(1.0 - x))
            }
        })
    }

    /// Constraint polynomial at the reported (pruned) design.
    pub fn constraint_poly(&self) -> Option<Poly<f64>> {
        let ens = self.ensemble()?;
        let eps = self.epsilon_used?;
        let lam = ens.lambda.to_poly();
        let rho = ens.rho.to_poly();
        let one = Poly::one();
        Some(match self.mode {
            DesignMode::MinCheckAverage => {
                let inner = one.sub(&lam.scale(eps));
                rho.compose(&inner).sub(&Poly::new(vec![1.0, -1.0]))
            }
            _ => {
                let s = self.t_star.unwrap_or(1.0 / eps);
                let inner = one.sub(&rho.compose(&Poly::new(vec![1.0, -1.0])));
                Poly::monomial(s, 1).sub(&lam.compose(&inner))
            }
        })
    }
}

#[derive(Serialize, Deserialize)]
struct SolverJson {
    iterations: usize,
    gap: f64,
}

#[derive(Serialize, Deserialize)]
struct DesignResultJson {
    mode: DesignMode,
    method: Method,
    lambda: Option<DegreeDistribution<f64>>,
    rho: Option<DegreeDistribution<f64>>,
    t_star: Option<f64>,
    objective: Option<f64>,
    epsilon: Option<f64>,
    rate: Option<f64>,
    delta: Option<f64>,
    certificate: Option<GramCertificate>,
    de: Option<DeReport>,
    status: SolveStatus,
    solver: SolverJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    grid_size: Option<usize>,
}

impl Serialize for DesignResult {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        DesignResultJson {
            mode: self.mode,
            method: self.method,
            lambda: self.lambda().cloned(),
            rho: self.rho().cloned(),
            t_star: self.t_star,
            objective: self.objective,
            epsilon: self.epsilon_used,
            rate: self.rate,
            delta: self.delta,
            certificate: self.certificate.clone(),
            de: self.de_verification.clone(),
            status: self.solver_status,
            solver: SolverJson {
                iterations: self.solver_iterations,
                gap: self.solver_gap,
            },
            grid_size: self.grid_size,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for DesignResult {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = DesignResultJson::deserialize(d)?;
        let fixed_side = j.mode.fixed_side();
        let (fixed, free) = match fixed_side {
            Side::Rho => (j.rho, j.lambda),
            Side::Lambda => (j.lambda, j.rho),
        };
        let fixed = fixed.ok_or_else(|| serde::de::Error::missing_field(match fixed_side {
            Side::Rho => "rho",
            Side::Lambda => "lambda",
        }))?;
        Ok(DesignResult {
            mode: j.mode,
            method: j.method,
            fixed_side: fixed,
            free_side: free,
            t_star: j.t_star,
            objective: j.objective,
            rate: j.rate,
            epsilon_used: j.epsilon,
            delta: j.delta,
            certificate: j.certificate,
            solver_status: j.status,
            solver_iterations: j.solver.iterations,
            solver_gap: j.solver.gap,
            de_verification: j.de,
            grid_size: j.grid_size,
        })
    }
}

fn failed(problem: &DesignProblem, method: Method, status: SolveStatus, iterations: usize, gap: f64) -> DesignResult {
    DesignResult {
        mode: problem.mode,
        method,
        fixed_side: problem.fixed_side.clone(),
        free_side: None,
        t_star: None,
        objective: None,
        rate: None,
        epsilon_used: None,
        delta: None,
        certificate: None,
        solver_status: status,
        solver_iterations: iterations,
        solver_gap: gap,
        de_verification: None,
        grid_size: None,
    }
}

/// Builds the reported design from raw solver variables and runs the
/// density-evolution cross-check.
fn design_from_solution(
    problem: &DesignProblem,
    method: Method,
    z: &[f64],
    objective: f64,
    iterations: usize,
    gap: f64,
) -> DesignResult {
    let nw = problem.n_weights();
    let weights: BTreeMap<usize, f64> = (2..=problem.max_free_degree).zip(z[..nw].iter().copied()).collect();
    let free = DegreeDistribution::new_unchecked(problem.free_side(), weights).pruned(PRUNE_TOL);
    let t_star = problem.has_t().then(|| z[nw]);
    let epsilon = match t_star {
        Some(t) => 1.0 / t,
        None => problem.epsilon.expect("validated"),
    };
    let mut out = failed(problem, method, SolveStatus::Optimal, iterations, gap);
    out.free_side = Some(free);
    out.t_star = t_star;
    out.objective = Some(match problem.mode {
        DesignMode::MaxRateVariableSide => -objective,
        _ => objective,
    });
    out.epsilon_used = Some(epsilon);
    let ens = out.ensemble().expect("free side set");
    let rate = ens.rate();
    out.rate = Some(rate);
    out.delta = capacity_gap(rate, epsilon).ok();
    let report = DeReport::run(
        &ens.lambda.to_poly(),
        &ens.rho.to_poly(),
        epsilon - DE_MARGIN,
        |x| out.constraint_value(x).expect("design set"),
        VERIFY_GRID,
    );
    out.de_verification = Some(report);
    out
}

/// True when density evolution corroborates the reported threshold.
pub fn de_confirms(result: &DesignResult) -> bool {
    let (Some(de), Some(eps)) = (&result.de_verification, result.epsilon_used) else {
        return false;
    };
    let threshold_ok = match result.mode {
        DesignMode::MaxThreshold => (de.threshold_estimate - eps).abs() <= THRESHOLD_TOL,
        _ => de.threshold_estimate >= eps - THRESHOLD_TOL,
    };
    de.converged && threshold_ok && de.grid_min >= -GRID_TOL
}

/// Solves a design problem through its exact SDP formulation.
///
/// An `Optimal` status is only reported when the Gram certificate is
/// accepted and density evolution confirms the threshold; otherwise the
/// status becomes `NumericalFailure` and the candidate is kept for
/// inspection.
pub fn solve_design(problem: &DesignProblem, settings: &SolverSettings) -> Result<DesignResult> {
    problem.validate()?;
    if problem.mode == DesignMode::MinGap {
        return solve_min_gap(problem, settings);
    }
    let program = design_program(problem)?;
    let out = program.solve(settings)?;
    log::debug!(
        "{:?}: status {:?} after {} iterations, objective {}",
        problem.mode,
        out.status,
        out.iterations,
        out.objective
    );
    let status = match out.status {
        SolveStatus::Unbounded => SolveStatus::NumericalFailure,
        s => s,
    };
    if status != SolveStatus::Optimal {
        return Ok(failed(problem, Method::Sdp, status, out.iterations, out.gap));
    }
    let mut result = design_from_solution(problem, Method::Sdp, &out.z, out.objective, out.iterations, out.gap);
    result.certificate = out.certificate;
    let certified = result.certificate.as_ref().is_some_and(GramCertificate::is_valid);
    if !certified || !de_confirms(&result) {
        result.solver_status = SolveStatus::NumericalFailure;
    }
    Ok(result)
}

/// Solves the grid relaxation of a design problem as a linear program.
pub fn solve_baseline_lp(problem: &DesignProblem, settings: &SolverSettings) -> Result<DesignResult> {
    problem.validate()?;
    if problem.mode == DesignMode::MinGap {
        return Err(Error::Config("the grid baseline does not support min-gap".into()));
    }
    let program = design_program(problem)?;
    let out = program.solve_on_grid(problem.grid_size, settings)?;
    let mut result = if out.status == SolveStatus::Optimal {
        design_from_solution(problem, Method::GridLp, &out.z, out.objective, out.iterations, out.gap)
    } else {
        failed(problem, Method::GridLp, out.status, out.iterations, out.gap)
    };
    result.grid_size = Some(problem.grid_size);
    Ok(result)
}

/// Golden-section search over ε for the rate-optimal design with the
/// smallest capacity gap, bracketed by half and all of the best threshold.
fn solve_min_gap(problem: &DesignProblem, settings: &SolverSettings) -> Result<DesignResult> {
    let stage = DesignProblem {
        mode: DesignMode::MaxThreshold,
        ..problem.clone()
    };
    let threshold = solve_design(&stage, settings)?;
    let Some(eps_max) = threshold.epsilon_used.filter(|_| threshold.is_optimal()) else {
        return Ok(DesignResult {
            mode: DesignMode::MinGap,
            ..threshold
        });
    };
    let rate_at = |eps: f64| -> Result<(f64, SosOutcome)> {
        let p = DesignProblem {
            mode: DesignMode::MaxRateVariableSide,
            epsilon: Some(eps),
            ..problem.clone()
        };
        let out = design_program(&p)?.solve(settings)?;
        let gap = if out.status == SolveStatus::Optimal {
            let inv = problem.fixed_side.inv_avg();
            1.0 - (1.0 + inv / out.objective) / (1.0 - eps)
        } else {
            f64::INFINITY
        };
        Ok((gap, out))
    };
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (0.5 * eps_max, eps_max * (1.0 - 1e-4));
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let mut f1 = rate_at(x1)?.0;
    let mut f2 = rate_at(x2)?.0;
    while hi - lo > GOLDEN_TOL {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = rate_at(x1)?.0;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = rate_at(x2)?.0;
        }
    }
    let best = if f1 <= f2 { x1 } else { x2 };
    log::debug!("min-gap: epsilon {best} within [{lo}, {hi}]");
    let rate_problem = DesignProblem {
        mode: DesignMode::MaxRateVariableSide,
        epsilon: Some(best),
        ..problem.clone()
    };
    let result = solve_design(&rate_problem, settings)?;
    Ok(DesignResult {
        mode: DesignMode::MinGap,
        ..result
    })
}

/// `min a` subject to `a x² + b x + c ≥ 0` on `[0, 1]`, with `a` free.
pub fn min_leading_coefficient(b: f64, c: f64) -> SosProgram {
    let base = AffinePoly::from_constant(&Poly::new(vec![c, b]), 1);
    let lead = AffinePoly::from_var_term(&Poly::monomial(1.0, 2), 0, 1).expect("one variable");
    SosProgram::from_constraint(
        &base.add(&lead).expect("same variables"),
        2,
        vec![VarDomain::Free],
        Vec::new(),
        vec![1.0],
    )
    .expect("well-formed program")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rho(d: usize) -> DegreeDistribution<f64> {
        DegreeDistribution::regular(Side::Rho, d).unwrap()
    }

    #[test]
    fn mode_b_minimal_constraint() {
        let p = DesignProblem::max_rate(rho(2), 2, 0.5);
        let q = build_constraint_poly(&p).unwrap();
        assert_eq!(q.substitute(&[1.0]).unwrap().coeffs(), &[0.0, 1.0]);
    }

    #[test]
    fn mode_a_basis() {
        let p = DesignProblem::max_threshold(rho(5), 5);
        let q = build_constraint_poly(&p).unwrap();
        assert_eq!(q.n_vars(), 5);
        let b2 = q.column(1).scale(-1.0);
        let want = [0.0, 4.0, -6.0, 4.0, -1.0];
        for (k, w) in want.iter().enumerate() {
            assert!((b2.coeff(k) - w).abs() < 1e-12);
        }
        assert_eq!(q.column(5).coeffs(), &[0.0, 1.0]);
    }

    #[test]
    fn constraint_vanishes_at_origin() {
        for p in [
            DesignProblem::max_threshold(rho(6), 7),
            DesignProblem::max_rate(rho(4), 4, 0.3),
        ] {
            let q = build_constraint_poly(&p).unwrap();
            assert!(q.coeff_form(0).iter().all(|v| v.abs() < 1e-15));
        }
    }

    #[test]
    fn missing_epsilon_is_config_error() {
        let mut p = DesignProblem::max_rate(rho(4), 4, 0.3);
        p.epsilon = None;
        assert!(matches!(build_constraint_poly(&p), Err(Error::Config(_))));
        let mut a = DesignProblem::max_threshold(rho(4), 4);
        a.epsilon = Some(0.3);
        assert!(matches!(a.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn wrong_fixed_side_rejected() {
        let lam = DegreeDistribution::regular(Side::Lambda, 3).unwrap();
        assert!(DesignProblem::max_threshold(lam, 4).validate().is_err());
    }

    #[test]
    fn example_two_dimensions() {
        let p = assemble_sdp(&DesignProblem::max_threshold(rho(5), 5)).unwrap();
        assert_eq!(p.psd_order, 17);
        assert_eq!(p.n_rows(), 34);
        assert_eq!(p.orthant_dim, 5);
    }

    #[test]
    fn example_one_dimensions() {
        let asm = min_leading_coefficient(1.0, 1.0).assemble().unwrap();
        assert_eq!(asm.problem.psd_order, 3);
        assert_eq!(asm.problem.n_rows(), 5);
    }

    #[test]
    fn affine_solutions_simplex() {
        let eqs = [LinearEquality {
            coeffs: vec![1.0, 1.0, 0.0],
            rhs: 1.0,
        }];
        let (z0, n) = affine_solutions(&eqs, 3).unwrap();
        assert_eq!(z0, vec![1.0, 0.0, 0.0]);
        assert_eq!(n.ncols(), 2);
        let e = DVector::from_vec(vec![1.0, 1.0, 0.0]);
        assert!(n.tr_mul(&e).amax() < 1e-15);
    }

    #[test]
    fn affine_solutions_inconsistent() {
        let eqs = [
            LinearEquality {
                coeffs: vec![1.0, 1.0],
                rhs: 1.0,
            },
            LinearEquality {
                coeffs: vec![2.0, 2.0],
                rhs: 3.0,
            },
        ];
        assert!(affine_solutions(&eqs, 2).is_none());
    }

    #[test]
    fn problem_json_round_trip() {
        let p = DesignProblem::max_rate(rho(6), 7, 0.49);
        let s = serde_json::to_string(&p).unwrap();
        assert!(s.contains("\"mode\":\"max-rate-variable-side\""));
        let back: DesignProblem = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
    }
}
