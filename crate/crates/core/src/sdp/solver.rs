use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen, SVD};

use super::{smat, svec, svec_len, ConicProblem, ConicSolution, IterationStats, SolveStatus, SolverSettings};
use crate::error::{Error, Result};

/// Steps below this count as no progress.
const STALL_STEP: f64 = 1e-10;
const STALL_LIMIT: usize = 5;
const REFINE_STEPS: usize = 10;
const REFINE_TOL: f64 = 1e-15;

/// Symmetric PSD-part of one equation row, as `(k, l, value)` entries of the
/// matrix `A_r` with `k ≤ l`.
type PsdRow = Vec<(usize, usize, f64)>;

struct Workspace {
    a: DMatrix<f64>,
    b: DVector<f64>,
    c: DVector<f64>,
    n0: usize,
    m: usize,
    psd_rows: Vec<PsdRow>,
}

/// Nesterov-Todd scaling at the current iterate.
struct Scaling {
    /// `x / s` on the orthant.
    d: DVector<f64>,
    /// `R` with `R⁻¹ X R⁻ᵀ = Rᵀ S R = Λ`.
    r: DMatrix<f64>,
    r_inv: DMatrix<f64>,
    /// `W = R Rᵀ`, so that `W S W = X`.
    w: DMatrix<f64>,
    lambda: DVector<f64>,
    lx_inv: DMatrix<f64>,
    ls_inv: DMatrix<f64>,
}

impl Workspace {
    fn psd_of<'v>(&self, v: &'v DVector<f64>) -> &'v [f64] {
        &v.as_slice()[self.n0..]
    }

    fn nu(&self) -> f64 {
        (self.n0 + self.m) as f64
    }

    /// `[d ⊙ v_o ; svec(W smat(v_p) W)]`
    fn apply_scaling(&self, sc: &Scaling, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(v.len());
        for i in 0..self.n0 {
            out[i] = sc.d[i] * v[i];
        }
        if self.m > 0 {
            let vm = smat(self.psd_of(v), self.m);
            let wvw = &sc.w * vm * &sc.w;
            out.rows_mut(self.n0, svec_len(self.m)).copy_from(&svec(&wvw));
        }
        out
    }

    fn scaling(&self, x: &DVector<f64>, s: &DVector<f64>) -> Option<Scaling> {
        let d = DVector::from_iterator(self.n0, (0..self.n0).map(|i| x[i] / s[i]));
        if self.m == 0 {
            let empty = DMatrix::zeros(0, 0);
            return Some(Scaling {
                d,
                r: empty.clone(),
                r_inv: empty.clone(),
                w: empty.clone(),
                lambda: DVector::zeros(0),
                lx_inv: empty.clone(),
                ls_inv: empty,
            });
        }
        let xm = smat(self.psd_of(x), self.m);
        let sm = smat(self.psd_of(s), self.m);
        let lx = Cholesky::new(xm)?.l();
        let ls = Cholesky::new(sm)?.l();
        let id = DMatrix::<f64>::identity(self.m, self.m);
        let lx_inv = lx.solve_lower_triangular(&id)?;
        let ls_inv = ls.solve_lower_triangular(&id)?;
        let svd = SVD::new(ls.transpose() * &lx, false, true);
        let v = svd.v_t?.transpose();
        let lambda = svd.singular_values;
        if lambda.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
            return None;
        }
        let inv_sqrt = DMatrix::from_diagonal(&lambda.map(|l| 1.0 / l.sqrt()));
        let sqrt = DMatrix::from_diagonal(&lambda.map(f64::sqrt));
        let r = &lx * &v * inv_sqrt;
        let r_inv = sqrt * v.transpose() * &lx_inv;
        let w = &r * r.transpose();
        Some(Scaling {
            d,
            r,
            r_inv,
            w,
            lambda,
            lx_inv,
            ls_inv,
        })
    }

    /// Rows of `A` in NT-scaled coordinates: `√d ⊙ a_o` on the orthant and
    /// `svec(Rᵀ A_i R)` on the block.
    fn scaled_rows(&self, sc: &Scaling) -> DMatrix<f64> {
        let rows = self.a.nrows();
        let mut out = DMatrix::zeros(rows, self.a.ncols());
        for j in 0..self.n0 {
            let f = sc.d[j].sqrt();
            for i in 0..rows {
                out[(i, j)] = f * self.a[(i, j)];
            }
        }
        if self.m > 0 {
            let m = self.m;
            let rt = sc.r.transpose();
            let mut u = DMatrix::<f64>::zeros(m, m);
            for i in 0..rows {
                if self.psd_rows[i].is_empty() {
                    continue;
                }
                u.fill(0.0);
                for &(k, l, v) in &self.psd_rows[i] {
                    let coef = if k == l { 0.5 * v } else { v };
                    u.ger(coef, &rt.column(k), &rt.column(l), 1.0);
                }
                let t = &u + u.transpose();
                out.view_mut((i, self.n0), (1, svec_len(m)))
                    .copy_from(&svec(&t).transpose());
            }
        }
        out
    }

    /// `ΔX ↦ [Δx_o / √d ; svec(R⁻¹ ΔX R⁻ᵀ)]`
    fn scale_primal(&self, sc: &Scaling, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(v.len());
        for i in 0..self.n0 {
            out[i] = v[i] / sc.d[i].sqrt();
        }
        if self.m > 0 {
            let t = &sc.r_inv * smat(self.psd_of(v), self.m) * sc.r_inv.transpose();
            out.rows_mut(self.n0, svec_len(self.m)).copy_from(&svec(&t));
        }
        out
    }

    /// Inverse of [`Self::scale_primal`].
    fn unscale_primal(&self, sc: &Scaling, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(v.len());
        for i in 0..self.n0 {
            out[i] = v[i] * sc.d[i].sqrt();
        }
        if self.m > 0 {
            let t = &sc.r * smat(self.psd_of(v), self.m) * sc.r.transpose();
            out.rows_mut(self.n0, svec_len(self.m)).copy_from(&svec(&t));
        }
        out
    }

    /// `ΔS ↦ [√d ⊙ Δs_o ; svec(Rᵀ ΔS R)]`
    fn scale_dual(&self, sc: &Scaling, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(v.len());
        for i in 0..self.n0 {
            out[i] = v[i] * sc.d[i].sqrt();
        }
        if self.m > 0 {
            let t = sc.r.transpose() * smat(self.psd_of(v), self.m) * &sc.r;
            out.rows_mut(self.n0, svec_len(self.m)).copy_from(&svec(&t));
        }
        out
    }

    fn factor(&self, sc: &Scaling) -> std::result::Result<Option<NewtonFactor>, f64> {
        if self.a.nrows() == 0 {
            return Ok(None);
        }
        let qr = self.scaled_rows(sc).transpose().qr();
        let r = qr.r();
        let diag = r.diagonal().map(f64::abs);
        let (hi, lo) = (diag.max(), diag.min());
        if !(lo > 0.0) || !hi.is_finite() {
            return Err((hi / lo.max(f64::MIN_POSITIVE)).powi(2));
        }
        Ok(Some(NewtonFactor { q: qr.q(), r }))
    }

    /// Solves `A ΔX = r_p`, `Aᵀ Δy + ΔS = r_d`, `ΔX + W ΔS W = E`.
    fn newton(
        &self,
        factor: &Option<NewtonFactor>,
        sc: &Scaling,
        e: &DVector<f64>,
        rp: &DVector<f64>,
        rd: &DVector<f64>,
    ) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
        let Some(f) = factor else {
            let ds = rd.clone();
            let dx = e - self.apply_scaling(sc, &ds);
            return (dx, DVector::zeros(0), ds);
        };
        let v = self.scale_primal(sc, e) - self.scale_dual(sc, rd);
        let w = f.solve_rt(rp) - f.q.tr_mul(&v);
        let mut dy = f.solve_r(&w);
        let mut dx = self.unscale_primal(sc, &(v + &f.q * w));
        let mut ds = rd - self.a.transpose() * &dy;
        // iterative refinement of the primal equations
        let mut err = rp - &self.a * &dx;
        let mut err_norm = inf_norm(&err);
        for _ in 0..REFINE_STEPS {
            if err_norm <= REFINE_TOL * (1.0 + inf_norm(rp)) {
                break;
            }
            let w = f.solve_rt(&err);
            let fix = f.solve_r(&w);
            let next_dx = &dx + self.unscale_primal(sc, &(&f.q * w));
            let next_err = rp - &self.a * &next_dx;
            let next_norm = inf_norm(&next_err);
            if next_norm >= err_norm {
                break;
            }
            dx = next_dx;
            ds -= self.a.transpose() * &fix;
            dy += fix;
            err = next_err;
            err_norm = next_norm;
        }
        (dx, dy, ds)
    }

    fn max_step(&self, v: &DVector<f64>, dv: &DVector<f64>, l_inv: &DMatrix<f64>) -> f64 {
        let mut alpha = f64::INFINITY;
        for i in 0..self.n0 {
            if dv[i] < 0.0 {
                alpha = alpha.min(-v[i] / dv[i]);
            }
        }
        if self.m > 0 {
            let dm = smat(self.psd_of(dv), self.m);
            let mut t = l_inv * dm * l_inv.transpose();
            t = (&t + t.transpose()) * 0.5;
            let min_eig = SymmetricEigen::new(t).eigenvalues.min();
            if min_eig < 0.0 {
                alpha = alpha.min(-1.0 / min_eig);
            }
        }
        alpha
    }

    /// Right-hand side `E` of `ΔX + W ΔS W = E` for the symmetrized
    /// complementarity target `σμ I - Λ² - corr`.
    fn complementarity_rhs(
        &self,
        sc: &Scaling,
        x: &DVector<f64>,
        s: &DVector<f64>,
        sigma_mu: f64,
        affine: Option<(&DVector<f64>, &DVector<f64>)>,
    ) -> DVector<f64> {
        let mut e = DVector::zeros(x.len());
        for i in 0..self.n0 {
            let corr = affine.map_or(0.0, |(dx, ds)| dx[i] * ds[i]);
            e[i] = (sigma_mu - x[i] * s[i] - corr) / s[i];
        }
        if self.m > 0 {
            let m = self.m;
            let mut g = DMatrix::<f64>::from_diagonal(&sc.lambda.map(|l| sigma_mu - l * l));
            if let Some((dx, ds)) = affine {
                let dxt = &sc.r_inv * smat(self.psd_of(dx), m) * sc.r_inv.transpose();
                let dst = sc.r.transpose() * smat(self.psd_of(ds), m) * &sc.r;
                let h = dxt * dst;
                g -= (&h + h.transpose()) * 0.5;
            }
            let dmat = DMatrix::from_fn(m, m, |i, j| 2.0 * g[(i, j)] / (sc.lambda[i] + sc.lambda[j]));
            let emat = &sc.r * dmat * sc.r.transpose();
            e.rows_mut(self.n0, svec_len(m)).copy_from(&svec(&emat));
        }
        e
    }
}

/// Thin QR factors of the scaled constraint matrix, `Ãᵀ = Q R`.
struct NewtonFactor {
    q: DMatrix<f64>,
    r: DMatrix<f64>,
}

impl NewtonFactor {
    fn solve_r(&self, v: &DVector<f64>) -> DVector<f64> {
        self.r.solve_upper_triangular(v).expect("nonzero pivots checked at factorization")
    }

    fn solve_rt(&self, v: &DVector<f64>) -> DVector<f64> {
        self.r
            .tr_solve_upper_triangular(v)
            .expect("nonzero pivots checked at factorization")
    }
}

/// Indices of a maximal set of linearly independent rows (modified
/// Gram-Schmidt with a relative tolerance).
fn independent_rows(a: &DMatrix<f64>) -> Vec<usize> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut keep = Vec::new();
    for r in 0..a.nrows() {
        let row = a.row(r).transpose();
        let norm0 = row.norm();
        if norm0 == 0.0 {
            continue;
        }
        let mut v = row.clone();
        for q in &basis {
            let proj = q.dot(&v);
            v.axpy(-proj, q, 1.0);
        }
        let norm = v.norm();
        if norm > 1e-10 * norm0 {
            basis.push(v / norm);
            keep.push(r);
        }
    }
    keep
}

fn inf_norm(v: &DVector<f64>) -> f64 {
    v.amax()
}

/// Solves a conic problem; see the module docs for the standard form.
pub fn solve(p: &ConicProblem, settings: &SolverSettings) -> Result<ConicSolution> {
    let n = p.n_vars();
    if p.c.len() != n || p.a.ncols() != n || p.a.nrows() != p.b.len() {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: p.a.ncols(),
        });
    }

    let keep = independent_rows(&p.a);
    if keep.len() < p.a.nrows() {
        log::warn!(
            "dropping {} linearly dependent equality rows",
            p.a.nrows() - keep.len()
        );
    }
    let row_scale: Vec<f64> = keep.iter().map(|&r| 1.0 / p.a.row(r).norm()).collect();
    let a = DMatrix::from_fn(keep.len(), n, |i, j| p.a[(keep[i], j)] * row_scale[i]);
    let b = DVector::from_fn(keep.len(), |i, _| p.b[keep[i]] * row_scale[i]);
    let m = p.psd_order;
    let n0 = p.orthant_dim;
    let psd_rows = (0..a.nrows())
        .map(|r| {
            let mut entries = Vec::new();
            let mut k = n0;
            for i in 0..m {
                for j in i..m {
                    let v = a[(r, k)];
                    if v != 0.0 {
                        entries.push((i, j, if i == j { v } else { v / std::f64::consts::SQRT_2 }));
                    }
                    k += 1;
                }
            }
            entries
        })
        .collect();
    let ws = Workspace {
        a,
        b,
        c: p.c.clone(),
        n0,
        m,
        psd_rows,
    };

    let nu = ws.nu().max(1.0);
    let unit = {
        let mut e = DVector::zeros(n);
        for i in 0..n0 {
            e[i] = 1.0;
        }
        if m > 0 {
            e.rows_mut(n0, svec_len(m))
                .copy_from(&svec(&DMatrix::identity(m, m)));
        }
        e
    };
    let rows = ws.a.nrows();
    let row_ratio = (0..rows)
        .map(|r| (1.0 + ws.b[r].abs()) / (1.0 + ws.a.row(r).norm()))
        .fold(0.0_f64, f64::max);
    let xi = 10.0_f64.max(nu.sqrt()).max(nu * row_ratio);
    let eta = 10.0_f64.max(nu.sqrt()).max(inf_norm(&ws.c)).max(1.0);
    let mut x = &unit * xi;
    let mut s = &unit * eta;
    let mut y = if rows > 0 {
        let aat = &ws.a * ws.a.transpose();
        match Cholesky::new(aat) {
            Some(ch) => {
                let ls = ch.solve(&(&ws.a * (&ws.c - &s)));
                ls
            }
            None => DVector::zeros(rows),
        }
    } else {
        DVector::zeros(0)
    };

    let b_norm = inf_norm(&p.b);
    let c_norm = inf_norm(&p.c);
    let mut status = SolveStatus::MaxIterations;
    let mut iterations = 0;
    let mut history = Vec::new();
    let mut condition_estimate = None;
    let mut stalled = 0;

    loop {
        let rp = &ws.b - &ws.a * &x;
        let rd = &ws.c - ws.a.transpose() * &y - &s;
        let pobj = ws.c.dot(&x);
        let dobj = ws.b.dot(&y);
        let pres = (0..rows)
            .map(|i| (rp[i] / row_scale[i]).abs())
            .fold(0.0, f64::max)
            / (1.0 + b_norm);
        let dres = inf_norm(&rd) / (1.0 + c_norm);
        let comp = x.dot(&s);
        let mu = comp / nu;
        let gap = (pobj - dobj).abs().max(comp.abs());

        if pres <= settings.feas_tol
            && dres <= settings.feas_tol
            && gap <= settings.gap_tol * (1.0 + pobj.abs())
        {
            status = SolveStatus::Optimal;
            break;
        }
        let aty_s = ws.a.transpose() * &y + &s;
        if dobj > 0.0 && inf_norm(&aty_s) / dobj <= settings.feas_tol {
            status = SolveStatus::Infeasible;
            break;
        }
        if pobj < 0.0 && inf_norm(&(&ws.a * &x)) / (-pobj) <= settings.feas_tol {
            status = SolveStatus::Unbounded;
            break;
        }
        if iterations >= settings.max_iter {
            break;
        }
        if stalled >= STALL_LIMIT {
            log::debug!("interior-point iteration stalled at iteration {iterations}");
            break;
        }

        let Some(sc) = ws.scaling(&x, &s) else {
            status = SolveStatus::NumericalFailure;
            break;
        };
        let factor = match ws.factor(&sc) {
            Ok(f) => f,
            Err(cond) => {
                condition_estimate = Some(cond);
                status = SolveStatus::NumericalFailure;
                break;
            }
        };

        // predictor
        let e_aff = ws.complementarity_rhs(&sc, &x, &s, 0.0, None);
        let (dx_a, _dy_a, ds_a) = ws.newton(&factor, &sc, &e_aff, &rp, &rd);
        let ap = ws.max_step(&x, &dx_a, &sc.lx_inv).min(1.0);
        let ad = ws.max_step(&s, &ds_a, &sc.ls_inv).min(1.0);
        let mu_aff = (&x + &dx_a * ap).dot(&(&s + &ds_a * ad)) / nu;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        // corrector
        let e = ws.complementarity_rhs(&sc, &x, &s, sigma * mu, Some((&dx_a, &ds_a)));
        let (dx, dy, ds) = ws.newton(&factor, &sc, &e, &rp, &rd);
        if !(dx.iter().all(|v| v.is_finite()) && ds.iter().all(|v| v.is_finite())) {
            status = SolveStatus::NumericalFailure;
            break;
        }
        let ap = (settings.step_factor * ws.max_step(&x, &dx, &sc.lx_inv)).min(1.0);
        let ad = (settings.step_factor * ws.max_step(&s, &ds, &sc.ls_inv)).min(1.0);

        x.axpy(ap, &dx, 1.0);
        y.axpy(ad, &dy, 1.0);
        s.axpy(ad, &ds, 1.0);
        iterations += 1;
        stalled = if ap < STALL_STEP && ad < STALL_STEP { stalled + 1 } else { 0 };

        history.push(IterationStats {
            primal_objective: pobj,
            dual_objective: dobj,
            primal_residual: pres,
            dual_residual: dres,
            mu,
            step_primal: ap,
            step_dual: ad,
        });
    }

    let mut y_full = DVector::zeros(p.a.nrows());
    for (i, &r) in keep.iter().enumerate() {
        y_full[r] = y[i] * row_scale[i];
    }
    let pobj = p.c.dot(&x);
    let dobj = p.b.dot(&y_full);
    let pres = inf_norm(&(&p.a * &x - &p.b)) / (1.0 + b_norm);
    let dres = inf_norm(&(p.a.transpose() * &y_full + &s - &p.c)) / (1.0 + c_norm);
    Ok(ConicSolution {
        duality_gap: (pobj - dobj).abs().max(x.dot(&s).abs()),
        x,
        y: y_full,
        s,
        status,
        iterations,
        primal_residual: pres,
        dual_residual: dres,
        primal_objective: pobj,
        dual_objective: dobj,
        condition_estimate,
        history,
    })
}
