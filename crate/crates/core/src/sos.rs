//! Nonnegativity on `[0, 1]` through an even polynomial on the real line.
//!
//! For `P` of degree at most `q`, the substitution `x = u²/(1+u²)` with the
//! multiplier `(1+u²)^q` gives
//!
//! ```text
//! Π(u) = (1+u²)^q P(u²/(1+u²)) = Σ_j p_j u^{2j} (1+u²)^{q-j},
//! Π_{2j} = Σ_{i=0}^{j} p_i C(q-i, j-i),   Π_{odd} = 0.
//! ```
//!
//! `P ≥ 0` on `[0, 1]` iff `Π ≥ 0` on ℝ iff `Π` has a positive semidefinite
//! Gram matrix `B` of order `q+1` with `Π_l = Σ_{i+j=l} B_ij`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::{AffinePoly, Poly};
use crate::scalar::{binomial, Scalar};

/// Residual bound, relative to `max(1, max |Π_l|)`.
pub const RESIDUAL_TOL: f64 = 1e-6;
/// Eigenvalue bound, relative to `trace(B) + 1`.
pub const EIGEN_TOL: f64 = 1e-8;

/// Lifted coefficients of a concrete polynomial.
#[derive(Clone, Debug, PartialEq)]
pub struct SosLift<T> {
    pub q: usize,
    /// `Π_0 ..= Π_{2q}` as a polynomial in `u`.
    pub pi: Poly<T>,
}

impl<T> SosLift<T> {
    pub fn gram_dim(&self) -> usize {
        self.q + 1
    }
}

/// Lifted coefficients when `P`'s coefficients are affine in decision variables.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineSosLift<T> {
    pub q: usize,
    pub pi: AffinePoly<T>,
}

impl<T> AffineSosLift<T> {
    pub fn gram_dim(&self) -> usize {
        self.q + 1
    }
}

fn lift_coeffs<T: Scalar>(p: &Poly<T>, q: usize) -> Poly<T> {
    let mut pi = vec![T::zero(); 2 * q + 1];
    for j in 0..=q {
        let mut acc = T::zero();
        for i in 0..=j {
            let pv = p.coeff(i);
            if !pv.is_zero() {
                acc += pv * binomial::<T>(q - i, j - i);
            }
        }
        pi[2 * j] = acc;
    }
    Poly::new(pi)
}

fn check_q(q: usize, degree: usize) -> Result<()> {
    if q == 0 || q < degree {
        return Err(Error::Degree { q, degree });
    }
    Ok(())
}

pub fn lift<T: Scalar>(p: &Poly<T>, q: usize) -> Result<SosLift<T>> {
    check_q(q, p.degree())?;
    Ok(SosLift {
        q,
        pi: lift_coeffs(p, q),
    })
}

/// The lifting map is linear, so it is applied to every coefficient column.
pub fn lift_affine<T: Scalar>(p: &AffinePoly<T>, q: usize) -> Result<AffineSosLift<T>> {
    let degree = (0..=p.n_vars())
        .map(|c| p.column(c).degree())
        .max()
        .unwrap_or(0);
    check_q(q, degree)?;
    Ok(AffineSosLift {
        q,
        pi: p.map_columns(|col| lift_coeffs(col, q)),
    })
}

/// Index pairs `(i, j)`, `i ≤ j ≤ q`, on the anti-diagonal `i + j = l`.
pub fn antidiagonal(q: usize, l: usize) -> impl Iterator<Item = (usize, usize)> {
    let lo = l.saturating_sub(q);
    (lo..=l / 2).map(move |i| (i, l - i))
}

/// One equation `Σ_terms weight * B_ij = rhs` over the upper triangle of `B`.
#[derive(Clone, Debug, PartialEq)]
pub struct GramEquation<T> {
    pub l: usize,
    /// `(i, j, weight)` with `i ≤ j`; off-diagonal weights are 2.
    pub terms: Vec<(usize, usize, T)>,
    pub rhs: T,
}

pub fn gram_constraints<T: Scalar>(lift: &SosLift<T>) -> Vec<GramEquation<T>> {
    let two = T::lit(2.0);
    (0..=2 * lift.q)
        .map(|l| GramEquation {
            l,
            terms: antidiagonal(lift.q, l)
                .map(|(i, j)| (i, j, if i == j { T::one() } else { two }))
                .collect(),
            rhs: lift.pi.coeff(l),
        })
        .collect()
}

/// A Gram matrix offered as proof that a polynomial is nonnegative on `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GramCertificate {
    pub q: usize,
    pub b: DMatrix<f64>,
    pub reconstruction_residual: f64,
    pub min_eigenvalue: f64,
    pub accepted: bool,
}

impl GramCertificate {
    pub fn is_valid(&self) -> bool {
        self.accepted
    }
}

#[derive(Serialize, Deserialize)]
struct CertificateJson {
    q: usize,
    #[serde(rename = "B")]
    b: Vec<f64>,
    residual: f64,
    min_eig: f64,
    accepted: bool,
}

impl Serialize for GramCertificate {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let n = self.b.nrows();
        CertificateJson {
            q: self.q,
            b: (0..n)
                .flat_map(|i| (0..n).map(move |j| (i, j)))
                .map(|(i, j)| self.b[(i, j)])
                .collect(),
            residual: self.reconstruction_residual,
            min_eig: self.min_eigenvalue,
            accepted: self.accepted,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for GramCertificate {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = CertificateJson::deserialize(d)?;
        let n = raw.q + 1;
        if raw.b.len() != n * n {
            return Err(serde::de::Error::custom(format!(
                "B has {} entries, expected {}",
                raw.b.len(),
                n * n
            )));
        }
        Ok(GramCertificate {
            q: raw.q,
            b: DMatrix::from_row_slice(n, n, &raw.b),
            reconstruction_residual: raw.residual,
            min_eigenvalue: raw.min_eig,
            accepted: raw.accepted,
        })
    }
}

/// Checks that `b` reproduces the lift of `p` and is positive semidefinite.
pub fn verify_certificate(p: &Poly<f64>, q: usize, b: &DMatrix<f64>) -> Result<GramCertificate> {
    let lifted = lift(p, q)?;
    verify_lifted(&lifted.pi, q, b)
}

/// Checks `b` against already lifted coefficients `pi` of degree `2q`.
pub fn verify_lifted(pi: &Poly<f64>, q: usize, b: &DMatrix<f64>) -> Result<GramCertificate> {
    let n = q + 1;
    if b.nrows() != n || b.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: b.nrows().max(b.ncols()),
        });
    }
    let mut residual = 0.0_f64;
    let mut scale = 1.0_f64;
    for l in 0..=2 * q {
        let target = pi.coeff(l);
        scale = scale.max(target.abs());
        let lo = l.saturating_sub(q);
        let hi = l.min(q);
        let sum: f64 = (lo..=hi).map(|i| b[(i, l - i)]).sum();
        residual = residual.max((target - sum).abs());
    }
    let sym = (b + b.transpose()) * 0.5;
    let trace = sym.trace();
    let min_eig = SymmetricEigen::new(sym).eigenvalues.min();
    let accepted = residual <= RESIDUAL_TOL * scale && min_eig >= -EIGEN_TOL * (trace + 1.0);
    Ok(GramCertificate {
        q,
        b: b.clone(),
        reconstruction_residual: residual,
        min_eigenvalue: min_eig,
        accepted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lift_constant() {
        let l = lift(&Poly::<f64>::one(), 1).unwrap();
        assert_eq!(l.pi.coeffs(), &[1.0, 0.0, 1.0]);
        assert_eq!(l.gram_dim(), 2);
    }

    #[test]
    fn lift_quadratic_with_free_coefficient() {
        // f = a x² + x + 1, a as the single decision variable
        let f = AffinePoly::from_constant(&Poly::new(vec![1.0, 1.0]), 1)
            .add(&AffinePoly::from_var_term(&Poly::monomial(1.0, 2), 0, 1).unwrap())
            .unwrap();
        let l = lift_affine(&f, 2).unwrap();
        assert_eq!(l.pi.coeff_form(0), vec![1.0, 0.0]);
        assert_eq!(l.pi.coeff_form(1), vec![0.0, 0.0]);
        assert_eq!(l.pi.coeff_form(2), vec![3.0, 0.0]);
        assert_eq!(l.pi.coeff_form(3), vec![0.0, 0.0]);
        assert_eq!(l.pi.coeff_form(4), vec![2.0, 1.0]);
    }

    #[test]
    fn lift_rejects_small_q() {
        let p = Poly::new(vec![1.0, 0.0, 1.0]);
        assert_eq!(lift(&p, 1), Err(Error::Degree { q: 1, degree: 2 }));
        assert!(lift(&Poly::<f64>::one(), 0).is_err());
    }

    #[test]
    fn lifted_prefix_dependence() {
        // Π_{2j} only sees p_0..p_j
        let a = Poly::new(vec![0.3, -1.0, 2.0, 0.5]);
        let mut b_coeffs = a.coeffs().to_vec();
        b_coeffs[3] = -7.0;
        let b = Poly::new(b_coeffs);
        let la = lift(&a, 3).unwrap();
        let lb = lift(&b, 3).unwrap();
        for l in 0..6 {
            assert_eq!(la.pi.coeff(l), lb.pi.coeff(l));
        }
        assert_ne!(la.pi.coeff(6), lb.pi.coeff(6));
    }

    #[test]
    fn gram_constraints_order_two() {
        let l = lift(&Poly::<f64>::one(), 1).unwrap();
        let eqs = gram_constraints(&l);
        assert_eq!(eqs.len(), 3);
        assert_eq!(eqs[0].terms, vec![(0, 0, 1.0)]);
        assert_eq!(eqs[1].terms, vec![(0, 1, 2.0)]);
        assert_eq!(eqs[2].terms, vec![(1, 1, 1.0)]);
        assert_eq!(eqs.iter().map(|e| e.rhs).collect::<Vec<_>>(), vec![1.0, 0.0, 1.0]);
    }

    #[test]
    fn gram_constraints_example_one_shape() {
        // a = 0 instance of (a+2)u⁴ + 3u² + 1
        let l = lift(&Poly::new(vec![1.0, 1.0, 0.0]), 2).unwrap();
        let eqs = gram_constraints(&l);
        assert_eq!(eqs.len(), 5);
        assert_eq!(eqs[0].terms, vec![(0, 0, 1.0)]);
        assert_eq!(eqs[1].terms, vec![(0, 1, 2.0)]);
        assert_eq!(eqs[2].terms, vec![(0, 2, 2.0), (1, 1, 1.0)]);
        assert_eq!(eqs[3].terms, vec![(1, 2, 2.0)]);
        assert_eq!(eqs[4].terms, vec![(2, 2, 1.0)]);
        assert_eq!(eqs[2].rhs, 3.0);
        assert_eq!(eqs[4].rhs, 2.0);
    }

    #[test]
    fn square_of_one_plus_u_squared() {
        // P ≡ 1, q = 2: Π = (1+u²)², certified by diag(1, 2, 1)
        let b = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0, 1.0]));
        let cert = verify_certificate(&Poly::<f64>::one(), 2, &b).unwrap();
        assert!(cert.is_valid());
        assert_eq!(cert.reconstruction_residual, 0.0);
        let eqs = gram_constraints(&lift(&Poly::<f64>::one(), 2).unwrap());
        for e in eqs {
            let s: f64 = e.terms.iter().map(|&(i, j, w)| w * b[(i, j)]).sum();
            assert_eq!(s, e.rhs);
        }
    }

    #[test]
    fn verify_identity_certificate() {
        let cert = verify_certificate(&Poly::<f64>::one(), 1, &DMatrix::identity(2, 2)).unwrap();
        assert!(cert.is_valid());
        assert_eq!(cert.min_eigenvalue, 1.0);
    }

    #[test]
    fn negative_constant_has_no_certificate() {
        for b in [DMatrix::identity(2, 2), DMatrix::zeros(2, 2)] {
            let cert = verify_certificate(&Poly::<f64>::constant(-1.0), 1, &b).unwrap();
            assert!(!cert.is_valid());
            assert!(cert.reconstruction_residual >= 1.0);
        }
    }

    #[test]
    fn indefinite_matrix_rejected() {
        // reproduces Π = 1 + u² exactly but is not PSD
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 3.0, -3.0, 1.0]);
        let good_residual = verify_certificate(&Poly::<f64>::one(), 1, &b).unwrap();
        assert_eq!(good_residual.reconstruction_residual, 0.0);
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 3.0, 3.0, 1.0]);
        let c = verify_certificate(&Poly::<f64>::one(), 1, &b).unwrap();
        assert!(c.reconstruction_residual > 1.0);
        let b = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 2.0, 0.0, -2.0, 0.0, 2.0, 0.0, 1.0]);
        // Π = 1 + 2u² + u⁴ reproduced, eigenvalues include -2 and -1
        let c = verify_certificate(&Poly::<f64>::one(), 2, &b).unwrap();
        assert_eq!(c.reconstruction_residual, 0.0);
        assert!(c.min_eigenvalue < 0.0);
        assert!(!c.is_valid());
    }

    #[test]
    fn dimension_mismatch() {
        assert!(matches!(
            verify_certificate(&Poly::<f64>::one(), 2, &DMatrix::identity(2, 2)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn certificate_json_keys() {
        let cert = verify_certificate(&Poly::<f64>::one(), 1, &DMatrix::identity(2, 2)).unwrap();
        let v = serde_json::to_value(&cert).unwrap();
        assert_eq!(v["q"], 1);
        assert_eq!(v["B"].as_array().unwrap().len(), 4);
        assert!(v.get("residual").is_some() && v.get("min_eig").is_some());
        let back: GramCertificate = serde_json::from_value(v).unwrap();
        assert_eq!(back, cert);
    }
}
