//! Dense univariate polynomials with real coefficients, and polynomials whose
//! coefficients are affine forms in a vector of decision variables.
//!
//! Coefficients are stored in ascending powers. Arithmetic never trims
//! trailing zeros; call [`Poly::normalize`] when a canonical representation
//! is needed.

use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Magnitude below which [`Poly::normalize`] treats a trailing coefficient as zero.
pub const TRIM_TOL: f64 = 1e-14;

#[derive(Clone, Debug, PartialEq)]
pub struct Poly<T> {
    coeffs: Vec<T>,
}

impl<T: Scalar> Poly<T> {
    /// Builds a polynomial from ascending coefficients. An empty vector is the
    /// zero polynomial.
    pub fn new(mut coeffs: Vec<T>) -> Self {
        if coeffs.is_empty() {
            coeffs.push(T::zero());
        }
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self::new(vec![T::zero()])
    }

    pub fn one() -> Self {
        Self::constant(T::one())
    }

    pub fn constant(c: T) -> Self {
        Self::new(vec![c])
    }

    /// The identity polynomial `x`.
    pub fn x() -> Self {
        Self::monomial(T::one(), 1)
    }

    /// `c * x^k`
    pub fn monomial(c: T, k: usize) -> Self {
        let mut coeffs = vec![T::zero(); k + 1];
        coeffs[k] = c;
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    /// Coefficient of `x^k`, zero beyond the stored length.
    pub fn coeff(&self, k: usize) -> T {
        self.coeffs.get(k).copied().unwrap_or_else(T::zero)
    }

    /// Largest power with a nonzero coefficient; 0 for the zero polynomial.
    pub fn degree(&self) -> usize {
        self.coeffs
            .iter()
            .rposition(|c| !c.is_zero())
            .unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    /// Drops trailing coefficients with magnitude below [`TRIM_TOL`].
    pub fn normalize(&mut self) {
        let tol = T::lit(TRIM_TOL);
        while self.coeffs.len() > 1 && self.coeffs.last().is_some_and(|c| c.abs() < tol) {
            self.coeffs.pop();
        }
        if self.coeffs.len() == 1 && self.coeffs[0].abs() < tol {
            self.coeffs[0] = T::zero();
        }
    }

    pub fn normalized(mut self) -> Self {
        self.normalize();
        self
    }

    /// Horner evaluation.
    pub fn eval(&self, x: T) -> T {
        self.coeffs
            .iter()
            .rev()
            .fold(T::zero(), |acc, &c| acc * x + c)
    }

    pub fn scale(&self, s: T) -> Self {
        Self::new(self.coeffs.iter().map(|&c| c * s).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        Self::new((0..n).map(|k| self.coeff(k) + other.coeff(k)).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        Self::new((0..n).map(|k| self.coeff(k) - other.coeff(k)).collect())
    }

    /// Coefficient convolution.
    pub fn mul(&self, other: &Self) -> Self {
        let mut out = vec![T::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, &b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::new(out)
    }

    /// `self^n` by repeated squaring; `a^0 = 1`.
    pub fn pow(&self, mut n: u32) -> Self {
        let mut result = Self::one();
        let mut base = self.clone();
        while n > 0 {
            if n & 1 == 1 {
                result = result.mul(&base);
            }
            n >>= 1;
            if n > 0 {
                base = base.mul(&base);
            }
        }
        result
    }

    /// `self(inner(x))`, by Horner's scheme over polynomial arithmetic.
    pub fn compose(&self, inner: &Self) -> Self {
        let (&lead, rest) = self.coeffs.split_last().expect("nonempty coefficients");
        rest.iter()
            .rev()
            .fold(Self::constant(lead), |acc, &c| acc.mul(inner).add(&Self::constant(c)))
    }

    pub fn derivative(&self) -> Self {
        if self.coeffs.len() <= 1 {
            return Self::zero();
        }
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| c * T::from_count(k))
                .collect(),
        )
    }
}

impl<T: Scalar> Add for &Poly<T> {
    type Output = Poly<T>;
    fn add(self, rhs: Self) -> Poly<T> {
        Poly::add(self, rhs)
    }
}

impl<T: Scalar> Sub for &Poly<T> {
    type Output = Poly<T>;
    fn sub(self, rhs: Self) -> Poly<T> {
        Poly::sub(self, rhs)
    }
}

impl<T: Scalar> Mul for &Poly<T> {
    type Output = Poly<T>;
    fn mul(self, rhs: Self) -> Poly<T> {
        Poly::mul(self, rhs)
    }
}

impl<T: Scalar> Neg for &Poly<T> {
    type Output = Poly<T>;
    fn neg(self) -> Poly<T> {
        self.scale(-T::one())
    }
}

/// A polynomial in `x` whose coefficient of `x^k` is an affine form
/// `c_k0 + Σ_v c_kv z_v` in decision variables `z_1..z_n`.
///
/// Stored row-major: row `k` holds `[c_k0, c_k1, .., c_kn]`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffinePoly<T> {
    n_vars: usize,
    forms: Vec<T>,
}

impl<T: Scalar> AffinePoly<T> {
    /// The zero polynomial over `n_vars` variables.
    pub fn zero(n_vars: usize) -> Self {
        Self {
            n_vars,
            forms: vec![T::zero(); n_vars + 1],
        }
    }

    /// A polynomial with no dependence on the decision variables.
    pub fn from_constant(p: &Poly<T>, n_vars: usize) -> Self {
        let mut out = Self::zero(n_vars);
        out.add_poly_to_column(p, 0);
        out
    }

    /// `p(x) * z_var`, with `var` counted from 0.
    pub fn from_var_term(p: &Poly<T>, var: usize, n_vars: usize) -> Result<Self> {
        if var >= n_vars {
            return Err(Error::DimensionMismatch {
                expected: n_vars,
                found: var + 1,
            });
        }
        let mut out = Self::zero(n_vars);
        out.add_poly_to_column(p, var + 1);
        Ok(out)
    }

    /// Builds directly from per-power rows of length `n_vars + 1`.
    pub fn from_rows(rows: Vec<Vec<T>>, n_vars: usize) -> Result<Self> {
        let mut forms = Vec::with_capacity(rows.len().max(1) * (n_vars + 1));
        for row in &rows {
            if row.len() != n_vars + 1 {
                return Err(Error::DimensionMismatch {
                    expected: n_vars + 1,
                    found: row.len(),
                });
            }
            forms.extend_from_slice(row);
        }
        if forms.is_empty() {
            forms = vec![T::zero(); n_vars + 1];
        }
        Ok(Self { n_vars, forms })
    }

    fn width(&self) -> usize {
        self.n_vars + 1
    }

    fn grow_to(&mut self, rows: usize) {
        let need = rows * self.width();
        if self.forms.len() < need {
            self.forms.resize(need, T::zero());
        }
    }

    fn add_poly_to_column(&mut self, p: &Poly<T>, col: usize) {
        self.grow_to(p.coeffs().len());
        let w = self.width();
        for (k, &c) in p.coeffs().iter().enumerate() {
            self.forms[k * w + col] += c;
        }
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    /// Number of stored rows minus one.
    pub fn max_degree(&self) -> usize {
        self.forms.len() / self.width() - 1
    }

    /// Affine form of the coefficient of `x^k`; column 0 is the constant.
    pub fn coeff_form(&self, k: usize) -> Vec<T> {
        let w = self.width();
        if k > self.max_degree() {
            return vec![T::zero(); w];
        }
        self.forms[k * w..(k + 1) * w].to_vec()
    }

    /// Column `col` as a polynomial in `x` (column 0: the constant part).
    pub fn column(&self, col: usize) -> Poly<T> {
        let w = self.width();
        Poly::new(self.forms.iter().skip(col).step_by(w).copied().collect()).normalized()
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.n_vars != other.n_vars {
            return Err(Error::DimensionMismatch {
                expected: self.n_vars,
                found: other.n_vars,
            });
        }
        let mut out = self.clone();
        out.grow_to(other.max_degree() + 1);
        for (o, &v) in out.forms.iter_mut().zip(other.forms.iter()) {
            *o += v;
        }
        Ok(out)
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            n_vars: self.n_vars,
            forms: self.forms.iter().map(|&v| v * s).collect(),
        }
    }

    /// Applies `f` to every column polynomial (the map must be linear for the
    /// result to keep its meaning).
    pub fn map_columns(&self, f: impl Fn(&Poly<T>) -> Poly<T>) -> Self {
        let mut out = Self::zero(self.n_vars);
        for col in 0..self.width() {
            out.add_poly_to_column(&f(&self.column(col)), col);
        }
        out
    }

    /// Evaluates every coefficient form at `z` and returns the normalized
    /// polynomial.
    pub fn substitute(&self, z: &[T]) -> Result<Poly<T>> {
        if z.len() != self.n_vars {
            return Err(Error::DimensionMismatch {
                expected: self.n_vars,
                found: z.len(),
            });
        }
        let w = self.width();
        let coeffs = self
            .forms
            .chunks(w)
            .map(|row| row[0] + row[1..].iter().zip(z).map(|(&a, &b)| a * b).sum::<T>())
            .collect();
        Ok(Poly::new(coeffs).normalized())
    }

    /// `Σ_k (c_k0 + Σ_v c_kv z_v) x^k` evaluated without forming the
    /// substituted polynomial.
    pub fn eval_bilinear(&self, z: &[T], x: T) -> Result<T> {
        if z.len() != self.n_vars {
            return Err(Error::DimensionMismatch {
                expected: self.n_vars,
                found: z.len(),
            });
        }
        let mut acc = self.column(0).eval(x);
        for (v, &zv) in z.iter().enumerate() {
            acc += zv * self.column(v + 1).eval(x);
        }
        Ok(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(c: &[f64]) -> Poly<f64> {
        Poly::new(c.to_vec())
    }

    #[test]
    fn add_disjoint_supports() {
        assert_eq!(p(&[1.0, 1.0]).add(&p(&[0.0, 0.0, 2.0])), p(&[1.0, 1.0, 2.0]));
    }

    #[test]
    fn add_zero_is_identity() {
        let a = p(&[0.5, -1.0, 3.0]);
        assert_eq!(a.add(&Poly::zero()), a);
    }

    #[test]
    fn cancellation_keeps_storage_until_normalized() {
        let s = p(&[1.0, -1.0]).add(&Poly::x());
        assert_eq!(s.degree(), 0);
        assert_eq!(s.coeffs().len(), 2);
        assert_eq!(s.normalized().coeffs(), &[1.0]);
    }

    #[test]
    fn normalize_trims_only_tiny_tail() {
        let mut a = p(&[1.0, 1e-15, 2.0, 5e-15, -1e-16]);
        a.normalize();
        assert_eq!(a.coeffs(), &[1.0, 1e-15, 2.0]);
        let mut z = p(&[1e-16, 0.0]);
        z.normalize();
        assert!(z.is_zero());
        assert_eq!(z.coeffs().len(), 1);
    }

    #[test]
    fn mul_cases() {
        assert_eq!(p(&[1.0, 1.0]).mul(&p(&[1.0, 1.0])), p(&[1.0, 2.0, 1.0]));
        let a = p(&[2.0, 0.0, -3.0]);
        assert_eq!(a.mul(&Poly::one()), a);
        let geometric = p(&[1.0; 5]);
        assert_eq!(p(&[1.0, -1.0]).mul(&geometric), p(&[1.0, 0.0, 0.0, 0.0, 0.0, -1.0]));
    }

    #[test]
    fn pow_cases() {
        let a = p(&[1.0, 1.0]);
        assert_eq!(a.pow(0), Poly::one());
        assert_eq!(a.pow(2), p(&[1.0, 2.0, 1.0]));
        assert_eq!(Poly::<f64>::x().pow(3), Poly::monomial(1.0, 3));
        assert_eq!(a.pow(5).coeffs(), &[1.0, 5.0, 10.0, 10.0, 5.0, 1.0]);
    }

    #[test]
    fn compose_cases() {
        let one_minus_x = p(&[1.0, -1.0]);
        assert_eq!(Poly::monomial(1.0, 2).compose(&one_minus_x), p(&[1.0, -2.0, 1.0]));
        let q = p(&[0.3, -2.0, 0.7]);
        assert_eq!(Poly::x().compose(&q), q);
        assert_eq!(q.compose(&Poly::x()), q);
        assert_eq!(
            Poly::monomial(1.0, 4).compose(&one_minus_x),
            p(&[1.0, -4.0, 6.0, -4.0, 1.0])
        );
    }

    #[test]
    fn eval_cases() {
        assert_eq!(p(&[1.0, 2.0, 1.0]).eval(1.0), 4.0);
        assert_eq!(p(&[7.5, 2.0, 1.0]).eval(0.0), 7.5);
        let q = p(&[1.0, -4.0, 6.0, -4.0, 1.0]);
        assert_eq!(q.eval(0.5), 0.0625);
    }

    #[test]
    fn derivative_of_cubic() {
        assert_eq!(p(&[4.0, 3.0, 2.0, 1.0]).derivative(), p(&[3.0, 4.0, 3.0]));
        assert!(Poly::<f64>::constant(2.0).derivative().is_zero());
    }

    #[test]
    fn works_in_single_precision() {
        let a = Poly::<f32>::new(vec![1.0, -1.0]);
        assert_eq!(a.pow(2).coeffs(), &[1.0f32, -2.0, 1.0]);
        assert_eq!(a.eval(0.25), 0.75);
    }

    #[test]
    fn affine_substitute_direct() {
        // t*x - l1*x^2 with variables (l1, t)
        let a = AffinePoly::from_var_term(&Poly::monomial(-1.0, 2), 0, 2)
            .unwrap()
            .add(&AffinePoly::from_var_term(&Poly::x(), 1, 2).unwrap())
            .unwrap();
        assert_eq!(a.substitute(&[1.0, 2.0]).unwrap(), p(&[0.0, 2.0, -1.0]));
        assert_eq!(a.max_degree(), 2);
        assert_eq!(a.coeff_form(2), vec![0.0, -1.0, 0.0]);
    }

    #[test]
    fn affine_substitute_zero_gives_constant_column() {
        let c = p(&[1.0, 0.5]);
        let a = AffinePoly::from_constant(&c, 3)
            .add(&AffinePoly::from_var_term(&p(&[0.0, 0.0, 4.0]), 2, 3).unwrap())
            .unwrap();
        assert_eq!(a.substitute(&[0.0; 3]).unwrap(), c);
    }

    #[test]
    fn affine_dimension_mismatch() {
        let a = AffinePoly::<f64>::zero(2);
        assert_eq!(
            a.substitute(&[1.0]),
            Err(Error::DimensionMismatch { expected: 2, found: 1 })
        );
        assert!(AffinePoly::from_var_term(&Poly::<f64>::x(), 2, 2).is_err());
        assert!(a.eval_bilinear(&[1.0, 2.0, 3.0], 0.5).is_err());
    }
}
