//! Polynomials on `[0, 1]` in the Bernstein basis
//! `b_{k,n}(x) = C(n, k) x^k (1 - x)^(n - k)`.
//!
//! Products, powers and degree elevation only combine coefficients with
//! nonnegative weights, so high-degree constraints keep their accuracy where
//! the monomial expansion would cancel catastrophically.

use crate::poly::Poly;
use crate::scalar::{binomial, Scalar};

#[derive(Clone, Debug, PartialEq)]
pub struct Bernstein<T> {
    coeffs: Vec<T>,
}

impl<T: Scalar> Bernstein<T> {
    /// Coefficients for degree `coeffs.len() - 1`; an empty vector is the
    /// degree-0 zero polynomial.
    pub fn new(coeffs: Vec<T>) -> Self {
        if coeffs.is_empty() {
            return Self {
                coeffs: vec![T::zero()],
            };
        }
        Self { coeffs }
    }

    pub fn constant(c: T, degree: usize) -> Self {
        Self::new(vec![c; degree + 1])
    }

    /// `x` written in degree `degree ≥ 1`.
    pub fn x(degree: usize) -> Self {
        let n = T::from_count(degree.max(1));
        Self::new((0..=degree.max(1)).map(|k| T::from_count(k) / n).collect())
    }

    /// Converts a monomial polynomial to degree `degree ≥ p.degree()`.
    pub fn from_poly(p: &Poly<T>, degree: usize) -> Self {
        let n = degree.max(p.degree());
        let coeffs = (0..=n)
            .map(|k| {
                (0..=k)
                    .map(|i| p.coeff(i) * binomial::<T>(k, i) / binomial::<T>(n, i))
                    .sum()
            })
            .collect();
        Self::new(coeffs)
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// de Casteljau evaluation.
    pub fn eval(&self, x: T) -> T {
        let mut b = self.coeffs.clone();
        let y = T::one() - x;
        for r in 1..b.len() {
            for k in 0..b.len() - r {
                b[k] = y * b[k] + x * b[k + 1];
            }
        }
        b[0]
    }

    /// `p(1 - x)`.
    pub fn reflect(&self) -> Self {
        Self::new(self.coeffs.iter().rev().copied().collect())
    }

    pub fn scale(&self, s: T) -> Self {
        Self::new(self.coeffs.iter().map(|&c| c * s).collect())
    }

    /// Rewrites in degree `degree ≥ self.degree()`.
    pub fn elevate(&self, degree: usize) -> Self {
        let mut c = self.coeffs.clone();
        while c.len() <= degree {
            let n1 = T::from_count(c.len());
            let mut next = Vec::with_capacity(c.len() + 1);
            next.push(c[0]);
            for k in 1..c.len() {
                let w = T::from_count(k) / n1;
                next.push(w * c[k - 1] + (T::one() - w) * c[k]);
            }
            next.push(*c.last().expect("nonempty"));
            c = next;
        }
        Self::new(c)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        let n = self.degree().max(other.degree());
        let (a, b) = (self.elevate(n), other.elevate(n));
        Self::new(a.coeffs.iter().zip(&b.coeffs).map(|(&x, &y)| f(x, y)).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> Self {
        let (m, n) = (self.degree(), other.degree());
        let mut out = vec![T::zero(); m + n + 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            let wa = binomial::<T>(m, i) * a;
            for (j, &b) in other.coeffs.iter().enumerate() {
                out[i + j] += wa * binomial::<T>(n, j) * b;
            }
        }
        for (k, c) in out.iter_mut().enumerate() {
            *c /= binomial::<T>(m + n, k);
        }
        Self::new(out)
    }

    pub fn pow(&self, mut e: u32) -> Self {
        let mut base = self.clone();
        let mut acc = Self::constant(T::one(), 0);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    pub fn to_poly(&self) -> Poly<T> {
        let n = self.degree();
        let coeffs = (0..=n)
            .map(|i| {
                let s: T = (0..=i)
                    .map(|k| {
                        let term = binomial::<T>(i, k) * self.coeffs[k];
                        if (i - k) % 2 == 0 {
                            term
                        } else {
                            -term
                        }
                    })
                    .sum();
                s * binomial::<T>(n, i)
            })
            .collect();
        Poly::new(coeffs)
    }
}
