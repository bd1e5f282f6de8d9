//! Edge-perspective degree distributions, design rate and capacity gap.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::Poly;
use crate::scalar::Scalar;

/// Tolerance on `Σ fractions = 1`.
pub const SUM_TOL: f64 = 1e-9;

/// Fractions below this are dropped from optimizer output.
pub const PRUNE_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// Variable-node side, λ.
    Lambda,
    /// Check-node side, ρ.
    Rho,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Side::Lambda => f.write_str("lambda"),
            Side::Rho => f.write_str("rho"),
        }
    }
}

/// How a "degree" printed in a report maps to node degrees.
///
/// Node degree `d` multiplies `x^(d-1)`; some tables list the polynomial
/// degree `d - 1` instead.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DegreeConvention {
    #[default]
    NodeDegree,
    PolyDegree,
}

impl DegreeConvention {
    /// Degree as displayed under this convention.
    pub fn display(self, node_degree: usize) -> usize {
        match self {
            DegreeConvention::NodeDegree => node_degree,
            DegreeConvention::PolyDegree => node_degree.saturating_sub(1),
        }
    }

    /// Inverse of [`DegreeConvention::display`].
    pub fn to_node_degree(self, shown: usize) -> usize {
        match self {
            DegreeConvention::NodeDegree => shown,
            DegreeConvention::PolyDegree => shown + 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Violation {
    NegativeFraction { degree: usize, value: f64 },
    SumMismatch { sum: f64 },
    DegreeBelowTwo { degree: usize },
    Empty,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NegativeFraction { degree, value } => {
                write!(f, "negative fraction {value} at degree {degree}")
            }
            Violation::SumMismatch { sum } => write!(f, "fractions sum to {sum}, not 1"),
            Violation::DegreeBelowTwo { degree } => write!(f, "degree {degree} is below 2"),
            Violation::Empty => f.write_str("no degrees"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has_sum_violation_only(&self) -> bool {
        !self.violations.is_empty()
            && self
                .violations
                .iter()
                .all(|v| matches!(v, Violation::SumMismatch { .. }))
    }
}

/// Record of a rescaling applied to bring fractions back onto the simplex.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Renormalization {
    pub original_sum: f64,
}

/// Map from node degree (≥ 2) to the fraction of edges attached to nodes of
/// that degree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct DegreeDistribution<T> {
    side: Side,
    coeffs: BTreeMap<usize, T>,
}

impl<T: Scalar> DegreeDistribution<T> {
    /// Validated constructor.
    pub fn new(side: Side, coeffs: BTreeMap<usize, T>) -> Result<Self> {
        let d = Self::new_unchecked(side, coeffs);
        let report = d.validate();
        if report.is_valid() {
            Ok(d)
        } else {
            Err(Error::InvalidDistribution(
                report
                    .violations
                    .iter()
                    .map(ToString::to_string)
                    .collect::<Vec<_>>()
                    .join("; "),
            ))
        }
    }

    pub fn new_unchecked(side: Side, coeffs: BTreeMap<usize, T>) -> Self {
        Self { side, coeffs }
    }

    pub fn from_pairs(side: Side, pairs: &[(usize, T)]) -> Result<Self> {
        let mut coeffs = BTreeMap::new();
        for &(d, f) in pairs {
            *coeffs.entry(d).or_insert_with(T::zero) += f;
        }
        Self::new(side, coeffs)
    }

    /// All edges on nodes of a single degree.
    pub fn regular(side: Side, degree: usize) -> Result<Self> {
        Self::from_pairs(side, &[(degree, T::one())])
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn coeffs(&self) -> &BTreeMap<usize, T> {
        &self.coeffs
    }

    pub fn fraction(&self, degree: usize) -> T {
        self.coeffs.get(&degree).copied().unwrap_or_else(T::zero)
    }

    pub fn max_degree(&self) -> usize {
        self.coeffs.keys().next_back().copied().unwrap_or(0)
    }

    pub fn sum(&self) -> T {
        self.coeffs.values().copied().sum()
    }

    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        if self.coeffs.is_empty() {
            violations.push(Violation::Empty);
        }
        for (&d, &f) in &self.coeffs {
            if d < 2 {
                violations.push(Violation::DegreeBelowTwo { degree: d });
            }
            if f < T::zero() {
                violations.push(Violation::NegativeFraction {
                    degree: d,
                    value: f.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        let sum = self.sum().to_f64().unwrap_or(f64::NAN);
        if !self.coeffs.is_empty() && (sum - 1.0).abs() > SUM_TOL {
            violations.push(Violation::SumMismatch { sum });
        }
        ValidationReport { violations }
    }

    /// Divides every fraction by the total. Fails for violations other than
    /// the sum.
    pub fn renormalized(&self) -> Result<(Self, Option<Renormalization>)> {
        let report = self.validate();
        if report.is_valid() {
            return Ok((self.clone(), None));
        }
        if !report.has_sum_violation_only() || self.sum() <= T::zero() {
            return Err(Error::InvalidDistribution(format!("{:?}", report.violations)));
        }
        let sum = self.sum();
        let coeffs = self.coeffs.iter().map(|(&d, &f)| (d, f / sum)).collect();
        Ok((
            Self::new_unchecked(self.side, coeffs),
            Some(Renormalization {
                original_sum: sum.to_f64().unwrap_or(f64::NAN),
            }),
        ))
    }

    /// Drops fractions below `threshold` (and non-positive ones) and rescales
    /// the rest to sum to one.
    pub fn pruned(&self, threshold: T) -> Self {
        let kept: BTreeMap<usize, T> = self
            .coeffs
            .iter()
            .filter(|(_, &f)| f >= threshold && f > T::zero())
            .map(|(&d, &f)| (d, f))
            .collect();
        let sum: T = kept.values().copied().sum();
        let coeffs = kept.into_iter().map(|(d, f)| (d, f / sum)).collect();
        Self::new_unchecked(self.side, coeffs)
    }

    /// `Σ_d coeffs[d] x^(d-1)`.
    pub fn to_poly(&self) -> Poly<T> {
        let mut c = vec![T::zero(); self.max_degree().max(1)];
        for (&d, &f) in &self.coeffs {
            if d >= 1 {
                c[d - 1] += f;
            }
        }
        Poly::new(c)
    }

    /// `Σ_d coeffs[d] / d`, the reciprocal of the average node degree.
    pub fn inv_avg(&self) -> T {
        self.coeffs
            .iter()
            .map(|(&d, &f)| f / T::from_count(d))
            .sum()
    }

    /// Derivative of the edge polynomial at 1, `Σ_d coeffs[d] (d - 1)`.
    pub fn derivative_at_one(&self) -> T {
        self.coeffs
            .iter()
            .map(|(&d, &f)| f * T::from_count(d.saturating_sub(1)))
            .sum()
    }

    /// Polynomial string in the `c*x^k` syntax accepted by the CLI.
    pub fn to_poly_string(&self) -> String {
        self.coeffs
            .iter()
            .map(|(&d, &f)| match d - 1 {
                1 => format!("{f}*x"),
                k => format!("{f}*x^{k}"),
            })
            .collect::<Vec<_>>()
            .join(" + ")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct Ensemble<T> {
    pub lambda: DegreeDistribution<T>,
    pub rho: DegreeDistribution<T>,
}

impl<T: Scalar> Ensemble<T> {
    pub fn new(lambda: DegreeDistribution<T>, rho: DegreeDistribution<T>) -> Self {
        Self { lambda, rho }
    }

    /// Design rate `1 - (Σ ρ_j/j) / (Σ λ_i/i)`.
    pub fn rate(&self) -> T {
        T::one() - self.rho.inv_avg() / self.lambda.inv_avg()
    }
}

/// Relative gap to capacity, `1 - rate / (1 - epsilon)`.
pub fn capacity_gap<T: Scalar>(rate: T, epsilon: T) -> Result<T> {
    if !(epsilon > T::zero() && epsilon < T::one()) {
        return Err(Error::InvalidChannel(epsilon.to_f64().unwrap_or(f64::NAN)));
    }
    Ok(T::one() - rate / (T::one() - epsilon))
}
