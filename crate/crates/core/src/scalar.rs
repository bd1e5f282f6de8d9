//! Floating-point scalar abstraction shared by the polynomial, ensemble,
//! lifting and density-evolution code.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign};

/// Real scalar used by the generic numerical core: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal. Panics only for types that cannot represent
    /// finite doubles, which excludes every implementor.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("finite literal")
    }

    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count fits in scalar")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Binomial coefficient `C(n, k)` as a scalar, by the multiplicative formula.
pub fn binomial<T: Scalar>(n: usize, k: usize) -> T {
    if k > n {
        return T::zero();
    }
    let k = k.min(n - k);
    let mut acc = 1.0_f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    T::lit(acc.round())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomial_small_values() {
        assert_eq!(binomial::<f64>(4, 2), 6.0);
        assert_eq!(binomial::<f64>(30, 15), 155_117_520.0);
        assert_eq!(binomial::<f64>(3, 5), 0.0);
        assert_eq!(binomial::<f32>(5, 0), 1.0);
    }
}
