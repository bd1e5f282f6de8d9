//! Capacity-approaching LDPC degree distributions for the binary erasure
//! channel, designed by an exact sum-of-squares semidefinite program and
//! cross-checked by density evolution.
//!
//! The numerical core (`poly`, `bernstein`, `ensemble`, `sos`, `de`) is generic over the
//! floating-point [`Scalar`]; the conic solver and the design layer work in
//! `f64`. Concrete aliases for both precisions are exported here.

pub mod bernstein;
pub mod de;
pub mod ensemble;
pub mod error;
pub mod optimizer;
pub mod poly;
pub mod scalar;
pub mod sdp;
pub mod sos;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Poly64 = poly::Poly<f64>;
pub type Poly32 = poly::Poly<f32>;
pub type AffinePoly64 = poly::AffinePoly<f64>;
pub type DegreeDistribution64 = ensemble::DegreeDistribution<f64>;
pub type DegreeDistribution32 = ensemble::DegreeDistribution<f32>;
pub type Ensemble64 = ensemble::Ensemble<f64>;
pub type Ensemble32 = ensemble::Ensemble<f32>;
pub type SosLift64 = sos::SosLift<f64>;
pub type DeRun64 = de::DeRun<f64>;

pub type Bernstein64 = bernstein::Bernstein<f64>;
