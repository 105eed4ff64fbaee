//! Model predictive control problems in separate and dense (condensed) form,
//! the random affine transformations used to outsource them, and the
//! inference procedures an honest-but-curious solver can run on what it
//! receives.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`). The `*64`
//! aliases at the bottom of this file are the concrete instantiations used by
//! the command line tool.

use nalgebra as na;
use num_traits as nt;

pub mod attacks;
pub mod dense;
pub mod error;
pub mod linalg;
pub mod lti;
pub mod poly;
pub mod qtp;
pub mod rng;
pub mod tol;
pub mod transforms;

pub use error::{Error, Result};
pub use tol::Tolerances;

/// Scalar types the library is generic over.
pub trait Real: Copy + nt::FromPrimitive + nt::ToPrimitive + na::RealField + na::Scalar {}

impl Real for f32 {}
impl Real for f64 {}

/// Converts an `f64` constant into `T`.
#[inline]
pub fn cst<T: Real>(x: f64) -> T {
    na::convert(x)
}

/// Converts a `T` into `f64`.
#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    nt::ToPrimitive::to_f64(&x).unwrap_or(f64::NAN)
}

pub type LtiSystem64 = lti::LtiSystem<f64>;
pub type CostSpec64 = lti::CostSpec<f64>;
pub type BoxConstraints64 = lti::BoxConstraints<f64>;
pub type DenseQp64 = dense::DenseQp<f64>;
pub type QpSolution64 = dense::QpSolution<f64>;
pub type Realization64 = linalg::Realization<f64>;
pub type SeparateKey64 = transforms::SeparateKey<f64>;
pub type TransformedProblem64 = transforms::TransformedProblem<f64>;
pub type DenseKey64 = transforms::DenseKey<f64>;
pub type StructuredNoiseKey64 = transforms::StructuredNoiseKey<f64>;
pub type DataLog64 = attacks::DataLog<f64>;
pub type AttackReport64 = attacks::AttackReport<f64>;
pub type UncertaintyWitness64 = attacks::UncertaintyWitness<f64>;
