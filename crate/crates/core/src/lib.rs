//! Numerical laboratory for the Yamabe problem on rotationally symmetric
//! open manifolds.
//!
//! The pipeline is radial throughout: a [`ModelManifold`] (dimension plus
//! warp profile) is discretized on a [`RadialGrid`] into tridiagonal
//! quadratic forms ([`OperatorAssembly`]); the [`spectral`] module estimates
//! the spectral bottom of the conformal Laplacian, [`minimize`]
//! computes weighted subcritical and critical extremals, and
//! [`continuation`] chains them into the two-stage limit `p → p_crit`,
//! `α → 0`, estimates the Yamabe constant at infinity and issues an
//! existence verdict.
//!
//! All numerical code is generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix the scalar to `f64`, which is what the CLI uses.

// `!(x > y)` is used deliberately so that NaN inputs are rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod continuation;
pub mod discretize;
mod error;
pub mod geometry;
pub mod io;
pub mod minimize;
mod scalar;
pub mod spectral;
pub mod tridiag;

pub use error::{Error, Result};
pub use scalar::Real;

pub use discretize::{DiscreteField, InnerBc, OperatorAssembly, RadialGrid};
pub use geometry::{ModelManifold, WarpKind, WarpProfile, WeightSpec};
pub use minimize::{Extremal, Init, MinimizeConfig};
pub use spectral::SpectralResult;

pub type Model = geometry::ModelManifold<f64>;
pub type Profile = geometry::WarpProfile<f64>;
pub type Weight = geometry::WeightSpec<f64>;
pub type Grid = discretize::RadialGrid<f64>;
pub type Field = discretize::DiscreteField<f64>;
pub type Assembly = discretize::OperatorAssembly<f64>;
pub type Spectrum = spectral::SpectralResult<f64>;
pub type Extremal64 = minimize::Extremal<f64>;
pub type Trace = continuation::ContinuationTrace<f64>;
pub type Verdict = continuation::Verdict<f64>;

pub type Model32 = geometry::ModelManifold<f32>;
pub type Grid32 = discretize::RadialGrid<f32>;
pub type Assembly32 = discretize::OperatorAssembly<f32>;
