//! Total variation flow of curves with values in embedded manifolds.
//!
//! The crate has four layers: [`manifold`] (closed-form geometry of the
//! built-in manifolds), [`curve`] (piecewise-constant and sampled curves and
//! their TV measure), [`flow`] (regularized, exact piecewise-constant and
//! scalar solvers) and [`verify`] / [`lab`] (checks on trajectories and
//! standalone geometry experiments). [`io`] holds the CSV formats.

pub mod curve;
pub mod error;
pub mod flow;
pub mod io;
pub mod lab;
mod linalg;
pub mod manifold;
pub mod synthetic;
pub mod verify;

pub use curve::{compose_with_geodesic, mollify, PiecewiseConstantCurve, SampledCurve, ScalarPc, TvBreakdown};
pub use error::{Error, Result};
pub use manifold::{project_point, ManifoldPoint, ManifoldSpec, TangentVector};
