//! Solvers for the TV flow and the trajectory they produce.

mod config;
mod exact_pc;
mod geodesic;
mod regularized;
mod scalar;

pub use config::{Dt, FlowConfig, Scheme};
pub use exact_pc::{pc_velocity, reconstruct_z_pc, run_exact_pc, run_exact_pc_with, ExactPcOptions};
pub use geodesic::flow_on_geodesic;
pub use regularized::{run_regularized, face_z_field};
pub use scalar::{run_scalar_tv, ScalarTrajectory};

use crate::curve::{PiecewiseConstantCurve, SampledCurve};
use crate::manifold::ManifoldSpec;

/// A snapshot curve in either representation.
#[derive(Debug, Clone, PartialEq)]
pub enum Curve {
    Pc(PiecewiseConstantCurve),
    Sampled(SampledCurve),
}

impl Curve {
    pub fn manifold(&self) -> ManifoldSpec {
        match self {
            Curve::Pc(c) => c.manifold(),
            Curve::Sampled(c) => c.manifold(),
        }
    }

    /// Geodesic total variation: jump sum, or sum of face distances.
    pub fn tv(&self) -> f64 {
        match self {
            Curve::Pc(c) => c.jump_sizes().iter().sum(),
            Curve::Sampled(c) => c.tv_geodesic(),
        }
    }

    pub fn max_jump(&self) -> f64 {
        let sizes = match self {
            Curve::Pc(c) => c.jump_sizes(),
            Curve::Sampled(c) => c.face_distances(),
        };
        sizes.into_iter().fold(0.0, f64::max)
    }

    /// Curve value at `x` (nodal value of the nearest sample for sampled curves).
    pub fn value_at(&self, x: f64) -> &[f64] {
        match self {
            Curve::Pc(c) => c.value_at(x).coords(),
            Curve::Sampled(c) => {
                let i = (x * (c.grid_n() - 1) as f64).round() as usize;
                c.value(i.min(c.grid_n() - 1))
            }
        }
    }
}

/// Subgradient field z attached to a snapshot.
#[derive(Debug, Clone, PartialEq)]
pub enum ZField {
    /// Staggered grid with `n + 1` faces; face 0 and face n are the boundary
    /// ghosts (always zero), face `k` sits between nodes `k-1` and `k`.
    /// `minus[k]` is tangent at the left node and `plus[k]` at the right node.
    Faces { dim: usize, minus: Vec<f64>, plus: Vec<f64> },
    /// Linear on each plateau: `left[i]` at `x_{i-1}⁺`, `right[i]` at `x_i⁻`.
    PiecewiseLinear {
        breakpoints: Vec<f64>,
        left: Vec<Vec<f64>>,
        right: Vec<Vec<f64>>,
    },
}

impl ZField {
    /// Largest |z| over the field (endpoints of linear pieces suffice).
    pub fn max_norm(&self) -> f64 {
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        match self {
            ZField::Faces { dim, minus, plus } => minus
                .chunks(*dim)
                .chain(plus.chunks(*dim))
                .map(norm)
                .fold(0.0, f64::max),
            ZField::PiecewiseLinear { left, right, .. } => left
                .iter()
                .chain(right)
                .map(|v| norm(v))
                .fold(0.0, f64::max),
        }
    }

    /// z at the two ends of I.
    pub fn boundary_values(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            ZField::Faces { dim, minus, .. } => {
                let k = minus.len() / dim;
                (minus[..*dim].to_vec(), minus[(k - 1) * dim..].to_vec())
            }
            ZField::PiecewiseLinear { left, right, .. } => {
                (left[0].clone(), right[right.len() - 1].clone())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Regularized,
    ExactPc,
    Geodesic,
}

/// Per-snapshot diagnostics. `dissipation` is ∫∫|u_t|² over the interval
/// since the previous snapshot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    pub t: f64,
    pub tv: f64,
    pub dissipation: f64,
    pub max_jump: f64,
    pub stopped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub t: f64,
    pub curve: Curve,
    pub z: Option<ZField>,
    /// u_t, one row per plateau (PC) or per node (sampled), flat.
    pub velocity: Option<Vec<f64>>,
    pub diag: Diagnostics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowTrajectory {
    pub manifold: ManifoldSpec,
    pub solver: SolverKind,
    /// Nominal time step (the largest step for the event-driven solvers).
    pub dt: f64,
    pub epsilon: Option<f64>,
    pub frames: Vec<Frame>,
}

impl FlowTrajectory {
    pub fn times(&self) -> Vec<f64> {
        self.frames.iter().map(|f| f.t).collect()
    }

    /// Frame whose time equals `t` to within 1e-12.
    pub fn frame_at(&self, t: f64) -> Option<&Frame> {
        self.frames.iter().find(|f| (f.t - t).abs() <= 1e-12 * (1.0 + t.abs()))
    }

    pub fn last(&self) -> &Frame {
        self.frames.last().expect("trajectory has at least one frame")
    }

    pub fn diagnostics(&self) -> Vec<Diagnostics> {
        self.frames.iter().map(|f| f.diag).collect()
    }
}
