//! ε-regularized flow on a uniform vertex grid.
//!
//! Face fluxes are intrinsic: on the face between nodes i and i+1 the flux
//! seen from node i is `log_{u_i}(u_{i+1}) / w_i` with
//! `w_i = √(ε²h² + d_i²)`, i.e. `Du/√(ε² + |Du|²)` with `|Du| = d_i/h`.
//! Boundary faces carry zero flux (Neumann). End nodes own half a cell.
//!
//! The default time step is linearly implicit: conductances `1/w_i` are frozen
//! at the old state and `(M/dt + A) δ = F(u)` is solved componentwise with a
//! tridiagonal sweep; `δ` is projected to the tangent space and the node is
//! retracted by closest-point projection. The discrete energy
//! `Σ w_i` then decreases by at least the dissipation at every step (flat
//! case), with no step-size restriction.

use super::config::{FlowConfig, Scheme};
use super::{Curve, Diagnostics, FlowTrajectory, Frame, SolverKind, ZField};
use crate::curve::SampledCurve;
use crate::error::{Error, Result};
use crate::manifold::ManifoldSpec;

struct Faces {
    /// log_{u_i} u_{i+1}, tangent at node i
    fwd: Vec<f64>,
    /// log_{u_{i+1}} u_i, tangent at node i+1
    bwd: Vec<f64>,
    d: Vec<f64>,
    w: Vec<f64>,
}

fn faces(m: ManifoldSpec, u: &[f64], eh: f64) -> Result<Faces> {
    let n = m.dim();
    let k = u.len() / n - 1;
    let mut f = Faces { fwd: vec![0.0; k * n], bwd: vec![0.0; k * n], d: vec![0.0; k], w: vec![0.0; k] };
    for i in 0..k {
        let (p, q) = (&u[i * n..(i + 1) * n], &u[(i + 1) * n..(i + 2) * n]);
        let d = m.log_into(p, q, &mut f.fwd[i * n..(i + 1) * n])?;
        m.log_into(q, p, &mut f.bwd[i * n..(i + 1) * n])?;
        f.d[i] = d;
        f.w[i] = eh.hypot(d);
    }
    Ok(f)
}

/// Net flux into each node: `z_i⁻ − z_{i-1}⁺` as a tangent vector at node i.
fn force(f: &Faces, n: usize, nodes: usize) -> Vec<f64> {
    let mut out = vec![0.0; nodes * n];
    for i in 0..f.d.len() {
        let c = 1.0 / f.w[i];
        for k in 0..n {
            out[i * n + k] += c * f.fwd[i * n + k];
            out[(i + 1) * n + k] += c * f.bwd[i * n + k];
        }
    }
    out
}

/// Solves `(diag(a) + A_c) x = rhs` where `A_c` is the graph Laplacian of the
/// path with conductances `c`, for every column of the flat `rhs` at once.
/// The diagonal excess is carried separately so that large conductances do
/// not cancel against each other.
fn solve_path_laplacian(a: &[f64], c: &[f64], rhs: &mut [f64], n: usize) {
    let nodes = a.len();
    let mut cp = vec![0.0; nodes];
    let mut excess = a[0];
    let mut denom = excess + if nodes > 1 { c[0] } else { 0.0 };
    for k in 0..n {
        rhs[k] /= denom;
    }
    if nodes > 1 {
        cp[0] = c[0] / denom;
    }
    for i in 1..nodes {
        let cl = c[i - 1];
        excess = a[i] + cl * excess / (excess + cl);
        let cr = if i + 1 < nodes { c[i] } else { 0.0 };
        denom = excess + cr;
        for k in 0..n {
            rhs[i * n + k] = (rhs[i * n + k] + cl * rhs[(i - 1) * n + k]) / denom;
        }
        cp[i] = cr / denom;
    }
    for i in (0..nodes - 1).rev() {
        for k in 0..n {
            rhs[i * n + k] += cp[i] * rhs[(i + 1) * n + k];
        }
    }
}

fn masses(nodes: usize, h: f64) -> Vec<f64> {
    let mut m = vec![h; nodes];
    m[0] = 0.5 * h;
    m[nodes - 1] = 0.5 * h;
    m
}

fn z_from_faces(f: &Faces, n: usize) -> ZField {
    let k = f.d.len();
    let mut minus = vec![0.0; (k + 2) * n];
    let mut plus = vec![0.0; (k + 2) * n];
    for i in 0..k {
        let c = 1.0 / f.w[i];
        for j in 0..n {
            minus[(i + 1) * n + j] = c * f.fwd[i * n + j];
            plus[(i + 1) * n + j] = -c * f.bwd[i * n + j];
        }
    }
    ZField::Faces { dim: n, minus, plus }
}

/// Face z-field of a sampled curve for the given ε.
pub fn face_z_field(u: &SampledCurve, epsilon: f64) -> Result<ZField> {
    let m = u.manifold();
    let f = faces(m, u.flat(), epsilon * u.h())?;
    Ok(z_from_faces(&f, m.dim()))
}

fn frame(m: ManifoldSpec, u: &[f64], f: &Faces, vel: Vec<f64>, t: f64, diss: f64) -> Frame {
    let tv: f64 = f.d.iter().sum();
    let diag = Diagnostics {
        t,
        tv,
        dissipation: diss,
        max_jump: f.d.iter().copied().fold(0.0, f64::max),
        stopped: tv < 1e-10,
    };
    Frame {
        t,
        curve: Curve::Sampled(SampledCurve::from_flat_unchecked(m, u.to_vec())),
        z: Some(z_from_faces(f, m.dim())),
        velocity: Some(vel),
        diag,
    }
}

pub fn run_regularized(u0: &SampledCurve, cfg: &FlowConfig) -> Result<FlowTrajectory> {
    cfg.validate()?;
    let m = u0.manifold();
    if m != cfg.manifold {
        return Err(Error::Invalid(format!("curve lives on {m}, config says {}", cfg.manifold)));
    }
    let nodes = u0.grid_n();
    if cfg.grid_n != 0 && cfg.grid_n != nodes {
        return Err(Error::Invalid(format!("grid_n = {} but the curve has {nodes} samples", cfg.grid_n)));
    }
    let rad = u0.is_rad();
    if !rad.rad {
        let (index, dist) = rad.worst.unwrap();
        return Err(Error::RadViolation { index, dist, bound: 2.0 * m.rad() });
    }
    let n = m.dim();
    let h = u0.h();
    let eh = cfg.epsilon * h;
    let dt = cfg.resolve_dt(h);
    let mass = masses(nodes, h);
    let mut u = u0.flat().to_vec();

    let f0 = faces(m, &u, eh)?;
    let v0: Vec<f64> = force(&f0, n, nodes)
        .chunks(n)
        .zip(&mass)
        .flat_map(|(r, mi)| r.iter().map(move |x| x / mi))
        .collect();
    let mut tv_prev: f64 = f0.d.iter().sum();
    let mut frames = vec![frame(m, &u, &f0, v0, 0.0, 0.0)];
    let mut t = 0.0;
    let mut diss = 0.0;
    let mut steps = 0usize;
    let mut last_vel = vec![0.0; u.len()];
    let mut a = vec![0.0; nodes];

    loop {
        let f = faces(m, &u, eh)?;
        let tv: f64 = f.d.iter().sum();
        if cfg.scheme == Scheme::Explicit && tv > tv_prev + 1e-7 {
            return Err(Error::CflViolation { t, growth: tv - tv_prev });
        }
        tv_prev = tv;
        let done = t >= cfg.t_max || tv < cfg.stop_tv;
        if done || (steps > 0 && steps % cfg.snapshot_every == 0 && frames.last().unwrap().t < t) {
            frames.push(frame(m, &u, &f, last_vel.clone(), t, diss));
            diss = 0.0;
        }
        if done {
            break;
        }
        let step = dt.min(cfg.t_max - t);
        let mut delta = force(&f, n, nodes);
        match cfg.scheme {
            Scheme::Explicit => {
                for (r, mi) in delta.chunks_mut(n).zip(&mass) {
                    r.iter_mut().for_each(|x| *x *= step / mi);
                }
            }
            Scheme::SemiImplicit => {
                for (ai, mi) in a.iter_mut().zip(&mass) {
                    *ai = mi / step;
                }
                let c: Vec<f64> = f.w.iter().map(|w| 1.0 / w).collect();
                solve_path_laplacian(&a, &c, &mut delta, n);
            }
        }
        let mut e = 0.0;
        for i in 0..nodes {
            let (p, dp) = (&mut u[i * n..(i + 1) * n], &mut delta[i * n..(i + 1) * n]);
            m.project_tangent_in_place(p, dp);
            let mut s = 0.0;
            for k in 0..n {
                p[k] += dp[k];
                last_vel[i * n + k] = dp[k] / step;
                s += dp[k] * dp[k];
            }
            e += mass[i] * s;
            m.project_in_place(p)?;
        }
        diss += e / step;
        t = if step == cfg.t_max - t { cfg.t_max } else { t + step };
        steps += 1;
    }
    Ok(FlowTrajectory {
        manifold: m,
        solver: SolverKind::Regularized,
        dt,
        epsilon: Some(cfg.epsilon),
        frames,
    })
}
