//! Pass/fail checks on flow trajectories.
//!
//! Every check is a pure function of the recorded frames. A report passes
//! iff its worst violation is at most its tolerance.

use std::fmt;

use rayon::prelude::*;

use crate::curve::{PiecewiseConstantCurve, SampledCurve};
use crate::error::{Error, Result};
use crate::flow::{
    run_exact_pc_with, run_regularized, Curve, ExactPcOptions, FlowConfig, FlowTrajectory, SolverKind, ZField,
};
use crate::linalg::{dot, norm, wedge};
use crate::manifold::ManifoldSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub check: String,
    pub pass: bool,
    pub worst_violation: f64,
    pub at_t: f64,
    /// Spatial location of the worst violation, when meaningful.
    pub at_x: Option<f64>,
    pub tolerance: f64,
}

impl CheckReport {
    pub fn new(check: &str, worst: f64, at_t: f64, at_x: Option<f64>, tolerance: f64) -> Self {
        CheckReport {
            check: check.to_string(),
            pass: worst <= tolerance,
            worst_violation: worst,
            at_t,
            at_x,
            tolerance,
        }
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<14} {} worst={:.3e} at t={:.6}",
            self.check,
            if self.pass { "PASS" } else { "FAIL" },
            self.worst_violation,
            self.at_t
        )?;
        if let Some(x) = self.at_x {
            write!(f, " x={x:.6}")?;
        }
        write!(f, " tol={:.1e}", self.tolerance)
    }
}

/// Tracks the largest violation seen so far.
struct Worst {
    v: f64,
    t: f64,
    x: Option<f64>,
}

impl Worst {
    fn new() -> Self {
        Worst { v: f64::NEG_INFINITY, t: 0.0, x: None }
    }

    fn see(&mut self, v: f64, t: f64, x: Option<f64>) {
        if v > self.v || v.is_nan() {
            *self = Worst { v, t, x };
        }
    }

    fn report(self, name: &str, tol: f64) -> CheckReport {
        let v = if self.v == f64::NEG_INFINITY { 0.0 } else { self.v };
        CheckReport::new(name, v, self.t, self.x, tol)
    }
}

/// TV(u(t)) + ∫₀ᵗ∫|u_t|² ≤ TV(u₀) + tol with tol = 1e-6 + 10·dt.
pub fn check_energy(traj: &FlowTrajectory) -> CheckReport {
    let tol = 1e-6 + 10.0 * traj.dt;
    let mut w = Worst::new();
    let Some(first) = traj.frames.first() else {
        return w.report("energy", tol);
    };
    let tv0 = first.diag.tv;
    let mut acc = 0.0;
    for f in &traj.frames {
        acc += f.diag.dissipation;
        w.see(f.diag.tv + acc - tv0, f.t, None);
    }
    w.report("energy", tol)
}

/// Variation measure restricted to the dyadic intervals `[k/2^L, (k+1)/2^L)`,
/// `L = 0..=DYADIC_DEPTH`, from point masses at `locs`.
const DYADIC_DEPTH: u32 = 6;

fn dyadic_measures(locs: &[f64], sizes: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity((1 << (DYADIC_DEPTH + 1)) - 1);
    for level in 0..=DYADIC_DEPTH {
        let k = 1usize << level;
        let mut buckets = vec![0.0; k];
        for (&x, &s) in locs.iter().zip(sizes) {
            let b = ((x * k as f64) as usize).min(k - 1);
            buckets[b] += s;
        }
        out.extend(buckets);
    }
    out
}

fn dyadic_center(idx: usize) -> f64 {
    let mut level = 0;
    let mut start = 0;
    while idx >= start + (1 << level) {
        start += 1 << level;
        level += 1;
    }
    let k = (idx - start) as f64;
    (k + 0.5) / (1u64 << level) as f64
}

/// Per-face / per-jump variation and its dyadic restrictions never increase.
pub fn check_monotone_variation(traj: &FlowTrajectory) -> Result<CheckReport> {
    let tol = 1e-6;
    let mut w = Worst::new();
    match traj.frames.first().map(|f| &f.curve) {
        None => {}
        Some(Curve::Sampled(first)) => {
            let n = first.grid_n();
            let h = first.h();
            let locs: Vec<f64> = (0..n - 1).map(|j| (j as f64 + 0.5) * h).collect();
            let mut min_slope: Vec<f64> = vec![f64::INFINITY; n - 1];
            let mut min_dyadic: Vec<f64> = vec![f64::INFINITY; (1 << (DYADIC_DEPTH + 1)) - 1];
            for f in &traj.frames {
                let Curve::Sampled(c) = &f.curve else {
                    return Err(Error::IncompatibleSnapshots("mixed curve kinds".into()));
                };
                if c.grid_n() != n {
                    return Err(Error::IncompatibleSnapshots(format!("grid {} vs {n}", c.grid_n())));
                }
                let d = c.face_distances();
                for (j, dj) in d.iter().enumerate() {
                    let s = dj / h;
                    w.see(s - min_slope[j], f.t, Some(locs[j]));
                    min_slope[j] = min_slope[j].min(s);
                }
                for (i, mu) in dyadic_measures(&locs, &d).into_iter().enumerate() {
                    w.see(mu - min_dyadic[i], f.t, Some(dyadic_center(i)));
                    min_dyadic[i] = min_dyadic[i].min(mu);
                }
            }
        }
        Some(Curve::Pc(first)) => {
            let mut min_jump: Vec<(f64, f64)> = first.breakpoints().iter().copied().zip(first.jump_sizes()).collect();
            let mut min_dyadic: Vec<f64> = vec![f64::INFINITY; (1 << (DYADIC_DEPTH + 1)) - 1];
            for f in &traj.frames {
                let Curve::Pc(c) = &f.curve else {
                    return Err(Error::IncompatibleSnapshots("mixed curve kinds".into()));
                };
                let sizes = c.jump_sizes();
                let mut seen = vec![false; min_jump.len()];
                for (&x, &s) in c.breakpoints().iter().zip(&sizes) {
                    match min_jump.iter().position(|&(y, _)| y == x) {
                        Some(k) => {
                            w.see(s - min_jump[k].1, f.t, Some(x));
                            min_jump[k].1 = min_jump[k].1.min(s);
                            seen[k] = true;
                        }
                        // a jump appearing out of nothing
                        None => w.see(s, f.t, Some(x)),
                    }
                }
                for (k, s) in seen.iter().enumerate() {
                    if !s {
                        min_jump[k].1 = 0.0;
                    }
                }
                for (i, mu) in dyadic_measures(c.breakpoints(), &sizes).into_iter().enumerate() {
                    w.see(mu - min_dyadic[i], f.t, Some(dyadic_center(i)));
                    min_dyadic[i] = min_dyadic[i].min(mu);
                }
            }
        }
    }
    Ok(w.report("monotone", tol))
}

/// ½∫|u − v|² over I. Exact for piecewise-constant `u`; nodal trapezoid rule
/// (v evaluated at the nodes) for sampled `u`.
pub fn half_l2_sq(m: ManifoldSpec, u: &Curve, v: &PiecewiseConstantCurve) -> f64 {
    match u {
        Curve::Pc(c) => {
            let mut cuts: Vec<f64> = c.breakpoints().iter().chain(v.breakpoints()).copied().collect();
            cuts.push(0.0);
            cuts.push(1.0);
            cuts.sort_by(f64::total_cmp);
            cuts.dedup();
            cuts.windows(2)
                .map(|w| {
                    let mid = 0.5 * (w[0] + w[1]);
                    let d = m.dist_raw(c.value_at(mid).coords(), v.value_at(mid).coords());
                    0.5 * d * d * (w[1] - w[0])
                })
                .sum()
        }
        Curve::Sampled(c) => {
            let n = c.grid_n();
            (0..n)
                .map(|i| {
                    let d = m.dist_raw(c.value(i), v.value_at(c.x(i)).coords());
                    let wgt = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
                    0.5 * d * d * wgt * c.h()
                })
                .sum()
        }
    }
}

/// Integrated form of ½ d/dt ∫|u − v|² + TV(u) ≤ TV(v) between consecutive
/// frames: `[D(t₂) − D(t₁)]/(t₂ − t₁) + TV(u(t₂)) ≤ TV(v) + 1e-4`, which
/// follows from the differential form because TV(u(t)) is nonincreasing.
pub fn check_variational_inequality(traj: &FlowTrajectory, v: &PiecewiseConstantCurve) -> Result<CheckReport> {
    let m = traj.manifold;
    if !matches!(m, ManifoldSpec::Euclidean(_)) {
        return Err(Error::NotNpc(m.to_string()));
    }
    if v.manifold() != m {
        return Err(Error::Invalid(format!("test curve on {} but trajectory on {m}", v.manifold())));
    }
    let tol = 1e-4;
    let tv_v = v.tv_measure()?.total;
    let mut w = Worst::new();
    let mut prev: Option<(f64, f64)> = None;
    for f in &traj.frames {
        let d = half_l2_sq(m, &f.curve, v);
        if let Some((t0, d0)) = prev {
            if f.t > t0 {
                w.see((d - d0) / (f.t - t0) + f.diag.tv - tv_v, f.t, None);
            }
        }
        prev = Some((f.t, d));
    }
    Ok(w.report("var_ineq", tol))
}

/// Worst residuals of the three sphere identities over a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereResiduals {
    pub tangent: CheckReport,
    pub wedge: CheckReport,
    pub zeqn: CheckReport,
}

impl SphereResiduals {
    pub fn reports(&self) -> [&CheckReport; 3] {
        [&self.tangent, &self.wedge, &self.zeqn]
    }

    /// Single report carrying the worst of the three.
    pub fn combined(&self) -> CheckReport {
        let worst = self
            .reports()
            .into_iter()
            .max_by(|a, b| (a.worst_violation - a.tolerance).total_cmp(&(b.worst_violation - b.tolerance)))
            .unwrap();
        CheckReport { check: "sphere".into(), ..worst.clone() }
    }
}

fn diff_norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn mid(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect()
}

/// Residuals of z·u = 0, u_t∧u = (z∧u)_x and u_x·z* = |u*||u_x|, with
/// `u*`, `z*` the ambient averages of the one-sided values.
pub fn sphere_residuals(traj: &FlowTrajectory) -> Result<SphereResiduals> {
    let m = traj.manifold;
    if !m.is_spherical() {
        return Err(Error::WrongManifold(m.to_string()));
    }
    let tol = match (traj.solver, traj.epsilon) {
        (SolverKind::Regularized, Some(eps)) => 1e-5 / eps,
        _ => 1e-8,
    };
    let n = m.dim();
    let (mut wt, mut ww, mut wz) = (Worst::new(), Worst::new(), Worst::new());
    for f in &traj.frames {
        let (Some(z), Some(vel)) = (&f.z, &f.velocity) else {
            return Err(Error::Invalid("trajectory frames carry no z-field or velocity".into()));
        };
        let t = f.t;
        match (&f.curve, z) {
            (Curve::Pc(c), ZField::PiecewiseLinear { left, right, .. }) => {
                let b = c.breakpoints();
                let lens = c.plateau_lengths();
                let vals = c.values();
                let mut x0 = 0.0;
                for (i, p) in vals.iter().enumerate() {
                    let p = p.coords();
                    let x1 = if i < b.len() { b[i] } else { 1.0 };
                    let xm = Some(0.5 * (x0 + x1));
                    wt.see(dot(&left[i], p).abs().max(dot(&right[i], p).abs()), t, xm);
                    // a.c. part on the plateau: u_t ∧ u = z_x ∧ u
                    let zx: Vec<f64> = right[i].iter().zip(&left[i]).map(|(r, l)| (r - l) / lens[i]).collect();
                    let lhs = wedge(&vel[i * n..(i + 1) * n], p);
                    ww.see(diff_norm(&lhs, &wedge(&zx, p)), t, xm);
                    x0 = x1;
                }
                for (j, &x) in b.iter().enumerate() {
                    let (um, up) = (vals[j].coords(), vals[j + 1].coords());
                    let (zm, zp) = (&right[j], &left[j + 1]);
                    // jump part of (z∧u)_x must vanish
                    ww.see(diff_norm(&wedge(zp, up), &wedge(zm, um)), t, Some(x));
                    let us = mid(um, up);
                    let zs = mid(zm, zp);
                    wt.see(dot(&zs, &us).abs(), t, Some(x));
                    let jump: Vec<f64> = up.iter().zip(um).map(|(a, b)| a - b).collect();
                    wz.see((dot(&jump, &zs) - norm(&us) * norm(&jump)).abs(), t, Some(x));
                }
            }
            (Curve::Sampled(c), ZField::Faces { minus, plus, .. }) => {
                let nodes = c.grid_n();
                let h = c.h();
                for k in 1..nodes {
                    let (ul, ur) = (c.value(k - 1), c.value(k));
                    let zs = mid(&minus[k * n..(k + 1) * n], &plus[k * n..(k + 1) * n]);
                    let us = mid(ul, ur);
                    let x = Some((k as f64 - 0.5) * h);
                    wt.see(dot(&zs, &us).abs(), t, x);
                    let du: Vec<f64> = ur.iter().zip(ul).map(|(a, b)| (a - b) / h).collect();
                    wz.see((dot(&du, &zs) - norm(&us) * norm(&du)).abs(), t, x);
                }
                for i in 0..nodes {
                    let u = c.value(i);
                    let mass = if i == 0 || i == nodes - 1 { 0.5 * h } else { h };
                    let zr = &minus[(i + 1) * n..(i + 2) * n];
                    let zl = &plus[i * n..(i + 1) * n];
                    let lhs = wedge(&vel[i * n..(i + 1) * n], u);
                    let rhs: Vec<f64> = wedge(zr, u).iter().zip(wedge(zl, u)).map(|(a, b)| (a - b) / mass).collect();
                    ww.see(diff_norm(&lhs, &rhs), t, Some(c.x(i)));
                }
            }
            _ => return Err(Error::IncompatibleSnapshots("z-field does not match the curve kind".into())),
        }
    }
    Ok(SphereResiduals {
        tangent: wt.report("sphere_tangent", tol),
        wedge: ww.report("sphere_wedge", tol),
        zeqn: wz.report("sphere_zeqn", tol),
    })
}

pub fn check_sphere_equivalence(traj: &FlowTrajectory) -> Result<CheckReport> {
    Ok(sphere_residuals(traj)?.combined())
}

/// |z| ≤ 1 + 1e-8, z = 0 exactly on ∂I and, for piecewise-constant frames,
/// z equal to the unit tangents of each jump to 1e-9.
pub fn check_z_structure(traj: &FlowTrajectory) -> Result<Vec<CheckReport>> {
    let m = traj.manifold;
    let n = m.dim();
    let (mut wb, mut we, mut wj) = (Worst::new(), Worst::new(), Worst::new());
    let mut has_jumps = false;
    for f in &traj.frames {
        let Some(z) = &f.z else {
            return Err(Error::Invalid("trajectory frames carry no z-field".into()));
        };
        wb.see(z.max_norm() - 1.0, f.t, None);
        let (l, r) = z.boundary_values();
        let e = l.iter().chain(&r).fold(0.0f64, |a, x| a.max(x.abs()));
        we.see(e, f.t, Some(if l.iter().any(|x| *x != 0.0) { 0.0 } else { 1.0 }));
        if let (Curve::Pc(c), ZField::PiecewiseLinear { left, right, .. }) = (&f.curve, z) {
            has_jumps = true;
            for (j, &x) in c.breakpoints().iter().enumerate() {
                let (tm, tp) = m.unit_tangent_pair(&c.values()[j], &c.values()[j + 1])?;
                let e = diff_norm(&right[j], &tm.vec).max(diff_norm(&left[j + 1], &tp.vec));
                wj.see(e, f.t, Some(x));
            }
        }
        let _ = n;
    }
    let mut out = vec![wb.report("z_bound", 1e-8), we.report("z_boundary", 0.0)];
    if has_jumps {
        out.push(wj.report("z_jump", 1e-9));
    }
    Ok(out)
}

/// Jumps next to an end plateau of length ℓ shrink at rate ≥ 1/ℓ; all other
/// jumps do not grow. Checked in integrated form between consecutive frames
/// with the same jump set, `d(t₂) − d(t₁) ≤ −(t₂ − t₁)/ℓ`, in distance units.
pub fn check_jump_rates(traj: &FlowTrajectory) -> Result<CheckReport> {
    let tol = 1e-9;
    let mut w = Worst::new();
    for pair in traj.frames.windows(2) {
        let (Curve::Pc(a), Curve::Pc(b)) = (&pair[0].curve, &pair[1].curve) else {
            return Err(Error::IncompatibleSnapshots("jump rates need piecewise-constant frames".into()));
        };
        if a.breakpoints() != b.breakpoints() || a.breakpoints().is_empty() {
            continue;
        }
        let dt = pair[1].t - pair[0].t;
        let lens = a.plateau_lengths();
        let k = a.breakpoints().len();
        for (j, (da, db)) in a.jump_sizes().iter().zip(b.jump_sizes()).enumerate() {
            let mut bound: f64 = 0.0;
            if j == 0 {
                bound = bound.min(-1.0 / lens[0]);
            }
            if j + 1 == k {
                bound = bound.min(-1.0 / lens[k]);
            }
            w.see(db - da - bound * dt, pair[1].t, Some(a.breakpoints()[j]));
        }
    }
    Ok(w.report("jump_rate", tol))
}

/// Outcome of [`detect_stopping`].
#[derive(Debug, Clone, PartialEq)]
pub enum Stopping {
    Stopped { t_star: f64, value: Vec<f64> },
    NotStopped,
}

/// Sup over I of the pointwise distance between two snapshots.
pub fn sup_distance(m: ManifoldSpec, a: &Curve, b: &Curve) -> f64 {
    match (a, b) {
        (Curve::Sampled(x), Curve::Sampled(y)) if x.grid_n() == y.grid_n() => (0..x.grid_n())
            .map(|i| m.dist_raw(x.value(i), y.value(i)))
            .fold(0.0, f64::max),
        _ => {
            let mut xs: Vec<f64> = vec![0.0, 1.0];
            for c in [a, b] {
                match c {
                    Curve::Pc(p) => xs.extend(p.breakpoints()),
                    Curve::Sampled(s) => xs.extend((0..s.grid_n()).map(|i| s.x(i))),
                }
            }
            xs.sort_by(f64::total_cmp);
            xs.dedup();
            xs.iter().map(|&x| m.dist_raw(a.value_at(x), b.value_at(x))).fold(0.0, f64::max)
        }
    }
}

/// First snapshot time after which TV < 1e-10 and every later snapshot
/// equals it within 1e-10.
pub fn detect_stopping(traj: &FlowTrajectory) -> Stopping {
    let m = traj.manifold;
    let Some(last) = traj.frames.last() else { return Stopping::NotStopped };
    if !(last.diag.tv < 1e-10) {
        return Stopping::NotStopped;
    }
    let mut k = traj.frames.len() - 1;
    while k > 0 {
        let f = &traj.frames[k - 1];
        if !(f.diag.tv < 1e-10) {
            break;
        }
        // every frame after k-1 must match k-1
        if traj.frames[k..].iter().any(|g| sup_distance(m, &f.curve, &g.curve) > 1e-10) {
            break;
        }
        k -= 1;
    }
    let f = &traj.frames[k];
    Stopping::Stopped { t_star: f.t, value: f.curve.value_at(0.0).to_vec() }
}

/// L²(I) distance between a snapshot and a piecewise-constant curve:
/// exact for PC snapshots, nodal trapezoid rule for sampled ones.
pub fn l2_distance(m: ManifoldSpec, u: &Curve, v: &PiecewiseConstantCurve) -> f64 {
    (2.0 * half_l2_sq(m, u, v)).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossSolverOptions {
    pub t_max: f64,
    /// Regularized time step as a multiple of h.
    pub dt_factor: f64,
    /// Mollification ramp width as a multiple of h. Zero samples the datum
    /// at the nodes; a ramp that happens to catch a node adds an O(√h)
    /// initial error that does not shrink monotonically with the grid.
    pub ramp_factor: f64,
    pub snapshot_every: usize,
}

impl Default for CrossSolverOptions {
    fn default() -> Self {
        CrossSolverOptions { t_max: 1.0, dt_factor: 0.1, ramp_factor: 0.0, snapshot_every: 10 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRow {
    pub epsilon: f64,
    pub grid_n: usize,
    /// sup over compared snapshots of the L² distance
    pub error: f64,
    /// L² distance at the last compared snapshot
    pub final_error: f64,
    pub snapshots: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorTable {
    pub rows: Vec<ErrorRow>,
}

impl ErrorTable {
    pub fn get(&self, epsilon: f64, grid_n: usize) -> Option<&ErrorRow> {
        self.rows.iter().find(|r| r.epsilon == epsilon && r.grid_n == grid_n)
    }

    /// Errors along simultaneous refinement `(eps[i], grids[i])`.
    pub fn diagonal(&self, eps: &[f64], grids: &[usize]) -> Vec<f64> {
        eps.iter()
            .zip(grids)
            .filter_map(|(&e, &g)| self.get(e, g).map(|r| r.error))
            .collect()
    }

    /// Nonincreasing up to a relative slack: `e[i+1] ≤ (1 + slack)·e[i]`.
    pub fn is_monotone(errors: &[f64], slack: f64) -> bool {
        errors.windows(2).all(|w| w[1] <= (1.0 + slack) * w[0])
    }
}

/// Compares `run_regularized(mollify(u0))` with `run_exact_pc(u0)` for every
/// (ε, n) pair; the exact solver is sampled at the regularized snapshot times.
pub fn cross_solver_compare(
    u0: &PiecewiseConstantCurve,
    eps_list: &[f64],
    grid_list: &[usize],
    opts: &CrossSolverOptions,
) -> Result<ErrorTable> {
    let m = u0.manifold();
    let pairs: Vec<(f64, usize)> = eps_list.iter().flat_map(|&e| grid_list.iter().map(move |&g| (e, g))).collect();
    let rows = pairs
        .par_iter()
        .map(|&(eps, n)| -> Result<ErrorRow> {
            let h = 1.0 / (n - 1) as f64;
            let sampled: SampledCurve = crate::curve::mollify(u0, n, opts.ramp_factor * h)?;
            let mut cfg = FlowConfig::new(m, eps, n, opts.t_max).with_dt(opts.dt_factor * h);
            cfg.snapshot_every = opts.snapshot_every;
            let reg = run_regularized(&sampled, &cfg)?;
            let mut eo = ExactPcOptions::new(opts.t_max);
            eo.output_times = reg.times();
            let exact = run_exact_pc_with(u0, &eo)?;
            let mut error: f64 = 0.0;
            let mut final_error = 0.0;
            let mut count = 0;
            for f in &reg.frames {
                let Some(g) = exact.frame_at(f.t) else { continue };
                let Curve::Pc(v) = &g.curve else { unreachable!() };
                let e = l2_distance(m, &f.curve, v);
                error = error.max(e);
                final_error = e;
                count += 1;
            }
            Ok(ErrorRow { epsilon: eps, grid_n: n, error, final_error, snapshots: count })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ErrorTable { rows })
}
