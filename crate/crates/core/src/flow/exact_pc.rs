//! Exact flow of piecewise-constant data: every plateau value moves with
//! velocity `(T_next + T_prev)/ℓ`, where the `T` are unit tangents pointing at
//! the neighbouring plateau values. Breakpoints never move; neighbouring
//! plateaus merge when their distance falls below `merge_tol`.

use super::{Curve, Diagnostics, FlowTrajectory, Frame, SolverKind, ZField};
use crate::curve::{plateau_lengths, PiecewiseConstantCurve};
use crate::error::{Error, Result};
use crate::linalg::{dist, dot};
use crate::manifold::{ManifoldPoint, ManifoldSpec};

/// Fraction of the time-to-collision allowed per step. The jump direction
/// rotates like a fractional power of the remaining time near a collision,
/// so the approach is resolved geometrically.
const APPROACH: f64 = 0.1;
const STIFF: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct ExactPcOptions {
    pub t_max: f64,
    pub merge_tol: f64,
    /// Upper bound on the RK4 step.
    pub max_step: f64,
    /// Snapshot cadence in steps; ignored when `output_times` is non-empty.
    pub snapshot_every: usize,
    /// Times at which snapshots are recorded exactly (sorted).
    pub output_times: Vec<f64>,
}

impl ExactPcOptions {
    pub fn new(t_max: f64) -> Self {
        ExactPcOptions {
            t_max,
            merge_tol: 1e-9,
            max_step: 1e-3,
            snapshot_every: 10,
            output_times: vec![],
        }
    }
}

/// Per-jump unit tangents (T⁻ at the left plateau, T⁺ at the right one) and sizes.
struct Jumps {
    tm: Vec<f64>,
    tp: Vec<f64>,
    d: Vec<f64>,
}

fn jumps(m: ManifoldSpec, a: &[f64]) -> Result<Jumps> {
    let n = m.dim();
    let k = a.len() / n - 1;
    let mut j = Jumps { tm: vec![0.0; k * n], tp: vec![0.0; k * n], d: vec![0.0; k] };
    let bound = 2.0 * m.rad();
    for i in 0..k {
        let (p, q) = (&a[i * n..(i + 1) * n], &a[(i + 1) * n..(i + 2) * n]);
        let r = m.unit_tangent_pair_raw(p, q, &mut j.tm[i * n..(i + 1) * n], &mut j.tp[i * n..(i + 1) * n]);
        j.d[i] = match r {
            Ok(d) => d,
            Err(Error::BeyondInjectivityRadius { dist, .. }) => {
                return Err(Error::RadViolation { index: i, dist, bound })
            }
            Err(e) => return Err(e),
        };
    }
    Ok(j)
}

/// Plateau velocities for the flat value array `a` (one row per plateau)
/// and the dissipation rate Σ ℓ_i |a_i'|².
pub fn pc_velocity(m: ManifoldSpec, a: &[f64], lengths: &[f64]) -> Result<(Vec<f64>, f64)> {
    let j = jumps(m, a)?;
    Ok(velocity_from(m, &j, lengths))
}

fn velocity_from(m: ManifoldSpec, j: &Jumps, lengths: &[f64]) -> (Vec<f64>, f64) {
    let n = m.dim();
    let mut v = vec![0.0; lengths.len() * n];
    for i in 0..j.d.len() {
        for c in 0..n {
            v[i * n + c] += j.tm[i * n + c] / lengths[i];
            v[(i + 1) * n + c] -= j.tp[i * n + c] / lengths[i + 1];
        }
    }
    let rate = v.chunks(n).zip(lengths).map(|(w, l)| l * dot(w, w)).sum();
    (v, rate)
}

/// Piecewise-linear z of a PC state: zero at the ends of I, equal to the
/// unit tangents of the adjacent jumps at every breakpoint.
pub fn reconstruct_z_pc(c: &PiecewiseConstantCurve) -> Result<ZField> {
    let m = c.manifold();
    let n = m.dim();
    let k = c.num_plateaus();
    let flat: Vec<f64> = c.values().iter().flat_map(|p| p.coords().iter().copied()).collect();
    let j = jumps(m, &flat)?;
    let mut left = vec![vec![0.0; n]; k];
    let mut right = vec![vec![0.0; n]; k];
    for i in 0..k - 1 {
        right[i].copy_from_slice(&j.tm[i * n..(i + 1) * n]);
        left[i + 1].copy_from_slice(&j.tp[i * n..(i + 1) * n]);
    }
    Ok(ZField::PiecewiseLinear { breakpoints: c.breakpoints().to_vec(), left, right })
}

/// [`run_exact_pc_with`] with default step and snapshot settings.
pub fn run_exact_pc(u0: &PiecewiseConstantCurve, t_max: f64, merge_tol: f64) -> Result<FlowTrajectory> {
    let mut o = ExactPcOptions::new(t_max);
    o.merge_tol = merge_tol;
    run_exact_pc_with(u0, &o)
}

struct State {
    m: ManifoldSpec,
    a: Vec<f64>,
    b: Vec<f64>,
    len: Vec<f64>,
}

impl State {
    fn curve(&self) -> PiecewiseConstantCurve {
        let values = self.a.chunks(self.m.dim()).map(|r| ManifoldPoint::from_raw(r.to_vec())).collect();
        PiecewiseConstantCurve::from_parts_unchecked(self.m, self.b.clone(), values)
    }

    fn frame(&self, t: f64, dissipation: f64) -> Result<Frame> {
        let c = self.curve();
        let (z, vel) = if c.is_constant() {
            (reconstruct_z_pc(&c)?, vec![0.0; self.a.len()])
        } else {
            (reconstruct_z_pc(&c)?, pc_velocity(self.m, &self.a, &self.len)?.0)
        };
        let sizes = c.jump_sizes();
        let diag = Diagnostics {
            t,
            tv: sizes.iter().sum(),
            dissipation,
            max_jump: sizes.iter().copied().fold(0.0, f64::max),
            stopped: c.is_constant(),
        };
        Ok(Frame { t, curve: Curve::Pc(c), z: Some(z), velocity: Some(vel), diag })
    }

    fn project(&self, x: &mut [f64]) -> Result<()> {
        for r in x.chunks_mut(self.m.dim()) {
            self.m.project_in_place(r)?;
        }
        Ok(())
    }

    /// One projected RK4 step; `None` if a stage degenerates or a jump flips.
    fn rk4(&self, h: f64) -> Result<Option<(Vec<f64>, f64)>> {
        let stage = |x: &[f64]| -> Result<Option<(Vec<f64>, f64)>> {
            match jumps(self.m, x) {
                Ok(j) => Ok(Some(velocity_from(self.m, &j, &self.len))),
                Err(Error::DegenerateJump) | Err(Error::RadViolation { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        };
        let shifted = |k: &[f64], s: f64| -> Result<Vec<f64>> {
            let mut x: Vec<f64> = self.a.iter().zip(k).map(|(a, v)| a + s * v).collect();
            self.project(&mut x)?;
            Ok(x)
        };
        let Some((k1, r1)) = stage(&self.a)? else { return Ok(None) };
        let Some((k2, r2)) = stage(&shifted(&k1, 0.5 * h)?)? else { return Ok(None) };
        let Some((k3, r3)) = stage(&shifted(&k2, 0.5 * h)?)? else { return Ok(None) };
        let Some((k4, r4)) = stage(&shifted(&k3, h)?)? else { return Ok(None) };
        let mut x: Vec<f64> = (0..self.a.len())
            .map(|i| self.a[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect();
        self.project(&mut x)?;
        // a jump whose chord reversed has passed through a collision
        let n = self.m.dim();
        for i in 0..self.len.len() - 1 {
            let mut s = 0.0;
            for c in 0..n {
                s += (self.a[(i + 1) * n + c] - self.a[i * n + c]) * (x[(i + 1) * n + c] - x[i * n + c]);
            }
            if s <= 0.0 {
                return Ok(None);
            }
        }
        Ok(Some((x, h / 6.0 * (r1 + 2.0 * r2 + 2.0 * r3 + r4))))
    }

    /// Merges every jump at or below `tol` into the length-weighted point
    /// of its geodesic. Weighting keeps ∫u unchanged in flat space; the
    /// plain midpoint would shift the mass centre by O(tol) within the
    /// O(tol) merge time.
    fn merge(&mut self, tol: f64) -> Result<()> {
        let n = self.m.dim();
        let mut i = self.b.len();
        while i > 0 {
            i -= 1;
            let (p, q) = (&self.a[i * n..(i + 1) * n], &self.a[(i + 1) * n..(i + 2) * n]);
            if self.m.dist_raw(p, q) <= tol {
                let mut mid = vec![0.0; n];
                let s = self.len[i + 1] / (self.len[i] + self.len[i + 1]);
                self.m.geodesic_point_raw(p, q, s, &mut mid)?;
                self.a.splice(i * n..(i + 2) * n, mid);
                self.b.remove(i);
                let l = self.len.remove(i + 1);
                self.len[i] += l;
            }
        }
        Ok(())
    }
}

pub fn run_exact_pc_with(u0: &PiecewiseConstantCurve, opts: &ExactPcOptions) -> Result<FlowTrajectory> {
    if !(opts.merge_tol > 0.0) || !(opts.max_step > 0.0) || !(opts.t_max >= 0.0) {
        return Err(Error::Invalid("merge_tol, max_step must be positive and t_max non-negative".into()));
    }
    let m = u0.manifold();
    let rad = u0.is_rad();
    if !rad.rad {
        let (index, dist) = rad.worst.unwrap();
        return Err(Error::RadViolation { index, dist, bound: 2.0 * m.rad() });
    }
    let n = m.dim();
    let mut st = State {
        m,
        a: u0.values().iter().flat_map(|p| p.coords().iter().copied()).collect(),
        b: u0.breakpoints().to_vec(),
        len: plateau_lengths(u0.breakpoints()),
    };
    let mut outs: Vec<f64> = opts.output_times.iter().copied().filter(|&t| t > 0.0 && t <= opts.t_max).collect();
    outs.sort_by(f64::total_cmp);
    outs.dedup();
    let mut outs = outs.into_iter().peekable();
    let use_outs = !opts.output_times.is_empty();

    let mut frames = vec![st.frame(0.0, 0.0)?];
    let mut t = 0.0;
    let mut diss = 0.0;
    let mut steps = 0usize;
    let bound = 2.0 * m.rad();

    while st.len.len() > 1 && t < opts.t_max {
        let j = jumps(m, &st.a)?;
        let (v, _) = velocity_from(m, &j, &st.len);
        let mut h = opts.max_step.min(opts.t_max - t);
        let mut target = (opts.t_max - t <= opts.max_step).then_some(opts.t_max);
        if let Some(&to) = outs.peek() {
            if to - t <= h {
                h = to - t;
                target = Some(to);
            }
        }
        for i in 0..j.d.len() {
            // a small jump turns on the time scale d·ℓ, and its ends must not
            // overtake each other within a step
            let (vi, vj) = (&v[i * n..(i + 1) * n], &v[(i + 1) * n..(i + 2) * n]);
            let mut cap = STIFF * j.d[i] * st.len[i].min(st.len[i + 1]);
            let rel = dist(vi, vj);
            if rel > 0.0 {
                cap = cap.min(APPROACH * j.d[i] / rel);
            }
            if cap < h {
                h = cap;
                target = None;
            }
        }
        let (x, dd) = loop {
            if h < 1e-15 * (1.0 + t) {
                return Err(Error::StepUnderflow(t));
            }
            match st.rk4(h)? {
                Some(r) => break r,
                None => {
                    h *= 0.5;
                    target = None;
                }
            }
        };
        st.a = x;
        t = target.unwrap_or(t + h);
        diss += dd;
        steps += 1;

        let d = jumps_sizes(m, &st.a);
        if let Some((i, &worst)) = d.iter().enumerate().find(|(_, &di)| di >= bound) {
            return Err(Error::RadViolation { index: i, dist: worst, bound });
        }
        if d.iter().any(|&di| di <= opts.merge_tol) {
            // extrapolate to the collision instant, then merge
            let mut te = 0.0f64;
            if let Ok(j) = jumps(m, &st.a) {
                let (v, rate_e) = velocity_from(m, &j, &st.len);
                for i in 0..j.d.len() {
                    if j.d[i] > opts.merge_tol {
                        continue;
                    }
                    let rate = dot(&j.tm[i * n..(i + 1) * n], &v[i * n..(i + 1) * n])
                        - dot(&j.tp[i * n..(i + 1) * n], &v[(i + 1) * n..(i + 2) * n]);
                    if rate > 0.0 {
                        te = te.max(j.d[i] / rate);
                    }
                }
                te = te.min(opts.t_max - t).max(0.0);
                for (a, vi) in st.a.iter_mut().zip(&v) {
                    *a += te * vi;
                }
                let mut a = std::mem::take(&mut st.a);
                st.project(&mut a)?;
                st.a = a;
                diss += te * rate_e;
            }
            t += te;
            st.merge(opts.merge_tol)?;
            while outs.peek().is_some_and(|&to| to <= t) {
                outs.next();
            }
            frames.push(st.frame(t, diss)?);
            diss = 0.0;
            continue;
        }
        if use_outs {
            if outs.peek().is_some_and(|&to| to <= t) {
                outs.next();
                frames.push(st.frame(t, diss)?);
                diss = 0.0;
            }
        } else if steps % opts.snapshot_every.max(1) == 0 {
            frames.push(st.frame(t, diss)?);
            diss = 0.0;
        }
    }
    if frames.last().unwrap().t < t {
        frames.push(st.frame(t, diss)?);
    }
    // constant after stopping: fill in the requested snapshot times
    if st.len.len() == 1 {
        for to in outs {
            if to > t {
                frames.push(st.frame(to, 0.0)?);
            }
        }
    }
    Ok(FlowTrajectory {
        manifold: m,
        solver: SolverKind::ExactPc,
        dt: opts.max_step,
        epsilon: None,
        frames,
    })
}

fn jumps_sizes(m: ManifoldSpec, a: &[f64]) -> Vec<f64> {
    let n = m.dim();
    let rows: Vec<&[f64]> = a.chunks(n).collect();
    rows.windows(2).map(|w| m.dist_raw(w[0], w[1])).collect()
}
