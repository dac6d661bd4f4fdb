//! Standalone geometry experiments: the semiconvexity counterexamples on the
//! sphere and numeric checks of the comparison lemmas.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{dot, norm};
use crate::manifold::{ManifoldPoint, ManifoldSpec, TangentVector};
use crate::verify::CheckReport;

const S3: ManifoldSpec = ManifoldSpec::Sphere(3);

fn hav(x: f64) -> f64 {
    let s = (0.5 * x).sin();
    s * s
}

/// Side opposite to the angle `gamma` of a spherical triangle with sides a, b:
/// `hav c = hav(a − b) + sin a sin b hav γ`.
pub fn haversine_side(a: f64, b: f64, gamma: f64) -> f64 {
    let h = (hav(a - b) + a.sin() * b.sin() * hav(gamma)).clamp(0.0, 1.0);
    2.0 * h.sqrt().asin()
}

/// Inverse of [`haversine_side`] in γ.
pub fn haversine_angle(a: f64, b: f64, c: f64) -> f64 {
    let h = ((hav(c) - hav(a - b)) / (a.sin() * b.sin())).clamp(0.0, 1.0);
    2.0 * h.sqrt().asin()
}

/// Distance between the equatorial midpoints of the two vertical sides of the
/// side-`a` square centered at e1: `2 asin(tan(a/2))`.
pub fn midpoint_separation(a: f64) -> Result<f64> {
    if !(a > 0.0 && a <= 0.5 * PI) {
        return Err(Error::Invalid(format!("midpoint separation needs a in (0, pi/2], got {a}")));
    }
    // asin(tan x) = atan2(sin x, √cos 2x), better conditioned near a = π/2
    Ok(2.0 * (0.5 * a).sin().atan2(a.cos().max(0.0).sqrt()))
}

/// Vertices `[p0, p1, q0, q1]` of the square of side `a` on S² centered at e1.
/// p0/q0 and p1/q1 are mirror images in the e1-e3 plane, p0/p1 and q0/q1 in
/// the e1-e2 plane.
pub fn square_vertices(a: f64) -> Result<[ManifoldPoint; 4]> {
    if !(a > 0.0 && a < 0.5 * PI) {
        return Err(Error::Invalid(format!("square side must lie in (0, pi/2), got {a}")));
    }
    let phi = 0.5 * a;
    let (sp, cp) = phi.sin_cos();
    // same latitude phi, longitudes ±lam, great-circle distance a
    let lam = 0.5 * ((a.cos() - sp * sp) / (cp * cp)).clamp(-1.0, 1.0).acos();
    let (sl, cl) = lam.sin_cos();
    let pt = |y: f64, z: f64| ManifoldPoint::new(S3, vec![cp * cl, y * cp * sl, z * sp]);
    Ok([pt(1.0, 1.0)?, pt(1.0, -1.0)?, pt(-1.0, 1.0)?, pt(-1.0, -1.0)?])
}

/// Largest ε ∈ (0, 1/2] for which `a − λεa/4 < midpoint_separation(a)`
/// still fails to be ruled out, i.e. `min(1/2, 4(sep − a)/(λa))`; every λ ≤ 0
/// gives the cap.
pub fn lambda_convexity_violation(lambda: f64, a: f64) -> Result<f64> {
    if !(a > 0.0 && a < 0.5 * PI) {
        return Err(Error::Invalid(format!("a must lie in (0, pi/2), got {a}")));
    }
    let sep = midpoint_separation(a)?;
    if lambda <= 0.0 {
        return Ok(0.5);
    }
    Ok((4.0 * (sep - a) / (lambda * a)).min(0.5))
}

/// LHS − RHS of `2 asin(tan(1/(8n(n+1)))) > 1/(4n(n+1)) + 3/(2^(n+5) n (n+1)²)`.
pub fn semiconvexity_gap(n: u32) -> f64 {
    let nf = n as f64;
    let k = nf * (nf + 1.0);
    let x = 1.0 / (8.0 * k);
    // 2(asin(tan x) − x) keeps the O(x³) difference away from cancellation
    let lhs_minus = 2.0 * (x.tan().asin() - x);
    lhs_minus - 3.0 / (2f64.powi(n as i32 + 5) * nf * (nf + 1.0) * (nf + 1.0))
}

/// Smallest n ≤ n_max with a positive gap.
pub fn first_positive_gap(n_max: u32) -> Option<u32> {
    (1..=n_max).find(|&n| semiconvexity_gap(n) > 0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HessianEstimate {
    pub r: f64,
    /// h_N(r)
    pub bound: f64,
    pub min_estimate: f64,
    /// along log_p p0, when p ≠ p0
    pub radial: Option<f64>,
    /// orthogonal to log_p p0, when the tangent space has room
    pub tangential: Option<f64>,
}

impl HessianEstimate {
    pub fn report(&self, tol: f64) -> CheckReport {
        CheckReport::new("hessian", self.bound - self.min_estimate, 0.0, None, tol)
    }
}

const HESS_STEP: f64 = 1e-4;

/// d²/ds² of ½dist²(exp_p(sX), p0) at 0 by central differences with one
/// Richardson extrapolation.
pub fn hessian_second_derivative(m: ManifoldSpec, p0: &ManifoldPoint, p: &ManifoldPoint, x: &TangentVector) -> f64 {
    let f = |s: f64| {
        let q = m.exp(p, &x.scaled(s));
        let d = m.dist(&q, p0);
        0.5 * d * d
    };
    let f0 = f(0.0);
    let d2 = |s: f64| (f(s) - 2.0 * f0 + f(-s)) / (s * s);
    (4.0 * d2(0.5 * HESS_STEP) - d2(HESS_STEP)) / 3.0
}

fn unit(v: TangentVector) -> Option<TangentVector> {
    let n = v.norm();
    (n > 1e-8).then(|| v.scaled(1.0 / n))
}

/// Estimates Hess ½r²_{p0} at p over `n_dirs` random unit directions plus the
/// radial and one tangential direction.
pub fn hessian_comparison_check<R: Rng + ?Sized>(
    m: ManifoldSpec,
    p0: &ManifoldPoint,
    p: &ManifoldPoint,
    n_dirs: usize,
    rng: &mut R,
) -> Result<HessianEstimate> {
    let r = m.dist(p, p0);
    let bound = m.h_n(r)?;
    let mut min_estimate = f64::INFINITY;
    for _ in 0..n_dirs {
        let Some(x) = unit(m.random_tangent(p, rng)) else { continue };
        min_estimate = min_estimate.min(hessian_second_derivative(m, p0, p, &x));
    }
    let (mut radial, mut tangential) = (None, None);
    if r > 0.0 {
        let g = m.log(p, p0)?;
        let g = g.scaled(1.0 / g.norm());
        let h = hessian_second_derivative(m, p0, p, &g);
        radial = Some(h);
        min_estimate = min_estimate.min(h);
        // Gram-Schmidt against the radial direction
        for _ in 0..8 {
            let v = m.random_tangent(p, rng);
            let c = dot(&v.vec, &g.vec);
            let w: Vec<f64> = v.vec.iter().zip(&g.vec).map(|(a, b)| a - c * b).collect();
            if let Some(t) = unit(m.tangent_projection(p, &w)) {
                let h = hessian_second_derivative(m, p0, p, &t);
                tangential = Some(h);
                min_estimate = min_estimate.min(h);
                break;
            }
        }
    }
    Ok(HessianEstimate { r, bound, min_estimate, radial, tangential })
}

/// A geodesic triangle on S² ⊂ R³ with its side lengths and vertex angles.
/// Side `a` is opposite vertex A (angle α) and so on.
#[derive(Debug, Clone, PartialEq)]
pub struct SphericalTriangle {
    pub vertices: [ManifoldPoint; 3],
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

fn angle_between(u: &[f64], v: &[f64]) -> f64 {
    (dot(u, v) / (norm(u) * norm(v))).clamp(-1.0, 1.0).acos()
}

impl SphericalTriangle {
    pub fn new(pa: ManifoldPoint, pb: ManifoldPoint, pc: ManifoldPoint) -> Result<Self> {
        let m = S3;
        for p in [&pa, &pb, &pc] {
            if p.coords().len() != 3 {
                return Err(Error::WrongManifold("triangles live on sphere:3".into()));
            }
        }
        let (a, b, c) = (m.dist(&pb, &pc), m.dist(&pa, &pc), m.dist(&pa, &pb));
        let slack = (a + b - c).min(a + c - b).min(b + c - a);
        if a.min(b).min(c) < 1e-12 || slack < 1e-12 || a + b + c >= 2.0 * PI - 1e-12 {
            return Err(Error::DegenerateTriangle);
        }
        let ang = |p: &ManifoldPoint, q: &ManifoldPoint, r: &ManifoldPoint| -> Result<f64> {
            let (tq, _) = m.unit_tangent_pair(p, q).map_err(|_| Error::DegenerateTriangle)?;
            let (tr, _) = m.unit_tangent_pair(p, r).map_err(|_| Error::DegenerateTriangle)?;
            Ok(angle_between(&tq.vec, &tr.vec))
        };
        let alpha = ang(&pa, &pb, &pc)?;
        let beta = ang(&pb, &pa, &pc)?;
        let gamma = ang(&pc, &pa, &pb)?;
        Ok(SphericalTriangle { vertices: [pa, pb, pc], a, b, c, alpha, beta, gamma })
    }

    /// Random triangle with vertices within `r` of a random center.
    pub fn random<R: Rng + ?Sized>(r: f64, rng: &mut R) -> Result<Self> {
        let c = S3.random_point(rng);
        let mut pick = || {
            let s = r * rng.gen::<f64>().sqrt();
            S3.random_point_at(&c, s, rng)
        };
        let (pa, pb, pc) = (pick(), pick(), pick());
        SphericalTriangle::new(pa, pb, pc)
    }

    /// Angles of the Euclidean triangle with the same side lengths.
    pub fn planar_angles(&self) -> [f64; 3] {
        let law = |opp: f64, s1: f64, s2: f64| ((s1 * s1 + s2 * s2 - opp * opp) / (2.0 * s1 * s2)).clamp(-1.0, 1.0).acos();
        [law(self.a, self.b, self.c), law(self.b, self.a, self.c), law(self.c, self.a, self.b)]
    }
}

/// Each spherical angle is at least its planar counterpart, within 1e-9.
pub fn alexandrov_angle_check(tri: &SphericalTriangle) -> CheckReport {
    let planar = tri.planar_angles();
    let worst = [tri.alpha, tri.beta, tri.gamma]
        .iter()
        .zip(planar)
        .map(|(s, p)| p - s)
        .fold(f64::NEG_INFINITY, f64::max);
    CheckReport::new("alexandrov", worst, 0.0, None, 1e-9)
}

const SEG_SAMPLES: usize = 65;

/// inf over the segment from p to q of the distance to x. Closed form on
/// spheres and flat spaces, a sampled search otherwise.
pub fn dist_to_segment(m: ManifoldSpec, x: &[f64], p: &[f64], q: &[f64]) -> Result<f64> {
    match m {
        ManifoldSpec::Euclidean(_) => Ok(flat_dist_to_segment(x, p, q)),
        _ if m.is_spherical() => sphere_dist_to_segment(m, x, p, q),
        _ => search_dist_to_segment(m, x, p, q),
    }
}

fn flat_dist_to_segment(x: &[f64], p: &[f64], q: &[f64]) -> f64 {
    let d: Vec<f64> = q.iter().zip(p).map(|(a, b)| a - b).collect();
    let dd = dot(&d, &d);
    let s = if dd > 0.0 {
        let xp: Vec<f64> = x.iter().zip(p).map(|(a, b)| a - b).collect();
        (dot(&xp, &d) / dd).clamp(0.0, 1.0)
    } else {
        0.0
    };
    x.iter().zip(p).zip(&d).map(|((xi, pi), di)| (xi - pi - s * di).powi(2)).sum::<f64>().sqrt()
}

/// The arc from p to q sits in the plane spanned by p and the unit e2 ⟂ p
/// towards q. Distance to a circle point at angle φ is decreasing in the
/// angular gap to the projection of x, so the minimizer is that projection
/// when it falls on the arc and an endpoint otherwise.
fn sphere_dist_to_segment(m: ManifoldSpec, x: &[f64], p: &[f64], q: &[f64]) -> Result<f64> {
    let alpha = m.dist_raw(p, q);
    if alpha >= m.injectivity_radius() {
        return Err(Error::BeyondInjectivityRadius { dist: alpha, inj: m.injectivity_radius() });
    }
    let ends = m.dist_raw(x, p).min(m.dist_raw(x, q));
    let pq = dot(p, q);
    let mut e2: Vec<f64> = q.iter().zip(p).map(|(a, b)| a - pq * b).collect();
    let n2 = dot(&e2, &e2).sqrt();
    if n2 < 1e-300 {
        return Ok(ends);
    }
    e2.iter_mut().for_each(|v| *v /= n2);
    let (c1, c2) = (dot(x, p), dot(x, &e2));
    let theta = c2.atan2(c1);
    if !(0.0..=alpha).contains(&theta) {
        return Ok(ends);
    }
    let r = c1.hypot(c2);
    let off: f64 = x.iter().zip(p).zip(&e2).map(|((xi, pi), ei)| (xi - c1 * pi - c2 * ei).powi(2)).sum::<f64>().sqrt();
    Ok(off.atan2(r).min(ends))
}

fn search_dist_to_segment(m: ManifoldSpec, x: &[f64], p: &[f64], q: &[f64]) -> Result<f64> {
    let n = m.dim();
    let mut buf = vec![0.0; n];
    let mut at = |s: f64| -> Result<f64> {
        m.geodesic_point_raw(p, q, s, &mut buf)?;
        Ok(m.dist_raw(x, &buf))
    };
    let k = SEG_SAMPLES - 1;
    let mut best = (0usize, f64::INFINITY);
    for i in 0..=k {
        let d = at(i as f64 / k as f64)?;
        if d < best.1 {
            best = (i, d);
        }
    }
    let (mut lo, mut hi) = (best.0.saturating_sub(1) as f64 / k as f64, (best.0 + 1).min(k) as f64 / k as f64);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut m1 = hi - g * (hi - lo);
    let mut m2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (at(m1)?, at(m2)?);
    for _ in 0..60 {
        if f1 < f2 {
            hi = m2;
            m2 = m1;
            f2 = f1;
            m1 = hi - g * (hi - lo);
            f1 = at(m1)?;
        } else {
            lo = m1;
            m1 = m2;
            f1 = f2;
            m2 = lo + g * (hi - lo);
            f2 = at(m2)?;
        }
    }
    Ok(best.1.min(f1).min(f2))
}

/// One-sided Hausdorff distance from the segment p1→q1 to the segment p2→q2
/// over its max endpoint displacement; 0 when both segments coincide.
pub fn geodesic_endpoint_stability(
    m: ManifoldSpec,
    p1: &ManifoldPoint,
    q1: &ManifoldPoint,
    p2: &ManifoldPoint,
    q2: &ManifoldPoint,
) -> Result<f64> {
    let inj = m.injectivity_radius();
    for (a, b) in [(p1, q1), (p2, q2)] {
        let d = m.dist(a, b);
        if d >= inj {
            return Err(Error::BeyondInjectivityRadius { dist: d, inj });
        }
    }
    let denom = m.dist(p1, p2).max(m.dist(q1, q2));
    if denom == 0.0 {
        return Ok(0.0);
    }
    let n = m.dim();
    let mut x = vec![0.0; n];
    let mut worst: f64 = 0.0;
    for i in 0..SEG_SAMPLES {
        m.geodesic_point_raw(p1.coords(), q1.coords(), i as f64 / (SEG_SAMPLES - 1) as f64, &mut x)?;
        worst = worst.max(dist_to_segment(m, &x, p2.coords(), q2.coords())?);
    }
    Ok(worst / denom)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilitySweep {
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
}

impl StabilitySweep {
    /// `bins` equal bins over [0, max_ratio]: (lower edge, upper edge, count).
    pub fn histogram(&self, bins: usize) -> Vec<(f64, f64, usize)> {
        let top = if self.max_ratio > 0.0 { self.max_ratio } else { 1.0 };
        let w = top / bins as f64;
        let mut counts = vec![0usize; bins];
        for &r in &self.ratios {
            counts[((r / w) as usize).min(bins - 1)] += 1;
        }
        counts.into_iter().enumerate().map(|(i, c)| (i as f64 * w, (i + 1) as f64 * w, c)).collect()
    }
}

/// `n_samples` random quadruples in a ball of radius `r` around a random
/// center. Sample i draws from its own ChaCha8 stream, so the result does
/// not depend on thread scheduling.
pub fn stability_sweep(m: ManifoldSpec, r: f64, n_samples: usize, seed: u64) -> Result<StabilitySweep> {
    if !(r > 0.0 && r < m.rad()) {
        return Err(Error::Invalid(format!("ball radius {r} must lie in (0, rad = {})", m.rad())));
    }
    let ratios = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let c = m.random_point(&mut rng);
            let mut pick = || {
                let s = r * rng.gen::<f64>();
                m.random_point_at(&c, s, &mut rng)
            };
            let (p1, q1, p2, q2) = (pick(), pick(), pick(), pick());
            geodesic_endpoint_stability(m, &p1, &q1, &p2, &q2)
        })
        .collect::<Result<Vec<f64>>>()?;
    let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
    Ok(StabilitySweep { ratios, max_ratio })
}

/// sup dist(w(x), γ) over the nodes of `w`, γ the segment joining its
/// endpoints, against `c_emp·∫|f|` with `f` the nodal velocity (flat rows).
pub fn one_harmonic_residual_bound(w: &crate::curve::SampledCurve, f: &[f64], c_emp: f64) -> Result<CheckReport> {
    let m = w.manifold();
    let tv = w.tv_geodesic();
    let limit = 2.0 * m.rad();
    if tv > limit {
        return Err(Error::WindowTooLong { tv, limit });
    }
    let n = w.grid_n();
    let dim = m.dim();
    if f.len() != n * dim {
        return Err(Error::Invalid(format!("velocity has {} entries, expected {}", f.len(), n * dim)));
    }
    let (p, q) = (w.value(0), w.value(n - 1));
    let mut sup: f64 = 0.0;
    let mut at_x = 0.0;
    for i in 0..n {
        let d = dist_to_segment(m, w.value(i), p, q)?;
        if d > sup {
            sup = d;
            at_x = w.x(i);
        }
    }
    let h = w.h();
    let l1: f64 = f
        .chunks(dim)
        .enumerate()
        .map(|(i, v)| norm(v) * if i == 0 || i == n - 1 { 0.5 * h } else { h })
        .sum();
    Ok(CheckReport::new("one_harmonic", sup - c_emp * l1, 0.0, Some(at_x), 1e-12))
}
