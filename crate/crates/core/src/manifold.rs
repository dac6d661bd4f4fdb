//! The four built-in embedded manifolds and their closed-form geometry.
//!
//! Points are stored in ambient coordinates. The slice-level methods on
//! [`ManifoldSpec`] (`*_into`, `project_in_place`) are what the solvers use in
//! their inner loops; [`ManifoldPoint`] and [`TangentVector`] wrap them for the
//! public API.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm};

/// Residual allowed on stored points.
pub const CONSTRAINT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ManifoldSpec {
    Euclidean(usize),
    /// The unit circle in R², i.e. `Sphere(2)`.
    Circle,
    /// Unit sphere in R^N.
    Sphere(usize),
    /// S¹ × R embedded in R³ as `(cos θ, sin θ, h)`.
    Cylinder,
}

impl fmt::Display for ManifoldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ManifoldSpec::Euclidean(n) => write!(f, "euclidean:{n}"),
            ManifoldSpec::Circle => write!(f, "circle"),
            ManifoldSpec::Sphere(n) => write!(f, "sphere:{n}"),
            ManifoldSpec::Cylinder => write!(f, "cylinder"),
        }
    }
}

impl FromStr for ManifoldSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let dim = |rest: &str| -> Result<usize> {
            rest.parse::<usize>()
                .map_err(|_| Error::Parse(format!("bad dimension in manifold id {s:?}")))
        };
        match s.split_once(':') {
            None if s == "circle" => Ok(ManifoldSpec::Circle),
            None if s == "cylinder" => Ok(ManifoldSpec::Cylinder),
            Some(("euclidean", n)) => {
                let n = dim(n)?;
                if n == 0 {
                    return Err(Error::Parse("euclidean needs N >= 1".into()));
                }
                Ok(ManifoldSpec::Euclidean(n))
            }
            Some(("sphere", n)) => {
                let n = dim(n)?;
                if n < 2 {
                    return Err(Error::Parse("sphere needs N >= 2".into()));
                }
                Ok(ManifoldSpec::Sphere(n))
            }
            _ => Err(Error::Parse(format!("unknown manifold id {s:?}"))),
        }
    }
}

impl TryFrom<String> for ManifoldSpec {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ManifoldSpec> for String {
    fn from(m: ManifoldSpec) -> String {
        m.to_string()
    }
}

/// Ambient coordinates of a point on one of the built-in manifolds.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldPoint {
    coords: Vec<f64>,
}

impl ManifoldPoint {
    /// Checked constructor: the constraint residual must be below [`CONSTRAINT_TOL`].
    pub fn new(m: ManifoldSpec, coords: Vec<f64>) -> Result<Self> {
        if coords.len() != m.dim() {
            return Err(Error::Invalid(format!(
                "{} coordinates given for {m} (needs {})",
                coords.len(),
                m.dim()
            )));
        }
        let r = m.constraint_residual(&coords);
        if !(r <= CONSTRAINT_TOL) {
            return Err(Error::Invalid(format!(
                "point {coords:?} is off {m} (residual {r:e})"
            )));
        }
        Ok(ManifoldPoint { coords })
    }

    /// Wraps coordinates already known to be on the manifold.
    pub(crate) fn from_raw(coords: Vec<f64>) -> Self {
        ManifoldPoint { coords }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }
}

/// A vector in the tangent space at `base`, in ambient coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    pub base: ManifoldPoint,
    pub vec: Vec<f64>,
}

impl TangentVector {
    pub fn norm(&self) -> f64 {
        norm(&self.vec)
    }

    pub fn scaled(&self, s: f64) -> TangentVector {
        TangentVector {
            base: self.base.clone(),
            vec: self.vec.iter().map(|x| x * s).collect(),
        }
    }
}

/// Closest-point retraction onto `m`.
pub fn project_point(m: ManifoldSpec, x: &[f64]) -> Result<ManifoldPoint> {
    let mut v = x.to_vec();
    m.project_in_place(&mut v)?;
    Ok(ManifoldPoint::from_raw(v))
}

/// Geodesic distance on a unit circle/sphere between unit vectors.
#[inline]
fn sphere_dist(p: &[f64], q: &[f64]) -> f64 {
    let mut dm = 0.0;
    let mut sp = 0.0;
    for (a, b) in p.iter().zip(q) {
        dm += (a - b) * (a - b);
        sp += (a + b) * (a + b);
    }
    2.0 * dm.sqrt().atan2(sp.sqrt())
}

fn sphere_log(p: &[f64], q: &[f64], out: &mut [f64]) -> Result<f64> {
    let d = sphere_dist(p, q);
    if d >= PI {
        return Err(Error::BeyondInjectivityRadius { dist: d, inj: PI });
    }
    // w = (q - p) - ((q - p)·p) p, the tangential part of q at p
    let mut c = 0.0;
    for (a, b) in p.iter().zip(q) {
        c += (b - a) * a;
    }
    let mut nw = 0.0;
    for ((o, a), b) in out.iter_mut().zip(p).zip(q) {
        *o = (b - a) - c * a;
        nw += *o * *o;
    }
    let nw = nw.sqrt();
    if d == 0.0 || nw == 0.0 {
        out.iter_mut().for_each(|o| *o = 0.0);
        return Ok(0.0);
    }
    let s = d / nw;
    out.iter_mut().for_each(|o| *o *= s);
    Ok(d)
}

fn sphere_exp(p: &[f64], v: &[f64], out: &mut [f64]) {
    let nv = norm(v);
    if nv == 0.0 {
        out.copy_from_slice(p);
        return;
    }
    let (s, c) = nv.sin_cos();
    let k = s / nv;
    for ((o, a), b) in out.iter_mut().zip(p).zip(v) {
        *o = c * a + k * b;
    }
    let n = norm(out);
    out.iter_mut().for_each(|o| *o /= n);
}

impl ManifoldSpec {
    /// Ambient dimension N.
    pub fn dim(&self) -> usize {
        match *self {
            ManifoldSpec::Euclidean(n) | ManifoldSpec::Sphere(n) => n,
            ManifoldSpec::Circle => 2,
            ManifoldSpec::Cylinder => 3,
        }
    }

    /// K_N, the supremum of sectional curvatures.
    pub fn curvature_bound(&self) -> f64 {
        match self {
            ManifoldSpec::Euclidean(_) | ManifoldSpec::Cylinder => 0.0,
            ManifoldSpec::Circle | ManifoldSpec::Sphere(_) => 1.0,
        }
    }

    /// inj_N
    pub fn injectivity_radius(&self) -> f64 {
        match self {
            ManifoldSpec::Euclidean(_) => f64::INFINITY,
            _ => PI,
        }
    }

    /// rad_N = ½ min{inj_N, π/√K_N}.
    pub fn rad(&self) -> f64 {
        let k = self.curvature_bound();
        let c = if k > 0.0 { PI / k.sqrt() } else { f64::INFINITY };
        0.5 * self.injectivity_radius().min(c)
    }

    /// Sphere or circle.
    pub fn is_spherical(&self) -> bool {
        matches!(self, ManifoldSpec::Circle | ManifoldSpec::Sphere(_))
    }

    pub fn constraint_residual(&self, x: &[f64]) -> f64 {
        match self {
            ManifoldSpec::Euclidean(_) => {
                if x.iter().all(|v| v.is_finite()) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            ManifoldSpec::Circle | ManifoldSpec::Sphere(_) => (norm(x) - 1.0).abs(),
            ManifoldSpec::Cylinder => (norm(&x[..2]) - 1.0).abs() + if x[2].is_finite() { 0.0 } else { f64::INFINITY },
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && self.constraint_residual(x) <= CONSTRAINT_TOL
    }

    pub fn project_in_place(&self, x: &mut [f64]) -> Result<()> {
        let part = match self {
            ManifoldSpec::Euclidean(_) => return Ok(()),
            ManifoldSpec::Circle | ManifoldSpec::Sphere(_) => &mut x[..],
            ManifoldSpec::Cylinder => &mut x[..2],
        };
        let n = norm(part);
        if !(n > 1e-300) || !n.is_finite() {
            return Err(Error::SingularProjection(x.to_vec()));
        }
        part.iter_mut().for_each(|v| *v /= n);
        Ok(())
    }

    /// Orthogonal projection of `v` onto T_pN, in place.
    pub fn project_tangent_in_place(&self, p: &[f64], v: &mut [f64]) {
        match self {
            ManifoldSpec::Euclidean(_) => {}
            ManifoldSpec::Circle | ManifoldSpec::Sphere(_) => {
                let c = dot(v, p);
                for (a, b) in v.iter_mut().zip(p) {
                    *a -= c * b;
                }
            }
            ManifoldSpec::Cylinder => {
                let c = v[0] * p[0] + v[1] * p[1];
                v[0] -= c * p[0];
                v[1] -= c * p[1];
            }
        }
    }

    pub fn dist_raw(&self, p: &[f64], q: &[f64]) -> f64 {
        match self {
            ManifoldSpec::Euclidean(_) => crate::linalg::dist(p, q),
            ManifoldSpec::Circle | ManifoldSpec::Sphere(_) => sphere_dist(p, q),
            ManifoldSpec::Cylinder => {
                let th = sphere_dist(&p[..2], &q[..2]);
                let dh = q[2] - p[2];
                th.hypot(dh)
            }
        }
    }

    /// Writes log_p q into `out` and returns dist(p, q).
    pub fn log_into(&self, p: &[f64], q: &[f64], out: &mut [f64]) -> Result<f64> {
        match self {
            ManifoldSpec::Euclidean(_) => {
                for ((o, a), b) in out.iter_mut().zip(p).zip(q) {
                    *o = b - a;
                }
                Ok(norm(out))
            }
            ManifoldSpec::Circle | ManifoldSpec::Sphere(_) => sphere_log(p, q, out),
            ManifoldSpec::Cylinder => {
                let d = self.dist_raw(p, q);
                if d >= PI {
                    return Err(Error::BeyondInjectivityRadius { dist: d, inj: PI });
                }
                sphere_log(&p[..2], &q[..2], &mut out[..2])?;
                out[2] = q[2] - p[2];
                Ok(d)
            }
        }
    }

    /// Writes exp_p v into `out`; the result is renormalized onto the manifold.
    pub fn exp_into(&self, p: &[f64], v: &[f64], out: &mut [f64]) {
        match self {
            ManifoldSpec::Euclidean(_) => {
                for ((o, a), b) in out.iter_mut().zip(p).zip(v) {
                    *o = a + b;
                }
            }
            ManifoldSpec::Circle | ManifoldSpec::Sphere(_) => sphere_exp(p, v, out),
            ManifoldSpec::Cylinder => {
                sphere_exp(&p[..2], &v[..2], &mut out[..2]);
                out[2] = p[2] + v[2];
            }
        }
    }

    // ---- typed API ----

    pub fn tangent_projection(&self, p: &ManifoldPoint, v: &[f64]) -> TangentVector {
        let mut w = v.to_vec();
        self.project_tangent_in_place(p.coords(), &mut w);
        TangentVector { base: p.clone(), vec: w }
    }

    pub fn dist(&self, p: &ManifoldPoint, q: &ManifoldPoint) -> f64 {
        self.dist_raw(p.coords(), q.coords())
    }

    pub fn exp(&self, p: &ManifoldPoint, v: &TangentVector) -> ManifoldPoint {
        let mut out = vec![0.0; self.dim()];
        self.exp_into(p.coords(), &v.vec, &mut out);
        ManifoldPoint::from_raw(out)
    }

    pub fn log(&self, p: &ManifoldPoint, q: &ManifoldPoint) -> Result<TangentVector> {
        let mut out = vec![0.0; self.dim()];
        self.log_into(p.coords(), q.coords(), &mut out)?;
        Ok(TangentVector { base: p.clone(), vec: out })
    }

    /// Point at fraction `s` of the minimizing geodesic from `p` to `q`.
    pub fn geodesic_point(&self, p: &ManifoldPoint, q: &ManifoldPoint, s: f64) -> Result<ManifoldPoint> {
        let mut out = vec![0.0; self.dim()];
        self.geodesic_point_raw(p.coords(), q.coords(), s, &mut out)?;
        Ok(ManifoldPoint::from_raw(out))
    }

    pub fn geodesic_point_raw(&self, p: &[f64], q: &[f64], s: f64, out: &mut [f64]) -> Result<()> {
        let mut v = vec![0.0; self.dim()];
        self.log_into(p, q, &mut v)?;
        if s == 0.0 {
            out.copy_from_slice(p);
        } else if s == 1.0 {
            out.copy_from_slice(q);
        } else {
            v.iter_mut().for_each(|x| *x *= s);
            self.exp_into(p, &v, out);
        }
        Ok(())
    }

    /// Unit tangents (T⁻ at p, T⁺ at q) of the minimizing segment from p to q.
    pub fn unit_tangent_pair(&self, p: &ManifoldPoint, q: &ManifoldPoint) -> Result<(TangentVector, TangentVector)> {
        let n = self.dim();
        let (mut a, mut b) = (vec![0.0; n], vec![0.0; n]);
        self.unit_tangent_pair_raw(p.coords(), q.coords(), &mut a, &mut b)?;
        Ok((
            TangentVector { base: p.clone(), vec: a },
            TangentVector { base: q.clone(), vec: b },
        ))
    }

    /// Raw form of [`unit_tangent_pair`](Self::unit_tangent_pair); returns the distance.
    pub fn unit_tangent_pair_raw(&self, p: &[f64], q: &[f64], tm: &mut [f64], tp: &mut [f64]) -> Result<f64> {
        let d = self.log_into(p, q, tm)?;
        if d == 0.0 {
            return Err(Error::DegenerateJump);
        }
        self.log_into(q, p, tp)?;
        let (nm, np) = (norm(tm), norm(tp));
        tm.iter_mut().for_each(|x| *x /= nm);
        tp.iter_mut().for_each(|x| *x /= -np);
        Ok(d)
    }

    /// A_p(X, Y), normal-valued. On the sphere this is `p (X·Y)`, the sign for
    /// which the ambient derivative of a unit tangent field z along u satisfies
    /// `π_u z_x = z_x + A_u(z, z)|u_x|`.
    pub fn second_fundamental_form(&self, p: &ManifoldPoint, x: &TangentVector, y: &TangentVector) -> Vec<f64> {
        let p = p.coords();
        match self {
            ManifoldSpec::Euclidean(n) => vec![0.0; *n],
            ManifoldSpec::Circle | ManifoldSpec::Sphere(_) => {
                let c = dot(&x.vec, &y.vec);
                p.iter().map(|a| a * c).collect()
            }
            ManifoldSpec::Cylinder => {
                let c = x.vec[0] * y.vec[0] + x.vec[1] * y.vec[1];
                vec![p[0] * c, p[1] * c, 0.0]
            }
        }
    }

    /// h_N(σ): 1 when K_N ≤ 0, else √K σ cot(√K σ).
    pub fn h_n(&self, sigma: f64) -> Result<f64> {
        let limit = 2.0 * self.rad();
        if !(sigma >= 0.0) || sigma >= limit {
            return Err(Error::OutOfComparisonRange { sigma, limit });
        }
        let k = self.curvature_bound();
        if k <= 0.0 {
            return Ok(1.0);
        }
        let s = k.sqrt() * sigma;
        if s < 1e-6 {
            return Ok(1.0 - s * s / 3.0);
        }
        Ok(s * s.cos() / s.sin())
    }

    /// A random point: uniform on spheres/circle, standard normal elsewhere
    /// (height of the cylinder included).
    pub fn random_point<R: Rng + ?Sized>(&self, rng: &mut R) -> ManifoldPoint {
        loop {
            let mut x: Vec<f64> = (0..self.dim()).map(|_| rng.sample(StandardNormal)).collect();
            if self.project_in_place(&mut x).is_ok() {
                return ManifoldPoint::from_raw(x);
            }
        }
    }

    /// Standard Gaussian vector projected to T_pN.
    pub fn random_tangent<R: Rng + ?Sized>(&self, p: &ManifoldPoint, rng: &mut R) -> TangentVector {
        let v: Vec<f64> = (0..self.dim()).map(|_| rng.sample(StandardNormal)).collect();
        self.tangent_projection(p, &v)
    }

    /// A random point at distance exactly `r` from `p` (r < inj).
    pub fn random_point_at<R: Rng + ?Sized>(&self, p: &ManifoldPoint, r: f64, rng: &mut R) -> ManifoldPoint {
        loop {
            let v = self.random_tangent(p, rng);
            let n = v.norm();
            if n > 1e-6 {
                return self.exp(p, &v.scaled(r / n));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const S3: ManifoldSpec = ManifoldSpec::Sphere(3);

    fn pt(m: ManifoldSpec, c: &[f64]) -> ManifoldPoint {
        ManifoldPoint::new(m, c.to_vec()).unwrap()
    }

    fn e(i: usize) -> ManifoldPoint {
        let mut c = vec![0.0; 3];
        c[i] = 1.0;
        ManifoldPoint::from_raw(c)
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    const ALL: [ManifoldSpec; 5] = [
        ManifoldSpec::Euclidean(1),
        ManifoldSpec::Euclidean(3),
        ManifoldSpec::Circle,
        ManifoldSpec::Sphere(3),
        ManifoldSpec::Cylinder,
    ];

    #[test]
    fn parse_and_display_round_trip() {
        for m in ALL {
            assert_eq!(m.to_string().parse::<ManifoldSpec>().unwrap(), m);
        }
        assert!("sphere:1".parse::<ManifoldSpec>().is_err());
        assert!("torus".parse::<ManifoldSpec>().is_err());
        assert!("euclidean:x".parse::<ManifoldSpec>().is_err());
    }

    #[test]
    fn curvature_scalars() {
        assert_eq!(S3.rad(), PI / 2.0);
        assert_eq!(ManifoldSpec::Cylinder.rad(), PI / 2.0);
        assert_eq!(ManifoldSpec::Circle.injectivity_radius(), PI);
        assert!(ManifoldSpec::Euclidean(2).rad().is_infinite());
        assert_eq!(ManifoldSpec::Cylinder.curvature_bound(), 0.0);
    }

    #[test]
    fn projection_examples() {
        assert_eq!(project_point(S3, &[2.0, 0.0, 0.0]).unwrap().coords(), &[1.0, 0.0, 0.0]);
        let m = ManifoldSpec::Euclidean(2);
        assert_eq!(project_point(m, &[0.3, -2.0]).unwrap().coords(), &[0.3, -2.0]);
        assert!(matches!(project_point(S3, &[0.0; 3]), Err(Error::SingularProjection(_))));
        assert!(project_point(ManifoldSpec::Cylinder, &[0.0, 0.0, 4.0]).is_err());
        assert_eq!(project_point(ManifoldSpec::Cylinder, &[0.0, 3.0, 4.0]).unwrap().coords(), &[0.0, 1.0, 4.0]);
    }

    #[test]
    fn tangent_projection_examples() {
        assert_eq!(S3.tangent_projection(&e(0), &[1.0, 0.0, 0.0]).vec, vec![0.0; 3]);
        assert_eq!(S3.tangent_projection(&e(0), &[0.0, 1.0, 0.0]).vec, vec![0.0, 1.0, 0.0]);
        let m = ManifoldSpec::Euclidean(3);
        let p = pt(m, &[1.0, 2.0, 3.0]);
        assert_eq!(m.tangent_projection(&p, &[4.0, 5.0, 6.0]).vec, vec![4.0, 5.0, 6.0]);
    }

    #[test]
    fn distance_examples() {
        assert!((S3.dist(&e(0), &e(1)) - PI / 2.0).abs() < 1e-15);
        let p = pt(S3, &[0.6, 0.0, 0.8]);
        let q = pt(S3, &[-0.6, 0.0, -0.8]);
        assert!((S3.dist(&p, &q) - PI).abs() < 1e-15);
        let c = ManifoldSpec::Cylinder;
        assert!((c.dist(&pt(c, &[1.0, 0.0, 0.0]), &pt(c, &[1.0, 0.0, 2.5])) - 2.5).abs() < 1e-15);
    }

    #[test]
    fn exp_examples() {
        let v = S3.tangent_projection(&e(0), &[0.0, PI / 2.0, 0.0]);
        assert!(close(S3.exp(&e(0), &v).coords(), &[0.0, 1.0, 0.0], 1e-15));
        let m = ManifoldSpec::Euclidean(2);
        let p = pt(m, &[1.0, 2.0]);
        assert_eq!(m.exp(&p, &m.tangent_projection(&p, &[0.5, -1.0])).coords(), &[1.5, 1.0]);
        let c = ManifoldSpec::Circle;
        let p = pt(c, &[1.0, 0.0]);
        let q = c.exp(&p, &c.tangent_projection(&p, &[0.0, PI]));
        assert!(close(q.coords(), &[-1.0, 0.0], 1e-15));
        assert_eq!(S3.exp(&e(2), &S3.tangent_projection(&e(2), &[0.0; 3])), e(2));
    }

    #[test]
    fn log_examples() {
        let v = S3.log(&e(0), &e(1)).unwrap();
        assert!(close(&v.vec, &[0.0, PI / 2.0, 0.0], 1e-15));
        assert_eq!(S3.log(&e(1), &e(1)).unwrap().vec, vec![0.0; 3]);
        let anti = pt(S3, &[-1.0, 0.0, 0.0]);
        assert!(matches!(S3.log(&e(0), &anti), Err(Error::BeyondInjectivityRadius { .. })));
        // just inside the cut locus still works
        let near = S3.exp(&e(0), &S3.tangent_projection(&e(0), &[0.0, 0.999 * PI, 0.0]));
        let v = S3.log(&e(0), &near).unwrap();
        assert!((v.norm() - 0.999 * PI).abs() < 1e-12);
    }

    #[test]
    fn geodesic_point_examples() {
        let p = e(0);
        let q = e(1);
        assert_eq!(S3.geodesic_point(&p, &q, 0.0).unwrap(), p);
        assert_eq!(S3.geodesic_point(&p, &q, 1.0).unwrap(), q);
        let h = 0.5f64.sqrt();
        assert!(close(S3.geodesic_point(&p, &q, 0.5).unwrap().coords(), &[h, h, 0.0], 1e-15));
        let m = ManifoldSpec::Euclidean(2);
        let (a, b) = (pt(m, &[0.0, 1.0]), pt(m, &[2.0, 3.0]));
        assert!(close(m.geodesic_point(&a, &b, 0.25).unwrap().coords(), &[0.5, 1.5], 1e-15));
    }

    /// Finite-difference oracle for the unit tangents: d/ds geodesic_point(p,q,s) / dist.
    fn fd_tangents(m: ManifoldSpec, p: &ManifoldPoint, q: &ManifoldPoint) -> (Vec<f64>, Vec<f64>) {
        let d = m.dist(p, q);
        let s = 1e-6;
        let g = |t: f64| m.geodesic_point(p, q, t).unwrap().into_coords();
        let a: Vec<f64> = g(s).iter().zip(g(0.0)).map(|(x, y)| (x - y) / (s * d)).collect();
        let b: Vec<f64> = g(1.0).iter().zip(g(1.0 - s)).map(|(x, y)| (x - y) / (s * d)).collect();
        (a, b)
    }

    #[test]
    fn unit_tangent_pair_examples() {
        let m = ManifoldSpec::Euclidean(2);
        let (p, q) = (pt(m, &[0.0, 0.0]), pt(m, &[3.0, 4.0]));
        let (a, b) = m.unit_tangent_pair(&p, &q).unwrap();
        assert!(close(&a.vec, &[0.6, 0.8], 1e-15) && close(&b.vec, &[0.6, 0.8], 1e-15));

        let (a, b) = S3.unit_tangent_pair(&e(0), &e(1)).unwrap();
        assert!(close(&a.vec, &[0.0, 1.0, 0.0], 1e-15));
        assert!(close(&b.vec, &[-1.0, 0.0, 0.0], 1e-15));
        let (fa, fb) = fd_tangents(S3, &e(0), &e(1));
        assert!(close(&a.vec, &fa, 1e-5) && close(&b.vec, &fb, 1e-5));

        let c = ManifoldSpec::Circle;
        let p = pt(c, &[1.0, 0.0]);
        let q = pt(c, &[0.3f64.cos(), 0.3f64.sin()]);
        let (a, b) = c.unit_tangent_pair(&p, &q).unwrap();
        let (fa, fb) = fd_tangents(c, &p, &q);
        assert!(close(&a.vec, &fa, 1e-5) && close(&b.vec, &fb, 1e-5));
        assert!(matches!(c.unit_tangent_pair(&p, &p), Err(Error::DegenerateJump)));
    }

    #[test]
    fn second_fundamental_form_examples() {
        let x = S3.tangent_projection(&e(0), &[0.0, 1.0, 0.0]);
        assert_eq!(S3.second_fundamental_form(&e(0), &x, &x), vec![1.0, 0.0, 0.0]);
        let y = S3.tangent_projection(&e(0), &[0.0, 0.0, 1.0]);
        assert_eq!(S3.second_fundamental_form(&e(0), &x, &y), vec![0.0; 3]);
        let m = ManifoldSpec::Euclidean(3);
        let p = pt(m, &[1.0, 1.0, 1.0]);
        let v = m.tangent_projection(&p, &[1.0, 2.0, 3.0]);
        assert_eq!(m.second_fundamental_form(&p, &v, &v), vec![0.0; 3]);
    }

    /// Sign regression: for u(x) on a great circle and z = u_x/|u_x|,
    /// π_u z_x = z_x + A_u(z,z)|u_x| (here π_u z_x = 0 since u is a geodesic).
    #[test]
    fn second_fundamental_form_sign_regression() {
        let speed = 0.7;
        let u = |x: f64| vec![(speed * x).cos(), (speed * x).sin(), 0.0];
        let z = |x: f64| vec![-(speed * x).sin(), (speed * x).cos(), 0.0];
        let x0 = 0.4;
        let h = 1e-5;
        let zx: Vec<f64> = z(x0 + h).iter().zip(z(x0 - h)).map(|(a, b)| (a - b) / (2.0 * h)).collect();
        let p = ManifoldPoint::from_raw(u(x0));
        let zt = S3.tangent_projection(&p, &z(x0));
        let a = S3.second_fundamental_form(&p, &zt, &zt);
        let pi_zx = S3.tangent_projection(&p, &zx).vec;
        for i in 0..3 {
            assert!((pi_zx[i] - (zx[i] + a[i] * speed)).abs() < 1e-8);
        }
        // cylinder helix: same identity with curvature only in the circle factor
        let c = ManifoldSpec::Cylinder;
        let (w, lift) = (0.6, 0.8);
        let u = |x: f64| vec![(w * x).cos(), (w * x).sin(), lift * x];
        let z = |x: f64| vec![-w * (w * x).sin(), w * (w * x).cos(), lift];
        let zx: Vec<f64> = z(x0 + h).iter().zip(z(x0 - h)).map(|(a, b)| (a - b) / (2.0 * h)).collect();
        let p = ManifoldPoint::from_raw(u(x0));
        let zt = c.tangent_projection(&p, &z(x0));
        let a = c.second_fundamental_form(&p, &zt, &zt);
        let pi_zx = c.tangent_projection(&p, &zx).vec;
        for i in 0..3 {
            assert!((pi_zx[i] - (zx[i] + a[i])).abs() < 1e-8, "{i}");
        }
    }

    #[test]
    fn h_n_examples() {
        let m = ManifoldSpec::Euclidean(4);
        assert_eq!(m.h_n(123.0).unwrap(), 1.0);
        assert!((S3.h_n(PI / 4.0).unwrap() - PI / 4.0).abs() < 1e-15);
        assert!((S3.h_n(1e-9).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(S3.h_n(0.0).unwrap(), 1.0);
        assert!(matches!(S3.h_n(PI), Err(Error::OutOfComparisonRange { .. })));
        assert_eq!(ManifoldSpec::Cylinder.h_n(3.0).unwrap(), 1.0);
    }

    #[test]
    fn exp_log_round_trip_sweep() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for m in ALL {
            for _ in 0..2000 {
                let p = m.random_point(&mut rng);
                let v = m.random_tangent(&p, &mut rng);
                let inj = m.injectivity_radius();
                let cap = if inj.is_finite() { 0.95 * inj } else { 10.0 };
                let r: f64 = rand::Rng::gen_range(&mut rng, 0.0..cap);
                let n = v.norm();
                let v = v.scaled(if n > 0.0 { r / n } else { 0.0 });
                let q = m.exp(&p, &v);
                assert!(m.contains(q.coords()));
                // cylinder: dist can exceed |v| only via the circle factor, which is below π here
                match m.log(&p, &q) {
                    Ok(w) => assert!(close(&w.vec, &v.vec, 1e-9), "{m}: {:?} vs {:?}", w.vec, v.vec),
                    Err(Error::BeyondInjectivityRadius { .. }) => assert!(m == ManifoldSpec::Cylinder),
                    Err(e) => panic!("{e}"),
                }
            }
        }
    }

    #[test]
    fn embedding_inequality_sweep() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for m in ALL {
            let mut c_r: f64 = 1.0;
            for _ in 0..2000 {
                let p = m.random_point(&mut rng);
                let q = m.random_point(&mut rng);
                let d = m.dist(&p, &q);
                let chord = crate::linalg::dist(p.coords(), q.coords());
                assert!(chord <= d + 1e-14);
                if chord > 1e-9 {
                    c_r = c_r.max(d / chord);
                }
            }
            // π/2 is the supremum for the round factors
            assert!(c_r.is_finite() && c_r <= PI / 2.0 + 1e-9, "{m}: {c_r}");
        }
    }

    #[test]
    fn tangent_projection_is_idempotent_and_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for m in ALL {
            let p = m.random_point(&mut rng);
            let n = m.dim();
            let cols: Vec<Vec<f64>> = (0..n)
                .map(|j| {
                    let mut ej = vec![0.0; n];
                    ej[j] = 1.0;
                    m.tangent_projection(&p, &ej).vec
                })
                .collect();
            for i in 0..n {
                for j in 0..n {
                    assert!((cols[j][i] - cols[i][j]).abs() < 1e-15);
                }
                let twice = m.tangent_projection(&p, &cols[i]).vec;
                assert!(close(&twice, &cols[i], 1e-15));
            }
        }
    }

    #[test]
    fn unit_tangents_and_sff_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for m in ALL {
            for _ in 0..500 {
                let p = m.random_point(&mut rng);
                let q = m.random_point(&mut rng);
                let Ok((a, b)) = m.unit_tangent_pair(&p, &q) else { continue };
                assert!((a.norm() - 1.0).abs() < 1e-12 && (b.norm() - 1.0).abs() < 1e-12);
                let d = m.dist(&p, &q);
                let q2 = m.exp(&p, &a.scaled(d));
                assert!(close(q2.coords(), q.coords(), 1e-9));
                let x = m.random_tangent(&p, &mut rng);
                let y = m.random_tangent(&p, &mut rng);
                let s = m.second_fundamental_form(&p, &x, &y);
                let t = m.tangent_projection(&p, &s);
                assert!(t.norm() < 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn sphere_log_inverts_exp(theta in 0.0f64..3.0, phi in 0.0f64..6.28, r in 0.0f64..3.0) {
            let p = pt(S3, &[theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()]);
            let v = S3.tangent_projection(&p, &[phi.sin(), 0.3, -theta.cos()]);
            let n = v.norm();
            prop_assume!(n > 1e-3);
            let v = v.scaled(r / n);
            let q = S3.exp(&p, &v);
            let w = S3.log(&p, &q).unwrap();
            prop_assert!(close(&w.vec, &v.vec, 1e-9));
            prop_assert!((S3.dist(&p, &q) - r).abs() < 1e-12);
        }

        #[test]
        fn distance_is_symmetric(a in proptest::collection::vec(-1.0f64..1.0, 3), b in proptest::collection::vec(-1.0f64..1.0, 3)) {
            prop_assume!(norm(&a) > 1e-3 && norm(&b) > 1e-3);
            let p = project_point(S3, &a).unwrap();
            let q = project_point(S3, &b).unwrap();
            prop_assert_eq!(S3.dist(&p, &q), S3.dist(&q, &p));
        }
    }
}
