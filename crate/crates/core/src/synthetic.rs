//! Seeded test data: random rad staircases, noisy direction fields and the
//! two-jump square configuration on S².

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::curve::{PiecewiseConstantCurve, SampledCurve};
use crate::error::{Error, Result};
use crate::lab::square_vertices;
use crate::manifold::{ManifoldPoint, ManifoldSpec};

/// Random breakpoints in (0, 1) with all plateau lengths ≥ `min_gap`.
fn breakpoints<R: Rng>(k: usize, min_gap: f64, rng: &mut R) -> Result<Vec<f64>> {
    if (k + 1) as f64 * min_gap >= 1.0 {
        return Err(Error::Invalid(format!("{} plateaus do not fit with gap {min_gap}", k + 1)));
    }
    // spread the slack uniformly, then add the mandatory gaps back
    let slack = 1.0 - (k + 1) as f64 * min_gap;
    let mut u: Vec<f64> = (0..k).map(|_| rng.gen::<f64>() * slack).collect();
    u.sort_by(f64::total_cmp);
    Ok(u.iter().enumerate().map(|(i, x)| x + (i + 1) as f64 * min_gap).collect())
}

/// Seeded piecewise-constant curve with `plateaus` values drawn inside a
/// geodesic ball of radius 0.45·min(2·rad, 4) around a random center, so
/// every jump is below 2·rad.
pub fn random_staircase(m: ManifoldSpec, plateaus: usize, seed: u64) -> Result<PiecewiseConstantCurve> {
    if plateaus == 0 {
        return Err(Error::Invalid("a staircase needs at least one plateau".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let radius = 0.45 * (2.0 * m.rad()).min(4.0);
    let b = breakpoints(plateaus - 1, 0.05, &mut rng)?;
    let c = m.random_point(&mut rng);
    let mut values: Vec<ManifoldPoint> = Vec::with_capacity(plateaus);
    while values.len() < plateaus {
        let p = m.random_point_at(&c, radius * rng.gen::<f64>(), &mut rng);
        // keep consecutive values apart so no plateau is spurious
        if values.last().map_or(true, |q| m.dist(q, &p) > 1e-3) {
            values.push(p);
        }
    }
    PiecewiseConstantCurve::new(m, b, values)
}

/// Scalar-valued staircase on euclidean:1 with the given steps.
pub fn staircase_from_steps(breakpoints: Vec<f64>, values: &[f64]) -> Result<PiecewiseConstantCurve> {
    let m = ManifoldSpec::Euclidean(1);
    let v = values.iter().map(|&x| ManifoldPoint::new(m, vec![x])).collect::<Result<Vec<_>>>()?;
    PiecewiseConstantCurve::new(m, breakpoints, v)
}

/// Smooth great-circle sweep on a sphere with tangent-space Gaussian noise
/// of standard deviation `sigma` pushed through exp at every sample.
pub fn noisy_field(m: ManifoldSpec, grid_n: usize, sigma: f64, seed: u64) -> Result<SampledCurve> {
    if !m.is_spherical() {
        return Err(Error::WrongManifold(format!("noisy_field needs a sphere, got {m}")));
    }
    if grid_n < 2 || !(sigma >= 0.0) {
        return Err(Error::Invalid("noisy_field needs grid_n >= 2 and sigma >= 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = m.dim();
    let mut pts = Vec::with_capacity(grid_n);
    for i in 0..grid_n {
        let x = i as f64 / (grid_n - 1) as f64;
        let a = 1.2 * x;
        let mut c = vec![0.0; n];
        c[0] = a.cos();
        c[1] = a.sin();
        let p = ManifoldPoint::new(m, c)?;
        let g: Vec<f64> = (0..n).map(|_| sigma * rng.sample::<f64, _>(StandardNormal)).collect();
        let v = m.tangent_projection(&p, &g);
        pts.push(m.exp(&p, &v));
    }
    SampledCurve::new(m, &pts)
}

/// The pair (u, v^ε) of the square counterexample: u jumps p0 → q0 at 1/2,
/// v^ε visits p0, p1, q1, q0 with breakpoints 1/2 − ε, 1/2, 1/2 + ε.
pub fn two_jump_square(a: f64, eps: f64) -> Result<(PiecewiseConstantCurve, PiecewiseConstantCurve)> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::Invalid(format!("eps must lie in (0, 1/2), got {eps}")));
    }
    let [p0, p1, q0, q1] = square_vertices(a)?;
    let m = ManifoldSpec::Sphere(3);
    let u = PiecewiseConstantCurve::new(m, vec![0.5], vec![p0.clone(), q0.clone()])?;
    let v = PiecewiseConstantCurve::new(m, vec![0.5 - eps, 0.5, 0.5 + eps], vec![p0, p1, q1, q0])?;
    Ok((u, v))
}
