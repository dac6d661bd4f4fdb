//! Curves on I = [0, 1]: piecewise-constant (jumps only) and uniformly sampled.

use crate::error::{Error, Result};
use crate::linalg;
use crate::manifold::{ManifoldPoint, ManifoldSpec};

/// Jump/diffuse decomposition of the total variation measure.
#[derive(Debug, Clone, PartialEq)]
pub struct TvBreakdown {
    pub diffuse: f64,
    /// (location, geodesic jump size)
    pub jumps: Vec<(f64, f64)>,
    pub total: f64,
}

/// Outcome of the rad test: all jumps shorter than 2 rad_N.
#[derive(Debug, Clone, PartialEq)]
pub struct RadReport {
    pub rad: bool,
    /// Index and size of the largest jump (or consecutive-sample distance).
    pub worst: Option<(usize, f64)>,
}

fn rad_report(m: ManifoldSpec, sizes: impl Iterator<Item = f64>) -> RadReport {
    let mut worst: Option<(usize, f64)> = None;
    for (i, d) in sizes.enumerate() {
        if worst.map_or(true, |(_, w)| d > w) {
            worst = Some((i, d));
        }
    }
    let limit = 2.0 * m.rad();
    RadReport {
        rad: worst.map_or(true, |(_, d)| d < limit),
        worst,
    }
}

fn check_point(m: ManifoldSpec, p: &ManifoldPoint) -> Result<()> {
    if m.contains(p.coords()) {
        Ok(())
    } else {
        Err(Error::Invalid(format!("point {:?} is not on {m}", p.coords())))
    }
}

/// Scalar piecewise-constant function on [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarPc {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

fn check_breakpoints(b: &[f64]) -> Result<()> {
    let mut prev = 0.0;
    for &x in b {
        if !(x > prev && x < 1.0) {
            return Err(Error::Invalid(format!(
                "breakpoints must be strictly increasing in (0,1): {b:?}"
            )));
        }
        prev = x;
    }
    Ok(())
}

impl ScalarPc {
    /// Equal neighbouring values are merged (their breakpoint is dropped).
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if values.len() != breakpoints.len() + 1 {
            return Err(Error::Invalid("need one more value than breakpoints".into()));
        }
        check_breakpoints(&breakpoints)?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("non-finite plateau value".into()));
        }
        let mut b = Vec::with_capacity(breakpoints.len());
        let mut v = vec![values[0]];
        for (i, &x) in breakpoints.iter().enumerate() {
            if values[i + 1] != *v.last().unwrap() {
                b.push(x);
                v.push(values[i + 1]);
            }
        }
        Ok(ScalarPc { breakpoints: b, values: v })
    }

    pub fn constant(c: f64) -> Self {
        ScalarPc { breakpoints: vec![], values: vec![c] }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn lengths(&self) -> Vec<f64> {
        plateau_lengths(&self.breakpoints)
    }

    pub fn tv(&self) -> f64 {
        self.values.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
    }

    pub fn mean(&self) -> f64 {
        self.lengths().iter().zip(&self.values).map(|(l, v)| l * v).sum()
    }

    pub fn value_at(&self, x: f64) -> f64 {
        self.values[self.breakpoints.partition_point(|&b| b <= x)]
    }
}

pub(crate) fn plateau_lengths(b: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(b.len() + 1);
    let mut prev = 0.0;
    for &x in b {
        out.push(x - prev);
        prev = x;
    }
    out.push(1.0 - prev);
    out
}

/// Piecewise-constant curve: plateau `i` occupies `[x_{i-1}, x_i)` with
/// `x_{-1} = 0` and `x_m = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseConstantCurve {
    manifold: ManifoldSpec,
    breakpoints: Vec<f64>,
    values: Vec<ManifoldPoint>,
}

impl PiecewiseConstantCurve {
    /// Validates the data and removes spurious breakpoints between equal plateaus.
    pub fn new(manifold: ManifoldSpec, breakpoints: Vec<f64>, values: Vec<ManifoldPoint>) -> Result<Self> {
        if values.len() != breakpoints.len() + 1 {
            return Err(Error::Invalid(format!(
                "{} breakpoints need {} plateau values, got {}",
                breakpoints.len(),
                breakpoints.len() + 1,
                values.len()
            )));
        }
        check_breakpoints(&breakpoints)?;
        for p in &values {
            check_point(manifold, p)?;
        }
        let mut b = Vec::with_capacity(breakpoints.len());
        let mut v: Vec<ManifoldPoint> = Vec::with_capacity(values.len());
        let mut it = values.into_iter();
        v.push(it.next().unwrap());
        for (x, p) in breakpoints.into_iter().zip(it) {
            if p.coords() != v.last().unwrap().coords() {
                b.push(x);
                v.push(p);
            }
        }
        Ok(PiecewiseConstantCurve { manifold, breakpoints: b, values: v })
    }

    pub(crate) fn from_parts_unchecked(manifold: ManifoldSpec, breakpoints: Vec<f64>, values: Vec<ManifoldPoint>) -> Self {
        PiecewiseConstantCurve { manifold, breakpoints, values }
    }

    pub fn constant(manifold: ManifoldSpec, p: ManifoldPoint) -> Self {
        PiecewiseConstantCurve { manifold, breakpoints: vec![], values: vec![p] }
    }

    pub fn manifold(&self) -> ManifoldSpec {
        self.manifold
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[ManifoldPoint] {
        &self.values
    }

    pub fn num_plateaus(&self) -> usize {
        self.values.len()
    }

    pub fn plateau_lengths(&self) -> Vec<f64> {
        plateau_lengths(&self.breakpoints)
    }

    pub fn value_at(&self, x: f64) -> &ManifoldPoint {
        &self.values[self.breakpoints.partition_point(|&b| b <= x)]
    }

    /// Geodesic jump sizes, left to right.
    pub fn jump_sizes(&self) -> Vec<f64> {
        self.values
            .windows(2)
            .map(|w| self.manifold.dist(&w[0], &w[1]))
            .collect()
    }

    pub fn tv_measure(&self) -> Result<TvBreakdown> {
        let inj = self.manifold.injectivity_radius();
        let mut jumps = Vec::with_capacity(self.breakpoints.len());
        let mut total = 0.0;
        for (x, d) in self.breakpoints.iter().zip(self.jump_sizes()) {
            if d >= inj {
                return Err(Error::BeyondInjectivityRadius { dist: d, inj });
            }
            total += d;
            jumps.push((*x, d));
        }
        Ok(TvBreakdown { diffuse: 0.0, jumps, total })
    }

    pub fn is_rad(&self) -> RadReport {
        rad_report(self.manifold, self.jump_sizes().into_iter())
    }

    pub fn is_constant(&self) -> bool {
        self.values.len() == 1
    }

    /// Node values on a uniform grid (no ramps).
    pub fn sample(&self, grid_n: usize) -> Result<SampledCurve> {
        mollify(self, grid_n, 0.0)
    }
}

/// Samples at `x_i = i/(n-1)`, stored flat (`n × N`).
#[derive(Debug, Clone, PartialEq)]
pub struct SampledCurve {
    manifold: ManifoldSpec,
    data: Vec<f64>,
}

impl SampledCurve {
    pub fn new(manifold: ManifoldSpec, values: &[ManifoldPoint]) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::Invalid("a sampled curve needs at least 2 samples".into()));
        }
        let mut data = Vec::with_capacity(values.len() * manifold.dim());
        for p in values {
            if p.coords().len() != manifold.dim() {
                return Err(Error::Invalid(format!("sample with wrong dimension for {manifold}")));
            }
            check_point(manifold, p)?;
            data.extend_from_slice(p.coords());
        }
        Ok(SampledCurve { manifold, data })
    }

    /// Flat row-major samples; every row must lie on the manifold.
    pub fn from_flat(manifold: ManifoldSpec, data: Vec<f64>) -> Result<Self> {
        let n = manifold.dim();
        if data.len() % n != 0 || data.len() / n < 2 {
            return Err(Error::Invalid("flat sample buffer has the wrong length".into()));
        }
        for row in data.chunks(n) {
            if !manifold.contains(row) {
                return Err(Error::Invalid(format!("sample {row:?} is not on {manifold}")));
            }
        }
        Ok(SampledCurve { manifold, data })
    }

    pub(crate) fn from_flat_unchecked(manifold: ManifoldSpec, data: Vec<f64>) -> Self {
        SampledCurve { manifold, data }
    }

    pub fn manifold(&self) -> ManifoldSpec {
        self.manifold
    }

    pub fn grid_n(&self) -> usize {
        self.data.len() / self.manifold.dim()
    }

    pub fn h(&self) -> f64 {
        1.0 / (self.grid_n() - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 / (self.grid_n() - 1) as f64
    }

    pub fn value(&self, i: usize) -> &[f64] {
        let n = self.manifold.dim();
        &self.data[i * n..(i + 1) * n]
    }

    pub fn point(&self, i: usize) -> ManifoldPoint {
        ManifoldPoint::from_raw(self.value(i).to_vec())
    }

    pub fn flat(&self) -> &[f64] {
        &self.data
    }

    pub fn rows(&self) -> std::slice::Chunks<'_, f64> {
        self.data.chunks(self.manifold.dim())
    }

    /// Ambient chord sum; converges from below to the geodesic length.
    pub fn tv_measure(&self) -> TvBreakdown {
        let rows: Vec<&[f64]> = self.rows().collect();
        let diffuse = rows.windows(2).map(|w| linalg::dist(w[0], w[1])).sum();
        TvBreakdown { diffuse, jumps: vec![], total: diffuse }
    }

    /// Per-face geodesic distances `dist(u_i, u_{i+1})`.
    pub fn face_distances(&self) -> Vec<f64> {
        let rows: Vec<&[f64]> = self.rows().collect();
        rows.windows(2).map(|w| self.manifold.dist_raw(w[0], w[1])).collect()
    }

    /// Sum of geodesic distances between consecutive samples.
    pub fn tv_geodesic(&self) -> f64 {
        self.face_distances().iter().sum()
    }

    pub fn is_rad(&self) -> RadReport {
        rad_report(self.manifold, self.face_distances().into_iter())
    }
}

/// Replaces each jump by geodesic interpolation over `[x_i - w/2, x_i + w/2]`
/// and samples on `grid_n` nodes. `ramp_width = 0` samples the plateaus.
pub fn mollify(c: &PiecewiseConstantCurve, grid_n: usize, ramp_width: f64) -> Result<SampledCurve> {
    if grid_n < 2 {
        return Err(Error::Invalid("grid_n must be at least 2".into()));
    }
    if !(ramp_width >= 0.0) {
        return Err(Error::Invalid("ramp width must be non-negative".into()));
    }
    let m = c.manifold();
    let b = c.breakpoints();
    let mut gap = f64::INFINITY;
    for (i, &x) in b.iter().enumerate() {
        gap = gap.min(if i == 0 { 2.0 * x } else { x - b[i - 1] });
        if i + 1 == b.len() {
            gap = gap.min(2.0 * (1.0 - x));
        }
    }
    if ramp_width > 0.0 && ramp_width >= 0.5 * gap {
        return Err(Error::RampTooWide { ramp: ramp_width, gap });
    }
    let inj = m.injectivity_radius();
    for d in c.jump_sizes() {
        if d >= inj {
            return Err(Error::BeyondInjectivityRadius { dist: d, inj });
        }
    }
    let half = 0.5 * ramp_width;
    let mut data = Vec::with_capacity(grid_n * m.dim());
    let mut buf = vec![0.0; m.dim()];
    for i in 0..grid_n {
        let x = i as f64 / (grid_n - 1) as f64;
        // nearest breakpoint whose ramp contains x
        let k = b.partition_point(|&bk| bk <= x);
        let ramp = [k.checked_sub(1), (k < b.len()).then_some(k)]
            .into_iter()
            .flatten()
            .find(|&j| (x - b[j]).abs() < half);
        match ramp {
            Some(j) => {
                let s = (x - (b[j] - half)) / ramp_width;
                let vals = c.values();
                m.geodesic_point_raw(vals[j].coords(), vals[j + 1].coords(), s, &mut buf)?;
                data.extend_from_slice(&buf);
            }
            None => data.extend_from_slice(c.value_at(x).coords()),
        }
    }
    Ok(SampledCurve::from_flat_unchecked(m, data))
}

/// `γ ∘ σ` for the geodesic γ from `p` (σ = 0) to `q` (σ = 1).
pub fn compose_with_geodesic(
    m: ManifoldSpec,
    p: &ManifoldPoint,
    q: &ManifoldPoint,
    sigma: &ScalarPc,
) -> Result<PiecewiseConstantCurve> {
    let inj = m.injectivity_radius();
    let d = m.dist(p, q);
    if d >= inj {
        return Err(Error::BeyondInjectivityRadius { dist: d, inj });
    }
    if sigma.values().iter().any(|s| !(0.0..=1.0).contains(s)) {
        return Err(Error::Invalid("sigma must take values in [0,1]".into()));
    }
    let values = sigma
        .values()
        .iter()
        .map(|&s| m.geodesic_point(p, q, s))
        .collect::<Result<Vec<_>>>()?;
    PiecewiseConstantCurve::new(m, sigma.breakpoints().to_vec(), values)
}
