use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::ManifoldSpec;

/// Time step: a fixed value or `"auto"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DtRepr", into = "DtRepr")]
pub enum Dt {
    Auto,
    Fixed(f64),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum DtRepr {
    Num(f64),
    Str(String),
}

impl TryFrom<DtRepr> for Dt {
    type Error = String;
    fn try_from(r: DtRepr) -> std::result::Result<Self, String> {
        match r {
            DtRepr::Num(v) => Ok(Dt::Fixed(v)),
            DtRepr::Str(s) if s == "auto" => Ok(Dt::Auto),
            DtRepr::Str(s) => s
                .parse::<f64>()
                .map(Dt::Fixed)
                .map_err(|_| format!("dt must be a number or \"auto\", got {s:?}")),
        }
    }
}

impl From<Dt> for DtRepr {
    fn from(d: Dt) -> DtRepr {
        match d {
            Dt::Auto => DtRepr::Str("auto".into()),
            Dt::Fixed(v) => DtRepr::Num(v),
        }
    }
}

/// Time discretization of the regularized solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Lagged-diffusivity step: the face conductances are frozen at the old
    /// state and the resulting tridiagonal system is solved exactly.
    #[default]
    SemiImplicit,
    /// Forward Euler; needs dt ≤ 0.5 h² ε.
    Explicit,
}

fn default_merge_tol() -> f64 {
    1e-9
}
fn default_snapshot_every() -> usize {
    10
}
fn default_cfl() -> f64 {
    0.25
}
fn default_stop_tv() -> f64 {
    1e-11
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowConfig {
    pub manifold: ManifoldSpec,
    pub epsilon: f64,
    /// 0 means "take it from the input curve".
    #[serde(default)]
    pub grid_n: usize,
    pub dt: Dt,
    pub t_max: f64,
    #[serde(default = "default_merge_tol")]
    pub merge_tol: f64,
    #[serde(default = "default_snapshot_every")]
    pub snapshot_every: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_cfl")]
    pub cfl_factor: f64,
    #[serde(default)]
    pub scheme: Scheme,
    /// The run ends early once the geodesic TV drops below this.
    #[serde(default = "default_stop_tv")]
    pub stop_tv: f64,
}

impl FlowConfig {
    pub fn new(manifold: ManifoldSpec, epsilon: f64, grid_n: usize, t_max: f64) -> Self {
        FlowConfig {
            manifold,
            epsilon,
            grid_n,
            dt: Dt::Auto,
            t_max,
            merge_tol: default_merge_tol(),
            snapshot_every: default_snapshot_every(),
            seed: 0,
            cfl_factor: default_cfl(),
            scheme: Scheme::default(),
            stop_tv: default_stop_tv(),
        }
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = Dt::Fixed(dt);
        self
    }

    pub fn with_scheme(mut self, s: Scheme) -> Self {
        self.scheme = s;
        self
    }

    pub fn with_snapshot_every(mut self, k: usize) -> Self {
        self.snapshot_every = k;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |k: &str, why: &str| Err(Error::Invalid(format!("{k}: {why}")));
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return bad("epsilon", "must be positive");
        }
        if self.grid_n == 1 {
            return bad("grid_n", "must be at least 2");
        }
        if let Dt::Fixed(dt) = self.dt {
            if !(dt > 0.0) || !dt.is_finite() {
                return bad("dt", "must be positive");
            }
        }
        if !(self.t_max >= 0.0) || !self.t_max.is_finite() {
            return bad("t_max", "must be finite and non-negative");
        }
        if !(self.merge_tol > 0.0) {
            return bad("merge_tol", "must be positive");
        }
        if self.snapshot_every == 0 {
            return bad("snapshot_every", "must be at least 1");
        }
        if !(self.cfl_factor > 0.0 && self.cfl_factor <= 0.5) {
            return bad("cfl_factor", "must lie in (0, 0.5]");
        }
        Ok(())
    }

    /// Resolved time step for grid spacing `h`. `"auto"` means
    /// `cfl_factor·h²·ε` for the explicit scheme and `cfl_factor·h` for the
    /// semi-implicit one, whose step is not limited by stability.
    pub fn resolve_dt(&self, h: f64) -> f64 {
        match (self.dt, self.scheme) {
            (Dt::Fixed(v), _) => v,
            (Dt::Auto, Scheme::Explicit) => self.cfl_factor * h * h * self.epsilon,
            (Dt::Auto, Scheme::SemiImplicit) => self.cfl_factor * h,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dt_accepts_auto_and_numbers() {
        let c: FlowConfig = parse(r#"{"manifold":"sphere:3","epsilon":0.01,"dt":"auto","t_max":1.0}"#);
        assert_eq!(c.dt, Dt::Auto);
        assert_eq!(c.merge_tol, 1e-9);
        assert_eq!(c.snapshot_every, 10);
        let c: FlowConfig = parse(r#"{"manifold":"circle","epsilon":0.01,"dt":0.001,"t_max":1.0}"#);
        assert_eq!(c.dt, Dt::Fixed(0.001));
        assert_eq!(c.manifold, ManifoldSpec::Circle);
    }

    fn parse(s: &str) -> FlowConfig {
        serde_json::from_str(s).unwrap()
    }

    #[test]
    fn validation_rejects_bad_values() {
        let m = ManifoldSpec::Sphere(3);
        assert!(FlowConfig::new(m, 0.0, 11, 1.0).validate().is_err());
        assert!(FlowConfig::new(m, 0.1, 11, -1.0).validate().is_err());
        assert!(FlowConfig::new(m, 0.1, 11, 1.0).with_dt(0.0).validate().is_err());
        assert!(FlowConfig::new(m, 0.1, 11, 1.0).validate().is_ok());
    }

    #[test]
    fn auto_dt_follows_the_scheme() {
        let c = FlowConfig::new(ManifoldSpec::Euclidean(1), 0.01, 101, 1.0).with_scheme(Scheme::Explicit);
        assert!((c.resolve_dt(0.01) - 0.25 * 1e-4 * 0.01).abs() < 1e-20);
        let c = c.with_scheme(Scheme::SemiImplicit);
        assert!((c.resolve_dt(0.01) - 0.0025).abs() < 1e-18);
    }
}
