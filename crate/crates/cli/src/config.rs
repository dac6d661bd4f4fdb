//! Run configuration: the solver keys of `FlowConfig` verbatim plus a
//! `solver` key, read from TOML and overridden by command-line flags.

use mtvf_core::flow::FlowConfig;
use toml::{Table, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    Regularized,
    ExactPc,
}

impl Solver {
    pub fn name(self) -> &'static str {
        match self {
            Solver::Regularized => "regularized",
            Solver::ExactPc => "exact_pc",
        }
    }
}

/// Flag values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub solver: Option<String>,
    pub manifold: Option<String>,
    pub eps: Option<f64>,
    pub grid: Option<usize>,
    pub dt: Option<String>,
    pub t_max: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub solver: Solver,
    pub flow: FlowConfig,
    /// The table after overrides, as it would have to be written to
    /// reproduce the run.
    pub effective: Table,
}

/// Parses `text` (may be empty) and applies `ov`. Errors name the key.
pub fn load(text: &str, ov: &Overrides) -> Result<RunConfig, String> {
    let mut t: Table = text.parse().map_err(|e: toml::de::Error| format!("config: {}", e.message()))?;
    let mut put = |k: &str, v: Option<Value>| {
        if let Some(v) = v {
            t.insert(k.to_string(), v);
        }
    };
    put("solver", ov.solver.clone().map(Value::String));
    put("manifold", ov.manifold.clone().map(Value::String));
    put("epsilon", ov.eps.map(Value::Float));
    put("grid_n", ov.grid.map(|g| Value::Integer(g as i64)));
    put("dt", ov.dt.as_deref().map(dt_value));
    put("t_max", ov.t_max.map(Value::Float));
    if let Some(s) = ov.seed {
        let s = i64::try_from(s).map_err(|_| format!("seed: {s} does not fit a TOML integer"))?;
        t.insert("seed".into(), Value::Integer(s));
    }
    let effective = t.clone();

    let solver = match t.remove("solver") {
        None => Solver::Regularized,
        Some(Value::String(s)) if s == "regularized" => Solver::Regularized,
        Some(Value::String(s)) if s == "exact_pc" => Solver::ExactPc,
        Some(v) => return Err(format!("solver: expected \"regularized\" or \"exact_pc\", got {v}")),
    };
    if solver == Solver::ExactPc {
        // the event-driven solver has no ε and picks its own steps
        t.entry("epsilon").or_insert(Value::Float(1.0));
        t.entry("dt").or_insert(Value::String("auto".into()));
    }
    let flow: FlowConfig = Value::Table(t).try_into().map_err(|e: toml::de::Error| format!("config: {}", e.message()))?;
    flow.validate().map_err(|e| e.to_string())?;
    Ok(RunConfig { solver, flow, effective })
}

fn dt_value(s: &str) -> Value {
    s.parse::<f64>().map(Value::Float).unwrap_or_else(|_| Value::String(s.to_string()))
}
