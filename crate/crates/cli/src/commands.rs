use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use mtvf_core::flow::{run_exact_pc_with, run_regularized, Curve, ExactPcOptions, FlowConfig, FlowTrajectory};
use mtvf_core::io::{self, atomic_write, fmt_f64};
use mtvf_core::lab;
use mtvf_core::synthetic;
use mtvf_core::verify::{self, CheckReport, Stopping};
use mtvf_core::{Error, ManifoldSpec, PiecewiseConstantCurve, SampledCurve};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{self, Overrides, Solver};
use crate::manifest::{FileDigest, RunManifest};

/// A failed command with its exit code: 2 for configuration and input
/// errors, 3 for geometry errors, 4 for failed checks, 1 otherwise.
#[derive(Debug)]
pub struct Fail {
    pub code: u8,
    pub msg: String,
}

impl Fail {
    pub fn config(msg: impl Into<String>) -> Self {
        Fail { code: 2, msg: msg.into() }
    }
    fn checks(msg: impl Into<String>) -> Self {
        Fail { code: 4, msg: msg.into() }
    }
}

impl fmt::Display for Fail {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.msg)
    }
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let code = if e.is_geometric() {
            3
        } else if matches!(e, Error::CflViolation { .. } | Error::StepUnderflow(_)) {
            1
        } else {
            2
        };
        Fail { code, msg: e.to_string() }
    }
}

type Res<T = ()> = Result<T, Fail>;

fn read_bytes(p: &Path) -> Res<Vec<u8>> {
    fs::read(p).map_err(|e| Fail::config(format!("{}: {e}", p.display())))
}

fn read_text(p: &Path) -> Res<String> {
    String::from_utf8(read_bytes(p)?).map_err(|_| Fail::config(format!("{}: not UTF-8", p.display())))
}

fn parse_manifold(s: &str) -> Res<ManifoldSpec> {
    s.parse().map_err(|e: Error| Fail::config(format!("manifold: {e}")))
}

/// Writes `text` to `dir/name` and records its digest.
fn emit(dir: &Path, name: &str, text: &str, man: &mut RunManifest) -> Res {
    atomic_write(&dir.join(name), text.as_bytes())?;
    man.outputs.push(FileDigest::of(Path::new(name), text.as_bytes()));
    Ok(())
}

fn finish_run(dir: &Path, man: &RunManifest) -> Res {
    atomic_write(&dir.join("manifest.json"), man.to_json().as_bytes())?;
    Ok(())
}

fn to_sampled(c: Curve, grid_n: usize) -> Res<SampledCurve> {
    match c {
        Curve::Sampled(s) => Ok(s),
        Curve::Pc(_) if grid_n == 0 => Err(Fail::config("grid_n: needed to sample a piecewise-constant input")),
        Curve::Pc(p) => Ok(p.sample(grid_n)?),
    }
}

pub struct FlowArgs {
    pub config: Option<PathBuf>,
    pub input: PathBuf,
    pub out: PathBuf,
    pub overrides: Overrides,
}

pub fn flow(a: &FlowArgs) -> Res {
    let cfg_text = match &a.config {
        Some(p) => read_text(p)?,
        None => String::new(),
    };
    let rc = config::load(&cfg_text, &a.overrides).map_err(Fail::config)?;
    let input = read_text(&a.input)?;
    let curve = io::curve_from_str(&input)?;
    if curve.manifold() != rc.flow.manifold {
        return Err(Fail::config(format!(
            "manifold: input curve lives on {}, config says {}",
            curve.manifold(),
            rc.flow.manifold
        )));
    }
    let traj = match rc.solver {
        Solver::Regularized => run_regularized(&to_sampled(curve, rc.flow.grid_n)?, &rc.flow)?,
        Solver::ExactPc => {
            let Curve::Pc(c) = curve else {
                return Err(Fail::config("solver: exact_pc needs a piecewise-constant input"));
            };
            let mut o = ExactPcOptions::new(rc.flow.t_max);
            o.merge_tol = rc.flow.merge_tol;
            o.snapshot_every = rc.flow.snapshot_every;
            run_exact_pc_with(&c, &o)?
        }
    };

    let config_json = serde_json::to_value(&rc.effective).map_err(|e| Fail::config(e.to_string()))?;
    let mut man = RunManifest::new("flow", rc.flow.seed, config_json);
    if let Some(p) = &a.config {
        man.inputs.push(FileDigest::of(p, cfg_text.as_bytes()));
    }
    man.inputs.push(FileDigest::of(&a.input, input.as_bytes()));
    emit(&a.out, "trajectory.csv", &io::trajectory_to_string(&traj)?, &mut man)?;
    emit(&a.out, "diagnostics.csv", &io::diagnostics_to_string(&traj)?, &mut man)?;
    finish_run(&a.out, &man)?;
    let last = traj.last();
    println!(
        "{} run: {} snapshots, t = {}, tv {} -> {}{}",
        rc.solver.name(),
        traj.frames.len(),
        last.t,
        traj.frames[0].diag.tv,
        last.diag.tv,
        if last.diag.stopped { " (stopped)" } else { "" }
    );
    Ok(())
}

pub struct DenoiseArgs {
    pub input: PathBuf,
    pub out: PathBuf,
    pub manifold: Option<String>,
    pub eps: f64,
    pub t_stop: String,
    pub drop: f64,
    pub dt: Option<f64>,
    pub grid: usize,
}

pub fn denoise(a: &DenoiseArgs) -> Res {
    let input = read_text(&a.input)?;
    let curve = io::curve_from_str(&input)?;
    let m = curve.manifold();
    if let Some(s) = &a.manifold {
        let want = parse_manifold(s)?;
        if want != m {
            return Err(Fail::config(format!("manifold: input curve lives on {m}, flag says {want}")));
        }
    }
    let u0 = to_sampled(curve, a.grid)?;
    let tv0 = u0.tv_geodesic();
    let mut cfg = FlowConfig::new(m, a.eps, 0, 0.0);
    if let Some(dt) = a.dt {
        cfg = cfg.with_dt(dt);
    }
    if a.t_stop == "auto" {
        if !(a.drop > 0.0 && a.drop <= 1.0) {
            return Err(Fail::config(format!("drop: must lie in (0, 1], got {}", a.drop)));
        }
        // finite stopping happens before 4·TV, so this bound is never binding
        // for a full drop
        cfg.t_max = 4.0 * tv0;
        cfg.stop_tv = (1.0 - a.drop) * tv0;
    } else {
        cfg.t_max = a.t_stop.parse().map_err(|_| Fail::config(format!("t_stop: expected a number or \"auto\", got {:?}", a.t_stop)))?;
    }
    let traj = run_regularized(&u0, &cfg)?;
    let last = traj.last();

    let config_json = serde_json::json!({
        "manifold": m.to_string(),
        "epsilon": a.eps,
        "t_stop": a.t_stop,
        "drop": a.drop,
        "dt": cfg.resolve_dt(u0.h()),
        "t_max": cfg.t_max,
        "stop_tv": cfg.stop_tv,
    });
    let mut man = RunManifest::new("denoise", 0, config_json);
    man.inputs.push(FileDigest::of(&a.input, input.as_bytes()));
    emit(&a.out, "denoised.csv", &io::curve_to_string(&last.curve)?, &mut man)?;
    emit(&a.out, "diagnostics.csv", &io::diagnostics_to_string(&traj)?, &mut man)?;
    finish_run(&a.out, &man)?;
    println!("tv_in = {tv0}, tv_out = {}, t = {}", last.curve.tv(), last.t);
    Ok(())
}

pub const CHECKS: [&str; 7] = ["energy", "monotone", "jump_rates", "z", "sphere", "variational", "stopping"];

pub fn parse_checks(list: &str) -> Res<Vec<String>> {
    let names: Vec<String> = list.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
    if names.is_empty() {
        return Err(Fail::config("checks: empty list"));
    }
    for n in &names {
        if !CHECKS.contains(&n.as_str()) {
            return Err(Fail::config(format!("checks: unknown check {n:?}; known: {}", CHECKS.join(","))));
        }
    }
    Ok(names)
}

fn run_check(name: &str, tr: &FlowTrajectory) -> Res<Vec<CheckReport>> {
    Ok(match name {
        "energy" => vec![verify::check_energy(tr)],
        "monotone" => vec![verify::check_monotone_variation(tr)?],
        "jump_rates" => vec![verify::check_jump_rates(tr)?],
        "z" => verify::check_z_structure(tr)?,
        "sphere" => verify::sphere_residuals(tr)?.reports().into_iter().cloned().collect(),
        "variational" => {
            // constant competitors at the initial values at both ends and the middle
            let c0 = &tr.frames[0].curve;
            let mut out = Vec::new();
            for x in [0.0, 0.5, 1.0] {
                let p = mtvf_core::ManifoldPoint::new(tr.manifold, c0.value_at(x).to_vec())?;
                let v = PiecewiseConstantCurve::constant(tr.manifold, p);
                out.push(verify::check_variational_inequality(tr, &v)?);
            }
            out
        }
        "stopping" => vec![match verify::detect_stopping(tr) {
            Stopping::Stopped { t_star, .. } => CheckReport::new("stopping", 0.0, t_star, None, 0.0),
            Stopping::NotStopped => CheckReport::new("stopping", tr.last().diag.tv, tr.last().t, None, 0.0),
        }],
        _ => unreachable!("names are validated first"),
    })
}

pub struct VerifyArgs {
    pub input: PathBuf,
    pub diag: Option<PathBuf>,
    pub checks: String,
    pub out: Option<PathBuf>,
}

pub fn verify(a: &VerifyArgs) -> Res {
    let names = parse_checks(&a.checks)?;
    let diag = a.diag.clone().unwrap_or_else(|| a.input.with_file_name("diagnostics.csv"));
    let tr = io::trajectory_from_str(&read_text(&a.input)?, &read_text(&diag)?)?;
    let mut reports = Vec::new();
    for n in &names {
        reports.extend(run_check(n, &tr)?);
    }
    for r in &reports {
        println!("{r}");
    }
    if let Some(p) = &a.out {
        atomic_write(p, io::reports_to_string(&reports)?.as_bytes())?;
    }
    let failed = reports.iter().filter(|r| !r.pass).count();
    if failed > 0 {
        return Err(Fail::checks(format!("{failed} of {} checks failed", reports.len())));
    }
    Ok(())
}

fn write_or_print(out: Option<&Path>, text: &str) -> Res {
    match out {
        Some(p) => Ok(atomic_write(p, text.as_bytes())?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn lab_semiconvexity(n_max: u32, out: Option<&Path>) -> Res {
    if n_max == 0 {
        return Err(Fail::config("n_max: must be at least 1"));
    }
    let first = lab::first_positive_gap(n_max);
    let rows: Vec<Vec<f64>> = (1..=n_max)
        .map(|n| vec![n as f64, lab::semiconvexity_gap(n), if Some(n) == first { 1.0 } else { 0.0 }])
        .collect();
    write_or_print(out, &io::table_to_string(&["n", "gap", "first_positive"], &rows)?)?;
    match first {
        Some(n) => eprintln!("first positive gap at n = {n}"),
        None => eprintln!("gap not positive for n <= {n_max}"),
    }
    Ok(())
}

pub struct HessianArgs {
    pub manifold: String,
    pub r: f64,
    pub dirs: usize,
    pub configs: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

pub const HESSIAN_TOL: f64 = 1e-4;

pub fn lab_hessian(a: &HessianArgs) -> Res {
    let m = parse_manifold(&a.manifold)?;
    if !(a.r >= 0.0) {
        return Err(Fail::config("r: must be non-negative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let mut rows = Vec::with_capacity(a.configs);
    let mut worst: Option<CheckReport> = None;
    for _ in 0..a.configs {
        let p0 = m.random_point(&mut rng);
        let p = m.random_point_at(&p0, a.r, &mut rng);
        let h = lab::hessian_comparison_check(m, &p0, &p, a.dirs, &mut rng)?;
        rows.push(vec![h.r, h.bound, h.min_estimate, h.radial.unwrap_or(f64::NAN), h.tangential.unwrap_or(f64::NAN)]);
        let rep = h.report(HESSIAN_TOL);
        if worst.as_ref().map_or(true, |w| rep.worst_violation > w.worst_violation) {
            worst = Some(rep);
        }
    }
    write_or_print(a.out.as_deref(), &io::table_to_string(&["r", "bound", "min_estimate", "radial", "tangential"], &rows)?)?;
    match worst {
        Some(w) if !w.pass => Err(Fail::checks(w.to_string())),
        _ => Ok(()),
    }
}

pub struct StabilityArgs {
    pub manifold: String,
    pub r: f64,
    pub samples: usize,
    pub seed: u64,
    pub bins: usize,
    pub out: Option<PathBuf>,
}

pub fn lab_stability(a: &StabilityArgs) -> Res {
    let m = parse_manifold(&a.manifold)?;
    if a.bins == 0 || a.samples == 0 {
        return Err(Fail::config("samples and bins must be at least 1"));
    }
    let sweep = lab::stability_sweep(m, a.r, a.samples, a.seed)?;
    let mut text = String::from("lo,hi,count\n");
    for (lo, hi, c) in sweep.histogram(a.bins) {
        text.push_str(&format!("{},{},{c}\n", fmt_f64(lo), fmt_f64(hi)));
    }
    write_or_print(a.out.as_deref(), &text)?;
    eprintln!("max ratio = {}", fmt_f64(sweep.max_ratio));
    Ok(())
}

pub enum GenerateKind {
    Staircase { manifold: String, plateaus: usize, seed: u64 },
    NoisyField { manifold: String, grid: usize, sigma: f64, seed: u64 },
    TwoJumpSquare { a: f64, eps: f64 },
}

/// Writes one curve file, or `u.csv` and `v.csv` into `out` for the square pair.
pub fn generate(kind: &GenerateKind, out: &Path) -> Res {
    match kind {
        GenerateKind::Staircase { manifold, plateaus, seed } => {
            let c = synthetic::random_staircase(parse_manifold(manifold)?, *plateaus, *seed)?;
            io::write_curve(out, &Curve::Pc(c))?;
        }
        GenerateKind::NoisyField { manifold, grid, sigma, seed } => {
            let c = synthetic::noisy_field(parse_manifold(manifold)?, *grid, *sigma, *seed)?;
            io::write_curve(out, &Curve::Sampled(c))?;
        }
        GenerateKind::TwoJumpSquare { a, eps } => {
            let (u, v) = synthetic::two_jump_square(*a, *eps)?;
            io::write_curve(&out.join("u.csv"), &Curve::Pc(u))?;
            io::write_curve(&out.join("v.csv"), &Curve::Pc(v))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_the_error_class() {
        assert_eq!(Fail::from(Error::RadViolation { index: 0, dist: 3.2, bound: 3.1 }).code, 3);
        assert_eq!(Fail::from(Error::Invalid("x".into())).code, 2);
        assert_eq!(Fail::from(Error::StepUnderflow(0.1)).code, 1);
    }

    #[test]
    fn check_list_parsing() {
        assert_eq!(parse_checks("energy, monotone").unwrap(), ["energy", "monotone"]);
        assert_eq!(parse_checks("energy,bogus").unwrap_err().code, 2);
        assert_eq!(parse_checks(" , ").unwrap_err().code, 2);
    }

    #[test]
    fn pc_input_needs_a_grid_for_the_regularized_solver() {
        let c = synthetic::staircase_from_steps(vec![0.5], &[0.0, 1.0]).unwrap();
        assert_eq!(to_sampled(Curve::Pc(c.clone()), 0).unwrap_err().code, 2);
        assert_eq!(to_sampled(Curve::Pc(c), 11).unwrap().grid_n(), 11);
    }
}
