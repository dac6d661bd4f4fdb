//! `mtvf`: run, audit and explore total variation flows of manifold-valued curves.
//!
//! Exit codes: 0 success, 2 configuration or input error, 3 geometry error
//! (for example a jump violating the rad condition), 4 failed checks.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{
    DenoiseArgs, Fail, FlowArgs, GenerateKind, HessianArgs, StabilityArgs, VerifyArgs,
};
use config::Overrides;

#[derive(Parser)]
#[command(name = "mtvf", version, about = "Total variation flow of manifold-valued curves")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a solver on a curve file and write trajectory, diagnostics and manifest.
    Flow {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        input: PathBuf,
        /// Run directory.
        #[arg(long)]
        out: PathBuf,
        /// regularized or exact_pc.
        #[arg(long)]
        solver: Option<String>,
        #[arg(long)]
        manifold: Option<String>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        grid: Option<usize>,
        /// A number or "auto".
        #[arg(long)]
        dt: Option<String>,
        #[arg(long = "t-max")]
        t_max: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Smooth a sampled curve with the regularized flow.
    Denoise {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        manifold: Option<String>,
        #[arg(long)]
        eps: f64,
        /// Stopping time, or "auto" to stop once TV has dropped by --drop.
        #[arg(long = "t-stop", default_value = "auto")]
        t_stop: String,
        #[arg(long, default_value_t = 0.5)]
        drop: f64,
        #[arg(long)]
        dt: Option<f64>,
        /// Samples used when the input is piecewise constant.
        #[arg(long, default_value_t = 0)]
        grid: usize,
    },
    /// Run checks on a trajectory file.
    Verify {
        #[arg(long)]
        input: PathBuf,
        /// Diagnostics file; defaults to diagnostics.csv next to the input.
        #[arg(long)]
        diag: Option<PathBuf>,
        #[arg(long, default_value = "energy,monotone")]
        checks: String,
        /// Also write the reports as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Geometry experiments; tables go to stdout unless --out is given.
    Lab {
        #[command(subcommand)]
        which: LabCmd,
    },
    /// Write a seeded synthetic curve.
    Generate {
        #[command(subcommand)]
        which: GenCmd,
    },
}

#[derive(Subcommand)]
enum LabCmd {
    Semiconvexity {
        #[arg(long = "n-max", default_value_t = 40)]
        n_max: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    Hessian {
        #[arg(long, default_value = "sphere:3")]
        manifold: String,
        #[arg(long, default_value_t = 1.0)]
        r: f64,
        #[arg(long, default_value_t = 64)]
        dirs: usize,
        #[arg(long, default_value_t = 1)]
        configs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    Stability {
        #[arg(long, default_value = "sphere:3")]
        manifold: String,
        #[arg(long, default_value_t = 1.0)]
        r: f64,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        bins: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum GenCmd {
    Staircase {
        #[arg(long)]
        manifold: String,
        #[arg(long, default_value_t = 3)]
        plateaus: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    NoisyField {
        #[arg(long, default_value = "sphere:3")]
        manifold: String,
        #[arg(long, default_value_t = 201)]
        grid: usize,
        #[arg(long, default_value_t = 0.1)]
        sigma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Writes u.csv and v.csv into the --out directory.
    TwoJumpSquare {
        #[arg(long, default_value_t = 0.5)]
        a: f64,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Caps the global rayon pool at MTVF_THREADS when set.
fn init_threads() -> Result<(), Fail> {
    let Ok(v) = std::env::var("MTVF_THREADS") else { return Ok(()) };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Fail::config(format!("MTVF_THREADS: expected a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Fail::config(format!("MTVF_THREADS: {e}")))
}

fn run(cli: Cli) -> Result<(), Fail> {
    init_threads()?;
    match cli.cmd {
        Cmd::Flow { config, input, out, solver, manifold, eps, grid, dt, t_max, seed } => commands::flow(&FlowArgs {
            config,
            input,
            out,
            overrides: Overrides { solver, manifold, eps, grid, dt, t_max, seed },
        }),
        Cmd::Denoise { input, out, manifold, eps, t_stop, drop, dt, grid } => {
            commands::denoise(&DenoiseArgs { input, out, manifold, eps, t_stop, drop, dt, grid })
        }
        Cmd::Verify { input, diag, checks, out } => commands::verify(&VerifyArgs { input, diag, checks, out }),
        Cmd::Lab { which } => match which {
            LabCmd::Semiconvexity { n_max, out } => commands::lab_semiconvexity(n_max, out.as_deref()),
            LabCmd::Hessian { manifold, r, dirs, configs, seed, out } => {
                commands::lab_hessian(&HessianArgs { manifold, r, dirs, configs, seed, out })
            }
            LabCmd::Stability { manifold, r, samples, seed, bins, out } => {
                commands::lab_stability(&StabilityArgs { manifold, r, samples, seed, bins, out })
            }
        },
        Cmd::Generate { which } => {
            let (kind, out) = match which {
                GenCmd::Staircase { manifold, plateaus, seed, out } => {
                    (GenerateKind::Staircase { manifold, plateaus, seed }, out)
                }
                GenCmd::NoisyField { manifold, grid, sigma, seed, out } => {
                    (GenerateKind::NoisyField { manifold, grid, sigma, seed }, out)
                }
                GenCmd::TwoJumpSquare { a, eps, out } => (GenerateKind::TwoJumpSquare { a, eps }, out),
            };
            commands::generate(&kind, &out)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}
