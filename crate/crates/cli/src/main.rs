use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

use prepspace::dynamics::{evolve, Method};
use prepspace::io::{
    run_distance, run_transform, write_bloch_csv, write_trajectory_csv, DistanceRequest, EvolveProblem,
    TransformRequest,
};
use prepspace::verify::{run_verify, VerifyConfig, DEFAULT_DT, DEFAULT_SEED, DEFAULT_T_FINAL};

/// Preparation-space quantum mechanics: evolve, change frame, measure distance, self-check.
#[derive(Parser)]
#[command(name = "prepspace", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a problem file; writes the trajectory CSV (t, p_i, phi_i, energy).
    Evolve(EvolveArgs),
    /// Apply a frame change (or unitary) to a state; writes the new state and its probability split.
    Transform(IoArgs),
    /// Line-element breakdown and ray angle between two states.
    Distance(IoArgs),
    /// Two-level problem on the sphere; writes CSV (t, theta, phi).
    Bloch(EvolveArgs),
    /// Seeded run of every module invariant; exit 1 if any check fails.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct IoArgs {
    /// Input JSON file.
    #[arg(long)]
    input: PathBuf,
    /// Output file; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct EvolveArgs {
    #[command(flatten)]
    io: IoArgs,
    /// Overrides the problem's step.
    #[arg(long)]
    dt: Option<f64>,
    /// Overrides the problem's final time.
    #[arg(long)]
    t_final: Option<f64>,
    /// implicit-midpoint or rk4-renormalized; overrides the problem's method.
    #[arg(long)]
    method: Option<Method>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Report file; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Replaces every per-check tolerance.
    #[arg(long)]
    tolerance: Option<f64>,
    /// Runs the dimension-generic checks at this n only.
    #[arg(long)]
    n: Option<usize>,
    /// Step for the dynamics checks.
    #[arg(long, default_value_t = DEFAULT_DT)]
    dt: f64,
    /// Horizon of the dynamics oracle check.
    #[arg(long, default_value_t = DEFAULT_T_FINAL)]
    t_final: f64,
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            Box::new(io::BufWriter::new(fs::File::create(p).with_context(|| format!("creating {}", p.display()))?))
        }
        None => Box::new(io::stdout().lock()),
    })
}

fn write_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    let mut out = sink(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn load_problem(args: &EvolveArgs) -> Result<EvolveProblem<f64>> {
    let mut problem: EvolveProblem<f64> = read_json(&args.io.input)?;
    if let Some(dt) = args.dt {
        problem.dt = dt;
    }
    if let Some(t) = args.t_final {
        problem.t_final = t;
    }
    if let Some(m) = args.method {
        problem.method = m;
    }
    Ok(problem)
}

fn cmd_evolve(args: &EvolveArgs, bloch: bool) -> Result<ExitCode> {
    let pr = load_problem(args)?;
    if bloch && pr.initial.dim() != 2 {
        bail!("bloch needs a two-level problem, got n = {}", pr.initial.dim());
    }
    let traj = evolve(&pr.initial, &pr.hamiltonian, pr.t_final, pr.dt, pr.method)?;
    let out = sink(args.io.output.as_deref())?;
    if bloch {
        write_bloch_csv(&traj, out)?;
    } else {
        write_trajectory_csv(&traj, out)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_transform(args: &IoArgs) -> Result<ExitCode> {
    let req: TransformRequest<f64> = read_json(&args.input)?;
    write_json(&run_transform(&req)?, args.output.as_deref())?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_distance(args: &IoArgs) -> Result<ExitCode> {
    let req: DistanceRequest<f64> = read_json(&args.input)?;
    write_json(&run_distance(&req)?, args.output.as_deref())?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(args: &VerifyArgs) -> Result<ExitCode> {
    let cfg =
        VerifyConfig { seed: args.seed, tolerance: args.tolerance, n: args.n, dt: args.dt, t_final: args.t_final };
    let report = run_verify(&cfg)?;
    write_json(&report, args.output.as_deref())?;
    for c in report.checks.iter().filter(|c| !c.pass) {
        let residual = c.max_residual.map_or_else(|| "n/a".to_string(), |r| format!("{r:e}"));
        let why = c.error.as_deref().map(|e| format!(" ({e})")).unwrap_or_default();
        eprintln!("FAIL {} n={} residual={residual} tolerance={:e}{why}", c.check, c.n, c.tolerance);
    }
    Ok(if report.pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let run = match &cli.command {
        Command::Evolve(a) => cmd_evolve(a, false),
        Command::Bloch(a) => cmd_evolve(a, true),
        Command::Transform(a) => cmd_transform(a),
        Command::Distance(a) => cmd_distance(a),
        Command::Verify(a) => cmd_verify(a),
    };
    match run {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
