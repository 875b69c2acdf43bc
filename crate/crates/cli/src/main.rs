// Negated comparisons are how NaN parameters get rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod sweep;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde_json::json;
use thermoshield::annulus::{solve_state_with, Mesh, SolverOptions, DEFAULT_MAX_ITERS, DEFAULT_TOL};
use thermoshield::radial::{classify_regime, general_radial_energy};
use thermoshield::registry::{CheckArgs, CheckRegistry, ModeRegistry};
use thermoshield::shape::{optimize, write_trace, OptimizeOptions};
use thermoshield::{DissipationLaw, Error, StarPair};

const EXIT_VERIFY_FAILED: u8 = 1;
const EXIT_INVALID: u8 = 2;
const EXIT_NO_CONVERGENCE: u8 = 3;
const THREADS_VAR: &str = "THERMOSHIELD_THREADS";

#[derive(Parser, Debug)]
#[command(name = "thermoshield", version, about = "Optimal thermal insulation energies and shapes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Energy of the concentric pair (B_1, B_R).
    Radial {
        #[arg(long)]
        n: usize,
        /// Dissipation law as JSON, or a path to a JSON file.
        #[arg(long)]
        law: String,
        #[arg(long = "R")]
        r: f64,
        #[arg(long, default_value_t = 0.0)]
        lambda: f64,
    },
    /// Optimal concentric radius for convection.
    Regime {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        rmax: f64,
    },
    /// One-parameter sweep of concentric configurations written as CSV.
    Sweep {
        #[arg(long)]
        spec: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Discrete state of a star-shaped pair.
    Solve {
        #[arg(long)]
        pair: String,
        #[arg(long)]
        law: String,
        /// `n_s,n_theta`.
        #[arg(long, value_parser = parse_mesh)]
        mesh: Option<Mesh>,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[arg(long, default_value_t = DEFAULT_MAX_ITERS)]
        max_iters: usize,
        #[arg(long)]
        out_field: Option<PathBuf>,
    },
    /// Shape optimization from an initial pair.
    Optimize {
        #[arg(long)]
        mode: String,
        #[arg(long)]
        law: String,
        #[arg(long = "M", conflicts_with = "lambda")]
        max_area: Option<f64>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        init: String,
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long, value_parser = parse_mesh)]
        mesh: Option<Mesh>,
        #[arg(long)]
        order: Option<usize>,
        #[arg(long)]
        max_iters: Option<usize>,
    },
    /// Run a named verification check.
    Verify {
        check: String,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        rmax: Option<f64>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        law: Option<String>,
        #[arg(long)]
        pair: Option<String>,
        #[arg(long, value_parser = parse_mesh)]
        mesh: Option<Mesh>,
        #[arg(long)]
        levels: Option<usize>,
    },
}

fn parse_mesh(s: &str) -> Result<Mesh, String> {
    let (a, b) = s.split_once(',').ok_or("expected n_s,n_theta")?;
    let n_s = a.trim().parse().map_err(|e| format!("n_s: {e}"))?;
    let n_theta = b.trim().parse().map_err(|e| format!("n_theta: {e}"))?;
    Mesh::new(n_s, n_theta).map_err(|e| e.to_string())
}

/// Inline JSON, or the contents of a file when the argument is not JSON.
fn load_json<T: DeserializeOwned>(arg: &str, what: &str) -> anyhow::Result<T> {
    let text = if arg.trim_start().starts_with('{') || arg.trim_start().starts_with('[') {
        arg.to_string()
    } else {
        std::fs::read_to_string(arg).with_context(|| format!("reading {what} from {arg}"))?
    };
    serde_json::from_str(&text).map_err(|e| anyhow::Error::new(Error::Format(format!("{what}: {e}"))))
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn print_json(value: &impl serde::Serialize) -> anyhow::Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn thread_pool() -> anyhow::Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_VAR) {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::InvalidParameter(format!("{THREADS_VAR} must be a positive integer, got {v:?}")))?;
        builder = builder.num_threads(n);
    }
    Ok(builder.build()?)
}

/// Outcome of a command that ran to completion.
enum Outcome {
    Done,
    VerificationFailed,
}

fn run(cli: Cli) -> anyhow::Result<Outcome> {
    match cli.command {
        Command::Radial { n, law, r, lambda } => {
            let law: DissipationLaw = load_json(&law, "law")?;
            print_json(&general_radial_energy(n, &law, r, lambda)?)?;
        }
        Command::Regime { n, beta, rmax } => {
            print_json(&classify_regime(n, beta, rmax)?)?;
        }
        Command::Sweep { spec, out } => {
            let spec: sweep::SweepSpec = load_json(&spec, "sweep spec")?;
            spec.validate()?;
            let mut w = create(&out)?;
            thread_pool()?.install(|| sweep::run(&spec, &mut w))?;
            w.flush()?;
        }
        Command::Solve { pair, law, mesh, tol, max_iters, out_field } => {
            let pair: StarPair = load_json(&pair, "pair")?;
            let law: DissipationLaw = load_json(&law, "law")?;
            let opts = SolverOptions { tol, max_iters };
            let sol = solve_state_with(&pair, &law, mesh.unwrap_or_default(), opts, None)?;
            if let Some(path) = out_field {
                let mut w = create(&path)?;
                sol.field.write_csv(&mut w)?;
                w.flush()?;
            }
            print_json(&json!({ "energy": sol.energy, "iterations": sol.iterations }))?;
        }
        Command::Optimize { mode, law, max_area, lambda, init, trace, mesh, order, max_iters } => {
            let law: DissipationLaw = load_json(&law, "law")?;
            let init: StarPair = load_json(&init, "initial pair")?;
            let parameter = match (mode.as_str(), max_area, lambda) {
                ("constrained", Some(m), None) => m,
                ("penalized", None, Some(l)) => l,
                ("constrained", ..) => return Err(Error::InvalidParameter("constrained mode needs --M".into()).into()),
                ("penalized", ..) => return Err(Error::InvalidParameter("penalized mode needs --lambda".into()).into()),
                (_, m, l) => m.or(l).unwrap_or(f64::NAN),
            };
            let mode = ModeRegistry::standard().create(&mode, parameter)?;
            let mut opts = OptimizeOptions::default();
            if let Some(m) = mesh {
                opts.mesh = m;
            }
            if let Some(o) = order {
                opts.fourier_order = o;
            }
            if let Some(k) = max_iters {
                opts.max_outer_iters = k;
            }
            let result = optimize(&law, mode.as_ref(), &init, &opts)?;
            if let Some(path) = trace {
                let mut w = create(&path)?;
                write_trace(&result.trace, &mut w)?;
                w.flush()?;
            }
            print_json(&result)?;
        }
        Command::Verify { check, n, beta, rmax, eps, law, pair, mesh, levels } => {
            let args = CheckArgs {
                n,
                beta,
                r_max: rmax,
                eps,
                law: law.map(|l| load_json(&l, "law")).transpose()?,
                pair: pair.map(|p| load_json(&p, "pair")).transpose()?,
                mesh,
                levels,
            };
            let outcome = CheckRegistry::standard().get(&check)?.run(&args)?;
            print_json(&outcome)?;
            if !outcome.passed {
                return Ok(Outcome::VerificationFailed);
            }
        }
    }
    Ok(Outcome::Done)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::NonConvergence { .. }) => EXIT_NO_CONVERGENCE,
        _ => EXIT_INVALID,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::VerificationFailed) => ExitCode::from(EXIT_VERIFY_FAILED),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
