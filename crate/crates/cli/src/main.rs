//! `steer`: steerability analysis of two-qubit states from the command line.
//!
//! Exit codes: 0 = certified unsteerable, 1 = certified steerable,
//! 2 = inconclusive/marginal, 3 = error.

mod input;
mod measure_io;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use std::path::{Path, PathBuf};
use steer_core::ansatz::{fibonacci_grid, normalize_jevtic, SphereMeasure};
use steer_core::qstate::{EprMap, TwoQubitState};
use steer_core::radius::{critical_radius, optimize_ansatz, principal_radius, OptimizerBudget, RadiusResult, Verdict};
use steer_core::Vec3;

#[derive(Parser)]
#[command(
    name = "steer",
    about = "Decide steerability of two-qubit states via the critical radius of local hidden state models",
    long_about = "Decide steerability of two-qubit states via the critical radius of local hidden state models.\n\n\
        Exit codes: 0 = certified unsteerable, 1 = certified steerable, 2 = inconclusive/marginal, 3 = error.\n\
        Set STEER_THREADS to cap internal parallelism.\n\n\
        Scan CSV columns: parameter, value, error_estimate, verdict, method."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct StateArgs {
    /// Named family: werner:P | bell:INDEX | tstate:T1,T2,T3
    #[arg(long, conflicts_with = "input")]
    family: Option<String>,
    /// JSON state file with "format": 1 and either "dense" or "theta"
    #[arg(long)]
    input: Option<PathBuf>,
}

impl StateArgs {
    fn load(&self) -> Result<TwoQubitState> {
        match (&self.family, &self.input) {
            (Some(f), None) => input::state_from_family(f),
            (None, Some(p)) => input::state_from_file(p),
            _ => bail!("specify exactly one of --family or --input"),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Full report: Pauli coordinates, marginals, T-state form, critical radius
    Analyze {
        #[command(flatten)]
        state: StateArgs,
        /// Marginal tolerance for T-state detection
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = 1024)]
        grid: usize,
        #[arg(long, default_value_t = 200)]
        iters: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 512)]
        directions: usize,
        /// Write the JSON report here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Principal radius of one explicit ansatz
    Radius {
        #[command(flatten)]
        state: StateArgs,
        /// jevtic | uniform | grid:N | a measure file path
        #[arg(long, default_value = "jevtic")]
        ansatz: String,
        #[arg(long, default_value_t = 1024)]
        grid: usize,
        #[arg(long, default_value_t = 512)]
        directions: usize,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Optimize ansatz weights for the largest certified lower bound
    Optimize {
        #[command(flatten)]
        state: StateArgs,
        #[arg(long, default_value_t = 1024)]
        grid: usize,
        #[arg(long, default_value_t = 200)]
        iters: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the optimized measure file here
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample the local hidden state model and compare with the Born rule
    Simulate {
        #[command(flatten)]
        state: StateArgs,
        /// random:K or a file with one "x y z" direction per line
        #[arg(long, default_value = "random:20")]
        measurements: String,
        #[arg(long, default_value_t = 1_000_000)]
        shots: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// jevtic | uniform | grid:N | a measure file path
        #[arg(long, default_value = "jevtic")]
        ansatz: String,
        #[arg(long, default_value_t = 1024)]
        grid: usize,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep a family parameter and emit CSV (parameter,value,error_estimate,verdict,method)
    Scan {
        /// Family to sweep (werner)
        #[arg(long, default_value = "werner")]
        family: String,
        /// Parameter to sweep (p)
        #[arg(long, default_value = "p")]
        parameter: String,
        #[arg(long)]
        start: f64,
        #[arg(long)]
        stop: f64,
        #[arg(long)]
        step: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() {
    if let Ok(threads) = std::env::var("STEER_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap reserves exit code 2, which this tool uses for "marginal";
            // route both parse errors and --help through our own codes
            if e.use_stderr() {
                eprintln!("{e}");
                std::process::exit(3);
            }
            print!("{e}");
            std::process::exit(0);
        }
    };
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(3);
        }
    }
}

fn exit_code(verdict: Verdict) -> i32 {
    match verdict {
        Verdict::Unsteerable => 0,
        Verdict::Steerable => 1,
        Verdict::Marginal => 2,
    }
}

fn emit(report: &serde_json::Value, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(report)?;
    match out {
        Some(path) => std::fs::write(path, text + "\n")
            .with_context(|| format!("writing {}", path.display()))?,
        None => println!("{text}"),
    }
    Ok(())
}

fn radius_json(r: &RadiusResult) -> serde_json::Value {
    // infinite values have no JSON number; serde_json would silently emit
    // null anyway, so make the substitution explicit
    let mut v = serde_json::to_value(r).expect("radius result serializes");
    if !r.value.is_finite() {
        v["value"] = serde_json::Value::Null;
        v["note"] = json!("degenerate state map: the state is separable, no finite radius");
    }
    v
}

/// Resolves an `--ansatz` flag into a measure and the map to pair it with.
///
/// The Jevtic ansatz lives on the canonical T-state axes, so it comes with
/// the canonical-frame map; every other ansatz pairs with the state's own
/// map. The radius is frame invariant either way.
fn build_ansatz(
    state: &TwoQubitState,
    name: &str,
    grid: usize,
    tstate_tol: f64,
) -> Result<(SphereMeasure, EprMap, String)> {
    let map = state.epr_map();
    if name == "jevtic" {
        let form = map
            .canonicalize_tstate(tstate_tol)
            .context("the jevtic ansatz requires a T-state (maximally mixed marginals)")?;
        let density = normalize_jevtic(form.t_diag, 1e-8)?;
        let measure = fibonacci_grid(grid, grid % 2 == 0, Some(&density))?;
        return Ok((measure, form.canonical_map(), format!("jevtic[{grid}]")));
    }
    if name == "uniform" {
        let measure = fibonacci_grid(grid, grid % 2 == 0, None)?;
        return Ok((measure, map, format!("uniform[{grid}]")));
    }
    if let Some(n) = name.strip_prefix("grid:") {
        let n: usize = n.parse().with_context(|| format!("bad grid size in --ansatz {name}"))?;
        let measure = fibonacci_grid(n, n % 2 == 0, None)?;
        return Ok((measure, map, format!("uniform[{n}]")));
    }
    let path = name.strip_prefix("file:").unwrap_or(name);
    let measure = measure_io::read_measure(Path::new(path))?;
    Ok((measure, map, format!("file[{path}]")))
}

fn parse_measurements(spec: &str, seed: u64) -> Result<Vec<Vec3>> {
    if let Some(k) = spec.strip_prefix("random:") {
        let k: usize = k.parse().with_context(|| format!("bad count in --measurements {spec}"))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        return Ok((0..k)
            .map(|_| loop {
                let v = Vec3::new(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                );
                let n = v.norm();
                if n > 1e-3 && n <= 1.0 {
                    break v / n;
                }
            })
            .collect());
    }
    measure_io::read_directions(Path::new(spec))
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Analyze { state, tol, grid, iters, seed, directions, out } => {
            let state = state.load()?;
            let map = state.epr_map();
            let budget = OptimizerBudget {
                grid,
                iters,
                seed,
                directions,
                tstate_tol: tol,
                ..Default::default()
            };
            let result = critical_radius(&state, &budget)?;
            let theta = state.theta();
            let tstate = map.canonicalize_tstate(tol).ok().map(|f| {
                json!({
                    "t_diag": [f.t_diag.x, f.t_diag.y, f.t_diag.z],
                })
            });
            let report = json!({
                "format": 1,
                "command": "analyze",
                "theta": (0..4).map(|i| (0..4).map(|j| theta[(i, j)]).collect::<Vec<_>>()).collect::<Vec<_>>(),
                "alice_bloch": [map.alice_bloch().x, map.alice_bloch().y, map.alice_bloch().z],
                "bob_bloch": [map.bob_bloch().x, map.bob_bloch().y, map.bob_bloch().z],
                "tstate": tstate,
                "radius": radius_json(&result),
            });
            emit(&report, out.as_deref())?;
            Ok(exit_code(result.verdict))
        }
        Command::Radius { state, ansatz, grid, directions, tol, out } => {
            let state = state.load()?;
            let (measure, map, name) = build_ansatz(&state, &ansatz, grid, tol)?;
            let result = principal_radius(&measure, &map, directions)?;
            let report = json!({
                "format": 1,
                "command": "radius",
                "ansatz": name,
                "radius": radius_json(&result),
            });
            emit(&report, out.as_deref())?;
            Ok(exit_code(result.verdict))
        }
        Command::Optimize { state, grid, iters, seed, out } => {
            let state = state.load()?;
            let map = state.epr_map();
            let (measure, result) = optimize_ansatz(&map, grid, iters, seed)?;
            if let Some(path) = &out {
                measure_io::write_measure(path, &measure)?;
            }
            let report = json!({
                "format": 1,
                "command": "optimize",
                "grid": grid,
                "iters": iters,
                "seed": seed,
                "measure_file": out.as_ref().map(|p| p.display().to_string()),
                "radius": radius_json(&result),
            });
            emit(&report, None)?;
            Ok(exit_code(result.verdict))
        }
        Command::Simulate { state, measurements, shots, seed, ansatz, grid, tol, out } => {
            let state = state.load()?;
            let dirs = parse_measurements(&measurements, seed.wrapping_add(1))?;
            let (measure, map, name) = build_ansatz(&state, &ansatz, grid, tol)?;
            let sim = steer_core::simulate(&measure, &map, &dirs, shots, seed)?;
            let report = json!({
                "format": 1,
                "command": "simulate",
                "ansatz": name,
                "report": sim,
            });
            emit(&report, out.as_deref())?;
            Ok(0)
        }
        Command::Scan { family, parameter, start, stop, step, out } => {
            if family != "werner" || parameter != "p" {
                bail!("scan supports --family werner --parameter p");
            }
            if !(step > 0.0) {
                bail!("--step must be positive");
            }
            if start > stop {
                bail!("empty range: start {start} > stop {stop}");
            }
            let mut csv = String::from("parameter,value,error_estimate,verdict,method\n");
            let n = ((stop - start) / step).round() as usize;
            let count = if start + n as f64 * step <= stop + step * 1e-9 { n } else { n - 1 };
            for i in 0..=count {
                let p = start + i as f64 * step;
                let state = input::state_from_family(&format!("werner:{p}"))
                    .with_context(|| format!("scan point p = {p}"))?;
                let r = critical_radius(&state, &OptimizerBudget::default())?;
                let verdict = match r.verdict {
                    Verdict::Unsteerable => "unsteerable",
                    Verdict::Steerable => "steerable",
                    Verdict::Marginal => "marginal",
                };
                let method = serde_json::to_value(r.method)?
                    .as_str()
                    .ok_or_else(|| anyhow!("method serializes to a string"))?
                    .to_string();
                csv.push_str(&format!("{p},{},{},{verdict},{method}\n", r.value, r.error_estimate));
            }
            match out {
                Some(path) => std::fs::write(&path, csv)
                    .with_context(|| format!("writing {}", path.display()))?,
                None => print!("{csv}"),
            }
            Ok(0)
        }
    }
}
