use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};

use sketchproj::experiment::SOLUTION_STREAM;
use sketchproj::{
    emit_csv, generate_gaussian, load_matrix, precompute, run_experiment, spectral_report, write_matrix_market,
    CappedReference, ExperimentSpec, Matrix, Method, Result, RngStream, Sampler, SamplingRule, Solver, StopCriteria,
};

#[derive(Parser)]
#[command(name = "sketchproj", version, about = "Sketch-and-project solvers with adaptive sampling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write an i.i.d. Gaussian matrix in Matrix Market format.
    Gen {
        #[arg(long)]
        rows: usize,
        #[arg(long)]
        cols: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve a consistent system with a random unit-norm solution and write the trace.
    Solve {
        #[arg(long)]
        matrix: PathBuf,
        /// kaczmarz, cd, or block:TAU
        #[arg(long, default_value = "kaczmarz")]
        method: String,
        /// uniform, rownorm, fixed:PATH, maxdist, proportional, capped:THETA
        #[arg(long, default_value = "maxdist")]
        rule: String,
        #[arg(long)]
        iters: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run a benchmark described by a TOML config.
    Bench {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Report spectral constants, rate bounds, and per-iteration flops.
    Analyze {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long, default_value = "kaczmarz")]
        method: String,
        /// Rule whose distribution serves as the reference.
        #[arg(long, default_value = "uniform")]
        rule: String,
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long, default_value_t = 20)]
        probes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        json: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Gen { rows, cols, seed, out } => {
            if rows == 0 || cols == 0 {
                return Err(sketchproj::Error::InvalidInput("rows and cols must be at least 1".into()));
            }
            write_matrix_market(&out, &Matrix::Dense(generate_gaussian(rows, cols, seed)))?;
            println!("wrote {rows}x{cols} Gaussian matrix to {}", out.display());
            Ok(())
        }
        Command::Solve {
            matrix,
            method,
            rule,
            iters,
            seed,
            tol,
            trace,
        } => solve(&matrix, &method, &rule, iters, seed, tol, trace.as_deref()),
        Command::Bench { config, out } => {
            let mut spec = ExperimentSpec::load(&config)?;
            if let Some(out) = out {
                spec.output = out;
            }
            let result = run_experiment(&spec)?;
            let files = emit_csv(&result, &spec.output, spec.emit_mean)?;
            println!(
                "{}x{} {}, {} trials, budget {} iterations",
                result.rows, result.cols, spec.method, result.trials, result.iterations
            );
            println!("{:<16} {:>12} {:>14} {:>18}", "rule", "converged", "final median", "min step factor");
            for r in &result.rules {
                let last = r.curve.last().map_or(f64::NAN, |p| p.median);
                let sf = r.min_step_factor.map_or("-".to_string(), |v| format!("{v:.6e}"));
                println!("{:<16} {:>12} {:>14.4e} {:>18}", r.label, r.converged_trials, last, sf);
            }
            for f in files {
                println!("wrote {}", f.display());
            }
            Ok(())
        }
        Command::Analyze {
            matrix,
            method,
            rule,
            theta,
            probes,
            seed,
            json,
        } => {
            let method = Method::parse(&method)?;
            let a = Arc::new(load_matrix(&matrix)?);
            let system = method.system(Arc::clone(&a), &mut RngStream::with_stream(seed, SOLUTION_STREAM))?;
            let ops = precompute(&system, &method.sketches(a.rows())?)?;
            let rule = SamplingRule::parse(&rule)?;
            let theta = match (&rule, theta) {
                (_, Some(t)) => t,
                (SamplingRule::Capped { theta, .. }, None) => *theta,
                _ => SamplingRule::DEFAULT_THETA,
            };
            let reference_rule = match &rule {
                SamplingRule::Capped { reference, .. } => match reference {
                    CappedReference::NormProportional => SamplingRule::NormProportional,
                    CappedReference::Uniform => SamplingRule::Uniform,
                    CappedReference::Explicit(p) => SamplingRule::Fixed(p.clone()),
                },
                r if !r.is_adaptive() => r.clone(),
                _ => SamplingRule::Uniform,
            };
            let sampler = Sampler::new(&reference_rule, &ops)?;
            let reference = sampler.distribution().expect("fixed rules carry a distribution").to_vec();
            let report = spectral_report(&system, &ops, &reference, theta, probes, &mut RngStream::new(seed))?;
            if json {
                println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            } else {
                println!("reference distribution: {}", reference_rule.label());
                print!("{report}");
            }
            Ok(())
        }
    }
}

fn solve(
    matrix: &Path,
    method: &str,
    rule: &str,
    iters: Option<usize>,
    seed: u64,
    tol: f64,
    trace: Option<&Path>,
) -> Result<()> {
    let method = Method::parse(method)?;
    let rule = SamplingRule::parse(rule)?;
    let a = Arc::new(load_matrix(matrix)?);
    let system = method.system(Arc::clone(&a), &mut RngStream::with_stream(seed, SOLUTION_STREAM))?;
    let ops = precompute(&system, &method.sketches(a.rows())?)?;
    let stop = StopCriteria {
        max_iters: iters.unwrap_or(10 * a.rows().max(a.cols())),
        error_tol: tol,
        ..StopCriteria::default()
    };
    let solver = Solver::new(&system, &ops, &rule)?;
    let result = solver.run(&vec![0.0; a.cols()], RngStream::new(seed), &stop)?;
    if let Some(path) = trace {
        result.write_csv(path)?;
    }
    let final_err = result
        .rows
        .last()
        .and_then(|r| r.err_b_sq)
        .or(result.initial_err)
        .unwrap_or(f64::NAN);
    println!(
        "{:?} after {} iterations: err_b_sq = {final_err:.6e}, model flops = {}, max drift = {:.3e}",
        result.status,
        result.iterations(),
        result.rows.last().map_or(0, |r| r.flops),
        result.max_drift
    );
    Ok(())
}
