//! Synthetic problems and the multi-trial benchmark protocol.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::load_matrix;
use crate::linalg::{DenseMatrix, Matrix};
use crate::sampling::{RngStream, SamplingRule};
use crate::sketch::{precompute, PrecomputedOperators, SketchSet};
use crate::solver::{Solver, StopCriteria};
use crate::system::{b_norm_sq, InnerProduct, LinearSystem};

/// Stream used for the sampling draws of a trial.
pub const SAMPLING_STREAM: u64 = 0;
/// Stream used to draw `omega` for an exact solution.
pub const SOLUTION_STREAM: u64 = 1;

/// `m x n` matrix of i.i.d. standard normal entries, row by row from `seed`.
pub fn generate_gaussian(m: usize, n: usize, seed: u64) -> DenseMatrix {
    let mut rng = RngStream::new(seed);
    let data = (0..m * n).map(|_| rng.normal()).collect();
    DenseMatrix::new(m, n, data).expect("shape matches data")
}

/// `x* = A^T w / ||A^T w||_B` with `w ~ N(0, I_m)`, and `b = A x*`.
pub fn generate_solution(a: &Matrix, inner: &InnerProduct, rng: &mut RngStream) -> Result<(Vec<f64>, Vec<f64>)> {
    for _ in 0..=10 {
        let omega: Vec<f64> = (0..a.rows()).map(|_| rng.normal()).collect();
        let v = a.matvec_t(&omega);
        let norm = b_norm_sq(&v, inner, a)?.sqrt();
        if norm > 0.0 && norm.is_finite() {
            let x: Vec<f64> = v.iter().map(|vi| vi / norm).collect();
            let b = a.matvec(&x);
            return Ok((x, b));
        }
    }
    Err(Error::invalid("A^T w vanished for every draw; is A zero?"))
}

/// Which sketch-and-project instance to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Kaczmarz,
    CoordinateDescent,
    /// Consecutive row blocks of the given size.
    Block(usize),
}

impl Method {
    /// Parses `kaczmarz`, `cd`, or `block:<tau>`.
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "kaczmarz" => Ok(Method::Kaczmarz),
            "cd" => Ok(Method::CoordinateDescent),
            other => match other.strip_prefix("block:").map(str::parse::<usize>) {
                Some(Ok(tau)) if tau >= 1 => Ok(Method::Block(tau)),
                _ => Err(Error::invalid(format!("unknown method '{other}'"))),
            },
        }
    }

    pub fn inner_product(&self) -> InnerProduct {
        match self {
            Method::CoordinateDescent => InnerProduct::GramOfA,
            _ => InnerProduct::Identity,
        }
    }

    pub fn sketches(&self, rows: usize) -> Result<SketchSet> {
        match self {
            Method::Kaczmarz => Ok(SketchSet::RowIdentity),
            Method::CoordinateDescent => Ok(SketchSet::ColumnOfA),
            Method::Block(tau) => SketchSet::consecutive_blocks(rows, *tau),
        }
    }

    /// System with a fresh exact solution drawn from `rng`.
    pub fn system(&self, a: Arc<Matrix>, rng: &mut RngStream) -> Result<LinearSystem> {
        let inner = self.inner_product();
        let (x, b) = generate_solution(&a, &inner, rng)?;
        LinearSystem::new(a, b, inner, Some(x))
    }
}

/// Where the benchmark matrix comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixSource {
    Path(PathBuf),
    Gaussian { rows: usize, cols: usize, seed: u64 },
}

impl MatrixSource {
    pub fn load(&self) -> Result<Matrix> {
        match self {
            MatrixSource::Path(p) => load_matrix(p),
            MatrixSource::Gaussian { rows, cols, seed } => {
                if *rows == 0 || *cols == 0 {
                    return Err(Error::invalid("gaussian matrix needs rows, cols >= 1"));
                }
                Ok(Matrix::Dense(generate_gaussian(*rows, *cols, *seed)))
            }
        }
    }
}

fn default_trials() -> usize {
    50
}

fn default_error_tol() -> f64 {
    1e-10
}

fn default_true() -> bool {
    true
}

fn default_output() -> PathBuf {
    PathBuf::from("bench_out")
}

/// A benchmark, usually read from a TOML file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub matrix: MatrixSource,
    /// `kaczmarz`, `cd`, or `block:<tau>`.
    pub method: String,
    pub rules: Vec<String>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Iteration budget; defaults to `10 * max(m, n)`.
    #[serde(default)]
    pub iterations: Option<usize>,
    #[serde(default = "default_error_tol")]
    pub error_tol: f64,
    /// Loss threshold for the converged signal; defaults to the system's.
    #[serde(default)]
    pub loss_tol: Option<f64>,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    /// Also run fresh-solution trials for the minimal step size factor.
    #[serde(default = "default_true")]
    pub step_factors: bool,
    /// Add a `mean_err` column to the curve files.
    #[serde(default)]
    pub emit_mean: bool,
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::Parse {
            line: e
                .span()
                .map(|s| text[..s.start.min(text.len())].lines().count().max(1))
                .unwrap_or(0),
            message: e.message().to_string(),
        })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(Error::invalid("trials must be at least 1"));
        }
        if self.iterations == Some(0) {
            return Err(Error::invalid("iterations must be at least 1"));
        }
        if !(self.error_tol >= 0.0) {
            return Err(Error::invalid("error_tol must be nonnegative"));
        }
        if self.loss_tol.is_some_and(|t| !(t >= 0.0)) {
            return Err(Error::invalid("loss_tol must be nonnegative"));
        }
        Method::parse(&self.method)?;
        Ok(())
    }

    pub fn parsed_rules(&self) -> Result<Vec<SamplingRule>> {
        self.rules.iter().map(|r| SamplingRule::parse(r)).collect()
    }
}

/// One aggregated iteration of a rule's error curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CurvePoint {
    pub k: usize,
    pub flops: u64,
    pub median: f64,
    pub p025: f64,
    pub p975: f64,
    pub mean: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RuleResult {
    pub label: String,
    pub flops_per_iteration: u64,
    /// Iterations `1..=budget`; converged trials hold their last error.
    pub curve: Vec<CurvePoint>,
    /// Minimum over fresh-solution trials and iterations of the expected step size factor.
    pub min_step_factor: Option<f64>,
    pub converged_trials: usize,
    pub max_drift: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentResult {
    pub rows: usize,
    pub cols: usize,
    pub trials: usize,
    pub iterations: usize,
    pub rules: Vec<RuleResult>,
}

impl ExperimentResult {
    pub fn rule(&self, label: &str) -> Option<&RuleResult> {
        self.rules.iter().find(|r| r.label == label)
    }
}

/// Percentile with linear interpolation between order statistics; `sorted` must be ascending.
pub fn percentile(sorted: &[f64], pct: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * pct / 100.0;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

struct TrialOutcome {
    errors: Vec<f64>,
    converged: bool,
    max_drift: f64,
}

fn curve_trial(
    system: &LinearSystem,
    ops: &PrecomputedOperators,
    rule: &SamplingRule,
    stop: &StopCriteria,
    seed: u64,
) -> Result<TrialOutcome> {
    let solver = Solver::new(system, ops, rule)?;
    let x0 = vec![0.0; system.cols()];
    let trace = solver.run(&x0, RngStream::with_stream(seed, SAMPLING_STREAM), stop)?;
    let mut last = trace.initial_err.unwrap_or(f64::NAN);
    let mut errors = Vec::with_capacity(stop.max_iters);
    for row in &trace.rows {
        last = row.err_b_sq.unwrap_or(f64::NAN);
        errors.push(last);
    }
    errors.resize(stop.max_iters, last);
    Ok(TrialOutcome {
        errors,
        converged: trace.status == crate::solver::TraceStatus::Converged,
        max_drift: trace.max_drift,
    })
}

fn step_factor_trial(
    a: &Arc<Matrix>,
    method: Method,
    ops: &PrecomputedOperators,
    rule: &SamplingRule,
    stop: &StopCriteria,
    seed: u64,
) -> Result<Option<f64>> {
    let system = method.system(Arc::clone(a), &mut RngStream::with_stream(seed, SOLUTION_STREAM))?;
    let ops = ops.with_rhs(system.b())?;
    let solver = Solver::new(&system, &ops, rule)?;
    let trace = solver.run(
        &vec![0.0; system.cols()],
        RngStream::with_stream(seed, SAMPLING_STREAM),
        stop,
    )?;
    Ok(trace
        .rows
        .iter()
        .filter_map(|r| r.step_factor)
        .min_by(f64::total_cmp))
}

/// Runs every rule over `spec.trials` seeded trials and aggregates the curves.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    spec.validate()?;
    let method = Method::parse(&spec.method)?;
    let rules = spec.parsed_rules()?;
    let a = Arc::new(spec.matrix.load()?);
    let (m, n) = (a.rows(), a.cols());
    let budget = spec.iterations.unwrap_or(10 * m.max(n));
    let stop = StopCriteria {
        max_iters: budget,
        error_tol: spec.error_tol,
        loss_tol: spec.loss_tol,
        ..StopCriteria::default()
    };
    let shared = method.system(Arc::clone(&a), &mut RngStream::with_stream(spec.base_seed, SOLUTION_STREAM))?;
    let ops = precompute(&shared, &method.sketches(m)?)?;

    let mut results = Vec::with_capacity(rules.len());
    for rule in &rules {
        let flops_per_iteration = Solver::new(&shared, &ops, rule)?.flops_per_step();
        let seeds: Vec<u64> = (0..spec.trials as u64).map(|t| spec.base_seed.wrapping_add(t)).collect();
        let outcomes: Vec<TrialOutcome> = seeds
            .par_iter()
            .map(|&seed| curve_trial(&shared, &ops, rule, &stop, seed))
            .collect::<Result<_>>()?;
        let min_step_factor = if spec.step_factors {
            let mins: Vec<Option<f64>> = seeds
                .par_iter()
                .map(|&seed| step_factor_trial(&a, method, &ops, rule, &stop, seed))
                .collect::<Result<_>>()?;
            mins.into_iter().flatten().min_by(f64::total_cmp)
        } else {
            None
        };
        let mut column = vec![0.0; outcomes.len()];
        let curve = (0..budget)
            .map(|k| {
                for (c, o) in column.iter_mut().zip(&outcomes) {
                    *c = o.errors[k];
                }
                let mean = column.iter().sum::<f64>() / column.len() as f64;
                column.sort_by(f64::total_cmp);
                CurvePoint {
                    k: k + 1,
                    flops: (k as u64 + 1) * flops_per_iteration,
                    median: percentile(&column, 50.0),
                    p025: percentile(&column, 2.5),
                    p975: percentile(&column, 97.5),
                    mean,
                }
            })
            .collect();
        results.push(RuleResult {
            label: rule.label(),
            flops_per_iteration,
            curve,
            min_step_factor,
            converged_trials: outcomes.iter().filter(|o| o.converged).count(),
            max_drift: outcomes.iter().map(|o| o.max_drift).fold(0.0, f64::max),
        });
    }
    Ok(ExperimentResult {
        rows: m,
        cols: n,
        trials: spec.trials,
        iterations: budget,
        rules: results,
    })
}

fn sig17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Curve file contents: `k,flops,median_err,p025,p975` (plus `mean_err` if asked).
pub fn curve_csv(rule: &RuleResult, with_mean: bool) -> String {
    let mut out = String::from("k,flops,median_err,p025,p975");
    out.push_str(if with_mean { ",mean_err\n" } else { "\n" });
    for p in &rule.curve {
        let _ = write!(out, "{},{},{},{},{}", p.k, p.flops, sig17(p.median), sig17(p.p025), sig17(p.p975));
        if with_mean {
            let _ = write!(out, ",{}", sig17(p.mean));
        }
        out.push('\n');
    }
    out
}

/// `rule,min_step_factor`; rules without a value get an empty field.
pub fn step_factor_csv(result: &ExperimentResult) -> String {
    let mut out = String::from("rule,min_step_factor\n");
    for r in &result.rules {
        let _ = writeln!(out, "{},{}", r.label, r.min_step_factor.map(sig17).unwrap_or_default());
    }
    out
}

/// Writes one `<rule>_curve.csv` per rule and `step_factors.csv` into `dir`.
pub fn emit_csv(result: &ExperimentResult, dir: &Path, with_mean: bool) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for rule in &result.rules {
        let path = dir.join(format!("{}_curve.csv", rule.label));
        std::fs::write(&path, curve_csv(rule, with_mean)).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    let path = dir.join("step_factors.csv");
    std::fs::write(&path, step_factor_csv(result)).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(written)
}
