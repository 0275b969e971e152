//! The sketch-and-project iteration with auxiliary residual maintenance.
//!
//! Each step reads the sketched losses `f_i = ||R_i||^2`, draws an index `j`,
//! moves `x <- x - U_j R_j`, then updates every residual with
//! `R_i <- R_i - G_ij R_j` so that no product with `A` is needed.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use crate::analysis::{flops_per_iteration, FlopModel};
use crate::error::{Error, Result};
use crate::linalg::norm_sq;
use crate::sampling::{Draw, RngStream, Sampler, SamplingRule};
use crate::sketch::PrecomputedOperators;
use crate::system::{InnerProduct, LinearSystem};

/// When to stop and how often to resynchronize the residuals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StopCriteria {
    pub max_iters: usize,
    /// Bound on `||x - x*||_B^2` when `x*` is known, otherwise on `max_i f_i`.
    pub error_tol: f64,
    /// Recompute every residual directly this often; `None` disables it.
    pub refresh_every: Option<usize>,
    /// Overrides the system's loss threshold for the converged signal.
    pub loss_tol: Option<f64>,
}

impl Default for StopCriteria {
    fn default() -> Self {
        Self {
            max_iters: 10_000,
            error_tol: 1e-10,
            refresh_every: Some(1000),
            loss_tol: None,
        }
    }
}

/// Extra bookkeeping switches.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SolverOptions {
    /// Keep every residual current even for fixed rules, so losses can be reported.
    pub track_losses: bool,
    /// Measure the one-step identities on every step.
    pub verify: bool,
}

/// Loss statistics at the iterate a step started from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossSummary {
    pub sum: f64,
    pub max: f64,
    /// `sum_i p^k_i f_i` under the active rule.
    pub expected: f64,
}

/// What one step did.
#[derive(Clone, Debug, PartialEq)]
pub struct StepReport {
    pub index: usize,
    /// `f_{i_k}(x^k)`
    pub f_before: f64,
    /// Size of the capped rule's admissible set (1 for max-distance, 0 for fixed rules).
    pub w_size: usize,
    pub losses: Option<LossSummary>,
    /// `||x^{k+1} - x^k||_B^2` (verify mode).
    pub travel_b_sq: Option<f64>,
    /// `||x^k - x*||_B^2 - ||x^{k+1} - x*||_B^2` (verify mode, `x*` known).
    pub err_drop: Option<f64>,
    /// `f_{i_k}(x^{k+1})`, computed directly (verify mode).
    pub loss_after: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum StepOutcome {
    Stepped(StepReport),
    /// Every loss is below tolerance; the state was left unchanged.
    Converged,
}

#[derive(Clone, Debug)]
enum ErrorTracker {
    Unknown,
    Euclidean(Vec<f64>),
    /// `A x - b`, which equals `A (x - x*)` on a consistent system.
    Gram(Vec<f64>),
    Spd(Vec<f64>),
}

/// Iterate, residuals, counters, and the trial's random stream.
#[derive(Clone, Debug)]
pub struct SolverState {
    x: Vec<f64>,
    residuals: Vec<f64>,
    k: usize,
    flops: u64,
    last_index: Option<usize>,
    rng: RngStream,
    tracker: ErrorTracker,
    max_drift: f64,
}

impl SolverState {
    pub fn x(&self) -> &[f64] {
        &self.x
    }

    /// Stacked sketched residuals `R_i`, `tau` entries per sketch.
    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    pub fn iteration(&self) -> usize {
        self.k
    }

    pub fn flops(&self) -> u64 {
        self.flops
    }

    pub fn last_index(&self) -> Option<usize> {
        self.last_index
    }

    /// Largest residual drift seen at a periodic refresh.
    pub fn max_drift(&self) -> f64 {
        self.max_drift
    }

    pub fn rng(&self) -> &RngStream {
        &self.rng
    }
}

/// A solver bound to one system, operator set, and sampling rule.
pub struct Solver<'a> {
    system: &'a LinearSystem,
    ops: &'a PrecomputedOperators,
    sampler: Sampler,
    options: SolverOptions,
    step_flops: u64,
    maintain_all: bool,
    loss_tol: f64,
    refresh_every: Option<usize>,
}

impl<'a> Solver<'a> {
    pub fn new(system: &'a LinearSystem, ops: &'a PrecomputedOperators, rule: &SamplingRule) -> Result<Self> {
        Self::with_options(system, ops, rule, SolverOptions::default())
    }

    pub fn with_options(
        system: &'a LinearSystem,
        ops: &'a PrecomputedOperators,
        rule: &SamplingRule,
        options: SolverOptions,
    ) -> Result<Self> {
        if ops.rows() != system.rows() || ops.cols() != system.cols() {
            return Err(Error::invalid("operators were built for a different system"));
        }
        let sampler = Sampler::new(rule, ops)?;
        let step_flops = flops_per_iteration(&FlopModel::for_operators(ops)?, rule)?;
        let maintain_all = options.track_losses || sampler.is_adaptive() || ops.fixed_rule_prefers_auxiliary();
        Ok(Self {
            system,
            ops,
            sampler,
            options,
            step_flops,
            maintain_all,
            loss_tol: system.loss_tolerance(),
            refresh_every: StopCriteria::default().refresh_every,
        })
    }

    pub fn sampler(&self) -> &Sampler {
        &self.sampler
    }

    /// Model flops charged per step.
    pub fn flops_per_step(&self) -> u64 {
        self.step_flops
    }

    /// Starting state: `R_i = C_i^T S_i^T (A x0 - b)`.
    pub fn init_state(&self, x0: &[f64], rng: RngStream) -> Result<SolverState> {
        if x0.len() != self.system.cols() {
            return Err(Error::invalid(format!(
                "x0 has length {}, expected {}",
                x0.len(),
                self.system.cols()
            )));
        }
        let residuals = self.ops.residuals_direct(x0);
        let tracker = match (self.system.x_star(), self.system.inner()) {
            (None, _) => ErrorTracker::Unknown,
            (Some(xs), InnerProduct::Identity) => ErrorTracker::Euclidean(xs.to_vec()),
            (Some(_), InnerProduct::GramOfA) => {
                let mut r = self.system.a().matvec(x0);
                for (ri, bi) in r.iter_mut().zip(self.system.b()) {
                    *ri -= bi;
                }
                ErrorTracker::Gram(r)
            }
            (Some(xs), InnerProduct::ExplicitSpd(_)) => ErrorTracker::Spd(xs.to_vec()),
        };
        Ok(SolverState {
            x: x0.to_vec(),
            residuals,
            k: 0,
            flops: 0,
            last_index: None,
            rng,
            tracker,
            max_drift: 0.0,
        })
    }

    /// `f_i = ||R_i||^2` for every sketch. Stale for fixed rules that only
    /// recompute the chosen residual.
    pub fn sketched_losses(&self, state: &SolverState) -> Vec<f64> {
        let mut f = vec![0.0; self.ops.q()];
        losses_into(&state.residuals, self.ops.tau(), &mut f);
        f
    }

    /// `||x - x*||_B^2`, when `x*` is known.
    pub fn error_b_sq(&self, state: &SolverState) -> Option<f64> {
        match &state.tracker {
            ErrorTracker::Unknown => None,
            ErrorTracker::Euclidean(xs) => Some(state.x.iter().zip(xs).map(|(a, b)| (a - b) * (a - b)).sum()),
            ErrorTracker::Gram(r) => Some(norm_sq(r)),
            ErrorTracker::Spd(xs) => {
                let d: Vec<f64> = state.x.iter().zip(xs).map(|(a, b)| a - b).collect();
                match self.system.inner() {
                    InnerProduct::ExplicitSpd(b) => Some(b.quadratic(&d)),
                    _ => unreachable!("tracker matches the inner product"),
                }
            }
        }
    }

    /// One iteration. Returns [`StepOutcome::Converged`] without touching the
    /// state once every tracked loss is below tolerance.
    pub fn step(&self, state: &mut SolverState) -> Result<StepOutcome> {
        let tau = self.ops.tau();
        let (draw, losses) = if self.maintain_all {
            let mut f = vec![0.0; self.ops.q()];
            losses_into(&state.residuals, tau, &mut f);
            let sum: f64 = f.iter().sum();
            let max = f.iter().copied().fold(0.0, f64::max);
            if max <= self.loss_tol {
                return Ok(StepOutcome::Converged);
            }
            let draw = self.sampler.draw(Some(&f), self.loss_tol, &mut state.rng);
            let summary = (self.options.track_losses || self.options.verify).then(|| LossSummary {
                sum,
                max,
                expected: self.sampler.expected_loss(&f),
            });
            (draw, summary)
        } else {
            (self.sampler.draw(None, self.loss_tol, &mut state.rng), None)
        };
        let (index, w_size) = match draw {
            Draw::Index { index, w_size } => (index, w_size),
            Draw::Converged => return Ok(StepOutcome::Converged),
        };

        let r_old: Vec<f64> = if self.maintain_all {
            state.residuals[index * tau..(index + 1) * tau].to_vec()
        } else {
            self.ops.residual_unchecked(index, &state.x)
        };
        let f_before = norm_sq(&r_old);
        let (x_prev, err_prev) = if self.options.verify {
            (Some(state.x.clone()), self.error_b_sq(state))
        } else {
            (None, None)
        };

        let patch = self.ops.apply_direction(index, &r_old, &mut state.x);
        if let ErrorTracker::Gram(r) = &mut state.tracker {
            match patch {
                Some((j, delta)) => self.ops.column_axpy(j, delta, r),
                None => {
                    self.system.a().matvec_into(&state.x, r);
                    for (ri, bi) in r.iter_mut().zip(self.system.b()) {
                        *ri -= bi;
                    }
                }
            }
        }
        if self.maintain_all {
            self.ops.auxiliary_update(index, &r_old, &mut state.residuals);
        }
        state.k += 1;
        state.flops += self.step_flops;
        state.last_index = Some(index);

        if self.maintain_all {
            if let Some(every) = self.refresh_every {
                if state.k.is_multiple_of(every) {
                    self.refresh(state);
                }
            }
        }

        let (travel_b_sq, err_drop, loss_after) = match x_prev {
            Some(prev) => {
                let dx: Vec<f64> = state.x.iter().zip(&prev).map(|(a, b)| a - b).collect();
                let travel = self.system.b_norm_sq(&dx)?;
                let drop = err_prev.zip(self.error_b_sq(state)).map(|(a, b)| a - b);
                let after = norm_sq(&self.ops.residual_unchecked(index, &state.x));
                (Some(travel), drop, Some(after))
            }
            None => (None, None, None),
        };
        Ok(StepOutcome::Stepped(StepReport {
            index,
            f_before,
            w_size,
            losses,
            travel_b_sq,
            err_drop,
            loss_after,
        }))
    }

    /// Recomputes every residual directly and records the drift.
    pub fn refresh(&self, state: &mut SolverState) {
        let direct = self.ops.residuals_direct(&state.x);
        let drift = direct
            .iter()
            .zip(&state.residuals)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        state.max_drift = state.max_drift.max(drift);
        state.residuals = direct;
        if let ErrorTracker::Gram(r) = &mut state.tracker {
            self.system.a().matvec_into(&state.x, r);
            for (ri, bi) in r.iter_mut().zip(self.system.b()) {
                *ri -= bi;
            }
        }
    }

    /// Iterates from `x0` until convergence or `stop.max_iters`, recording a trace.
    pub fn run(&self, x0: &[f64], rng: RngStream, stop: &StopCriteria) -> Result<TrialTrace> {
        if stop.refresh_every == Some(0) {
            return Err(Error::invalid("refresh interval must be at least 1"));
        }
        if stop.loss_tol.is_some_and(|t| !(t >= 0.0)) {
            return Err(Error::invalid("loss tolerance must be nonnegative"));
        }
        let tracking = Solver {
            system: self.system,
            ops: self.ops,
            sampler: self.sampler.clone(),
            options: SolverOptions {
                track_losses: true,
                ..self.options
            },
            step_flops: self.step_flops,
            maintain_all: true,
            loss_tol: stop.loss_tol.unwrap_or(self.loss_tol),
            refresh_every: stop.refresh_every,
        };
        tracking.run_tracked(x0, rng, stop)
    }

    fn run_tracked(&self, x0: &[f64], rng: RngStream, stop: &StopCriteria) -> Result<TrialTrace> {
        let mut state = self.init_state(x0, rng)?;
        let initial_err = self.error_b_sq(&state);
        let mut rows = Vec::new();
        let mut err = initial_err;
        let reached = |err: Option<f64>, state: &SolverState| match err {
            Some(e) => e <= stop.error_tol,
            None => self.sketched_losses(state).iter().all(|&f| f <= stop.error_tol),
        };
        let mut status = TraceStatus::MaxIters;
        if reached(err, &state) {
            status = TraceStatus::Converged;
        } else {
            while state.k < stop.max_iters {
                let report = match self.step(&mut state)? {
                    StepOutcome::Converged => {
                        status = TraceStatus::Converged;
                        break;
                    }
                    StepOutcome::Stepped(r) => r,
                };
                let losses = report.losses.expect("run tracks losses");
                let step_factor = err.and_then(|e| step_size_factor(losses.expected, e, stop.error_tol));
                err = self.error_b_sq(&state);
                rows.push(TraceRow {
                    k: state.k,
                    index: report.index,
                    err_b_sq: err,
                    sum_loss: losses.sum,
                    max_loss: losses.max,
                    step_factor,
                    flops: state.flops,
                });
                if reached(err, &state) {
                    status = TraceStatus::Converged;
                    break;
                }
            }
        }
        Ok(TrialTrace {
            initial_err,
            rows,
            status,
            max_drift: state.max_drift,
            x: state.x,
        })
    }
}

/// `sum_i p^k_i f_i / ||x^k - x*||_B^2`, or `None` when the error is at or below `tol`.
pub fn step_size_factor(expected_loss: f64, err_b_sq: f64, tol: f64) -> Option<f64> {
    (err_b_sq > tol).then(|| expected_loss / err_b_sq)
}

fn losses_into(residuals: &[f64], tau: usize, f: &mut [f64]) {
    if tau == 1 {
        for (fi, r) in f.iter_mut().zip(residuals) {
            *fi = r * r;
        }
    } else {
        for (fi, r) in f.iter_mut().zip(residuals.chunks_exact(tau)) {
            *fi = norm_sq(r);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TraceStatus {
    Converged,
    MaxIters,
}

/// Row `k` describes the step from `x^{k-1}` to `x^k`: the index used, the
/// error after it, and the loss statistics and step factor before it.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub k: usize,
    pub index: usize,
    pub err_b_sq: Option<f64>,
    pub sum_loss: f64,
    pub max_loss: f64,
    pub step_factor: Option<f64>,
    pub flops: u64,
}

#[derive(Clone, Debug)]
pub struct TrialTrace {
    /// `||x^0 - x*||_B^2`
    pub initial_err: Option<f64>,
    pub rows: Vec<TraceRow>,
    pub status: TraceStatus,
    pub max_drift: f64,
    /// Final iterate.
    pub x: Vec<f64>,
}

pub const TRACE_HEADER: &str = "k,index,err_b_sq,sum_loss,max_loss,step_factor,flops";

impl TrialTrace {
    pub fn iterations(&self) -> usize {
        self.rows.len()
    }

    /// CSV with [`TRACE_HEADER`]; unknown values are left empty.
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|v| format!("{v:.16e}")).unwrap_or_default();
        let mut out = String::from(TRACE_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{:.16e},{:.16e},{},{}",
                r.k,
                r.index,
                opt(r.err_b_sq),
                r.sum_loss,
                r.max_loss,
                opt(r.step_factor),
                r.flops
            );
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(self.to_csv().as_bytes()).map_err(|e| Error::io(path, e))
    }
}

/// Convenience wrapper: build a solver and run one trial.
pub fn run(
    system: &LinearSystem,
    ops: &PrecomputedOperators,
    rule: &SamplingRule,
    stop: &StopCriteria,
    x0: &[f64],
    rng: RngStream,
) -> Result<TrialTrace> {
    Solver::new(system, ops, rule)?.run(x0, rng, stop)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::sketch::{precompute, SketchSet};

    fn identity_system() -> (LinearSystem, PrecomputedOperators) {
        let a = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let system = LinearSystem::new(a, vec![1.0, 1.0], InnerProduct::Identity, Some(vec![1.0, 1.0])).unwrap();
        let ops = precompute(&system, &SketchSet::RowIdentity).unwrap();
        (system, ops)
    }

    fn diag_cd_system() -> (LinearSystem, PrecomputedOperators) {
        let a = Matrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let system = LinearSystem::new(a, vec![2.0, 1.0], InnerProduct::GramOfA, Some(vec![1.0, 1.0])).unwrap();
        let ops = precompute(&system, &SketchSet::ColumnOfA).unwrap();
        (system, ops)
    }

    #[test]
    fn initial_residuals() {
        let (system, ops) = identity_system();
        let solver = Solver::new(&system, &ops, &SamplingRule::MaxDistance).unwrap();
        let state = solver.init_state(&[0.0, 0.0], RngStream::new(0)).unwrap();
        assert_eq!(state.residuals(), &[-1.0, -1.0]);
        assert_eq!(solver.sketched_losses(&state), vec![1.0, 1.0]);
        let at_solution = solver.init_state(&[1.0, 1.0], RngStream::new(0)).unwrap();
        assert_eq!(solver.sketched_losses(&at_solution), vec![0.0, 0.0]);
        assert!(solver.init_state(&[0.0], RngStream::new(0)).is_err());

        let a = Matrix::from_rows(&[vec![3.0, 4.0]]).unwrap();
        let single = LinearSystem::new(a, vec![5.0], InnerProduct::Identity, None).unwrap();
        let ops = precompute(&single, &SketchSet::RowIdentity).unwrap();
        let state = Solver::new(&single, &ops, &SamplingRule::Uniform)
            .unwrap()
            .init_state(&[0.0, 0.0], RngStream::new(0))
            .unwrap();
        assert!((state.residuals()[0] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn coordinate_descent_losses() {
        let (system, ops) = diag_cd_system();
        let solver = Solver::new(&system, &ops, &SamplingRule::MaxDistance).unwrap();
        let state = solver.init_state(&[0.0, 0.0], RngStream::new(0)).unwrap();
        let f = solver.sketched_losses(&state);
        assert!((f[0] - 4.0).abs() < 1e-12 && (f[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn max_distance_solves_orthogonal_rows_in_two_steps() {
        let (system, ops) = identity_system();
        let options = SolverOptions {
            track_losses: true,
            verify: true,
        };
        let solver = Solver::with_options(&system, &ops, &SamplingRule::MaxDistance, options).unwrap();
        let mut state = solver.init_state(&[0.0, 0.0], RngStream::new(0)).unwrap();

        let StepOutcome::Stepped(first) = solver.step(&mut state).unwrap() else {
            panic!("first step should move");
        };
        assert_eq!(first.index, 0);
        assert_eq!(state.x(), &[1.0, 0.0]);
        assert_eq!(state.residuals(), &[0.0, -1.0]);
        assert_eq!(first.travel_b_sq, Some(1.0));
        assert_eq!(first.err_drop, Some(1.0));

        let StepOutcome::Stepped(second) = solver.step(&mut state).unwrap() else {
            panic!("second step should move");
        };
        assert_eq!(second.index, 1);
        assert_eq!(state.x(), &[1.0, 1.0]);
        assert_eq!(state.residuals(), &[0.0, 0.0]);
        assert_eq!(state.iteration(), 2);

        let before = state.x().to_vec();
        assert_eq!(solver.step(&mut state).unwrap(), StepOutcome::Converged);
        assert_eq!(state.x(), &before[..]);
        assert_eq!(state.iteration(), 2);
    }

    #[test]
    fn coordinate_descent_error_drop_equals_loss() {
        let (system, ops) = diag_cd_system();
        let options = SolverOptions {
            track_losses: true,
            verify: true,
        };
        let solver = Solver::with_options(&system, &ops, &SamplingRule::MaxDistance, options).unwrap();
        let mut state = solver.init_state(&[0.0, 0.0], RngStream::new(0)).unwrap();
        assert!((solver.error_b_sq(&state).unwrap() - 5.0).abs() < 1e-12);
        let StepOutcome::Stepped(r) = solver.step(&mut state).unwrap() else {
            panic!("should step");
        };
        assert_eq!(r.index, 0);
        assert!((state.x()[0] - 1.0).abs() < 1e-12 && state.x()[1].abs() < 1e-12);
        assert!((solver.error_b_sq(&state).unwrap() - 1.0).abs() < 1e-12);
        assert!((r.err_drop.unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn run_examples() {
        let (system, ops) = identity_system();
        let trace = run(
            &system,
            &ops,
            &SamplingRule::MaxDistance,
            &StopCriteria::default(),
            &[0.0, 0.0],
            RngStream::new(0),
        )
        .unwrap();
        assert_eq!(trace.status, TraceStatus::Converged);
        assert_eq!(trace.iterations(), 2);
        assert_eq!(trace.rows.last().unwrap().err_b_sq, Some(0.0));

        let stop = StopCriteria {
            max_iters: 0,
            ..StopCriteria::default()
        };
        let empty = run(&system, &ops, &SamplingRule::Uniform, &stop, &[0.0, 0.0], RngStream::new(0)).unwrap();
        assert!(empty.rows.is_empty());
        assert_eq!(empty.status, TraceStatus::MaxIters);
        assert_eq!(empty.to_csv(), format!("{TRACE_HEADER}\n"));

        let a = Matrix::from_rows(&[vec![3.0, 4.0]]).unwrap();
        let single = LinearSystem::new(a, vec![5.0], InnerProduct::Identity, Some(vec![0.6, 0.8])).unwrap();
        let ops = precompute(&single, &SketchSet::RowIdentity).unwrap();
        for rule in ["uniform", "rownorm", "maxdist", "proportional", "capped:0.5"] {
            let rule = SamplingRule::parse(rule).unwrap();
            let trace = run(&single, &ops, &rule, &StopCriteria::default(), &[0.0, 0.0], RngStream::new(3)).unwrap();
            assert_eq!(trace.status, TraceStatus::Converged);
            assert_eq!(trace.iterations(), 1);
            assert!((trace.x[0] - 0.6).abs() < 1e-15 && (trace.x[1] - 0.8).abs() < 1e-15);
        }
    }

    #[test]
    fn trace_csv_leaves_missing_fields_empty() {
        let a = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let system = LinearSystem::new(a, vec![1.0, 2.0], InnerProduct::Identity, None).unwrap();
        let ops = precompute(&system, &SketchSet::RowIdentity).unwrap();
        let trace = run(
            &system,
            &ops,
            &SamplingRule::MaxDistance,
            &StopCriteria::default(),
            &[0.0, 0.0],
            RngStream::new(0),
        )
        .unwrap();
        let csv = trace.to_csv();
        let first = csv.lines().nth(1).unwrap();
        assert!(first.starts_with("1,1,,"), "{first}");
        assert_eq!(trace.status, TraceStatus::Converged);
    }

    #[test]
    fn step_factor_excluded_at_tolerance() {
        assert_eq!(step_size_factor(1.0, 2.0, 1e-10), Some(0.5));
        assert_eq!(step_size_factor(1.0, 1e-12, 1e-10), None);
    }

    #[test]
    fn zero_refresh_interval_rejected() {
        let (system, ops) = identity_system();
        let stop = StopCriteria {
            refresh_every: Some(0),
            ..StopCriteria::default()
        };
        assert!(run(&system, &ops, &SamplingRule::Uniform, &stop, &[0.0, 0.0], RngStream::new(0)).is_err());
    }
}
