//! Sketch-and-project solvers for consistent linear systems `Ax = b`.

pub mod analysis;
pub mod error;
pub mod experiment;
pub mod io;
pub mod linalg;
pub mod sampling;
pub mod sketch;
pub mod solver;
pub mod system;

pub use analysis::{
    check_exactness, estimate_sigma_inf_sq, flops_per_iteration, rate_bounds, sigma_p_sq, spectral_report,
    FlopMethod, FlopModel, RateInputs, SpectralReport,
};
pub use error::{Error, Result};
pub use experiment::{
    emit_csv, generate_gaussian, generate_solution, run_experiment, ExperimentResult, ExperimentSpec, MatrixSource,
    Method,
};
pub use io::{load_matrix, load_matrix_market, write_matrix_market};
pub use linalg::{CsrMatrix, DenseMatrix, Matrix};
pub use sampling::{gamma, AliasTable, CappedReference, RngStream, Sampler, SamplingRule};
pub use sketch::{precompute, GramBlocks, PrecomputedOperators, SketchFamily, SketchSet};
pub use solver::{run, Solver, SolverOptions, SolverState, StepOutcome, StepReport, StopCriteria, TraceStatus, TrialTrace};
pub use system::{b_norm_sq, pinv_factor, pinv_factor_of_columns, InnerProduct, LinearSystem, PsdFactor, SpdMatrix};
