//! Randomized Kaczmarz on a tall Gaussian system under every sampling rule.
//!
//! Run with `cargo run --release --example kaczmarz_rules`.

use std::sync::Arc;

use sketchproj::{generate_gaussian, precompute, Matrix, Method, RngStream, SamplingRule, Solver, StopCriteria};

fn main() -> sketchproj::Result<()> {
    let a = Arc::new(Matrix::Dense(generate_gaussian(300, 30, 7)));
    let method = Method::Kaczmarz;
    let system = method.system(Arc::clone(&a), &mut RngStream::with_stream(7, 1))?;
    let ops = precompute(&system, &method.sketches(a.rows())?)?;
    let stop = StopCriteria {
        max_iters: 20_000,
        error_tol: 1e-12,
        ..StopCriteria::default()
    };

    println!("{:<14} {:>10} {:>12} {:>14}", "rule", "steps", "flops", "final error");
    for label in ["uniform", "rownorm", "proportional", "capped:0.5", "capped:0.9", "maxdist"] {
        let rule = SamplingRule::parse(label)?;
        let trace = Solver::new(&system, &ops, &rule)?.run(&vec![0.0; a.cols()], RngStream::new(1), &stop)?;
        let last = trace.rows.last().expect("at least one step");
        println!(
            "{:<14} {:>10} {:>12} {:>14.3e}",
            rule.label(),
            trace.iterations(),
            last.flops,
            last.err_b_sq.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
