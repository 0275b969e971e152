//! Randomized coordinate descent on a least-squares system, where progress is
//! measured in the `A^T A` norm.

use std::sync::Arc;

use sketchproj::{generate_gaussian, precompute, Matrix, Method, RngStream, SamplingRule, Solver, StopCriteria};

fn main() -> sketchproj::Result<()> {
    let a = Arc::new(Matrix::Dense(generate_gaussian(200, 40, 3)));
    let method = Method::CoordinateDescent;
    let system = method.system(Arc::clone(&a), &mut RngStream::with_stream(3, 1))?;
    let ops = precompute(&system, &method.sketches(a.rows())?)?;
    println!("{} sketches of size {}", ops.q(), ops.tau());

    let stop = StopCriteria {
        max_iters: 5000,
        error_tol: 1e-14,
        ..StopCriteria::default()
    };
    for label in ["uniform", "maxdist"] {
        let rule = SamplingRule::parse(label)?;
        let trace = Solver::new(&system, &ops, &rule)?.run(&vec![0.0; a.cols()], RngStream::new(9), &stop)?;
        println!("{label}: {:?} after {} steps", trace.status, trace.iterations());
        for row in trace.rows.iter().filter(|r| r.k % 100 == 0).take(5) {
            println!("  k={:<5} ||x - x*||^2 = {:.3e}", row.k, row.err_b_sq.unwrap_or(f64::NAN));
        }
    }
    Ok(())
}
