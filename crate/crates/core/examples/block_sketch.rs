//! Block Kaczmarz with consecutive row blocks, including a rank-deficient block.

use std::sync::Arc;

use sketchproj::{precompute, DenseMatrix, Matrix, Method, RngStream, SamplingRule, Solver, StopCriteria};

fn main() -> sketchproj::Result<()> {
    let mut rng = RngStream::new(11);
    let (m, n, tau) = (60, 12, 4);
    let mut data: Vec<f64> = (0..m * n).map(|_| rng.normal()).collect();
    // rows 4..8 form a rank-two block
    for r in 6..8 {
        for c in 0..n {
            data[r * n + c] = data[(r - 2) * n + c] * 0.5 + data[(r - 1) * n + c];
        }
    }
    let a = Arc::new(Matrix::Dense(DenseMatrix::new(m, n, data)?));
    let method = Method::Block(tau);
    let system = method.system(Arc::clone(&a), &mut RngStream::with_stream(11, 1))?;
    let ops = precompute(&system, &method.sketches(m)?)?;
    let ranks: Vec<usize> = (0..ops.q()).map(|i| ops.factor(i).rank).collect();
    println!("block ranks: {ranks:?}");

    let stop = StopCriteria {
        max_iters: 2000,
        error_tol: 1e-12,
        ..StopCriteria::default()
    };
    for label in ["uniform", "capped:0.5", "maxdist"] {
        let trace = Solver::new(&system, &ops, &SamplingRule::parse(label)?)?
            .run(&vec![0.0; n], RngStream::new(2), &stop)?;
        println!("{label:<12} {:?} in {} steps", trace.status, trace.iterations());
    }
    Ok(())
}
