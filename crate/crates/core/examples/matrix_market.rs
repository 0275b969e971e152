//! Sparse input through Matrix Market, solved with the max-distance rule.

use std::sync::Arc;

use sketchproj::{
    load_matrix, precompute, write_matrix_market, CsrMatrix, Matrix, Method, RngStream, SamplingRule, Solver,
    StopCriteria,
};

fn main() -> sketchproj::Result<()> {
    let n = 50;
    let mut triplets = Vec::new();
    for i in 0..n {
        triplets.push((i, i, 4.0));
        if i + 1 < n {
            triplets.push((i, i + 1, -1.0));
            triplets.push((i + 1, i, -1.0));
        }
    }
    let path = std::env::temp_dir().join("sketchproj-tridiagonal.mtx");
    write_matrix_market(&path, &Matrix::Sparse(CsrMatrix::from_triplets(n, n, &triplets)?))?;

    let a = Arc::new(load_matrix(&path)?);
    println!("loaded {}x{} from {}", a.rows(), a.cols(), path.display());
    let method = Method::Kaczmarz;
    let system = method.system(Arc::clone(&a), &mut RngStream::with_stream(0, 1))?;
    let ops = precompute(&system, &method.sketches(a.rows())?)?;
    let trace = Solver::new(&system, &ops, &SamplingRule::MaxDistance)?.run(
        &vec![0.0; n],
        RngStream::new(0),
        &StopCriteria::default(),
    )?;
    println!("{:?} after {} steps", trace.status, trace.iterations());
    Ok(())
}
