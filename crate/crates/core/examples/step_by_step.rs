//! Driving the solver one step at a time and inspecting each step.

use std::sync::Arc;

use sketchproj::{
    generate_gaussian, precompute, Matrix, Method, RngStream, SamplingRule, Solver, SolverOptions, StepOutcome,
};

fn main() -> sketchproj::Result<()> {
    let a = Arc::new(Matrix::Dense(generate_gaussian(40, 8, 5)));
    let method = Method::Kaczmarz;
    let system = method.system(Arc::clone(&a), &mut RngStream::with_stream(5, 1))?;
    let ops = precompute(&system, &method.sketches(a.rows())?)?;
    let options = SolverOptions {
        track_losses: true,
        verify: true,
    };
    let solver = Solver::with_options(&system, &ops, &SamplingRule::capped(0.5), options)?;
    let mut state = solver.init_state(&vec![0.0; a.cols()], RngStream::new(3))?;

    println!("{:>3} {:>5} {:>4} {:>12} {:>12} {:>12}", "k", "row", "|W|", "f_i before", "travel", "f_i after");
    for _ in 0..12 {
        match solver.step(&mut state)? {
            StepOutcome::Stepped(r) => println!(
                "{:>3} {:>5} {:>4} {:>12.4e} {:>12.4e} {:>12.1e}",
                state.iteration(),
                r.index,
                r.w_size,
                r.f_before,
                r.travel_b_sq.unwrap_or(f64::NAN),
                r.loss_after.unwrap_or(f64::NAN)
            ),
            StepOutcome::Converged => break,
        }
    }
    println!("error now {:.4e}", solver.error_b_sq(&state).unwrap_or(f64::NAN));
    Ok(())
}
