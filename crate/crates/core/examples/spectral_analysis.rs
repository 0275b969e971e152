//! Spectral constants, rate bounds and flop counts for one system.

use std::sync::Arc;

use sketchproj::{
    check_exactness, estimate_sigma_inf_sq, generate_gaussian, precompute, sigma_p_sq, spectral_report, Matrix, Method,
    RngStream, Sampler, SamplingRule,
};

fn main() -> sketchproj::Result<()> {
    let a = Arc::new(Matrix::Dense(generate_gaussian(120, 15, 4)));
    let method = Method::Kaczmarz;
    let system = method.system(Arc::clone(&a), &mut RngStream::with_stream(4, 1))?;
    let ops = precompute(&system, &method.sketches(a.rows())?)?;

    let rownorm = Sampler::new(&SamplingRule::NormProportional, &ops)?;
    let p = rownorm.distribution().expect("fixed rule").to_vec();
    let uniform = vec![1.0 / ops.q() as f64; ops.q()];
    println!("sigma_p^2 rownorm {:.5e}", sigma_p_sq(&system, &ops, &p)?);
    println!("sigma_p^2 uniform {:.5e}", sigma_p_sq(&system, &ops, &uniform)?);
    println!(
        "sigma_inf^2 estimate {:.5e}",
        estimate_sigma_inf_sq(&system, &ops, 10, &mut RngStream::new(1))?
    );
    println!("exact under rownorm: {}", check_exactness(&system, &ops, &p)?);

    println!();
    print!("{}", spectral_report(&system, &ops, &p, 0.5, 10, &mut RngStream::new(1))?);
    Ok(())
}
