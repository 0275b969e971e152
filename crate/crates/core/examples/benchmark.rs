//! Multi-trial benchmark: median error curves with 95% bands, written as CSV.
//!
//! Pass a TOML config path to run it instead of the built-in spec.

use std::path::PathBuf;

use sketchproj::{emit_csv, run_experiment, ExperimentSpec, MatrixSource};

fn main() -> sketchproj::Result<()> {
    let spec = match std::env::args().nth(1) {
        Some(path) => ExperimentSpec::load(&PathBuf::from(path))?,
        None => ExperimentSpec {
            matrix: MatrixSource::Gaussian {
                rows: 200,
                cols: 20,
                seed: 1,
            },
            method: "kaczmarz".into(),
            rules: ["uniform", "proportional", "capped:0.5", "maxdist"].map(String::from).to_vec(),
            trials: 20,
            iterations: Some(400),
            error_tol: 1e-10,
            loss_tol: None,
            base_seed: 2024,
            output: std::env::temp_dir().join("sketchproj-benchmark"),
            step_factors: true,
            emit_mean: true,
        },
    };
    let result = run_experiment(&spec)?;
    for rule in &result.rules {
        let at = |k: usize| rule.curve.get(k).map_or(f64::NAN, |p| p.median);
        println!(
            "{:<14} median err k=100 {:.3e}  k=end {:.3e}  converged {}/{}",
            rule.label,
            at(99),
            at(rule.curve.len().saturating_sub(1)),
            rule.converged_trials,
            result.trials
        );
    }
    for f in emit_csv(&result, &spec.output, spec.emit_mean)? {
        println!("wrote {}", f.display());
    }
    Ok(())
}
