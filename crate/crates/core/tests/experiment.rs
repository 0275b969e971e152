use std::path::PathBuf;

use sketchproj::experiment::curve_csv;
use sketchproj::{emit_csv, run_experiment, write_matrix_market, ExperimentSpec, Matrix, MatrixSource};

fn identity_file(dir: &std::path::Path, n: usize) -> PathBuf {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let path = dir.join("identity.mtx");
    write_matrix_market(&path, &Matrix::from_rows(&rows).unwrap()).unwrap();
    path
}

fn spec(matrix: MatrixSource, rules: &[&str], trials: usize, iterations: usize) -> ExperimentSpec {
    ExperimentSpec {
        matrix,
        method: "kaczmarz".into(),
        rules: rules.iter().map(|r| r.to_string()).collect(),
        trials,
        iterations: Some(iterations),
        error_tol: 1e-10,
        loss_tol: None,
        base_seed: 3,
        output: PathBuf::new(),
        step_factors: true,
        emit_mean: false,
    }
}

#[test]
fn orthonormal_rows_converge_in_n_steps() {
    let dir = tempfile::tempdir().unwrap();
    let path = identity_file(dir.path(), 4);
    let result = run_experiment(&spec(MatrixSource::Path(path), &["maxdist"], 3, 10)).unwrap();
    let rule = result.rule("maxdist").unwrap();
    assert_eq!(rule.converged_trials, 3);
    assert_eq!(rule.curve.len(), 10);
    assert!(rule.curve[2].median > 0.0);
    assert!(rule.curve[3..].iter().all(|p| p.median == 0.0 && p.p975 == 0.0));
    assert_eq!(rule.curve[3].flops, 4 * rule.flops_per_iteration);
}

#[test]
fn single_trial_percentiles_coincide() {
    let source = MatrixSource::Gaussian {
        rows: 30,
        cols: 10,
        seed: 2,
    };
    let result = run_experiment(&spec(source, &["uniform"], 1, 40)).unwrap();
    for p in &result.rules[0].curve {
        assert_eq!(p.p025, p.median);
        assert_eq!(p.p975, p.median);
    }
}

#[test]
fn curve_files_have_header_plus_rows_and_read_back() {
    let dir = tempfile::tempdir().unwrap();
    let source = MatrixSource::Gaussian {
        rows: 40,
        cols: 8,
        seed: 9,
    };
    let result = run_experiment(&spec(source, &["uniform", "capped:0.3"], 5, 10)).unwrap();
    let files = emit_csv(&result, dir.path(), false).unwrap();
    let names: Vec<String> = files
        .iter()
        .map(|f| f.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    assert_eq!(names, ["uniform_curve.csv", "capped-0.3_curve.csv", "step_factors.csv"]);
    for (file, rule) in files.iter().zip(&result.rules) {
        let text = std::fs::read_to_string(file).unwrap();
        assert_eq!(text.lines().count(), 11);
        assert_eq!(text.lines().next().unwrap(), "k,flops,median_err,p025,p975");
        for (line, point) in text.lines().skip(1).zip(&rule.curve) {
            let cols: Vec<&str> = line.split(',').collect();
            assert_eq!(cols[0].parse::<usize>().unwrap(), point.k);
            assert_eq!(cols[1].parse::<u64>().unwrap(), point.flops);
            assert_eq!(cols[2].parse::<f64>().unwrap(), point.median);
            assert_eq!(cols[3].parse::<f64>().unwrap(), point.p025);
            assert_eq!(cols[4].parse::<f64>().unwrap(), point.p975);
        }
    }
    let factors = std::fs::read_to_string(&files[2]).unwrap();
    let mut lines = factors.lines();
    assert_eq!(lines.next(), Some("rule,min_step_factor"));
    for (line, rule) in lines.zip(&result.rules) {
        let (label, value) = line.split_once(',').unwrap();
        assert_eq!(label, rule.label);
        assert_eq!(value.parse::<f64>().ok(), rule.min_step_factor);
    }
    let with_mean = curve_csv(&result.rules[0], true);
    assert!(with_mean.starts_with("k,flops,median_err,p025,p975,mean_err\n"));
}

#[test]
fn invalid_specs_are_rejected() {
    let source = MatrixSource::Gaussian {
        rows: 4,
        cols: 2,
        seed: 0,
    };
    let mut bad = spec(source.clone(), &["uniform"], 0, 5);
    assert!(run_experiment(&bad).is_err());
    bad = spec(source.clone(), &["sideways"], 1, 5);
    assert!(run_experiment(&bad).is_err());
    bad = spec(source, &["uniform"], 1, 5);
    bad.method = "block:3".into();
    assert!(run_experiment(&bad).is_err());
    assert!(ExperimentSpec::from_toml("method = \"kaczmarz\"\nrules = []\nunknown = 1\n").is_err());
}
