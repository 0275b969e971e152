use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sketchproj"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn gen(dir: &Path, rows: usize, cols: usize) -> String {
    let path = dir.join(format!("a_{rows}x{cols}.mtx"));
    let path = path.to_str().unwrap().to_string();
    let out = run(&["gen", "--rows", &rows.to_string(), "--cols", &cols.to_string(), "--seed", "5", "--out", &path]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    path
}

#[test]
fn gen_writes_coordinate_matrix_market() {
    let dir = tempfile::tempdir().unwrap();
    let path = gen(dir.path(), 6, 4);
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("%%MatrixMarket matrix coordinate real general"));
    let size = lines.find(|l| !l.starts_with('%')).unwrap();
    assert_eq!(size.split_whitespace().take(2).collect::<Vec<_>>(), ["6", "4"]);
    let matrix = sketchproj::load_matrix(Path::new(&path)).unwrap();
    assert_eq!((matrix.rows(), matrix.cols()), (6, 4));
}

#[test]
fn solve_converges_and_writes_trace() {
    let dir = tempfile::tempdir().unwrap();
    let path = gen(dir.path(), 30, 6);
    let trace = dir.path().join("trace.csv");
    for rule in ["maxdist", "capped:0.5", "uniform"] {
        let out = run(&["solve", "--matrix", &path, "--rule", rule, "--trace", trace.to_str().unwrap()]);
        assert_eq!(code(&out), 0);
        assert!(stdout(&out).starts_with("Converged"), "{rule}: {}", stdout(&out));
        let text = std::fs::read_to_string(&trace).unwrap();
        assert!(text.lines().count() > 1);
    }
}

#[test]
fn solve_accepts_block_and_coordinate_methods() {
    let dir = tempfile::tempdir().unwrap();
    let path = gen(dir.path(), 12, 5);
    for method in ["cd", "block:3"] {
        let out = run(&["solve", "--matrix", &path, "--method", method, "--rule", "proportional"]);
        assert_eq!(code(&out), 0, "{method}");
    }
}

#[test]
fn analyze_json_reports_constants() {
    let dir = tempfile::tempdir().unwrap();
    let path = gen(dir.path(), 20, 5);
    let out = run(&["analyze", "--matrix", &path, "--rule", "capped:0.3", "--json"]);
    assert_eq!(code(&out), 0);
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let sp = report["sigma_p_sq"].as_f64().unwrap();
    let sinf = report["sigma_inf_sq_estimate"].as_f64().unwrap();
    assert!(sp > 0.0 && sp <= sinf + 1e-8);
    assert_eq!(report["theta"].as_f64(), Some(0.3));
    assert!(report["flops_per_iteration"].as_object().unwrap().len() >= 4);

    let text = run(&["analyze", "--matrix", &path]);
    assert_eq!(code(&text), 0);
    assert!(stdout(&text).contains("reference distribution"));
}

#[test]
fn bench_writes_one_curve_per_rule() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bench.toml");
    std::fs::write(
        &config,
        "method = \"kaczmarz\"\nrules = [\"uniform\", \"maxdist\"]\ntrials = 3\niterations = 15\n\
         [matrix.gaussian]\nrows = 25\ncols = 5\nseed = 1\n",
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = run(&["bench", "--config", config.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["uniform_curve.csv", "maxdist_curve.csv", "step_factors.csv"] {
        assert!(out_dir.join(name).exists(), "{name}");
    }
    let curve = std::fs::read_to_string(out_dir.join("maxdist_curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 16);
}

#[test]
fn invalid_input_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = gen(dir.path(), 6, 3);
    assert_eq!(code(&run(&["solve", "--matrix", &path, "--rule", "sideways"])), 2);
    assert_eq!(code(&run(&["solve", "--matrix", &path, "--method", "block:4"])), 2);

    let broken = dir.path().join("broken.mtx");
    std::fs::write(&broken, "%%MatrixMarket matrix coordinate real general\n2 2 1\n1 x 1.0\n").unwrap();
    let out = run(&["solve", "--matrix", broken.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));

    let config = dir.path().join("bad.toml");
    std::fs::write(&config, "method = \"kaczmarz\"\nrules = [\"uniform\"]\ntrials = 0\n[matrix.gaussian]\nrows = 4\ncols = 2\nseed = 0\n").unwrap();
    assert_eq!(code(&run(&["bench", "--config", config.to_str().unwrap()])), 2);
}

#[test]
fn unsupported_formats_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let array = dir.path().join("array.mtx");
    std::fs::write(&array, "%%MatrixMarket matrix array real general\n2 2\n1\n0\n0\n1\n").unwrap();
    assert_eq!(code(&run(&["solve", "--matrix", array.to_str().unwrap()])), 3);
    assert_eq!(code(&run(&["analyze", "--matrix", array.to_str().unwrap()])), 3);
}

#[test]
fn missing_file_is_an_error() {
    let out = run(&["solve", "--matrix", "/nonexistent/a.mtx"]);
    assert_ne!(code(&out), 0);
    assert!(!out.stderr.is_empty());
}
