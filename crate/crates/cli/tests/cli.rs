use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use kantorovich::transport::{solve, SolverOptions, TransportProblem};
use kantorovich_cli::{cmd_verify, EXIT_OK, EXIT_VERIFY};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_kantorovich"))
}

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn mnist_dir() -> PathBuf {
    kantorovich::mnist::locate_data_dir()
        .or_else(|| {
            let d = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist");
            d.exists().then_some(d)
        })
        .expect("MNIST not found: set MNIST_DIR or populate <workspace>/data/mnist")
}

fn run(cmd: &mut Command) -> (i32, String, String) {
    let out = cmd.output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn first_value(stdout: &str, key: &str) -> f64 {
    stdout
        .lines()
        .find_map(|l| l.strip_prefix(key).map(|v| v.trim().parse().unwrap()))
        .unwrap_or_else(|| panic!("no '{key}' in {stdout}"))
}

#[test]
fn baker_fixture_costs_fifteen_unnormalized() {
    let (code, out, _) = run(bin()
        .args(["distance", "--metric", "kantorovich", "--no-normalize"])
        .args([fixture("bakers.pgm"), fixture("cafes.pgm")]));
    assert_eq!(code, 0);
    assert!((first_value(&out, "kantorovich ") - 15.0).abs() <= 1e-9);
    assert!(out.contains("kantorovich 15.0000000000\n"), "{out}");
    assert!(out.contains("certificate pass"));

    let (code, out, _) = run(bin()
        .args(["distance", "--metric", "kantorovich"])
        .args([fixture("bakers.pgm"), fixture("cafes.pgm")]));
    assert_eq!(code, 0);
    assert!((first_value(&out, "kantorovich ") - 5.0).abs() <= 1e-9);
}

#[test]
fn two_pixel_fixtures_are_five_apart() {
    let (code, out, _) = run(bin()
        .args(["distance", "--metric", "euclidean", "--no-normalize"])
        .args([fixture("origin.pgm"), fixture("three_four.pgm")]));
    assert_eq!(code, 0);
    assert_eq!(out, "euclidean 5.00000000000\n");
}

#[test]
fn same_idx_image_twice_is_zero() {
    let file = mnist_dir().join("t10k-images-idx3-ubyte");
    let spec = format!("{}:17", file.display());
    let (code, out, _) = run(bin().args(["distance", "--metric", "kantorovich", &spec, &spec]));
    assert_eq!(code, 0, "{out}");
    assert!(first_value(&out, "kantorovich ").abs() <= 1e-9);
    assert!(out.contains("certificate pass"));
    for metric in ["euclidean", "tangent"] {
        let (code, out, _) = run(bin().args(["distance", "--metric", metric, &spec, &spec]));
        assert_eq!(code, 0);
        assert_eq!(first_value(&out, &format!("{metric} ")), 0.0);
    }
}

#[test]
fn exit_codes() {
    let (code, _, _) = run(bin().args(["distance", "--metric", "manhattan", "a", "b"]));
    assert_eq!(code, 1);
    let (code, _, _) = run(bin().args(["frobnicate"]));
    assert_eq!(code, 1);
    let (code, _, err) = run(bin().args([
        "distance",
        "--metric",
        "euclidean",
        "/missing.pgm",
        &fixture("cafes.pgm"),
    ]));
    assert_eq!(code, 2, "{err}");
    let (code, _, _) = run(bin().args([
        "distance",
        "--metric",
        "kantorovich",
        &fixture("origin.pgm"),
        &fixture("origin.pgm"),
    ]));
    assert_eq!(code, 2, "all-zero image is a data error");
    let (code, _, _) = run(bin().args(["experiment", "--config", "/missing.conf"]));
    assert_eq!(code, 2);
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.conf");
    fs::write(&bad, "num_training_sets = 40\n").unwrap();
    let (code, _, _) = run(bin().args(["experiment", "--config"]).arg(&bad));
    assert_eq!(code, 1);
    let (code, out, _) = run(bin().arg("--help"));
    assert_eq!(code, 0);
    assert!(out.contains("verify"));
}

#[test]
fn verify_passes_for_several_seeds() {
    for seed in ["1", "77"] {
        let (code, out, _) = run(bin().args(["verify", "--seed", seed, "--instances", "100"]));
        assert_eq!(code, 0, "{out}");
        assert!(out.contains("[PASS] oracle equivalence"));
    }
}

#[test]
fn verify_catches_a_solver_that_stops_one_pivot_early() {
    let faulty = |p: &TransportProblem| {
        let full = solve(p, &SolverOptions::default())?;
        if full.iterations == 0 {
            return Ok(full);
        }
        solve(p, &SolverOptions::default().with_max_iterations(full.iterations - 1))
    };
    let mut out = Vec::new();
    assert_eq!(cmd_verify(2024, 200, Some(&faulty), &mut out), EXIT_VERIFY);
    let text = String::from_utf8(out).unwrap();
    assert!(text.contains("[FAIL] oracle equivalence"), "{text}");

    let mut out = Vec::new();
    assert_eq!(cmd_verify(2024, 50, None, &mut out), EXIT_OK);
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("run.conf");
    fs::write(&path, format!("mnist_dir = {}\n{body}", mnist_dir().display())).unwrap();
    path
}

#[test]
fn experiment_smoke_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "distances = euclidean\ntraining_sizes = 1\nnum_training_sets = 1\ntest_size_per_digit = 2\n",
    );
    let out_dir = dir.path().join("out");
    let (code, stdout, err) = run(bin()
        .args(["experiment", "--quiet", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir));
    assert_eq!(code, 0, "{err}");
    assert!(stdout.contains("Euclidean"));
    let records = fs::read_to_string(out_dir.join("records.csv")).unwrap();
    let lines: Vec<&str> = records.lines().collect();
    assert_eq!(lines.len(), 2);
    let acc: f64 = lines[1].rsplit(',').next().unwrap().parse().unwrap();
    assert!((0.0..=1.0).contains(&acc));
    assert!(
        ((acc * 20.0).round() - acc * 20.0).abs() < 1e-9,
        "accuracy {acc} is not a multiple of 1/20"
    );
    for f in ["summary.csv", "table1.txt", "curves.csv", "diagnostics.csv"] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
}

fn recompute_summary(records: &str) -> BTreeMap<(String, usize), (f64, f64)> {
    let mut groups: BTreeMap<(String, usize), Vec<f64>> = BTreeMap::new();
    for line in records.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        groups
            .entry((f[0].to_string(), f[1].parse().unwrap()))
            .or_default()
            .push(f[3].parse().unwrap());
    }
    groups
        .into_iter()
        .map(|(k, v)| {
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            (k, (mean, var.sqrt()))
        })
        .collect()
}

#[test]
fn experiment_outputs_are_worker_independent_and_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "distances = euclidean, tangent, kantorovich\ntraining_sizes = 1-2\nnum_training_sets = 2\ntest_size_per_digit = 1\nseed = 11\n",
    );
    let mut outputs = Vec::new();
    for workers in ["1", "3"] {
        let out_dir = dir.path().join(format!("w{workers}"));
        let (code, _, err) = run(bin()
            .args(["experiment", "--quiet", "--workers", workers, "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out_dir));
        assert_eq!(code, 0, "{err}");
        outputs.push(out_dir);
    }
    for f in [
        "records.csv",
        "summary.csv",
        "table1.txt",
        "curves.csv",
        "diagnostics.csv",
    ] {
        assert_eq!(
            fs::read(outputs[0].join(f)).unwrap(),
            fs::read(outputs[1].join(f)).unwrap(),
            "{f} differs between worker counts"
        );
    }
    let records = fs::read_to_string(outputs[0].join("records.csv")).unwrap();
    assert_eq!(records.lines().count(), 1 + 3 * 2 * 2);
    let expected = recompute_summary(&records);
    let summary = fs::read_to_string(outputs[0].join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + expected.len());
    for line in summary.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let (mean, std) = expected[&(f[0].to_string(), f[1].parse().unwrap())];
        assert!((f[2].parse::<f64>().unwrap() - mean).abs() <= 1e-12);
        assert!((f[3].parse::<f64>().unwrap() - std).abs() <= 1e-12);
    }
    let table = fs::read_to_string(outputs[0].join("table1.txt")).unwrap();
    assert_eq!(table.lines().count(), 1 + 3);
    let diagnostics = fs::read_to_string(outputs[0].join("diagnostics.csv")).unwrap();
    assert_eq!(diagnostics.lines().count(), 1 + 2 * 10 * 20);
    assert!(diagnostics.lines().skip(1).all(|l| l.ends_with(",pass")));
}

#[test]
fn seed_override_changes_the_draw() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "distances = euclidean\ntraining_sizes = 1\nnum_training_sets = 3\ntest_size_per_digit = 5\n",
    );
    let mut records = Vec::new();
    for seed in ["1", "2"] {
        let out_dir = dir.path().join(seed);
        let (code, _, _) = run(bin()
            .args(["experiment", "--quiet", "--seed", seed, "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out_dir));
        assert_eq!(code, 0);
        records.push(fs::read_to_string(out_dir.join("records.csv")).unwrap());
    }
    assert_ne!(records[0], records[1]);
}
