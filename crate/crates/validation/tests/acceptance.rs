//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs the full 20-set experiment twice (two worker counts), so expect
//! well over an hour on a single core. Needs the official MNIST files, found
//! through `MNIST_DIR` or `<workspace>/data/mnist`.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use kantorovich::distances::{euclidean, tangent_distance, tangent_vectors, DistanceKind, TangentConfig};
use kantorovich::experiment::{emit_outputs, run_experiment_with, ExperimentConfig, ExperimentResults};
use kantorovich::measures::{make_balanced_pair, measure_from_image, DiscreteMeasure};
use kantorovich::mnist::{
    build_protocol_sets, encode_idx_images, encode_idx_labels, parse_idx_images, parse_idx_labels, read_idx_images,
    read_idx_labels, standard_paths, LabeledImage, ProtocolParams, ProtocolSets,
};
use kantorovich::transport::{
    oracle_solve, solve, solve_transport, verify_optimality, wasserstein2, SolverOptions, TransportProblem,
};
use kantorovich::verify::{baker_pair, random_grid_measure, random_pair, BAKER_COST};
use kantorovich::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{mnist, train_digit};

// Tolerances and budgets.
const OBJECTIVE_TOL: f64 = 1e-9;
const CERTIFICATE_TOL: f64 = 1e-9;
const AXIOM_TOL: f64 = 1e-9;
const TSD_TOL: f64 = 1e-12;
const FD_REL_TOL: f64 = 0.05;
const FD_STEP_PX: f64 = 0.1;
const FULL_BAND_PTS: f64 = 5.0;
const DESK_BAND_PTS: f64 = 7.0;
const KANTOROVICH_21_MIN: f64 = 76.0;
const BAKER_BUDGET: Duration = Duration::from_millis(1);
const ORACLE_BUDGET: Duration = Duration::from_secs(30);
const CERTIFICATE_BUDGET: Duration = Duration::from_secs(120);
const DESK_BUDGET: Duration = Duration::from_secs(30 * 60);

const SEED: u64 = 1;
const TABLE_SIZES: [usize; 5] = [1, 5, 10, 15, 21];
/// Published mean accuracies (%) at [`TABLE_SIZES`].
const PUBLISHED: [(DistanceKind, [f64; 5]); 3] = [
    (DistanceKind::Euclidean, [37.5, 58.8, 66.3, 71.6, 75.5]),
    (DistanceKind::Tangent, [42.1, 65.1, 72.2, 77.3, 80.6]),
    (DistanceKind::Kantorovich, [47.7, 69.2, 76.0, 78.9, 81.4]),
];

struct Suite {
    failed: Vec<String>,
}

impl Suite {
    fn report(&mut self, id: &str, name: &str, passed: bool, detail: String) {
        println!("[{}] {id} {name}: {detail}", if passed { "PASS" } else { "FAIL" });
        if !passed {
            self.failed.push(format!("{id} {name}"));
        }
    }
}

fn c1_baker(suite: &mut Suite) {
    let pair = baker_pair();
    let opts = SolverOptions::default();
    let _ = solve_transport(&pair, &opts);
    let start = Instant::now();
    let plan = solve_transport(&pair, &opts).unwrap();
    let elapsed = start.elapsed();
    let ok = (plan.objective - BAKER_COST).abs() <= OBJECTIVE_TOL && elapsed < BAKER_BUDGET;
    suite.report(
        "C1",
        "baker golden test",
        ok,
        format!(
            "objective {} (want 15 ± {OBJECTIVE_TOL:e}), {elapsed:?}",
            plan.objective
        ),
    );
}

fn c2_oracle(suite: &mut Suite) {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let opts = SolverOptions::default();
    let (mut mismatches, mut worst) = (0, 0.0f64);
    let n = 500;
    for _ in 0..n {
        let pair = random_pair(&mut rng, 4, 4);
        let got = solve_transport(&pair, &opts).unwrap().objective;
        let want = oracle_solve(&pair).unwrap();
        let diff = (got - want).abs();
        worst = worst.max(diff);
        if diff > OBJECTIVE_TOL {
            mismatches += 1;
        }
    }
    let elapsed = start.elapsed();
    suite.report(
        "C2",
        "oracle equivalence",
        mismatches == 0 && elapsed < ORACLE_BUDGET,
        format!("{n} instances, {mismatches} mismatches, max |diff| {worst:.2e}, {elapsed:.2?}"),
    );
}

fn c3_certificates(suite: &mut Suite) {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let opts = SolverOptions::default();
    let (mut failures, mut worst) = (0, 0.0f64);
    let n = 100;
    for _ in 0..n {
        let a = train_digit(rng.gen_range(0..60_000));
        let b = LabeledImage::from_raw(&mnist().test, rng.gen_range(0..10_000)).unwrap();
        let pair = make_balanced_pair(
            &measure_from_image(&a.image, 0.0).unwrap(),
            &measure_from_image(&b.image, 0.0).unwrap(),
        )
        .unwrap();
        let problem = TransportProblem::from_pair(&pair);
        let plan = solve(&problem, &opts).unwrap();
        let c = verify_optimality(&plan, &problem);
        let residual = c
            .max_dual_violation
            .max(c.max_slackness_residual)
            .max(c.max_marginal_residual)
            .max(c.duality_gap);
        worst = worst.max(residual);
        if !(plan.is_optimal() && c.passed && residual <= CERTIFICATE_TOL) {
            failures += 1;
        }
    }
    let elapsed = start.elapsed();
    suite.report(
        "C3",
        "optimality certificates on MNIST pairs",
        failures == 0 && elapsed < CERTIFICATE_BUDGET,
        format!("{n} pairs, {failures} failures, max residual {worst:.2e}, {elapsed:.2?}"),
    );
}

fn c4_axioms(suite: &mut Suite) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let opts = SolverOptions::default();
    let w2 =
        |a: &DiscreteMeasure, b: &DiscreteMeasure| wasserstein2(&make_balanced_pair(a, b).unwrap(), &opts).unwrap();
    let (mut violations, mut worst_triangle) = (0, f64::NEG_INFINITY);
    let n = 200;
    for _ in 0..n {
        let (x, y, z) = (
            random_grid_measure(&mut rng),
            random_grid_measure(&mut rng),
            random_grid_measure(&mut rng),
        );
        let (xy, yx, yz, xz) = (w2(&x, &y), w2(&y, &x), w2(&y, &z), w2(&x, &z));
        let identity = w2(&x, &x).abs() <= AXIOM_TOL;
        let symmetry = (xy - yx).abs() <= AXIOM_TOL;
        let excess = xz - (xy + yz);
        worst_triangle = worst_triangle.max(excess);
        if !(identity && symmetry && excess <= AXIOM_TOL) {
            violations += 1;
        }
    }
    suite.report(
        "C4",
        "W2 metric axioms",
        violations == 0,
        format!("{n} triples, {violations} violations, max triangle excess {worst_triangle:.2e}"),
    );
}

fn c6_tangent(suite: &mut Suite) {
    let cfg = TangentConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut self_max, mut excess_max, mut bad) = (0.0f64, f64::NEG_INFINITY, 0);
    let n = 1000;
    for _ in 0..n {
        let a = train_digit(rng.gen_range(0..60_000)).image;
        let b = LabeledImage::from_raw(&mnist().test, rng.gen_range(0..10_000))
            .unwrap()
            .image;
        let tsd = tangent_distance(&a, &b, &cfg).unwrap();
        let euc = euclidean(a.pixels(), b.pixels()).unwrap().value;
        excess_max = excess_max.max(tsd - euc);
        let own = tangent_distance(&a, &a, &cfg).unwrap();
        self_max = self_max.max(own);
        if tsd > euc + TSD_TOL || own > TSD_TOL {
            bad += 1;
        }
    }
    let mut fd_worst = (0.0f64, String::new());
    for i in 0..20 {
        let img = train_digit(i * 997).image;
        for (&t, tv) in cfg.transformations().iter().zip(tangent_vectors(&img, &cfg)) {
            let fd = common::finite_difference_tangent(&img, cfg.smoothing_sigma(), t, FD_STEP_PX);
            let err = common::relative_error(&tv, &fd);
            if err > fd_worst.0 {
                fd_worst = (err, t.to_string());
            }
        }
    }
    suite.report(
        "C6",
        "tangent distance sanity",
        bad == 0 && fd_worst.0 <= FD_REL_TOL,
        format!(
            "max TSD(a,a) {self_max:.1e}; {n} pairs, max TSD-Euclidean {excess_max:.2e}; \
             finite-difference max relative error {:.2}% ({})",
            100.0 * fd_worst.0,
            fd_worst.1
        ),
    );
}

fn c7_idx(suite: &mut Suite) {
    let [tri, trl, tei, tel] = standard_paths(kantorovich::mnist::locate_data_dir().unwrap());
    let (ntr, px_tr) = read_idx_images(&tri).unwrap();
    let (nte, px_te) = read_idx_images(&tei).unwrap();
    let (ltr, lte) = (read_idx_labels(&trl).unwrap(), read_idx_labels(&tel).unwrap());
    let header = fs::read(&tri).unwrap();
    let dims = (
        u32::from_be_bytes(header[8..12].try_into().unwrap()),
        u32::from_be_bytes(header[12..16].try_into().unwrap()),
    );
    let counts_ok = (ntr, nte, ltr.len(), lte.len()) == (60_000, 10_000, 60_000, 10_000)
        && px_tr.len() == ntr * 784
        && px_te.len() == nte * 784
        && dims == (28, 28);

    let good = encode_idx_images(1, &[7u8; 784]);
    let mut wrong_magic = good.clone();
    wrong_magic[3] = 0x01;
    let truncated = &good[..good.len() - 1];
    let labels = encode_idx_labels(&[0, 5, 9]);
    let mut faults = Vec::new();
    for _ in 0..2 {
        faults.push((
            format!("{:?}", parse_idx_images(&wrong_magic)),
            format!("{:?}", parse_idx_images(truncated)),
            format!("{:?}", parse_idx_labels(&labels[..labels.len() - 1])),
        ));
    }
    let faults_ok = matches!(parse_idx_images(&wrong_magic), Err(Error::BadMagic { .. }))
        && matches!(parse_idx_images(truncated), Err(Error::TruncatedFile { .. }))
        && matches!(
            parse_idx_labels(&labels[..labels.len() - 1]),
            Err(Error::TruncatedFile { .. })
        )
        && faults[0] == faults[1];
    suite.report(
        "C7",
        "IDX bit-exactness",
        counts_ok && faults_ok,
        format!(
            "train {ntr}, test {nte}, dims {}x{}; malformed fixtures rejected: {faults_ok}",
            dims.0, dims.1
        ),
    );
}

fn out_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../out/acceptance")
}

fn experiment_config(sets: usize, sizes: &[usize], per_digit: usize, workers: usize, out: PathBuf) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        num_training_sets: sets,
        training_sizes: sizes.to_vec(),
        test_size_per_digit: per_digit,
        workers,
        seed: SEED,
        output_dir: out,
        ..ExperimentConfig::default()
    };
    cfg.set("pivot_rule", "block").unwrap();
    cfg
}

fn mean_pct(results: &ExperimentResults, kind: DistanceKind, size: usize) -> Option<f64> {
    results
        .summary
        .iter()
        .find(|r| r.distance == kind && r.training_size == size)
        .map(|r| 100.0 * r.mean)
}

/// (a) ordering at sizes 1, 5, 10; (b) band around the published table.
fn trend_checks(results: &ExperimentResults, sizes: &[usize], band: f64) -> (bool, bool, String) {
    let mut ordering = true;
    for size in [1, 5, 10] {
        let m = |k| mean_pct(results, k, size).unwrap_or(f64::NAN);
        let (e, t, k) = (
            m(DistanceKind::Euclidean),
            m(DistanceKind::Tangent),
            m(DistanceKind::Kantorovich),
        );
        ordering &= k >= t && t >= e;
    }
    let mut in_band = true;
    let mut worst = (0.0f64, String::new());
    for (kind, published) in PUBLISHED {
        for (col, &size) in TABLE_SIZES.iter().enumerate() {
            if !sizes.contains(&size) {
                continue;
            }
            let got = mean_pct(results, kind, size).unwrap_or(f64::NAN);
            let dev = (got - published[col]).abs();
            in_band &= dev <= band;
            if dev.is_nan() || dev > worst.0 {
                worst = (dev, format!("{kind}@{size}: {got:.1} vs {}", published[col]));
            }
        }
    }
    (
        ordering,
        in_band,
        format!("largest deviation {:.1} pts ({})", worst.0, worst.1),
    )
}

fn print_table(results: &ExperimentResults) {
    for line in kantorovich::experiment::table1(&results.summary).lines() {
        println!("       {line}");
    }
}

fn run(cfg: &ExperimentConfig, sets: &ProtocolSets) -> (ExperimentResults, Duration) {
    let start = Instant::now();
    let results = run_experiment_with(cfg, sets, &|_, _, _| {}).expect("experiment run");
    let elapsed = start.elapsed();
    emit_outputs(&results, &cfg.output_dir).expect("write outputs");
    (results, elapsed)
}

fn c5_c8_experiments(suite: &mut Suite) {
    let sets = build_protocol_sets(&mnist().train, &mnist().test, SEED, ProtocolParams::default()).unwrap();

    let desk = experiment_config(5, &[1, 5, 10], 10, 8, out_root().join("desk"));
    let (desk_results, desk_time) = run(&desk, &sets);
    print_table(&desk_results);
    let (ordering, band, detail) = trend_checks(&desk_results, &desk.training_sizes, DESK_BAND_PTS);
    suite.report(
        "C5-desk",
        "trend, 5 sets x 100 tests",
        ordering && band && desk_time < DESK_BUDGET,
        format!(
            "ordering K>=T>=E at 1/5/10: {ordering}; within ±{DESK_BAND_PTS}: {band}, {detail}; {desk_time:.0?}, \
             {} certificate failures",
            desk_results.certificate_failures()
        ),
    );

    let sizes: Vec<usize> = (1..=21).collect();
    let full_a = experiment_config(20, &sizes, 20, 1, out_root().join("full-workers1"));
    let (full, full_time) = run(&full_a, &sets);
    print_table(&full);
    let (ordering, band, detail) = trend_checks(&full, &sizes, FULL_BAND_PTS);
    let k21 = mean_pct(&full, DistanceKind::Kantorovich, 21).unwrap_or(f64::NAN);
    suite.report(
        "C5a",
        "ordering Kantorovich >= Tangent >= Euclidean at sizes 1, 5, 10",
        ordering,
        format!(
            "full protocol, {full_time:.0?}, {} certificate failures",
            full.certificate_failures()
        ),
    );
    suite.report("C5b", "means within ±5 points of the published table", band, detail);
    suite.report(
        "C5c",
        "Kantorovich at size 21",
        k21 >= KANTOROVICH_21_MIN,
        format!("{k21:.1}% (want >= {KANTOROVICH_21_MIN})"),
    );

    let full_b = experiment_config(20, &sizes, 20, 4, out_root().join("full-workers4"));
    let (_, second_time) = run(&full_b, &sets);
    let mut identical = Vec::new();
    for file in ["records.csv", "summary.csv", "table1.txt"] {
        let a = fs::read(full_a.output_dir.join(file)).unwrap();
        let b = fs::read(full_b.output_dir.join(file)).unwrap();
        identical.push((file, a == b));
    }
    suite.report(
        "C8",
        "determinism across worker counts (1 vs 4)",
        identical.iter().all(|(_, same)| *same),
        format!("{identical:?}; second run {second_time:.0?}"),
    );
}

fn main() {
    if kantorovich::mnist::locate_data_dir().is_none() {
        eprintln!("acceptance: MNIST not found; set MNIST_DIR or place the IDX files in <workspace>/data/mnist");
        std::process::exit(1);
    }
    let mut suite = Suite { failed: Vec::new() };
    c1_baker(&mut suite);
    c2_oracle(&mut suite);
    c3_certificates(&mut suite);
    c4_axioms(&mut suite);
    c6_tangent(&mut suite);
    c7_idx(&mut suite);
    c5_c8_experiments(&mut suite);
    if suite.failed.is_empty() {
        println!("acceptance: all criteria passed");
    } else {
        println!("acceptance: {} failed: {}", suite.failed.len(), suite.failed.join(", "));
        std::process::exit(1);
    }
}
