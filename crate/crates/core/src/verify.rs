//! Self-check suites: the baker golden instance, agreement with the
//! enumeration oracle, and the metric axioms of the W2 distance.
//!
//! The solver under test is passed in as a function so the suites can also be
//! pointed at deliberately broken solvers.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::measures::{normalize, BalancedPair, DiscreteMeasure, GridPoint};
use crate::transport::{
    oracle_permutation, oracle_solve_problem, solve, verify_optimality, PivotRule, SolverOptions, TransportPlan,
    TransportProblem,
};
use crate::Result;

/// Baker locations; each café sits at the baker plus (2, 1).
pub const BAKERS: [(f64, f64); 3] = [(3.0, 2.0), (1.0, 5.0), (6.0, 4.0)];
pub const CAFE_OFFSET: (f64, f64) = (2.0, 1.0);
pub const BAKER_COST: f64 = 15.0;

pub type SolveFn<'a> = dyn Fn(&TransportProblem) -> Result<TransportPlan> + Sync + 'a;

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default)]
pub struct VerifyReport {
    pub checks: Vec<CheckOutcome>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let tag = if c.passed { "PASS" } else { "FAIL" };
            writeln!(f, "[{tag}] {}: {}", c.name, c.detail)?;
        }
        Ok(())
    }
}

/// Three unit masses and the same three shifted by (2, 1). Unnormalized.
pub fn baker_pair() -> BalancedPair {
    let pts = |dx: f64, dy: f64| BAKERS.iter().map(|&(x, y)| GridPoint::new(x + dx, y + dy)).collect();
    let bakers = DiscreteMeasure::new(pts(0.0, 0.0), vec![1.0; 3]).expect("valid points");
    let cafes = DiscreteMeasure::new(pts(CAFE_OFFSET.0, CAFE_OFFSET.1), vec![1.0; 3]).expect("valid points");
    BalancedPair::new(bakers, cafes).expect("equal totals")
}

/// Random unit-mass pair with `1..=max_m` sources and `1..=max_n` targets on a
/// 6×6 grid. Integer masses with a shared total, so ties and zero masses
/// (degenerate bases) are common.
pub fn random_pair(rng: &mut impl Rng, max_m: usize, max_n: usize) -> BalancedPair {
    let m = rng.gen_range(1..=max_m);
    let n = rng.gen_range(1..=max_n);
    let mut supplies: Vec<u32> = (0..m).map(|_| rng.gen_range(0..=6)).collect();
    if supplies.iter().all(|&s| s == 0) {
        supplies[0] = 1;
    }
    let total: u32 = supplies.iter().sum();
    let mut cuts: Vec<u32> = (0..n - 1).map(|_| rng.gen_range(0..=total)).collect();
    cuts.sort_unstable();
    let mut demands = Vec::with_capacity(n);
    let mut prev = 0;
    for c in cuts.into_iter().chain(std::iter::once(total)) {
        demands.push(c - prev);
        prev = c;
    }
    let side = |rng: &mut dyn rand::RngCore, masses: &[u32]| {
        let mut cells: Vec<(u32, u32)> = Vec::new();
        while cells.len() < masses.len() {
            let p = (rng.gen_range(0..6), rng.gen_range(0..6));
            if !cells.contains(&p) {
                cells.push(p);
            }
        }
        let pts = cells
            .iter()
            .map(|&(x, y)| GridPoint::new(f64::from(x), f64::from(y)))
            .collect();
        let w = masses.iter().map(|&w| f64::from(w) / f64::from(total)).collect();
        DiscreteMeasure::new(pts, w).expect("distinct points")
    };
    let a = side(rng, &supplies);
    let b = side(rng, &demands);
    BalancedPair::new(a, b).expect("shared integer total")
}

/// Random normalized measure on the 5×5 grid.
pub fn random_grid_measure(rng: &mut impl Rng) -> DiscreteMeasure {
    let mut points = Vec::new();
    let mut masses = Vec::new();
    for y in 0..5 {
        for x in 0..5 {
            if rng.gen_bool(0.6) {
                points.push(GridPoint::new(f64::from(x), f64::from(y)));
                masses.push(rng.gen_range(0.01..1.0));
            }
        }
    }
    if points.is_empty() {
        points.push(GridPoint::new(
            f64::from(rng.gen_range(0..5)),
            f64::from(rng.gen_range(0..5)),
        ));
        masses.push(1.0);
    }
    normalize(&DiscreteMeasure::new(points, masses).expect("distinct grid points")).expect("positive mass")
}

pub fn check_baker(solver: &SolveFn<'_>) -> CheckOutcome {
    let problem = TransportProblem::from_pair(&baker_pair());
    let (passed, detail) = match solver(&problem) {
        Ok(plan) => {
            let cert = verify_optimality(&plan, &problem);
            let ok = (plan.objective - BAKER_COST).abs() <= 1e-9 && plan.is_optimal() && cert.passed;
            (
                ok,
                format!(
                    "objective {} (expected {BAKER_COST}), certificate {}",
                    plan.objective, cert.passed
                ),
            )
        }
        Err(e) => (false, e.to_string()),
    };
    CheckOutcome {
        name: "baker golden instance".into(),
        passed,
        detail,
    }
}

/// Solver objective vs the spanning-tree enumeration optimum on random
/// instances up to 4×4, plus strong duality and (where applicable) the
/// permutation cross-check.
pub fn check_oracle_equivalence(seed: u64, instances: usize, solver: &SolveFn<'_>) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = Vec::new();
    let mut worst = 0.0f64;
    for k in 0..instances {
        let pair = random_pair(&mut rng, 4, 4);
        let problem = TransportProblem::from_pair(&pair);
        let expected = match oracle_solve_problem(&problem) {
            Ok(v) => v,
            Err(e) => {
                failures.push(format!("#{k}: oracle error {e}"));
                continue;
            }
        };
        match solver(&problem) {
            Ok(plan) => {
                let diff = (plan.objective - expected).abs();
                worst = worst.max(diff);
                let cert = verify_optimality(&plan, &problem);
                if diff > 1e-9 || !cert.passed {
                    failures.push(format!(
                        "#{k} ({}x{}): solver {} vs oracle {expected}, gap {:.3e}",
                        problem.rows(),
                        problem.cols(),
                        plan.objective,
                        cert.duality_gap
                    ));
                }
            }
            Err(e) => failures.push(format!("#{k}: solver error {e}")),
        }
        if let Ok(Some(p)) = oracle_permutation(&problem) {
            if (p - expected).abs() > 1e-9 {
                failures.push(format!("#{k}: permutation oracle {p} vs basis oracle {expected}"));
            }
        }
    }
    let detail = if failures.is_empty() {
        format!("{instances} instances, max |diff| {worst:.3e}")
    } else {
        format!("{} of {instances} mismatched; first: {}", failures.len(), failures[0])
    };
    CheckOutcome {
        name: "oracle equivalence".into(),
        passed: failures.is_empty(),
        detail,
    }
}

/// Identity, symmetry and triangle inequality of W2 on random 5×5 measures.
pub fn check_metric_axioms(seed: u64, triples: usize, solver: &SolveFn<'_>) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x005e_ed0f_a110);
    let w2 = |a: &DiscreteMeasure, b: &DiscreteMeasure| -> Result<f64> {
        let pair = BalancedPair::new(a.clone(), b.clone())?;
        let plan = solver(&TransportProblem::from_pair(&pair))?;
        Ok(plan.objective.max(0.0).sqrt())
    };
    let mut failures = Vec::new();
    for k in 0..triples {
        let (a, b, c) = (
            random_grid_measure(&mut rng),
            random_grid_measure(&mut rng),
            random_grid_measure(&mut rng),
        );
        let run = || -> Result<Option<String>> {
            let aa = w2(&a, &a)?;
            let ab = w2(&a, &b)?;
            let ba = w2(&b, &a)?;
            let bc = w2(&b, &c)?;
            let ac = w2(&a, &c)?;
            Ok(if aa > 1e-9 {
                Some(format!("d(a,a) = {aa}"))
            } else if (ab - ba).abs() > 1e-9 {
                Some(format!("d(a,b) = {ab} but d(b,a) = {ba}"))
            } else if ac > ab + bc + 1e-9 {
                Some(format!("d(a,c) = {ac} > {ab} + {bc}"))
            } else {
                None
            })
        };
        match run() {
            Ok(None) => {}
            Ok(Some(msg)) => failures.push(format!("#{k}: {msg}")),
            Err(e) => failures.push(format!("#{k}: {e}")),
        }
    }
    let detail = if failures.is_empty() {
        format!("{triples} triples")
    } else {
        format!("{} of {triples} failed; first: {}", failures.len(), failures[0])
    };
    CheckOutcome {
        name: "W2 metric axioms".into(),
        passed: failures.is_empty(),
        detail,
    }
}

/// Bland pivoting on the oracle instances must finish within 10·(m+n)² pivots.
pub fn check_bland_termination(seed: u64, instances: usize) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = Vec::new();
    for k in 0..instances {
        let problem = TransportProblem::from_pair(&random_pair(&mut rng, 4, 4));
        let cap = 10 * (problem.rows() + problem.cols()).pow(2);
        let opts = SolverOptions::default()
            .with_pivot_rule(PivotRule::Bland)
            .with_max_iterations(cap);
        match solve(&problem, &opts) {
            Ok(plan) if plan.is_optimal() => {}
            Ok(plan) => failures.push(format!("#{k}: hit {} pivots", plan.iterations)),
            Err(e) => failures.push(format!("#{k}: {e}")),
        }
    }
    CheckOutcome {
        name: "Bland termination".into(),
        passed: failures.is_empty(),
        detail: failures
            .first()
            .cloned()
            .unwrap_or_else(|| format!("{instances} instances")),
    }
}

pub fn run_all(seed: u64, instances: usize) -> VerifyReport {
    let opts = SolverOptions::default();
    run_all_with(seed, instances, &|p: &TransportProblem| solve(p, &opts))
}

pub fn run_all_with(seed: u64, instances: usize, solver: &SolveFn<'_>) -> VerifyReport {
    VerifyReport {
        checks: vec![
            check_baker(solver),
            check_oracle_equivalence(seed, instances, solver),
            check_metric_axioms(seed, 200, solver),
            check_bland_termination(seed, instances),
        ],
    }
}
