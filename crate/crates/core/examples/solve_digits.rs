//! Time the transport solver on pairs of MNIST digits.
//!
//! cargo run --release -p kantorovich --example solve_digits -- data/mnist 200

use std::time::Instant;

use kantorovich::measures::{make_balanced_pair, measure_from_image};
use kantorovich::mnist::{load_split, standard_paths, LabeledImage};
use kantorovich::transport::{solve, verify_optimality, PivotRule, SolverOptions, TransportProblem};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let dir = args.next().unwrap_or_else(|| "data/mnist".into());
    let pairs: usize = args.next().map_or(Ok(100), |s| s.parse())?;
    let rules: Vec<PivotRule> = match args.next() {
        Some(r) => vec![r.parse()?],
        None => vec![PivotRule::BlockSearch, PivotRule::MostNegative],
    };
    let [_, _, images, labels] = standard_paths(&dir);
    let raw = load_split(images, labels)?;

    let problems: Vec<TransportProblem> = (0..pairs)
        .map(|k| {
            let a = LabeledImage::from_raw(&raw, 2 * k).unwrap();
            let b = LabeledImage::from_raw(&raw, 2 * k + 1).unwrap();
            let pair = make_balanced_pair(
                &measure_from_image(&a.image, 0.0).unwrap(),
                &measure_from_image(&b.image, 0.0).unwrap(),
            )
            .unwrap();
            TransportProblem::from_pair(&pair)
        })
        .collect();
    let cells: usize = problems.iter().map(|p| p.rows() * p.cols()).sum();
    println!("{pairs} pairs, mean {:.0} cells", cells as f64 / pairs as f64);

    for rule in rules.iter().copied() {
        let opts = SolverOptions::default().with_pivot_rule(rule);
        let start = Instant::now();
        let mut pivots = 0;
        let mut failed = 0;
        for p in &problems {
            let plan = solve(p, &opts)?;
            pivots += plan.iterations;
            if !verify_optimality(&plan, p).passed {
                failed += 1;
            }
        }
        let ms = start.elapsed().as_secs_f64() * 1e3 / pairs as f64;
        println!(
            "{rule:?}: {ms:.2} ms/solve, {:.0} pivots/solve, {failed} certificate failures",
            pivots as f64 / pairs as f64
        );
    }
    Ok(())
}
