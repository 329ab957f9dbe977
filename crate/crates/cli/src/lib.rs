//! Command implementations behind the `kantorovich` binary.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use kantorovich::distances::{euclidean, tangent_distance, transport_outcome, DistanceKind, TangentConfig};
use kantorovich::experiment::{emit_outputs, load_protocol, run_experiment_with, ExperimentConfig};
use kantorovich::measures::{make_balanced_pair, measure_from_image, BalancedPair};
use kantorovich::mnist::{read_idx_images, SIDE};
use kantorovich::transport::{solve, PivotRule, SolveStatus, SolverOptions};
use kantorovich::verify::{run_all_with, SolveFn};
use kantorovich::{Error, GrayImage};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "kantorovich",
    version,
    about = "Optimal transport distances and nearest-neighbour digit experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Metric {
    Euclidean,
    Tangent,
    Kantorovich,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the accuracy experiment described by a config file.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Extra `key=value` config overrides.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long)]
        quiet: bool,
    },
    /// Distance between two images (PGM/PNG file, or `file:index` into an IDX image file).
    Distance {
        #[arg(long, value_enum)]
        metric: Metric,
        a: String,
        b: String,
        /// Use raw pixel values instead of unit-sum images.
        #[arg(long)]
        no_normalize: bool,
        #[arg(long, default_value = "most-negative")]
        pivot_rule: String,
    },
    /// Self-check the transport solver against exhaustive enumeration.
    Verify {
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        #[arg(long, default_value_t = 500)]
        instances: usize,
    },
}

/// Exit code for a library error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::InvalidOptions(_) | Error::InvalidTangentConfig(_) => EXIT_USAGE,
        _ => EXIT_DATA,
    }
}

pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = match cli.command {
        Command::Experiment {
            config,
            seed,
            workers,
            out: dir,
            overrides,
            quiet,
        } => cmd_experiment(&config, seed, workers, dir, &overrides, quiet, out),
        Command::Distance {
            metric,
            a,
            b,
            no_normalize,
            pivot_rule,
        } => cmd_distance(metric, &a, &b, !no_normalize, &pivot_rule, out),
        Command::Verify { seed, instances } => return cmd_verify(seed, instances, None, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn cmd_experiment(
    config: &Path,
    seed: Option<u64>,
    workers: Option<usize>,
    dir: Option<PathBuf>,
    overrides: &[String],
    quiet: bool,
    out: &mut dyn Write,
) -> kantorovich::Result<()> {
    let mut cfg = ExperimentConfig::from_file(config)?;
    for item in overrides {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override '{item}' is not key=value")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(w) = workers {
        cfg.workers = w;
    }
    if let Some(dir) = dir {
        cfg.output_dir = dir;
    }
    cfg.validate()?;

    let sets = load_protocol(&cfg)?;
    let progress = |kind: DistanceKind, done: usize, total: usize| {
        let step = (total / 100).max(1);
        if !quiet && (done.is_multiple_of(step) || done == total) {
            eprint!("\r{kind}: {done}/{total} rows");
            if done == total {
                eprintln!();
            }
        }
    };
    let results = run_experiment_with(&cfg, &sets, &progress)?;
    let files = emit_outputs(&results, &cfg.output_dir)?;
    let summary = std::fs::read_to_string(&files.table1).map_err(|e| Error::Io {
        path: files.table1.clone(),
        source: e,
    })?;
    let _ = write!(out, "{summary}");
    let _ = writeln!(
        out,
        "transport solves: {}, certificate failures: {}",
        results.diagnostics.len(),
        results.certificate_failures()
    );
    let _ = writeln!(out, "outputs written to {}", cfg.output_dir.display());
    Ok(())
}

/// Load a grayscale image: `file:index` reads one item of an IDX image file,
/// anything else goes through the image decoder (PGM or PNG).
pub fn load_image(spec: &str) -> kantorovich::Result<GrayImage> {
    if let Some((path, index)) = spec.rsplit_once(':') {
        if let Ok(index) = index.parse::<usize>() {
            let (count, pixels) = read_idx_images(path)?;
            if index >= count {
                return Err(Error::ImageParse(format!(
                    "{path} holds {count} images, index {index} is out of range"
                )));
            }
            let px = SIDE * SIDE;
            return GrayImage::from_bytes(SIDE, SIDE, &pixels[index * px..(index + 1) * px]);
        }
    }
    let decoded = image::open(spec).map_err(|e| Error::ImageParse(format!("{spec}: {e}")))?;
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    let values: Vec<f64> = match decoded {
        image::DynamicImage::ImageLuma8(img) => img.into_raw().into_iter().map(f64::from).collect(),
        image::DynamicImage::ImageLuma16(img) => img.into_raw().into_iter().map(f64::from).collect(),
        _ => return Err(Error::ImageParse(format!("{spec}: not a grayscale image"))),
    };
    GrayImage::new(w, h, values)
}

/// `value` with 12 significant digits.
pub fn significant(value: f64) -> String {
    if value == 0.0 || !value.is_finite() {
        return format!("{value}");
    }
    let magnitude = value.abs().log10().floor() as i32;
    if !(-5..=15).contains(&magnitude) {
        return format!("{value:.11e}");
    }
    let decimals = (11 - magnitude).max(0) as usize;
    format!("{value:.decimals$}")
}

fn cmd_distance(
    metric: Metric,
    a: &str,
    b: &str,
    normalize: bool,
    pivot_rule: &str,
    out: &mut dyn Write,
) -> kantorovich::Result<()> {
    let (mut ia, mut ib) = (load_image(a)?, load_image(b)?);
    if normalize {
        ia = ia.normalized()?;
        ib = ib.normalized()?;
    }
    let opts = SolverOptions::default().with_pivot_rule(pivot_rule.parse::<PivotRule>()?);
    match metric {
        Metric::Euclidean => {
            let d = euclidean(ia.pixels(), ib.pixels())?;
            let _ = writeln!(out, "euclidean {}", significant(d.value));
        }
        Metric::Tangent => {
            let d = tangent_distance(&ia, &ib, &TangentConfig::default())?;
            let _ = writeln!(out, "tangent {}", significant(d));
        }
        Metric::Kantorovich => {
            let (ma, mb) = (measure_from_image(&ia, 0.0)?, measure_from_image(&ib, 0.0)?);
            let pair = if normalize {
                make_balanced_pair(&ma, &mb)?
            } else {
                BalancedPair::new(ma, mb)?
            };
            let o = transport_outcome(&pair, &opts)?;
            if o.status != SolveStatus::Optimal {
                return Err(Error::IterationLimit {
                    iterations: o.iterations,
                });
            }
            let c = o.certificate;
            let _ = writeln!(out, "kantorovich {}", significant(o.value));
            let _ = writeln!(out, "wasserstein2 {}", significant(o.value.max(0.0).sqrt()));
            let _ = writeln!(out, "support {}x{}", o.sources, o.targets);
            let _ = writeln!(out, "pivots {} (degenerate {})", o.iterations, o.degenerate_pivots);
            let _ = writeln!(out, "max_dual_violation {:e}", c.max_dual_violation);
            let _ = writeln!(out, "max_slackness_residual {:e}", c.max_slackness_residual);
            let _ = writeln!(out, "max_marginal_residual {:e}", c.max_marginal_residual);
            let _ = writeln!(out, "duality_gap {:e}", c.duality_gap);
            let _ = writeln!(out, "certificate {}", if c.passed { "pass" } else { "FAIL" });
        }
    }
    Ok(())
}

/// Run the solver self-check; `solver` replaces the production solver when given.
pub fn cmd_verify(seed: u64, instances: usize, solver: Option<&SolveFn<'_>>, out: &mut dyn Write) -> i32 {
    let default = |p: &_| solve(p, &SolverOptions::default());
    let report = run_all_with(seed, instances, solver.unwrap_or(&default));
    let _ = write!(out, "{report}");
    if report.passed() {
        let _ = writeln!(out, "all checks passed");
        EXIT_OK
    } else {
        let _ = writeln!(out, "verification FAILED");
        EXIT_VERIFY
    }
}
