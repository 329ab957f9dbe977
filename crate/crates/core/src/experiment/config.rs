use std::fs;
use std::path::{Path, PathBuf};

use crate::distances::{DistanceKind, Regularization, TangentConfig, Transformation};
use crate::mnist::{self, DIGITS};
use crate::transport::{PivotRule, SolverOptions};
use crate::{Error, Result};

/// Everything one experiment run needs.
///
/// Text form is one `key = value` per line; `#` starts a comment. Relative
/// paths are taken relative to the config file. Recognised keys:
///
/// | key | value |
/// |---|---|
/// | `mnist_dir` | directory holding the four standard IDX files |
/// | `mnist_train_images`, `mnist_train_labels`, `mnist_test_images`, `mnist_test_labels` | individual files |
/// | `seed` | `u64` |
/// | `distances` | comma list of `euclidean`, `tangent`, `kantorovich` |
/// | `training_sizes` | comma list of sizes or ranges, e.g. `1-21` or `1,5,10` |
/// | `num_training_sets` | 1 to 20 |
/// | `test_size_per_digit` | 1 to 20 |
/// | `k` | neighbours, default 1 |
/// | `output_dir` | where results go |
/// | `workers` | thread count, default 1 |
/// | `pivot_rule` | `most_negative`, `bland` or `block` |
/// | `max_iterations` | pivot cap, `auto` for the default |
/// | `dual_tol`, `marginal_tol` | solver tolerances |
/// | `tangent_transformations` | comma list of transformation names or `all` |
/// | `tangent_sigma` | smoothing in pixels |
/// | `tangent_regularization` | factor on `trace(TᵀT)/L` |
/// | `tangent_smooth_inputs` | `true` or `false` |
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mnist_train_images: PathBuf,
    pub mnist_train_labels: PathBuf,
    pub mnist_test_images: PathBuf,
    pub mnist_test_labels: PathBuf,
    pub seed: u64,
    pub distances: Vec<DistanceKind>,
    pub training_sizes: Vec<usize>,
    pub num_training_sets: usize,
    pub test_size_per_digit: usize,
    pub k: usize,
    pub solver: SolverOptions,
    pub tangent: TangentConfig,
    pub output_dir: PathBuf,
    pub workers: usize,
}

pub const MAX_SETS: usize = 20;
pub const MAX_PER_DIGIT: usize = 21;
pub const MAX_TEST_PER_DIGIT: usize = 20;

impl Default for ExperimentConfig {
    fn default() -> Self {
        let [a, b, c, d] = mnist::standard_paths("data/mnist");
        Self {
            mnist_train_images: a,
            mnist_train_labels: b,
            mnist_test_images: c,
            mnist_test_labels: d,
            seed: 1,
            distances: DistanceKind::ALL.to_vec(),
            training_sizes: (1..=MAX_PER_DIGIT).collect(),
            num_training_sets: MAX_SETS,
            test_size_per_digit: MAX_TEST_PER_DIGIT,
            k: 1,
            solver: SolverOptions::default().with_pivot_rule(PivotRule::BlockSearch),
            tangent: TangentConfig::default(),
            output_dir: PathBuf::from("out"),
            workers: 1,
        }
    }
}

impl ExperimentConfig {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    /// Parse the text form on top of the defaults.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        let [a, b, c, d] = mnist::standard_paths(base.join("data/mnist"));
        (
            cfg.mnist_train_images,
            cfg.mnist_train_labels,
            cfg.mnist_test_images,
            cfg.mnist_test_labels,
        ) = (a, b, c, d);
        cfg.output_dir = base.join("out");
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            cfg.set_relative(key.trim(), value.trim(), base)
                .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Apply one override; relative paths resolve against the working directory.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        self.set_relative(key, value, Path::new(""))
    }

    fn set_relative(&mut self, key: &str, value: &str, base: &Path) -> Result<()> {
        let path = |v: &str| base.join(v);
        let bad = |what: &str| Error::Config(format!("invalid {what} '{value}'"));
        match key {
            "mnist_dir" => {
                let [a, b, c, d] = mnist::standard_paths(path(value));
                self.mnist_train_images = a;
                self.mnist_train_labels = b;
                self.mnist_test_images = c;
                self.mnist_test_labels = d;
            }
            "mnist_train_images" => self.mnist_train_images = path(value),
            "mnist_train_labels" => self.mnist_train_labels = path(value),
            "mnist_test_images" => self.mnist_test_images = path(value),
            "mnist_test_labels" => self.mnist_test_labels = path(value),
            "seed" => self.seed = value.parse().map_err(|_| bad("seed"))?,
            "distances" => {
                self.distances = list(value).map(str::parse).collect::<Result<_>>()?;
                self.distances.sort_unstable();
                self.distances.dedup();
            }
            "training_sizes" => self.training_sizes = parse_sizes(value)?,
            "num_training_sets" => self.num_training_sets = value.parse().map_err(|_| bad("set count"))?,
            "test_size_per_digit" => self.test_size_per_digit = value.parse().map_err(|_| bad("test size"))?,
            "k" => self.k = value.parse().map_err(|_| bad("k"))?,
            "output_dir" | "out" => self.output_dir = path(value),
            "workers" => self.workers = value.parse().map_err(|_| bad("worker count"))?,
            "pivot_rule" => self.solver.pivot_rule = value.parse()?,
            "max_iterations" => {
                self.solver.max_iterations = match value {
                    "auto" | "" => None,
                    v => Some(v.parse().map_err(|_| bad("iteration cap"))?),
                }
            }
            "dual_tol" => self.solver.dual_tol = value.parse().map_err(|_| bad("tolerance"))?,
            "marginal_tol" => self.solver.marginal_tol = value.parse().map_err(|_| bad("tolerance"))?,
            "tangent_transformations" => {
                let ts = if value == "all" {
                    Transformation::ALL.to_vec()
                } else {
                    list(value).map(str::parse).collect::<Result<_>>()?
                };
                self.tangent = rebuild_tangent(&self.tangent, Some(ts), None, None)?;
            }
            "tangent_sigma" => {
                let s = value.parse().map_err(|_| bad("sigma"))?;
                self.tangent = rebuild_tangent(&self.tangent, None, Some(s), None)?;
            }
            "tangent_regularization" => {
                let r = value.parse().map_err(|_| bad("regularization"))?;
                self.tangent = rebuild_tangent(&self.tangent, None, None, Some(Regularization::Relative(r)))?;
            }
            "tangent_smooth_inputs" => {
                let b = value.parse().map_err(|_| bad("boolean"))?;
                self.tangent = self.tangent.clone().with_smoothed_inputs(b);
            }
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.distances.is_empty() {
            return Err(Error::Config("no distances selected".into()));
        }
        if self.training_sizes.is_empty() || self.training_sizes.iter().any(|&t| !(1..=MAX_PER_DIGIT).contains(&t)) {
            return Err(Error::Config(format!("training sizes must lie in 1..={MAX_PER_DIGIT}")));
        }
        if !(1..=MAX_SETS).contains(&self.num_training_sets) {
            return Err(Error::Config(format!("num_training_sets must lie in 1..={MAX_SETS}")));
        }
        if !(1..=MAX_TEST_PER_DIGIT).contains(&self.test_size_per_digit) {
            return Err(Error::Config(format!(
                "test_size_per_digit must lie in 1..={MAX_TEST_PER_DIGIT}"
            )));
        }
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        self.solver.validate()
    }

    pub fn max_training_size(&self) -> usize {
        self.training_sizes.iter().copied().max().unwrap_or(0)
    }

    pub fn test_count(&self) -> usize {
        self.test_size_per_digit * DIGITS
    }
}

fn list(value: &str) -> impl Iterator<Item = &str> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn parse_sizes(value: &str) -> Result<Vec<usize>> {
    let bad = |v: &str| Error::Config(format!("invalid training size '{v}'"));
    let mut sizes = Vec::new();
    for item in list(value) {
        match item.split_once('-') {
            Some((lo, hi)) => {
                let lo: usize = lo.trim().parse().map_err(|_| bad(item))?;
                let hi: usize = hi.trim().parse().map_err(|_| bad(item))?;
                sizes.extend(lo..=hi);
            }
            None => sizes.push(item.parse().map_err(|_| bad(item))?),
        }
    }
    sizes.sort_unstable();
    sizes.dedup();
    Ok(sizes)
}

fn rebuild_tangent(
    cur: &TangentConfig,
    ts: Option<Vec<Transformation>>,
    sigma: Option<f64>,
    reg: Option<Regularization>,
) -> Result<TangentConfig> {
    Ok(TangentConfig::new(
        ts.unwrap_or_else(|| cur.transformations().to_vec()),
        sigma.unwrap_or(cur.smoothing_sigma()),
        reg.unwrap_or(cur.regularization()),
    )?
    .with_smoothed_inputs(cur.smooth_inputs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_keys_and_resolves_paths() {
        let text = "
            # desk run
            mnist_dir = ../mnist
            seed = 42
            distances = kantorovich, euclidean
            training_sizes = 1-3, 10
            num_training_sets = 5
            test_size_per_digit = 10
            workers = 4
            pivot_rule = bland
            max_iterations = 1000
            tangent_transformations = translate_x, rotate
            tangent_sigma = 1.5
            output_dir = results
        ";
        let cfg = ExperimentConfig::parse(text, Path::new("/cfg")).unwrap();
        assert_eq!(cfg.mnist_test_labels.parent().unwrap(), Path::new("/cfg/../mnist"));
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.distances, vec![DistanceKind::Euclidean, DistanceKind::Kantorovich]);
        assert_eq!(cfg.training_sizes, vec![1, 2, 3, 10]);
        assert_eq!(
            (cfg.num_training_sets, cfg.test_size_per_digit, cfg.workers),
            (5, 10, 4)
        );
        assert_eq!(cfg.solver.pivot_rule, PivotRule::Bland);
        assert_eq!(cfg.solver.max_iterations, Some(1000));
        assert_eq!(
            cfg.tangent.transformations(),
            &[Transformation::TranslateX, Transformation::Rotate]
        );
        assert_eq!(cfg.tangent.smoothing_sigma(), 1.5);
        assert_eq!(cfg.output_dir, Path::new("/cfg/results"));
    }

    #[test]
    fn rejects_bad_input() {
        let base = Path::new(".");
        for text in [
            "seed",
            "seed = x",
            "colour = blue",
            "training_sizes = 0",
            "training_sizes = 22",
            "num_training_sets = 21",
            "test_size_per_digit = 0",
            "distances = manhattan",
            "workers = 0",
            "tangent_sigma = 5",
            "pivot_rule = random",
        ] {
            assert!(
                matches!(
                    ExperimentConfig::parse(text, base),
                    Err(Error::Config(_) | Error::InvalidTangentConfig(_))
                ),
                "{text}"
            );
        }
    }

    #[test]
    fn overrides_apply_after_parsing() {
        let mut cfg = ExperimentConfig::parse("seed = 3", Path::new(".")).unwrap();
        cfg.set("seed", "9").unwrap();
        cfg.set("workers", "2").unwrap();
        assert_eq!((cfg.seed, cfg.workers), (9, 2));
        assert!(cfg.set("nope", "1").is_err());
    }
}
