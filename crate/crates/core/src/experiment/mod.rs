//! The nearest-neighbour accuracy experiment over growing training sets.
//!
//! For each distance and each disjoint training set, every test image is
//! compared once against the largest configured prefix of the set; smaller
//! training sizes reuse the same distances because sizes are nested.

mod config;
mod output;

use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;

pub use config::{ExperimentConfig, MAX_PER_DIGIT, MAX_SETS, MAX_TEST_PER_DIGIT};
pub use output::{emit_outputs, summarize, table1, OutputFiles, TABLE_SIZES};

use crate::distances::{DistanceEngine, DistanceKind, PreparedImage, TransportOutcome};
use crate::knn::{decide, Candidate};
use crate::mnist::{build_protocol_sets, load_split, LabeledImage, ProtocolParams, ProtocolSets, DIGITS};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccuracyRecord {
    pub distance: DistanceKind,
    pub training_size: usize,
    pub set_index: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryRow {
    pub distance: DistanceKind,
    pub training_size: usize,
    pub mean: f64,
    /// Population standard deviation over training sets.
    pub std_dev: f64,
}

/// Solver statistics for one transport distance evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairDiagnostic {
    pub set_index: usize,
    pub test_index: usize,
    pub train_index: usize,
    pub outcome: TransportOutcome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResults {
    /// Sorted by distance, training size, set index.
    pub records: Vec<AccuracyRecord>,
    pub summary: Vec<SummaryRow>,
    /// Kantorovich evaluations only, in set, test and training order.
    pub diagnostics: Vec<PairDiagnostic>,
}

impl ExperimentResults {
    pub fn certificate_failures(&self) -> usize {
        self.diagnostics
            .iter()
            .filter(|d| !d.outcome.certificate.passed)
            .count()
    }
}

/// Progress notifications: `(distance, rows done, rows total)`.
pub type Progress<'a> = &'a (dyn Fn(DistanceKind, usize, usize) + Sync);

pub fn load_protocol(cfg: &ExperimentConfig) -> Result<ProtocolSets> {
    let train = load_split(&cfg.mnist_train_images, &cfg.mnist_train_labels)?;
    let test = load_split(&cfg.mnist_test_images, &cfg.mnist_test_labels)?;
    build_protocol_sets(&train, &test, cfg.seed, ProtocolParams::default())
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResults> {
    run_experiment_with(cfg, &load_protocol(cfg)?, &|_, _, _| {})
}

/// Run on already-built protocol sets.
pub fn run_experiment_with(
    cfg: &ExperimentConfig,
    sets: &ProtocolSets,
    progress: Progress,
) -> Result<ExperimentResults> {
    cfg.validate()?;
    if sets.training_sets.len() < cfg.num_training_sets {
        return Err(Error::Config(format!(
            "protocol has {} training sets, config asks for {}",
            sets.training_sets.len(),
            cfg.num_training_sets
        )));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| run_inner(cfg, sets, progress))
}

fn run_inner(cfg: &ExperimentConfig, sets: &ProtocolSets, progress: Progress) -> Result<ExperimentResults> {
    let engine = DistanceEngine::new(cfg.tangent.clone(), cfg.solver.clone());
    let tests = sets.test_subset(cfg.test_size_per_digit);
    let max_size = cfg.max_training_size();
    let mut records = Vec::new();
    let mut diagnostics = Vec::new();

    for &kind in &cfg.distances {
        let trains: Vec<&[LabeledImage]> = sets.training_sets[..cfg.num_training_sets]
            .iter()
            .map(|s| s.prefix(max_size))
            .collect();
        let prepared_trains = trains
            .par_iter()
            .map(|items| {
                items
                    .iter()
                    .map(|t| engine.prepare(&t.image, kind))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let query_kind = if kind == DistanceKind::Tangent {
            DistanceKind::Euclidean
        } else {
            kind
        };
        let queries = tests
            .par_iter()
            .map(|t| engine.prepare(&t.image, query_kind))
            .collect::<Result<Vec<PreparedImage>>>()?;

        let rows: Vec<(usize, usize)> = (0..trains.len())
            .flat_map(|s| (0..tests.len()).map(move |q| (s, q)))
            .collect();
        let done = AtomicUsize::new(0);
        let total = rows.len();
        // One row: distances from one test image to every item of one set prefix.
        let matrix = rows
            .par_iter()
            .map(|&(s, q)| {
                let row = prepared_trains[s]
                    .iter()
                    .zip(trains[s])
                    .map(|(prep, item)| {
                        engine.evaluate(kind, prep, &queries[q]).map_err(|e| Error::Pair {
                            test: tests[q].source_index,
                            train: item.source_index,
                            source: Box::new(e),
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                let n = done.fetch_add(1, Ordering::Relaxed) + 1;
                progress(kind, n, total);
                Ok(row)
            })
            .collect::<Result<Vec<_>>>()?;

        for (&(s, q), row) in rows.iter().zip(&matrix) {
            for (t, (_, outcome)) in row.iter().enumerate() {
                if let Some(outcome) = outcome {
                    diagnostics.push(PairDiagnostic {
                        set_index: s,
                        test_index: tests[q].source_index,
                        train_index: trains[s][t].source_index,
                        outcome: *outcome,
                    });
                }
            }
        }

        for &size in &cfg.training_sizes {
            let width = size * DIGITS;
            for s in 0..trains.len() {
                let mut correct = 0;
                for (q, test) in tests.iter().enumerate() {
                    let row = &matrix[s * tests.len() + q];
                    let candidates: Vec<Candidate> = row[..width]
                        .iter()
                        .zip(&trains[s][..width])
                        .map(|(&(distance, _), item)| Candidate {
                            distance,
                            label: item.label,
                            source_index: item.source_index,
                        })
                        .collect();
                    if decide(&candidates, cfg.k)?.predicted == test.label {
                        correct += 1;
                    }
                }
                records.push(AccuracyRecord {
                    distance: kind,
                    training_size: size,
                    set_index: s,
                    accuracy: correct as f64 / tests.len() as f64,
                });
            }
        }
    }

    records.sort_by_key(|r| (r.distance, r.training_size, r.set_index));
    let summary = summarize(&records);
    Ok(ExperimentResults {
        records,
        summary,
        diagnostics,
    })
}
