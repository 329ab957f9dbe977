//! Nearest-neighbour classification with deterministic tie-breaking.

use rayon::prelude::*;

use crate::distances::{DistanceEngine, DistanceKind, PreparedImage};
use crate::mnist::LabeledImage;
use crate::{Error, Result};

/// Distances closer than this count as tied.
pub const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub predicted: u8,
    /// `source_index` of the nearest training item.
    pub neighbour: usize,
    pub distance: f64,
}

/// One training candidate as seen from a fixed test item.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub distance: f64,
    pub label: u8,
    pub source_index: usize,
}

/// Decide from precomputed distances.
///
/// `k = 1`: the minimum distance wins; candidates within [`TIE_TOL`] of it
/// go to the smallest `source_index`. `k > 1`: majority vote among the `k`
/// nearest (ordered by distance, then `source_index`); vote ties go to the
/// smallest summed distance, then the smallest `source_index`.
pub fn decide(candidates: &[Candidate], k: usize) -> Result<Prediction> {
    if candidates.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if k == 0 {
        return Err(Error::InvalidOptions("k must be at least 1".into()));
    }
    let min = candidates.iter().map(|c| c.distance).fold(f64::INFINITY, f64::min);
    let nearest = candidates
        .iter()
        .filter(|c| c.distance <= min + TIE_TOL)
        .min_by_key(|c| c.source_index)
        .expect("non-empty");
    if k == 1 {
        return Ok(Prediction {
            predicted: nearest.label,
            neighbour: nearest.source_index,
            distance: nearest.distance,
        });
    }

    let mut sorted = candidates.to_vec();
    sorted.sort_by(|a, b| {
        a.distance
            .total_cmp(&b.distance)
            .then(a.source_index.cmp(&b.source_index))
    });
    sorted.truncate(k);
    // (votes, summed distance, smallest source index) per label.
    let mut tally: Vec<(u8, usize, f64, usize)> = Vec::new();
    for c in &sorted {
        match tally.iter_mut().find(|t| t.0 == c.label) {
            Some(t) => {
                t.1 += 1;
                t.2 += c.distance;
                t.3 = t.3.min(c.source_index);
            }
            None => tally.push((c.label, 1, c.distance, c.source_index)),
        }
    }
    let winner = tally
        .iter()
        .min_by(|a, b| b.1.cmp(&a.1).then(a.2.total_cmp(&b.2)).then(a.3.cmp(&b.3)))
        .expect("non-empty");
    Ok(Prediction {
        predicted: winner.0,
        neighbour: nearest.source_index,
        distance: nearest.distance,
    })
}

/// Training images prepared once for repeated queries under one metric.
pub struct PreparedTraining<'a> {
    engine: &'a DistanceEngine,
    metric: DistanceKind,
    items: Vec<(PreparedImage, u8, usize)>,
}

impl<'a> PreparedTraining<'a> {
    pub fn new(engine: &'a DistanceEngine, train: &[LabeledImage], metric: DistanceKind) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        let items = train
            .iter()
            .map(|t| Ok((engine.prepare(&t.image, metric)?, t.label, t.source_index)))
            .collect::<Result<_>>()?;
        Ok(Self { engine, metric, items })
    }

    pub fn candidates(&self, test: &LabeledImage) -> Result<Vec<Candidate>> {
        let query = self.engine.prepare(&test.image, self.query_kind())?;
        self.items
            .iter()
            .map(|(prep, label, source_index)| {
                let distance = self
                    .engine
                    .distance(self.metric, prep, &query)
                    .map_err(|e| Error::Pair {
                        test: test.source_index,
                        train: *source_index,
                        source: Box::new(e),
                    })?;
                Ok(Candidate {
                    distance,
                    label: *label,
                    source_index: *source_index,
                })
            })
            .collect()
    }

    pub fn classify(&self, test: &LabeledImage, k: usize) -> Result<Prediction> {
        decide(&self.candidates(test)?, k)
    }

    // The tangent space lives on the training side only.
    fn query_kind(&self) -> DistanceKind {
        match self.metric {
            DistanceKind::Tangent => DistanceKind::Euclidean,
            other => other,
        }
    }
}

pub fn classify(test: &LabeledImage, train: &[LabeledImage], metric: DistanceKind, k: usize) -> Result<Prediction> {
    classify_with(&DistanceEngine::default(), test, train, metric, k)
}

pub fn classify_with(
    engine: &DistanceEngine,
    test: &LabeledImage,
    train: &[LabeledImage],
    metric: DistanceKind,
    k: usize,
) -> Result<Prediction> {
    PreparedTraining::new(engine, train, metric)?.classify(test, k)
}

/// Predictions for every test item, in input order.
pub fn predict_all(
    engine: &DistanceEngine,
    tests: &[LabeledImage],
    train: &[LabeledImage],
    metric: DistanceKind,
    k: usize,
) -> Result<Vec<Prediction>> {
    if tests.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    let prepared = PreparedTraining::new(engine, train, metric)?;
    tests.par_iter().map(|t| prepared.classify(t, k)).collect()
}

pub fn accuracy(tests: &[LabeledImage], train: &[LabeledImage], metric: DistanceKind, k: usize) -> Result<f64> {
    accuracy_with(&DistanceEngine::default(), tests, train, metric, k)
}

/// Fraction of `tests` whose prediction equals the true label.
pub fn accuracy_with(
    engine: &DistanceEngine,
    tests: &[LabeledImage],
    train: &[LabeledImage],
    metric: DistanceKind,
    k: usize,
) -> Result<f64> {
    let predictions = predict_all(engine, tests, train, metric, k)?;
    let correct = predictions
        .iter()
        .zip(tests)
        .filter(|(p, t)| p.predicted == t.label)
        .count();
    Ok(correct as f64 / tests.len() as f64)
}
