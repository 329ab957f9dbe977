//! Distances between images: Euclidean, one-sided tangent, and optimal
//! transport cost.
//!
//! All three are evaluated on unit-sum images in the classification harness.
//! The transport distance reports the raw optimal squared-distance cost, not
//! its square root; nearest-neighbour decisions are unchanged by the
//! monotone root.

mod tangent;

use std::fmt;
use std::str::FromStr;

pub use tangent::{
    gaussian_smooth, gradient, tangent_distance, tangent_vectors, Regularization, TangentConfig, TangentSpace,
    Transformation,
};

use crate::measures::{make_balanced_pair, measure_from_image, normalize, BalancedPair, DiscreteMeasure};
use crate::transport::{solve, verify_optimality, CertificateReport, SolveStatus, SolverOptions, TransportProblem};
use crate::{Error, GrayImage, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DistanceKind {
    Euclidean,
    Tangent,
    Kantorovich,
}

impl DistanceKind {
    pub const ALL: [DistanceKind; 3] = [
        DistanceKind::Euclidean,
        DistanceKind::Tangent,
        DistanceKind::Kantorovich,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DistanceKind::Euclidean => "euclidean",
            DistanceKind::Tangent => "tangent",
            DistanceKind::Kantorovich => "kantorovich",
        }
    }

    /// Capitalised label used in tables.
    pub fn title(self) -> &'static str {
        match self {
            DistanceKind::Euclidean => "Euclidean",
            DistanceKind::Tangent => "Tangent",
            DistanceKind::Kantorovich => "Kantorovich",
        }
    }
}

impl fmt::Display for DistanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DistanceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "euclidean" => Ok(DistanceKind::Euclidean),
            "tangent" | "tsd" => Ok(DistanceKind::Tangent),
            "kantorovich" | "wasserstein" | "transport" => Ok(DistanceKind::Kantorovich),
            other => Err(Error::Config(format!("unknown distance '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceResult {
    pub value: f64,
    pub kind: DistanceKind,
}

pub(crate) fn euclidean_value(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// `sqrt(Σ (a_k - b_k)²)`.
pub fn euclidean(a: &[f64], b: &[f64]) -> Result<DistanceResult> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    Ok(DistanceResult {
        value: euclidean_value(a, b),
        kind: DistanceKind::Euclidean,
    })
}

pub fn tangent(a: &GrayImage, b: &GrayImage, cfg: &TangentConfig) -> Result<DistanceResult> {
    Ok(DistanceResult {
        value: tangent_distance(a, b, cfg)?,
        kind: DistanceKind::Tangent,
    })
}

/// Optimal transport cost between the unit-normalized pixel measures.
pub fn kantorovich(a: &GrayImage, b: &GrayImage, opts: &SolverOptions) -> Result<DistanceResult> {
    let pair = make_balanced_pair(&measure_from_image(a, 0.0)?, &measure_from_image(b, 0.0)?)?;
    let outcome = transport_outcome(&pair, opts)?;
    if outcome.status != SolveStatus::Optimal {
        return Err(Error::IterationLimit {
            iterations: outcome.iterations,
        });
    }
    Ok(DistanceResult {
        value: outcome.value,
        kind: DistanceKind::Kantorovich,
    })
}

/// Transport cost together with solver statistics and the optimality certificate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransportOutcome {
    pub value: f64,
    pub sources: usize,
    pub targets: usize,
    pub iterations: usize,
    pub degenerate_pivots: usize,
    pub status: SolveStatus,
    pub certificate: CertificateReport,
}

pub fn transport_outcome(pair: &BalancedPair, opts: &SolverOptions) -> Result<TransportOutcome> {
    let problem = TransportProblem::from_pair(pair);
    let plan = solve(&problem, opts)?;
    let certificate = verify_optimality(&plan, &problem);
    Ok(TransportOutcome {
        value: plan.objective,
        sources: problem.rows(),
        targets: problem.cols(),
        iterations: plan.iterations,
        degenerate_pivots: plan.degenerate_pivots,
        status: plan.status,
        certificate,
    })
}

/// An image with whatever per-image precomputation the chosen distances need.
#[derive(Debug, Clone)]
pub struct PreparedImage {
    pub image: GrayImage,
    measure: Option<DiscreteMeasure>,
    tangent: Option<TangentSpace>,
}

impl PreparedImage {
    pub fn measure(&self) -> Option<&DiscreteMeasure> {
        self.measure.as_ref()
    }

    pub fn tangent_space(&self) -> Option<&TangentSpace> {
        self.tangent.as_ref()
    }
}

/// Distance settings shared by the classifier and the experiment.
#[derive(Debug, Clone, Default)]
pub struct DistanceEngine {
    pub tangent: TangentConfig,
    pub solver: SolverOptions,
}

impl DistanceEngine {
    pub fn new(tangent: TangentConfig, solver: SolverOptions) -> Self {
        Self { tangent, solver }
    }

    /// Precompute what `kind` needs on the reference side of a comparison.
    pub fn prepare(&self, image: &GrayImage, kind: DistanceKind) -> Result<PreparedImage> {
        let mut prepared = PreparedImage {
            image: image.clone(),
            measure: None,
            tangent: None,
        };
        match kind {
            DistanceKind::Euclidean => {}
            DistanceKind::Tangent => prepared.tangent = Some(TangentSpace::new(image, &self.tangent)?),
            DistanceKind::Kantorovich => prepared.measure = Some(normalize(&measure_from_image(image, 0.0)?)?),
        }
        Ok(prepared)
    }

    /// Distance from a training image (tangent space lives here) to a query.
    pub fn distance(&self, kind: DistanceKind, train: &PreparedImage, query: &PreparedImage) -> Result<f64> {
        Ok(self.evaluate(kind, train, query)?.0)
    }

    /// Like [`Self::distance`], also returning transport diagnostics when `kind` is Kantorovich.
    pub fn evaluate(
        &self,
        kind: DistanceKind,
        train: &PreparedImage,
        query: &PreparedImage,
    ) -> Result<(f64, Option<TransportOutcome>)> {
        match kind {
            DistanceKind::Euclidean => Ok((euclidean(train.image.pixels(), query.image.pixels())?.value, None)),
            DistanceKind::Tangent => {
                let value = match &train.tangent {
                    Some(space) => space.distance_to(&query.image)?,
                    None => tangent_distance(&train.image, &query.image, &self.tangent)?,
                };
                Ok((value, None))
            }
            DistanceKind::Kantorovich => {
                let prep = |p: &PreparedImage| -> Result<DiscreteMeasure> {
                    match &p.measure {
                        Some(m) => Ok(m.clone()),
                        None => normalize(&measure_from_image(&p.image, 0.0)?),
                    }
                };
                // Source = query, target = training image.
                let pair = BalancedPair::new(prep(query)?, prep(train)?)?;
                let outcome = transport_outcome(&pair, &self.solver)?;
                if outcome.status != SolveStatus::Optimal {
                    return Err(Error::IterationLimit {
                        iterations: outcome.iterations,
                    });
                }
                Ok((outcome.value, Some(outcome)))
            }
        }
    }

    /// Convenience wrapper evaluating `kind` on two plain images.
    pub fn between(&self, kind: DistanceKind, a: &GrayImage, b: &GrayImage) -> Result<DistanceResult> {
        a.same_shape(b)?;
        let value = match kind {
            DistanceKind::Euclidean => euclidean(a.pixels(), b.pixels())?.value,
            DistanceKind::Tangent => tangent_distance(a, b, &self.tangent)?,
            DistanceKind::Kantorovich => kantorovich(a, b, &self.solver)?.value,
        };
        Ok(DistanceResult { value, kind })
    }
}
