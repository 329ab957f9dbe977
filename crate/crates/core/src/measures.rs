//! Images and point clouds as finite sums of weighted Dirac masses.

use std::collections::HashSet;

use crate::{Error, GrayImage, Result};

/// Relative tolerance on the difference of total masses in a [`BalancedPair`].
pub const BALANCE_TOL: f64 = 1e-9;

/// A support location in pixel units. Pixel (row r, col c) sits at (x = c, y = r).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub x: f64,
    pub y: f64,
}

impl GridPoint {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn squared_distance(&self, other: &GridPoint) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self::new(self.x + dx, self.y + dy)
    }

    fn key(&self) -> (u64, u64) {
        // +0.0 and -0.0 are the same location.
        ((self.x + 0.0).to_bits(), (self.y + 0.0).to_bits())
    }
}

/// Weighted point masses: the discrete form of an image density.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    points: Vec<GridPoint>,
    masses: Vec<f64>,
    total_mass: f64,
}

impl DiscreteMeasure {
    /// Validates finiteness, nonnegativity, matching lengths and distinct points.
    pub fn new(points: Vec<GridPoint>, masses: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidMeasure("measure needs at least one point".into()));
        }
        if points.len() != masses.len() {
            return Err(Error::LengthMismatch(points.len(), masses.len()));
        }
        if let Some(p) = points.iter().find(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(Error::InvalidMeasure(format!(
                "non-finite coordinate ({}, {})",
                p.x, p.y
            )));
        }
        if let Some(m) = masses.iter().find(|m| !m.is_finite() || **m < 0.0) {
            return Err(Error::InvalidMeasure(format!("mass {m} is negative or non-finite")));
        }
        let mut seen = HashSet::with_capacity(points.len());
        for p in &points {
            if !seen.insert(p.key()) {
                return Err(Error::InvalidMeasure(format!(
                    "duplicate support point ({}, {})",
                    p.x, p.y
                )));
            }
        }
        let total_mass = masses.iter().sum();
        Ok(Self {
            points,
            masses,
            total_mass,
        })
    }

    pub fn points(&self) -> &[GridPoint] {
        &self.points
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Same masses, every point shifted by `(dx, dy)`.
    pub fn translated(&self, dx: f64, dy: f64) -> Result<Self> {
        Self::new(
            self.points.iter().map(|p| p.translated(dx, dy)).collect(),
            self.masses.clone(),
        )
    }

    /// Same points, every mass multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.points.clone(), self.masses.iter().map(|m| m * factor).collect())
    }
}

/// One support point per pixel whose intensity exceeds `min_mass`.
pub fn measure_from_image(img: &GrayImage, min_mass: f64) -> Result<DiscreteMeasure> {
    let mut points = Vec::new();
    let mut masses = Vec::new();
    for row in 0..img.height() {
        for col in 0..img.width() {
            let v = img.get(col, row);
            if v > min_mass {
                points.push(GridPoint::new(col as f64, row as f64));
                masses.push(v);
            }
        }
    }
    if points.is_empty() {
        return Err(Error::AllZeroImage { min_mass });
    }
    DiscreteMeasure::new(points, masses)
}

/// Scale masses to total one.
pub fn normalize(m: &DiscreteMeasure) -> Result<DiscreteMeasure> {
    if m.total_mass <= 0.0 {
        return Err(Error::ZeroTotalMass);
    }
    let inv = 1.0 / m.total_mass;
    let masses: Vec<f64> = m.masses.iter().map(|w| w * inv).collect();
    DiscreteMeasure::new(m.points.clone(), masses)
}

/// Source and target measures with equal total mass.
#[derive(Debug, Clone, PartialEq)]
pub struct BalancedPair {
    source: DiscreteMeasure,
    target: DiscreteMeasure,
}

impl BalancedPair {
    /// Accepts the measures as given; fails unless their totals agree to [`BALANCE_TOL`].
    pub fn new(source: DiscreteMeasure, target: DiscreteMeasure) -> Result<Self> {
        let (s, t) = (source.total_mass, target.total_mass);
        if (s - t).abs() > BALANCE_TOL * s.max(1.0) {
            return Err(Error::UnbalancedProblem { supply: s, demand: t });
        }
        Ok(Self { source, target })
    }

    pub fn source(&self) -> &DiscreteMeasure {
        &self.source
    }

    pub fn target(&self) -> &DiscreteMeasure {
        &self.target
    }

    pub fn swapped(&self) -> Self {
        Self {
            source: self.target.clone(),
            target: self.source.clone(),
        }
    }
}

/// Normalize both sides to unit mass.
pub fn make_balanced_pair(a: &DiscreteMeasure, b: &DiscreteMeasure) -> Result<BalancedPair> {
    BalancedPair::new(normalize(a)?, normalize(b)?)
}
