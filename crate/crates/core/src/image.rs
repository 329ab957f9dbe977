use crate::{Error, Result};

/// Row-major grayscale image with nonnegative real intensities.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::ImageParse("image must have at least one pixel".into()));
        }
        if pixels.len() != width * height {
            return Err(Error::LengthMismatch(pixels.len(), width * height));
        }
        if let Some(p) = pixels.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::ImageParse(format!(
                "pixel value {p} is not a finite nonnegative number"
            )));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            pixels: vec![0.0; width * height],
        }
    }

    /// Build from nested rows, `rows[r][c]`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::ImageParse("ragged rows".into()));
        }
        Self::new(width, height, rows.concat())
    }

    pub fn from_bytes(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        Self::new(width, height, bytes.iter().map(|&b| f64::from(b)).collect())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    /// Pixel at column `x`, row `y`.
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: f64) {
        self.pixels[y * self.width + x] = value;
    }

    pub fn sum(&self) -> f64 {
        self.pixels.iter().sum()
    }

    /// Copy scaled so that the pixels sum to one.
    pub fn normalized(&self) -> Result<Self> {
        let total = self.sum();
        if total <= 0.0 {
            return Err(Error::ZeroTotalMass);
        }
        Ok(Self {
            width: self.width,
            height: self.height,
            pixels: self.pixels.iter().map(|p| p / total).collect(),
        })
    }

    pub fn same_shape(&self, other: &GrayImage) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::ShapeMismatch(self.width, self.height, other.width, other.height));
        }
        Ok(())
    }

    /// Mirror left-right.
    pub fn flipped_horizontally(&self) -> Self {
        let mut out = Self::zeros(self.width, self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                out.set(self.width - 1 - x, y, self.get(x, y));
            }
        }
        out
    }
}
