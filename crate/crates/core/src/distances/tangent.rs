//! One-sided tangent distance.
//!
//! The tangent space of an image `I` is `{ I + Σ α_l t_l }` where each `t_l`
//! is the derivative of a small image transformation at the identity. The
//! distance from `I` to another image `J` is the smallest Euclidean norm of
//! `I + Σ α_l t_l - J` over `α`, found from the `L×L` normal equations.
//!
//! Tangents are derivatives of the Gaussian-smoothed image; `I` and `J`
//! themselves are compared unsmoothed unless
//! [`TangentConfig::with_smoothed_inputs`] asks otherwise. Smoothing uses
//! half-sample symmetric edges, which keeps it a contraction, so either way
//! the result never exceeds the plain Euclidean distance.

use std::fmt;
use std::str::FromStr;

use crate::{Error, GrayImage, Result};

/// Transformations whose first-order effect spans the tangent space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Transformation {
    TranslateX,
    TranslateY,
    Rotate,
    Scale,
    /// Stretch along x, squeeze along y.
    ShearDiag,
    /// Stretch along the diagonal, squeeze along the anti-diagonal.
    ShearAxis,
    Thicken,
}

impl Transformation {
    pub const ALL: [Transformation; 7] = [
        Transformation::TranslateX,
        Transformation::TranslateY,
        Transformation::Rotate,
        Transformation::Scale,
        Transformation::ShearDiag,
        Transformation::ShearAxis,
        Transformation::Thicken,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Transformation::TranslateX => "translate_x",
            Transformation::TranslateY => "translate_y",
            Transformation::Rotate => "rotate",
            Transformation::Scale => "scale",
            Transformation::ShearDiag => "shear_diag",
            Transformation::ShearAxis => "shear_axis",
            Transformation::Thicken => "thicken",
        }
    }

    /// Displacement field of the geometric transformations at centred
    /// coordinates `(x, y)`: the image moves as `I(p + α·field(p))`.
    /// `None` for [`Transformation::Thicken`], which moves along the gradient.
    pub fn field(self, x: f64, y: f64) -> Option<(f64, f64)> {
        match self {
            Transformation::TranslateX => Some((1.0, 0.0)),
            Transformation::TranslateY => Some((0.0, 1.0)),
            Transformation::Rotate => Some((y, -x)),
            Transformation::Scale => Some((x, y)),
            Transformation::ShearDiag => Some((x, -y)),
            Transformation::ShearAxis => Some((y, x)),
            Transformation::Thicken => None,
        }
    }
}

impl fmt::Display for Transformation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Transformation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Transformation::ALL
            .into_iter()
            .find(|t| t.name() == s.trim())
            .ok_or_else(|| Error::InvalidTangentConfig(format!("unknown transformation '{s}'")))
    }
}

/// How much is added to the diagonal of the normal equations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regularization {
    /// `factor · trace(TᵀT) / L`.
    Relative(f64),
    Absolute(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TangentConfig {
    transformations: Vec<Transformation>,
    smoothing_sigma: f64,
    regularization: Regularization,
    smooth_inputs: bool,
}

impl Default for TangentConfig {
    fn default() -> Self {
        Self {
            transformations: Transformation::ALL.to_vec(),
            smoothing_sigma: 1.0,
            regularization: Regularization::Relative(1e-6),
            smooth_inputs: false,
        }
    }
}

impl TangentConfig {
    pub fn new(
        transformations: Vec<Transformation>,
        smoothing_sigma: f64,
        regularization: Regularization,
    ) -> Result<Self> {
        let mut ts = transformations;
        ts.sort_unstable();
        ts.dedup();
        if ts.is_empty() || ts.len() > 7 {
            return Err(Error::InvalidTangentConfig(format!(
                "need 1 to 7 transformations, got {}",
                ts.len()
            )));
        }
        if !(0.5..=3.0).contains(&smoothing_sigma) {
            return Err(Error::InvalidTangentConfig(format!(
                "smoothing sigma {smoothing_sigma} outside [0.5, 3]"
            )));
        }
        let reg = match regularization {
            Regularization::Relative(r) | Regularization::Absolute(r) => r,
        };
        if !(reg >= 0.0 && reg.is_finite()) {
            return Err(Error::InvalidTangentConfig(format!(
                "regularization {reg} must be >= 0"
            )));
        }
        Ok(Self {
            transformations: ts,
            smoothing_sigma,
            regularization,
            smooth_inputs: false,
        })
    }

    /// Compare smoothed rather than raw images (tangents come from the
    /// smoothed image either way).
    pub fn with_smoothed_inputs(mut self, smooth: bool) -> Self {
        self.smooth_inputs = smooth;
        self
    }

    pub fn smooth_inputs(&self) -> bool {
        self.smooth_inputs
    }

    pub fn transformations(&self) -> &[Transformation] {
        &self.transformations
    }

    pub fn smoothing_sigma(&self) -> f64 {
        self.smoothing_sigma
    }

    pub fn regularization(&self) -> Regularization {
        self.regularization
    }
}

/// Separable Gaussian blur, radius `ceil(3σ)`, half-sample symmetric edges.
pub fn gaussian_smooth(img: &GrayImage, sigma: f64) -> Vec<f64> {
    let (w, h) = (img.width(), img.height());
    let radius = (3.0 * sigma).ceil() as isize;
    let mut kernel: Vec<f64> = (-radius..=radius)
        .map(|d| (-((d * d) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let norm: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|k| *k /= norm);

    let clamp = |v: isize, n: usize| {
        let n = n as isize;
        let m = v.rem_euclid(2 * n);
        (if m >= n { 2 * n - 1 - m } else { m }) as usize
    };
    let src = img.pixels();
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            tmp[y * w + x] = kernel
                .iter()
                .enumerate()
                .map(|(k, kv)| kv * src[y * w + clamp(x as isize + k as isize - radius, w)])
                .sum();
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = kernel
                .iter()
                .enumerate()
                .map(|(k, kv)| kv * tmp[clamp(y as isize + k as isize - radius, h) * w + x])
                .sum();
        }
    }
    out
}

/// Central differences `(∂/∂x, ∂/∂y)`, edge samples repeated.
pub fn gradient(values: &[f64], w: usize, h: usize) -> (Vec<f64>, Vec<f64>) {
    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let (xl, xr) = (x.saturating_sub(1), (x + 1).min(w - 1));
            let (yu, yd) = (y.saturating_sub(1), (y + 1).min(h - 1));
            gx[y * w + x] = 0.5 * (values[y * w + xr] - values[y * w + xl]);
            gy[y * w + x] = 0.5 * (values[yd * w + x] - values[yu * w + x]);
        }
    }
    (gx, gy)
}

/// Tangent images of `img`, one per configured transformation, in config order.
pub fn tangent_vectors(img: &GrayImage, cfg: &TangentConfig) -> Vec<Vec<f64>> {
    let (w, h) = (img.width(), img.height());
    let smooth = gaussian_smooth(img, cfg.smoothing_sigma);
    let (gx, gy) = gradient(&smooth, w, h);
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    cfg.transformations
        .iter()
        .map(|&t| {
            let mut out = Vec::with_capacity(w * h);
            for row in 0..h {
                for col in 0..w {
                    let k = row * w + col;
                    let (x, y) = (col as f64 - cx, row as f64 - cy);
                    out.push(match t.field(x, y) {
                        Some((fx, fy)) => fx * gx[k] + fy * gy[k],
                        None => gx[k].hypot(gy[k]),
                    });
                }
            }
            out
        })
        .collect()
}

/// Precomputed tangent vectors of one image plus the factored normal equations.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentSpace {
    image: GrayImage,
    // Point of tangency: the smoothed image, or the raw one.
    anchor: Vec<f64>,
    // Smoothing applied to the other image before comparison.
    query_sigma: Option<f64>,
    vectors: Vec<Vec<f64>>,
    // Lower-triangular Cholesky factor of TᵀT + λI, row-major L×L.
    chol: Vec<f64>,
}

impl TangentSpace {
    pub fn new(img: &GrayImage, cfg: &TangentConfig) -> Result<Self> {
        let mut space = Self::from_vectors(img.clone(), tangent_vectors(img, cfg), cfg.regularization)?;
        if cfg.smooth_inputs {
            space.anchor = gaussian_smooth(img, cfg.smoothing_sigma);
            space.query_sigma = Some(cfg.smoothing_sigma);
        }
        Ok(space)
    }

    /// Tangent space of the raw `image` spanned by arbitrary vectors (possibly
    /// none, which gives the Euclidean distance).
    pub fn from_vectors(image: GrayImage, vectors: Vec<Vec<f64>>, reg: Regularization) -> Result<Self> {
        let n = image.pixels().len();
        if let Some(v) = vectors.iter().find(|v| v.len() != n) {
            return Err(Error::LengthMismatch(v.len(), n));
        }
        let anchor = image.pixels().to_vec();
        let l = vectors.len();
        let mut gram = vec![0.0; l * l];
        for a in 0..l {
            for b in 0..=a {
                let g: f64 = vectors[a].iter().zip(&vectors[b]).map(|(x, y)| x * y).sum();
                gram[a * l + b] = g;
                gram[b * l + a] = g;
            }
        }
        let trace: f64 = (0..l).map(|a| gram[a * l + a]).sum();
        if l > 0 && trace == 0.0 {
            // Every tangent vector vanishes (e.g. a constant image).
            return Ok(Self {
                image,
                anchor,
                query_sigma: None,
                vectors: Vec::new(),
                chol: Vec::new(),
            });
        }
        let lambda = match reg {
            Regularization::Relative(f) if l > 0 => f * trace / l as f64,
            Regularization::Relative(_) => 0.0,
            Regularization::Absolute(a) => a,
        };
        for a in 0..l {
            gram[a * l + a] += lambda;
        }
        let chol = cholesky(&gram, l).ok_or(Error::SingularSystem)?;
        Ok(Self {
            image,
            anchor,
            query_sigma: None,
            vectors,
            chol,
        })
    }

    pub fn image(&self) -> &GrayImage {
        &self.image
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    /// `min_α ‖I + Σ α_l t_l - other‖`.
    pub fn distance_to(&self, other: &GrayImage) -> Result<f64> {
        self.image.same_shape(other)?;
        let smoothed;
        let b = match self.query_sigma {
            Some(sigma) => {
                smoothed = gaussian_smooth(other, sigma);
                &smoothed[..]
            }
            None => other.pixels(),
        };
        let a = &self.anchor[..];
        let l = self.vectors.len();
        let rhs: Vec<f64> = self
            .vectors
            .iter()
            .map(|t| t.iter().zip(a.iter().zip(b)).map(|(tk, (ak, bk))| tk * (bk - ak)).sum())
            .collect();
        let alpha = cholesky_solve(&self.chol, l, &rhs);
        let mut sum = 0.0;
        for k in 0..a.len() {
            let mut r = a[k] - b[k];
            for (t, al) in self.vectors.iter().zip(&alpha) {
                r += al * t[k];
            }
            sum += r * r;
        }
        let tangent = sum.sqrt();
        // α = 0 is always admissible.
        if l > 0 {
            Ok(tangent.min(super::euclidean_value(a, b)))
        } else {
            Ok(tangent)
        }
    }
}

fn cholesky(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut lo = vec![0.0; n * n];
    let scale = (0..n).map(|i| a[i * n + i]).fold(0.0, f64::max);
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= lo[i * n + k] * lo[j * n + k];
            }
            if i == j {
                if s <= 1e-14 * scale || s <= 0.0 {
                    return None;
                }
                lo[i * n + i] = s.sqrt();
            } else {
                lo[i * n + j] = s / lo[j * n + j];
            }
        }
    }
    Some(lo)
}

fn cholesky_solve(lo: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|k| lo[i * n + k] * y[k]).sum();
        y[i] = (b[i] - s) / lo[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| lo[k * n + i] * x[k]).sum();
        x[i] = (y[i] - s) / lo[i * n + i];
    }
    x
}

/// Tangent space on `a`, distance to `b`.
pub fn tangent_distance(a: &GrayImage, b: &GrayImage, cfg: &TangentConfig) -> Result<f64> {
    a.same_shape(b)?;
    TangentSpace::new(a, cfg)?.distance_to(b)
}
