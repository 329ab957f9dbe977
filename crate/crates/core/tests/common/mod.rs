#![allow(dead_code)]

use std::sync::OnceLock;

use kantorovich::mnist::{load_split, locate_data_dir, standard_paths, LabeledImage, RawDataset};

pub struct Mnist {
    pub train: RawDataset,
    pub test: RawDataset,
}

/// Official MNIST splits, loaded once per test binary.
pub fn mnist() -> &'static Mnist {
    static DATA: OnceLock<Mnist> = OnceLock::new();
    DATA.get_or_init(|| {
        let dir = locate_data_dir()
            .expect("MNIST not found: set MNIST_DIR or place the four IDX files in <workspace>/data/mnist");
        let [tri, trl, tei, tel] = standard_paths(&dir);
        Mnist {
            train: load_split(tri, trl).expect("train split"),
            test: load_split(tei, tel).expect("test split"),
        }
    })
}

pub fn train_digit(index: usize) -> LabeledImage {
    LabeledImage::from_raw(&mnist().train, index).unwrap()
}

pub fn test_digit(index: usize) -> LabeledImage {
    LabeledImage::from_raw(&mnist().test, index).unwrap()
}

use kantorovich::distances::Transformation;
use kantorovich::GrayImage;

/// Direct 2-D Gaussian blur with half-sample symmetric edges.
pub fn blur(img: &GrayImage, sigma: f64) -> Vec<f64> {
    let (w, h) = (img.width() as isize, img.height() as isize);
    let r = (3.0 * sigma).ceil() as isize;
    let reflect = |v: isize, n: isize| {
        let m = v.rem_euclid(2 * n);
        if m >= n {
            2 * n - 1 - m
        } else {
            m
        }
    };
    let g: Vec<f64> = (-r..=r)
        .map(|d| (-((d * d) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let z: f64 = g.iter().sum();
    let mut out = vec![0.0; (w * h) as usize];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for dy in -r..=r {
                for dx in -r..=r {
                    let (sx, sy) = (reflect(x + dx, w), reflect(y + dy, h));
                    acc += g[(dx + r) as usize] * g[(dy + r) as usize] * img.get(sx as usize, sy as usize);
                }
            }
            out[(y * w + x) as usize] = acc / (z * z);
        }
    }
    out
}

fn bilinear(v: &[f64], w: usize, h: usize, x: f64, y: f64) -> f64 {
    let x = x.clamp(0.0, (w - 1) as f64);
    let y = y.clamp(0.0, (h - 1) as f64);
    let (x0, y0) = (x.floor() as usize, y.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
    let (fx, fy) = (x - x0 as f64, y - y0 as f64);
    let at = |xx: usize, yy: usize| v[yy * w + xx];
    (1.0 - fy) * ((1.0 - fx) * at(x0, y0) + fx * at(x1, y0)) + fy * ((1.0 - fx) * at(x0, y1) + fx * at(x1, y1))
}

/// Central finite difference of the smoothed image under transformation `t`,
/// with step chosen so the largest pixel displacement is `max_shift` pixels.
pub fn finite_difference_tangent(img: &GrayImage, sigma: f64, t: Transformation, max_shift: f64) -> Vec<f64> {
    let (w, h) = (img.width(), img.height());
    let s = blur(img, sigma);
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let displacement = |col: usize, row: usize| -> (f64, f64) {
        let (x, y) = (col as f64 - cx, row as f64 - cy);
        match t {
            Transformation::TranslateX => (1.0, 0.0),
            Transformation::TranslateY => (0.0, 1.0),
            Transformation::Rotate => (y, -x),
            Transformation::Scale => (x, y),
            Transformation::ShearDiag => (x, -y),
            Transformation::ShearAxis => (y, x),
            Transformation::Thicken => {
                // Unit normal from a wide stencil on the smoothed image.
                let at = |c: isize, r: isize| {
                    s[(r.clamp(0, h as isize - 1) as usize) * w + c.clamp(0, w as isize - 1) as usize]
                };
                let (c, r) = (col as isize, row as isize);
                let gx = (at(c + 1, r) - at(c - 1, r)) / 2.0;
                let gy = (at(c, r + 1) - at(c, r - 1)) / 2.0;
                let n = gx.hypot(gy);
                if n == 0.0 {
                    (0.0, 0.0)
                } else {
                    (gx / n, gy / n)
                }
            }
        }
    };
    let mut max_disp = 0.0f64;
    for row in 0..h {
        for col in 0..w {
            let (dx, dy) = displacement(col, row);
            max_disp = max_disp.max(dx.hypot(dy));
        }
    }
    let eps = max_shift / max_disp;
    let mut out = Vec::with_capacity(w * h);
    for row in 0..h {
        for col in 0..w {
            let (dx, dy) = displacement(col, row);
            let (x, y) = (col as f64, row as f64);
            let fwd = bilinear(&s, w, h, x + eps * dx, y + eps * dy);
            let bwd = bilinear(&s, w, h, x - eps * dx, y - eps * dy);
            out.push((fwd - bwd) / (2.0 * eps));
        }
    }
    out
}

pub fn relative_error(got: &[f64], want: &[f64]) -> f64 {
    let num: f64 = got.iter().zip(want).map(|(a, b)| (a - b) * (a - b)).sum();
    let den: f64 = want.iter().map(|b| b * b).sum();
    (num / den).sqrt()
}
