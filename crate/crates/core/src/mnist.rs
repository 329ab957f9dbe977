//! MNIST IDX files and the disjoint training/test sampling protocol.
//!
//! IDX layout: a big-endian `u32` magic (`0x00000803` for images,
//! `0x00000801` for labels), one big-endian `u32` per dimension, then the raw
//! `u8` payload in row-major order. Files ending in `.gz` are decompressed
//! transparently.
//!
//! Sampling uses ChaCha8 seeded from a `u64`, which yields the same stream on
//! every platform, so a seed pins the protocol sets exactly.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, GrayImage, Result};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;
pub const SIDE: usize = 28;
pub const PIXELS: usize = SIDE * SIDE;
pub const DIGITS: usize = 10;

/// Raw images and labels of one MNIST split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawDataset {
    /// `count × 784` bytes, row-major per image.
    pub images: Vec<u8>,
    pub labels: Vec<u8>,
}

impl RawDataset {
    pub fn new(images: Vec<u8>, labels: Vec<u8>) -> Result<Self> {
        if images.len() != labels.len() * PIXELS {
            return Err(Error::CountMismatch {
                images: images.len() / PIXELS,
                labels: labels.len(),
            });
        }
        Ok(Self { images, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn image_bytes(&self, index: usize) -> &[u8] {
        &self.images[index * PIXELS..(index + 1) * PIXELS]
    }

    pub fn image(&self, index: usize) -> GrayImage {
        GrayImage::from_bytes(SIDE, SIDE, self.image_bytes(index)).expect("28x28 slice")
    }
}

fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path).map_err(|e| Error::io(path, e))?;
    if path.extension().is_some_and(|e| e == "gz") {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn be_u32(bytes: &[u8], word: usize) -> Result<u32> {
    let start = word * 4;
    bytes
        .get(start..start + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or(Error::TruncatedFile {
            expected: start + 4,
            found: bytes.len(),
        })
}

/// Parse an IDX3 image file into `(count, pixels)`.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, Vec<u8>)> {
    let magic = be_u32(bytes, 0)?;
    if magic != IMAGE_MAGIC {
        return Err(Error::BadMagic {
            expected: IMAGE_MAGIC,
            found: magic,
        });
    }
    let count = be_u32(bytes, 1)? as usize;
    let rows = be_u32(bytes, 2)? as usize;
    let cols = be_u32(bytes, 3)? as usize;
    if rows != SIDE || cols != SIDE {
        return Err(Error::DimensionMismatch { rows, cols });
    }
    let expected = 16 + count * PIXELS;
    if bytes.len() < expected {
        return Err(Error::TruncatedFile {
            expected,
            found: bytes.len(),
        });
    }
    Ok((count, bytes[16..expected].to_vec()))
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = be_u32(bytes, 0)?;
    if magic != LABEL_MAGIC {
        return Err(Error::BadMagic {
            expected: LABEL_MAGIC,
            found: magic,
        });
    }
    let count = be_u32(bytes, 1)? as usize;
    let expected = 8 + count;
    if bytes.len() < expected {
        return Err(Error::TruncatedFile {
            expected,
            found: bytes.len(),
        });
    }
    let labels = bytes[8..expected].to_vec();
    if let Some((index, &value)) = labels.iter().enumerate().find(|(_, &l)| l > 9) {
        return Err(Error::LabelOutOfRange { index, value });
    }
    Ok(labels)
}

pub fn read_idx_images(path: impl AsRef<Path>) -> Result<(usize, Vec<u8>)> {
    parse_idx_images(&read_maybe_gz(path.as_ref())?)
}

pub fn read_idx_labels(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    parse_idx_labels(&read_maybe_gz(path.as_ref())?)
}

pub fn load_split(images: impl AsRef<Path>, labels: impl AsRef<Path>) -> Result<RawDataset> {
    let (_, pixels) = read_idx_images(images)?;
    RawDataset::new(pixels, read_idx_labels(labels)?)
}

pub fn encode_idx_images(count: usize, pixels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + pixels.len());
    for word in [IMAGE_MAGIC, count as u32, SIDE as u32, SIDE as u32] {
        out.extend_from_slice(&word.to_be_bytes());
    }
    out.extend_from_slice(pixels);
    out
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

/// Write an IDX file (gzip-compressed when the path ends in `.gz`).
pub fn write_idx(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let data = if path.extension().is_some_and(|e| e == "gz") {
        let mut enc = flate2::write::GzEncoder::new(Vec::new(), flate2::Compression::default());
        enc.write_all(bytes).map_err(|e| Error::io(path, e))?;
        enc.finish().map_err(|e| Error::io(path, e))?
    } else {
        bytes.to_vec()
    };
    fs::write(path, data).map_err(|e| Error::io(path, e))
}

/// The four standard file names inside `dir`, preferring raw over `.gz`.
pub fn standard_paths(dir: impl AsRef<Path>) -> [PathBuf; 4] {
    let dir = dir.as_ref();
    [
        "train-images-idx3-ubyte",
        "train-labels-idx1-ubyte",
        "t10k-images-idx3-ubyte",
        "t10k-labels-idx1-ubyte",
    ]
    .map(|name| {
        let raw = dir.join(name);
        if raw.exists() {
            raw
        } else {
            dir.join(format!("{name}.gz"))
        }
    })
}

/// MNIST directory: `$MNIST_DIR` if set, else the first `data/mnist` found
/// walking up from the current directory.
pub fn locate_data_dir() -> Option<PathBuf> {
    if let Some(dir) = std::env::var_os("MNIST_DIR") {
        return Some(PathBuf::from(dir));
    }
    let cwd = std::env::current_dir().ok()?;
    cwd.ancestors()
        .map(|a| a.join("data").join("mnist"))
        .find(|d| standard_paths(d).iter().all(|p| p.exists()))
}

/// A normalized 28×28 digit with its label and index in the source split.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImage {
    pub image: GrayImage,
    pub label: u8,
    pub source_index: usize,
}

impl LabeledImage {
    /// Bytes divided by 255, then scaled to unit pixel sum.
    pub fn from_raw(raw: &RawDataset, index: usize) -> Result<Self> {
        let img = GrayImage::new(
            SIDE,
            SIDE,
            raw.image_bytes(index).iter().map(|&b| f64::from(b) / 255.0).collect(),
        )?;
        Ok(Self {
            image: img.normalized()?,
            label: raw.labels[index],
            source_index: index,
        })
    }
}

/// Sizes of the sampling protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProtocolParams {
    pub num_sets: usize,
    pub per_digit: usize,
    pub pool_per_digit: usize,
    pub test_per_digit: usize,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        Self {
            num_sets: 20,
            per_digit: 21,
            pool_per_digit: 1000,
            test_per_digit: 20,
        }
    }
}

/// One training set, stored rank-major: items `10·r .. 10·(r+1)` are the
/// `r`-th example of digits 0 through 9. The first `10·t` items therefore hold
/// `t` examples per digit, and smaller sizes are prefixes of larger ones.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub items: Vec<LabeledImage>,
}

impl TrainingSet {
    pub fn per_digit(&self) -> usize {
        self.items.len() / DIGITS
    }

    /// The nested subset with `t` examples of each digit.
    pub fn prefix(&self, t: usize) -> &[LabeledImage] {
        &self.items[..(t * DIGITS).min(self.items.len())]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolSets {
    pub training_sets: Vec<TrainingSet>,
    /// Digit-major: `test_per_digit` zeros, then ones, and so on.
    pub test_set: Vec<LabeledImage>,
    pub seed: u64,
}

impl ProtocolSets {
    /// The first `k` test images of each digit.
    pub fn test_subset(&self, k: usize) -> Vec<LabeledImage> {
        let per = self.test_set.len() / DIGITS;
        (0..DIGITS)
            .flat_map(|d| self.test_set[d * per..d * per + k.min(per)].iter().cloned())
            .collect()
    }
}

fn digit_pools(raw: &RawDataset) -> [Vec<usize>; DIGITS] {
    let mut pools: [Vec<usize>; DIGITS] = Default::default();
    for (idx, &label) in raw.labels.iter().enumerate() {
        pools[label as usize].push(idx);
    }
    pools
}

/// Draw the disjoint training sets and the test set.
///
/// Per digit, the training-split indices are shuffled and the first
/// `pool_per_digit` form the working pool; its first `num_sets·per_digit`
/// entries are dealt out in consecutive runs of `per_digit` to the sets.
/// Test images are drawn the same way from the test split.
pub fn build_protocol_sets(
    train: &RawDataset,
    test: &RawDataset,
    seed: u64,
    params: ProtocolParams,
) -> Result<ProtocolSets> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let needed = params.num_sets * params.per_digit;

    let mut train_pools = digit_pools(train);
    for (digit, pool) in train_pools.iter_mut().enumerate() {
        if pool.len() < needed {
            return Err(Error::InsufficientData {
                digit: digit as u8,
                needed,
                available: pool.len(),
            });
        }
        pool.shuffle(&mut rng);
        pool.truncate(params.pool_per_digit.max(needed));
    }
    let mut test_pools = digit_pools(test);
    for (digit, pool) in test_pools.iter_mut().enumerate() {
        if pool.len() < params.test_per_digit {
            return Err(Error::InsufficientData {
                digit: digit as u8,
                needed: params.test_per_digit,
                available: pool.len(),
            });
        }
        pool.shuffle(&mut rng);
        pool.truncate(params.test_per_digit);
    }

    let mut training_sets = Vec::with_capacity(params.num_sets);
    for s in 0..params.num_sets {
        let mut items = Vec::with_capacity(params.per_digit * DIGITS);
        for r in 0..params.per_digit {
            for pool in &train_pools {
                items.push(LabeledImage::from_raw(train, pool[s * params.per_digit + r])?);
            }
        }
        training_sets.push(TrainingSet { items });
    }
    let test_set = test_pools
        .iter()
        .flatten()
        .map(|&idx| LabeledImage::from_raw(test, idx))
        .collect::<Result<Vec<_>>>()?;

    Ok(ProtocolSets {
        training_sets,
        test_set,
        seed,
    })
}
