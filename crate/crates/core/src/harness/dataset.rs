use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::RandomSource;

/// Labelled feature vectors of one fixed dimension.
///
/// `mean` and `scale` record the normalization applied so far: stored
/// features equal `(raw - mean) / scale`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    labels: Vec<usize>,
    feature_dim: usize,
    n_classes: usize,
    mean: f64,
    scale: f64,
}

impl Dataset {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::Shape {
                expected: features.len(),
                actual: labels.len(),
            });
        }
        let feature_dim = features.first().map_or(0, Vec::len);
        if let Some(f) = features.iter().find(|f| f.len() != feature_dim) {
            return Err(Error::Shape {
                expected: feature_dim,
                actual: f.len(),
            });
        }
        Self::from_flat(features.concat(), labels, feature_dim, n_classes)
    }

    fn from_flat(features: Vec<f64>, labels: Vec<usize>, feature_dim: usize, n_classes: usize) -> Result<Self> {
        if let Some(&l) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::config(format!("label {l} out of range for {n_classes} classes")));
        }
        Ok(Self {
            features,
            labels,
            feature_dim,
            n_classes,
            mean: 0.0,
            scale: 1.0,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn feature(&self, i: usize) -> &[f64] {
        &self.features[i * self.feature_dim..(i + 1) * self.feature_dim]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// `(mean, scale)` of the normalization applied so far.
    pub fn normalization(&self) -> (f64, f64) {
        (self.mean, self.scale)
    }

    /// Shifts and scales all features to zero mean and unit variance,
    /// pooled over every feature of every example.
    pub fn normalize(&mut self) -> (f64, f64) {
        let n = self.features.len() as f64;
        if n == 0.0 {
            return (0.0, 1.0);
        }
        let mean = self.features.iter().sum::<f64>() / n;
        let var = self.features.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let scale = if var > 0.0 { var.sqrt() } else { 1.0 };
        self.apply_normalization(mean, scale);
        (mean, scale)
    }

    /// Applies a given normalization, e.g. training-set statistics to a
    /// test set.
    pub fn apply_normalization(&mut self, mean: f64, scale: f64) {
        for v in &mut self.features {
            *v = (*v - mean) / scale;
        }
        self.mean += mean * self.scale;
        self.scale *= scale;
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.feature_dim);
        for &i in indices {
            features.extend_from_slice(self.feature(i));
        }
        Dataset {
            features,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            ..*self
        }
    }

    /// First `n_first` examples and the rest.
    pub fn split(&self, n_first: usize) -> (Dataset, Dataset) {
        let n_first = n_first.min(self.len());
        let head: Vec<usize> = (0..n_first).collect();
        let tail: Vec<usize> = (n_first..self.len()).collect();
        (self.subset(&head), self.subset(&tail))
    }

    /// Random permutation of the examples.
    pub fn shuffled(&self, rng: &mut RandomSource) -> Dataset {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        for i in (1..idx.len()).rev() {
            let j = (rng.next_u64() % (i as u64 + 1)) as usize;
            idx.swap(i, j);
        }
        self.subset(&idx)
    }
}

/// Per class, a random `N(0, 1)` template; each example is its class
/// template plus `N(0, noise_sigma^2)` noise. Classes are interleaved.
pub fn synth_dataset(
    n_classes: usize,
    dim: usize,
    n_per_class: usize,
    noise_sigma: f64,
    rng: &mut RandomSource,
) -> Result<Dataset> {
    if n_classes == 0 || dim == 0 {
        return Err(Error::config("synthetic data needs at least one class and one feature"));
    }
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::config(format!("noise sigma {noise_sigma} must be >= 0")));
    }
    let mut normals = NormalStream::default();
    let templates: Vec<Vec<f64>> = (0..n_classes)
        .map(|_| (0..dim).map(|_| normals.next(rng)).collect())
        .collect();
    let mut features = Vec::with_capacity(n_classes * n_per_class * dim);
    let mut labels = Vec::with_capacity(n_classes * n_per_class);
    for _ in 0..n_per_class {
        for (c, t) in templates.iter().enumerate() {
            features.extend(t.iter().map(|&v| v + noise_sigma * normals.next(rng)));
            labels.push(c);
        }
    }
    Dataset::from_flat(features, labels, dim, n_classes)
}

#[derive(Default)]
struct NormalStream {
    spare: Option<f64>,
}

impl NormalStream {
    fn next(&mut self, rng: &mut RandomSource) -> f64 {
        if let Some(v) = self.spare.take() {
            return v;
        }
        let (a, b) = rng.std_normal_pair();
        self.spare = Some(b);
        a
    }
}

const IDX_UBYTE: u8 = 0x08;

/// Parsed IDX file: dimensions and the raw unsigned-byte payload.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdxArray {
    pub dims: Vec<usize>,
    pub data: Vec<u8>,
}

/// Parses an unsigned-byte IDX array with `ndims` dimensions.
pub fn parse_idx(bytes: &[u8], ndims: u8) -> Result<IdxArray> {
    let fmt = |offset: usize, message: String| Error::Format {
        offset: offset as u64,
        message,
    };
    if bytes.len() < 4 {
        return Err(fmt(
            0,
            format!("truncated header: expected 4 magic bytes, found {}", bytes.len()),
        ));
    }
    let expected_magic = u32::from_be_bytes([0, 0, IDX_UBYTE, ndims]);
    let magic = u32::from_be_bytes(bytes[..4].try_into().expect("4 bytes"));
    if magic != expected_magic {
        return Err(fmt(
            0,
            format!("bad magic 0x{magic:08x}, expected 0x{expected_magic:08x}"),
        ));
    }
    let header = 4 + 4 * ndims as usize;
    if bytes.len() < header {
        return Err(fmt(
            bytes.len(),
            format!("truncated header: expected {header} bytes, found {}", bytes.len()),
        ));
    }
    let dims: Vec<usize> = bytes[4..header]
        .chunks_exact(4)
        .map(|c| u32::from_be_bytes(c.try_into().expect("4 bytes")) as usize)
        .collect();
    let expected = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d));
    let expected = expected.ok_or_else(|| fmt(4, "dimensions overflow".into()))?;
    let actual = bytes.len() - header;
    if actual != expected {
        let what = if actual < expected {
            "truncated payload"
        } else {
            "oversized payload"
        };
        return Err(fmt(
            header + actual.min(expected),
            format!("{what}: expected {expected} bytes, found {actual}"),
        ));
    }
    Ok(IdxArray {
        dims,
        data: bytes[header..].to_vec(),
    })
}

/// Builds a dataset from IDX image (`0x00000803`) and label (`0x00000801`)
/// bytes. Pixels are scaled to `[0, 1]` and then normalized.
pub fn dataset_from_idx(images: &[u8], labels: &[u8]) -> Result<Dataset> {
    let img = parse_idx(images, 3)?;
    let lab = parse_idx(labels, 1)?;
    let n = img.dims[0];
    if lab.dims[0] != n {
        return Err(Error::Format {
            offset: 4,
            message: format!("label file holds {} labels for {n} images", lab.dims[0]),
        });
    }
    let dim = img.dims[1] * img.dims[2];
    let features = img.data.iter().map(|&p| p as f64 / 255.0).collect();
    let labels: Vec<usize> = lab.data.iter().map(|&l| l as usize).collect();
    let n_classes = labels.iter().max().map_or(0, |&m| m + 1);
    let mut ds = Dataset::from_flat(features, labels, dim, n_classes)?;
    ds.normalize();
    Ok(ds)
}

pub fn load_idx(images: impl AsRef<Path>, labels: impl AsRef<Path>) -> Result<Dataset> {
    let read = |p: &Path| std::fs::read(p).map_err(|e| Error::io(p, e));
    dataset_from_idx(&read(images.as_ref())?, &read(labels.as_ref())?)
}
