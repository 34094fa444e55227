//! Labeled datasets: seeded Gaussian blobs, IDX and CSV ingestion, and
//! per-class splits.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::{Array2, ArrayView1, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::centroids::{generate_centroids, CentroidSet, DEFAULT_ITERATIONS};
use crate::error::{Error, Result};
use crate::ClassId;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    features: Array2<f64>,
    labels: Vec<ClassId>,
    class_set: Vec<ClassId>,
}

impl LabeledDataset {
    pub fn new(features: Array2<f64>, labels: Vec<ClassId>) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(Error::CountMismatch {
                images: features.nrows(),
                labels: labels.len(),
            });
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!(
                "non-finite feature in sample {}",
                pos / features.ncols().max(1)
            )));
        }
        let class_set: Vec<ClassId> = labels
            .iter()
            .copied()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        Ok(Self {
            features,
            labels,
            class_set,
        })
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn sample(&self, i: usize) -> ArrayView1<'_, f64> {
        self.features.row(i)
    }

    pub fn labels(&self) -> &[ClassId] {
        &self.labels
    }

    /// Sorted distinct labels.
    pub fn class_set(&self) -> &[ClassId] {
        &self.class_set
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn class_counts(&self) -> BTreeMap<ClassId, usize> {
        let mut counts = BTreeMap::new();
        for &l in &self.labels {
            *counts.entry(l).or_insert(0) += 1;
        }
        counts
    }

    /// Rows at `indices`, in the given order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        Self::new(self.features.select(Axis(0), indices), labels)
            .expect("a selection of a valid dataset is valid")
    }

    /// Samples whose label is in `classes`, original order kept.
    pub fn filter_classes(&self, classes: &[ClassId]) -> Self {
        let keep: BTreeSet<ClassId> = classes.iter().copied().collect();
        let idx: Vec<usize> = (0..self.len())
            .filter(|&i| keep.contains(&self.labels[i]))
            .collect();
        self.select(&idx)
    }

    /// Writes `label,f0,..,f{d-1}` with shortest round-trip float formatting.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("label");
        for j in 0..self.dim() {
            let _ = write!(out, ",f{j}");
        }
        out.push('\n');
        for (row, label) in self.features.axis_iter(Axis(0)).zip(&self.labels) {
            let _ = write!(out, "{label}");
            for v in row {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Layout of the blob means: unit directions from the centroid generator.
pub fn blob_layout(n_classes: usize, dim: usize, seed: u64) -> Result<CentroidSet> {
    generate_centroids(n_classes, dim, seed, DEFAULT_ITERATIONS)
}

/// `samples_per_class` unit-variance Gaussian samples around each of
/// `separation * layout[c]`, class-major order, labels `0..n_classes`.
pub fn synth_blobs(
    n_classes: usize,
    dim: usize,
    samples_per_class: usize,
    separation: f64,
    seed: u64,
) -> Result<LabeledDataset> {
    if n_classes < 2 {
        return Err(Error::Domain(format!(
            "need at least 2 classes, got {n_classes}"
        )));
    }
    if samples_per_class == 0 {
        return Err(Error::Domain(
            "samples_per_class must be at least 1".to_string(),
        ));
    }
    if !(separation > 0.0 && separation.is_finite()) {
        return Err(Error::Domain(format!(
            "separation must be positive, got {separation}"
        )));
    }
    let layout = blob_layout(n_classes, dim, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let total = n_classes * samples_per_class;
    let mut features = Array2::<f64>::zeros((total, dim));
    let mut labels = Vec::with_capacity(total);
    for c in 0..n_classes {
        let mean = layout.row(c);
        for s in 0..samples_per_class {
            let mut row = features.row_mut(c * samples_per_class + s);
            for (v, &mu) in row.iter_mut().zip(mean.iter()) {
                let noise: f64 = StandardNormal.sample(&mut rng);
                *v = separation * mu + noise;
            }
            labels.push(c as ClassId);
        }
    }
    LabeledDataset::new(features, labels)
}

fn be_u32(bytes: &[u8], offset: usize) -> u32 {
    u32::from_be_bytes(bytes[offset..offset + 4].try_into().expect("4-byte slice"))
}

fn read_idx(path: &Path, magic: u32, header_len: usize) -> Result<Vec<u8>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < header_len {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            expected: header_len,
            found: bytes.len(),
        });
    }
    let found = be_u32(&bytes, 0);
    if found != magic {
        return Err(Error::Format {
            path: path.to_path_buf(),
            reason: format!("bad magic number 0x{found:08x}, expected 0x{magic:08x}"),
        });
    }
    Ok(bytes)
}

fn check_payload(path: &Path, bytes: &[u8], expected: usize) -> Result<()> {
    if bytes.len() < expected {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            expected,
            found: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(Error::Format {
            path: path.to_path_buf(),
            reason: format!("{} trailing bytes after payload", bytes.len() - expected),
        });
    }
    Ok(())
}

/// Reads an IDX image file (`0x00000803`) and label file (`0x00000801`).
/// Pixels are flattened row-major and scaled by 1/255.
pub fn load_idx(images: &Path, labels: &Path) -> Result<LabeledDataset> {
    let img = read_idx(images, IDX_IMAGES_MAGIC, 16)?;
    let count = be_u32(&img, 4) as usize;
    let rows = be_u32(&img, 8) as usize;
    let cols = be_u32(&img, 12) as usize;
    let pixels = rows * cols;
    check_payload(images, &img, 16 + count * pixels)?;

    let lab = read_idx(labels, IDX_LABELS_MAGIC, 8)?;
    let label_count = be_u32(&lab, 4) as usize;
    check_payload(labels, &lab, 8 + label_count)?;
    if label_count != count {
        return Err(Error::CountMismatch {
            images: count,
            labels: label_count,
        });
    }

    let features = Array2::from_shape_vec(
        (count, pixels),
        img[16..].iter().map(|&p| p as f64 / 255.0).collect(),
    )
    .expect("payload length checked");
    let labels = lab[8..].iter().map(|&l| l as ClassId).collect();
    LabeledDataset::new(features, labels)
}

/// Reads a CSV file with mandatory header `label,f0,..,f{d-1}`.
pub fn load_csv(path: &Path) -> Result<LabeledDataset> {
    let format_err = |reason: String| Error::Format {
        path: path.to_path_buf(),
        reason,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => format_err(format!("{other:?}")),
        })?;
    let header = reader
        .headers()
        .map_err(|e| format_err(e.to_string()))?
        .clone();
    if header.get(0) != Some("label") {
        return Err(format_err(
            "first header column must be `label`".to_string(),
        ));
    }
    for (j, name) in header.iter().skip(1).enumerate() {
        if name != format!("f{j}") {
            return Err(format_err(format!(
                "header column {} is `{name}`, expected `f{j}`",
                j + 1
            )));
        }
    }
    let dim = header.len() - 1;
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| format_err(e.to_string()))?;
        if record.len() != dim + 1 {
            return Err(format_err(format!(
                "row {} has {} fields, expected {}",
                line + 1,
                record.len(),
                dim + 1
            )));
        }
        let label: ClassId = record[0]
            .parse()
            .map_err(|e| format_err(format!("row {}: bad label: {e}", line + 1)))?;
        labels.push(label);
        for field in record.iter().skip(1) {
            let v: f64 = field
                .parse()
                .map_err(|e| format_err(format!("row {}: bad value `{field}`: {e}", line + 1)))?;
            values.push(v);
        }
    }
    let features = Array2::from_shape_vec((labels.len(), dim), values).expect("row widths checked");
    LabeledDataset::new(features, labels)
}

/// Per-class proportional split into `(train, test)`; every class keeps at
/// least one sample on each side.
pub fn stratified_split(
    d: &LabeledDataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Split(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let mut by_class: BTreeMap<ClassId, Vec<usize>> = BTreeMap::new();
    for (i, &l) in d.labels().iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (class, mut idx) in by_class {
        if idx.len() < 2 {
            return Err(Error::Split(format!(
                "class {class} has {} sample(s), need at least 2",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        let n_train =
            ((idx.len() as f64 * train_fraction).round() as usize).clamp(1, idx.len() - 1);
        train.extend_from_slice(&idx[..n_train]);
        test.extend_from_slice(&idx[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((d.select(&train), d.select(&test)))
}
