//! Pre-defined class centroids: `N` unit vectors spread evenly over the
//! `M`-dimensional feature hypersphere.
//!
//! When `N <= M + 1` the optimum is the regular simplex and it is built
//! directly, then rotated into a seeded random orientation. Otherwise the
//! points are found by minimizing the Riesz-1 repulsive energy
//! `sum_{i<j} 1 / |c_i - c_j|` with projected gradient descent on the sphere.
//!
//! Stored rows are always rounded to f32 precision so that the on-disk
//! encoding (base64 little-endian f32) round-trips exactly. The rows used for
//! arithmetic are those stored values renormalized in f64, a pure function of
//! the stored bytes.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::codec::{decode_f32, encode_f32, to_f32_precision};
use crate::error::{Error, Result};

pub const CENTROID_FORMAT_VERSION: u32 = 1;

/// Default optimization budget for [`generate_centroids`].
pub const DEFAULT_ITERATIONS: usize = 2000;

/// Early-exit threshold on the largest per-row displacement of a step.
pub const CONVERGENCE_DISPLACEMENT: f64 = 1e-9;

const NORM_TOLERANCE: f64 = 1e-6;
const DUPLICATE_COSINE: f64 = 1.0 - 1e-6;

/// A frozen matrix of class centroids, one unit row per class.
#[derive(Clone, Debug, PartialEq)]
pub struct CentroidSet {
    stored: Array2<f64>,
    rows: Array2<f64>,
    seed: u64,
}

impl CentroidSet {
    /// Validates and stores `rows` (rounded to f32 precision).
    pub fn new(rows: Array2<f64>, seed: u64) -> Result<Self> {
        let stored = rows.mapv(to_f32_precision);
        let (n, m) = stored.dim();
        if n < 2 || m < 2 {
            return Err(Error::InvalidCentroids(format!(
                "need at least 2 classes and 2 dimensions, got {n}x{m}"
            )));
        }
        let mut rows = stored.clone();
        for (i, mut row) in rows.axis_iter_mut(Axis(0)).enumerate() {
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidCentroids(format!("row {i} is not finite")));
            }
            let norm = row.dot(&row).sqrt();
            if (norm - 1.0).abs() > NORM_TOLERANCE {
                return Err(Error::InvalidCentroids(format!(
                    "row {i} has norm {norm}, expected 1"
                )));
            }
            row /= norm;
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let c = rows.row(i).dot(&rows.row(j));
                if c >= DUPLICATE_COSINE {
                    return Err(Error::InvalidCentroids(format!(
                        "rows {i} and {j} coincide (cosine {c})"
                    )));
                }
            }
        }
        Ok(Self { stored, rows, seed })
    }

    /// Unit rows, `N x M`.
    pub fn rows(&self) -> &Array2<f64> {
        &self.rows
    }

    /// The f32-precision values as persisted.
    pub fn stored_rows(&self) -> &Array2<f64> {
        &self.stored
    }

    pub fn row(&self, class: usize) -> ArrayView1<'_, f64> {
        self.rows.row(class)
    }

    pub fn n_classes(&self) -> usize {
        self.rows.nrows()
    }

    pub fn dim(&self) -> usize {
        self.rows.ncols()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Row-major little-endian f32 bytes of the matrix.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.stored
            .iter()
            .flat_map(|&v| (v as f32).to_le_bytes())
            .collect()
    }

    pub fn to_document(&self) -> CentroidDocument {
        CentroidDocument {
            format_version: CENTROID_FORMAT_VERSION,
            n_classes: self.n_classes(),
            dim: self.dim(),
            seed: self.seed,
            rows: encode_f32(self.stored.iter()),
        }
    }

    /// Rebuilds a set from its document; `origin` names the source in errors.
    pub fn from_document(doc: &CentroidDocument, origin: &Path) -> Result<Self> {
        if doc.format_version != CENTROID_FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                path: origin.to_path_buf(),
                found: doc.format_version,
                supported: CENTROID_FORMAT_VERSION,
            });
        }
        let values = decode_f32(&doc.rows, doc.n_classes * doc.dim).map_err(|reason| {
            Error::CorruptedPayload {
                path: origin.to_path_buf(),
                reason,
            }
        })?;
        let rows = Array2::from_shape_vec((doc.n_classes, doc.dim), values)
            .expect("payload length checked against shape");
        Self::new(rows, doc.seed)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.to_document())
            .expect("centroid document serializes");
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let doc: CentroidDocument = serde_json::from_str(&text).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        Self::from_document(&doc, path)
    }
}

/// Serialized form of a [`CentroidSet`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CentroidDocument {
    pub format_version: u32,
    pub n_classes: usize,
    pub dim: usize,
    pub seed: u64,
    /// Base64 of row-major little-endian f32 values.
    pub rows: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GenerationMethod {
    /// Regular simplex in a seeded random orientation.
    Simplex,
    /// Projected gradient descent on the repulsive energy.
    Repulsion,
}

/// How a centroid set was produced.
#[derive(Clone, Debug)]
pub struct GenerationReport {
    pub method: GenerationMethod,
    /// Energy of the initial configuration followed by every accepted step.
    pub energy_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn check_domain(n_classes: usize, dim: usize) -> Result<()> {
    if n_classes < 2 {
        return Err(Error::Domain(format!(
            "need at least 2 classes, got {n_classes}"
        )));
    }
    if dim < 2 {
        return Err(Error::Domain(format!(
            "need at least 2 dimensions, got {dim}"
        )));
    }
    Ok(())
}

/// Axis-aligned regular simplex coordinates: `n` rows in `n - 1` columns.
///
/// Row `i` is `e_i - 1/n` expressed in the Helmert basis of the hyperplane
/// orthogonal to the all-ones vector, then scaled to unit length.
fn helmert_simplex(n: usize) -> Array2<f64> {
    let mut coords = Array2::<f64>::zeros((n, n - 1));
    for k in 1..n {
        let scale = 1.0 / ((k * (k + 1)) as f64).sqrt();
        for i in 0..k {
            coords[[i, k - 1]] = scale;
        }
        coords[[k, k - 1]] = -(k as f64) * scale;
    }
    let radius = ((n - 1) as f64 / n as f64).sqrt();
    coords / radius
}

/// The regular simplex: all pairwise cosines equal `-1 / (n_classes - 1)`.
///
/// Requires `2 <= n_classes <= dim + 1`. The result is axis-aligned and its
/// seed is recorded as 0.
pub fn simplex_centroids(n_classes: usize, dim: usize) -> Result<CentroidSet> {
    check_domain(n_classes, dim)?;
    if n_classes > dim + 1 {
        return Err(Error::InfeasibleSimplex { n_classes, dim });
    }
    let coords = helmert_simplex(n_classes);
    let mut rows = Array2::<f64>::zeros((n_classes, dim));
    rows.slice_mut(ndarray::s![.., ..n_classes - 1])
        .assign(&coords);
    CentroidSet::new(rows, 0)
}

/// Evenly distributed centroids, deterministic per `(n_classes, dim, seed,
/// iterations)`.
pub fn generate_centroids(
    n_classes: usize,
    dim: usize,
    seed: u64,
    iterations: usize,
) -> Result<CentroidSet> {
    generate_centroids_traced(n_classes, dim, seed, iterations).map(|(set, _)| set)
}

/// Like [`generate_centroids`] but also returns the optimization record.
pub fn generate_centroids_traced(
    n_classes: usize,
    dim: usize,
    seed: u64,
    iterations: usize,
) -> Result<(CentroidSet, GenerationReport)> {
    check_domain(n_classes, dim)?;
    if iterations == 0 {
        return Err(Error::Domain("iterations must be at least 1".to_string()));
    }
    if n_classes > dim + 1 {
        return repulsion_centroids(n_classes, dim, seed, iterations);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let frame = random_orthonormal_frame(n_classes - 1, dim, &mut rng);
    let rows = helmert_simplex(n_classes).dot(&frame);
    let energy = riesz_energy(&rows);
    let set = CentroidSet::new(rows, seed)?;
    Ok((
        set,
        GenerationReport {
            method: GenerationMethod::Simplex,
            energy_trace: vec![energy],
            iterations: 0,
            converged: true,
        },
    ))
}

/// Minimizes the Riesz-1 energy from a seeded uniform start, regardless of
/// whether a simplex would fit.
///
/// Each iteration moves every point against its tangential energy gradient,
/// scaled so the largest move equals the current step, and renormalizes. A
/// step that raises the energy is rejected and the step halved; accepted
/// steps grow it by 10%.
pub fn repulsion_centroids(
    n_classes: usize,
    dim: usize,
    seed: u64,
    iterations: usize,
) -> Result<(CentroidSet, GenerationReport)> {
    check_domain(n_classes, dim)?;
    if iterations == 0 {
        return Err(Error::Domain("iterations must be at least 1".to_string()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Array2::<f64>::zeros((n_classes, dim));
    for mut row in points.axis_iter_mut(Axis(0)) {
        loop {
            row.iter_mut()
                .for_each(|v| *v = StandardNormal.sample(&mut rng));
            let norm = row.dot(&row).sqrt();
            if norm > 1e-6 {
                row /= norm;
                break;
            }
        }
    }

    let mut energy = riesz_energy(&points);
    let mut trace = vec![energy];
    let mut step = 0.1;
    let mut converged = false;
    let mut done = 0;

    'outer: while done < iterations {
        let grad = tangent_energy_gradient(&points);
        let gmax = grad
            .axis_iter(Axis(0))
            .map(|g| g.dot(&g).sqrt())
            .fold(0.0, f64::max);
        if gmax == 0.0 {
            converged = true;
            break;
        }
        loop {
            let mut candidate = &points - &(&grad * (step / gmax));
            for mut row in candidate.axis_iter_mut(Axis(0)) {
                let norm = row.dot(&row).sqrt();
                row /= norm;
            }
            let e = riesz_energy(&candidate);
            if e <= energy {
                let displacement = (&candidate - &points)
                    .axis_iter(Axis(0))
                    .map(|d| d.dot(&d).sqrt())
                    .fold(0.0, f64::max);
                points = candidate;
                energy = e;
                trace.push(e);
                done += 1;
                step = (step * 1.1).min(0.5);
                if displacement < CONVERGENCE_DISPLACEMENT {
                    converged = true;
                    break 'outer;
                }
                break;
            }
            step *= 0.5;
            if step < CONVERGENCE_DISPLACEMENT {
                converged = true;
                break 'outer;
            }
        }
    }

    let set = CentroidSet::new(points, seed)?;
    Ok((
        set,
        GenerationReport {
            method: GenerationMethod::Repulsion,
            energy_trace: trace,
            iterations: done,
            converged,
        },
    ))
}

/// `sum_{i<j} 1 / |c_i - c_j|`.
pub fn riesz_energy(points: &Array2<f64>) -> f64 {
    let n = points.nrows();
    let mut total = 0.0;
    for i in 0..n {
        let a = points.row(i);
        for j in (i + 1)..n {
            let b = points.row(j);
            let d2: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum();
            total += 1.0 / d2.sqrt().max(1e-300);
        }
    }
    total
}

/// Energy gradient per point with its radial component removed.
fn tangent_energy_gradient(points: &Array2<f64>) -> Array2<f64> {
    let (n, m) = points.dim();
    let mut grad = Array2::<f64>::zeros((n, m));
    let mut diff = Array1::<f64>::zeros(m);
    for i in 0..n {
        for j in (i + 1)..n {
            diff.assign(&(&points.row(i) - &points.row(j)));
            let d2 = diff.dot(&diff).max(1e-300);
            // d/dc_i of 1/|c_i - c_j| is -(c_i - c_j) / |c_i - c_j|^3
            let w = 1.0 / (d2 * d2.sqrt());
            grad.row_mut(i).scaled_add(-w, &diff);
            grad.row_mut(j).scaled_add(w, &diff);
        }
    }
    for (mut g, p) in grad.axis_iter_mut(Axis(0)).zip(points.axis_iter(Axis(0))) {
        let radial = g.dot(&p);
        g.scaled_add(-radial, &p);
    }
    grad
}

/// `k` orthonormal rows in `dim` dimensions (Haar distributed), `k <= dim`.
fn random_orthonormal_frame(k: usize, dim: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let mut frame = Array2::<f64>::zeros((k, dim));
    let mut i = 0;
    while i < k {
        let mut v: Array1<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        // two passes of modified Gram-Schmidt
        for _ in 0..2 {
            for q in frame.axis_iter(Axis(0)).take(i) {
                let p = v.dot(&q);
                v.scaled_add(-p, &q);
            }
        }
        let norm = v.dot(&v).sqrt();
        if norm < 1e-8 {
            continue;
        }
        frame.row_mut(i).assign(&(v / norm));
        i += 1;
    }
    frame
}

/// Separation summary of a centroid set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CentroidStats {
    pub min_angle_deg: f64,
    pub max_cosine: f64,
    pub row_sum_norm: f64,
}

pub fn centroid_stats(c: &CentroidSet) -> CentroidStats {
    let rows = c.rows();
    let n = rows.nrows();
    let mut max_cosine = f64::NEG_INFINITY;
    for i in 0..n {
        for j in (i + 1)..n {
            max_cosine = max_cosine.max(rows.row(i).dot(&rows.row(j)));
        }
    }
    let sum = rows.sum_axis(Axis(0));
    CentroidStats {
        min_angle_deg: max_cosine.clamp(-1.0, 1.0).acos().to_degrees(),
        max_cosine,
        row_sum_norm: sum.dot(&sum).sqrt(),
    }
}
