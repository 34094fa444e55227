//! Test-only oracles shared by the integration suites.
#![allow(dead_code)]

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pedcc::centroids::CentroidSet;

/// Central difference of `f` at `x` along every coordinate.
pub fn central_diff(
    x: &Array2<f64>,
    h: f64,
    mut f: impl FnMut(&Array2<f64>) -> f64,
) -> Array2<f64> {
    let mut grad = Array2::zeros(x.dim());
    let mut probe = x.clone();
    for idx in ndarray::indices(x.dim()) {
        let orig = probe[idx];
        probe[idx] = orig + h;
        let up = f(&probe);
        probe[idx] = orig - h;
        let down = f(&probe);
        probe[idx] = orig;
        grad[idx] = (up - down) / (2.0 * h);
    }
    grad
}

/// `|a - b| / max(|a|, |b|, 1e-6)`: relative, with a floor for entries that
/// are zero up to rounding.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

pub fn max_rel_err(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(&x, &y)| rel_err(x, y))
        .fold(0.0, f64::max)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0))
}

/// A random unit vector from normalized Gaussian-ish coordinates.
pub fn unit_vector(rng: &mut ChaCha8Rng, dim: usize) -> Array1<f64> {
    loop {
        let v: Array1<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = v.dot(&v).sqrt();
        if n > 1e-3 {
            return v / n;
        }
    }
}

/// Random centroid set (not evenly spread): `n` random unit rows.
pub fn random_centers(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> CentroidSet {
    let mut rows = Array2::zeros((n, dim));
    for mut r in rows.rows_mut() {
        r.assign(&unit_vector(rng, dim));
    }
    CentroidSet::new(rows, 0).expect("random rows are distinct")
}

/// Cosine by the textbook formula, with no shared code path.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

use pedcc::centroids::generate_centroids;
use pedcc::incremental::EnsembleModel;
use pedcc::netcore::{init_network, Activation, NetworkModel, NetworkSpec};
use pedcc::ClassId;

/// Untrained member over `labels` with freshly seeded weights.
pub fn random_member(
    labels: Vec<ClassId>,
    input_dim: usize,
    feature_dim: usize,
    seed: u64,
) -> NetworkModel {
    let spec = NetworkSpec {
        input_dim,
        hidden_layers: vec![6 + (seed % 3) as usize],
        feature_dim,
        // tanh keeps random features away from the zero vector
        activation: Activation::Tanh,
    };
    let head = generate_centroids(labels.len(), feature_dim, seed, 200).unwrap();
    init_network(&spec, head, labels, seed).unwrap()
}

/// Ensemble of `sizes.len()` members owning consecutive label blocks.
pub fn random_ensemble(sizes: &[usize], input_dim: usize, seed: u64) -> EnsembleModel {
    let mut next = 0 as ClassId;
    let members = sizes
        .iter()
        .enumerate()
        .map(|(j, &n)| {
            let labels: Vec<ClassId> = (next..next + n as ClassId).collect();
            next += n as ClassId;
            random_member(labels, input_dim, 3 + j % 3, seed * 31 + j as u64)
        })
        .collect();
    EnsembleModel::from_members(members).unwrap()
}
