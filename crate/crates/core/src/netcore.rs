//! Dense feed-forward feature extractor with a frozen centroid head.
//!
//! The trainable part maps `input_dim` to `feature_dim` through the hidden
//! layers (each followed by the activation) and a final linear feature layer.
//! The head is a [`CentroidSet`] that is stored, never updated, and has no
//! entry in the parameter or gradient lists.

use std::collections::HashSet;
use std::sync::atomic::{AtomicU64, Ordering};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::centroids::CentroidSet;
use crate::codec::to_f32_precision;
use crate::error::{Error, Result};
use crate::ClassId;

/// Features with a smaller norm have no usable direction.
pub const MIN_FEATURE_NORM: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_dim: usize,
    #[serde(default)]
    pub hidden_layers: Vec<usize>,
    /// Latent width; must equal the head's centroid dimension.
    pub feature_dim: usize,
    #[serde(default)]
    pub activation: Activation,
}

impl NetworkSpec {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.feature_dim == 0 || self.hidden_layers.contains(&0) {
            return Err(Error::Config(format!(
                "all layer widths must be at least 1: input {}, hidden {:?}, feature {}",
                self.input_dim, self.hidden_layers, self.feature_dim
            )));
        }
        Ok(())
    }

    /// `(fan_in, fan_out)` for every trainable layer, input side first.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut widths = Vec::with_capacity(self.hidden_layers.len() + 2);
        widths.push(self.input_dim);
        widths.extend_from_slice(&self.hidden_layers);
        widths.push(self.feature_dim);
        widths.windows(2).map(|w| (w[0], w[1])).collect()
    }
}

/// One affine layer; `weight` is `(fan_out, fan_in)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl DenseLayer {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            weight: Array2::zeros((fan_out, fan_in)),
            bias: Array1::zeros(fan_out),
        }
    }

    pub fn fan_in(&self) -> usize {
        self.weight.ncols()
    }

    pub fn fan_out(&self) -> usize {
        self.weight.nrows()
    }

    fn same_shape(&self, other: &DenseLayer) -> bool {
        self.weight.dim() == other.weight.dim() && self.bias.len() == other.bias.len()
    }
}

/// Per-layer gradients, shaped like the trainable parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<DenseLayer>,
}

impl Gradients {
    pub fn zeros_like(layers: &[DenseLayer]) -> Self {
        Self {
            layers: layers
                .iter()
                .map(|l| DenseLayer::zeros(l.fan_in(), l.fan_out()))
                .collect(),
        }
    }

    /// Whether every layer matches `params` in shape.
    pub fn matches(&self, params: &[DenseLayer]) -> bool {
        self.layers.len() == params.len()
            && self.layers.iter().zip(params).all(|(g, p)| g.same_shape(p))
    }
}

static NEXT_MODEL_ID: AtomicU64 = AtomicU64::new(1);

fn fresh_id() -> u64 {
    NEXT_MODEL_ID.fetch_add(1, Ordering::Relaxed)
}

/// Activations retained by [`NetworkModel::forward`] for the matching
/// [`NetworkModel::backward`] call.
#[derive(Debug)]
pub struct ForwardCache {
    model_id: u64,
    revision: u64,
    // input to each layer, the batch first
    inputs: Vec<Array2<f64>>,
    // pre-activation of each hidden layer
    pre_activations: Vec<Array2<f64>>,
}

impl ForwardCache {
    pub fn batch_size(&self) -> usize {
        self.inputs[0].nrows()
    }
}

/// One trained (or trainable) network of the ensemble.
#[derive(Debug)]
pub struct NetworkModel {
    spec: NetworkSpec,
    layers: Vec<DenseLayer>,
    head: CentroidSet,
    label_map: Vec<ClassId>,
    id: u64,
    revision: u64,
}

impl Clone for NetworkModel {
    fn clone(&self) -> Self {
        Self {
            spec: self.spec.clone(),
            layers: self.layers.clone(),
            head: self.head.clone(),
            label_map: self.label_map.clone(),
            id: fresh_id(),
            revision: 0,
        }
    }
}

impl PartialEq for NetworkModel {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
            && self.layers == other.layers
            && self.head == other.head
            && self.label_map == other.label_map
    }
}

fn check_head(spec: &NetworkSpec, head: &CentroidSet, label_map: &[ClassId]) -> Result<()> {
    spec.validate()?;
    if spec.feature_dim != head.dim() {
        return Err(Error::DimensionMismatch {
            what: "feature_dim vs head dim",
            expected: head.dim(),
            found: spec.feature_dim,
        });
    }
    if label_map.len() != head.n_classes() {
        return Err(Error::DimensionMismatch {
            what: "label map length vs head classes",
            expected: head.n_classes(),
            found: label_map.len(),
        });
    }
    let mut seen = HashSet::new();
    if let Some(dup) = label_map.iter().find(|l| !seen.insert(**l)) {
        return Err(Error::Contract(format!(
            "label {dup} appears twice in label map"
        )));
    }
    Ok(())
}

/// Seeded scaled-uniform initialization, weights in `±sqrt(6 / (fan_in +
/// fan_out))` and zero biases.
pub fn init_network(
    spec: &NetworkSpec,
    head: CentroidSet,
    label_map: Vec<ClassId>,
    seed: u64,
) -> Result<NetworkModel> {
    check_head(spec, &head, &label_map)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = spec
        .layer_shapes()
        .into_iter()
        .map(|(fan_in, fan_out)| {
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let weight = Array2::from_shape_fn((fan_out, fan_in), |_| {
                to_f32_precision(rng.random_range(-bound..bound))
            });
            DenseLayer {
                weight,
                bias: Array1::zeros(fan_out),
            }
        })
        .collect();
    Ok(NetworkModel {
        spec: spec.clone(),
        layers,
        head,
        label_map,
        id: fresh_id(),
        revision: 0,
    })
}

/// Unit vector along `x`; errors when `|x| <= 1e-12`.
pub fn normalize_feature(x: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
    let norm = x.dot(&x).sqrt();
    if !(norm > MIN_FEATURE_NORM) {
        return Err(Error::DegenerateFeature { norm });
    }
    Ok(x.mapv(|v| v / norm))
}

impl NetworkModel {
    /// Assembles a model from explicit parameters.
    pub fn from_parts(
        spec: NetworkSpec,
        layers: Vec<DenseLayer>,
        head: CentroidSet,
        label_map: Vec<ClassId>,
    ) -> Result<Self> {
        check_head(&spec, &head, &label_map)?;
        let shapes = spec.layer_shapes();
        if shapes.len() != layers.len() {
            return Err(Error::DimensionMismatch {
                what: "layer count",
                expected: shapes.len(),
                found: layers.len(),
            });
        }
        for ((fan_in, fan_out), layer) in shapes.iter().zip(&layers) {
            if layer.weight.dim() != (*fan_out, *fan_in) || layer.bias.len() != *fan_out {
                return Err(Error::Contract(format!(
                    "layer shape {:?}/{} does not match spec ({fan_out}, {fan_in})",
                    layer.weight.dim(),
                    layer.bias.len()
                )));
            }
        }
        Ok(Self {
            spec,
            layers,
            head,
            label_map,
            id: fresh_id(),
            revision: 0,
        })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn head(&self) -> &CentroidSet {
        &self.head
    }

    pub fn label_map(&self) -> &[ClassId] {
        &self.label_map
    }

    pub fn input_dim(&self) -> usize {
        self.spec.input_dim
    }

    pub fn n_classes(&self) -> usize {
        self.head.n_classes()
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    /// Mutable access to the trainable parameters. Invalidates outstanding
    /// forward caches.
    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        self.revision += 1;
        &mut self.layers
    }

    /// Rounds every parameter to f32 precision, the precision they persist at.
    pub fn snap_to_f32(&mut self) {
        for layer in self.layers_mut() {
            layer.weight.mapv_inplace(to_f32_precision);
            layer.bias.mapv_inplace(to_f32_precision);
        }
    }

    fn check_width(&self, batch: &ArrayView2<'_, f64>) -> Result<()> {
        if batch.ncols() != self.spec.input_dim {
            return Err(Error::DimensionMismatch {
                what: "input width",
                expected: self.spec.input_dim,
                found: batch.ncols(),
            });
        }
        Ok(())
    }

    /// Latent features for a batch, without retaining activations.
    pub fn features(&self, batch: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_width(&batch)?;
        let mut a = batch.to_owned();
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = a.dot(&layer.weight.t()) + &layer.bias;
            if l < last {
                let act = self.spec.activation;
                z.mapv_inplace(|v| act.apply(v));
            }
            a = z;
        }
        Ok(a)
    }

    /// Latent features plus the activations needed by [`Self::backward`].
    pub fn forward(&self, batch: ArrayView2<'_, f64>) -> Result<(Array2<f64>, ForwardCache)> {
        self.check_width(&batch)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre_activations = Vec::with_capacity(self.layers.len() - 1);
        let mut a = batch.to_owned();
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let z = a.dot(&layer.weight.t()) + &layer.bias;
            inputs.push(a);
            if l < last {
                let act = self.spec.activation;
                a = z.mapv(|v| act.apply(v));
                pre_activations.push(z);
            } else {
                a = z;
            }
        }
        Ok((
            a,
            ForwardCache {
                model_id: self.id,
                revision: self.revision,
                inputs,
                pre_activations,
            },
        ))
    }

    /// Backpropagates `grad_features` (dLoss/dFeatures, `B x M`) to every
    /// trainable parameter.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        grad_features: ArrayView2<'_, f64>,
    ) -> Result<Gradients> {
        if cache.model_id != self.id || cache.revision != self.revision {
            return Err(Error::Contract(
                "forward cache is stale or belongs to another model".to_string(),
            ));
        }
        let expected = (cache.batch_size(), self.spec.feature_dim);
        if grad_features.dim() != expected {
            return Err(Error::Contract(format!(
                "upstream gradient shape {:?} does not match {:?}",
                grad_features.dim(),
                expected
            )));
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut delta = grad_features.to_owned();
        for l in (0..self.layers.len()).rev() {
            let input = &cache.inputs[l];
            let weight = delta.t().dot(input);
            let bias = delta.sum_axis(Axis(0));
            if l > 0 {
                let mut upstream = delta.dot(&self.layers[l].weight);
                let act = self.spec.activation;
                upstream.zip_mut_with(&cache.pre_activations[l - 1], |g, &z| {
                    *g *= act.derivative(z)
                });
                delta = upstream;
            }
            grads.push(DenseLayer { weight, bias });
        }
        grads.reverse();
        Ok(Gradients { layers: grads })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::centroids::{generate_centroids, simplex_centroids};
    use ndarray::array;

    fn spec(input: usize, hidden: Vec<usize>, feature: usize) -> NetworkSpec {
        NetworkSpec {
            input_dim: input,
            hidden_layers: hidden,
            feature_dim: feature,
            activation: Activation::Relu,
        }
    }

    #[test]
    fn init_is_deterministic() {
        let head = generate_centroids(4, 6, 3, 100).unwrap();
        let s = spec(5, vec![7], 6);
        let a = init_network(&s, head.clone(), vec![0, 1, 2, 3], 42).unwrap();
        let b = init_network(&s, head, vec![0, 1, 2, 3], 42).unwrap();
        assert_eq!(a, b);
        let bound = (6.0f64 / 12.0).sqrt();
        assert!(a.layers()[0].weight.iter().all(|w| w.abs() <= bound));
    }

    #[test]
    fn head_dimension_mismatch() {
        let head = generate_centroids(3, 16, 0, 10).unwrap();
        let err = init_network(&spec(4, vec![], 8), head, vec![0, 1, 2], 0).unwrap_err();
        assert!(matches!(
            err,
            Error::DimensionMismatch {
                expected: 16,
                found: 8,
                ..
            }
        ));
    }

    #[test]
    fn duplicate_labels_rejected() {
        let head = simplex_centroids(3, 3).unwrap();
        let err = init_network(&spec(2, vec![], 3), head, vec![4, 4, 5], 0).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
    }

    #[test]
    fn no_hidden_layers_is_linear() {
        let head = simplex_centroids(3, 3).unwrap();
        let m = init_network(&spec(3, vec![], 3), head, vec![0, 1, 2], 1).unwrap();
        assert_eq!(m.layers().len(), 1);
        let x = array![[1.0, 2.0, 3.0]];
        let y = m.features(x.view()).unwrap();
        let expected = x.dot(&m.layers()[0].weight.t());
        assert_eq!(y, expected);
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let head = simplex_centroids(3, 3).unwrap();
        let layer = DenseLayer {
            weight: Array2::eye(3),
            bias: Array1::zeros(3),
        };
        let m =
            NetworkModel::from_parts(spec(3, vec![], 3), vec![layer], head, vec![0, 1, 2]).unwrap();
        let x = array![[0.5, -1.5, 2.0], [3.0, 0.0, -4.0]];
        assert_eq!(m.features(x.view()).unwrap(), x);
    }

    #[test]
    fn hand_computed_hidden_layer() {
        // x = (1, 2); hidden W = [[1, -1], [2, 0.5]], b = (0.5, -1)
        //   z = (1 - 2 + 0.5, 2 + 1 - 1) = (-0.5, 2) -> relu (0, 2)
        // out W = [[1, 1], [-1, 3]], b = (0, 1) -> (2, 7)
        let head = simplex_centroids(2, 2).unwrap();
        let hidden = DenseLayer {
            weight: array![[1.0, -1.0], [2.0, 0.5]],
            bias: array![0.5, -1.0],
        };
        let out = DenseLayer {
            weight: array![[1.0, 1.0], [-1.0, 3.0]],
            bias: array![0.0, 1.0],
        };
        let m = NetworkModel::from_parts(spec(2, vec![2], 2), vec![hidden, out], head, vec![0, 1])
            .unwrap();
        let y = m.features(array![[1.0, 2.0]].view()).unwrap();
        assert_eq!(y, array![[2.0, 7.0]]);
    }

    #[test]
    fn width_mismatch_is_rejected() {
        let head = simplex_centroids(2, 2).unwrap();
        let m = init_network(&spec(3, vec![4], 2), head, vec![0, 1], 0).unwrap();
        assert!(matches!(
            m.forward(Array2::zeros((2, 4)).view()),
            Err(Error::DimensionMismatch {
                expected: 3,
                found: 4,
                ..
            })
        ));
    }

    #[test]
    fn normalize_examples() {
        let u = normalize_feature(array![3.0, 4.0].view()).unwrap();
        assert!((u[0] - 0.6).abs() < 1e-12 && (u[1] - 0.8).abs() < 1e-12);
        let e = array![0.0, 1.0, 0.0];
        let v = normalize_feature(e.view()).unwrap();
        assert!((&v - &e).iter().all(|d| d.abs() < 1e-9));
        assert!(matches!(
            normalize_feature(array![0.0, 0.0].view()),
            Err(Error::DegenerateFeature { .. })
        ));
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let head = generate_centroids(3, 4, 0, 10).unwrap();
        let m = init_network(&spec(5, vec![6, 3], 4), head, vec![0, 1, 2], 7).unwrap();
        let x = Array2::from_shape_fn((4, 5), |(i, j)| (i as f64 - j as f64) * 0.3);
        let (_, cache) = m.forward(x.view()).unwrap();
        let g = m.backward(&cache, Array2::zeros((4, 4)).view()).unwrap();
        assert!(g.matches(m.layers()));
        assert!(g
            .layers
            .iter()
            .all(|l| l.weight.iter().chain(l.bias.iter()).all(|&v| v == 0.0)));
    }

    #[test]
    fn stale_cache_is_rejected() {
        let head = generate_centroids(3, 4, 0, 10).unwrap();
        let mut m = init_network(&spec(2, vec![3], 4), head, vec![0, 1, 2], 7).unwrap();
        let other = m.clone();
        let x = Array2::ones((2, 2));
        let (_, cache) = m.forward(x.view()).unwrap();
        assert!(matches!(
            other.backward(&cache, Array2::zeros((2, 4)).view()),
            Err(Error::Contract(_))
        ));
        m.layers_mut()[0].bias[0] = 1.0;
        assert!(matches!(
            m.backward(&cache, Array2::zeros((2, 4)).view()),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn upstream_shape_is_checked() {
        let head = generate_centroids(3, 4, 0, 10).unwrap();
        let m = init_network(&spec(2, vec![], 4), head, vec![0, 1, 2], 7).unwrap();
        let (_, cache) = m.forward(Array2::ones((2, 2)).view()).unwrap();
        assert!(m.backward(&cache, Array2::zeros((3, 4)).view()).is_err());
    }
}
