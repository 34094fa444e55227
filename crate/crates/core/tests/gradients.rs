//! Analytic gradients against central finite differences.

mod common;

use common::{central_diff, max_rel_err, random_centers, rng, uniform_matrix};
use ndarray::{Array2, Axis};
use rand::Rng;

use pedcc::centroids::generate_centroids;
use pedcc::loss::{am_softmax_loss, pedcc_loss, LossConfig};
use pedcc::netcore::{init_network, Activation, DenseLayer, NetworkModel, NetworkSpec};

const STEP: f64 = 1e-4;
const TOLERANCE: f64 = 1e-4;

#[test]
fn pedcc_loss_feature_gradient() {
    for seed in 0..4u64 {
        for &root in &[1.0, 2.0] {
            for &margin in &[0.0, 0.35] {
                for &scale in &[1.0, 10.0] {
                    let mut r = rng(seed);
                    let centers = random_centers(&mut r, 5, 6);
                    let features = uniform_matrix(&mut r, 8, 6);
                    let labels: Vec<usize> = (0..8).map(|_| r.random_range(0..5)).collect();
                    let cfg = LossConfig {
                        scale,
                        margin,
                        root,
                    };
                    let analytic = pedcc_loss(features.view(), &labels, &centers, &cfg)
                        .unwrap()
                        .grad_wrt_features;
                    let numeric = central_diff(&features, STEP, |f| {
                        pedcc_loss(f.view(), &labels, &centers, &cfg).unwrap().total
                    });
                    let err = max_rel_err(&analytic, &numeric);
                    assert!(
                        err < TOLERANCE,
                        "seed {seed} n={root} m={margin} s={scale}: rel err {err}"
                    );
                }
            }
        }
    }
}

#[test]
fn am_softmax_logit_gradient() {
    let mut r = rng(11);
    let logits = uniform_matrix(&mut r, 6, 4);
    let labels = [0, 3, 2, 1, 1, 0];
    let cfg = LossConfig {
        scale: 10.0,
        margin: 0.35,
        root: 1.0,
    };
    let analytic = am_softmax_loss(logits.view(), &labels, &cfg)
        .unwrap()
        .grad_logits;
    let numeric = central_diff(&logits, STEP, |l| {
        am_softmax_loss(l.view(), &labels, &cfg).unwrap().value
    });
    assert!(max_rel_err(&analytic, &numeric) < TOLERANCE);
}

fn network_loss(model: &NetworkModel, x: &Array2<f64>, labels: &[usize], cfg: &LossConfig) -> f64 {
    let f = model.features(x.view()).unwrap();
    pedcc_loss(f.view(), labels, model.head(), cfg)
        .unwrap()
        .total
}

fn check_network(activation: Activation, seed: u64) {
    let spec = NetworkSpec {
        input_dim: 5,
        hidden_layers: vec![7],
        feature_dim: 4,
        activation,
    };
    let head = generate_centroids(3, 4, seed, 100).unwrap();
    let model = init_network(&spec, head, vec![0, 1, 2], seed).unwrap();
    let mut r = rng(100 + seed);
    let x = uniform_matrix(&mut r, 8, 5);
    let labels: Vec<usize> = (0..8).map(|i| i % 3).collect();
    let cfg = LossConfig::default();

    let (features, cache) = model.forward(x.view()).unwrap();
    let upstream = pedcc_loss(features.view(), &labels, model.head(), &cfg)
        .unwrap()
        .grad_wrt_features;
    let grads = model.backward(&cache, upstream.view()).unwrap();
    assert!(grads.matches(model.layers()));

    for (l, g) in grads.layers.iter().enumerate() {
        let numeric_w = central_diff(&model.layers()[l].weight, STEP, |w| {
            let mut m = model.clone();
            m.layers_mut()[l].weight.assign(w);
            network_loss(&m, &x, &labels, &cfg)
        });
        let err = max_rel_err(&g.weight, &numeric_w);
        assert!(
            err < TOLERANCE,
            "{activation:?} seed {seed} layer {l} weight: {err}"
        );

        let bias = model.layers()[l].bias.clone().insert_axis(Axis(0));
        let numeric_b = central_diff(&bias, STEP, |b| {
            let mut m = model.clone();
            m.layers_mut()[l].bias.assign(&b.row(0));
            network_loss(&m, &x, &labels, &cfg)
        });
        let err = max_rel_err(&g.bias.clone().insert_axis(Axis(0)), &numeric_b);
        assert!(
            err < TOLERANCE,
            "{activation:?} seed {seed} layer {l} bias: {err}"
        );
    }
}

#[test]
fn network_parameter_gradients_tanh() {
    for seed in 0..3 {
        check_network(Activation::Tanh, seed);
    }
}

#[test]
fn network_parameter_gradients_relu() {
    for seed in 0..3 {
        check_network(Activation::Relu, seed);
    }
}

#[test]
fn linear_layer_matches_least_squares_gradient() {
    // L = 1/2 sum |W x + b - t|^2  =>  dW = (Y - T)^T X,  db = sum (Y - T)
    let spec = NetworkSpec {
        input_dim: 3,
        hidden_layers: vec![],
        feature_dim: 2,
        activation: Activation::Identity,
    };
    let head = generate_centroids(2, 2, 0, 10).unwrap();
    let mut r = rng(5);
    let layer = DenseLayer {
        weight: uniform_matrix(&mut r, 2, 3),
        bias: uniform_matrix(&mut r, 1, 2).row(0).to_owned(),
    };
    let model = NetworkModel::from_parts(spec, vec![layer.clone()], head, vec![0, 1]).unwrap();
    let x = uniform_matrix(&mut r, 10, 3);
    let t = uniform_matrix(&mut r, 10, 2);
    let (y, cache) = model.forward(x.view()).unwrap();
    let residual = &y - &t;
    let grads = model.backward(&cache, residual.view()).unwrap();

    let closed_w = residual.t().dot(&x);
    let closed_b = residual.sum_axis(Axis(0));
    assert!((&grads.layers[0].weight - &closed_w)
        .iter()
        .all(|d| d.abs() < 1e-12));
    assert!((&grads.layers[0].bias - &closed_b)
        .iter()
        .all(|d| d.abs() < 1e-12));
}
