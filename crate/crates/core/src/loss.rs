//! PEDCC loss: additive-margin softmax over cosine logits plus the `n`-th
//! root of the squared distance between normalized features and their class
//! centroids.
//!
//! ```text
//! L_am  = -(1/B) sum_i log( e^{s(cos_iy - m)} / (e^{s(cos_iy - m)} + sum_{j != y} e^{s cos_ij}) )
//! L_mse = 1/2 sum_i |u_i - c_{y_i}|^2          u_i = x_i / |x_i|
//! L     = L_am + L_mse^{1/n}
//! ```
//!
//! `L_mse` is a sum over the batch, not a mean. At `L_mse = 0` the root has an
//! unbounded derivative for `n > 1`; its gradient is taken to be 0 there.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::centroids::CentroidSet;
use crate::error::{Error, Result};
use crate::netcore::MIN_FEATURE_NORM;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    /// Logit scale `s > 0`.
    pub scale: f64,
    /// Additive margin `m` in `[0, 1)` subtracted from the true-class cosine.
    pub margin: f64,
    /// Root order `n >= 1` applied to the centroid-regression term.
    pub root: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            scale: 10.0,
            margin: 0.35,
            root: 2.0,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::Config(format!(
                "scale must be positive, got {}",
                self.scale
            )));
        }
        if !(0.0..1.0).contains(&self.margin) {
            return Err(Error::Config(format!(
                "margin must lie in [0, 1), got {}",
                self.margin
            )));
        }
        if !(self.root >= 1.0 && self.root.is_finite()) {
            return Err(Error::Config(format!(
                "root must be >= 1, got {}",
                self.root
            )));
        }
        Ok(())
    }
}

fn check_labels(labels: &[usize], batch: usize, n_classes: usize) -> Result<()> {
    if batch == 0 {
        return Err(Error::Domain("empty batch".to_string()));
    }
    if labels.len() != batch {
        return Err(Error::Domain(format!(
            "{} labels for a batch of {batch}",
            labels.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
        return Err(Error::Domain(format!(
            "label {bad} out of range for {n_classes} classes"
        )));
    }
    Ok(())
}

fn check_dim(features: &ArrayView2<'_, f64>, centers: &CentroidSet) -> Result<()> {
    if features.ncols() != centers.dim() {
        return Err(Error::DimensionMismatch {
            what: "feature width vs centroid dim",
            expected: centers.dim(),
            found: features.ncols(),
        });
    }
    Ok(())
}

/// Row-normalized features and the original row norms.
fn normalize_rows(features: ArrayView2<'_, f64>) -> Result<(Array2<f64>, Array1<f64>)> {
    let norms: Array1<f64> = features
        .axis_iter(Axis(0))
        .map(|r| r.dot(&r).sqrt())
        .collect();
    if let Some(&norm) = norms.iter().find(|&&n| !(n > MIN_FEATURE_NORM)) {
        return Err(Error::DegenerateFeature { norm });
    }
    let unit = &features / &norms.view().insert_axis(Axis(1));
    Ok((unit, norms))
}

/// `B x N` matrix of cosines between each feature and each centroid.
pub fn cosine_logits(features: ArrayView2<'_, f64>, centers: &CentroidSet) -> Result<Array2<f64>> {
    check_dim(&features, centers)?;
    let (unit, _) = normalize_rows(features)?;
    Ok(unit.dot(&centers.rows().t()))
}

#[derive(Clone, Debug)]
pub struct AmSoftmax {
    pub value: f64,
    /// dL/dlogits, `B x N`.
    pub grad_logits: Array2<f64>,
}

/// Batch-mean additive-margin softmax cross-entropy over cosine logits.
pub fn am_softmax_loss(
    logits: ArrayView2<'_, f64>,
    labels: &[usize],
    cfg: &LossConfig,
) -> Result<AmSoftmax> {
    let (batch, n) = logits.dim();
    check_labels(labels, batch, n)?;
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("logits must be finite".to_string()));
    }
    let s = cfg.scale;
    let inv_b = 1.0 / batch as f64;
    let mut total = 0.0;
    let mut grad = Array2::<f64>::zeros((batch, n));
    let mut z = vec![0.0; n];
    for (i, (row, &y)) in logits.axis_iter(Axis(0)).zip(labels).enumerate() {
        for (j, (zj, &c)) in z.iter_mut().zip(row.iter()).enumerate() {
            *zj = if j == y { s * (c - cfg.margin) } else { s * c };
        }
        let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = z.iter().map(|&v| (v - max).exp()).sum();
        let lse = max + sum.ln();
        total += lse - z[y];
        for (j, &zj) in z.iter().enumerate() {
            let p = (zj - lse).exp();
            let target = if j == y { 1.0 } else { 0.0 };
            grad[[i, j]] = s * (p - target) * inv_b;
        }
    }
    Ok(AmSoftmax {
        value: total * inv_b,
        grad_logits: grad,
    })
}

#[derive(Clone, Debug)]
pub struct MseCenter {
    /// `1/2 sum_i |x_i - c_{y_i}|^2`.
    pub value: f64,
    pub per_sample: Array1<f64>,
    /// dL/dfeatures, `B x M`.
    pub grad: Array2<f64>,
}

/// Half squared distance of each feature to its class centroid, summed over
/// the batch. Features are used as given; normalize them first.
pub fn mse_center_loss(
    features: ArrayView2<'_, f64>,
    labels: &[usize],
    centers: &CentroidSet,
) -> Result<MseCenter> {
    check_dim(&features, centers)?;
    check_labels(labels, features.nrows(), centers.n_classes())?;
    let mut grad = features.to_owned();
    for (mut r, &y) in grad.axis_iter_mut(Axis(0)).zip(labels) {
        r -= &centers.row(y);
    }
    let per_sample: Array1<f64> = grad.axis_iter(Axis(0)).map(|r| 0.5 * r.dot(&r)).collect();
    Ok(MseCenter {
        value: per_sample.sum(),
        per_sample,
        grad,
    })
}

#[derive(Clone, Debug)]
pub struct LossValue {
    pub total: f64,
    pub am_component: f64,
    /// `L_mse` before the root.
    pub mse_component_raw: f64,
    /// `L_mse^{1/n}`.
    pub mse_root_term: f64,
    /// dL/dx for the raw (unnormalized) features, `B x M`.
    pub grad_wrt_features: Array2<f64>,
    /// Cosine logits, handy for accuracy bookkeeping.
    pub logits: Array2<f64>,
}

/// Full loss and its gradient with respect to the raw latent features.
pub fn pedcc_loss(
    features: ArrayView2<'_, f64>,
    labels: &[usize],
    centers: &CentroidSet,
    cfg: &LossConfig,
) -> Result<LossValue> {
    cfg.validate()?;
    check_dim(&features, centers)?;
    check_labels(labels, features.nrows(), centers.n_classes())?;
    let (unit, norms) = normalize_rows(features)?;
    let logits = unit.dot(&centers.rows().t());
    let am = am_softmax_loss(logits.view(), labels, cfg)?;
    let mse = mse_center_loss(unit.view(), labels, centers)?;

    let raw = mse.value;
    let inv_n = 1.0 / cfg.root;
    let (root_term, root_slope) = if raw > 0.0 {
        (raw.powf(inv_n), inv_n * raw.powf(inv_n - 1.0))
    } else if cfg.root == 1.0 {
        (0.0, 1.0)
    } else {
        (0.0, 0.0)
    };

    // dL/du, then through u = x / |x|: dL/dx = (g - (g.u) u) / |x|
    let mut grad = am.grad_logits.dot(centers.rows());
    grad.scaled_add(root_slope, &mse.grad);
    for ((mut g, u), &norm) in grad
        .axis_iter_mut(Axis(0))
        .zip(unit.axis_iter(Axis(0)))
        .zip(norms.iter())
    {
        let radial = g.dot(&u);
        g.scaled_add(-radial, &u);
        g /= norm;
    }

    Ok(LossValue {
        total: am.value + root_term,
        am_component: am.value,
        mse_component_raw: raw,
        mse_root_term: root_term,
        grad_wrt_features: grad,
        logits,
    })
}
