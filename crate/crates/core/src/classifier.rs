//! Cosine discriminant classification.
//!
//! The discriminant for class `i` is `g_i(x) = w_i . x / (|w_i| |x|)`, the
//! cosine between the latent feature and centroid `i`; the prediction is its
//! argmax. Ties always go to the lowest index: lowest local index inside a
//! network, lowest network index across an ensemble.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::centroids::CentroidSet;
use crate::error::{Error, Result};
use crate::netcore::{normalize_feature, NetworkModel};
use crate::ClassId;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prediction {
    pub global_label: ClassId,
    /// Ensemble member that produced the winning score; 0 for single models.
    pub network_index: usize,
    /// Winning row of that member's head.
    pub local_index: usize,
    /// The winning cosine similarity.
    pub score: f64,
}

/// Cosine similarity of `feature` with every centroid.
pub fn discriminant_scores(
    feature: ArrayView1<'_, f64>,
    centers: &CentroidSet,
) -> Result<Array1<f64>> {
    if feature.len() != centers.dim() {
        return Err(Error::DimensionMismatch {
            what: "feature width vs centroid dim",
            expected: centers.dim(),
            found: feature.len(),
        });
    }
    let unit = normalize_feature(feature)?;
    Ok(centers.rows().dot(&unit))
}

/// Score matrix `B x N` for a batch of samples pushed through `model`.
fn batch_scores(model: &NetworkModel, samples: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let features = model.features(samples)?;
    let mut scores = Array2::zeros((features.nrows(), model.n_classes()));
    for (f, mut out) in features
        .axis_iter(Axis(0))
        .zip(scores.axis_iter_mut(Axis(0)))
    {
        out.assign(&discriminant_scores(f, model.head())?);
    }
    Ok(scores)
}

/// First maximum over `candidates` (visited in the given order).
fn best_of(scores: ArrayView1<'_, f64>, candidates: impl Iterator<Item = usize>) -> (usize, f64) {
    let mut best = (usize::MAX, f64::NEG_INFINITY);
    for i in candidates {
        if scores[i] > best.1 || best.0 == usize::MAX {
            best = (i, scores[i]);
        }
    }
    best
}

fn as_batch(sample: ArrayView1<'_, f64>) -> ArrayView2<'_, f64> {
    sample.insert_axis(Axis(0))
}

pub fn predict(model: &NetworkModel, sample: ArrayView1<'_, f64>) -> Result<Prediction> {
    Ok(predict_batch(model, as_batch(sample))?[0])
}

pub fn predict_batch(
    model: &NetworkModel,
    samples: ArrayView2<'_, f64>,
) -> Result<Vec<Prediction>> {
    let scores = batch_scores(model, samples)?;
    Ok(scores
        .axis_iter(Axis(0))
        .map(|row| {
            let (local, score) = best_of(row, 0..row.len());
            Prediction {
                global_label: model.label_map()[local],
                network_index: 0,
                local_index: local,
                score,
            }
        })
        .collect())
}

fn sorted_subset(model: &NetworkModel, subset: &[usize]) -> Result<Vec<usize>> {
    if subset.is_empty() {
        return Err(Error::Domain("subset must not be empty".to_string()));
    }
    let mut sorted = subset.to_vec();
    sorted.sort_unstable();
    if let Some(&bad) = sorted.iter().find(|&&i| i >= model.n_classes()) {
        return Err(Error::Domain(format!(
            "subset index {bad} out of range for {} classes",
            model.n_classes()
        )));
    }
    if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::Domain(format!("subset index {} repeated", w[0])));
    }
    Ok(sorted)
}

/// Prediction restricted to the head rows listed in `subset` (local indices).
pub fn subset_predict(
    model: &NetworkModel,
    sample: ArrayView1<'_, f64>,
    subset: &[usize],
) -> Result<Prediction> {
    Ok(subset_predict_batch(model, as_batch(sample), subset)?[0])
}

pub fn subset_predict_batch(
    model: &NetworkModel,
    samples: ArrayView2<'_, f64>,
    subset: &[usize],
) -> Result<Vec<Prediction>> {
    let subset = sorted_subset(model, subset)?;
    let scores = batch_scores(model, samples)?;
    Ok(scores
        .axis_iter(Axis(0))
        .map(|row| {
            let (local, score) = best_of(row, subset.iter().copied());
            Prediction {
                global_label: model.label_map()[local],
                network_index: 0,
                local_index: local,
                score,
            }
        })
        .collect())
}

fn check_members(members: &[NetworkModel]) -> Result<()> {
    let first = members
        .first()
        .ok_or_else(|| Error::Domain("ensemble has no members".to_string()))?;
    if let Some((j, m)) = members
        .iter()
        .enumerate()
        .find(|(_, m)| m.input_dim() != first.input_dim())
    {
        return Err(Error::Config(format!(
            "member {j} expects input width {}, member 0 expects {}",
            m.input_dim(),
            first.input_dim()
        )));
    }
    Ok(())
}

/// Each member scores its own best centroid; the member with the highest
/// score decides.
pub fn ensemble_predict(
    members: &[NetworkModel],
    sample: ArrayView1<'_, f64>,
) -> Result<Prediction> {
    Ok(ensemble_predict_batch(members, as_batch(sample))?[0])
}

pub fn ensemble_predict_batch(
    members: &[NetworkModel],
    samples: ArrayView2<'_, f64>,
) -> Result<Vec<Prediction>> {
    check_members(members)?;
    let per_member: Vec<Vec<Prediction>> = members
        .iter()
        .enumerate()
        .map(|(j, m)| {
            predict_batch(m, samples).map(|preds| {
                preds
                    .into_iter()
                    .map(|p| Prediction {
                        network_index: j,
                        ..p
                    })
                    .collect()
            })
        })
        .collect::<Result<_>>()?;
    Ok((0..samples.nrows())
        .map(|i| {
            let mut best = per_member[0][i];
            for preds in &per_member[1..] {
                if preds[i].score > best.score {
                    best = preds[i];
                }
            }
            best
        })
        .collect())
}
