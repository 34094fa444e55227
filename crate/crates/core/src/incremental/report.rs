use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::EnsembleModel;
use crate::classifier::{predict_batch, Prediction};
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::ClassId;

/// Accuracy per task and cumulatively, laid out like a class-incremental
/// results table: column `k` is the accuracy over all classes of the first
/// `k + 1` tasks using the first `k + 1` members.
#[derive(Clone, Debug, PartialEq)]
pub struct EvaluationReport {
    /// Classes of each member, in member order.
    pub task_classes: Vec<Vec<ClassId>>,
    /// Each member alone on its own classes' test samples.
    pub per_task_accuracy: Vec<f64>,
    pub cumulative_accuracy: Vec<f64>,
    /// `true label -> predicted label -> count` for the full ensemble.
    pub confusion_counts: BTreeMap<ClassId, BTreeMap<ClassId, usize>>,
}

impl EvaluationReport {
    pub const CSV_HEADER: &'static str = "task_index,classes,per_task_accuracy,cumulative_accuracy";

    /// Accuracy of the full ensemble over the whole test set.
    pub fn final_accuracy(&self) -> f64 {
        *self
            .cumulative_accuracy
            .last()
            .expect("report has at least one task")
    }

    pub fn total_samples(&self) -> usize {
        self.confusion_counts
            .values()
            .flat_map(|r| r.values())
            .sum()
    }

    /// One CSV row per task, accuracies to 4 decimals.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for (k, classes) in self.task_classes.iter().enumerate() {
            let _ = writeln!(
                out,
                "{k},{},{:.4},{:.4}",
                classes.len(),
                self.per_task_accuracy[k],
                self.cumulative_accuracy[k]
            );
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    /// `"10+10 (2networks) | 99.45% | 97.71%"`: first member on its own
    /// classes, then the cumulative accuracy after each further task.
    pub fn table_row(&self) -> String {
        let sizes: Vec<String> = self
            .task_classes
            .iter()
            .map(|c| c.len().to_string())
            .collect();
        let mut row = format!("{} ({}networks)", sizes.join("+"), self.task_classes.len());
        let _ = write!(row, " | {:.2}%", self.per_task_accuracy[0] * 100.0);
        for acc in &self.cumulative_accuracy[1..] {
            let _ = write!(row, " | {:.2}%", acc * 100.0);
        }
        row
    }
}

/// Highest score wins; on equal scores the earlier member keeps the win.
fn combine(preds: &[Vec<Prediction>], sample: usize) -> Prediction {
    let mut best = preds[0][sample];
    for p in &preds[1..] {
        if p[sample].score > best.score {
            best = p[sample];
        }
    }
    best
}

fn accuracy(correct: usize, total: usize) -> f64 {
    correct as f64 / total as f64
}

pub fn evaluate(ensemble: &EnsembleModel, test: &LabeledDataset) -> Result<EvaluationReport> {
    if ensemble.is_empty() {
        return Err(Error::Domain(
            "cannot evaluate an empty ensemble".to_string(),
        ));
    }
    if test.is_empty() {
        return Err(Error::Domain("test set is empty".to_string()));
    }
    let owners = ensemble.label_owners();
    let owner: Vec<usize> = test
        .labels()
        .iter()
        .map(|l| owners.get(l).copied().ok_or(Error::UnknownLabel(*l)))
        .collect::<Result<_>>()?;

    let preds: Vec<Vec<Prediction>> = ensemble
        .members()
        .iter()
        .enumerate()
        .map(|(j, m)| {
            predict_batch(m, test.features().view()).map(|ps| {
                ps.into_iter()
                    .map(|p| Prediction {
                        network_index: j,
                        ..p
                    })
                    .collect()
            })
        })
        .collect::<Result<_>>()?;

    let n_tasks = ensemble.len();
    let labels = test.labels();
    let mut per_task = Vec::with_capacity(n_tasks);
    let mut cumulative = Vec::with_capacity(n_tasks);
    for k in 0..n_tasks {
        let own: Vec<usize> = (0..test.len()).filter(|&i| owner[i] == k).collect();
        if own.is_empty() {
            return Err(Error::Coverage(format!("member {k} has no test samples")));
        }
        let own_correct = own
            .iter()
            .filter(|&&i| preds[k][i].global_label == labels[i])
            .count();
        per_task.push(accuracy(own_correct, own.len()));

        let seen: Vec<usize> = (0..test.len()).filter(|&i| owner[i] <= k).collect();
        let seen_correct = seen
            .iter()
            .filter(|&&i| combine(&preds[..=k], i).global_label == labels[i])
            .count();
        cumulative.push(accuracy(seen_correct, seen.len()));
    }

    let mut confusion: BTreeMap<ClassId, BTreeMap<ClassId, usize>> = BTreeMap::new();
    for (i, &truth) in labels.iter().enumerate() {
        let predicted = combine(&preds, i).global_label;
        *confusion
            .entry(truth)
            .or_default()
            .entry(predicted)
            .or_insert(0) += 1;
    }

    Ok(EvaluationReport {
        task_classes: ensemble
            .members()
            .iter()
            .map(|m| m.label_map().to_vec())
            .collect(),
        per_task_accuracy: per_task,
        cumulative_accuracy: cumulative,
        confusion_counts: confusion,
    })
}
