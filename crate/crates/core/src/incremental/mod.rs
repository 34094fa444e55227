//! Class-incremental orchestration: one network per arriving class batch.
//!
//! Adding a task only appends a member; existing members are never touched,
//! so nothing already learned can be overwritten. Old tasks' data is never
//! consulted when training a new member.

mod persist;
mod report;

use std::collections::BTreeMap;

use ndarray::ArrayView1;

pub use persist::{
    load_model, manifest_path, member_file_name, persist, restore, save_model, EnsembleManifest,
    ManifestEntry, MemberDocument, ENSEMBLE_FORMAT_VERSION, MANIFEST_FILE,
};
pub use report::{evaluate, EvaluationReport};

use crate::centroids::{generate_centroids, DEFAULT_ITERATIONS};
use crate::classifier::{ensemble_predict, Prediction};
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::netcore::{NetworkModel, NetworkSpec};
use crate::trainer::{train_task, TrainConfig, TrainTrace};
use crate::ClassId;

/// Ordered networks with pairwise-disjoint label sets and a shared input
/// width. Member order is task arrival order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EnsembleModel {
    members: Vec<NetworkModel>,
}

impl EnsembleModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_members(members: Vec<NetworkModel>) -> Result<Self> {
        let mut ensemble = Self::new();
        for m in members {
            ensemble.push_member(m)?;
        }
        Ok(ensemble)
    }

    pub fn members(&self) -> &[NetworkModel] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn input_dim(&self) -> Option<usize> {
        self.members.first().map(NetworkModel::input_dim)
    }

    /// Member index owning each global label.
    pub fn label_owners(&self) -> BTreeMap<ClassId, usize> {
        let mut owners = BTreeMap::new();
        for (j, m) in self.members.iter().enumerate() {
            for &l in m.label_map() {
                owners.insert(l, j);
            }
        }
        owners
    }

    fn check_new_labels(&self, labels: &[ClassId]) -> Result<()> {
        let owners = self.label_owners();
        if let Some((&label, &member)) = labels.iter().find_map(|l| owners.get_key_value(l)) {
            return Err(Error::NotDisjoint { label, member });
        }
        Ok(())
    }

    fn check_input_dim(&self, width: usize) -> Result<()> {
        match self.input_dim() {
            Some(d) if d != width => Err(Error::Config(format!(
                "ensemble members take input width {d}, new member takes {width}"
            ))),
            _ => Ok(()),
        }
    }

    /// Appends an already trained member after checking the ensemble
    /// invariants.
    pub fn push_member(&mut self, model: NetworkModel) -> Result<()> {
        self.check_new_labels(model.label_map())?;
        self.check_input_dim(model.input_dim())?;
        self.members.push(model);
        Ok(())
    }

    /// Trains a new member on `data` alone and appends it.
    ///
    /// The head comes from `generate_centroids(N, spec.feature_dim,
    /// cfg.seed)`, so tasks with equal class counts and seeds share centroid
    /// geometry.
    pub fn add_task(
        &mut self,
        data: &LabeledDataset,
        spec: &NetworkSpec,
        cfg: &TrainConfig,
    ) -> Result<TrainTrace> {
        self.check_new_labels(data.class_set())?;
        self.check_input_dim(spec.input_dim)?;
        let head = generate_centroids(
            data.class_set().len(),
            spec.feature_dim,
            cfg.seed,
            DEFAULT_ITERATIONS,
        )?;
        let (model, trace) = train_task(data, &head, spec, cfg)?;
        self.members.push(model);
        Ok(trace)
    }

    pub fn predict(&self, sample: ArrayView1<'_, f64>) -> Result<Prediction> {
        ensemble_predict(&self.members, sample)
    }
}
