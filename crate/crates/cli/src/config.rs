//! Flat TOML files for network specs and training configs.
//!
//! ```toml
//! # spec.toml
//! input_dim = 32
//! hidden_layers = [64]
//! feature_dim = 32
//! activation = "relu"
//!
//! # config.toml (every key optional; the full 120-epoch schedule otherwise)
//! epochs = 30
//! batch_size = 64
//! lr_drop_epochs = [5, 13, 20, 25]
//! margin = 0.35
//! ```

use std::fs;
use std::path::Path;

use pedcc::netcore::{Activation, NetworkSpec};
use pedcc::{Error, LossConfig, Result, TrainConfig};
use serde::Deserialize;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecFile {
    input_dim: usize,
    #[serde(default)]
    hidden_layers: Vec<usize>,
    feature_dim: usize,
    #[serde(default)]
    activation: Activation,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub base_lr: Option<f64>,
    pub lr_drop_epochs: Option<Vec<usize>>,
    pub lr_drop_factor: Option<f64>,
    pub momentum: Option<f64>,
    pub weight_decay: Option<f64>,
    pub scale: Option<f64>,
    pub margin: Option<f64>,
    pub root: Option<f64>,
    pub seed: Option<u64>,
}

fn read_toml<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    toml::from_str(&text).map_err(|e| {
        let msg = e.message().replace('\n', " ");
        Error::Config(format!("{}: {msg}", path.display()))
    })
}

pub fn load_spec(path: &Path) -> Result<NetworkSpec> {
    let f: SpecFile = read_toml(path)?;
    let spec = NetworkSpec {
        input_dim: f.input_dim,
        hidden_layers: f.hidden_layers,
        feature_dim: f.feature_dim,
        activation: f.activation,
    };
    spec.validate()?;
    Ok(spec)
}

pub fn load_config(path: Option<&Path>) -> Result<ConfigFile> {
    path.map_or_else(|| Ok(ConfigFile::default()), read_toml)
}

impl ConfigFile {
    /// Overlays the file on the full 120-epoch schedule. When only `epochs` is given,
    /// the drop epochs are rescaled to it.
    pub fn resolve(self) -> Result<TrainConfig> {
        let base = TrainConfig::full_schedule();
        let mut cfg = match (self.epochs, &self.lr_drop_epochs) {
            (Some(e), None) => base.scaled_to(e),
            (Some(e), Some(_)) => TrainConfig { epochs: e, ..base },
            (None, _) => base,
        };
        let loss = LossConfig::default();
        cfg.loss = LossConfig {
            scale: self.scale.unwrap_or(loss.scale),
            margin: self.margin.unwrap_or(loss.margin),
            root: self.root.unwrap_or(loss.root),
        };
        if let Some(v) = self.lr_drop_epochs {
            cfg.lr_drop_epochs = v;
        }
        cfg.batch_size = self.batch_size.unwrap_or(cfg.batch_size);
        cfg.base_lr = self.base_lr.unwrap_or(cfg.base_lr);
        cfg.lr_drop_factor = self.lr_drop_factor.unwrap_or(cfg.lr_drop_factor);
        cfg.momentum = self.momentum.unwrap_or(cfg.momentum);
        cfg.weight_decay = self.weight_decay.unwrap_or(cfg.weight_decay);
        cfg.seed = self.seed.unwrap_or(cfg.seed);
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_the_full_schedule() {
        assert_eq!(
            ConfigFile::default().resolve().unwrap(),
            TrainConfig::full_schedule()
        );
    }

    #[test]
    fn epochs_alone_rescales_drops() {
        let cfg: ConfigFile = toml::from_str("epochs = 30\nmargin = 0.2").unwrap();
        let cfg = cfg.resolve().unwrap();
        assert_eq!(cfg.lr_drop_epochs, vec![5, 13, 20, 25]);
        assert_eq!(cfg.loss.margin, 0.2);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<ConfigFile>("epoch = 3").is_err());
        assert!(toml::from_str::<SpecFile>("input_dim = 2\nfeature_dim = 2\nwidth = 3").is_err());
    }
}
