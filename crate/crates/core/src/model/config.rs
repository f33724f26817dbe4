use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{M3sError, Result};
use crate::exec::Execution;
use crate::nn::LayerSpec;
use crate::spectra::SplitMode;

/// Which history rows enter the fusion stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionPolicy {
    /// The whole probability matrix for every sample.
    Global,
    /// Rows of flags the sample does not carry are zeroed.
    #[default]
    Masked,
}

/// How the weight matrix behaves during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightMode {
    /// Trainable, initialised to all ones.
    #[default]
    Adaptive,
    /// Frozen at the spectral/history ratio construction.
    Fixed,
    /// No fusion: the preliminary spectral prediction is the output.
    #[serde(alias = "spectral")]
    None,
}

/// Kernel size used for a scale when none is configured: 3 at 32, 5 at 64,
/// 7 at 128, 3 otherwise.
pub fn default_kernel(scale: usize) -> usize {
    match scale {
        64 => 5,
        128 => 7,
        _ => 3,
    }
}

fn default_scales() -> Vec<usize> {
    vec![32, 64]
}
fn default_channels() -> [usize; 3] {
    [8, 16, 16]
}
fn default_epochs() -> usize {
    500
}
fn default_lr() -> f64 {
    0.001
}
fn default_batch() -> usize {
    1
}
fn default_seed() -> u64 {
    1
}
fn default_ratio() -> f64 {
    0.9
}
fn default_fraction() -> f64 {
    0.75
}

/// Everything that determines a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "default_scales")]
    pub scales: Vec<usize>,
    /// Per-scale kernel sizes; defaults follow [`default_kernel`].
    #[serde(default)]
    pub kernel_sizes: Option<Vec<usize>>,
    /// Output channels of the three convolutions in each branch.
    #[serde(default = "default_channels")]
    pub channels: [usize; 3],
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub fusion: FusionPolicy,
    #[serde(default)]
    pub weights: WeightMode,
    /// Spectral share of the fixed weight matrix.
    #[serde(default = "default_ratio")]
    pub fixed_ratio: f64,
    #[serde(default = "default_fraction")]
    pub train_fraction: f64,
    #[serde(default)]
    pub split_mode: SplitMode,
    /// Thread strategy; has no effect on results and is not hashed.
    #[serde(default, skip_serializing)]
    pub execution: Execution,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            scales: default_scales(),
            kernel_sizes: None,
            channels: default_channels(),
            epochs: default_epochs(),
            lr: default_lr(),
            batch_size: default_batch(),
            seed: default_seed(),
            fusion: FusionPolicy::default(),
            weights: WeightMode::default(),
            fixed_ratio: default_ratio(),
            train_fraction: default_fraction(),
            split_mode: SplitMode::default(),
            execution: Execution::default(),
        }
    }
}

impl TrainConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| M3sError::io(path, e))?;
        let cfg: TrainConfig = serde_json::from_str(&text).map_err(|e| M3sError::Parse {
            row: e.line(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn kernels(&self) -> Vec<usize> {
        match &self.kernel_sizes {
            Some(k) => k.clone(),
            None => self.scales.iter().map(|&s| default_kernel(s)).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.scales.is_empty() {
            return Err(M3sError::config("scales", "at least one scale is required"));
        }
        for (i, &s) in self.scales.iter().enumerate() {
            if s < 8 {
                return Err(M3sError::config(
                    format!("scales[{i}]"),
                    format!("scale {s} is below the minimum of 8"),
                ));
            }
            if self.scales[..i].contains(&s) {
                return Err(M3sError::config(
                    format!("scales[{i}]"),
                    format!("duplicate scale {s}"),
                ));
            }
        }
        let kernels = self.kernels();
        if kernels.len() != self.scales.len() {
            return Err(M3sError::config(
                "kernel_sizes",
                format!(
                    "{} kernel sizes for {} scales",
                    kernels.len(),
                    self.scales.len()
                ),
            ));
        }
        if let Some(i) = kernels.iter().position(|&k| k == 0 || k % 2 == 0) {
            return Err(M3sError::config(
                format!("kernel_sizes[{i}]"),
                "kernel sizes must be odd",
            ));
        }
        if self.channels.contains(&0) {
            return Err(M3sError::config("channels", "channel counts must be >= 1"));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(M3sError::config(
                "lr",
                format!("must be > 0, got {}", self.lr),
            ));
        }
        if self.batch_size == 0 {
            return Err(M3sError::config("batch_size", "must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.fixed_ratio) {
            return Err(M3sError::config(
                "fixed_ratio",
                format!("must lie in [0, 1], got {}", self.fixed_ratio),
            ));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(M3sError::config(
                "train_fraction",
                format!("must lie in (0, 1), got {}", self.train_fraction),
            ));
        }
        Ok(())
    }

    /// Layer stack of the branch that consumes images of size `scale`.
    pub fn branch_specs(&self, kernel: usize) -> Vec<LayerSpec> {
        let [c1, c2, c3] = self.channels;
        let pad = (kernel - 1) / 2;
        vec![
            LayerSpec::conv(1, c1, kernel, 1, pad),
            LayerSpec::Relu,
            LayerSpec::Maxpool2d {
                kernel: 2,
                stride: 2,
            },
            LayerSpec::conv(c1, c2, kernel, 1, pad),
            LayerSpec::Relu,
            LayerSpec::conv(c2, c3, 2, 2, 0),
            LayerSpec::Relu,
            LayerSpec::Maxpool2d {
                kernel: 2,
                stride: 2,
            },
            LayerSpec::Flatten,
        ]
    }

    /// SHA-256 of the canonical JSON form (execution strategy excluded).
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = TrainConfig::default();
        assert_eq!(c.scales, vec![32, 64]);
        assert_eq!(c.kernels(), vec![3, 5]);
        assert_eq!(c.epochs, 500);
        assert_eq!(c.lr, 0.001);
        assert_eq!(c.fusion, FusionPolicy::Masked);
        assert_eq!(c.weights, WeightMode::Adaptive);
        c.validate().unwrap();
        let parsed: TrainConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(parsed, c);
    }

    #[test]
    fn validation() {
        let mut c = TrainConfig {
            scales: vec![32, 32],
            ..Default::default()
        };
        assert!(c.validate().is_err());
        c.scales = vec![4];
        assert!(c.validate().is_err());
        c.scales = vec![32];
        c.kernel_sizes = Some(vec![4]);
        assert!(c.validate().is_err());
        c.kernel_sizes = Some(vec![3, 5]);
        assert!(c.validate().is_err());
        c.kernel_sizes = None;
        c.lr = -1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn hash_ignores_execution() {
        let a = TrainConfig::default();
        let b = TrainConfig {
            execution: Execution::Sequential,
            ..Default::default()
        };
        assert_eq!(a.hash(), b.hash());
        let c = TrainConfig {
            seed: 2,
            ..Default::default()
        };
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn unknown_field_rejected() {
        assert!(serde_json::from_str::<TrainConfig>(r#"{"epoch": 3}"#).is_err());
        let c: TrainConfig =
            serde_json::from_str(r#"{"weights": "fixed", "fusion": "global"}"#).unwrap();
        assert_eq!(c.weights, WeightMode::Fixed);
        assert_eq!(c.fusion, FusionPolicy::Global);
    }
}
