//! JSON files for model and training hyperparameters. Every field has a
//! default, so `{}` is a valid config and experiments stay diffable.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use vwt_core::model::ModelConfig;
use vwt_core::pipeline::TrainConfig;

use crate::error::{io_ctx, CliError, Result};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfigFile {
    pub window: usize,
    pub embed_channels: usize,
    pub stage_widths: Vec<usize>,
    pub blocks_per_stage: usize,
    pub reduction: usize,
}

impl Default for ModelConfigFile {
    fn default() -> Self {
        let d = ModelConfig::with_defaults(2);
        ModelConfigFile {
            window: d.window,
            embed_channels: d.embed_channels,
            stage_widths: d.stage_widths,
            blocks_per_stage: d.blocks_per_stage,
            reduction: d.reduction,
        }
    }
}

impl ModelConfigFile {
    /// Combine with the data-derived class count and grid.
    pub fn to_model_config(&self, num_classes: usize, grid: [usize; 3]) -> ModelConfig {
        ModelConfig {
            window: self.window,
            embed_channels: self.embed_channels,
            stage_widths: self.stage_widths.clone(),
            blocks_per_stage: self.blocks_per_stage,
            num_classes,
            reduction: self.reduction,
            grid,
        }
    }

    pub fn from_model_config(cfg: &ModelConfig) -> Self {
        ModelConfigFile {
            window: cfg.window,
            embed_channels: cfg.embed_channels,
            stage_widths: cfg.stage_widths.clone(),
            blocks_per_stage: cfg.blocks_per_stage,
            reduction: cfg.reduction,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfigFile {
    pub batch_size: usize,
    pub weight_decay: f64,
    pub epochs: usize,
    pub warmup_epochs: usize,
    pub window: usize,
    pub label_shift: usize,
    pub stride: usize,
    pub windows_per_run: usize,
    pub lr_start: f64,
    pub lr_peak: f64,
    pub lr_end: f64,
    pub seed: u64,
}

impl Default for TrainConfigFile {
    fn default() -> Self {
        let d = TrainConfig::default();
        TrainConfigFile {
            batch_size: d.batch_size,
            weight_decay: d.weight_decay,
            epochs: d.epochs,
            warmup_epochs: d.warmup_epochs,
            window: d.window,
            label_shift: d.label_shift,
            stride: d.stride,
            windows_per_run: d.windows_per_run,
            lr_start: d.lr_start,
            lr_peak: d.lr_peak,
            lr_end: d.lr_end,
            seed: d.seed,
        }
    }
}

impl TrainConfigFile {
    pub fn to_train_config(&self) -> TrainConfig {
        TrainConfig {
            batch_size: self.batch_size,
            weight_decay: self.weight_decay,
            epochs: self.epochs,
            warmup_epochs: self.warmup_epochs,
            window: self.window,
            label_shift: self.label_shift,
            stride: self.stride,
            windows_per_run: self.windows_per_run,
            lr_start: self.lr_start,
            lr_peak: self.lr_peak,
            lr_end: self.lr_end,
            seed: self.seed,
        }
    }
}

pub fn load_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| io_ctx(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::data(format!("{}: schema violation: {e}", path.display())))
}
