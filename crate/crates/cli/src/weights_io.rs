//! Model checkpoint file: magic "VWTM", a JSON metadata block (architecture,
//! training protocol, condition names), then every parameter tensor as a VWT
//! record in the fixed parameter order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use vwt_core::model::{ModelConfig, ModelWeights};

use crate::config::TrainConfigFile;
use crate::error::{io_ctx, CliError, Result};
use crate::volume;

pub const MAGIC: [u8; 4] = *b"VWTM";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModelConfigJson {
    pub window: usize,
    pub embed_channels: usize,
    pub stage_widths: Vec<usize>,
    pub blocks_per_stage: usize,
    pub num_classes: usize,
    pub reduction: usize,
    pub grid: [usize; 3],
}

impl From<&ModelConfig> for ModelConfigJson {
    fn from(cfg: &ModelConfig) -> Self {
        ModelConfigJson {
            window: cfg.window,
            embed_channels: cfg.embed_channels,
            stage_widths: cfg.stage_widths.clone(),
            blocks_per_stage: cfg.blocks_per_stage,
            num_classes: cfg.num_classes,
            reduction: cfg.reduction,
            grid: cfg.grid,
        }
    }
}

impl ModelConfigJson {
    pub fn to_model_config(&self) -> ModelConfig {
        ModelConfig {
            window: self.window,
            embed_channels: self.embed_channels,
            stage_widths: self.stage_widths.clone(),
            blocks_per_stage: self.blocks_per_stage,
            num_classes: self.num_classes,
            reduction: self.reduction,
            grid: self.grid,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct WeightsMeta {
    pub model: ModelConfigJson,
    pub train: TrainConfigFile,
    pub conditions: Vec<String>,
}

pub fn save_weights(path: &Path, weights: &ModelWeights, meta: &WeightsMeta) -> Result<()> {
    let file = File::create(path).map_err(|e| io_ctx(path, e))?;
    let mut w = BufWriter::new(file);
    let meta_json =
        serde_json::to_vec(meta).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    (|| -> std::io::Result<()> {
        w.write_all(&MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(meta_json.len() as u32).to_le_bytes())?;
        w.write_all(&meta_json)?;
        let params = weights.params();
        w.write_all(&(params.len() as u32).to_le_bytes())?;
        for p in params {
            volume::write_record(&mut w, p)?;
        }
        w.flush()
    })()
    .map_err(|e| io_ctx(path, e))
}

pub fn load_weights(path: &Path) -> Result<(ModelWeights, WeightsMeta)> {
    let file = File::open(path).map_err(|e| io_ctx(path, e))?;
    let mut r = BufReader::new(file);
    let name = path.display().to_string();

    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|e| CliError::data(format!("{name}: {e}")))?;
    if magic != MAGIC {
        return Err(CliError::data(format!(
            "{name}: bad magic {magic:?}, expected \"VWTM\""
        )));
    }
    let mut buf4 = [0u8; 4];
    r.read_exact(&mut buf4)
        .map_err(|e| CliError::data(format!("{name}: {e}")))?;
    if u32::from_le_bytes(buf4) != VERSION {
        return Err(CliError::data(format!("{name}: unsupported version")));
    }
    r.read_exact(&mut buf4)
        .map_err(|e| CliError::data(format!("{name}: {e}")))?;
    let meta_len = u32::from_le_bytes(buf4) as usize;
    let mut meta_json = vec![0u8; meta_len];
    r.read_exact(&mut meta_json)
        .map_err(|e| CliError::data(format!("{name}: {e}")))?;
    let meta: WeightsMeta = serde_json::from_slice(&meta_json)
        .map_err(|e| CliError::data(format!("{name}: metadata schema violation: {e}")))?;

    let cfg = meta.model.to_model_config();
    cfg.validate()
        .map_err(|e| CliError::data(format!("{name}: {e}")))?;
    if meta.conditions.len() != cfg.num_classes {
        return Err(CliError::data(format!(
            "{name}: {} condition names for {} classes",
            meta.conditions.len(),
            cfg.num_classes
        )));
    }

    r.read_exact(&mut buf4)
        .map_err(|e| CliError::data(format!("{name}: {e}")))?;
    let count = u32::from_le_bytes(buf4) as usize;
    let mut weights = ModelWeights::zeros(&cfg)?;
    {
        let mut params = weights.params_mut();
        if params.len() != count {
            return Err(CliError::data(format!(
                "{name}: {count} parameter records, architecture wants {}",
                params.len()
            )));
        }
        for (i, slot) in params.iter_mut().enumerate() {
            let record = volume::read_record(&mut r, &format!("{name}[param {i}]"))?;
            if record.dims() != slot.dims() {
                return Err(CliError::data(format!(
                    "{name}[param {i}]: dims {:?}, architecture wants {:?}",
                    record.dims(),
                    slot.dims()
                )));
            }
            **slot = record;
        }
    }
    let mut probe = [0u8; 1];
    match r.read(&mut probe) {
        Ok(0) => Ok((weights, meta)),
        Ok(_) => Err(CliError::data(format!("{name}: trailing bytes"))),
        Err(e) => Err(io_ctx(path, e)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use vwt_core::model::init_params;

    #[test]
    fn weights_round_trip_preserves_f32_values() {
        let cfg = ModelConfig {
            window: 4,
            embed_channels: 4,
            stage_widths: vec![4, 8],
            blocks_per_stage: 1,
            num_classes: 3,
            reduction: 4,
            grid: [6, 6, 6],
        };
        let weights = init_params(&cfg, 5).unwrap();
        let meta = WeightsMeta {
            model: (&cfg).into(),
            train: TrainConfigFile::default(),
            conditions: vec!["rest".into(), "a".into(), "b".into()],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.vwt");
        save_weights(&path, &weights, &meta).unwrap();
        let (back, meta2) = load_weights(&path).unwrap();
        assert_eq!(meta, meta2);
        for (a, b) in back.params().iter().zip(weights.params()) {
            assert_eq!(a.dims(), b.dims());
            for (x, y) in a.data().iter().zip(b.data()) {
                assert_eq!(*x, *y as f32 as f64);
            }
        }
    }

    #[test]
    fn condition_count_mismatch_is_rejected() {
        let cfg = ModelConfig {
            window: 4,
            embed_channels: 4,
            stage_widths: vec![4],
            blocks_per_stage: 1,
            num_classes: 3,
            reduction: 4,
            grid: [4, 4, 4],
        };
        let weights = init_params(&cfg, 1).unwrap();
        let meta = WeightsMeta {
            model: (&cfg).into(),
            train: TrainConfigFile::default(),
            conditions: vec!["rest".into()],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.vwt");
        save_weights(&path, &weights, &meta).unwrap();
        assert!(load_weights(&path).is_err());
    }
}
