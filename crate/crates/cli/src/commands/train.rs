//! `vwt train`: load a run directory, standardize, run the training loop,
//! and save the weights with their architecture and protocol metadata.

use std::path::Path;

use vwt_core::pipeline::{standardize_run, train};
use vwt_core::synth::RunData;

use crate::config::{load_json, ModelConfigFile, TrainConfigFile};
use crate::error::{CliError, Result};
use crate::runio::load_run_dir;
use crate::weights_io::{save_weights, WeightsMeta};

pub fn run(
    data: &Path,
    val_data: Option<&Path>,
    model_config: Option<&Path>,
    train_config: Option<&Path>,
    seed: Option<u64>,
    out: &Path,
) -> Result<()> {
    let loaded = load_run_dir(data)?;
    let conditions = loaded[0].manifest.conditions.clone();
    let grid = loaded[0].manifest.phantom.grid;

    let model_file: ModelConfigFile = match model_config {
        Some(p) => load_json(p)?,
        None => ModelConfigFile::default(),
    };
    let mut train_file: TrainConfigFile = match train_config {
        Some(p) => load_json(p)?,
        None => TrainConfigFile::default(),
    };
    if let Some(s) = seed {
        train_file.seed = s;
    }
    let model_cfg = model_file.to_model_config(conditions.len(), grid);
    model_cfg
        .validate()
        .map_err(|e| CliError::data(format!("model config: {e}")))?;
    let train_cfg = train_file.to_train_config();

    let standardized: Vec<RunData> = loaded
        .iter()
        .map(|r| standardize_run(&r.run).map_err(CliError::from))
        .collect::<Result<_>>()?;
    let val_standardized: Vec<RunData> = match val_data {
        Some(dir) => {
            let val = load_run_dir(dir)?;
            if val[0].manifest.conditions != conditions || val[0].manifest.phantom.grid != grid {
                return Err(CliError::data(format!(
                    "{}: validation runs incompatible with training runs",
                    dir.display()
                )));
            }
            val.iter()
                .map(|r| standardize_run(&r.run).map_err(CliError::from))
                .collect::<Result<_>>()?
        }
        None => Vec::new(),
    };

    println!(
        "training on {} run(s), validating on {}, {} classes, grid {:?}",
        standardized.len(),
        if val_standardized.is_empty() {
            "training set samples".to_string()
        } else {
            format!("{} run(s)", val_standardized.len())
        },
        conditions.len(),
        grid
    );
    let output = train(&standardized, &val_standardized, &model_cfg, &train_cfg)?;
    for (epoch, stats) in output.history.iter().enumerate() {
        println!(
            "epoch {:>3}/{}: loss {:.6} val_acc {:.4}",
            epoch + 1,
            train_cfg.epochs,
            stats.mean_loss,
            stats.val_accuracy
        );
    }

    let meta = WeightsMeta {
        model: (&model_cfg).into(),
        train: train_file,
        conditions,
    };
    save_weights(out, &output.weights, &meta)?;
    println!("saved weights to {}", out.display());
    Ok(())
}
