//! `vwt predict`: stride-s voting inference over one run, written as a CSV
//! of per-frame labels and mean class probabilities.

use std::path::Path;

use vwt_core::pipeline::{predict_run, shift_labels, standardize_run};

use crate::error::{CliError, Result};
use crate::predictions::write_predictions;
use crate::runio::{load_run, resolve_single_run};
use crate::weights_io::load_weights;

pub fn run(weights_path: &Path, run_path: &Path, out: &Path, stride: Option<usize>) -> Result<()> {
    let (weights, meta) = load_weights(weights_path)?;
    let cfg = meta.model.to_model_config();
    let volume_path = resolve_single_run(run_path)?;
    let loaded = load_run(&volume_path)?;
    if loaded.manifest.conditions != meta.conditions {
        return Err(CliError::data(format!(
            "{}: conditions differ from the model's ({:?} vs {:?})",
            volume_path.display(),
            loaded.manifest.conditions,
            meta.conditions
        )));
    }
    if loaded.manifest.phantom.grid != cfg.grid {
        return Err(CliError::data(format!(
            "{}: grid {:?} differs from the model's {:?}",
            volume_path.display(),
            loaded.manifest.phantom.grid,
            cfg.grid
        )));
    }
    let standardized = standardize_run(&loaded.run)?;
    let stride = stride.unwrap_or(meta.train.stride);
    let prediction = predict_run(&weights, &cfg, &standardized.volume, stride)?;
    // Ground truth lives in the same shifted timebase the model was trained
    // on.
    let truth = shift_labels(&loaded.run.labels, meta.train.label_shift)?;
    write_predictions(out, &prediction, &truth, &meta.conditions)?;
    println!(
        "wrote {} frames ({} windows at stride {stride}) to {}",
        truth.len(),
        vwt_core::pipeline::window_count(truth.len(), cfg.window, stride)?,
        out.display()
    );
    Ok(())
}
