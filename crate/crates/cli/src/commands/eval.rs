//! `vwt eval`: score a prediction CSV against its run's design, producing
//! the JSON metrics report.

use std::path::{Path, PathBuf};

use vwt_core::metrics::{
    class_scores, confusion, hrf_similarity, roc_auc, segment_accuracy, RocCurve,
};
use vwt_core::synth::canonical_hrf;
use vwt_core::Error as CoreError;

use crate::error::{CliError, Result};
use crate::manifest::{read_manifest, sidecar_path, RunManifest};
use crate::predictions::read_predictions;
use crate::report::{write_report, MetricsReport};
use crate::runio::resolve_single_run;

/// The run argument may be a manifest, a volume file, or a directory with
/// one run.
fn resolve_manifest(path: &Path) -> Result<RunManifest> {
    let manifest_path: PathBuf = if path.is_dir() {
        sidecar_path(&resolve_single_run(path)?)
    } else if path.extension().is_some_and(|x| x == "json") {
        path.to_path_buf()
    } else {
        sidecar_path(path)
    };
    read_manifest(&manifest_path)
}

pub fn run(preds: &Path, run_path: &Path, out: &Path, segments: usize) -> Result<()> {
    let table = read_predictions(preds)?;
    let manifest = resolve_manifest(run_path)?;
    if table.conditions != manifest.conditions {
        return Err(CliError::data(format!(
            "{}: prediction conditions {:?} differ from run's {:?}",
            preds.display(),
            table.conditions,
            manifest.conditions
        )));
    }
    let design = manifest.design();
    if table.true_labels.len() != design.frames {
        return Err(CliError::data(format!(
            "{}: {} rows for a run of {} frames",
            preds.display(),
            table.true_labels.len(),
            design.frames
        )));
    }
    let k = manifest.conditions.len();
    let cm = confusion(&table.pred_labels, &table.true_labels, k)?;
    let scores = class_scores(&cm);

    let mut rocs: Vec<Option<RocCurve>> = Vec::with_capacity(k);
    for c in 0..k {
        let col: Vec<f64> = (0..table.true_labels.len())
            .map(|i| table.mean_probs[i * k + c])
            .collect();
        let truth: Vec<bool> = table.true_labels.iter().map(|&t| t == c).collect();
        match roc_auc(&col, &truth) {
            Ok(curve) => rocs.push(Some(curve)),
            Err(CoreError::SingleClassTruth) => rocs.push(None),
            Err(e) => return Err(e.into()),
        }
    }

    let kernel = canonical_hrf(design.tr_s, 32.0);
    let sims = hrf_similarity(&table.pred_labels, &table.true_labels, &design, &kernel)?;
    let segs = segment_accuracy(&table.pred_labels, &table.true_labels, segments)?;

    let report = MetricsReport::build(
        &manifest.conditions,
        &cm,
        &scores,
        &rocs,
        &sims,
        &segs,
        &table.true_labels,
        &table.pred_labels,
    );
    write_report(out, &report)?;
    println!(
        "accuracy {:.4}, macro F1 {:.4}; wrote {}",
        report.accuracy,
        report.macro_f1,
        out.display()
    );
    Ok(())
}
