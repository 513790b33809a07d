//! `vwt saliency`: guided-backprop gradient harvesting over a run directory,
//! group averaging, per-voxel GLM mapping with FDR thresholding, and
//! peak-voxel series export.

use std::fs;
use std::path::Path;

use serde::Serialize;
use vwt_core::pipeline::{predict_run, standardize_run};
use vwt_core::saliency::{fdr_threshold, glm_map, group_average, peak_series, saliency_run};
use vwt_core::synth::{canonical_hrf, ideal_response};

use crate::error::{io_ctx, CliError, Result};
use crate::predictions::write_series;
use crate::runio::load_run_dir;
use crate::volume;
use crate::weights_io::load_weights;

#[derive(Serialize)]
struct SaliencySidecar {
    condition: String,
    fdr_q: f64,
    /// Largest rejected p-value; absent when nothing survives.
    p_cutoff: Option<f64>,
    rejected_voxels: usize,
    total_voxels: usize,
    df: usize,
    runs: usize,
    peak_voxel: [usize; 3],
    peak_pcc_vs_ideal: f64,
}

pub fn run(weights_path: &Path, runs_dir: &Path, fdr_q: f64, out: &Path) -> Result<()> {
    if !(0.0..1.0).contains(&fdr_q) || fdr_q == 0.0 {
        return Err(CliError::usage(format!(
            "--fdr-q must be in (0, 1), got {fdr_q}"
        )));
    }
    let (weights, meta) = load_weights(weights_path)?;
    let cfg = meta.model.to_model_config();
    let loaded = load_run_dir(runs_dir)?;

    // Group mapping regresses the averaged gradients on one set of
    // regressors, so every run must share the task timing.
    let first_design = loaded[0].run.design.clone();
    for r in &loaded[1..] {
        if r.run.design != first_design {
            return Err(CliError::data(format!(
                "{}: task design differs from {}; group mapping needs identical timing",
                r.path.display(),
                loaded[0].path.display()
            )));
        }
    }
    if loaded[0].manifest.conditions != meta.conditions {
        return Err(CliError::data(format!(
            "{}: conditions differ from the model's",
            loaded[0].path.display()
        )));
    }

    fs::create_dir_all(out).map_err(|e| io_ctx(out, e))?;
    let mut maps = Vec::with_capacity(loaded.len());
    for r in &loaded {
        let standardized = standardize_run(&r.run)?;
        let prediction = predict_run(&weights, &cfg, &standardized.volume, 1)?;
        maps.push(saliency_run(&weights, &cfg, &standardized.volume, &prediction)?);
        println!(
            "harvested {} gradient volumes from {}",
            maps.last().expect("just pushed").len(),
            r.path.display()
        );
    }
    let mean_map = group_average(&maps)?;

    let kernel = canonical_hrf(first_design.tr_s, 32.0);
    let glm = glm_map(&mean_map, &first_design, &kernel, meta.train.label_shift)?;

    let labels = first_design.labels();
    for (ci, &cond) in glm.conditions.iter().enumerate() {
        let name = &meta.conditions[cond];
        volume::write_file(&out.join(format!("beta_{name}.vwt")), &glm.beta[ci])?;
        volume::write_file(&out.join(format!("tstat_{name}.vwt")), &glm.tstat[ci])?;
        volume::write_file(&out.join(format!("pval_{name}.vwt")), &glm.pval[ci])?;

        let mask = fdr_threshold(glm.pval[ci].data(), fdr_q)?;
        let rejected = mask.iter().filter(|&&m| m).count();
        let p_cutoff = glm.pval[ci]
            .data()
            .iter()
            .zip(&mask)
            .filter(|(_, &m)| m)
            .map(|(p, _)| *p)
            .fold(None, |acc: Option<f64>, p| {
                Some(acc.map_or(p, |a| if p > a { p } else { a }))
            });

        let peak = peak_series(&mean_map, &glm, cond, &first_design, &kernel)?;
        let n = peak.series.len();
        let ideal = ideal_response(&first_design, cond, &kernel)?;
        let stimulus: Vec<f64> = labels
            [mean_map.frame_offset..mean_map.frame_offset + n]
            .iter()
            .map(|&l| f64::from(u8::from(l == cond)))
            .collect();
        write_series(
            &out.join(format!("peak_{name}.csv")),
            mean_map.frame_offset,
            &peak.series,
            &ideal[mean_map.frame_offset..mean_map.frame_offset + n],
            &stimulus,
        )?;

        let sidecar = SaliencySidecar {
            condition: name.clone(),
            fdr_q,
            p_cutoff,
            rejected_voxels: rejected,
            total_voxels: mask.len(),
            df: glm.df,
            runs: maps.len(),
            peak_voxel: peak.voxel,
            peak_pcc_vs_ideal: peak.pcc_vs_ideal,
        };
        let sidecar_path = out.join(format!("saliency_{name}.json"));
        let json = serde_json::to_string_pretty(&sidecar)
            .map_err(|e| CliError::data(format!("{}: {e}", sidecar_path.display())))?;
        fs::write(&sidecar_path, json + "\n").map_err(|e| io_ctx(&sidecar_path, e))?;
        println!(
            "{name}: peak voxel {:?}, series similarity {:.3}, {rejected} voxels pass q={fdr_q}",
            peak.voxel, peak.pcc_vs_ideal
        );
    }
    Ok(())
}
