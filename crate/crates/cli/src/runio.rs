//! Loading generated runs: volume + manifest pairs, with cross-checks
//! between the two.

use std::path::{Path, PathBuf};

use vwt_core::synth::RunData;

use crate::error::{CliError, Result};
use crate::manifest::{read_manifest, sidecar_path, RunManifest};
use crate::volume;

/// A volume file with its parsed sidecar manifest.
pub struct LoadedRun {
    pub path: PathBuf,
    pub manifest: RunManifest,
    pub run: RunData,
}

/// Read one run given its volume path; the manifest sits next to it.
pub fn load_run(volume_path: &Path) -> Result<LoadedRun> {
    let manifest = read_manifest(&sidecar_path(volume_path))?;
    let tensor = volume::read_file(volume_path)?;
    let dims = tensor.dims();
    if dims.len() != 4 {
        return Err(CliError::data(format!(
            "{}: expected a 4-d run volume, got {:?}",
            volume_path.display(),
            dims
        )));
    }
    if dims[0] != manifest.frames || dims[1..] != manifest.phantom.grid {
        return Err(CliError::data(format!(
            "{}: volume {:?} disagrees with manifest ({} frames, grid {:?})",
            volume_path.display(),
            dims,
            manifest.frames,
            manifest.phantom.grid
        )));
    }
    let design = manifest.design();
    let labels = design.labels();
    Ok(LoadedRun {
        path: volume_path.to_path_buf(),
        manifest,
        run: RunData {
            volume: tensor,
            labels,
            design,
        },
    })
}

/// Volume files in a directory, sorted by name for deterministic order.
pub fn list_volumes(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir)
        .map_err(|e| CliError::data(format!("{}: {e}", dir.display())))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "vwt"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::data(format!(
            "{}: no .vwt volumes found",
            dir.display()
        )));
    }
    Ok(paths)
}

/// Load every run in a directory and check they share one geometry and
/// condition list.
pub fn load_run_dir(dir: &Path) -> Result<Vec<LoadedRun>> {
    let paths = list_volumes(dir)?;
    let runs: Vec<LoadedRun> = paths.iter().map(|p| load_run(p)).collect::<Result<_>>()?;
    let first = &runs[0].manifest;
    for r in &runs[1..] {
        if r.manifest.conditions != first.conditions
            || r.manifest.phantom.grid != first.phantom.grid
            || r.manifest.tr_s != first.tr_s
        {
            return Err(CliError::data(format!(
                "{}: inconsistent with {} (conditions/grid/tr must match)",
                r.path.display(),
                runs[0].path.display()
            )));
        }
    }
    Ok(runs)
}

/// Resolve an argument that may be a volume file or a directory holding
/// exactly one volume.
pub fn resolve_single_run(path: &Path) -> Result<PathBuf> {
    if path.is_dir() {
        let volumes = list_volumes(path)?;
        if volumes.len() != 1 {
            return Err(CliError::data(format!(
                "{}: holds {} volumes; pass the .vwt file directly",
                path.display(),
                volumes.len()
            )));
        }
        Ok(volumes.into_iter().next().expect("checked length"))
    } else {
        Ok(path.to_path_buf())
    }
}
