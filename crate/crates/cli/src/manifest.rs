//! The JSON run manifest: task timing, condition names, phantom description,
//! and generation provenance. One manifest accompanies each volume file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vwt_core::synth::{Phantom, Roi, TaskDesign, TaskEvent};

use crate::error::{io_ctx, CliError, Result};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct EventJson {
    pub condition: usize,
    pub onset: usize,
    pub duration: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RoiJson {
    pub condition: usize,
    pub center: [f64; 3],
    pub radii: [f64; 3],
    pub amplitude: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PhantomJson {
    pub grid: [usize; 3],
    pub baseline: f64,
    pub noise_sd: f64,
    pub rois: Vec<RoiJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub format_version: u32,
    pub generator: String,
    pub seed: u64,
    pub subject: u32,
    pub tr_s: f64,
    pub frames: usize,
    pub conditions: Vec<String>,
    pub events: Vec<EventJson>,
    pub phantom: PhantomJson,
}

impl RunManifest {
    pub fn design(&self) -> TaskDesign {
        TaskDesign {
            tr_s: self.tr_s,
            frames: self.frames,
            conditions: self.conditions.clone(),
            events: self
                .events
                .iter()
                .map(|e| TaskEvent {
                    condition: e.condition,
                    onset: e.onset,
                    duration: e.duration,
                })
                .collect(),
        }
    }

    pub fn phantom(&self) -> Phantom {
        Phantom {
            grid: self.phantom.grid,
            baseline: self.phantom.baseline,
            noise_sd: self.phantom.noise_sd,
            rois: self
                .phantom
                .rois
                .iter()
                .map(|r| Roi {
                    condition: r.condition,
                    center: r.center,
                    radii: r.radii,
                    amplitude: r.amplitude,
                })
                .collect(),
        }
    }

    /// Structural validation beyond what serde can check.
    pub fn validate(&self) -> Result<()> {
        if self.format_version != MANIFEST_VERSION {
            return Err(CliError::data(format!(
                "manifest version {} unsupported",
                self.format_version
            )));
        }
        if self.conditions.first().map(String::as_str) != Some("rest") {
            return Err(CliError::data(
                "manifest conditions must start with \"rest\" at index 0",
            ));
        }
        self.design().validate()?;
        self.phantom().validate()?;
        Ok(())
    }

    pub fn from_parts(
        design: &TaskDesign,
        phantom: &Phantom,
        seed: u64,
        subject: u32,
    ) -> RunManifest {
        RunManifest {
            format_version: MANIFEST_VERSION,
            generator: format!("vwt {}", env!("CARGO_PKG_VERSION")),
            seed,
            subject,
            tr_s: design.tr_s,
            frames: design.frames,
            conditions: design.conditions.clone(),
            events: design
                .events
                .iter()
                .map(|e| EventJson {
                    condition: e.condition,
                    onset: e.onset,
                    duration: e.duration,
                })
                .collect(),
            phantom: PhantomJson {
                grid: phantom.grid,
                baseline: phantom.baseline,
                noise_sd: phantom.noise_sd,
                rois: phantom
                    .rois
                    .iter()
                    .map(|r| RoiJson {
                        condition: r.condition,
                        center: r.center,
                        radii: r.radii,
                        amplitude: r.amplitude,
                    })
                    .collect(),
            },
        }
    }
}

pub fn write_manifest(path: &Path, manifest: &RunManifest) -> Result<()> {
    let json = serde_json::to_string_pretty(manifest)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    fs::write(path, json + "\n").map_err(|e| io_ctx(path, e))
}

pub fn read_manifest(path: &Path) -> Result<RunManifest> {
    let text = fs::read_to_string(path).map_err(|e| io_ctx(path, e))?;
    let manifest: RunManifest = serde_json::from_str(&text)
        .map_err(|e| CliError::data(format!("{}: schema violation: {e}", path.display())))?;
    manifest
        .validate()
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    Ok(manifest)
}

/// Manifest path belonging to a volume file: same stem, `.json`.
pub fn sidecar_path(volume_path: &Path) -> PathBuf {
    volume_path.with_extension("json")
}

#[cfg(test)]
mod tests {
    use super::*;
    use vwt_core::synth::{build_design, DesignKind};

    fn demo() -> RunManifest {
        let design = build_design(DesignKind::Block, 3);
        let phantom = Phantom::default_for([20, 24, 20], design.conditions.len(), 1.0).unwrap();
        RunManifest::from_parts(&design, &phantom, 3, 0)
    }

    #[test]
    fn json_round_trip() {
        let m = demo();
        let text = serde_json::to_string_pretty(&m).unwrap();
        let back: RunManifest = serde_json::from_str(&text).unwrap();
        assert_eq!(m, back);
        back.validate().unwrap();
    }

    #[test]
    fn unknown_fields_are_schema_violations() {
        let mut value = serde_json::to_value(demo()).unwrap();
        value["surprise"] = serde_json::json!(1);
        assert!(serde_json::from_value::<RunManifest>(value).is_err());
    }

    #[test]
    fn rest_must_lead_the_condition_list() {
        let mut m = demo();
        m.conditions[0] = "busy".into();
        assert!(m.validate().is_err());
    }
}
