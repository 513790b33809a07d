//! `vwt generate`: build one seeded task design and render N phantom
//! subjects against it.

use std::fs;
use std::path::Path;

use vwt_core::synth::{build_design, render_run, DesignKind, Phantom};

use crate::error::{io_ctx, Result};
use crate::manifest::{write_manifest, RunManifest};
use crate::volume;

/// Per-subject noise stream derived from the batch seed (splitmix64 mix), so
/// disjoint subject ranges never share noise.
fn subject_seed(seed: u64, subject: u32) -> u64 {
    let mut z = seed.wrapping_add((subject as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[allow(clippy::too_many_arguments)]
pub fn run(
    kind: DesignKind,
    subjects: u32,
    seed: u64,
    out: &Path,
    grid: [usize; 3],
    noise_sd: f64,
    first_subject: u32,
) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| io_ctx(out, e))?;
    let design = build_design(kind, seed);
    let phantom = Phantom::default_for(grid, design.conditions.len(), noise_sd)?;
    for i in 0..subjects {
        let subject = first_subject + i;
        let rendered = render_run(&design, &phantom, subject_seed(seed, subject))?;
        let stem = format!("sub{subject:03}");
        volume::write_file(&out.join(format!("{stem}.vwt")), &rendered.volume)?;
        let manifest = RunManifest::from_parts(&design, &phantom, seed, subject);
        write_manifest(&out.join(format!("{stem}.json")), &manifest)?;
    }
    println!(
        "generated {subjects} run(s) of {} frames ({} conditions) into {}",
        design.frames,
        design.conditions.len(),
        out.display()
    );
    Ok(())
}
