//! `vwt report`: render the metrics JSON (plus optional peak-series CSVs)
//! into a standalone SVG document.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{io_ctx, Result};
use crate::predictions::read_series;
use crate::report::{read_report, render_report};

pub fn run(metrics: &Path, out: &Path, series: &[PathBuf]) -> Result<()> {
    let report = read_report(metrics)?;
    let mut tables = Vec::with_capacity(series.len());
    for path in series {
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        tables.push((name, read_series(path)?));
    }
    let svg = render_report(&report, &tables)?;
    fs::write(out, svg).map_err(|e| io_ctx(out, e))?;
    println!("wrote {}", out.display());
    Ok(())
}
