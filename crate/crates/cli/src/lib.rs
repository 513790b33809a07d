//! File formats and command implementations behind the `vwt` binary:
//! the VWT tensor container, run manifests, model checkpoints, prediction
//! and series CSVs, the metrics report, and its SVG rendering.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod predictions;
pub mod report;
pub mod runio;
pub mod volume;
pub mod weights_io;
