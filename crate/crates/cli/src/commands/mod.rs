pub mod eval;
pub mod generate;
pub mod predict;
pub mod report;
pub mod saliency;
pub mod train;
