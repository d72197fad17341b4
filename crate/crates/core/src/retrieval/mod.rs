//! Exact MIPS, ranking metrics and the comparison-grid harness.

mod grid;
mod metrics;
mod mips;
mod qrels;

pub use grid::{
    run_grid, CellResult, CellStatus, Device, FlipMode, GridArtifacts, GridAxes, GridConfig, GridReport, Method,
};
pub use metrics::{ndcg_at_k, recall_at_k, MetricScore};
pub use mips::{exact_mips, rank_scores, RunResult};
pub use qrels::Qrels;
