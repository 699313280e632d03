//! Command implementations behind the `sandbubbler` binary.

pub mod commands;
pub mod compare;
pub mod config;
pub mod sweep;

pub use commands::{
    cmd_build_table, cmd_generate, cmd_guided, cmd_measure, cmd_sweep, MeasureOutcome,
};
pub use compare::{run_comparison, Comparison, ComparisonRow, ComparisonSpec, Variant};
pub use config::{Grids, RunConfig, DESK_SCALE, PAPER_SCALE};
pub use sweep::{run_sweep, SweepResult, SweepRow, SweepSpec, SweptParameter};
