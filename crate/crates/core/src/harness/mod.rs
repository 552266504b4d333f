mod config;
mod experiments;
mod run;

pub use config::{RunConfig, Variant};
pub use experiments::*;
pub use run::{
    novelty_score, run_single, run_single_with, CurvePoint, EvoLogEntry, LogitsCheckpoint,
    PruneEvent, RunOptions, RunRecord,
};
