//! Affect-prioritized dream replay with evolutionary trajectory updates,
//! demonstrated on a toy program-synthesis task.
//!
//! The crate is organised bottom-up:
//!
//! - [`env`]: the toy task, its exhaustive oracle and target shifts.
//! - [`affect`]: valence/arousal tagging, replay priority, prune predicate.
//! - [`replay`]: the capacity-bounded buffer and its minibatch sampler.
//! - [`evolution`]: fitness, parent selection, mutation, buffer replacement.
//! - [`policy`]: the tabular softmax learner and its reward baseline.
//! - [`harness`]: seeded runs, multi-seed aggregation and experiments.
//! - [`io`]: configuration files, curve CSV, JSON summaries and SVG plots.

pub mod affect;
pub mod env;
pub mod error;
pub mod evolution;
pub mod harness;
pub mod io;
pub mod policy;
pub mod replay;
pub mod util;

pub use error::{Error, Result};
