//! Files in and out: experiment manifests, curve CSVs, JSON summaries, SVG
//! plots and the canonical reproduction experiments.

pub mod config;
pub mod curve;
pub mod plot;
pub mod reference;
pub mod reproduce;
pub mod summary;

pub use config::{load_manifest, parse_manifest, ExperimentManifest, ManifestRun};
pub use curve::{parse_curve_csv, read_curve_csv, render_curve_csv, render_evo_csv, write_file};
pub use plot::{render_svg, Series};
pub use reference::ReferenceValues;
pub use reproduce::{reproduce, Check, ExperimentId, Reproduction};
pub use summary::{validate_summary, ExperimentSummary, RunEntry};
