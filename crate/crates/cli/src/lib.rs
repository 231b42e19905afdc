//! Experiment runner for the conformal path-planning pipeline:
//! calibration, coverage evaluation, delta sweeps, stage ablations,
//! closed-loop suites, and the external language-model adapter.

pub mod adapter;
pub mod artifacts;
pub mod bench;
pub mod commands;
pub mod config;
pub mod report;
pub mod stats;
pub mod suite;

pub use config::ExperimentConfig;
