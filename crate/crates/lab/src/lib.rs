//! Experiment runner over the averaging-operator library: builds
//! configurations, drives norm/decay sweeps and exact region and datum
//! checks, and emits machine-readable reports (JSON, CSV, plot-ready
//! two-column .dat files) with seed-deterministic content.

pub mod commands;
pub mod config;
pub mod families;
pub mod report;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] avelab_core::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;
