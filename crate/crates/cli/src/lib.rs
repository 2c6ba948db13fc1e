//! Experiment orchestration for the bound laboratory: config ingestion,
//! runners, and verifiable report files. The `cmilab` binary is a thin
//! wrapper over these modules.

pub mod config;
pub mod experiments;
pub mod report;
