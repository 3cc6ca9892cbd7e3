//! Command-line driver and rating service for the question generation
//! benchmark.

pub mod cli;
pub mod config;
pub mod service;
pub mod store;

/// Score report stored next to a run's results.
pub const SCORES_FILE: &str = "scores.json";
