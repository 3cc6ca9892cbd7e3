//! Benchmarking toolkit for prompt-based educational question generation:
//! corpus handling, prompt rendering, generation drivers, automatic metrics,
//! inter-rater agreement and report rendering.

pub mod agreement;
pub mod corpus;
pub mod digest;
pub mod fixtures;
pub mod generation;
pub mod metrics;
pub mod promptkit;
pub mod report;
pub mod text;
