//! Scene files, synthetic scene generation, CLI plumbing, and CSV reports
//! around the `egoeval-core` metric library.

pub use egoeval_core as core;

pub mod cli;
pub mod jsonl;
pub mod manifest;
pub mod report;
pub mod synth;
