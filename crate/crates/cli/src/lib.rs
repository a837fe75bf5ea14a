//! Library surface of the `mimocap` binary: scenario configs, task
//! execution, and report emission. Kept as a library so integration tests
//! can drive the same code paths the binary uses.

pub mod config;
pub mod error;
pub mod report;
pub mod tasks;
