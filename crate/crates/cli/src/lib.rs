//! Library side of the `bimc` command line tool: configuration parsing,
//! report emission, and the sweep harness. The binary in `main.rs` is a
//! thin dispatcher over these modules, which keeps every piece testable
//! in-process.

pub mod config;
pub mod report;
pub mod sweep;
