//! Command line orchestration of the reseq pipeline and the HTTP service
//! used by the studio front end.
//!
//! - [`config`]: the JSON project file and flag overlay
//! - [`pipeline`]: inputs → distance matrix → pruning → sequencing
//! - [`server`]: the HTTP API over an immutable engine snapshot
//! - [`export`]: numbered frame files for external video tools

pub mod config;
pub mod export;
pub mod failure;
pub mod pipeline;
pub mod server;

pub use failure::Failure;
