//! Frame resequencing engine.
//!
//! Turns an unordered collection of frames (raw images or precomputed deep
//! feature archives) into smooth sequences by minimizing perceptual distance
//! along graph traversals: shortest Hamiltonian paths and cycles over the
//! complete distance graph, and key-frame paths through its minimum spanning
//! tree. Frames whose nearest-neighbour distances are improbably large under a
//! fitted generalized gamma model can be pruned before sequencing.
//!
//! The modules follow the processing pipeline:
//!
//! - [`frameset`]: frame ingestion and the `PFA1` / `PDM1` binary formats
//! - [`metrics`]: LPIPS, cosine and L2 distances plus calibration fitting
//! - [`outliers`]: k-NN statistic, generalized gamma MLE and pruning
//! - [`graphseq`]: complete graph, MST, Hamiltonian path/cycle, key-frame paths
//! - [`evalkit`]: shuffled-reconstruction experiments scored by Kendall tau
//! - [`layout`]: MST embedding and composite image layouts
//! - [`json`]: deterministic JSON output

pub mod error;
pub mod evalkit;
pub mod frameset;
pub mod graphseq;
pub mod json;
pub mod layout;
pub mod metrics;
pub mod numeric;
pub mod outliers;

pub use error::{Error, Result};
