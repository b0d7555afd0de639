//! The pipeline stages shared by the commands and the server.

use std::collections::HashSet;
use std::path::PathBuf;

use reseq_core::frameset::{
    ingest_images, list_image_files, load_archive, load_matrix, DistanceMatrix, FeatureArchive, FrameCollection,
};
use reseq_core::graphseq::{
    build_graph, keyframe_path, minimum_spanning_tree, shortest_hamiltonian_cycle, shortest_hamiltonian_path, MstTree,
    SequenceKind, SequenceResult,
};
use reseq_core::layout::{embed_mst_2d, Embedding2D};
use reseq_core::metrics::{compute_distance_matrix, CalibrationWeights, MetricSource};
use reseq_core::outliers::{prune_outliers, PruneConfig, PruneReport};
use serde::Deserialize;

use crate::config::ProjectConfig;
use crate::failure::{CliResult, Failure};

/// Everything loaded from disk before any computation.
#[derive(Debug, Default)]
pub struct Inputs {
    pub frames: Option<FrameCollection>,
    pub features: Option<FeatureArchive>,
    pub weights: Option<CalibrationWeights>,
    pub matrix: Option<DistanceMatrix>,
}

/// Expands directories to their image files, keeping the listed order.
pub fn image_paths(entries: &[PathBuf]) -> CliResult<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in entries {
        if entry.is_dir() {
            out.extend(list_image_files(entry)?);
        } else {
            out.push(entry.clone());
        }
    }
    Ok(out)
}

pub fn load_inputs(config: &ProjectConfig) -> CliResult<Inputs> {
    let frames = if config.images.is_empty() {
        None
    } else {
        Some(ingest_images(&image_paths(&config.images)?)?)
    };
    let features = config.features.as_ref().map(load_archive).transpose()?;
    let weights = match (&config.weights, &features) {
        (Some(path), Some(archive)) => Some(CalibrationWeights::load_json(path, archive)?),
        (Some(_), None) => return Err(Failure::contract("calibration weights need a feature archive (--features)")),
        (None, _) => None,
    };
    let matrix = config.matrix.as_ref().map(load_matrix).transpose()?;
    Ok(Inputs {
        frames,
        features,
        weights,
        matrix,
    })
}

/// The full distance matrix, loaded or computed, with excluded frames
/// already dropped.
pub fn distance_matrix(config: &ProjectConfig, inputs: &Inputs) -> CliResult<DistanceMatrix> {
    let full = match &inputs.matrix {
        Some(m) => m.clone(),
        None => {
            let metric = config.metric();
            let source = if metric.needs_features() {
                MetricSource::Features(inputs.features.as_ref().ok_or_else(|| {
                    Failure::contract(format!("metric {metric} needs a feature archive (--features)"))
                })?)
            } else {
                MetricSource::Frames(
                    inputs
                        .frames
                        .as_ref()
                        .ok_or_else(|| Failure::contract(format!("metric {metric} needs images (--images)")))?,
                )
            };
            compute_distance_matrix(source, metric, inputs.weights.as_ref())?
        }
    };
    Ok(full.without(&config.exclude)?)
}

pub fn prune_config(config: &ProjectConfig) -> PruneConfig {
    PruneConfig {
        k: config.k,
        quantile: config.quantile,
        ..PruneConfig::default()
    }
}

/// Applies outlier pruning unless it is switched off.
pub fn prune(config: &ProjectConfig, m: &DistanceMatrix) -> CliResult<(DistanceMatrix, Option<PruneReport>)> {
    if config.no_prune {
        return Ok((m.clone(), None));
    }
    let (pruned, report) = prune_outliers(m, &prune_config(config))?;
    Ok((pruned, Some(report)))
}

/// What to sequence; mirrors the body of `POST /api/sequence`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceRequest {
    pub kind: SequenceKind,
    #[serde(default)]
    pub keyframes: Option<Vec<String>>,
    #[serde(default)]
    pub start: Option<String>,
    #[serde(default)]
    pub end: Option<String>,
    #[serde(default)]
    pub no_prune: bool,
}

/// Solves `req` on `m`. `tree` is reused for key-frame requests when it
/// spans `m`.
pub fn solve(
    config: &ProjectConfig,
    m: &DistanceMatrix,
    tree: Option<&MstTree>,
    req: &SequenceRequest,
) -> CliResult<SequenceResult> {
    let g = build_graph(m)?;
    match req.kind {
        SequenceKind::Path => {
            if req.keyframes.is_some() {
                return Err(Failure::contract("key-frames only apply to keyframe sequences"));
            }
            for id in req.start.iter().chain(&req.end) {
                check_known(m, id)?;
            }
            Ok(shortest_hamiltonian_path(&g, req.start.as_deref(), req.end.as_deref(), &config.solver)?)
        }
        SequenceKind::Cycle => {
            if req.start.is_some() || req.end.is_some() || req.keyframes.is_some() {
                return Err(Failure::contract("cycles take no start, end or key-frames"));
            }
            Ok(shortest_hamiltonian_cycle(&g, &config.solver)?)
        }
        SequenceKind::Keyframe => {
            if req.start.is_some() || req.end.is_some() {
                return Err(Failure::contract("keyframe sequences take no start or end; list the key-frames"));
            }
            let keys = req
                .keyframes
                .as_deref()
                .ok_or_else(|| Failure::contract("keyframe sequences need a list of key-frames"))?;
            for id in keys {
                check_known(m, id)?;
            }
            match tree {
                Some(t) if t.frame_ids() == m.frame_ids() => Ok(keyframe_path(t, keys)?),
                _ => Ok(keyframe_path(&minimum_spanning_tree(&g), keys)?),
            }
        }
    }
}

fn check_known(m: &DistanceMatrix, id: &str) -> CliResult<()> {
    if m.index_of(id).is_none() {
        return Err(Failure::contract(format!("frame {id:?} is not among the {} sequenced frames", m.n())));
    }
    Ok(())
}

/// The immutable state the server answers from. Every component covers the
/// same surviving frame set, except `matrix` and `frames`, which keep the
/// outliers so requests can opt out of pruning.
#[derive(Debug)]
pub struct EngineSnapshot {
    pub frames: Option<FrameCollection>,
    pub matrix: DistanceMatrix,
    pub pruned: DistanceMatrix,
    pub report: Option<PruneReport>,
    pub tree: MstTree,
    pub embedding: Embedding2D,
}

impl EngineSnapshot {
    pub fn build(config: &ProjectConfig) -> CliResult<Self> {
        let inputs = load_inputs(config)?;
        let matrix = distance_matrix(config, &inputs)?;
        let (pruned, report) = prune(config, &matrix)?;
        let tree = minimum_spanning_tree(&build_graph(&pruned)?);
        let embedding = embed_mst_2d(&tree, &pruned)?;
        Ok(Self {
            frames: inputs.frames,
            matrix,
            pruned,
            report,
            tree,
            embedding,
        })
    }

    pub fn outliers(&self) -> HashSet<&str> {
        self.report
            .iter()
            .flat_map(|r| r.removed_ids.iter().map(String::as_str))
            .collect()
    }
}
