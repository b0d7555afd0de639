//! Reconstruction experiments: shuffle a known-ordered animation, resequence
//! it with a Hamiltonian path pinned at the true first and last frames, and
//! score the result with the normalized Kendall tau distance.

use std::collections::HashMap;
use std::hash::Hash;

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frameset::{FeatureArchive, FrameCollection, FrameRecord, Raster, SourceKind};
use crate::graphseq::{build_graph, shortest_hamiltonian_path, SequenceResult, SolverConfig};
use crate::metrics::{compute_distance_matrix, CalibrationWeights, Metric, MetricSource};

/// Number of discordant pairs between two orderings of the same items.
pub fn discordant_pairs<T: Eq + Hash>(ground: &[T], candidate: &[T]) -> Result<u64> {
    if ground.len() != candidate.len() {
        return Err(Error::contract(format!(
            "candidate has {} items, ground truth has {}",
            candidate.len(),
            ground.len()
        )));
    }
    let mut rank: HashMap<&T, usize> = HashMap::with_capacity(ground.len());
    for (i, g) in ground.iter().enumerate() {
        if rank.insert(g, i).is_some() {
            return Err(Error::contract("ground truth contains duplicates"));
        }
    }
    let mut seen = vec![false; ground.len()];
    let mut ranks = Vec::with_capacity(candidate.len());
    for c in candidate {
        match rank.get(c) {
            Some(&r) if !seen[r] => {
                seen[r] = true;
                ranks.push(r);
            }
            _ => return Err(Error::contract("candidate is not a permutation of the ground truth")),
        }
    }
    Ok(count_inversions(&mut ranks))
}

/// Merge-sort inversion count; sorts `v` in place.
fn count_inversions(v: &mut [usize]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut count = count_inversions(&mut v[..mid]) + count_inversions(&mut v[mid..]);
    let mut merged = Vec::with_capacity(n);
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[i] <= v[j] {
            merged.push(v[i]);
            i += 1;
        } else {
            merged.push(v[j]);
            count += (mid - i) as u64;
            j += 1;
        }
    }
    merged.extend_from_slice(&v[i..mid]);
    merged.extend_from_slice(&v[j..n]);
    v.copy_from_slice(&merged);
    count
}

/// `2 / (m (m − 1))` times the number of discordant pairs.
pub fn kendall_tau_normalized<T: Eq + Hash>(ground: &[T], candidate: &[T]) -> Result<f64> {
    let m = ground.len();
    if m < 2 {
        return Err(Error::contract(format!("need at least 2 items, got {m}")));
    }
    let d = discordant_pairs(ground, candidate)?;
    Ok(2.0 * d as f64 / (m as f64 * (m as f64 - 1.0)))
}

/// One animation in ground-truth order.
#[derive(Debug, Clone)]
pub struct EvalCase {
    pub name: String,
    pub frames: FrameCollection,
    /// Required for feature-space metrics; must list the same ids.
    pub features: Option<FeatureArchive>,
    /// Set to keep the case out of the run while still listing it.
    pub exclusion: Option<String>,
}

impl EvalCase {
    pub fn new(name: impl Into<String>, frames: FrameCollection) -> Self {
        Self {
            name: name.into(),
            frames,
            features: None,
            exclusion: None,
        }
    }
}

/// A procedurally drawn animation with a known order: a soft blob drifts
/// between two random points while it grows, changes hue and the background
/// brightens. Every frame differs smoothly and monotonically from the last.
pub fn procedural_case(name: impl Into<String>, m: usize, seed: u64) -> Result<EvalCase> {
    if m < 2 {
        return Err(Error::contract(format!("a procedural case needs at least 2 frames, got {m}")));
    }
    let (w, h) = (32u32, 24u32);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let from = [rng.random_range(4.0..12.0), rng.random_range(4.0..20.0)];
    let to = [rng.random_range(20.0..28.0), rng.random_range(4.0..20.0)];
    let (r0, r1) = (rng.random_range(2.5..4.0), rng.random_range(5.0..7.0));
    let hue: [f32; 3] = [rng.random_range(0.5..1.0), rng.random_range(0.0..0.5), rng.random_range(0.2..0.9)];
    let frames = (0..m)
        .map(|i| {
            let t = i as f64 / (m - 1) as f64;
            let cx = from[0] + (to[0] - from[0]) * t;
            let cy = from[1] + (to[1] - from[1]) * t;
            let r = r0 + (r1 - r0) * t;
            let bg = 0.1 + 0.2 * t as f32;
            let color = [hue[0] * (1.0 - 0.5 * t as f32), hue[1] + 0.4 * t as f32, hue[2]];
            let mut data = Vec::with_capacity((w * h * 3) as usize);
            for y in 0..h {
                for x in 0..w {
                    let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
                    let a = (-d2 / (2.0 * r * r)).exp() as f32;
                    data.extend(color.iter().map(|c| bg + (c - bg) * a));
                }
            }
            Ok(FrameRecord::with_pixels(format!("{i:03}"), Raster::new(w, h, data)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalCase::new(name, FrameCollection::new(frames, SourceKind::Images)?))
}

#[derive(Debug, Clone, Default)]
pub struct ReconstructionConfig {
    pub solver: SolverConfig,
    /// Seeds the shuffle applied before resequencing.
    pub shuffle_seed: u64,
    pub weights: Option<CalibrationWeights>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionCase {
    pub name: String,
    pub ground_truth_order: Vec<String>,
    pub metric: Metric,
    pub result: SequenceResult,
    pub kendall_tau: f64,
    pub shuffle_seed: u64,
    /// Always true: the path is pinned at the true first and last frames.
    pub ground_truth_endpoints: bool,
}

/// Shuffle, resequence with the true endpoints fixed, and score. Outlier
/// pruning is never applied here.
pub fn run_reconstruction(case: &EvalCase, metric: Metric, config: &ReconstructionConfig) -> Result<ReconstructionCase> {
    let ground = case.frames.ids();
    let m = ground.len();
    if m < 3 {
        return Err(Error::contract(format!("case {:?} has {m} frames; need at least 3", case.name)));
    }
    let mut perm: Vec<usize> = (0..m).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(config.shuffle_seed));

    let frames = case.frames.select(&perm)?;
    let features = match &case.features {
        Some(archive) => {
            let idx = ground
                .iter()
                .map(|id| {
                    archive.index_of(id).ok_or_else(|| {
                        Error::contract(format!("case {:?}: frame {id:?} missing from feature archive", case.name))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Some(archive.select(&perm.iter().map(|&p| idx[p]).collect::<Vec<_>>())?)
        }
        None => None,
    };
    let source = match (&features, metric.needs_features()) {
        (Some(a), true) => MetricSource::Features(a),
        _ => MetricSource::Frames(&frames),
    };
    let matrix = compute_distance_matrix(source, metric, config.weights.as_ref())?;
    let graph = build_graph(&matrix)?;
    let result = shortest_hamiltonian_path(&graph, Some(&ground[0]), Some(&ground[m - 1]), &config.solver)?;
    let kendall_tau = kendall_tau_normalized(&ground, &result.order)?;
    Ok(ReconstructionCase {
        name: case.name.clone(),
        ground_truth_order: ground,
        metric,
        result,
        kendall_tau,
        shuffle_seed: config.shuffle_seed,
        ground_truth_endpoints: true,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseFailure {
    pub name: String,
    pub metric: Metric,
    pub kind: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub name: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub cases: Vec<ReconstructionCase>,
    /// Mean tau over successful cases, keyed by metric tag in request order.
    pub mean_tau: IndexMap<String, f64>,
    pub failures: Vec<CaseFailure>,
    pub exclusions: Vec<Exclusion>,
}

impl EvalReport {
    /// Columns: case, metric, m, tau, solver, seed.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["case", "metric", "m", "tau", "solver", "seed"])?;
        for c in &self.cases {
            w.write_record([
                c.name.clone(),
                c.metric.tag().to_owned(),
                c.ground_truth_order.len().to_string(),
                crate::json::format_f64(c.kendall_tau),
                c.result.solver.clone(),
                c.shuffle_seed.to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Runs every case against every metric. Failing cases are recorded and the
/// suite carries on.
pub fn run_suite(cases: &[EvalCase], metrics: &[Metric], config: &ReconstructionConfig) -> Result<EvalReport> {
    if cases.is_empty() {
        return Err(Error::contract("the suite needs at least one case"));
    }
    if metrics.is_empty() {
        return Err(Error::contract("the suite needs at least one metric"));
    }
    let exclusions: Vec<Exclusion> = cases
        .iter()
        .filter_map(|c| {
            c.exclusion.as_ref().map(|r| Exclusion {
                name: c.name.clone(),
                reason: r.clone(),
            })
        })
        .collect();
    let jobs: Vec<(&EvalCase, Metric)> = metrics
        .iter()
        .flat_map(|&m| cases.iter().filter(|c| c.exclusion.is_none()).map(move |c| (c, m)))
        .collect();
    let outcomes: Vec<_> = jobs
        .par_iter()
        .map(|&(c, m)| (c, m, run_reconstruction(c, m, config)))
        .collect();

    let mut report = EvalReport {
        cases: Vec::new(),
        mean_tau: IndexMap::new(),
        failures: Vec::new(),
        exclusions,
    };
    for (c, m, outcome) in outcomes {
        match outcome {
            Ok(r) => report.cases.push(r),
            Err(e) => report.failures.push(CaseFailure {
                name: c.name.clone(),
                metric: m,
                kind: e.kind().to_owned(),
                message: e.to_string(),
            }),
        }
    }
    for &m in metrics {
        let taus: Vec<f64> = report.cases.iter().filter(|c| c.metric == m).map(|c| c.kendall_tau).collect();
        if !taus.is_empty() {
            report.mean_tau.insert(m.tag().to_owned(), taus.iter().sum::<f64>() / taus.len() as f64);
        }
    }
    Ok(report)
}
