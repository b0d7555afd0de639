//! Pairwise perceptual distances and calibration of the LPIPS channel weights.
//!
//! LPIPS over unit-normalized activations `ŷ` with per-channel weights `w_l`:
//!
//! ```text
//! d(i, j) = Σ_l 1/(H_l W_l) Σ_{h,w} ‖ w_l ⊙ (ŷ_i,l,hw − ŷ_j,l,hw) ‖²
//! ```
//!
//! Calibration fits `w_l` together with a two-parameter judge
//! `G(d0, d1) = σ(a (d0 − d1) + b)` by minimizing the binary cross entropy
//! against human-style judgments `h`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frameset::{DistanceMatrix, FeatureArchive, FrameCollection, FrameRecord};
use crate::numeric::{logistic, softplus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    Lpips,
    Cosine,
    L2Image,
    L2Feature,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Lpips, Metric::Cosine, Metric::L2Image, Metric::L2Feature];

    pub fn tag(self) -> &'static str {
        match self {
            Metric::Lpips => "lpips",
            Metric::Cosine => "cosine",
            Metric::L2Image => "l2-image",
            Metric::L2Feature => "l2-feature",
        }
    }

    /// Whether the metric reads a feature archive rather than pixels.
    pub fn needs_features(self) -> bool {
        !matches!(self, Metric::L2Image)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.tag() == s || m.tag().replace('-', "_") == s)
            .ok_or_else(|| Error::contract(format!("unknown metric {s:?}")))
    }
}

/// Nonnegative per-channel weights, one vector per archive layer.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationWeights {
    per_layer: Vec<Vec<f64>>,
}

impl CalibrationWeights {
    pub fn new(per_layer: Vec<Vec<f64>>) -> Result<Self> {
        for (l, w) in per_layer.iter().enumerate() {
            if let Some(bad) = w.iter().find(|v| !v.is_finite() || **v < 0.0) {
                return Err(Error::contract(format!(
                    "layer {l} weight {bad} is not a finite nonnegative value"
                )));
            }
        }
        Ok(Self { per_layer })
    }

    /// All-ones weights shaped after `archive`.
    pub fn uniform(archive: &FeatureArchive) -> Self {
        Self {
            per_layer: archive.layers().iter().map(|l| vec![1.0; l.c]).collect(),
        }
    }

    pub fn layers(&self) -> &[Vec<f64>] {
        &self.per_layer
    }

    pub fn check_shape(&self, archive: &FeatureArchive) -> Result<()> {
        let layers = archive.layers();
        if self.per_layer.len() != layers.len() {
            return Err(Error::contract(format!(
                "weights cover {} layers, archive has {}",
                self.per_layer.len(),
                layers.len()
            )));
        }
        for (w, spec) in self.per_layer.iter().zip(layers) {
            if w.len() != spec.c {
                return Err(Error::contract(format!(
                    "layer {:?}: {} weights for {} channels",
                    spec.name,
                    w.len(),
                    spec.c
                )));
            }
        }
        Ok(())
    }

    /// Build from a `{layer_name: [w...]}` map, ordered by the archive's layers.
    pub fn from_named(map: &BTreeMap<String, Vec<f64>>, archive: &FeatureArchive) -> Result<Self> {
        let per_layer = archive
            .layers()
            .iter()
            .map(|spec| {
                map.get(&spec.name)
                    .cloned()
                    .ok_or_else(|| Error::contract(format!("weights JSON lacks layer {:?}", spec.name)))
            })
            .collect::<Result<Vec<_>>>()?;
        let weights = Self::new(per_layer)?;
        weights.check_shape(archive)?;
        Ok(weights)
    }

    pub fn to_named(&self, archive: &FeatureArchive) -> IndexMap<String, Vec<f64>> {
        archive
            .layers()
            .iter()
            .zip(&self.per_layer)
            .map(|(spec, w)| (spec.name.clone(), w.clone()))
            .collect()
    }

    pub fn load_json(path: impl AsRef<Path>, archive: &FeatureArchive) -> Result<Self> {
        let map: BTreeMap<String, Vec<f64>> = serde_json::from_slice(&std::fs::read(path)?)?;
        Self::from_named(&map, archive)
    }

    pub fn save_json(&self, path: impl AsRef<Path>, archive: &FeatureArchive) -> Result<()> {
        std::fs::write(path, serde_json::to_vec_pretty(&self.to_named(archive))?)?;
        Ok(())
    }
}

fn require_normalized(archive: &FeatureArchive) -> Result<()> {
    if !archive.is_normalized() {
        return Err(Error::contract(
            "archive is not channel-normalized; normalize it before computing lpips/cosine",
        ));
    }
    Ok(())
}

fn check_frame(archive: &FeatureArchive, i: usize) -> Result<()> {
    if i >= archive.num_frames() {
        return Err(Error::contract(format!(
            "frame index {i} out of range for {} frames",
            archive.num_frames()
        )));
    }
    Ok(())
}

/// Spatially averaged squared difference per channel, per layer:
/// `s[l][c] = 1/(H W) Σ_{h,w} (ŷ_i − ŷ_j)²`.
pub(crate) fn channel_sq_diff(archive: &FeatureArchive, i: usize, j: usize) -> Vec<Vec<f64>> {
    archive
        .layers()
        .iter()
        .enumerate()
        .map(|(l, spec)| {
            let (a, b) = (archive.tensor(i, l), archive.tensor(j, l));
            let hw = spec.spatial();
            (0..spec.c)
                .map(|ch| {
                    let range = ch * hw..(ch + 1) * hw;
                    let sum: f64 = a[range.clone()]
                        .iter()
                        .zip(&b[range])
                        .map(|(x, y)| {
                            let d = *x as f64 - *y as f64;
                            d * d
                        })
                        .sum();
                    sum / hw as f64
                })
                .collect()
        })
        .collect()
}

pub fn lpips_distance(archive: &FeatureArchive, i: usize, j: usize, weights: &CalibrationWeights) -> Result<f64> {
    require_normalized(archive)?;
    weights.check_shape(archive)?;
    check_frame(archive, i)?;
    check_frame(archive, j)?;
    if i == j {
        return Ok(0.0);
    }
    // order-independent so that d(i, j) and d(j, i) are bit-identical
    let (i, j) = (i.min(j), i.max(j));
    let s = channel_sq_diff(archive, i, j);
    Ok(s.iter()
        .zip(weights.layers())
        .map(|(sl, wl)| sl.iter().zip(wl).map(|(s, w)| w * w * s).sum::<f64>())
        .sum())
}

pub fn cosine_distance(archive: &FeatureArchive, i: usize, j: usize) -> Result<f64> {
    require_normalized(archive)?;
    check_frame(archive, i)?;
    check_frame(archive, j)?;
    let (i, j) = (i.min(j), i.max(j));
    let mut total = 0.0;
    for (l, spec) in archive.layers().iter().enumerate() {
        let (a, b) = (archive.tensor(i, l), archive.tensor(j, l));
        let hw = spec.spatial();
        let mut dot_sum = 0.0;
        for pos in 0..hw {
            if i == j {
                // unit vectors dot themselves to exactly 1, dead positions to 0
                let live = (0..spec.c).any(|ch| a[ch * hw + pos] != 0.0);
                dot_sum += if live { 1.0 } else { 0.0 };
            } else {
                dot_sum += (0..spec.c)
                    .map(|ch| a[ch * hw + pos] as f64 * b[ch * hw + pos] as f64)
                    .sum::<f64>();
            }
        }
        total += 1.0 - dot_sum / hw as f64;
    }
    Ok(total.max(0.0))
}

/// Euclidean distance between two RGB frames of identical size.
pub fn l2_image_distance(a: &FrameRecord, b: &FrameRecord) -> Result<f64> {
    let pa = a
        .pixels
        .as_ref()
        .ok_or_else(|| Error::contract(format!("frame {:?} has no pixels", a.id)))?;
    let pb = b
        .pixels
        .as_ref()
        .ok_or_else(|| Error::contract(format!("frame {:?} has no pixels", b.id)))?;
    if pa.width() != pb.width() || pa.height() != pb.height() {
        return Err(Error::contract(format!(
            "frames {:?} ({}x{}) and {:?} ({}x{}) differ in size",
            a.id,
            pa.width(),
            pa.height(),
            b.id,
            pb.width(),
            pb.height()
        )));
    }
    Ok(euclidean(pa.data(), pb.data()))
}

fn euclidean(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = *x as f64 - *y as f64;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Euclidean distance between two flat feature vectors.
pub fn l2_feature_distance<V: AsRef<[f32]>>(vecs: &[V], i: usize, j: usize) -> Result<f64> {
    let (a, b) = match (vecs.get(i), vecs.get(j)) {
        (Some(a), Some(b)) => (a.as_ref(), b.as_ref()),
        _ => return Err(Error::contract(format!("vector index ({i}, {j}) out of range"))),
    };
    if a.len() != b.len() {
        return Err(Error::contract(format!(
            "feature vectors {i} and {j} have lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    let (a, b) = if i <= j { (a, b) } else { (b, a) };
    Ok(euclidean(a, b))
}

/// What a distance matrix is computed from.
#[derive(Debug, Clone, Copy)]
pub enum MetricSource<'a> {
    Frames(&'a FrameCollection),
    Features(&'a FeatureArchive),
}

impl MetricSource<'_> {
    pub fn frame_ids(&self) -> Vec<String> {
        match self {
            MetricSource::Frames(c) => c.ids(),
            MetricSource::Features(a) => a.frame_ids().to_vec(),
        }
    }
}

/// Full pairwise matrix. Each unordered pair is computed once (in parallel)
/// and mirrored, so the output does not depend on the thread schedule.
pub fn compute_distance_matrix(
    source: MetricSource<'_>,
    metric: Metric,
    weights: Option<&CalibrationWeights>,
) -> Result<DistanceMatrix> {
    let ids = source.frame_ids();
    let n = ids.len();
    let default_weights;
    let pair: Box<dyn Fn(usize, usize) -> Result<f64> + Sync> = match (metric, source) {
        (Metric::Lpips, MetricSource::Features(a)) => {
            require_normalized(a)?;
            let w = match weights {
                Some(w) => w,
                None => {
                    default_weights = CalibrationWeights::uniform(a);
                    &default_weights
                }
            };
            w.check_shape(a)?;
            Box::new(move |i, j| lpips_distance(a, i, j, w))
        }
        (Metric::Cosine, MetricSource::Features(a)) => {
            require_normalized(a)?;
            Box::new(move |i, j| cosine_distance(a, i, j))
        }
        (Metric::L2Feature, MetricSource::Features(a)) => {
            Box::new(move |i, j| Ok(euclidean(a.frame_vector(i), a.frame_vector(j))))
        }
        (Metric::L2Image, MetricSource::Frames(c)) => {
            let frames = c.frames();
            Box::new(move |i, j| l2_image_distance(&frames[i], &frames[j]))
        }
        (Metric::L2Image, MetricSource::Features(_)) => {
            return Err(Error::contract("metric l2-image needs decoded image frames"))
        }
        (m, MetricSource::Frames(_)) => {
            return Err(Error::contract(format!(
                "metric {m} needs a feature archive (PFA1)"
            )))
        }
    };

    let rows: Vec<Vec<Result<f64>>> = (0..n)
        .into_par_iter()
        .map(|i| (i + 1..n).map(|j| pair(i, j)).collect())
        .collect();
    let mut upper = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for (i, row) in rows.into_iter().enumerate() {
        for (off, r) in row.into_iter().enumerate() {
            let j = i + 1 + off;
            let v = r.map_err(|e| match e {
                Error::Contract(msg) => Error::Contract(format!("pair ({}, {}): {msg}", ids[i], ids[j])),
                other => other,
            })?;
            if !v.is_finite() {
                return Err(Error::Validation(format!(
                    "pair ({}, {}) produced non-finite distance {v}",
                    ids[i], ids[j]
                )));
            }
            upper.push(v);
        }
    }
    let mut it = upper.into_iter();
    DistanceMatrix::from_upper(ids, metric.tag(), |_, _| it.next().unwrap())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JudgeParams {
    pub a: f64,
    pub b: f64,
}

impl Default for JudgeParams {
    fn default() -> Self {
        Self { a: 1.0, b: 0.0 }
    }
}

/// Probability that the reference looks closer to `x1` than to `x0`.
pub fn judge(g: JudgeParams, d0: f64, d1: f64) -> f64 {
    logistic(g.a * (d0 - d1) + g.b)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgmentTriple {
    #[serde(rename = "ref")]
    pub reference: String,
    #[serde(rename = "x0")]
    pub distorted0: String,
    #[serde(rename = "x1")]
    pub distorted1: String,
    pub h: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Mini-batch size; `None` means full-batch gradient descent.
    pub batch_size: Option<usize>,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            epochs: 200,
            seed: 0,
            batch_size: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationParams {
    pub weights: CalibrationWeights,
    pub judge: JudgeParams,
}

impl CalibrationParams {
    pub fn initial(archive: &FeatureArchive) -> Self {
        Self {
            weights: CalibrationWeights::uniform(archive),
            judge: JudgeParams::default(),
        }
    }

    /// `[w_0..., w_1..., ..., a, b]`
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.weights.per_layer.iter().flatten().copied().collect();
        v.push(self.judge.a);
        v.push(self.judge.b);
        v
    }

    pub fn from_flat(&self, flat: &[f64]) -> Self {
        let mut it = flat.iter().copied();
        let per_layer = self
            .weights
            .per_layer
            .iter()
            .map(|w| w.iter().map(|_| it.next().unwrap()).collect())
            .collect();
        let a = it.next().unwrap();
        let b = it.next().unwrap();
        Self {
            weights: CalibrationWeights { per_layer },
            judge: JudgeParams { a, b },
        }
    }
}

struct PreparedTriple {
    s0: Vec<Vec<f64>>,
    s1: Vec<Vec<f64>>,
    h: f64,
}

/// Judgment data reduced to per-channel squared differences, so distances
/// and gradients are cheap to evaluate for any weights.
pub struct CalibrationProblem {
    triples: Vec<PreparedTriple>,
}

fn weighted(s: &[Vec<f64>], w: &CalibrationWeights) -> f64 {
    s.iter()
        .zip(&w.per_layer)
        .map(|(sl, wl)| sl.iter().zip(wl).map(|(s, w)| w * w * s).sum::<f64>())
        .sum()
}

impl CalibrationProblem {
    pub fn new(archive: &FeatureArchive, judgments: &[JudgmentTriple]) -> Result<Self> {
        require_normalized(archive)?;
        if judgments.is_empty() {
            return Err(Error::contract("calibration needs at least one judgment"));
        }
        let resolve = |id: &str| {
            archive
                .index_of(id)
                .ok_or_else(|| Error::contract(format!("judgment references unknown frame {id:?}")))
        };
        let triples = judgments
            .iter()
            .map(|t| {
                if !(0.0..=1.0).contains(&t.h) {
                    return Err(Error::contract(format!("judgment h = {} outside [0, 1]", t.h)));
                }
                let r = resolve(&t.reference)?;
                let x0 = resolve(&t.distorted0)?;
                let x1 = resolve(&t.distorted1)?;
                Ok(PreparedTriple {
                    s0: channel_sq_diff(archive, r.min(x0), r.max(x0)),
                    s1: channel_sq_diff(archive, r.min(x1), r.max(x1)),
                    h: t.h,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { triples })
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    /// `(d0, d1)` for triple `t` under `weights`.
    pub fn distances(&self, t: usize, weights: &CalibrationWeights) -> (f64, f64) {
        let tr = &self.triples[t];
        (weighted(&tr.s0, weights), weighted(&tr.s1, weights))
    }

    /// Mean cross-entropy `−h log G − (1 − h) log(1 − G)` over all triples.
    pub fn loss(&self, p: &CalibrationParams) -> f64 {
        let idx: Vec<usize> = (0..self.len()).collect();
        self.loss_on(p, &idx)
    }

    fn loss_on(&self, p: &CalibrationParams, idx: &[usize]) -> f64 {
        let total: f64 = idx
            .iter()
            .map(|&t| {
                let (d0, d1) = self.distances(t, &p.weights);
                let z = p.judge.a * (d0 - d1) + p.judge.b;
                // −h log σ(z) − (1−h) log(1−σ(z)) = softplus(z) − h z
                softplus(z) - self.triples[t].h * z
            })
            .sum();
        total / idx.len() as f64
    }

    /// Analytic gradient of [`loss`](Self::loss), flattened like
    /// [`CalibrationParams::to_flat`].
    pub fn gradient(&self, p: &CalibrationParams) -> Vec<f64> {
        let idx: Vec<usize> = (0..self.len()).collect();
        self.gradient_on(p, &idx)
    }

    fn gradient_on(&self, p: &CalibrationParams, idx: &[usize]) -> Vec<f64> {
        let w = &p.weights.per_layer;
        let mut gw: Vec<Vec<f64>> = w.iter().map(|l| vec![0.0; l.len()]).collect();
        let (mut ga, mut gb) = (0.0, 0.0);
        for &t in idx {
            let tr = &self.triples[t];
            let (d0, d1) = self.distances(t, &p.weights);
            let z = p.judge.a * (d0 - d1) + p.judge.b;
            let dz = logistic(z) - tr.h;
            ga += dz * (d0 - d1);
            gb += dz;
            for (l, wl) in w.iter().enumerate() {
                for (c, wc) in wl.iter().enumerate() {
                    gw[l][c] += dz * p.judge.a * 2.0 * wc * (tr.s0[l][c] - tr.s1[l][c]);
                }
            }
        }
        let scale = 1.0 / idx.len() as f64;
        let mut flat: Vec<f64> = gw.into_iter().flatten().map(|g| g * scale).collect();
        flat.push(ga * scale);
        flat.push(gb * scale);
        flat
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationFit {
    pub weights: CalibrationWeights,
    pub judge: JudgeParams,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub epochs_run: usize,
}

/// Gradient descent on `(w_l, a, b)` with features frozen. Weights are
/// clamped at zero after every step; the best full-data loss seen is kept,
/// so `final_loss <= initial_loss`.
pub fn fit_calibration(
    archive: &FeatureArchive,
    judgments: &[JudgmentTriple],
    config: &CalibrationConfig,
) -> Result<CalibrationFit> {
    if !(config.learning_rate > 0.0 && config.learning_rate.is_finite()) {
        return Err(Error::contract("learning rate must be positive and finite"));
    }
    let problem = CalibrationProblem::new(archive, judgments)?;
    let mut params = CalibrationParams::initial(archive);
    let initial_loss = problem.loss(&params);
    if !initial_loss.is_finite() {
        return Err(Error::Numerical {
            epoch: 0,
            message: format!("initial loss is {initial_loss}"),
        });
    }
    let n_w = params.to_flat().len() - 2;
    let mut best = (initial_loss, params.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..problem.len()).collect();
    let batch = config.batch_size.unwrap_or(problem.len()).clamp(1, problem.len());

    for epoch in 1..=config.epochs {
        if batch < problem.len() {
            order.shuffle(&mut rng);
        }
        for chunk in order.chunks(batch) {
            let grad = problem.gradient_on(&params, chunk);
            let mut flat = params.to_flat();
            for (k, (x, g)) in flat.iter_mut().zip(&grad).enumerate() {
                *x -= config.learning_rate * g;
                if k < n_w {
                    *x = x.max(0.0);
                }
            }
            params = params.from_flat(&flat);
        }
        let loss = problem.loss(&params);
        if !loss.is_finite() {
            return Err(Error::Numerical {
                epoch,
                message: format!("training loss became {loss}"),
            });
        }
        if loss < best.0 {
            best = (loss, params.clone());
        }
    }

    let (final_loss, params) = best;
    Ok(CalibrationFit {
        weights: params.weights,
        judge: params.judge,
        initial_loss,
        final_loss,
        epochs_run: config.epochs,
    })
}
