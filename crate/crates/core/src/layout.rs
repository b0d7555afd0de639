//! 2D embeddings of the spanning tree and composite image layouts.
//!
//! The embedding is classical multidimensional scaling of the tree's
//! geodesic distances (or, optionally, the raw matrix): double-center the
//! squared distances and keep the top two spectral axes.

use std::path::Path;

use indexmap::IndexMap;
use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frameset::{DistanceMatrix, FrameCollection, Raster};
use crate::graphseq::{MstTree, SequenceResult};

/// Eigenvalues at or below this fraction of the largest count as zero.
const RANK_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmbeddingSource {
    /// Shortest-path distances through the spanning tree.
    #[default]
    TreeGeodesic,
    /// The distance matrix itself.
    RawMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding2D {
    pub frame_ids: Vec<String>,
    pub coords: Vec<[f64; 2]>,
    /// Kruskal stress-1 against the source distances.
    pub stress: f64,
    /// Set when the source has fewer than two positive spectral axes; the
    /// missing axes are zero.
    pub degenerate: bool,
    pub source: EmbeddingSource,
}

#[derive(Serialize)]
struct EmbeddingJson<'a> {
    coords: IndexMap<&'a str, [f64; 2]>,
    stress: f64,
    degenerate: bool,
    source: EmbeddingSource,
}

impl Serialize for Embedding2D {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        EmbeddingJson {
            coords: self.frame_ids.iter().map(String::as_str).zip(self.coords.iter().copied()).collect(),
            stress: self.stress,
            degenerate: self.degenerate,
            source: self.source,
        }
        .serialize(s)
    }
}

/// All-pairs tree distances, row-major.
pub fn tree_geodesics(t: &MstTree) -> Vec<f64> {
    let n = t.n();
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        out.extend(t.geodesics_from(i));
    }
    out
}

/// Classical MDS over the tree's geodesic distances.
pub fn embed_mst_2d(t: &MstTree, m: &DistanceMatrix) -> Result<Embedding2D> {
    embed_2d(t, m, EmbeddingSource::TreeGeodesic)
}

pub fn embed_2d(t: &MstTree, m: &DistanceMatrix, source: EmbeddingSource) -> Result<Embedding2D> {
    if t.frame_ids() != m.frame_ids() {
        return Err(Error::contract("the tree does not span the matrix's frames"));
    }
    let n = m.n();
    let dist = match source {
        EmbeddingSource::TreeGeodesic => tree_geodesics(t),
        EmbeddingSource::RawMatrix => (0..n * n).map(|k| m.get(k / n, k % n)).collect(),
    };
    let (coords, degenerate) = classical_mds(&dist, n);
    Ok(Embedding2D {
        frame_ids: m.frame_ids().to_vec(),
        stress: kruskal_stress(&dist, &coords),
        coords,
        degenerate,
        source,
    })
}

/// Returns the top-two-axis coordinates and whether an axis was missing.
pub fn classical_mds(dist: &[f64], n: usize) -> (Vec<[f64; 2]>, bool) {
    let sq = DMatrix::from_fn(n, n, |i, j| dist[i * n + j] * dist[i * n + j]);
    let row_mean: Vec<f64> = (0..n).map(|i| sq.row(i).sum() / n as f64).collect();
    let grand = row_mean.iter().sum::<f64>() / n as f64;
    let b = DMatrix::from_fn(n, n, |i, j| -0.5 * (sq[(i, j)] - row_mean[i] - row_mean[j] + grand));
    let eig = SymmetricEigen::new(b);
    let mut axes: Vec<usize> = (0..n).collect();
    axes.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));

    let top = eig.eigenvalues[axes[0]].max(0.0);
    let mut coords = vec![[0.0; 2]; n];
    let mut degenerate = false;
    for (k, &axis) in axes.iter().take(2).enumerate() {
        let lambda = eig.eigenvalues[axis];
        if !(lambda > RANK_TOLERANCE * top) || top <= 0.0 {
            degenerate = true;
            continue;
        }
        let scale = lambda.sqrt();
        let column: Vec<f64> = (0..n).map(|i| eig.eigenvectors[(i, axis)] * scale).collect();
        let flip = sign_anchor(&column) < 0.0;
        for i in 0..n {
            coords[i][k] = if flip { -column[i] } else { column[i] };
        }
    }
    if n < 2 {
        degenerate = true;
    }
    (coords, degenerate)
}

/// The coordinate of largest magnitude; near-ties go to the lowest index.
fn sign_anchor(column: &[f64]) -> f64 {
    let max = column.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    column
        .iter()
        .copied()
        .find(|v| v.abs() >= max * (1.0 - 1e-9))
        .unwrap_or(0.0)
}

pub fn kruskal_stress(dist: &[f64], coords: &[[f64; 2]]) -> f64 {
    let n = coords.len();
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..n {
        for j in i + 1..n {
            let d = dist[i * n + j];
            let e = ((coords[i][0] - coords[j][0]).powi(2) + (coords[i][1] - coords[j][1]).powi(2)).sqrt();
            num += (d - e).powi(2);
            den += d * d;
        }
    }
    if den > 0.0 {
        (num / den).sqrt()
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayoutStyle {
    Linear,
    Radial,
}

impl std::str::FromStr for LayoutStyle {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Self::Linear),
            "radial" => Ok(Self::Radial),
            other => Err(Error::contract(format!("unknown layout style {other:?} (linear, radial)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct LayoutOptions {
    pub gutter: u32,
    pub background: [u8; 3],
}

impl Default for LayoutOptions {
    fn default() -> Self {
        Self {
            gutter: 8,
            background: [255, 255, 255],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub id: String,
    /// Page coordinates, y pointing down.
    pub center: [f64; 2],
    /// Counterclockwise rotation of the frame in radians.
    pub rotation: f64,
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutSheet {
    pub style: LayoutStyle,
    pub width: u32,
    pub height: u32,
    pub placements: Vec<Placement>,
}

fn rasters<'a>(seq: &SequenceResult, frames: &'a FrameCollection) -> Result<Vec<&'a Raster>> {
    if seq.order.is_empty() {
        return Err(Error::contract("the sequence is empty"));
    }
    seq.order
        .iter()
        .map(|id| {
            frames
                .get(id)
                .ok_or_else(|| Error::contract(format!("frame {id:?} is not in the collection")))?
                .pixels
                .as_ref()
                .ok_or_else(|| Error::contract(format!("frame {id:?} has no pixels to lay out")))
        })
        .collect()
}

/// Positions every frame of `seq` in order. Linear sheets run left to right;
/// radial sheets go counterclockwise from angle 0 on a circle of radius
/// `k · max_width / 2π`, each frame rotated to the tangent.
pub fn plan_layout(
    seq: &SequenceResult,
    frames: &FrameCollection,
    style: LayoutStyle,
    options: &LayoutOptions,
) -> Result<LayoutSheet> {
    let rs = rasters(seq, frames)?;
    let k = rs.len();
    let mut placements = Vec::with_capacity(k);
    let (width, height);
    match style {
        LayoutStyle::Linear => {
            width = rs.iter().map(|r| r.width()).sum::<u32>() + (k as u32 - 1) * options.gutter;
            height = rs.iter().map(|r| r.height()).max().unwrap();
            let mut left = 0u32;
            for (id, r) in seq.order.iter().zip(&rs) {
                let top = (height - r.height()) / 2;
                placements.push(Placement {
                    id: id.clone(),
                    center: [left as f64 + r.width() as f64 / 2.0, top as f64 + r.height() as f64 / 2.0],
                    rotation: 0.0,
                    width: r.width(),
                    height: r.height(),
                });
                left += r.width() + options.gutter;
            }
        }
        LayoutStyle::Radial => {
            let max_w = rs.iter().map(|r| r.width()).max().unwrap() as f64;
            let radius = k as f64 * max_w / std::f64::consts::TAU;
            let half_diag = rs
                .iter()
                .map(|r| (r.width() as f64).hypot(r.height() as f64) / 2.0)
                .fold(0.0, f64::max);
            let side = (2.0 * (radius + half_diag)).ceil() as u32;
            width = side;
            height = side;
            let c = side as f64 / 2.0;
            for (i, (id, r)) in seq.order.iter().zip(&rs).enumerate() {
                let theta = std::f64::consts::TAU * i as f64 / k as f64;
                placements.push(Placement {
                    id: id.clone(),
                    center: [c + radius * theta.cos(), c - radius * theta.sin()],
                    rotation: theta - std::f64::consts::FRAC_PI_2,
                    width: r.width(),
                    height: r.height(),
                });
            }
        }
    }
    Ok(LayoutSheet {
        style,
        width,
        height,
        placements,
    })
}

/// Paints the planned sheet; later frames overlap earlier ones.
pub fn compose(sheet: &LayoutSheet, seq: &SequenceResult, frames: &FrameCollection, options: &LayoutOptions) -> Result<image::RgbImage> {
    let rs = rasters(seq, frames)?;
    let mut canvas = image::RgbImage::from_pixel(sheet.width, sheet.height, image::Rgb(options.background));
    for (p, r) in sheet.placements.iter().zip(rs) {
        let src = r.to_rgb8();
        let (cos, sin) = (p.rotation.cos(), p.rotation.sin());
        let (hw, hh) = (p.width as f64 / 2.0, p.height as f64 / 2.0);
        let reach = hw.hypot(hh).ceil();
        let x0 = (p.center[0] - reach).floor().max(0.0) as u32;
        let y0 = (p.center[1] - reach).floor().max(0.0) as u32;
        let x1 = ((p.center[0] + reach).ceil() as u32).min(sheet.width);
        let y1 = ((p.center[1] + reach).ceil() as u32).min(sheet.height);
        for py in y0..y1 {
            for px in x0..x1 {
                // offset in y-up coordinates, rotated back into the frame
                let vx = px as f64 + 0.5 - p.center[0];
                let vy = p.center[1] - (py as f64 + 0.5);
                let lx = vx * cos + vy * sin;
                let ly = -vx * sin + vy * cos;
                let fx = (lx + hw).floor();
                let fy = (hh - ly).floor();
                if fx >= 0.0 && fy >= 0.0 && fx < p.width as f64 && fy < p.height as f64 {
                    canvas.put_pixel(px, py, *src.get_pixel(fx as u32, fy as u32));
                }
            }
        }
    }
    Ok(canvas)
}

/// Plans, paints and writes the composite PNG.
pub fn render_layout(
    seq: &SequenceResult,
    frames: &FrameCollection,
    style: LayoutStyle,
    options: &LayoutOptions,
    out_path: impl AsRef<Path>,
) -> Result<LayoutSheet> {
    let sheet = plan_layout(seq, frames, style, options)?;
    let canvas = compose(&sheet, seq, frames, options)?;
    canvas.save_with_format(out_path, image::ImageFormat::Png)?;
    Ok(sheet)
}
