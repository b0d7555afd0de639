//! Frame collections, feature archives and distance matrices, together with
//! their on-disk formats.
//!
//! Both binary formats share one layout (all integers little-endian):
//!
//! ```text
//! magic        4 bytes   "PFA1" (feature archive) or "PDM1" (distance matrix)
//! header_len   u32
//! header       header_len bytes of UTF-8 JSON
//! payload      IEEE-754 f32 values
//! ```
//!
//! A `PFA1` header is `{version, frame_ids, layers:[{name,c,h,w}], normalized}`
//! and its payload is ordered frame-major, layer-minor, with each tensor laid
//! out channel-major then row-major spatially. A `PDM1` header is
//! `{version, frame_ids, metric_tag}` followed by `n * n` values row-major.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const ARCHIVE_MAGIC: &[u8; 4] = b"PFA1";
pub const MATRIX_MAGIC: &[u8; 4] = b"PDM1";
pub const FORMAT_VERSION: u32 = 1;

/// Tolerance on channel-vector norms of a normalized archive.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-4;

/// An RGB raster with channel values in `[0, 1]`, stored interleaved row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    width: u32,
    height: u32,
    data: Vec<f32>,
}

impl Raster {
    pub fn new(width: u32, height: u32, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::contract("raster dimensions must be at least 1x1"));
        }
        let expected = width as usize * height as usize * 3;
        if data.len() != expected {
            return Err(Error::contract(format!(
                "raster {width}x{height} needs {expected} channel values, got {}",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::contract(format!(
                "raster channel value {} at index {bad} is outside [0, 1]",
                data[bad]
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// A raster filled with one colour.
    pub fn filled(width: u32, height: u32, rgb: [f32; 3]) -> Result<Self> {
        let data = (0..width as usize * height as usize)
            .flat_map(|_| rgb)
            .collect();
        Self::new(width, height, data)
    }

    /// 8-bit sRGB mapped to `[0, 1]` by `v / 255`, no gamma linearization.
    pub fn from_rgb8(img: &image::RgbImage) -> Result<Self> {
        let data = img.as_raw().iter().map(|&v| v as f32 / 255.0).collect();
        Self::new(img.width(), img.height(), data)
    }

    pub fn to_rgb8(&self) -> image::RgbImage {
        let bytes = self
            .data
            .iter()
            .map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect();
        image::RgbImage::from_raw(self.width, self.height, bytes)
            .expect("raster length matches its dimensions")
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn pixel(&self, x: u32, y: u32) -> [f32; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub id: String,
    pub pixels: Option<Raster>,
    pub source_path: Option<PathBuf>,
}

impl FrameRecord {
    pub fn with_pixels(id: impl Into<String>, pixels: Raster) -> Self {
        Self {
            id: id.into(),
            pixels: Some(pixels),
            source_path: None,
        }
    }

    pub fn id_only(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            pixels: None,
            source_path: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    Images,
    Features,
    Distances,
}

/// Frames in ingestion order with unique, non-empty identifiers.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameCollection {
    frames: Vec<FrameRecord>,
    source_kind: SourceKind,
}

impl FrameCollection {
    pub fn new(frames: Vec<FrameRecord>, source_kind: SourceKind) -> Result<Self> {
        check_ids(frames.iter().map(|f| f.id.as_str())).map_err(Error::Contract)?;
        Ok(Self {
            frames,
            source_kind,
        })
    }

    /// Collection of id-only frames, e.g. the frames behind a loaded matrix.
    pub fn from_ids<I, S>(ids: I, source_kind: SourceKind) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::new(
            ids.into_iter().map(FrameRecord::id_only).collect(),
            source_kind,
        )
    }

    pub fn frames(&self) -> &[FrameRecord] {
        &self.frames
    }

    pub fn source_kind(&self) -> SourceKind {
        self.source_kind
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn ids(&self) -> Vec<String> {
        self.frames.iter().map(|f| f.id.clone()).collect()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.frames.iter().position(|f| f.id == id)
    }

    pub fn get(&self, id: &str) -> Option<&FrameRecord> {
        self.frames.iter().find(|f| f.id == id)
    }

    /// Sub-collection in the order given by `indices`.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let frames = indices
            .iter()
            .map(|&i| {
                self.frames
                    .get(i)
                    .cloned()
                    .ok_or_else(|| Error::contract(format!("frame index {i} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(frames, self.source_kind)
    }
}

fn check_ids<'a>(ids: impl Iterator<Item = &'a str>) -> std::result::Result<(), String> {
    let mut seen = HashSet::new();
    for id in ids {
        if id.is_empty() {
            return Err("frame identifiers must be non-empty".into());
        }
        if !seen.insert(id) {
            return Err(format!("duplicate frame identifier {id:?}"));
        }
    }
    Ok(())
}

/// Resolve frame ids from file stems. Repeated stems get `_1`, `_2`, ...
/// suffixes; a suffixed id that still collides is a format error.
pub fn resolve_frame_ids(paths: &[PathBuf]) -> Result<Vec<String>> {
    let mut counts: HashMap<String, usize> = HashMap::new();
    let mut seen = HashSet::new();
    let mut ids = Vec::with_capacity(paths.len());
    for path in paths {
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .filter(|s| !s.is_empty())
            .ok_or_else(|| Error::Ingest {
                path: path.clone(),
                message: "path has no file stem".into(),
            })?;
        let count = counts.entry(stem.clone()).or_insert(0);
        let id = if *count == 0 {
            stem
        } else {
            format!("{stem}_{count}")
        };
        *count += 1;
        if !seen.insert(id.clone()) {
            return Err(Error::format(
                0,
                format!(
                    "frame id {id:?} resolved for {} collides with an earlier frame",
                    path.display()
                ),
            ));
        }
        ids.push(id);
    }
    Ok(ids)
}

/// Decode PNG/JPEG files into a collection, preserving the given order.
pub fn ingest_images(paths: &[PathBuf]) -> Result<FrameCollection> {
    let ids = resolve_frame_ids(paths)?;
    let rasters = paths
        .par_iter()
        .map(|path| decode_image(path))
        .collect::<Vec<_>>();
    let frames = ids
        .into_iter()
        .zip(rasters)
        .zip(paths)
        .map(|((id, raster), path)| {
            Ok(FrameRecord {
                id,
                pixels: Some(raster?),
                source_path: Some(path.clone()),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    FrameCollection::new(frames, SourceKind::Images)
}

fn decode_image(path: &Path) -> Result<Raster> {
    let ingest_err = |message: String| Error::Ingest {
        path: path.to_path_buf(),
        message,
    };
    let reader = image::ImageReader::open(path)
        .map_err(|e| ingest_err(e.to_string()))?
        .with_guessed_format()
        .map_err(|e| ingest_err(e.to_string()))?;
    match reader.format() {
        Some(image::ImageFormat::Png) | Some(image::ImageFormat::Jpeg) => {}
        _ => return Err(ingest_err("not a PNG or JPEG file".into())),
    }
    let img = reader.decode().map_err(|e| ingest_err(e.to_string()))?;
    Raster::from_rgb8(&img.to_rgb8())
}

/// PNG/JPEG files directly inside `dir`, sorted by file name.
pub fn list_image_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        let is_image = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg"))
            .unwrap_or(false);
        if is_image && path.is_file() {
            paths.push(path);
        }
    }
    paths.sort();
    Ok(paths)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub name: String,
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl LayerSpec {
    pub fn new(name: impl Into<String>, c: usize, h: usize, w: usize) -> Self {
        Self {
            name: name.into(),
            c,
            h,
            w,
        }
    }

    pub fn numel(&self) -> usize {
        self.c * self.h * self.w
    }

    pub fn spatial(&self) -> usize {
        self.h * self.w
    }
}

/// Per-frame, per-layer activation tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureArchive {
    frame_ids: Vec<String>,
    layers: Vec<LayerSpec>,
    data: Vec<f32>,
    normalized: bool,
    layer_offsets: Vec<usize>,
    frame_stride: usize,
}

#[derive(Serialize, Deserialize)]
struct ArchiveHeader {
    version: u32,
    frame_ids: Vec<String>,
    layers: Vec<LayerSpec>,
    normalized: bool,
}

impl FeatureArchive {
    /// `data` is frame-major, layer-minor, each tensor channel-major.
    pub fn new(
        frame_ids: Vec<String>,
        layers: Vec<LayerSpec>,
        data: Vec<f32>,
        normalized: bool,
    ) -> Result<Self> {
        let archive = Self::assemble(frame_ids, layers, data, normalized)
            .map_err(Error::Contract)?;
        if archive.normalized {
            archive.check_unit_norms()?;
        }
        Ok(archive)
    }

    fn assemble(
        frame_ids: Vec<String>,
        layers: Vec<LayerSpec>,
        data: Vec<f32>,
        normalized: bool,
    ) -> std::result::Result<Self, String> {
        check_ids(frame_ids.iter().map(String::as_str))?;
        let mut names = HashSet::new();
        for layer in &layers {
            if layer.c == 0 || layer.h == 0 || layer.w == 0 {
                return Err(format!(
                    "layer {:?} has a zero dimension ({}x{}x{})",
                    layer.name, layer.c, layer.h, layer.w
                ));
            }
            if !names.insert(layer.name.as_str()) {
                return Err(format!("duplicate layer name {:?}", layer.name));
            }
        }
        let mut layer_offsets = Vec::with_capacity(layers.len());
        let mut frame_stride = 0usize;
        for layer in &layers {
            layer_offsets.push(frame_stride);
            frame_stride += layer.numel();
        }
        let expected = frame_stride * frame_ids.len();
        if data.len() != expected {
            return Err(format!(
                "archive data holds {} values, header shape requires {expected}",
                data.len()
            ));
        }
        if let Some(bad) = data.iter().position(|v| !v.is_finite()) {
            return Err(format!("non-finite activation at value index {bad}"));
        }
        Ok(Self {
            frame_ids,
            layers,
            data,
            normalized,
            layer_offsets,
            frame_stride,
        })
    }

    pub fn frame_ids(&self) -> &[String] {
        &self.frame_ids
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn num_frames(&self) -> usize {
        self.frame_ids.len()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.frame_ids.iter().position(|f| f == id)
    }

    /// The `(c, h, w)` tensor of one frame and layer, channel-major.
    pub fn tensor(&self, frame: usize, layer: usize) -> &[f32] {
        let start = frame * self.frame_stride + self.layer_offsets[layer];
        &self.data[start..start + self.layers[layer].numel()]
    }

    /// All layers of one frame concatenated into a flat vector.
    pub fn frame_vector(&self, frame: usize) -> &[f32] {
        let start = frame * self.frame_stride;
        &self.data[start..start + self.frame_stride]
    }

    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut ids = Vec::with_capacity(indices.len());
        let mut data = Vec::with_capacity(indices.len() * self.frame_stride);
        for &i in indices {
            if i >= self.num_frames() {
                return Err(Error::contract(format!("frame index {i} out of range")));
            }
            ids.push(self.frame_ids[i].clone());
            data.extend_from_slice(self.frame_vector(i));
        }
        Self::assemble(ids, self.layers.clone(), data, self.normalized).map_err(Error::Contract)
    }

    /// Every nonzero spatial channel vector must have unit norm.
    pub fn check_unit_norms(&self) -> Result<()> {
        for frame in 0..self.num_frames() {
            for (l, layer) in self.layers.iter().enumerate() {
                let t = self.tensor(frame, l);
                let hw = layer.spatial();
                for pos in 0..hw {
                    let norm_sq: f64 = (0..layer.c)
                        .map(|ch| {
                            let v = t[ch * hw + pos] as f64;
                            v * v
                        })
                        .sum();
                    if norm_sq == 0.0 {
                        continue;
                    }
                    let norm = norm_sq.sqrt();
                    if (norm - 1.0).abs() > UNIT_NORM_TOLERANCE {
                        return Err(Error::Validation(format!(
                            "frame {:?} layer {:?} position {pos}: channel norm {norm} is not 1",
                            self.frame_ids[frame], layer.name
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Divide every spatial channel vector by its Euclidean norm.
    pub fn channel_unit_normalize(self) -> Result<Self> {
        if self.normalized {
            return Err(Error::contract("archive is already channel-normalized"));
        }
        Ok(self.normalize_channels_unchecked())
    }

    /// Normalization without the double-application guard.
    #[doc(hidden)]
    pub fn normalize_channels_unchecked(mut self) -> Self {
        let stride = self.frame_stride;
        let layers = self.layers.clone();
        let offsets = self.layer_offsets.clone();
        for frame in self.data.chunks_mut(stride.max(1)) {
            for (layer, &offset) in layers.iter().zip(&offsets) {
                let hw = layer.spatial();
                let t = &mut frame[offset..offset + layer.numel()];
                for pos in 0..hw {
                    let norm = (0..layer.c)
                        .map(|ch| (t[ch * hw + pos] as f64).powi(2))
                        .sum::<f64>()
                        .sqrt();
                    if norm > 0.0 {
                        for ch in 0..layer.c {
                            t[ch * hw + pos] = (t[ch * hw + pos] as f64 / norm) as f32;
                        }
                    }
                }
            }
        }
        self.normalized = true;
        self
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = ArchiveHeader {
            version: FORMAT_VERSION,
            frame_ids: self.frame_ids.clone(),
            layers: self.layers.clone(),
            normalized: self.normalized,
        };
        encode(ARCHIVE_MAGIC, &header, &self.data)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (header, payload_offset): (ArchiveHeader, usize) = decode_header(ARCHIVE_MAGIC, bytes)?;
        check_version(header.version)?;
        let per_frame: usize = header.layers.iter().map(LayerSpec::numel).sum();
        let expected = per_frame * header.frame_ids.len() * 4;
        let data = decode_payload(bytes, payload_offset, expected)?;
        let archive = Self::assemble(header.frame_ids, header.layers, data, header.normalized)
            .map_err(|m| Error::format(8, m))?;
        if archive.normalized {
            archive.check_unit_norms()?;
        }
        Ok(archive)
    }
}

pub fn save_archive(archive: &FeatureArchive, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, archive.to_bytes())?;
    Ok(())
}

pub fn load_archive(path: impl AsRef<Path>) -> Result<FeatureArchive> {
    FeatureArchive::from_bytes(&fs::read(path)?)
}

/// Symmetric, nonnegative pairwise distances with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    frame_ids: Vec<String>,
    values: Vec<f32>,
    metric_tag: String,
}

#[derive(Serialize, Deserialize)]
struct MatrixHeader {
    version: u32,
    frame_ids: Vec<String>,
    metric_tag: String,
}

impl DistanceMatrix {
    /// `values` is row-major `n * n`.
    pub fn new(frame_ids: Vec<String>, values: Vec<f32>, metric_tag: impl Into<String>) -> Result<Self> {
        check_ids(frame_ids.iter().map(String::as_str)).map_err(Error::Contract)?;
        let n = frame_ids.len();
        if values.len() != n * n {
            return Err(Error::contract(format!(
                "{n} frames need {} matrix entries, got {}",
                n * n,
                values.len()
            )));
        }
        let m = Self {
            frame_ids,
            values,
            metric_tag: metric_tag.into(),
        };
        m.validate()?;
        Ok(m)
    }

    /// Fill the upper triangle from `f(i, j)` (with `i < j`) and mirror it.
    pub fn from_upper<F>(frame_ids: Vec<String>, metric_tag: impl Into<String>, mut f: F) -> Result<Self>
    where
        F: FnMut(usize, usize) -> f64,
    {
        let n = frame_ids.len();
        let mut values = vec![0f32; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let v = f(i, j) as f32;
                values[i * n + j] = v;
                values[j * n + i] = v;
            }
        }
        Self::new(frame_ids, values, metric_tag)
    }

    fn validate(&self) -> Result<()> {
        let n = self.n();
        for i in 0..n {
            if self.values[i * n + i] != 0.0 {
                return Err(Error::Validation(format!(
                    "diagonal entry ({i},{i}) is {} instead of 0",
                    self.values[i * n + i]
                )));
            }
            for j in 0..n {
                let v = self.values[i * n + j];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::Validation(format!(
                        "entry ({i},{j}) = {v} is not a finite nonnegative distance"
                    )));
                }
                if j > i && v.to_bits() != self.values[j * n + i].to_bits() {
                    return Err(Error::Validation(format!(
                        "matrix is not symmetric at ({i},{j})/({j},{i}): {v} vs {}",
                        self.values[j * n + i]
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.frame_ids.len()
    }

    pub fn frame_ids(&self) -> &[String] {
        &self.frame_ids
    }

    pub fn metric_tag(&self) -> &str {
        &self.metric_tag
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n() + j] as f64
    }

    pub fn row(&self, i: usize) -> &[f32] {
        let n = self.n();
        &self.values[i * n..(i + 1) * n]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.frame_ids.iter().position(|f| f == id)
    }

    /// Submatrix over `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let n = self.n();
        if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
            return Err(Error::contract(format!("frame index {bad} out of range")));
        }
        let ids = indices.iter().map(|&i| self.frame_ids[i].clone()).collect();
        let values = indices
            .iter()
            .flat_map(|&i| indices.iter().map(move |&j| self.values[i * n + j]))
            .collect();
        Self::new(ids, values, self.metric_tag.clone())
    }

    /// Drop the frames named in `ids`; unknown ids are a contract error.
    pub fn without(&self, ids: &[String]) -> Result<Self> {
        let mut drop = HashSet::new();
        for id in ids {
            let i = self
                .index_of(id)
                .ok_or_else(|| Error::contract(format!("unknown frame id {id:?}")))?;
            drop.insert(i);
        }
        let keep: Vec<usize> = (0..self.n()).filter(|i| !drop.contains(i)).collect();
        self.select(&keep)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = MatrixHeader {
            version: FORMAT_VERSION,
            frame_ids: self.frame_ids.clone(),
            metric_tag: self.metric_tag.clone(),
        };
        encode(MATRIX_MAGIC, &header, &self.values)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (header, payload_offset): (MatrixHeader, usize) = decode_header(MATRIX_MAGIC, bytes)?;
        check_version(header.version)?;
        let n = header.frame_ids.len();
        let values = decode_payload(bytes, payload_offset, n * n * 4)?;
        check_ids(header.frame_ids.iter().map(String::as_str)).map_err(|m| Error::format(8, m))?;
        Self::new(header.frame_ids, values, header.metric_tag)
    }
}

pub fn save_matrix(matrix: &DistanceMatrix, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, matrix.to_bytes())?;
    Ok(())
}

pub fn load_matrix(path: impl AsRef<Path>) -> Result<DistanceMatrix> {
    DistanceMatrix::from_bytes(&fs::read(path)?)
}

fn encode<H: Serialize>(magic: &[u8; 4], header: &H, values: &[f32]) -> Vec<u8> {
    let header = serde_json::to_vec(header).expect("header serializes");
    let mut out = Vec::with_capacity(8 + header.len() + values.len() * 4);
    out.extend_from_slice(magic);
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn decode_header<H: for<'de> Deserialize<'de>>(magic: &[u8; 4], bytes: &[u8]) -> Result<(H, usize)> {
    if bytes.len() < 4 {
        return Err(Error::format(0, format!("file is {} bytes, too short for magic", bytes.len())));
    }
    if &bytes[..4] != magic {
        return Err(Error::format(
            0,
            format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(&bytes[..4]),
                String::from_utf8_lossy(magic)
            ),
        ));
    }
    if bytes.len() < 8 {
        return Err(Error::format(4, "truncated header length field"));
    }
    let header_len = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let available = bytes.len() - 8;
    if header_len > available {
        return Err(Error::format(
            8,
            format!("header declares {header_len} bytes but only {available} remain"),
        ));
    }
    let header = serde_json::from_slice(&bytes[8..8 + header_len]).map_err(|e| {
        Error::format(8 + e.column().saturating_sub(1) as u64, format!("invalid header JSON: {e}"))
    })?;
    Ok((header, 8 + header_len))
}

fn check_version(version: u32) -> Result<()> {
    if version != FORMAT_VERSION {
        return Err(Error::format(8, format!("unsupported format version {version}")));
    }
    Ok(())
}

fn decode_payload(bytes: &[u8], offset: usize, expected: usize) -> Result<Vec<f32>> {
    let actual = bytes.len() - offset;
    if actual != expected {
        return Err(Error::format(
            offset as u64,
            format!("payload size mismatch: header implies {expected} bytes, found {actual}"),
        ));
    }
    Ok(bytes[offset..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}
