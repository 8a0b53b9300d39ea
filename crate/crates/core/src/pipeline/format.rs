//! On-disk formats.
//!
//! Records (manifest, proposals, ground truth, annotations) are JSON lines.
//! Rasters use a small binary layout: the magic `TSRV1`, then little-endian
//! `u32` frames, height, width and channel count, then `f32` values ordered
//! `[frame][y][x][channel]`.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ActionProposal, BoundingBox, Channel, FeatureHistogram, RawFeatures, Tube};

pub const RASTER_MAGIC: &[u8; 5] = b"TSRV1";
const HEADER_LEN: usize = 5 + 16;

#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<f32>,
}

impl Raster {
    pub fn new(frames: usize, height: usize, width: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if frames * height * width * channels == 0 {
            return Err(Error::EmptyInput("raster"));
        }
        if data.len() != frames * height * width * channels {
            return Err(Error::DimensionMismatch(format!(
                "raster {frames}x{height}x{width}x{channels} needs {} values, got {}",
                frames * height * width * channels,
                data.len()
            )));
        }
        Ok(Self {
            frames,
            height,
            width,
            channels,
            data,
        })
    }

    /// Interleaves equally sized single-channel planes.
    pub fn from_planes(frames: usize, height: usize, width: usize, planes: &[&[f64]]) -> Result<Self> {
        let n = frames * height * width;
        if planes.iter().any(|p| p.len() != n) {
            return Err(Error::DimensionMismatch("raster planes disagree in size".into()));
        }
        let mut data = Vec::with_capacity(n * planes.len());
        for k in 0..n {
            for p in planes {
                data.push(p[k] as f32);
            }
        }
        Self::new(frames, height, width, planes.len(), data)
    }

    pub fn channel(&self, c: usize) -> Vec<f64> {
        self.data
            .iter()
            .skip(c)
            .step_by(self.channels)
            .map(|&v| v as f64)
            .collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * self.data.len());
        out.extend_from_slice(RASTER_MAGIC);
        for d in [self.frames, self.height, self.width, self.channels] {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        if bytes.len() < HEADER_LEN || &bytes[..5] != RASTER_MAGIC {
            return Err(Error::format(path, "not a TSRV1 raster"));
        }
        let dim = |k: usize| {
            let s = 5 + 4 * k;
            u32::from_le_bytes(bytes[s..s + 4].try_into().expect("4 bytes")) as usize
        };
        let (frames, height, width, channels) = (dim(0), dim(1), dim(2), dim(3));
        let count = frames
            .checked_mul(height)
            .and_then(|n| n.checked_mul(width))
            .and_then(|n| n.checked_mul(channels))
            .ok_or_else(|| Error::format(path, "raster dimensions overflow"))?;
        if bytes.len() != HEADER_LEN + 4 * count {
            return Err(Error::format(
                path,
                format!(
                    "raster {frames}x{height}x{width}x{channels} needs {} payload bytes, found {}",
                    4 * count,
                    bytes.len() - HEADER_LEN
                ),
            ));
        }
        let data: Vec<f32> = bytes[HEADER_LEN..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::format(path, "raster contains non-finite values"));
        }
        Self::new(frames, height, width, channels, data).map_err(|e| Error::format(path, e))
    }
}

pub fn read_raster(path: &Path) -> Result<Raster> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Raster::from_bytes(&bytes, path)
}

pub fn write_raster(path: &Path, raster: &Raster) -> Result<()> {
    write_atomic(path, &raster.to_bytes())
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| Error::io(&dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Parses every non-blank line, returning records with 1-based line numbers.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (k, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| Error::record(path, k + 1, e))?;
        out.push((k + 1, rec));
    }
    Ok(out)
}

pub fn to_jsonl<T: Serialize>(records: &[T]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for r in records {
        serde_json::to_writer(&mut out, r).map_err(|e| Error::Config(e.to_string()))?;
        out.push(b'\n');
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxRecord {
    pub frame: u32,
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl From<&BoundingBox> for BoxRecord {
    fn from(b: &BoundingBox) -> Self {
        Self {
            frame: b.frame(),
            x: b.x(),
            y: b.y(),
            w: b.w(),
            h: b.h(),
        }
    }
}

pub fn box_records(tube: &Tube) -> Vec<BoxRecord> {
    tube.boxes().iter().map(BoxRecord::from).collect()
}

/// Builds a tube from records, clipping every box to `width x height` and
/// requiring frames inside `0..frames`.
pub fn tube_from_records(records: &[BoxRecord], frames: u32, width: u32, height: u32) -> Result<Tube> {
    let mut boxes = Vec::with_capacity(records.len());
    for r in records {
        if r.frame >= frames {
            return Err(Error::OutOfExtent(format!(
                "box on frame {} but the video has {frames} frames",
                r.frame
            )));
        }
        let b = BoundingBox::new(r.frame, r.x, r.y, r.w, r.h)?;
        let clipped = b.clip(width as f64, height as f64).ok_or_else(|| {
            Error::OutOfExtent(format!(
                "box on frame {} lies outside the {width}x{height} frame",
                r.frame
            ))
        })?;
        boxes.push(clipped);
    }
    Tube::new(boxes)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestRecord {
    pub video_id: String,
    pub class_label: String,
    pub frames: u32,
    pub height: u32,
    pub width: u32,
    #[serde(default = "one")]
    pub instance_count: u32,
    pub proposals: PathBuf,
    pub flow: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub saliency: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intensity: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<PathBuf>,
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProposalRecord {
    pub id: u32,
    pub video_id: String,
    pub boxes: Vec<BoxRecord>,
    /// Channel name -> five cells (global first, then the 2x2 grid).
    pub histograms: BTreeMap<Channel, Vec<Vec<f64>>>,
    pub raw_features: BTreeMap<Channel, Vec<Vec<f64>>>,
}

impl ProposalRecord {
    pub fn from_proposal(p: &ActionProposal) -> Self {
        Self {
            id: p.id,
            video_id: p.video_id.clone(),
            boxes: box_records(&p.tube),
            histograms: p
                .histograms
                .iter()
                .map(|(c, h)| (*c, h.cells().to_vec()))
                .collect(),
            raw_features: p
                .raw_features
                .iter()
                .map(|(c, r)| (*c, r.vectors().to_vec()))
                .collect(),
        }
    }

    pub fn into_proposal(self, frames: u32, width: u32, height: u32) -> Result<ActionProposal> {
        let tube = tube_from_records(&self.boxes, frames, width, height)?;
        let mut p = ActionProposal::new(self.id, self.video_id, tube);
        for (c, cells) in self.histograms {
            p.histograms.insert(c, FeatureHistogram::new(cells)?);
        }
        for (c, vectors) in self.raw_features {
            p.raw_features.insert(c, RawFeatures::new(vectors)?);
        }
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruthRecord {
    pub video_id: String,
    pub instance_id: u32,
    pub boxes: Vec<BoxRecord>,
}

/// One selected tube, with the terms needed to recompute the objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub video_id: String,
    pub class_label: String,
    pub instance_id: u32,
    pub proposal_id: u32,
    pub boxes: Vec<BoxRecord>,
    /// `(N - 1) * alpha * omega` plus the edge weights to the other picks of
    /// the same round; summing over a round gives its objective.
    pub objective_contribution: f64,
    pub omega: f64,
    pub eta: f64,
    pub round: usize,
    pub degenerate: bool,
}
