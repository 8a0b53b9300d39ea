//! Shared domain types: boxes, tubes, proposals, histograms and video metadata.
//!
//! Everything here is validated at construction and immutable afterwards.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box in continuous pixel coordinates, attached to one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    frame: u32,
    x: f64,
    y: f64,
    w: f64,
    h: f64,
}

impl BoundingBox {
    pub fn new(frame: u32, x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        if !(x.is_finite() && y.is_finite() && w.is_finite() && h.is_finite()) {
            return Err(Error::InvalidBox(format!(
                "non-finite coordinates at frame {frame}"
            )));
        }
        if w <= 0.0 || h <= 0.0 {
            return Err(Error::InvalidBox(format!(
                "frame {frame}: width and height must be positive (w={w}, h={h})"
            )));
        }
        Ok(Self { frame, x, y, w, h })
    }

    pub fn frame(&self) -> u32 {
        self.frame
    }
    pub fn x(&self) -> f64 {
        self.x
    }
    pub fn y(&self) -> f64 {
        self.y
    }
    pub fn w(&self) -> f64 {
        self.w
    }
    pub fn h(&self) -> f64 {
        self.h
    }
    pub fn right(&self) -> f64 {
        self.x + self.w
    }
    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }
    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// Width over height.
    pub fn aspect_ratio(&self) -> f64 {
        self.w / self.h
    }

    pub fn with_frame(self, frame: u32) -> Self {
        Self { frame, ..self }
    }

    /// Intersects the box with `[0, width) x [0, height)`. `None` when nothing is
    /// left; a box already inside is returned unchanged.
    pub fn clip(&self, width: f64, height: f64) -> Option<Self> {
        if self.x >= 0.0 && self.y >= 0.0 && self.right() <= width && self.bottom() <= height {
            return Some(*self);
        }
        let x0 = self.x.max(0.0);
        let y0 = self.y.max(0.0);
        let x1 = self.right().min(width);
        let y1 = self.bottom().min(height);
        if x1 > x0 && y1 > y0 {
            Some(Self {
                frame: self.frame,
                x: x0,
                y: y0,
                w: x1 - x0,
                h: y1 - y0,
            })
        } else {
            None
        }
    }

    fn intersection_area(&self, other: &Self) -> f64 {
        let iw = self.right().min(other.right()) - self.x.max(other.x);
        let ih = self.bottom().min(other.bottom()) - self.y.max(other.y);
        if iw <= 0.0 || ih <= 0.0 {
            0.0
        } else {
            iw * ih
        }
    }
}

/// Intersection over union of two boxes, ignoring their frame indices.
pub fn frame_iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let inter = a.intersection_area(b);
    if inter <= 0.0 {
        return 0.0;
    }
    // Areas from the same corner arithmetic as the intersection, so identical
    // boxes give exactly 1.
    let corner_area = |b: &BoundingBox| (b.right() - b.x) * (b.bottom() - b.y);
    let union = corner_area(a) + corner_area(b) - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// A sequence of boxes over a contiguous frame interval, one box per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Tube {
    boxes: Vec<BoundingBox>,
}

impl Tube {
    pub fn new(boxes: Vec<BoundingBox>) -> Result<Self> {
        let first = boxes.first().ok_or(Error::EmptyTube)?.frame;
        for (offset, b) in boxes.iter().enumerate() {
            let expected = first + offset as u32;
            if b.frame != expected {
                return Err(Error::NonContiguousTube {
                    expected,
                    found: b.frame,
                });
            }
        }
        Ok(Self { boxes })
    }

    pub fn boxes(&self) -> &[BoundingBox] {
        &self.boxes
    }

    pub fn start_frame(&self) -> u32 {
        self.boxes[0].frame
    }

    /// Last covered frame, inclusive.
    pub fn end_frame(&self) -> u32 {
        self.boxes[self.boxes.len() - 1].frame
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    pub fn box_at(&self, frame: u32) -> Option<&BoundingBox> {
        let start = self.start_frame();
        if frame < start {
            return None;
        }
        self.boxes.get((frame - start) as usize)
    }

    /// Per-frame aspect ratios `w / h`.
    pub fn aspect_ratios(&self) -> Vec<f64> {
        self.boxes.iter().map(BoundingBox::aspect_ratio).collect()
    }

    /// Total box area summed over frames.
    pub fn volume(&self) -> f64 {
        self.boxes.iter().map(BoundingBox::area).sum()
    }

    /// Spatio-temporal overlap: per-frame IOU summed over frames both tubes
    /// cover, divided by the number of frames either tube covers.
    pub fn overlap(&self, other: &Tube) -> f64 {
        let union_start = self.start_frame().min(other.start_frame());
        let union_end = self.end_frame().max(other.end_frame());
        let inter_start = self.start_frame().max(other.start_frame());
        let inter_end = self.end_frame().min(other.end_frame());
        // Both tubes are contiguous, so when they overlap in time the union is contiguous too.
        let union_frames = if inter_start <= inter_end {
            (union_end - union_start + 1) as f64
        } else {
            (self.len() + other.len()) as f64
        };
        let mut sum = 0.0;
        if inter_start <= inter_end {
            for f in inter_start..=inter_end {
                if let (Some(a), Some(b)) = (self.box_at(f), other.box_at(f)) {
                    sum += frame_iou(a, b);
                }
            }
        }
        (sum / union_frames).clamp(0.0, 1.0)
    }
}

/// Anything that is a tube attached to a video.
pub trait VideoTube {
    fn video_id(&self) -> &str;
    fn tube(&self) -> &Tube;
}

/// Tube overlap between two tubes of the same video.
pub fn tube_iou<A: VideoTube + ?Sized, B: VideoTube + ?Sized>(a: &A, b: &B) -> Result<f64> {
    if a.video_id() != b.video_id() {
        return Err(Error::VideoMismatch(
            a.video_id().to_owned(),
            b.video_id().to_owned(),
        ));
    }
    Ok(a.tube().overlap(b.tube()))
}

/// Feature channels of the dense-trajectory descriptor family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Channel {
    #[serde(rename = "Traj")]
    Traj,
    #[serde(rename = "MBH")]
    Mbh,
    #[serde(rename = "HOF")]
    Hof,
    #[serde(rename = "HOG")]
    Hog,
}

impl Channel {
    pub const ALL: [Channel; 4] = [Channel::Traj, Channel::Mbh, Channel::Hof, Channel::Hog];

    pub fn name(self) -> &'static str {
        match self {
            Channel::Traj => "Traj",
            Channel::Mbh => "MBH",
            Channel::Hof => "HOF",
            Channel::Hog => "HOG",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Channel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Channel::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown feature channel {s:?}")))
    }
}

/// Number of histogram cells: one global histogram plus a 2x2 spatial pyramid.
pub const HISTOGRAM_CELLS: usize = 5;

/// Bag-of-words histograms for one channel: global cell first, then the 2x2 grid
/// in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureHistogram {
    cells: Vec<Vec<f64>>,
}

impl FeatureHistogram {
    /// Validates the cells and L1-normalizes any cell whose mass is not already 1.
    pub fn new(cells: Vec<Vec<f64>>) -> Result<Self> {
        if cells.len() != HISTOGRAM_CELLS {
            return Err(Error::DimensionMismatch(format!(
                "histogram needs {HISTOGRAM_CELLS} cells, got {}",
                cells.len()
            )));
        }
        let dim = cells[0].len();
        if dim == 0 {
            return Err(Error::EmptyInput("histogram cell"));
        }
        let mut cells = cells;
        for cell in &mut cells {
            if cell.len() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "histogram cells disagree on dimension ({} vs {dim})",
                    cell.len()
                )));
            }
            if cell.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::InvalidParameter(
                    "histogram bins must be finite and non-negative".into(),
                ));
            }
            let mass: f64 = cell.iter().sum();
            if mass > 0.0 && (mass - 1.0).abs() > 1e-9 {
                cell.iter_mut().for_each(|v| *v /= mass);
            }
        }
        Ok(Self { cells })
    }

    pub fn cells(&self) -> &[Vec<f64>] {
        &self.cells
    }

    pub fn dim(&self) -> usize {
        self.cells[0].len()
    }
}

/// Raw local descriptors of one channel; every vector shares one dimension.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RawFeatures {
    vectors: Vec<Vec<f64>>,
}

impl RawFeatures {
    pub fn new(vectors: Vec<Vec<f64>>) -> Result<Self> {
        if let Some(first) = vectors.first() {
            let dim = first.len();
            if dim == 0 {
                return Err(Error::DimensionMismatch("raw feature of dimension 0".into()));
            }
            for v in &vectors {
                if v.len() != dim {
                    return Err(Error::DimensionMismatch(format!(
                        "raw features disagree on dimension ({} vs {dim})",
                        v.len()
                    )));
                }
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(Error::InvalidParameter("non-finite raw feature".into()));
                }
            }
        }
        Ok(Self { vectors })
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

/// Candidate action tube with its feature payloads.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionProposal {
    pub id: u32,
    pub video_id: String,
    pub tube: Tube,
    pub histograms: BTreeMap<Channel, FeatureHistogram>,
    pub raw_features: BTreeMap<Channel, RawFeatures>,
    /// Area-normalized foreground score, zero until scored.
    pub initial_score: f64,
}

impl ActionProposal {
    pub fn new(id: u32, video_id: impl Into<String>, tube: Tube) -> Self {
        Self {
            id,
            video_id: video_id.into(),
            tube,
            histograms: BTreeMap::new(),
            raw_features: BTreeMap::new(),
            initial_score: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.tube.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tube.is_empty()
    }
}

impl VideoTube for ActionProposal {
    fn video_id(&self) -> &str {
        &self.video_id
    }
    fn tube(&self) -> &Tube {
        &self.tube
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VideoMeta {
    pub video_id: String,
    pub frames: u32,
    pub height: u32,
    pub width: u32,
    pub class_label: String,
    #[serde(default = "default_instances")]
    pub instance_count: u32,
}

fn default_instances() -> u32 {
    1
}

impl VideoMeta {
    pub fn validate(&self) -> Result<()> {
        if self.frames == 0 {
            return Err(Error::InvalidParameter(format!(
                "video {} has no frames",
                self.video_id
            )));
        }
        if self.height == 0 || self.width == 0 {
            return Err(Error::InvalidParameter(format!(
                "video {} has an empty frame extent",
                self.video_id
            )));
        }
        if self.instance_count == 0 {
            return Err(Error::InvalidParameter(format!(
                "video {} declares zero instances",
                self.video_id
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthTube {
    pub video_id: String,
    pub instance_id: u32,
    pub tube: Tube,
}

impl VideoTube for GroundTruthTube {
    fn video_id(&self) -> &str {
        &self.video_id
    }
    fn tube(&self) -> &Tube {
        &self.tube
    }
}
