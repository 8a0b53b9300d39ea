//! Foreground scoring: motion and saliency cues, 3D-MRF smoothing and the
//! per-proposal initial action score.

mod motion;
mod mrf;

pub use motion::{aggregate_cues, gradient_magnitude, motion_magnitude};
pub use mrf::{distance_transform, mrf_energy, smooth_mrf, smooth_mrf_labels, MrfOutcome, MrfParams};

use crate::error::{Error, Result};
use crate::model::ActionProposal;

/// Per-frame forward optical flow, `frames x height x width`, stored frame-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    frames: usize,
    height: usize,
    width: usize,
    u: Vec<f64>,
    v: Vec<f64>,
}

impl FlowField {
    pub fn new(frames: usize, height: usize, width: usize, u: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        let n = frames * height * width;
        if n == 0 {
            return Err(Error::EmptyInput("flow field"));
        }
        if u.len() != n || v.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "flow field {frames}x{height}x{width} needs {n} values per channel, got {} and {}",
                u.len(),
                v.len()
            )));
        }
        if u.iter().chain(&v).any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("non-finite flow value".into()));
        }
        Ok(Self {
            frames,
            height,
            width,
            u,
            v,
        })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn width(&self) -> usize {
        self.width
    }
    pub fn u(&self) -> &[f64] {
        &self.u
    }
    pub fn v(&self) -> &[f64] {
        &self.v
    }
}

/// Non-negative score grid `frames x height x width`, frame-major then row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVolume {
    frames: usize,
    height: usize,
    width: usize,
    values: Vec<f64>,
    normalized: bool,
}

impl ScoreVolume {
    pub fn new(frames: usize, height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        let n = frames * height * width;
        if n == 0 {
            return Err(Error::EmptyInput("score volume"));
        }
        if values.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "score volume {frames}x{height}x{width} needs {n} values, got {}",
                values.len()
            )));
        }
        if values.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::InvalidParameter(
                "score volume values must be finite and non-negative".into(),
            ));
        }
        Ok(Self {
            frames,
            height,
            width,
            values,
            normalized: false,
        })
    }

    pub fn zeros(frames: usize, height: usize, width: usize) -> Result<Self> {
        Self::new(frames, height, width, vec![0.0; frames * height * width])
    }

    pub fn frames(&self) -> usize {
        self.frames
    }
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn width(&self) -> usize {
        self.width
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn frame_len(&self) -> usize {
        self.height * self.width
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        let n = self.frame_len();
        &self.values[t * n..(t + 1) * n]
    }

    pub fn get(&self, t: usize, y: usize, x: usize) -> f64 {
        self.values[(t * self.height + y) * self.width + x]
    }

    pub fn same_shape(&self, other: &ScoreVolume) -> bool {
        self.frames == other.frames && self.height == other.height && self.width == other.width
    }

    /// Scales every frame so that its maximum is 1; all-zero frames stay zero.
    pub fn max_normalized(&self) -> ScoreVolume {
        let n = self.frame_len();
        let mut values = self.values.clone();
        for frame in values.chunks_mut(n) {
            let max = frame.iter().copied().fold(0.0, f64::max);
            if max > 0.0 {
                frame.iter_mut().for_each(|v| *v /= max);
            }
        }
        ScoreVolume {
            values,
            normalized: true,
            ..*self
        }
    }

    /// Repeats the last frame until the volume has `frames` frames.
    pub fn padded_to(&self, frames: usize) -> ScoreVolume {
        let mut values = self.values.clone();
        let last = self.frame(self.frames - 1).to_vec();
        for _ in self.frames..frames {
            values.extend_from_slice(&last);
        }
        ScoreVolume {
            frames: frames.max(self.frames),
            values,
            ..*self
        }
    }
}

/// Area-normalized foreground mass inside a proposal.
///
/// Each pixel `(y, x)` covers `[x, x+1) x [y, y+1)`; partially covered pixels
/// contribute in proportion to the covered area.
pub fn initial_proposal_score(proposal: &ActionProposal, volume: &ScoreVolume) -> Result<f64> {
    const EPS: f64 = 1e-9;
    let (h, w) = (volume.height as f64, volume.width as f64);
    let mut mass = 0.0;
    let mut area = 0.0;
    for b in proposal.tube.boxes() {
        let t = b.frame() as usize;
        if t >= volume.frames
            || b.x() < -EPS
            || b.y() < -EPS
            || b.right() > w + EPS
            || b.bottom() > h + EPS
        {
            return Err(Error::OutOfExtent(format!(
                "proposal {} frame {} box ({}, {}, {}, {}) vs volume {}x{}x{}",
                proposal.id,
                b.frame(),
                b.x(),
                b.y(),
                b.w(),
                b.h(),
                volume.frames,
                volume.height,
                volume.width
            )));
        }
        let frame = volume.frame(t);
        let x0 = b.x().max(0.0);
        let y0 = b.y().max(0.0);
        let x1 = b.right().min(w);
        let y1 = b.bottom().min(h);
        let (px0, px1) = (x0.floor() as usize, (x1.ceil() as usize).min(volume.width));
        let (py0, py1) = (y0.floor() as usize, (y1.ceil() as usize).min(volume.height));
        for py in py0..py1 {
            let cover_y = (y1.min(py as f64 + 1.0) - y0.max(py as f64)).max(0.0);
            if cover_y == 0.0 {
                continue;
            }
            let row = &frame[py * volume.width..(py + 1) * volume.width];
            for (px, v) in row.iter().enumerate().take(px1).skip(px0) {
                let cover_x = (x1.min(px as f64 + 1.0) - x0.max(px as f64)).max(0.0);
                mass += v * cover_x * cover_y;
            }
        }
        area += b.area();
    }
    Ok(if area > 0.0 { mass / area } else { 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BoundingBox, Tube};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn proposal(boxes: &[(u32, f64, f64, f64, f64)]) -> ActionProposal {
        let tube = Tube::new(
            boxes
                .iter()
                .map(|&(f, x, y, w, h)| BoundingBox::new(f, x, y, w, h).unwrap())
                .collect(),
        )
        .unwrap();
        ActionProposal::new(7, "v", tube)
    }

    #[test]
    fn omega_of_constant_volumes() {
        let p = proposal(&[(0, 1.5, 0.25, 3.0, 2.5), (1, 0.0, 0.0, 6.0, 4.0)]);
        let zeros = ScoreVolume::zeros(2, 4, 6).unwrap();
        assert_eq!(initial_proposal_score(&p, &zeros).unwrap(), 0.0);
        let ones = ScoreVolume::new(2, 4, 6, vec![1.0; 48]).unwrap();
        assert!((initial_proposal_score(&p, &ones).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn omega_rejects_out_of_extent() {
        let ones = ScoreVolume::new(2, 4, 6, vec![1.0; 48]).unwrap();
        let wide = proposal(&[(0, 4.0, 0.0, 3.0, 1.0)]);
        assert!(matches!(initial_proposal_score(&wide, &ones), Err(Error::OutOfExtent(_))));
        let late = proposal(&[(2, 0.0, 0.0, 1.0, 1.0)]);
        assert!(initial_proposal_score(&late, &ones).is_err());
    }

    #[test]
    fn omega_matches_direct_summation_on_integer_boxes() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (t, h, w) = (4, 9, 11);
        let values: Vec<f64> = (0..t * h * w).map(|_| rng.random::<f64>()).collect();
        let vol = ScoreVolume::new(t, h, w, values).unwrap();
        for _ in 0..50 {
            let start = rng.random_range(0..t as u32);
            let len = rng.random_range(1..=(t as u32 - start));
            let mut boxes = Vec::new();
            let (mut sum, mut area) = (0.0, 0.0);
            for f in start..start + len {
                let bw = rng.random_range(1..=w);
                let bh = rng.random_range(1..=h);
                let x = rng.random_range(0..=w - bw);
                let y = rng.random_range(0..=h - bh);
                boxes.push((f, x as f64, y as f64, bw as f64, bh as f64));
                for yy in y..y + bh {
                    for xx in x..x + bw {
                        sum += vol.get(f as usize, yy, xx);
                    }
                }
                area += (bw * bh) as f64;
            }
            let got = initial_proposal_score(&proposal(&boxes), &vol).unwrap();
            assert!((got - sum / area).abs() < 1e-12);
        }
    }

    #[test]
    fn omega_is_monotone_in_the_volume() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let base: Vec<f64> = (0..3 * 8 * 8).map(|_| rng.random::<f64>()).collect();
        let bigger: Vec<f64> = base.iter().map(|v| v + rng.random::<f64>() * 0.3).collect();
        let a = ScoreVolume::new(3, 8, 8, base).unwrap();
        let b = ScoreVolume::new(3, 8, 8, bigger).unwrap();
        let p = proposal(&[(0, 0.3, 1.7, 4.2, 5.1), (1, 2.0, 2.0, 3.5, 3.5), (2, 0.0, 0.0, 8.0, 8.0)]);
        assert!(initial_proposal_score(&p, &b).unwrap() >= initial_proposal_score(&p, &a).unwrap());
    }

    #[test]
    fn max_normalization_per_frame() {
        let v = ScoreVolume::new(2, 1, 3, vec![1.0, 2.0, 4.0, 0.0, 0.0, 0.0]).unwrap();
        let n = v.max_normalized();
        assert!(n.is_normalized());
        assert_eq!(n.values(), &[0.25, 0.5, 1.0, 0.0, 0.0, 0.0]);
    }
}
