//! Seeded synthetic datasets with planted actor tubes.
//!
//! Every video holds one or more actor tubes whose aspect ratio follows a
//! class-specific profile under a per-video time warp. Flow is articulated
//! inside actors, rotational inside a salient distractor and a constant
//! camera pan elsewhere. Proposal features mix class components, a
//! per-video distractor component and per-video background components in
//! proportion to the proposal's overlap with the actors and the distractor.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::foreground::{FlowField, ScoreVolume};
use crate::model::{Channel, GroundTruthTube, Tube, VideoMeta, HISTOGRAM_CELLS};

use super::format::{
    to_jsonl, tube_from_records, write_atomic, write_raster, BoxRecord, GroundTruthRecord, ManifestRecord,
    ProposalRecord, Raster,
};
use super::ingest::{Dataset, Video};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub classes: usize,
    pub videos_per_class: usize,
    pub proposals_per_video: usize,
    pub frames: u32,
    pub height: u32,
    pub width: u32,
    /// Scale of flow, saliency and feature noise; 0 gives exact mixtures.
    pub noise: f64,
    pub instances: u32,
    pub distractors: bool,
    pub hist_dim: usize,
    pub raw_per_proposal: usize,
    pub raw_dim: usize,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            classes: 8,
            videos_per_class: 12,
            proposals_per_video: 200,
            frames: 16,
            height: 24,
            width: 32,
            noise: 0.3,
            instances: 1,
            distractors: true,
            hist_dim: 12,
            raw_per_proposal: 12,
            raw_dim: 6,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if self.classes == 0 || self.videos_per_class == 0 {
            return bad("need at least one class and one video per class");
        }
        if self.instances == 0 || self.instances > 2 {
            return bad("instances must be 1 or 2");
        }
        if self.proposals_per_video < self.instances as usize + 1 {
            return bad("proposals_per_video must exceed the instance count");
        }
        if self.frames < 8 || self.height < 16 || self.width < 16 * self.instances {
            return bad("video extent too small (frames >= 8, height >= 16, width >= 16 per instance)");
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return bad("noise must be >= 0");
        }
        if self.hist_dim == 0 || self.raw_per_proposal == 0 || self.raw_dim == 0 {
            return bad("feature sizes must be >= 1");
        }
        Ok(())
    }
}

const COMPONENTS: usize = 6;
const WORDS_PER_CELL: f64 = 300.0;

fn mix_seed(parts: &[u64]) -> u64 {
    let mut h = 0x6A09_E667_F3BC_C909u64;
    for &p in parts {
        h ^= p.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(h << 6).wrapping_add(h >> 2);
        h = h.wrapping_mul(0xBF58_476D_1CE4_E5B9).rotate_left(31);
    }
    h
}

/// Peaked random distribution over `dim` bins.
fn prototype(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..dim).map(|_| rng.random::<f64>().powi(3) + 1e-3).collect();
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}

/// Histogram cells and descriptor centers per channel.
struct Component {
    cells: Vec<Vec<Vec<f64>>>,
    centers: Vec<Vec<Vec<f64>>>,
}

impl Component {
    fn new(rng: &mut ChaCha8Rng, spec: &SynthSpec) -> Self {
        Self {
            cells: (0..4)
                .map(|_| (0..HISTOGRAM_CELLS).map(|_| prototype(rng, spec.hist_dim)).collect())
                .collect(),
            centers: (0..4)
                .map(|_| {
                    (0..COMPONENTS)
                        .map(|_| (0..spec.raw_dim).map(|_| rng.random_range(-3.0..3.0)).collect())
                        .collect()
                })
                .collect(),
        }
    }
}

struct ClassModel {
    actor: Component,
    ratio_base: f64,
    ratio_amp: f64,
    ratio_freq: f64,
    ratio_phase: f64,
}

impl ClassModel {
    fn ratio(&self, tau: f64) -> f64 {
        self.ratio_base * (1.0 + self.ratio_amp * (2.0 * PI * self.ratio_freq * tau + self.ratio_phase).sin())
    }
}

/// Box geometry per frame of a planted object, indexed from its first frame.
#[derive(Clone)]
struct Track {
    start: u32,
    boxes: Vec<[f64; 4]>,
}

impl Track {
    fn tube(&self, frames: u32, width: u32, height: u32) -> Result<Tube> {
        let recs: Vec<BoxRecord> = self
            .boxes
            .iter()
            .enumerate()
            .map(|(k, b)| rounded_box(self.start + k as u32, b))
            .collect();
        tube_from_records(&recs, frames, width, height)
    }

    fn box_at(&self, t: u32) -> Option<[f64; 4]> {
        t.checked_sub(self.start).and_then(|k| self.boxes.get(k as usize)).copied()
    }
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

fn rounded_box(frame: u32, b: &[f64; 4]) -> BoxRecord {
    BoxRecord {
        frame,
        x: round2(b[0]),
        y: round2(b[1]),
        w: round2(b[2]).max(0.5),
        h: round2(b[3]).max(0.5),
    }
}

/// Keeps a box of size `w x h` centered at `c` inside `[lo, hi)` along one axis.
fn clamp_center(c: f64, size: f64, lo: f64, hi: f64) -> f64 {
    c.clamp(lo + size / 2.0, (hi - size / 2.0).max(lo + size / 2.0))
}

fn actor_track(rng: &mut ChaCha8Rng, spec: &SynthSpec, class: &ClassModel, lane: (f64, f64)) -> Track {
    let m = spec.frames;
    let (w_img, h_img) = (spec.width as f64, spec.height as f64);
    let start = rng.random_range(0..=2);
    let end = m - 1 - rng.random_range(0..=2);
    let len = end - start + 1;
    let warp = rng.random_range(0.75..1.33);
    let h0 = rng.random_range(0.45..0.6) * h_img;
    let max_w = (lane.1 - lane.0) * 0.9;
    let mut cx = rng.random_range(lane.0..lane.1);
    let mut cy = rng.random_range(0.35..0.65) * h_img;
    let vx = rng.random_range(-0.5..0.5);
    let vy = rng.random_range(-0.2..0.2);
    let mut boxes = Vec::with_capacity(len as usize);
    for k in 0..len {
        let tau = (k as f64 / (len - 1).max(1) as f64).powf(warp);
        let h = (h0 * (1.0 + 0.05 * (2.0 * PI * tau).sin())).min(h_img * 0.9);
        let w = (h * class.ratio(tau)).clamp(3.0, max_w);
        cx = clamp_center(cx + vx + rng.random_range(-0.2..0.2), w, lane.0, lane.1);
        cy = clamp_center(cy + vy, h, 0.0, h_img);
        boxes.push([cx - w / 2.0, cy - h / 2.0, w, h]);
    }
    let _ = w_img;
    Track { start, boxes }
}

fn distractor_track(rng: &mut ChaCha8Rng, spec: &SynthSpec) -> Track {
    let (w_img, h_img) = (spec.width as f64, spec.height as f64);
    let side = rng.random_range(0.18..0.25) * w_img.min(h_img);
    let mut cx = rng.random_range(side..w_img - side);
    let mut cy = rng.random_range(side..h_img - side);
    let (mut vx, mut vy) = (rng.random_range(-1.0..1.0), rng.random_range(-0.6..0.6));
    let boxes = (0..spec.frames)
        .map(|_| {
            if cx + vx < side / 2.0 || cx + vx > w_img - side / 2.0 {
                vx = -vx;
            }
            if cy + vy < side / 2.0 || cy + vy > h_img - side / 2.0 {
                vy = -vy;
            }
            cx += vx;
            cy += vy;
            [cx - side / 2.0, cy - side / 2.0, side, side]
        })
        .collect();
    Track { start: 0, boxes }
}

/// A perturbed copy of `base`: shifted, rescaled, temporally trimmed.
fn jittered(rng: &mut ChaCha8Rng, spec: &SynthSpec, base: &Track, strength: f64) -> Track {
    let n = base.boxes.len();
    let trim_a = rng.random_range(0..=3.min(n / 4));
    let trim_b = rng.random_range(0..=3.min(n / 4));
    let (mw, mh) = base.boxes.iter().fold((0.0, 0.0), |a, b| (a.0 + b[2] / n as f64, a.1 + b[3] / n as f64));
    let dx = rng.random_range(-strength..strength) * mw;
    let dy = rng.random_range(-strength..strength) * mh;
    let sx = rng.random_range(1.0 - strength..1.0 + strength);
    let sy = rng.random_range(1.0 - strength..1.0 + strength);
    let boxes = base.boxes[trim_a..n - trim_b]
        .iter()
        .map(|b| {
            let (w, h) = (b[2] * sx, b[3] * sy);
            let cx = (b[0] + b[2] / 2.0 + dx + rng.random_range(-0.5..0.5)).clamp(0.5, spec.width as f64 - 0.5);
            let cy = (b[1] + b[3] / 2.0 + dy + rng.random_range(-0.5..0.5)).clamp(0.5, spec.height as f64 - 0.5);
            [cx - w / 2.0, cy - h / 2.0, w, h]
        })
        .collect();
    Track {
        start: base.start + trim_a as u32,
        boxes,
    }
}

fn truncated(rng: &mut ChaCha8Rng, base: &Track) -> Track {
    let n = base.boxes.len();
    let len = ((n as f64 * rng.random_range(0.3..0.7)).round() as usize).max(1);
    let off = rng.random_range(0..=n - len);
    Track {
        start: base.start + off as u32,
        boxes: base.boxes[off..off + len].to_vec(),
    }
}

fn part(rng: &mut ChaCha8Rng, base: &Track) -> Track {
    let kind = rng.random_range(0..5);
    let boxes = base
        .boxes
        .iter()
        .map(|b| match kind {
            0 => [b[0], b[1], b[2], b[3] / 2.0],
            1 => [b[0], b[1] + b[3] / 2.0, b[2], b[3] / 2.0],
            2 => [b[0], b[1], b[2] / 2.0, b[3]],
            3 => [b[0] + b[2] / 2.0, b[1], b[2] / 2.0, b[3]],
            _ => [b[0] + 0.2 * b[2], b[1] + 0.2 * b[3], 0.6 * b[2], 0.6 * b[3]],
        })
        .collect();
    Track {
        start: base.start,
        boxes,
    }
}

fn background(rng: &mut ChaCha8Rng, spec: &SynthSpec) -> Track {
    let m = spec.frames as usize;
    let (w_img, h_img) = (spec.width as f64, spec.height as f64);
    let len = ((m as f64 * rng.random_range(0.4..1.0)).round() as usize).clamp(1, m);
    let start = rng.random_range(0..=m - len) as u32;
    let w = rng.random_range(0.15..0.5) * w_img;
    let h = rng.random_range(0.25..0.6) * h_img;
    let mut cx = rng.random_range(0.0..w_img);
    let mut cy = rng.random_range(0.0..h_img);
    let (vx, vy) = (rng.random_range(-0.8..0.8), rng.random_range(-0.5..0.5));
    let boxes = (0..len)
        .map(|_| {
            cx = clamp_center(cx + vx, w, 0.0, w_img);
            cy = clamp_center(cy + vy, h, 0.0, h_img);
            [cx - w / 2.0, cy - h / 2.0, w, h]
        })
        .collect();
    Track { start, boxes }
}

fn inside(b: &[f64; 4], x: f64, y: f64) -> bool {
    x >= b[0] && x < b[0] + b[2] && y >= b[1] && y < b[1] + b[3]
}

/// Flow and saliency planes, rounded to `f32` as stored on disk.
fn render(
    rng: &mut ChaCha8Rng,
    spec: &SynthSpec,
    actors: &[Track],
    distractor: Option<&Track>,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let (m, h, w) = (spec.frames as usize, spec.height as usize, spec.width as usize);
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let (cu, cv) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let amp: Vec<f64> = actors.iter().map(|_| rng.random_range(1.0..1.5)).collect();
    let omega: Vec<f64> = actors.iter().map(|_| rng.random_range(0.3..0.8)).collect();
    let actor_sal = rng.random_range(0.45..0.75);
    let spin = rng.random_range(0.2..0.6) * if rng.random::<bool>() { 1.0 } else { -1.0 };
    let dis_sal = rng.random_range(0.35..0.95);
    let n = m * h * w;
    let (mut u, mut v, mut s) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for t in 0..m {
        let abox: Vec<Option<[f64; 4]>> = actors.iter().map(|a| a.box_at(t as u32)).collect();
        let dbox = distractor.and_then(|d| d.box_at(t as u32));
        for y in 0..h {
            for x in 0..w {
                let k = (t * h + y) * w + x;
                let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
                let mut fu = cu;
                let mut fv = cv;
                let mut sal = 0.1;
                if let Some(b) = dbox.filter(|b| inside(b, px, py)) {
                    let (xc, yc) = (b[0] + b[2] / 2.0, b[1] + b[3] / 2.0);
                    fu -= spin * (py - yc);
                    fv += spin * (px - xc);
                    sal = dis_sal;
                }
                for (a, b) in abox.iter().enumerate() {
                    if let Some(b) = b.filter(|b| inside(b, px, py)) {
                        let phase = omega[a] * t as f64;
                        fu = cu + amp[a] * (2.0 * PI * (px - b[0]) / b[2] + phase).sin();
                        fv = cv + amp[a] * (2.0 * PI * (py - b[1]) / b[3] + phase).cos();
                        sal = actor_sal;
                    }
                }
                u[k] = (fu + spec.noise * 0.15 * noise.sample(rng)) as f32 as f64;
                v[k] = (fv + spec.noise * 0.15 * noise.sample(rng)) as f32 as f64;
                s[k] = (sal + spec.noise * 0.2 * rng.random::<f64>()).clamp(0.0, 1.0) as f32 as f64;
            }
        }
    }
    (u, v, s)
}

fn histogram_counts(
    rng: &mut ChaCha8Rng,
    spec: &SynthSpec,
    parts: &[(f64, &[Vec<f64>])],
) -> Vec<Vec<f64>> {
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    (0..HISTOGRAM_CELLS)
        .map(|c| {
            let mut p = vec![0.0; spec.hist_dim];
            for (weight, cells) in parts {
                for (pk, x) in p.iter_mut().zip(&cells[c]) {
                    *pk += weight * x;
                }
            }
            let p: Vec<f64> = p
                .into_iter()
                .map(|x| x * (spec.noise * noise.sample(rng)).exp())
                .collect();
            let total: f64 = p.iter().sum();
            p.into_iter().map(|x| (x / total * WORDS_PER_CELL).round()).collect()
        })
        .collect()
}

struct VideoModel<'a> {
    class: &'a ClassModel,
    /// Spatial pyramid cells of the actor component, permuted per video.
    actor_cells: Vec<Vec<Vec<f64>>>,
    background: Component,
    distractor: Component,
}

fn features(
    rng: &mut ChaCha8Rng,
    spec: &SynthSpec,
    model: &VideoModel,
    actor_weight: f64,
    distractor_weight: f64,
) -> (std::collections::BTreeMap<Channel, Vec<Vec<f64>>>, std::collections::BTreeMap<Channel, Vec<Vec<f64>>>) {
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let wd = distractor_weight * (1.0 - actor_weight);
    let wb = (1.0 - actor_weight - wd).max(0.0);
    let mut hist = std::collections::BTreeMap::new();
    let mut raw = std::collections::BTreeMap::new();
    let n = spec.raw_per_proposal;
    let na = (actor_weight * n as f64).round() as usize;
    let nd = ((wd * n as f64).round() as usize).min(n - na);
    for c in Channel::ALL {
        let ci = c.index();
        let parts = [
            (actor_weight, model.actor_cells[ci].as_slice()),
            (wd, model.distractor.cells[ci].as_slice()),
            (wb, model.background.cells[ci].as_slice()),
        ];
        hist.insert(c, histogram_counts(rng, spec, &parts));
        let vectors = (0..n)
            .map(|k| {
                let center = if k < na {
                    &model.class.actor.centers[ci][k % COMPONENTS]
                } else if k < na + nd {
                    &model.distractor.centers[ci][k % COMPONENTS]
                } else {
                    &model.background.centers[ci][rng.random_range(0..COMPONENTS)]
                };
                center
                    .iter()
                    .map(|x| ((x + spec.noise * noise.sample(rng)) * 1000.0).round() / 1000.0)
                    .collect()
            })
            .collect();
        raw.insert(c, vectors);
    }
    (hist, raw)
}

/// One generated video in on-disk form.
struct SynthVideo {
    manifest: ManifestRecord,
    proposals: Vec<ProposalRecord>,
    ground_truth: Vec<GroundTruthRecord>,
    flow: Raster,
    saliency: Raster,
}

fn class_name(c: usize) -> String {
    format!("action{c:02}")
}

fn build(spec: &SynthSpec, seed: u64) -> Result<Vec<SynthVideo>> {
    spec.validate()?;
    let (m, h, w) = (spec.frames, spec.height, spec.width);
    let mut out = Vec::new();
    for c in 0..spec.classes {
        let mut crng = ChaCha8Rng::seed_from_u64(mix_seed(&[seed, c as u64]));
        let class = ClassModel {
            actor: Component::new(&mut crng, spec),
            ratio_base: crng.random_range(0.45..0.9),
            ratio_amp: crng.random_range(0.15..0.35),
            ratio_freq: crng.random_range(0.5..1.5),
            ratio_phase: crng.random_range(0.0..2.0 * PI),
        };
        for vi in 0..spec.videos_per_class {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[seed, c as u64, vi as u64 + 1]));
            let video_id = format!("{}_v{vi:02}", class_name(c));
            let mut perm: Vec<usize> = (1..HISTOGRAM_CELLS).collect();
            perm.shuffle(&mut rng);
            let mut actor_cells = class.actor.cells.clone();
            for ch in actor_cells.iter_mut() {
                let orig = ch.clone();
                for (k, &p) in perm.iter().enumerate() {
                    ch[k + 1] = orig[p].clone();
                }
            }
            let model = VideoModel {
                class: &class,
                actor_cells,
                background: Component::new(&mut rng, spec),
                distractor: Component::new(&mut rng, spec),
            };

            let lanes: Vec<(f64, f64)> = if spec.instances == 1 {
                vec![(0.0, w as f64)]
            } else {
                vec![(0.0, w as f64 / 2.0 - 0.5), (w as f64 / 2.0 + 0.5, w as f64)]
            };
            let actors: Vec<Track> = lanes.iter().map(|&l| actor_track(&mut rng, spec, &class, l)).collect();
            let distractor = spec.distractors.then(|| distractor_track(&mut rng, spec));
            let (u, v, s) = render(&mut rng, spec, &actors, distractor.as_ref());

            let actor_tubes: Vec<Tube> = actors.iter().map(|a| a.tube(m, w, h)).collect::<Result<_>>()?;
            let dis_tube = distractor.as_ref().map(|d| d.tube(m, w, h)).transpose()?;

            let n = spec.proposals_per_video;
            let mut tracks: Vec<Track> = actors.clone();
            let rest = n - actors.len();
            let n_jit = rest * 30 / 100;
            let n_trunc = rest / 10;
            let n_part = rest / 10;
            let n_dis = if distractor.is_some() { rest * 15 / 100 } else { 0 };
            for k in 0..n_jit {
                let strength = rng.random_range(0.1..0.45);
                tracks.push(jittered(&mut rng, spec, &actors[k % actors.len()], strength));
            }
            for k in 0..n_trunc {
                tracks.push(truncated(&mut rng, &actors[k % actors.len()]));
            }
            for k in 0..n_part {
                tracks.push(part(&mut rng, &actors[k % actors.len()]));
            }
            if let Some(d) = &distractor {
                for _ in 0..n_dis {
                    let strength = rng.random_range(0.05..0.4);
                    tracks.push(jittered(&mut rng, spec, d, strength));
                }
            }
            while tracks.len() < n {
                tracks.push(background(&mut rng, spec));
            }
            let mut ids: Vec<u32> = (0..n as u32).collect();
            ids.shuffle(&mut rng);

            let mut proposals = Vec::with_capacity(n);
            for (track, &id) in tracks.iter().zip(&ids) {
                let tube = track.tube(m, w, h)?;
                let oa = actor_tubes.iter().map(|a| a.overlap(&tube)).fold(0.0, f64::max);
                let od = dis_tube.as_ref().map_or(0.0, |d| d.overlap(&tube));
                let (histograms, raw_features) = features(&mut rng, spec, &model, oa, od);
                proposals.push(ProposalRecord {
                    id,
                    video_id: video_id.clone(),
                    boxes: super::format::box_records(&tube),
                    histograms,
                    raw_features,
                });
            }
            proposals.sort_by_key(|p| p.id);

            let ground_truth = actor_tubes
                .iter()
                .enumerate()
                .map(|(k, t)| GroundTruthRecord {
                    video_id: video_id.clone(),
                    instance_id: k as u32,
                    boxes: super::format::box_records(t),
                })
                .collect();
            let (mu, mv, ms) = (m as usize, h as usize, w as usize);
            out.push(SynthVideo {
                manifest: ManifestRecord {
                    video_id: video_id.clone(),
                    class_label: class_name(c),
                    frames: m,
                    height: h,
                    width: w,
                    instance_count: spec.instances,
                    proposals: PathBuf::from(&video_id).join("proposals.jsonl"),
                    flow: PathBuf::from(&video_id).join("flow.tsrv"),
                    saliency: Some(PathBuf::from(&video_id).join("saliency.tsrv")),
                    intensity: None,
                    ground_truth: Some(PathBuf::from(&video_id).join("ground_truth.jsonl")),
                },
                proposals,
                ground_truth,
                flow: Raster::from_planes(mu, mv, ms, &[&u, &v])?,
                saliency: Raster::from_planes(mu, mv, ms, &[&s])?,
            });
        }
    }
    Ok(out)
}

fn to_video(sv: SynthVideo) -> Result<Video> {
    let r = &sv.manifest;
    let meta = VideoMeta {
        video_id: r.video_id.clone(),
        frames: r.frames,
        height: r.height,
        width: r.width,
        class_label: r.class_label.clone(),
        instance_count: r.instance_count,
    };
    let proposals = sv
        .proposals
        .into_iter()
        .map(|p| p.into_proposal(meta.frames, meta.width, meta.height))
        .collect::<Result<_>>()?;
    let ground_truth = sv
        .ground_truth
        .into_iter()
        .map(|g| {
            Ok(GroundTruthTube {
                tube: tube_from_records(&g.boxes, meta.frames, meta.width, meta.height)?,
                video_id: g.video_id,
                instance_id: g.instance_id,
            })
        })
        .collect::<Result<_>>()?;
    let f = &sv.flow;
    let flow = FlowField::new(f.frames, f.height, f.width, f.channel(0), f.channel(1))?;
    let s = &sv.saliency;
    let saliency = ScoreVolume::new(s.frames, s.height, s.width, s.channel(0))?;
    Ok(Video {
        meta,
        proposals,
        flow,
        saliency: Some(saliency),
        intensity: None,
        ground_truth,
    })
}

/// The dataset exactly as ingesting [`write_synthetic`]'s output would load it.
pub fn generate_synthetic(spec: &SynthSpec, seed: u64) -> Result<Dataset> {
    let videos = build(spec, seed)?.into_iter().map(to_video).collect::<Result<_>>()?;
    Ok(Dataset {
        videos,
        failures: Vec::new(),
    })
}

/// Writes a synthetic dataset under `dir` and returns its manifest path.
pub fn write_synthetic(spec: &SynthSpec, seed: u64, dir: &Path) -> Result<PathBuf> {
    let videos = build(spec, seed)?;
    let mut manifest = Vec::with_capacity(videos.len());
    for v in videos {
        let vdir = dir.join(&v.manifest.video_id);
        write_atomic(&vdir.join("proposals.jsonl"), &to_jsonl(&v.proposals)?)?;
        write_atomic(&vdir.join("ground_truth.jsonl"), &to_jsonl(&v.ground_truth)?)?;
        write_raster(&vdir.join("flow.tsrv"), &v.flow)?;
        write_raster(&vdir.join("saliency.tsrv"), &v.saliency)?;
        manifest.push(v.manifest);
    }
    let path = dir.join("manifest.jsonl");
    write_atomic(&path, &to_jsonl(&manifest)?)?;
    Ok(path)
}
