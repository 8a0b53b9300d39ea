//! Discontinuity-preserving smoothing of a score volume on the 6-connected
//! video grid, solved with damped synchronous min-sum loopy belief propagation.
//!
//! Labels discretize `[0, 1]` uniformly. The unary term is quadratic in the
//! distance to the observed score and the pairwise term is a truncated
//! quadratic, so every message is a lower envelope of parabolas capped by a
//! constant and costs `O(L)` instead of `O(L^2)`.

use serde::{Deserialize, Serialize};

use super::ScoreVolume;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MrfParams {
    pub num_labels: usize,
    pub smoothness_weight: f64,
    /// Cap of the pairwise penalty.
    pub truncation: f64,
    pub max_iterations: usize,
    /// Fraction of the previous message kept at each update.
    pub damping: f64,
}

impl Default for MrfParams {
    fn default() -> Self {
        let num_labels = 16;
        let smoothness_weight = 1.0;
        let step = 1.0 / (num_labels - 1) as f64;
        Self {
            num_labels,
            smoothness_weight,
            // Four label steps, squared.
            truncation: smoothness_weight * (4.0 * step).powi(2),
            max_iterations: 30,
            damping: 0.5,
        }
    }
}

impl MrfParams {
    pub fn validate(&self) -> Result<()> {
        if self.num_labels < 2 || self.num_labels > u16::MAX as usize {
            return Err(Error::InvalidParameter(format!(
                "num_labels must be in [2, 65535], got {}",
                self.num_labels
            )));
        }
        if !(self.smoothness_weight >= 0.0 && self.smoothness_weight.is_finite()) {
            return Err(Error::InvalidParameter("smoothness_weight must be >= 0".into()));
        }
        if !(self.truncation > 0.0) {
            return Err(Error::InvalidParameter("truncation must be > 0".into()));
        }
        if !(0.0..1.0).contains(&self.damping) {
            return Err(Error::InvalidParameter("damping must be in [0, 1)".into()));
        }
        Ok(())
    }

    pub fn label_value(&self, label: usize) -> f64 {
        label as f64 / (self.num_labels - 1) as f64
    }

    /// Nearest label to a value in `[0, 1]`.
    pub fn quantize(&self, value: f64) -> usize {
        let top = (self.num_labels - 1) as f64;
        (value.clamp(0.0, 1.0) * top).round() as usize
    }

    pub fn unary(&self, label: usize, observed: f64) -> f64 {
        let d = self.label_value(label) - observed;
        d * d
    }

    pub fn pairwise(&self, a: usize, b: usize) -> f64 {
        let d = self.label_value(a) - self.label_value(b);
        (self.smoothness_weight * d * d).min(self.truncation)
    }

    /// Coefficient of `(a - b)^2` when labels are measured in steps.
    fn step_coefficient(&self) -> f64 {
        let step = 1.0 / (self.num_labels - 1) as f64;
        self.smoothness_weight * step * step
    }
}

#[derive(Debug, Clone)]
pub struct MrfOutcome {
    pub labels: Vec<usize>,
    pub energy: f64,
    /// Energy of the observed scores rounded to the nearest labels.
    pub quantized_energy: f64,
    /// Whether the returned labels come from belief propagation rather than quantization.
    pub from_bp: bool,
    pub iterations: usize,
}

#[derive(Clone, Copy)]
struct Grid {
    frames: usize,
    height: usize,
    width: usize,
}

impl Grid {
    fn len(&self) -> usize {
        self.frames * self.height * self.width
    }

    /// Neighbor of `(t, y, x)` in direction `d`: -x, +x, -y, +y, -t, +t.
    #[inline]
    fn neighbor(&self, p: usize, t: usize, y: usize, x: usize, d: usize) -> Option<usize> {
        let plane = self.height * self.width;
        match d {
            0 if x > 0 => Some(p - 1),
            1 if x + 1 < self.width => Some(p + 1),
            2 if y > 0 => Some(p - self.width),
            3 if y + 1 < self.height => Some(p + self.width),
            4 if t > 0 => Some(p - plane),
            5 if t + 1 < self.frames => Some(p + plane),
            _ => None,
        }
    }
}

const DIRS: usize = 6;

#[inline]
fn opposite(d: usize) -> usize {
    d ^ 1
}

/// `out[q] = min_p f[p] + c * (p - q)^2` over integer labels (lower envelope of parabolas).
pub fn distance_transform(f: &[f64], c: f64, out: &mut [f64]) {
    let n = f.len();
    debug_assert_eq!(out.len(), n);
    if n == 0 {
        return;
    }
    if c <= 0.0 {
        let m = f.iter().copied().fold(f64::INFINITY, f64::min);
        out.iter_mut().for_each(|o| *o = m);
        return;
    }
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    envelope(f, c, out, &mut v, &mut z);
}

fn envelope(f: &[f64], c: f64, out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        let fq = f[q] + c * (q * q) as f64;
        let mut s;
        loop {
            let p = v[k];
            s = (fq - (f[p] + c * (p * p) as f64)) / (2.0 * c * (q - p) as f64);
            if s <= z[k] && k > 0 {
                k -= 1;
            } else {
                break;
            }
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let d = q as f64 - p as f64;
        *o = c * d * d + f[p];
    }
}

/// Energy of a labeling: unary terms over all voxels plus the pairwise term
/// over every undirected 6-neighborhood edge.
pub fn mrf_energy(
    labels: &[usize],
    observed: &[f64],
    frames: usize,
    height: usize,
    width: usize,
    params: &MrfParams,
) -> f64 {
    let grid = Grid {
        frames,
        height,
        width,
    };
    let mut e = 0.0;
    let mut p = 0;
    for t in 0..frames {
        for y in 0..height {
            for x in 0..width {
                e += params.unary(labels[p], observed[p]);
                for d in [1, 3, 5] {
                    if let Some(q) = grid.neighbor(p, t, y, x, d) {
                        e += params.pairwise(labels[p], labels[q]);
                    }
                }
                p += 1;
            }
        }
    }
    e
}

struct Sweep<'a> {
    grid: Grid,
    observed: &'a [f64],
    label_values: &'a [f64],
    coef: f64,
    trunc: f64,
    keep: f64,
    windowed: bool,
    /// Pairwise cost of a jump of `d` labels, for every `d` below the cap.
    offsets: &'a [f64],
    /// `offsets` mirrored around zero: the cost of each window position.
    kernel: &'a [f64],
}

struct Scratch {
    belief: Vec<f64>,
    h: Vec<f64>,
    out: Vec<f64>,
    /// `h` with `+inf` margins on both sides for the windowed product.
    padded: Vec<f64>,
    env_v: Vec<usize>,
    env_z: Vec<f64>,
}

/// One synchronous update of every message from `msgs` into `next`.
/// Returns the largest change.
#[inline(always)]
fn sweep(s: &Sweep, nl: usize, msgs: &[f64], next: &mut [f64], scratch: &mut Scratch) -> f64 {
    let grid = s.grid;
    let keep = s.keep;
    let r = s.offsets.len().saturating_sub(1);
    let belief = &mut scratch.belief[..nl];
    let h = &mut scratch.h[..nl];
    let out = &mut scratch.out[..nl];
    let padded = &mut scratch.padded[..nl + 2 * r];
    let label_values = &s.label_values[..nl];
    let mut delta: f64 = 0.0;
    let mut p = 0;
    for t in 0..grid.frames {
        for y in 0..grid.height {
            for x in 0..grid.width {
                let base = p * DIRS * nl;
                for (b, &v) in belief.iter_mut().zip(label_values) {
                    let d = v - s.observed[p];
                    *b = d * d;
                }
                for incoming in msgs[base..base + DIRS * nl].chunks_exact(nl) {
                    for (b, &m) in belief.iter_mut().zip(incoming) {
                        *b += m;
                    }
                }
                for dir in 0..DIRS {
                    let Some(q) = grid.neighbor(p, t, y, x, dir) else {
                        continue;
                    };
                    let incoming = &msgs[base + dir * nl..base + (dir + 1) * nl];
                    for ((hl, &b), &m) in h.iter_mut().zip(belief.iter()).zip(incoming) {
                        *hl = b - m;
                    }
                    let hmin = h.iter().fold(f64::INFINITY, |m, &x| if x < m { x } else { m });
                    if s.windowed {
                        padded[r..r + nl].copy_from_slice(h);
                        out.copy_from_slice(h);
                        for (j, &c) in s.kernel.iter().enumerate() {
                            if j == r {
                                continue;
                            }
                            for (o, &x) in out.iter_mut().zip(&padded[j..j + nl]) {
                                let v = x + c;
                                *o = if v < *o { v } else { *o };
                            }
                        }
                    } else if s.coef > 0.0 {
                        envelope(h, s.coef, out, &mut scratch.env_v, &mut scratch.env_z);
                    } else {
                        out.iter_mut().for_each(|o| *o = hmin);
                    }
                    let cap = hmin + s.trunc;
                    for o in out.iter_mut() {
                        *o = if *o > cap { cap } else { *o };
                    }
                    let omin = out.iter().fold(f64::INFINITY, |m, &x| if x < m { x } else { m });
                    let slot = (q * DIRS + opposite(dir)) * nl;
                    let old = &msgs[slot..slot + nl];
                    for ((dst, &o), &prev) in next[slot..slot + nl].iter_mut().zip(out.iter()).zip(old) {
                        let m = (1.0 - keep) * (o - omin) + keep * prev;
                        let change = (m - prev).abs();
                        delta = if change > delta { change } else { delta };
                        *dst = m;
                    }
                }
                p += 1;
            }
        }
    }
    delta
}

/// Runs belief propagation and returns the full outcome, including energies.
pub fn smooth_mrf_labels(scores: &ScoreVolume, params: &MrfParams) -> Result<MrfOutcome> {
    params.validate()?;
    let grid = Grid {
        frames: scores.frames(),
        height: scores.height(),
        width: scores.width(),
    };
    let n = grid.len();
    let nl = params.num_labels;

    let max = scores.values().iter().copied().fold(0.0, f64::max);
    let scale = if max > 1.0 { max } else { 1.0 };
    let observed: Vec<f64> = scores.values().iter().map(|v| v / scale).collect();
    let label_values: Vec<f64> = (0..nl).map(|l| params.label_value(l)).collect();

    let coef = params.step_coefficient();
    let trunc = params.truncation;

    // Label jumps whose quadratic cost reaches the cap never beat it, so the
    // min-plus product only needs a window of nearby labels.
    let offsets: Vec<f64> = (0..nl)
        .map(|d| coef * (d * d) as f64)
        .take_while(|&c| c < trunc)
        .collect();
    let windowed = coef > 0.0 && offsets.len() * 4 <= nl;
    let kernel: Vec<f64> = offsets.iter().rev().chain(offsets.iter().skip(1)).copied().collect();
    let r = offsets.len().saturating_sub(1);

    let setup = Sweep {
        grid,
        observed: &observed,
        label_values: &label_values,
        coef,
        trunc,
        keep: params.damping,
        windowed,
        offsets: &offsets,
        kernel: &kernel,
    };
    let mut scratch = Scratch {
        belief: vec![0.0; nl],
        h: vec![0.0; nl],
        out: vec![0.0; nl],
        padded: vec![f64::INFINITY; nl + 2 * r],
        env_v: vec![0; nl],
        env_z: vec![0.0; nl + 1],
    };
    let mut msgs = vec![0.0f64; n * DIRS * nl];
    let mut next = vec![0.0f64; n * DIRS * nl];

    let mut iterations = 0;
    for _ in 0..params.max_iterations {
        iterations += 1;
        // The default label count gets a copy with constant loop bounds.
        let delta = match nl {
            16 => sweep(&setup, 16, &msgs, &mut next, &mut scratch),
            _ => sweep(&setup, nl, &msgs, &mut next, &mut scratch),
        };
        std::mem::swap(&mut msgs, &mut next);
        if delta <= 1e-13 {
            break;
        }
    }

    // Decode in raster order, conditioning on neighbors already decoded and
    // using messages from the rest. On chains this is exact backtracking.
    let mut labels = vec![0usize; n];
    let mut p = 0;
    for t in 0..grid.frames {
        for y in 0..grid.height {
            for x in 0..grid.width {
                let base = p * DIRS * nl;
                let mut best = (f64::INFINITY, 0usize);
                for l in 0..nl {
                    let d = label_values[l] - observed[p];
                    let mut cost = d * d;
                    for dir in 0..DIRS {
                        if let Some(q) = grid.neighbor(p, t, y, x, dir) {
                            if dir % 2 == 0 {
                                cost += params.pairwise(l, labels[q]);
                            } else {
                                cost += msgs[base + dir * nl + l];
                            }
                        }
                    }
                    if cost < best.0 {
                        best = (cost, l);
                    }
                }
                labels[p] = best.1;
                p += 1;
            }
        }
    }

    let quantized: Vec<usize> = observed.iter().map(|&o| params.quantize(o)).collect();
    let energy = mrf_energy(&labels, &observed, grid.frames, grid.height, grid.width, params);
    let quantized_energy =
        mrf_energy(&quantized, &observed, grid.frames, grid.height, grid.width, params);
    Ok(if energy <= quantized_energy {
        MrfOutcome {
            labels,
            energy,
            quantized_energy,
            from_bp: true,
            iterations,
        }
    } else {
        MrfOutcome {
            labels: quantized,
            energy: quantized_energy,
            quantized_energy,
            from_bp: false,
            iterations,
        }
    })
}

/// Smoothed foreground scores in `[0, 1]`.
pub fn smooth_mrf(scores: &ScoreVolume, params: &MrfParams) -> Result<ScoreVolume> {
    let outcome = smooth_mrf_labels(scores, params)?;
    let values = outcome
        .labels
        .iter()
        .map(|&l| params.label_value(l))
        .collect();
    ScoreVolume::new(scores.frames(), scores.height(), scores.width(), values)
}
