use super::{FlowField, ScoreVolume};
use crate::error::{Error, Result};

/// Derivatives of one frame along x and y: central differences inside,
/// one-sided differences at the borders, zero along a unit-length axis.
fn gradients(frame: &[f64], height: usize, width: usize) -> (Vec<f64>, Vec<f64>) {
    let mut gx = vec![0.0; frame.len()];
    let mut gy = vec![0.0; frame.len()];
    let at = |y: usize, x: usize| frame[y * width + x];
    for y in 0..height {
        for x in 0..width {
            gx[y * width + x] = if width < 2 {
                0.0
            } else if x == 0 {
                at(y, 1) - at(y, 0)
            } else if x == width - 1 {
                at(y, x) - at(y, x - 1)
            } else {
                (at(y, x + 1) - at(y, x - 1)) / 2.0
            };
            gy[y * width + x] = if height < 2 {
                0.0
            } else if y == 0 {
                at(1, x) - at(0, x)
            } else if y == height - 1 {
                at(y, x) - at(y - 1, x)
            } else {
                (at(y + 1, x) - at(y - 1, x)) / 2.0
            };
        }
    }
    (gx, gy)
}

/// Frobenius norm of the flow Jacobian `[[u_x, u_y], [v_x, v_y]]` at every pixel.
pub fn motion_magnitude(flow: &FlowField) -> ScoreVolume {
    let (h, w) = (flow.height(), flow.width());
    let n = h * w;
    let mut out = Vec::with_capacity(flow.frames() * n);
    for t in 0..flow.frames() {
        let (ux, uy) = gradients(&flow.u()[t * n..(t + 1) * n], h, w);
        let (vx, vy) = gradients(&flow.v()[t * n..(t + 1) * n], h, w);
        out.extend((0..n).map(|i| (ux[i] * ux[i] + uy[i] * uy[i] + vx[i] * vx[i] + vy[i] * vy[i]).sqrt()));
    }
    ScoreVolume::new(flow.frames(), h, w, out).expect("shape preserved")
}

/// Spatial gradient magnitude of a scalar raster. Used as a saliency stand-in
/// when no saliency map is supplied.
pub fn gradient_magnitude(intensity: &ScoreVolume) -> ScoreVolume {
    let (h, w) = (intensity.height(), intensity.width());
    let mut out = Vec::with_capacity(intensity.values().len());
    for t in 0..intensity.frames() {
        let (gx, gy) = gradients(intensity.frame(t), h, w);
        out.extend(gx.iter().zip(&gy).map(|(a, b)| a.hypot(*b)));
    }
    ScoreVolume::new(intensity.frames(), h, w, out).expect("shape preserved")
}

/// Max-normalizes each cue per frame and sums them pointwise (range `[0, 2]`).
pub fn aggregate_cues(motion: &ScoreVolume, saliency: &ScoreVolume) -> Result<ScoreVolume> {
    if !motion.same_shape(saliency) {
        return Err(Error::DimensionMismatch(format!(
            "motion {}x{}x{} vs saliency {}x{}x{}",
            motion.frames(),
            motion.height(),
            motion.width(),
            saliency.frames(),
            saliency.height(),
            saliency.width()
        )));
    }
    let m = motion.max_normalized();
    let s = saliency.max_normalized();
    let values = m.values().iter().zip(s.values()).map(|(a, b)| a + b).collect();
    ScoreVolume::new(motion.frames(), motion.height(), motion.width(), values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn flow_from(t: usize, h: usize, w: usize, f: impl Fn(usize, usize, usize) -> (f64, f64)) -> FlowField {
        let mut u = Vec::new();
        let mut v = Vec::new();
        for tt in 0..t {
            for y in 0..h {
                for x in 0..w {
                    let (a, b) = f(tt, y, x);
                    u.push(a);
                    v.push(b);
                }
            }
        }
        FlowField::new(t, h, w, u, v).unwrap()
    }

    #[test]
    fn constant_flow_has_no_motion_boundary() {
        let m = motion_magnitude(&flow_from(2, 5, 6, |_, _, _| (3.0, -2.0)));
        assert!(m.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn linear_flow_has_unit_gradient() {
        let m = motion_magnitude(&flow_from(1, 5, 6, |_, _, x| (x as f64, 0.0)));
        for y in 0..5 {
            for x in 0..6 {
                assert!((m.get(0, y, x) - 1.0).abs() < 1e-12);
            }
        }
    }

    /// Smooth analytic field; the oracle is an independent finite-difference loop
    /// written against the closed-form samples.
    #[test]
    fn smooth_flow_matches_finite_difference_oracle() {
        let (t, h, w) = (2, 7, 9);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (a, b, c, d): (f64, f64, f64, f64) = (rng.random(), rng.random(), rng.random(), rng.random());
        let fu = move |tt: usize, y: f64, x: f64| (a * x + tt as f64).sin() + b * y * y;
        let fv = move |_tt: usize, y: f64, x: f64| (c * y).cos() * d * x;
        let flow = flow_from(t, h, w, |tt, y, x| (fu(tt, y as f64, x as f64), fv(tt, y as f64, x as f64)));
        let m = motion_magnitude(&flow);
        for tt in 0..t {
            for y in 0..h {
                for x in 0..w {
                    let diff = |f: &dyn Fn(f64, f64) -> f64, along_x: bool| {
                        let (p, n) = if along_x { (x, w) } else { (y, h) };
                        let at = |k: usize| if along_x { f(y as f64, k as f64) } else { f(k as f64, x as f64) };
                        if p == 0 {
                            at(1) - at(0)
                        } else if p == n - 1 {
                            at(p) - at(p - 1)
                        } else {
                            0.5 * (at(p + 1) - at(p - 1))
                        }
                    };
                    let u = |yy: f64, xx: f64| fu(tt, yy, xx);
                    let v = |yy: f64, xx: f64| fv(tt, yy, xx);
                    let expect = (diff(&u, true).powi(2)
                        + diff(&u, false).powi(2)
                        + diff(&v, true).powi(2)
                        + diff(&v, false).powi(2))
                    .sqrt();
                    assert!((m.get(tt, y, x) - expect).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn motion_ignores_constant_offsets() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let base: Vec<(f64, f64)> = (0..2 * 6 * 6).map(|_| (rng.random(), rng.random())).collect();
        let a = flow_from(2, 6, 6, |t, y, x| base[(t * 6 + y) * 6 + x]);
        let b = flow_from(2, 6, 6, |t, y, x| {
            let (u, v) = base[(t * 6 + y) * 6 + x];
            (u + 4.0, v - 1.5)
        });
        let (ma, mb) = (motion_magnitude(&a), motion_magnitude(&b));
        for (x, y) in ma.values().iter().zip(mb.values()) {
            assert!(*x >= 0.0);
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn aggregation_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m: Vec<f64> = (0..3 * 4 * 5).map(|_| rng.random::<f64>() * 7.0).collect();
        let s: Vec<f64> = (0..3 * 4 * 5).map(|_| rng.random::<f64>() * 0.2).collect();
        let motion = ScoreVolume::new(3, 4, 5, m.clone()).unwrap();
        let saliency = ScoreVolume::new(3, 4, 5, s.clone()).unwrap();
        let zero = ScoreVolume::zeros(3, 4, 5).unwrap();

        let only_motion = aggregate_cues(&motion, &zero).unwrap();
        assert_eq!(only_motion.values(), motion.max_normalized().values());
        assert!(!only_motion.is_normalized());

        let doubled = aggregate_cues(&motion, &motion).unwrap();
        for (d, n) in doubled.values().iter().zip(motion.max_normalized().values()) {
            assert_eq!(*d, 2.0 * n);
        }

        let agg = aggregate_cues(&motion, &saliency).unwrap();
        for t in 0..3 {
            let fm = m[t * 20..(t + 1) * 20].iter().cloned().fold(0.0, f64::max);
            let fs = s[t * 20..(t + 1) * 20].iter().cloned().fold(0.0, f64::max);
            for i in 0..20 {
                let expect = m[t * 20 + i] / fm + s[t * 20 + i] / fs;
                assert!((agg.values()[t * 20 + i] - expect).abs() < 1e-12);
            }
        }
        let other = ScoreVolume::zeros(3, 5, 4).unwrap();
        assert!(aggregate_cues(&motion, &other).is_err());
    }

    #[test]
    fn gradient_saliency_of_step_edge() {
        let mut v = vec![0.0; 10];
        v[5..].iter_mut().for_each(|x| *x = 1.0);
        let s = gradient_magnitude(&ScoreVolume::new(1, 1, 10, v).unwrap());
        assert_eq!(s.values()[0], 0.0);
        assert_eq!(s.values()[4], 0.5);
        assert_eq!(s.values()[5], 0.5);
    }
}
