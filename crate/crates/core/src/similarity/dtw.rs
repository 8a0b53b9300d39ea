use crate::error::{Error, Result};

/// Per-frame aspect ratios of a tube.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeSeries {
    ratios: Vec<f64>,
}

impl ShapeSeries {
    pub fn new(ratios: Vec<f64>) -> Result<Self> {
        if ratios.is_empty() {
            return Err(Error::EmptyInput("shape series"));
        }
        if ratios.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::InvalidParameter(
                "aspect ratios must be positive and finite".into(),
            ));
        }
        Ok(Self { ratios })
    }

    pub fn from_tube(tube: &crate::model::Tube) -> Self {
        Self {
            ratios: tube.aspect_ratios(),
        }
    }

    pub fn ratios(&self) -> &[f64] {
        &self.ratios
    }

    pub fn len(&self) -> usize {
        self.ratios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ratios.is_empty()
    }
}

/// Dynamic time warping distance with local cost `|a_i - b_j|`, steps
/// `(1,0)`, `(0,1)`, `(1,1)` and both endpoints anchored.
///
/// The alignment minimizes total cost, preferring the shorter path on exact
/// ties, and the result is that cost divided by the path length (number of
/// aligned pairs).
pub fn dtw_distance(a: &ShapeSeries, b: &ShapeSeries) -> f64 {
    dtw_raw(a.ratios(), b.ratios())
}

pub(crate) fn dtw_raw(a: &[f64], b: &[f64]) -> f64 {
    let (n, m) = (a.len(), b.len());
    // (cost, length) per cell of the current and previous rows.
    let mut prev = vec![(f64::INFINITY, 0u32); m];
    let mut cur = vec![(f64::INFINITY, 0u32); m];
    let better = |x: (f64, u32), y: (f64, u32)| x.0 < y.0 || (x.0 == y.0 && x.1 < y.1);
    for i in 0..n {
        for j in 0..m {
            let local = (a[i] - b[j]).abs();
            let best = if i == 0 && j == 0 {
                (0.0, 0)
            } else {
                let mut best = (f64::INFINITY, u32::MAX);
                if i > 0 && j > 0 && better(prev[j - 1], best) {
                    best = prev[j - 1];
                }
                if i > 0 && better(prev[j], best) {
                    best = prev[j];
                }
                if j > 0 && better(cur[j - 1], best) {
                    best = cur[j - 1];
                }
                best
            };
            cur[j] = (best.0 + local, best.1 + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let (cost, len) = prev[m - 1];
    cost / len as f64
}

/// Maps a non-negative distance to a similarity in `(0, 1]` via `exp(-d / sigma)`.
pub fn distance_to_similarity(distance: f64, sigma: f64) -> f64 {
    if distance <= 0.0 {
        return 1.0;
    }
    if !(sigma > 0.0) {
        return f64::MIN_POSITIVE;
    }
    (-distance / sigma).exp().max(f64::MIN_POSITIVE)
}

/// `exp(-dtw / sigma_shape)`.
pub fn shape_similarity(a: &ShapeSeries, b: &ShapeSeries, sigma_shape: f64) -> f64 {
    distance_to_similarity(dtw_distance(a, b), sigma_shape)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Enumerates every monotone anchored path recursively; returns the
    /// minimum cost path (shortest among exact ties) normalized by length.
    fn oracle(a: &[f64], b: &[f64]) -> f64 {
        fn walk(a: &[f64], b: &[f64], i: usize, j: usize, cost: f64, len: u32, best: &mut (f64, u32)) {
            let cost = cost + (a[i] - b[j]).abs();
            let len = len + 1;
            if i == a.len() - 1 && j == b.len() - 1 {
                if cost < best.0 || (cost == best.0 && len < best.1) {
                    *best = (cost, len);
                }
                return;
            }
            if i + 1 < a.len() && j + 1 < b.len() {
                walk(a, b, i + 1, j + 1, cost, len, best);
            }
            if i + 1 < a.len() {
                walk(a, b, i + 1, j, cost, len, best);
            }
            if j + 1 < b.len() {
                walk(a, b, i, j + 1, cost, len, best);
            }
        }
        let mut best = (f64::INFINITY, 0);
        walk(a, b, 0, 0, 0.0, 0, &mut best);
        best.0 / best.1 as f64
    }

    fn series(v: &[f64]) -> ShapeSeries {
        ShapeSeries::new(v.to_vec()).unwrap()
    }

    #[test]
    fn identical_and_stretched_series() {
        let a = series(&[0.5, 0.8, 1.2, 0.9]);
        assert_eq!(dtw_distance(&a, &a), 0.0);
        let doubled = series(&[0.5, 0.5, 0.8, 0.8, 1.2, 1.2, 0.9, 0.9]);
        assert_eq!(dtw_distance(&a, &doubled), 0.0);
        assert_eq!(dtw_distance(&doubled, &a), 0.0);
    }

    #[test]
    fn known_value() {
        // Best path pairs (1,1),(2,2),(3,2): cost 0 + 0 + 1 over 3 steps.
        let d = dtw_distance(&series(&[1.0, 2.0, 3.0]), &series(&[1.0, 2.0]));
        assert!((d - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_empty_and_invalid() {
        assert!(ShapeSeries::new(vec![]).is_err());
        assert!(ShapeSeries::new(vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn matches_path_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..200 {
            let a: Vec<f64> = (0..rng.random_range(1..=8)).map(|_| rng.random_range(0.2..3.0)).collect();
            let b: Vec<f64> = (0..rng.random_range(1..=8)).map(|_| rng.random_range(0.2..3.0)).collect();
            let d = dtw_distance(&series(&a), &series(&b));
            assert!((d - oracle(&a, &b)).abs() < 1e-9);
            assert!((d - dtw_distance(&series(&b), &series(&a))).abs() < 1e-12);
        }
    }

    #[test]
    fn similarity_transform() {
        let a = series(&[1.0, 1.5]);
        assert_eq!(shape_similarity(&a, &a, 0.3), 1.0);
        assert!((distance_to_similarity(0.4, 0.4) - (-1.0f64).exp()).abs() < 1e-15);
        assert!(distance_to_similarity(5.0, 0.0) > 0.0);
        // Smaller distances rank higher.
        let b = series(&[1.0, 1.6]);
        let c = series(&[1.0, 2.5]);
        let d = series(&[3.0, 0.5]);
        let sims = [shape_similarity(&a, &b, 1.0), shape_similarity(&a, &c, 1.0), shape_similarity(&a, &d, 1.0)];
        assert!(sims[0] > sims[1] && sims[1] > sims[2]);
    }
}
