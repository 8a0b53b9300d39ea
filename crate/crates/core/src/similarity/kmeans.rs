use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const MAX_ITERATIONS: usize = 50;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

/// Seeded k-means over raw descriptors.
///
/// Vectors are sorted first, so the result depends on the multiset of inputs
/// and the seed but not on their order. The seed picks the first center;
/// the remaining centers are chosen by farthest-point seeding. Lloyd
/// iterations follow, with empty clusters re-seeded to the point farthest
/// from its center. When there are fewer than `k` vectors, `k` shrinks to
/// the vector count.
pub fn cluster_raw_features(raw: &[Vec<f64>], k: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if raw.is_empty() {
        return Err(Error::EmptyInput("raw features"));
    }
    if k == 0 {
        return Err(Error::InvalidParameter("cluster count must be >= 1".into()));
    }
    let dim = raw[0].len();
    if raw.iter().any(|v| v.len() != dim) {
        return Err(Error::DimensionMismatch("raw features disagree on dimension".into()));
    }
    let mut points: Vec<&[f64]> = raw.iter().map(Vec::as_slice).collect();
    points.sort_by(|a, b| lex_cmp(a, b));
    let k = k.min(points.len());

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers: Vec<Vec<f64>> = vec![points[rng.random_range(0..points.len())].to_vec()];
    let mut nearest: Vec<f64> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k {
        let (far, _) = nearest
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &d)| if d > acc.1 { (i, d) } else { acc });
        centers.push(points[far].to_vec());
        for (d, p) in nearest.iter_mut().zip(&points) {
            *d = d.min(sq_dist(p, &centers[centers.len() - 1]));
        }
    }

    let mut labels = vec![usize::MAX; points.len()];
    for _ in 0..MAX_ITERATIONS {
        let mut changed = false;
        let mut dist = vec![0.0; points.len()];
        for (i, p) in points.iter().enumerate() {
            let (best, d) = centers
                .iter()
                .enumerate()
                .map(|(c, ctr)| (c, sq_dist(p, ctr)))
                .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
            if labels[i] != best {
                labels[i] = best;
                changed = true;
            }
            dist[i] = d;
        }
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (i, p) in points.iter().enumerate() {
            counts[labels[i]] += 1;
            for (s, x) in sums[labels[i]].iter_mut().zip(p.iter()) {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                let (far, _) = dist
                    .iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |acc, (i, &d)| if d > acc.1 { (i, d) } else { acc });
                centers[c] = points[far].to_vec();
                dist[far] = 0.0;
            } else {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
    }
    Ok(centers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn sorted(mut v: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
        v.sort_by(|a, b| lex_cmp(a, b));
        v
    }

    #[test]
    fn distinct_points_become_centers() {
        let pts: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let c = cluster_raw_features(&pts, 6, 3).unwrap();
        assert_eq!(sorted(c), sorted(pts));
    }

    #[test]
    fn identical_points() {
        let pts = vec![vec![1.5, -2.0]; 10];
        let c = cluster_raw_features(&pts, 6, 9).unwrap();
        assert_eq!(c.len(), 6);
        assert!(c.iter().all(|x| x == &vec![1.5, -2.0]));
    }

    #[test]
    fn fewer_points_than_clusters() {
        let pts = vec![vec![0.0], vec![4.0]];
        let c = cluster_raw_features(&pts, 6, 0).unwrap();
        assert_eq!(sorted(c), vec![vec![0.0], vec![4.0]]);
        assert!(cluster_raw_features(&[], 6, 0).is_err());
    }

    #[test]
    fn order_does_not_matter() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pts: Vec<Vec<f64>> = (0..40).map(|_| vec![rng.random(), rng.random(), rng.random()]).collect();
        let mut shuffled = pts.clone();
        shuffled.reverse();
        shuffled.swap(3, 17);
        assert_eq!(
            cluster_raw_features(&pts, 6, 5).unwrap(),
            cluster_raw_features(&shuffled, 6, 5).unwrap()
        );
    }

    #[test]
    fn planted_blobs_are_recovered() {
        let separation = 10.0;
        let noise = Normal::new(0.0, 0.5).unwrap();
        for seed in 0..20u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let means: Vec<Vec<f64>> = (0..6)
                .map(|b| vec![separation * b as f64, separation * ((b * 7) % 6) as f64, 0.0, 0.0])
                .collect();
            let mut pts = Vec::new();
            for m in &means {
                for _ in 0..25 {
                    pts.push(m.iter().map(|x| x + noise.sample(&mut rng)).collect::<Vec<f64>>());
                }
            }
            let centers = cluster_raw_features(&pts, 6, seed).unwrap();
            for m in &means {
                let d = centers.iter().map(|c| sq_dist(c, m).sqrt()).fold(f64::INFINITY, f64::min);
                assert!(d < 0.1 * separation, "seed {seed}: blob mean missed by {d}");
            }
        }
    }
}
