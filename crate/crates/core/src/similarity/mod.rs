//! Cross-video proposal similarities: global bag-of-words (chi-square kernel
//! over channels and pyramid cells), fine grain (optimal matching of
//! per-proposal descriptor clusters) and shape (DTW over aspect ratios).

mod chi2;
mod dtw;
mod hungarian;
mod kmeans;

pub use chi2::{chi2_kernel, chi2_statistic};
pub use dtw::{distance_to_similarity, dtw_distance, shape_similarity, ShapeSeries};
pub use hungarian::{hungarian, Assignment};
pub use kmeans::cluster_raw_features;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ActionProposal, Channel, FeatureHistogram, HISTOGRAM_CELLS};

/// The three similarity components of one cross-video proposal pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityRecord {
    pub theta: f64,
    pub gamma_fine: f64,
    pub pi_shape: f64,
}

impl SimilarityRecord {
    pub fn sum(&self) -> f64 {
        self.theta + self.gamma_fine + self.pi_shape
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimilarityConfig {
    /// Chi-square bandwidth per channel (Traj, MBH, HOF, HOG); derived from the
    /// data when absent.
    pub chi2_gamma: Option<[f64; 4]>,
    /// Clusters per proposal and channel for fine grain matching.
    pub clusters: usize,
    /// Matched-distance scale per channel; dataset median when absent.
    pub fine_sigma: Option<[f64; 4]>,
    /// DTW distance scale; dataset median when absent.
    pub shape_sigma: Option<f64>,
}

impl Default for SimilarityConfig {
    fn default() -> Self {
        Self {
            chi2_gamma: None,
            clusters: 6,
            fine_sigma: None,
            shape_sigma: None,
        }
    }
}

/// Bandwidths actually used for one class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub chi2_gamma: [f64; 4],
    pub fine_sigma: [f64; 4],
    pub shape_sigma: f64,
}

fn histograms(p: &ActionProposal) -> Result<[&FeatureHistogram; 4]> {
    let get = |c: Channel| p.histograms.get(&c).ok_or(Error::MissingChannel(c));
    Ok([
        get(Channel::Traj)?,
        get(Channel::Mbh)?,
        get(Channel::Hof)?,
        get(Channel::Hog)?,
    ])
}

fn chi2_cells(a: &FeatureHistogram, b: &FeatureHistogram) -> Result<[f64; HISTOGRAM_CELLS]> {
    let mut out = [0.0; HISTOGRAM_CELLS];
    for (k, o) in out.iter_mut().enumerate() {
        *o = chi2_statistic(&a.cells()[k], &b.cells()[k])?;
    }
    Ok(out)
}

/// Mean chi-square kernel over the four channels and five cells.
pub fn global_similarity(p_i: &ActionProposal, p_j: &ActionProposal, gamma: &[f64; 4]) -> Result<f64> {
    let (hi, hj) = (histograms(p_i)?, histograms(p_j)?);
    let mut sum = 0.0;
    for c in 0..4 {
        for stat in chi2_cells(hi[c], hj[c])? {
            sum += (-gamma[c] * stat).exp();
        }
    }
    Ok(sum / (4 * HISTOGRAM_CELLS) as f64)
}

fn cluster_seed(seed: u64, channel: Channel) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .rotate_left(17)
        .wrapping_add(channel.index() as u64 + 1)
}

/// Per-channel cluster centers of a proposal's raw descriptors.
pub fn proposal_clusters(p: &ActionProposal, clusters: usize, seed: u64) -> Result<[Vec<Vec<f64>>; 4]> {
    let mut out: [Vec<Vec<f64>>; 4] = Default::default();
    for c in Channel::ALL {
        let raw = p.raw_features.get(&c).ok_or(Error::MissingChannel(c))?;
        if raw.is_empty() {
            return Err(Error::EmptyInput("raw features"));
        }
        out[c.index()] = cluster_raw_features(raw.vectors(), clusters, cluster_seed(seed, c))?;
    }
    Ok(out)
}

/// Buffers reused across [`matched_distance`] calls.
#[derive(Debug, Default)]
struct MatchScratch {
    cost: Vec<f64>,
    perm: Vec<usize>,
    solver: hungarian::Workspace,
}

/// Mean Euclidean distance over the optimal one-to-one matching of two
/// center sets. Unequal counts are padded to square with the largest
/// distance and padded matches are left out of the mean.
pub fn matched_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    matched_distance_with(a, b, &mut MatchScratch::default())
}

fn matched_distance_with(a: &[Vec<f64>], b: &[Vec<f64>], scratch: &mut MatchScratch) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput("cluster centers"));
    }
    let (ka, kb) = (a.len(), b.len());
    let n = ka.max(kb);
    let cost = &mut scratch.cost;
    cost.clear();
    cost.resize(n * n, 0.0);
    let mut max = 0.0f64;
    for i in 0..ka {
        for j in 0..kb {
            if a[i].len() != b[j].len() {
                return Err(Error::DimensionMismatch(format!(
                    "descriptors of dimension {} and {}",
                    a[i].len(),
                    b[j].len()
                )));
            }
            let d = a[i]
                .iter()
                .zip(&b[j])
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt();
            cost[i * n + j] = d;
            max = max.max(d);
        }
    }
    for i in 0..n {
        for j in 0..n {
            if i >= ka || j >= kb {
                cost[i * n + j] = max;
            }
        }
    }
    // Only the optimal cost matters here, so any optimal permutation will do.
    if n <= hungarian::SUBSET_DP_LIMIT {
        hungarian::subset_dp(n, cost, &mut scratch.perm);
    } else {
        scratch.solver.assign(n, cost, &mut scratch.perm);
    }
    let mut sum = 0.0;
    for (i, &j) in scratch.perm.iter().enumerate() {
        if i < ka && j < kb {
            sum += cost[i * n + j];
        }
    }
    Ok(sum / ka.min(kb) as f64)
}

fn fine_distances(a: &[Vec<Vec<f64>>; 4], b: &[Vec<Vec<f64>>; 4], scratch: &mut MatchScratch) -> Result<[f64; 4]> {
    let mut out = [0.0; 4];
    for c in 0..4 {
        out[c] = matched_distance_with(&a[c], &b[c], scratch)?;
    }
    Ok(out)
}

/// Fine grain similarity: per channel `exp(-matched_distance / sigma)`,
/// averaged over channels.
pub fn fine_grain_similarity(
    p_i: &ActionProposal,
    p_j: &ActionProposal,
    clusters: usize,
    seed: u64,
    sigma: &[f64; 4],
) -> Result<f64> {
    let a = proposal_clusters(p_i, clusters, seed)?;
    let b = proposal_clusters(p_j, clusters, seed)?;
    let d = fine_distances(&a, &b, &mut MatchScratch::default())?;
    Ok((0..4).map(|c| distance_to_similarity(d[c], sigma[c])).sum::<f64>() / 4.0)
}

struct Descriptor<'a> {
    hist: [&'a FeatureHistogram; 4],
    clusters: [Vec<Vec<f64>>; 4],
    shape: Vec<f64>,
}

/// Similarities between every pair of proposals in different groups.
#[derive(Debug, Clone)]
pub struct ClassSimilarities {
    sizes: Vec<usize>,
    /// Row-major `sizes[g] x sizes[h]` block for each `g < h`, in pair order.
    blocks: Vec<Vec<SimilarityRecord>>,
    pub calibration: Calibration,
}

fn pair_index(groups: usize, g: usize, h: usize) -> usize {
    debug_assert!(g < h);
    g * groups - g * (g + 1) / 2 + (h - g - 1)
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    let odd = v.len() % 2 == 1;
    let mid = v.len() / 2;
    let (lo, m, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *m;
    if odd {
        Some(upper)
    } else {
        let lower = lo.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Some(0.5 * (lower + upper))
    }
}

fn positive_or(v: Option<f64>, fallback: f64) -> f64 {
    match v {
        Some(x) if x > 0.0 && x.is_finite() => x,
        _ => fallback,
    }
}

impl ClassSimilarities {
    /// Computes every cross-group record. Dataset-level bandwidths are
    /// derived in a first pass over all pairs, then applied in a second.
    pub fn compute(groups: &[Vec<&ActionProposal>], config: &SimilarityConfig, seed: u64) -> Result<Self> {
        if config.clusters == 0 {
            return Err(Error::InvalidParameter("clusters must be >= 1".into()));
        }
        let descriptors: Vec<Vec<Descriptor>> = groups
            .iter()
            .map(|g| {
                g.iter()
                    .map(|p| {
                        Ok(Descriptor {
                            hist: histograms(p)?,
                            clusters: proposal_clusters(p, config.clusters, seed)?,
                            shape: p.tube.aspect_ratios(),
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;

        let mut dims: [Option<usize>; 4] = [None; 4];
        for d in descriptors.iter().flatten() {
            for c in 0..4 {
                let dim = d.hist[c].dim();
                match dims[c] {
                    None => dims[c] = Some(dim),
                    Some(x) if x != dim => {
                        return Err(Error::DimensionMismatch(format!(
                            "{} histograms of dimension {x} and {dim}",
                            Channel::ALL[c]
                        )))
                    }
                    _ => {}
                }
            }
        }

        let sizes: Vec<usize> = groups.iter().map(Vec::len).collect();
        let ng = groups.len();
        let mut chi2_sum = [0.0f64; 4];
        let mut chi2_count = 0usize;
        let mut fine: Vec<Vec<[f64; 4]>> = Vec::new();
        let mut shape: Vec<Vec<f64>> = Vec::new();
        let mut scratch = MatchScratch::default();
        for g in 0..ng {
            for h in g + 1..ng {
                let mut fb = Vec::with_capacity(sizes[g] * sizes[h]);
                let mut sb = Vec::with_capacity(sizes[g] * sizes[h]);
                for a in &descriptors[g] {
                    for b in &descriptors[h] {
                        if config.chi2_gamma.is_none() {
                            for c in 0..4 {
                                chi2_sum[c] += chi2_cells(a.hist[c], b.hist[c])?.iter().sum::<f64>();
                            }
                            chi2_count += HISTOGRAM_CELLS;
                        }
                        fb.push(fine_distances(&a.clusters, &b.clusters, &mut scratch)?);
                        sb.push(dtw::dtw_raw(&a.shape, &b.shape));
                    }
                }
                fine.push(fb);
                shape.push(sb);
            }
        }

        let chi2_gamma = config.chi2_gamma.unwrap_or_else(|| {
            let mut g = [1.0; 4];
            for c in 0..4 {
                if chi2_count > 0 && chi2_sum[c] > 0.0 {
                    g[c] = chi2_count as f64 / chi2_sum[c];
                }
            }
            g
        });
        let fine_sigma = config.fine_sigma.unwrap_or_else(|| {
            let mut s = [1.0; 4];
            for (c, sc) in s.iter_mut().enumerate() {
                *sc = positive_or(median(fine.iter().flatten().map(|d| d[c]).collect()), 1.0);
            }
            s
        });
        let shape_sigma = config
            .shape_sigma
            .unwrap_or_else(|| positive_or(median(shape.iter().flatten().copied().collect()), 1.0));

        let mut blocks = Vec::with_capacity(fine.len());
        let mut k = 0;
        for g in 0..ng {
            for h in g + 1..ng {
                let mut block = Vec::with_capacity(sizes[g] * sizes[h]);
                let mut idx = 0;
                for a in &descriptors[g] {
                    for b in &descriptors[h] {
                        let mut theta = 0.0;
                        for c in 0..4 {
                            for stat in chi2_cells(a.hist[c], b.hist[c])? {
                                theta += (-chi2_gamma[c] * stat).exp();
                            }
                        }
                        theta /= (4 * HISTOGRAM_CELLS) as f64;
                        let d = fine[k][idx];
                        let gamma_fine = (0..4)
                            .map(|c| distance_to_similarity(d[c], fine_sigma[c]))
                            .sum::<f64>()
                            / 4.0;
                        let pi_shape = distance_to_similarity(shape[k][idx], shape_sigma);
                        block.push(SimilarityRecord {
                            theta: theta.max(f64::MIN_POSITIVE),
                            gamma_fine,
                            pi_shape,
                        });
                        idx += 1;
                    }
                }
                blocks.push(block);
                k += 1;
            }
        }

        Ok(Self {
            sizes,
            blocks,
            calibration: Calibration {
                chi2_gamma,
                fine_sigma,
                shape_sigma,
            },
        })
    }

    pub fn group_sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Record between node `a` of group `g` and node `b` of group `h` (`g != h`).
    pub fn get(&self, g: usize, a: usize, h: usize, b: usize) -> SimilarityRecord {
        assert_ne!(g, h, "no similarity inside a group");
        if g < h {
            self.blocks[pair_index(self.sizes.len(), g, h)][a * self.sizes[h] + b]
        } else {
            self.blocks[pair_index(self.sizes.len(), h, g)][b * self.sizes[g] + a]
        }
    }
}
