//! Proposal-pool and selection quality against ground truth.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gmcp::ComponentMask;
use crate::model::{GroundTruthTube, Tube};

pub const DEFAULT_LOCALIZATION_THRESHOLD: f64 = 0.2;

/// Average over ground truths of the best overlap reached by any tube in
/// that video's pool. Videos without a pool count as empty pools.
pub fn abo(pools: &BTreeMap<String, Vec<Tube>>, ground_truths: &[GroundTruthTube]) -> Result<f64> {
    if ground_truths.is_empty() {
        return Err(Error::EmptyInput("ground truth"));
    }
    let total: f64 = ground_truths
        .iter()
        .map(|g| best_overlap(pools.get(&g.video_id).map(Vec::as_slice).unwrap_or(&[]), &g.tube))
        .sum();
    Ok(total / ground_truths.len() as f64)
}

fn best_overlap(pool: &[Tube], gt: &Tube) -> f64 {
    pool.iter().map(|p| p.overlap(gt)).fold(0.0, f64::max)
}

/// Unweighted mean of per-class ABO values.
pub fn mabo(per_class_abo: &[f64]) -> Result<f64> {
    if per_class_abo.is_empty() {
        return Err(Error::EmptyInput("class ABO values"));
    }
    Ok(per_class_abo.iter().sum::<f64>() / per_class_abo.len() as f64)
}

/// Greedy one-to-one matching of selections to ground truths inside each
/// video, by descending overlap. Returns for every ground truth (in input
/// order) the overlap of its matched selection, 0 when unmatched.
pub fn matched_overlaps(
    selections: &BTreeMap<String, Vec<Tube>>,
    ground_truths: &[GroundTruthTube],
) -> Vec<f64> {
    let mut out = vec![0.0; ground_truths.len()];
    let mut by_video: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (k, g) in ground_truths.iter().enumerate() {
        by_video.entry(g.video_id.as_str()).or_default().push(k);
    }
    for (video, gts) in by_video {
        let Some(sel) = selections.get(video) else {
            continue;
        };
        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for &k in &gts {
            for (s, tube) in sel.iter().enumerate() {
                let iou = tube.overlap(&ground_truths[k].tube);
                if iou > 0.0 {
                    pairs.push((iou, k, s));
                }
            }
        }
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut gt_used = vec![false; ground_truths.len()];
        let mut sel_used = vec![false; sel.len()];
        for (iou, k, s) in pairs {
            if !gt_used[k] && !sel_used[s] {
                gt_used[k] = true;
                sel_used[s] = true;
                out[k] = iou;
            }
        }
    }
    out
}

/// Fraction of ground-truth instances whose matched selection overlaps it by
/// at least `threshold`. Zero when there is no ground truth.
pub fn localization_accuracy(
    selections: &BTreeMap<String, Vec<Tube>>,
    ground_truths: &[GroundTruthTube],
    threshold: f64,
) -> f64 {
    if ground_truths.is_empty() {
        return 0.0;
    }
    let hits = matched_overlaps(selections, ground_truths)
        .into_iter()
        .filter(|&o| o >= threshold)
        .count();
    hits as f64 / ground_truths.len() as f64
}

/// One column of the component ablation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationConfig {
    pub name: String,
    pub mask: ComponentMask,
}

/// Initial score only, then shape, global and fine grain similarity added in turn.
pub fn standard_ablation() -> Vec<AblationConfig> {
    let cfg = |name: &str, global, fine, shape| AblationConfig {
        name: name.to_string(),
        mask: ComponentMask { global, fine, shape },
    };
    vec![
        cfg("initial", false, false, false),
        cfg("initial+shape", false, false, true),
        cfg("initial+shape+global", true, false, true),
        cfg("initial+shape+global+fine", true, true, true),
    ]
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_class_abo: BTreeMap<String, f64>,
    pub mabo: f64,
    pub localization_accuracy: f64,
    pub per_class_accuracy: BTreeMap<String, f64>,
    pub per_video_best_iou: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ablation_rows: Option<BTreeMap<String, f64>>,
}
