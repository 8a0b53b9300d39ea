//! MAP proposal subset selection.
//!
//! Proposals are grouped into clusters, each represented by an exemplar. A
//! configuration is a set of exemplars `S` plus an assignment of every other
//! proposal to an exemplar or to background. Its unnormalized log posterior is
//!
//! ```text
//! sum_i ln w(i, z_i)  -  gamma * sum_{i != j in S} IOU(i, j)  -  phi * |S|
//! ```
//!
//! with `w(i, background) = lambda`, `w(i, j) = IOU(i, j) * s_i` and exemplars
//! assigned to themselves. Normalization constants are dropped, so values are
//! only comparable within one pool.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ActionProposal;

/// Which initial score multiplies the overlap in the assignment weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WeightScore {
    /// `IOU(i, j) * s_i`, the score of the assigned proposal.
    #[default]
    Member,
    /// `IOU(i, j) * s_j`, the score of the exemplar.
    Exemplar,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SubsetParams {
    /// Overlap penalty rate between exemplars.
    pub gamma_nms: f64,
    /// Per-exemplar cardinality penalty.
    pub phi: f64,
    /// Background assignment weight.
    pub lambda_bg: f64,
    /// Maximum number of exemplars.
    pub target_count: usize,
    pub weight_score: WeightScore,
}

impl Default for SubsetParams {
    fn default() -> Self {
        Self {
            gamma_nms: 5.0,
            phi: 0.0,
            lambda_bg: 0.05,
            target_count: 100,
            weight_score: WeightScore::Member,
        }
    }
}

impl SubsetParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_nms > 0.0 && self.gamma_nms.is_finite()) {
            return Err(Error::InvalidParameter("gamma_nms must be > 0".into()));
        }
        if !(self.phi >= 0.0 && self.phi.is_finite()) {
            return Err(Error::InvalidParameter("phi must be >= 0".into()));
        }
        if !(self.lambda_bg > 0.0 && self.lambda_bg.is_finite()) {
            return Err(Error::InvalidParameter("lambda_bg must be > 0".into()));
        }
        if self.target_count == 0 {
            return Err(Error::InvalidParameter("target_count must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Assignment {
    Background,
    Exemplar(u32),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubsetSelection {
    /// Exemplar ids in the order they were admitted.
    pub exemplars: Vec<u32>,
    pub assignment: BTreeMap<u32, Assignment>,
    pub log_posterior: f64,
}

impl SubsetSelection {
    /// Exemplars first, then the remaining proposals by decreasing initial
    /// score (lowest id on ties), truncated to `k`.
    pub fn ranked(&self, proposals: &[ActionProposal], k: usize) -> Vec<u32> {
        let mut out: Vec<u32> = self.exemplars.iter().copied().take(k).collect();
        if out.len() < k {
            let mut rest: Vec<&ActionProposal> = proposals
                .iter()
                .filter(|p| !self.exemplars.contains(&p.id))
                .collect();
            rest.sort_by(|a, b| {
                b.initial_score
                    .total_cmp(&a.initial_score)
                    .then(a.id.cmp(&b.id))
            });
            out.extend(rest.iter().take(k - out.len()).map(|p| p.id));
        }
        out
    }
}

/// Unnormalized assignment weight of proposal `i` to exemplar `j`, or to
/// background when `j` is `None`.
pub fn assignment_weight(
    i: &ActionProposal,
    j: Option<&ActionProposal>,
    params: &SubsetParams,
) -> f64 {
    match j {
        None => params.lambda_bg,
        Some(j) => {
            let iou = if i.video_id == j.video_id {
                i.tube.overlap(&j.tube)
            } else {
                0.0
            };
            let s = match params.weight_score {
                WeightScore::Member => i.initial_score,
                WeightScore::Exemplar => j.initial_score,
            };
            iou * s
        }
    }
}

/// Pairwise tube overlaps and scores of one pool, indexed by position.
struct Pool {
    n: usize,
    iou: Vec<f64>,
    score: Vec<f64>,
}

impl Pool {
    fn new(proposals: &[ActionProposal]) -> Self {
        let n = proposals.len();
        let mut iou = vec![0.0; n * n];
        for a in 0..n {
            iou[a * n + a] = 1.0;
            for b in a + 1..n {
                let v = if proposals[a].video_id == proposals[b].video_id {
                    proposals[a].tube.overlap(&proposals[b].tube)
                } else {
                    0.0
                };
                iou[a * n + b] = v;
                iou[b * n + a] = v;
            }
        }
        Self {
            n,
            iou,
            score: proposals.iter().map(|p| p.initial_score).collect(),
        }
    }

    fn iou(&self, a: usize, b: usize) -> f64 {
        self.iou[a * self.n + b]
    }

    fn log_weight(&self, i: usize, j: usize, params: &SubsetParams) -> f64 {
        let s = match params.weight_score {
            WeightScore::Member => self.score[i],
            WeightScore::Exemplar => self.score[j],
        };
        (self.iou(i, j) * s).ln()
    }
}

fn index_of(proposals: &[ActionProposal]) -> Result<BTreeMap<u32, usize>> {
    let mut index = BTreeMap::new();
    for (k, p) in proposals.iter().enumerate() {
        if index.insert(p.id, k).is_some() {
            return Err(Error::InvalidParameter(format!(
                "duplicate proposal id {} in pool",
                p.id
            )));
        }
    }
    Ok(index)
}

/// Log posterior of an explicit configuration. Returns `-inf` when some chosen
/// weight is zero.
pub fn log_posterior(
    exemplars: &[u32],
    assignment: &BTreeMap<u32, Assignment>,
    proposals: &[ActionProposal],
    params: &SubsetParams,
) -> Result<f64> {
    let index = index_of(proposals)?;
    let pos = |id: u32| {
        index
            .get(&id)
            .copied()
            .ok_or_else(|| Error::Infeasible(format!("unknown proposal id {id}")))
    };
    let mut in_s = vec![false; proposals.len()];
    for &e in exemplars {
        let k = pos(e)?;
        if in_s[k] {
            return Err(Error::Infeasible(format!("exemplar {e} listed twice")));
        }
        in_s[k] = true;
    }
    let mut total = 0.0;
    for (k, p) in proposals.iter().enumerate() {
        let z = assignment
            .get(&p.id)
            .ok_or_else(|| Error::Infeasible(format!("proposal {} is unassigned", p.id)))?;
        let weight = match *z {
            Assignment::Background if in_s[k] => {
                return Err(Error::Infeasible(format!(
                    "exemplar {} assigned to background",
                    p.id
                )))
            }
            Assignment::Background => assignment_weight(p, None, params),
            Assignment::Exemplar(j) => {
                let jk = pos(j)?;
                if !in_s[jk] {
                    return Err(Error::Infeasible(format!(
                        "proposal {} assigned to non-exemplar {j}",
                        p.id
                    )));
                }
                if in_s[k] && jk != k {
                    return Err(Error::Infeasible(format!(
                        "exemplar {} must represent itself",
                        p.id
                    )));
                }
                assignment_weight(p, Some(&proposals[jk]), params)
            }
        };
        total += weight.ln();
    }
    let mut overlap = 0.0;
    for &a in exemplars {
        for &b in exemplars {
            if a != b {
                overlap += assignment_weight_iou(&proposals[pos(a)?], &proposals[pos(b)?]);
            }
        }
    }
    Ok(total - params.gamma_nms * overlap - params.phi * exemplars.len() as f64)
}

fn assignment_weight_iou(a: &ActionProposal, b: &ActionProposal) -> f64 {
    if a.video_id == b.video_id {
        a.tube.overlap(&b.tube)
    } else {
        0.0
    }
}

/// Local search state: exemplar membership plus, for every proposal, the log
/// weight of its current best assignment.
struct State<'a> {
    pool: &'a Pool,
    params: &'a SubsetParams,
    in_s: Vec<bool>,
    order: Vec<usize>,
    current: Vec<f64>,
}

impl<'a> State<'a> {
    fn new(pool: &'a Pool, params: &'a SubsetParams) -> Self {
        Self {
            pool,
            params,
            in_s: vec![false; pool.n],
            order: Vec::new(),
            current: vec![params.lambda_bg.ln(); pool.n],
        }
    }

    fn value(&self) -> f64 {
        let mut overlap = 0.0;
        for &a in &self.order {
            for &b in &self.order {
                if a != b {
                    overlap += self.pool.iou(a, b);
                }
            }
        }
        self.current.iter().sum::<f64>()
            - self.params.gamma_nms * overlap
            - self.params.phi * self.order.len() as f64
    }

    fn add_gain(&self, e: usize) -> f64 {
        let own = self.pool.log_weight(e, e, self.params);
        let mut gain = own - self.current[e] - self.params.phi;
        for i in 0..self.pool.n {
            if i == e {
                continue;
            }
            if self.in_s[i] {
                gain -= 2.0 * self.params.gamma_nms * self.pool.iou(e, i);
            } else {
                let w = self.pool.log_weight(i, e, self.params);
                if w > self.current[i] {
                    gain += w - self.current[i];
                }
            }
        }
        gain
    }

    /// Best log weight for non-exemplar `i` among background and `S \ {skip}`.
    fn best_without(&self, i: usize, skip: usize) -> f64 {
        let mut best = self.params.lambda_bg.ln();
        for &j in &self.order {
            if j != skip {
                best = best.max(self.pool.log_weight(i, j, self.params));
            }
        }
        best
    }

    fn remove_gain(&self, e: usize) -> f64 {
        let mut gain = self.best_without(e, e) - self.current[e] + self.params.phi;
        for i in 0..self.pool.n {
            if i == e {
                continue;
            }
            if self.in_s[i] {
                gain += 2.0 * self.params.gamma_nms * self.pool.iou(e, i);
            } else {
                let w = self.pool.log_weight(i, e, self.params);
                if w >= self.current[i] && w > f64::NEG_INFINITY {
                    gain += self.best_without(i, e) - self.current[i];
                }
            }
        }
        gain
    }

    fn add(&mut self, e: usize) {
        self.in_s[e] = true;
        self.order.push(e);
        self.current[e] = self.pool.log_weight(e, e, self.params);
        for i in 0..self.pool.n {
            if !self.in_s[i] {
                let w = self.pool.log_weight(i, e, self.params);
                if w > self.current[i] {
                    self.current[i] = w;
                }
            }
        }
    }

    fn remove(&mut self, e: usize) {
        self.in_s[e] = false;
        self.order.retain(|&k| k != e);
        for i in 0..self.pool.n {
            if !self.in_s[i] {
                self.current[i] = self.best_without(i, usize::MAX);
            }
        }
    }

    fn best_add(&self) -> Option<(f64, usize)> {
        let mut best: Option<(f64, usize)> = None;
        for e in 0..self.pool.n {
            if self.in_s[e] {
                continue;
            }
            let g = self.add_gain(e);
            if best.is_none_or(|(bg, _)| g > bg) {
                best = Some((g, e));
            }
        }
        best
    }

    fn best_remove(&self) -> Option<(f64, usize)> {
        if self.order.len() < 2 {
            return None;
        }
        let mut best: Option<(f64, usize)> = None;
        for e in 0..self.pool.n {
            if !self.in_s[e] {
                continue;
            }
            let g = self.remove_gain(e);
            if best.is_none_or(|(bg, _)| g > bg) {
                best = Some((g, e));
            }
        }
        best
    }
}

/// Largest pool solved by enumeration.
pub const EXACT_POOL_LIMIT: usize = 12;

/// MAP exemplar selection.
///
/// Pools of at most `EXACT_POOL_LIMIT` proposals are solved exactly by
/// scoring every exemplar set. Larger pools use greedy ascent: starting from
/// an empty exemplar set, admit the proposal whose addition (with every other
/// proposal reassigned to its best target) raises the log posterior most,
/// then keep applying the best improving single addition or removal until
/// none is left. At least one exemplar is always admitted and never more than
/// `target_count`. Ties go to the lowest proposal id.
pub fn select_subset(proposals: &[ActionProposal], params: &SubsetParams) -> Result<SubsetSelection> {
    params.validate()?;
    if proposals.is_empty() {
        return Err(Error::EmptyInput("proposal pool"));
    }
    index_of(proposals)?;
    let order = sorted_positions(proposals);
    let sorted: Vec<ActionProposal> = order.iter().map(|&k| proposals[k].clone()).collect();
    let pool = Pool::new(&sorted);
    let state = if pool.n <= EXACT_POOL_LIMIT {
        exact_search(&pool, params)
    } else {
        greedy_search(&pool, params)
    };

    let log_posterior = state.value();
    let exemplars: Vec<u32> = state.order.iter().map(|&k| sorted[k].id).collect();
    let mut assignment = BTreeMap::new();
    for i in 0..pool.n {
        let z = if state.in_s[i] {
            Assignment::Exemplar(sorted[i].id)
        } else {
            let mut best = (params.lambda_bg.ln(), None);
            for &j in &state.order {
                let w = pool.log_weight(i, j, params);
                if w > best.0 || (w == best.0 && best.1.is_some_and(|b: usize| sorted[j].id < sorted[b].id)) {
                    best = (w, Some(j));
                }
            }
            match best.1 {
                Some(j) => Assignment::Exemplar(sorted[j].id),
                None => Assignment::Background,
            }
        };
        assignment.insert(sorted[i].id, z);
    }
    Ok(SubsetSelection {
        exemplars,
        assignment,
        log_posterior,
    })
}

fn greedy_search<'a>(pool: &'a Pool, params: &'a SubsetParams) -> State<'a> {
    let mut state = State::new(pool, params);

    let (_, first) = state.best_add().expect("non-empty pool");
    state.add(first);
    const MIN_GAIN: f64 = 1e-12;
    loop {
        let add = if state.order.len() < params.target_count {
            state.best_add().filter(|(g, _)| *g > MIN_GAIN)
        } else {
            None
        };
        let remove = state.best_remove().filter(|(g, _)| *g > MIN_GAIN);
        match (add, remove) {
            (Some((ga, a)), Some((gr, r))) => {
                if gr > ga {
                    state.remove(r)
                } else {
                    state.add(a)
                }
            }
            (Some((_, a)), None) => state.add(a),
            (None, Some((_, r))) => state.remove(r),
            (None, None) => break,
        }
    }

    state
}

/// Scores every exemplar set of at most `target_count` members; the first
/// set (in bitmask order) reaching the maximum wins.
fn exact_search<'a>(pool: &'a Pool, params: &'a SubsetParams) -> State<'a> {
    let mut best: Option<(f64, u32)> = None;
    for mask in 1u32..(1 << pool.n) {
        if mask.count_ones() as usize > params.target_count {
            continue;
        }
        let v = state_for(pool, params, mask).value();
        if best.is_none_or(|(b, _)| v > b) {
            best = Some((v, mask));
        }
    }
    state_for(pool, params, best.expect("non-empty pool").1)
}

fn state_for<'a>(pool: &'a Pool, params: &'a SubsetParams, mask: u32) -> State<'a> {
    let mut state = State::new(pool, params);
    for e in 0..pool.n {
        if mask >> e & 1 == 1 {
            state.add(e);
        }
    }
    state
}

fn sorted_positions(proposals: &[ActionProposal]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..proposals.len()).collect();
    order.sort_by_key(|&k| proposals[k].id);
    order
}

/// Finds, by bisection, the largest cardinality penalty `phi` that still
/// yields at least `min(target_count, |S(phi = 0)|)` exemplars.
pub fn tune_phi(
    proposals: &[ActionProposal],
    params: &SubsetParams,
    steps: usize,
) -> Result<(f64, SubsetSelection)> {
    let at = |phi: f64| select_subset(proposals, &SubsetParams { phi, ..*params });
    let base = at(0.0)?;
    let required = base.exemplars.len().min(params.target_count);
    let mut lo = (0.0, base);
    let mut hi = 1.0;
    for _ in 0..40 {
        let s = at(hi)?;
        if s.exemplars.len() < required {
            break;
        }
        lo = (hi, s);
        hi *= 2.0;
    }
    for _ in 0..steps {
        let mid = 0.5 * (lo.0 + hi);
        let s = at(mid)?;
        if s.exemplars.len() >= required {
            lo = (mid, s);
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BoundingBox, Tube};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn prop(id: u32, x: f64, w: f64, score: f64) -> ActionProposal {
        let tube = Tube::new(
            (0..4)
                .map(|f| BoundingBox::new(f, x, 0.0, w, 10.0).unwrap())
                .collect(),
        )
        .unwrap();
        let mut p = ActionProposal::new(id, "v", tube);
        p.initial_score = score;
        p
    }

    #[test]
    fn weight_examples() {
        let params = SubsetParams::default();
        let a = prop(0, 0.0, 10.0, 0.8);
        let b = prop(1, 0.0, 20.0, 0.3);
        assert_eq!(assignment_weight(&a, None, &params), params.lambda_bg);
        let far = prop(2, 100.0, 10.0, 0.9);
        assert_eq!(assignment_weight(&a, Some(&far), &params), 0.0);
        let w = assignment_weight(&a, Some(&b), &params);
        assert!((w - 0.5 * 0.8).abs() < 1e-15);
        let swapped = SubsetParams {
            weight_score: WeightScore::Exemplar,
            ..params
        };
        assert!((assignment_weight(&a, Some(&b), &swapped) - 0.5 * 0.3).abs() < 1e-15);
    }

    #[test]
    fn singleton_closed_form() {
        let params = SubsetParams::default();
        let pool = vec![prop(0, 0.0, 10.0, 0.7), prop(1, 50.0, 10.0, 0.4), prop(2, 80.0, 5.0, 0.2)];
        let mut z = BTreeMap::new();
        z.insert(0, Assignment::Exemplar(0));
        z.insert(1, Assignment::Background);
        z.insert(2, Assignment::Background);
        let lp = log_posterior(&[0], &z, &pool, &params).unwrap();
        let expect = 2.0 * params.lambda_bg.ln() + 0.7f64.ln() - params.phi;
        assert!((lp - expect).abs() < 1e-12);
    }

    #[test]
    fn disjoint_exemplars_pay_no_overlap() {
        let params = SubsetParams { phi: 0.3, ..SubsetParams::default() };
        let pool = vec![prop(0, 0.0, 10.0, 0.7), prop(1, 50.0, 10.0, 0.4)];
        let z: BTreeMap<_, _> = [(0, Assignment::Exemplar(0)), (1, Assignment::Exemplar(1))].into();
        let lp = log_posterior(&[0, 1], &z, &pool, &params).unwrap();
        assert!((lp - (0.7f64.ln() + 0.4f64.ln() - 0.6)).abs() < 1e-12);
    }

    #[test]
    fn infeasible_configurations_are_rejected() {
        let params = SubsetParams::default();
        let pool = vec![prop(0, 0.0, 10.0, 0.7), prop(1, 5.0, 10.0, 0.4)];
        let to_missing: BTreeMap<_, _> = [(0, Assignment::Exemplar(0)), (1, Assignment::Exemplar(1))].into();
        assert!(matches!(log_posterior(&[0], &to_missing, &pool, &params), Err(Error::Infeasible(_))));
        let exemplar_bg: BTreeMap<_, _> = [(0, Assignment::Background), (1, Assignment::Background)].into();
        assert!(log_posterior(&[0], &exemplar_bg, &pool, &params).is_err());
        let partial: BTreeMap<_, _> = [(0, Assignment::Exemplar(0))].into();
        assert!(log_posterior(&[0], &partial, &pool, &params).is_err());
    }

    #[test]
    fn zero_weight_gives_negative_infinity() {
        let params = SubsetParams::default();
        let pool = vec![prop(0, 0.0, 10.0, 0.7), prop(1, 50.0, 10.0, 0.4)];
        let z: BTreeMap<_, _> = [(0, Assignment::Exemplar(0)), (1, Assignment::Exemplar(0))].into();
        assert_eq!(log_posterior(&[0], &z, &pool, &params).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn duplicates_collapse_to_one_exemplar() {
        let params = SubsetParams::default();
        let pool = vec![prop(0, 0.0, 10.0, 0.9), prop(1, 0.0, 10.0, 0.9)];
        let sel = select_subset(&pool, &params).unwrap();
        assert_eq!(sel.exemplars, vec![0]);
        assert_eq!(sel.assignment[&1], Assignment::Exemplar(0));
    }

    #[test]
    fn single_and_empty_pools() {
        let params = SubsetParams::default();
        let sel = select_subset(&[prop(4, 0.0, 10.0, 0.01)], &params).unwrap();
        assert_eq!(sel.exemplars, vec![4]);
        assert!(matches!(select_subset(&[], &params), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn disjoint_confident_proposals_are_all_kept() {
        let params = SubsetParams::default();
        let pool: Vec<_> = (0..5).map(|k| prop(k, 30.0 * k as f64, 10.0, 0.5 + 0.05 * k as f64)).collect();
        let sel = select_subset(&pool, &params).unwrap();
        let mut ex = sel.exemplars.clone();
        ex.sort();
        assert_eq!(ex, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn target_count_caps_exemplars() {
        let params = SubsetParams { target_count: 2, ..SubsetParams::default() };
        let pool: Vec<_> = (0..6).map(|k| prop(k, 30.0 * k as f64, 10.0, 0.6)).collect();
        assert_eq!(select_subset(&pool, &params).unwrap().exemplars.len(), 2);
    }

    #[test]
    fn selection_is_consistent_and_beats_best_singleton() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..40 {
            let n = rng.random_range(2..25);
            let pool: Vec<_> = (0..n)
                .map(|k| prop(k, rng.random_range(0.0..60.0), rng.random_range(4.0..30.0), rng.random()))
                .collect();
            let params = SubsetParams::default();
            let sel = select_subset(&pool, &params).unwrap();
            let recomputed = log_posterior(&sel.exemplars, &sel.assignment, &pool, &params).unwrap();
            assert!((recomputed - sel.log_posterior).abs() < 1e-9);
            for e in &sel.exemplars {
                assert_eq!(sel.assignment[e], Assignment::Exemplar(*e));
            }
            let best = pool.iter().max_by(|a, b| a.initial_score.total_cmp(&b.initial_score)).unwrap();
            let mut z = BTreeMap::new();
            for p in &pool {
                let w = assignment_weight(p, Some(best), &params);
                z.insert(p.id, if p.id == best.id || w > params.lambda_bg { Assignment::Exemplar(best.id) } else { Assignment::Background });
            }
            let singleton = log_posterior(&[best.id], &z, &pool, &params).unwrap();
            assert!(sel.log_posterior >= singleton - 1e-9);
        }
    }

    #[test]
    fn ranked_fills_with_initial_scores() {
        let pool = vec![prop(0, 0.0, 10.0, 0.2), prop(1, 1.0, 10.0, 0.9), prop(2, 2.0, 10.0, 0.5)];
        let sel = SubsetSelection {
            exemplars: vec![0],
            assignment: BTreeMap::new(),
            log_posterior: 0.0,
        };
        assert_eq!(sel.ranked(&pool, 3), vec![0, 1, 2]);
        assert_eq!(sel.ranked(&pool, 1), vec![0]);
    }

    #[test]
    fn tuned_phi_keeps_required_count() {
        let pool: Vec<_> = (0..8).map(|k| prop(k, 25.0 * k as f64, 10.0, 0.3 + 0.08 * k as f64)).collect();
        let params = SubsetParams { target_count: 5, ..SubsetParams::default() };
        let (phi, sel) = tune_phi(&pool, &params, 20).unwrap();
        assert!(phi > 0.0);
        assert_eq!(sel.exemplars.len(), 5);
    }

    fn random_prop(rng: &mut ChaCha8Rng, id: u32) -> ActionProposal {
        let start = rng.random_range(0..3);
        let len = rng.random_range(1..5);
        let (x, y) = (rng.random_range(0.0..20.0), rng.random_range(0.0..20.0));
        let (w, h) = (rng.random_range(4.0..25.0), rng.random_range(4.0..25.0));
        let tube = Tube::new((start..start + len).map(|f| BoundingBox::new(f, x, y, w, h).unwrap()).collect()).unwrap();
        let mut p = ActionProposal::new(id, "v", tube);
        p.initial_score = rng.random_range(0.01..1.0);
        p
    }

    /// Enumerates every non-empty exemplar set and every assignment of the
    /// remaining proposals, scoring each configuration from scratch.
    pub(crate) fn exhaustive_map(pool: &[ActionProposal], params: &SubsetParams) -> f64 {
        let n = pool.len();
        let iou = |a: usize, b: usize| pool[a].tube.overlap(&pool[b].tube);
        let score = |i: usize, j: usize| match params.weight_score {
            WeightScore::Member => pool[i].initial_score,
            WeightScore::Exemplar => pool[j].initial_score,
        };
        let mut best = f64::NEG_INFINITY;
        for mask in 1u32..(1 << n) {
            let s: Vec<usize> = (0..n).filter(|k| mask >> k & 1 == 1).collect();
            let rest: Vec<usize> = (0..n).filter(|k| mask >> k & 1 == 0).collect();
            let mut base = -params.phi * s.len() as f64;
            for &a in &s {
                base += (iou(a, a) * score(a, a)).ln();
                for &b in &s {
                    if a != b {
                        base -= params.gamma_nms * iou(a, b);
                    }
                }
            }
            // Each non-exemplar takes one of |S| + 1 targets (last = background).
            let choices = s.len() + 1;
            let mut z = vec![0usize; rest.len()];
            loop {
                let mut v = base;
                for (k, &i) in rest.iter().enumerate() {
                    v += if z[k] == s.len() { params.lambda_bg.ln() } else { (iou(i, s[z[k]]) * score(i, s[z[k]])).ln() };
                }
                best = best.max(v);
                let mut k = 0;
                while k < z.len() {
                    z[k] += 1;
                    if z[k] < choices {
                        break;
                    }
                    z[k] = 0;
                    k += 1;
                }
                if k == z.len() {
                    break;
                }
            }
        }
        best
    }

    #[test]
    fn greedy_matches_exhaustive_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut misses = 0;
        for trial in 0..300 {
            let n = rng.random_range(1..=6);
            let pool: Vec<_> = (0..n).map(|k| random_prop(&mut rng, k)).collect();
            let params = SubsetParams {
                phi: if trial % 2 == 0 { 0.0 } else { rng.random_range(0.0..2.0) },
                gamma_nms: rng.random_range(0.5..8.0),
                weight_score: if trial % 3 == 0 { WeightScore::Exemplar } else { WeightScore::Member },
                ..SubsetParams::default()
            };
            let sel = select_subset(&pool, &params).unwrap();
            let best = exhaustive_map(&pool, &params);
            assert!(sel.log_posterior <= best + 1e-9);
            if (sel.log_posterior - best).abs() > 1e-9 {
                misses += 1;
            }
        }
        assert_eq!(misses, 0);
    }

    #[test]
    fn raising_gamma_never_adds_redundancy() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..60 {
            let n = rng.random_range(2..=9);
            let pool: Vec<_> = (0..n).map(|k| random_prop(&mut rng, k)).collect();
            let redundancy = |gamma: f64| {
                let sel = select_subset(&pool, &SubsetParams { gamma_nms: gamma, ..SubsetParams::default() }).unwrap();
                let mut sum = 0.0;
                for &a in &sel.exemplars {
                    for &b in &sel.exemplars {
                        if a != b {
                            sum += pool[a as usize].tube.overlap(&pool[b as usize].tube);
                        }
                    }
                }
                sum
            };
            let mut prev = f64::INFINITY;
            for gamma in [0.25, 0.5, 1.0, 2.0, 5.0, 10.0, 40.0] {
                let r = redundancy(gamma);
                assert!(r <= prev + 1e-12);
                prev = r;
            }
        }
    }
}
