//! Generalized maximum clique selection: one node per group of a grouped
//! complete graph, maximizing node scores plus pairwise edge weights.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Tube;
use crate::similarity::{ClassSimilarities, SimilarityRecord};

pub const DEFAULT_ALPHA: f64 = 0.07;

/// `exp(-(m - n) / n)` for a proposal of `n` frames in a video of `m` frames.
pub fn length_penalty(m: usize, n: usize) -> Result<f64> {
    if n == 0 || n > m {
        return Err(Error::InvalidParameter(format!(
            "proposal length {n} must be in 1..={m}"
        )));
    }
    Ok((-((m - n) as f64) / n as f64).exp())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmcpNode {
    pub proposal_id: u32,
    pub omega: f64,
    pub eta: f64,
    /// Needed only for multi-instance overlap suppression.
    pub tube: Option<Tube>,
}

impl GmcpNode {
    pub fn new(proposal_id: u32, omega: f64, eta: f64) -> Self {
        Self {
            proposal_id,
            omega,
            eta,
            tube: None,
        }
    }

    pub fn with_tube(mut self, tube: Tube) -> Self {
        self.tube = Some(tube);
        self
    }
}

/// Which similarity components contribute to edge weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentMask {
    pub global: bool,
    pub fine: bool,
    pub shape: bool,
}

impl ComponentMask {
    pub const ALL: Self = Self {
        global: true,
        fine: true,
        shape: true,
    };
    pub const NONE: Self = Self {
        global: false,
        fine: false,
        shape: false,
    };

    pub fn apply(&self, r: &SimilarityRecord) -> f64 {
        let mut s = 0.0;
        if self.global {
            s += r.theta;
        }
        if self.fine {
            s += r.gamma_fine;
        }
        if self.shape {
            s += r.pi_shape;
        }
        s
    }
}

impl Default for ComponentMask {
    fn default() -> Self {
        Self::ALL
    }
}

#[derive(Debug, Clone)]
pub struct GmcpGraph {
    groups: Vec<Vec<GmcpNode>>,
    /// Row-major block per group pair `g < h`.
    edges: Vec<Vec<f64>>,
    alpha: f64,
}

fn pair_index(groups: usize, g: usize, h: usize) -> usize {
    g * groups - g * (g + 1) / 2 + (h - g - 1)
}

impl GmcpGraph {
    /// Builds the graph, asking `weight(g, a, h, b)` for every cross-group
    /// pair with `g < h`.
    pub fn new(
        groups: Vec<Vec<GmcpNode>>,
        alpha: f64,
        mut weight: impl FnMut(usize, usize, usize, usize) -> f64,
    ) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!("alpha must be >= 0, got {alpha}")));
        }
        if groups.is_empty() {
            return Err(Error::EmptyInput("groups"));
        }
        for (g, nodes) in groups.iter().enumerate() {
            if nodes.is_empty() {
                return Err(Error::InvalidParameter(format!("group {g} has no nodes")));
            }
            for n in nodes {
                if !(n.omega >= 0.0 && n.omega.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "node {} in group {g} has invalid score {}",
                        n.proposal_id, n.omega
                    )));
                }
                if !(n.eta > 0.0 && n.eta <= 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "node {} in group {g} has invalid length penalty {}",
                        n.proposal_id, n.eta
                    )));
                }
            }
        }
        let ng = groups.len();
        let mut edges = Vec::with_capacity(ng * (ng - 1) / 2);
        for g in 0..ng {
            for h in g + 1..ng {
                let mut block = Vec::with_capacity(groups[g].len() * groups[h].len());
                for a in 0..groups[g].len() {
                    for b in 0..groups[h].len() {
                        let w = weight(g, a, h, b);
                        if !(w >= 0.0 && w.is_finite()) {
                            return Err(Error::InvalidParameter(format!(
                                "edge ({g},{a})-({h},{b}) has invalid weight {w}"
                            )));
                        }
                        block.push(w);
                    }
                }
                edges.push(block);
            }
        }
        Ok(Self { groups, edges, alpha })
    }

    /// Edge weights `eta_i * eta_j * (masked similarity sum)`.
    pub fn from_similarities(
        groups: Vec<Vec<GmcpNode>>,
        alpha: f64,
        sims: &ClassSimilarities,
        mask: ComponentMask,
    ) -> Result<Self> {
        if sims.group_sizes().len() != groups.len()
            || sims.group_sizes().iter().zip(&groups).any(|(s, g)| *s != g.len())
        {
            return Err(Error::DimensionMismatch(
                "similarities do not match graph groups".into(),
            ));
        }
        let etas: Vec<Vec<f64>> = groups.iter().map(|g| g.iter().map(|n| n.eta).collect()).collect();
        Self::new(groups, alpha, |g, a, h, b| {
            etas[g][a] * etas[h][b] * mask.apply(&sims.get(g, a, h, b))
        })
    }

    pub fn groups(&self) -> &[Vec<GmcpNode>] {
        &self.groups
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Same graph with a different `alpha` and every score multiplied by `scale`.
    pub fn rescaled(&self, scale: f64, alpha: f64) -> Result<Self> {
        let mut g = self.clone();
        if !(alpha >= 0.0 && alpha.is_finite() && scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidParameter("scale must be > 0 and alpha >= 0".into()));
        }
        g.alpha = alpha;
        for n in g.groups.iter_mut().flatten() {
            n.omega *= scale;
        }
        Ok(g)
    }

    pub fn edge(&self, g: usize, a: usize, h: usize, b: usize) -> f64 {
        assert_ne!(g, h, "no edges inside a group");
        let ng = self.groups.len();
        if g < h {
            self.edges[pair_index(ng, g, h)][a * self.groups[h].len() + b]
        } else {
            self.edges[pair_index(ng, h, g)][b * self.groups[g].len() + a]
        }
    }

    /// The objective over the groups present in `chosen` (group -> node).
    pub fn objective(&self, chosen: &BTreeMap<usize, usize>) -> Result<f64> {
        for (&g, &a) in chosen {
            if g >= self.groups.len() || a >= self.groups[g].len() {
                return Err(Error::Infeasible(format!("group {g} has no node {a}")));
            }
        }
        Ok(self.objective_unchecked(chosen.iter().map(|(&g, &a)| (g, a))))
    }

    fn objective_unchecked(&self, chosen: impl Iterator<Item = (usize, usize)> + Clone) -> f64 {
        let n = chosen.clone().count();
        if n == 0 {
            return 0.0;
        }
        let mut omega = 0.0;
        let mut edges = 0.0;
        for (g, a) in chosen.clone() {
            omega += self.groups[g][a].omega;
            for (h, b) in chosen.clone() {
                if h > g {
                    edges += self.edge(g, a, h, b);
                }
            }
        }
        (n - 1) as f64 * self.alpha * omega + 2.0 * edges
    }
}

/// Where the search starts in each group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Initialization {
    /// Highest Ω, ties to the lowest proposal id.
    #[default]
    ScoreArgmax,
    /// Lowest node index, for groups the caller has already ranked.
    GroupOrder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub max_iterations: usize,
    pub init: Initialization,
    /// Extra local searches from seeded random starts; the best result wins.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iterations: 1000,
            init: Initialization::ScoreArgmax,
            restarts: 0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    /// Group index -> node index within the group.
    pub chosen: BTreeMap<usize, usize>,
    pub objective: f64,
    pub iterations: usize,
    pub instance_round: usize,
    /// Objective after initialization and after each accepted move.
    pub trajectory: Vec<f64>,
    /// Fewer than two groups take part, so the objective has no pairs and the
    /// score-argmax initialization is returned unchanged.
    pub degenerate: bool,
    pub converged: bool,
    /// Groups held fixed as context rather than searched.
    pub pinned: BTreeSet<usize>,
}

impl Selection {
    pub fn proposal_ids(&self, graph: &GmcpGraph) -> BTreeMap<usize, u32> {
        self.chosen
            .iter()
            .map(|(&g, &a)| (g, graph.groups[g][a].proposal_id))
            .collect()
    }
}

/// Candidate nodes per group; `None` leaves the group out.
type View = Vec<Option<Vec<usize>>>;

fn better_node(graph: &GmcpGraph, g: usize, a: usize, b: usize) -> bool {
    let (x, y) = (&graph.groups[g][a], &graph.groups[g][b]);
    x.omega > y.omega || (x.omega == y.omega && x.proposal_id < y.proposal_id)
}

fn score_argmax(graph: &GmcpGraph, g: usize, nodes: &[usize]) -> usize {
    let mut best = nodes[0];
    for &a in &nodes[1..] {
        if better_node(graph, g, a, best) {
            best = a;
        }
    }
    best
}

struct Search<'a> {
    graph: &'a GmcpGraph,
    view: &'a View,
    active: Vec<usize>,
    /// `contrib[g][a]`: total edge weight from node `a` of group `g` to the
    /// current picks of the other active groups.
    contrib: Vec<Vec<f64>>,
    chosen: Vec<usize>,
}

impl<'a> Search<'a> {
    fn new(graph: &'a GmcpGraph, view: &'a View, start: Vec<usize>) -> Self {
        let active: Vec<usize> = (0..view.len()).filter(|&g| view[g].is_some()).collect();
        let mut s = Self {
            graph,
            view,
            active,
            contrib: graph.groups.iter().map(|g| vec![0.0; g.len()]).collect(),
            chosen: start,
        };
        for &g in &s.active {
            for a in 0..graph.groups[g].len() {
                s.contrib[g][a] = s
                    .active
                    .iter()
                    .filter(|&&h| h != g)
                    .map(|&h| graph.edge(g, a, h, s.chosen[h]))
                    .sum();
            }
        }
        s
    }

    fn objective(&self) -> f64 {
        self.graph
            .objective_unchecked(self.active.iter().map(|&g| (g, self.chosen[g])))
    }

    fn run(&mut self, max_iterations: usize, pinned: &BTreeSet<usize>) -> (Vec<f64>, usize, bool) {
        let factor = (self.active.len() - 1) as f64 * self.graph.alpha;
        let mut trajectory = vec![self.objective()];
        let mut iterations = 0;
        let mut converged = false;
        while iterations < max_iterations {
            // (gain, group, proposal id, node)
            let mut best: Option<(f64, usize, u32, usize)> = None;
            for &g in &self.active {
                if pinned.contains(&g) {
                    continue;
                }
                let cur = self.chosen[g];
                let nodes = &self.graph.groups[g];
                for &a in self.view[g].as_ref().expect("active group") {
                    if a == cur {
                        continue;
                    }
                    let gain = factor * (nodes[a].omega - nodes[cur].omega)
                        + 2.0 * (self.contrib[g][a] - self.contrib[g][cur]);
                    if gain <= 0.0 {
                        continue;
                    }
                    let id = nodes[a].proposal_id;
                    let replace = match best {
                        None => true,
                        Some((bg, bgr, bid, _)) => gain > bg || (gain == bg && (g, id) < (bgr, bid)),
                    };
                    if replace {
                        best = Some((gain, g, id, a));
                    }
                }
            }
            let Some((_, g, _, a)) = best else {
                converged = true;
                break;
            };
            let old = self.chosen[g];
            self.chosen[g] = a;
            let value = self.objective();
            if value <= *trajectory.last().expect("non-empty") {
                // Rounding made the move non-improving.
                self.chosen[g] = old;
                converged = true;
                break;
            }
            for &h in &self.active {
                if h == g {
                    continue;
                }
                for b in 0..self.graph.groups[h].len() {
                    self.contrib[h][b] += self.graph.edge(h, b, g, a) - self.graph.edge(h, b, g, old);
                }
            }
            trajectory.push(value);
            iterations += 1;
        }
        (trajectory, iterations, converged)
    }
}

fn solve_view(
    graph: &GmcpGraph,
    view: &View,
    pinned_picks: &BTreeMap<usize, usize>,
    options: &SolverOptions,
) -> Selection {
    let pinned: BTreeSet<usize> = pinned_picks.keys().copied().collect();
    let active: Vec<usize> = (0..view.len()).filter(|&g| view[g].is_some()).collect();
    let free = active.iter().filter(|g| !pinned.contains(g)).count();
    // A lone group has no pairs to rank by, so it always gets the score argmax.
    let init = if active.len() < 2 {
        Initialization::ScoreArgmax
    } else {
        options.init
    };
    let mut start = vec![0usize; graph.groups.len()];
    for (g, nodes) in view.iter().enumerate() {
        if let Some(nodes) = nodes {
            start[g] = match (pinned_picks.get(&g), init) {
                (Some(&a), _) => a,
                (None, Initialization::ScoreArgmax) => score_argmax(graph, g, nodes),
                (None, Initialization::GroupOrder) => *nodes.iter().min().expect("non-empty group"),
            };
        }
    }
    let finish = |chosen: &[usize], trajectory: Vec<f64>, iterations, converged, degenerate| Selection {
        chosen: active.iter().map(|&g| (g, chosen[g])).collect(),
        objective: *trajectory.last().expect("non-empty"),
        iterations,
        instance_round: 0,
        trajectory,
        degenerate,
        converged,
        pinned: pinned.clone(),
    };
    if active.len() < 2 || free == 0 {
        let obj = graph.objective_unchecked(active.iter().map(|&g| (g, start[g])));
        return finish(&start, vec![obj], 0, true, active.len() < 2);
    }

    let mut search = Search::new(graph, view, start);
    let (trajectory, iterations, converged) = search.run(options.max_iterations, &pinned);
    let mut best = finish(&search.chosen, trajectory, iterations, converged, false);

    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    for _ in 0..options.restarts {
        let mut start = vec![0usize; graph.groups.len()];
        for &g in &active {
            let nodes = view[g].as_ref().expect("active group");
            start[g] = match pinned_picks.get(&g) {
                Some(&a) => a,
                None => nodes[rng.random_range(0..nodes.len())],
            };
        }
        let mut search = Search::new(graph, view, start);
        let (trajectory, iterations, converged) = search.run(options.max_iterations, &pinned);
        if *trajectory.last().expect("non-empty") > best.objective {
            best = finish(&search.chosen, trajectory, iterations, converged, false);
        }
    }
    best
}

/// Steepest-ascent single-swap local search from the per-group score argmax
/// (or the first node of each group, see [`Initialization`]).
///
/// Every iteration evaluates all single-node swaps and applies the one with
/// the largest strict gain, breaking ties by lowest group index then lowest
/// proposal id. With `restarts > 0`, further searches start from seeded random
/// selections and the best local optimum is returned.
pub fn solve(graph: &GmcpGraph, options: &SolverOptions) -> Selection {
    let view: View = graph.groups.iter().map(|g| Some((0..g.len()).collect())).collect();
    solve_view(graph, &view, &BTreeMap::new(), options)
}

/// What happens to a group whose instance budget is met in later rounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExhaustedGroups {
    /// Keep the group's latest pick fixed so it still contributes edges.
    #[default]
    Pin,
    /// Leave the group out of later rounds.
    Drop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiInstanceOptions {
    pub overlap_threshold: f64,
    pub exhausted: ExhaustedGroups,
    pub solver: SolverOptions,
}

impl Default for MultiInstanceOptions {
    fn default() -> Self {
        Self {
            overlap_threshold: 0.5,
            exhausted: ExhaustedGroups::Pin,
            solver: SolverOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shortfall {
    pub group: usize,
    pub requested: usize,
    pub found: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiInstanceResult {
    pub rounds: Vec<Selection>,
    /// Node indices picked per group, in round order.
    pub picks: Vec<Vec<usize>>,
    pub shortfalls: Vec<Shortfall>,
}

fn overlaps(graph: &GmcpGraph, g: usize, a: usize, b: usize, threshold: f64) -> bool {
    if a == b {
        return true;
    }
    match (&graph.groups[g][a].tube, &graph.groups[g][b].tube) {
        (Some(x), Some(y)) => x.overlap(y) > threshold,
        _ => false,
    }
}

/// Repeated selection for videos holding several instances. Each round
/// removes, per group, nodes overlapping an earlier pick of that group by
/// more than the threshold, and stops selecting for groups whose budget is
/// met. Groups whose residual pool empties are reported as shortfalls.
pub fn solve_multi_instance(
    graph: &GmcpGraph,
    instance_counts: &[usize],
    options: &MultiInstanceOptions,
) -> Result<MultiInstanceResult> {
    let ng = graph.groups.len();
    if instance_counts.len() != ng {
        return Err(Error::DimensionMismatch(format!(
            "{} instance counts for {ng} groups",
            instance_counts.len()
        )));
    }
    if instance_counts.contains(&0) {
        return Err(Error::InvalidParameter("instance counts must be >= 1".into()));
    }
    let mut picks: Vec<Vec<usize>> = vec![Vec::new(); ng];
    let mut starved = vec![false; ng];
    let mut rounds = Vec::new();
    loop {
        let mut view: View = vec![None; ng];
        let mut pinned = BTreeMap::new();
        let mut wanted = 0;
        for g in 0..ng {
            let needs = !starved[g] && picks[g].len() < instance_counts[g];
            if needs {
                let residual: Vec<usize> = (0..graph.groups[g].len())
                    .filter(|&a| {
                        !picks[g]
                            .iter()
                            .any(|&b| overlaps(graph, g, a, b, options.overlap_threshold))
                    })
                    .collect();
                if residual.is_empty() {
                    starved[g] = true;
                } else {
                    view[g] = Some(residual);
                    wanted += 1;
                    continue;
                }
            }
            if options.exhausted == ExhaustedGroups::Pin {
                if let Some(&last) = picks[g].last() {
                    view[g] = Some(vec![last]);
                    pinned.insert(g, last);
                }
            }
        }
        if wanted == 0 {
            break;
        }
        let mut sel = solve_view(graph, &view, &pinned, &options.solver);
        sel.instance_round = rounds.len();
        for (&g, &a) in &sel.chosen {
            if !pinned.contains_key(&g) {
                picks[g].push(a);
            }
        }
        rounds.push(sel);
    }
    let shortfalls = (0..ng)
        .filter(|&g| picks[g].len() < instance_counts[g])
        .map(|g| {
            log::warn!(
                "group {g}: {} of {} instances found",
                picks[g].len(),
                instance_counts[g]
            );
            Shortfall {
                group: g,
                requested: instance_counts[g],
                found: picks[g].len(),
            }
        })
        .collect();
    Ok(MultiInstanceResult {
        rounds,
        picks,
        shortfalls,
    })
}
