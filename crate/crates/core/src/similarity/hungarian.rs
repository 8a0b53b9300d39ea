//! Minimum-cost perfect assignment on a square cost matrix.
//!
//! Shortest augmenting paths with row and column potentials, `O(n^3)`. When
//! several permutations are optimal, the lexicographically smallest one is
//! returned: every optimal permutation uses only edges that are tight under
//! the final potentials, so the tie-break is a lexicographic perfect matching
//! search restricted to tight edges.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// `permutation[row] = column`.
    pub permutation: Vec<usize>,
    pub cost: f64,
}

pub fn hungarian(cost: &[Vec<f64>]) -> Result<Assignment> {
    let n = cost.len();
    let mut flat = Vec::with_capacity(n * n);
    for (i, row) in cost.iter().enumerate() {
        if row.len() != n {
            return Err(Error::NonSquare {
                rows: n,
                cols: row.len(),
            });
        }
        for (j, v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite(i, j));
            }
        }
        flat.extend_from_slice(row);
    }
    Ok(solve_square(n, &flat))
}

/// Reusable buffers for the shortest augmenting path solver.
#[derive(Debug, Default)]
pub(crate) struct Workspace {
    u: Vec<f64>,
    v: Vec<f64>,
    p: Vec<usize>,
    way: Vec<usize>,
    minv: Vec<f64>,
    used: Vec<bool>,
}

impl Workspace {
    /// Writes an optimal permutation of the row-major `n x n` matrix into
    /// `perm` and leaves the final potentials in `u` and `v`.
    pub(crate) fn assign(&mut self, n: usize, a: &[f64], perm: &mut Vec<usize>) {
        let at = |i: usize, j: usize| a[i * n + j];
        // 1-based potentials; index 0 is the virtual source.
        for buf in [&mut self.u, &mut self.v, &mut self.minv] {
            buf.clear();
            buf.resize(n + 1, 0.0);
        }
        for buf in [&mut self.p, &mut self.way] {
            buf.clear();
            buf.resize(n + 1, 0);
        }
        self.used.clear();
        self.used.resize(n + 1, false);
        let Workspace {
            u,
            v,
            p,
            way,
            minv,
            used,
        } = self;
        for i in 1..=n {
            p[0] = i;
            let mut j0 = 0usize;
            minv.iter_mut().for_each(|m| *m = f64::INFINITY);
            used.iter_mut().for_each(|b| *b = false);
            loop {
                used[j0] = true;
                let i0 = p[j0];
                let mut delta = f64::INFINITY;
                let mut j1 = 0usize;
                for j in 1..=n {
                    if !used[j] {
                        let cur = at(i0 - 1, j - 1) - u[i0] - v[j];
                        if cur < minv[j] {
                            minv[j] = cur;
                            way[j] = j0;
                        }
                        if minv[j] < delta {
                            delta = minv[j];
                            j1 = j;
                        }
                    }
                }
                for j in 0..=n {
                    if used[j] {
                        u[p[j]] += delta;
                        v[j] -= delta;
                    } else {
                        minv[j] -= delta;
                    }
                }
                j0 = j1;
                if p[j0] == 0 {
                    break;
                }
            }
            loop {
                let j1 = way[j0];
                p[j0] = p[j1];
                j0 = j1;
                if j0 == 0 {
                    break;
                }
            }
        }
        perm.clear();
        perm.resize(n, 0);
        for j in 1..=n {
            perm[p[j] - 1] = j - 1;
        }
    }
}

/// Largest size handled by [`subset_dp`].
pub(crate) const SUBSET_DP_LIMIT: usize = 8;

const SUBSET_STATES: usize = 1 << SUBSET_DP_LIMIT;

const POPCOUNT: [u8; SUBSET_STATES] = {
    let mut t = [0u8; SUBSET_STATES];
    let mut i = 1;
    while i < SUBSET_STATES {
        t[i] = t[i >> 1] + (i & 1) as u8;
        i += 1;
    }
    t
};

/// Optimal permutation by dynamic programming over the sets of used
/// columns, `O(n 2^n)`. Faster than augmenting paths for tiny matrices.
pub(crate) fn subset_dp(n: usize, a: &[f64], perm: &mut Vec<usize>) {
    assert!(n <= SUBSET_DP_LIMIT && a.len() == n * n);
    let full = 1usize << n;
    // dp[mask]: cheapest way to give rows 0..|mask| the columns in mask.
    let mut dp = [f64::INFINITY; SUBSET_STATES];
    let mut choice = [0u8; SUBSET_STATES];
    dp[0] = 0.0;
    for mask in 0..full - 1 {
        let base = dp[mask];
        let row = POPCOUNT[mask] as usize;
        let costs = &a[row * n..row * n + n];
        let mut free = !mask & (full - 1);
        while free != 0 {
            let j = free.trailing_zeros() as usize;
            free &= free - 1;
            let next = (mask | (1 << j)) & (SUBSET_STATES - 1);
            let c = base + costs[j];
            if c < dp[next] {
                dp[next] = c;
                choice[next] = j as u8;
            }
        }
    }
    perm.clear();
    perm.resize(n, 0);
    let mut mask = full - 1;
    for row in (0..n).rev() {
        let j = choice[mask] as usize;
        perm[row] = j;
        mask &= !(1 << j);
    }
}

/// Row-major `n x n` matrix with finite entries.
pub(crate) fn solve_square(n: usize, a: &[f64]) -> Assignment {
    let mut ws = Workspace::default();
    let mut permutation = Vec::new();
    ws.assign(n, a, &mut permutation);
    if n == 0 {
        return Assignment {
            permutation,
            cost: 0.0,
        };
    }
    let scale = a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let eps = 1e-9 * (1.0 + scale);
    let tight: Vec<bool> = (0..n * n)
        .map(|k| a[k] - ws.u[k / n + 1] - ws.v[k % n + 1] <= eps)
        .collect();
    if tight.iter().filter(|t| **t).count() > n {
        permutation = lexicographic_matching(n, &tight, &permutation);
    }
    let cost = permutation.iter().enumerate().map(|(i, &j)| a[i * n + j]).sum();
    Assignment { permutation, cost }
}

/// Lexicographically smallest perfect matching using only `tight` edges.
/// `fallback` is a known perfect matching inside the tight graph.
fn lexicographic_matching(n: usize, tight: &[bool], fallback: &[usize]) -> Vec<usize> {
    let mut chosen = vec![usize::MAX; n];
    let mut col_used = vec![false; n];
    for i in 0..n {
        let mut found = false;
        for j in 0..n {
            if col_used[j] || !tight[i * n + j] {
                continue;
            }
            col_used[j] = true;
            if completes(n, tight, i + 1, &col_used) {
                chosen[i] = j;
                found = true;
                break;
            }
            col_used[j] = false;
        }
        if !found {
            return fallback.to_vec();
        }
    }
    chosen
}

/// Whether rows `first..n` can be perfectly matched to the unused columns.
fn completes(n: usize, tight: &[bool], first: usize, col_used: &[bool]) -> bool {
    let mut owner = vec![usize::MAX; n];
    for i in first..n {
        let mut seen = vec![false; n];
        if !augment(n, tight, i, col_used, &mut seen, &mut owner) {
            return false;
        }
    }
    true
}

fn augment(
    n: usize,
    tight: &[bool],
    row: usize,
    col_used: &[bool],
    seen: &mut [bool],
    owner: &mut [usize],
) -> bool {
    for j in 0..n {
        if col_used[j] || seen[j] || !tight[row * n + j] {
            continue;
        }
        seen[j] = true;
        if owner[j] == usize::MAX || augment(n, tight, owner[j], col_used, seen, owner) {
            owner[j] = row;
            return true;
        }
    }
    false
}
