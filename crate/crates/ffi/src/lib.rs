//! C interface to the actannot primitives: box overlap, shape DTW, linear
//! assignment and the generalized maximum clique solver.
//!
//! Every function returns an [`ActStatus`]. On failure the message is kept
//! per thread and can be read with [`act_last_error`]. Outputs are written
//! only on success.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use actannot::gmcp::{self, GmcpGraph, GmcpNode, SolverOptions};
use actannot::model::{frame_iou, BoundingBox};
use actannot::similarity::{dtw_distance, hungarian, ShapeSeries};
use actannot::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    Panic = 4,
}

/// Graph handle from [`act_graph_new`], released with [`act_graph_free`].
pub struct ActGraph {
    inner: GmcpGraph,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

struct Failure(ActStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::DimensionMismatch(_) | Error::NonSquare { .. } => ActStatus::DimensionMismatch,
            _ => ActStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> ActStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ActStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            ActStatus::Panic
        }
    }
}

fn null(name: &str) -> Failure {
    Failure(ActStatus::NullPointer, format!("{name} is null"))
}

/// # Safety
/// `p` must be null or valid for `n` reads.
unsafe fn slice<'a, T>(p: *const T, n: usize, name: &str) -> Result<&'a [T], Failure> {
    if n == 0 {
        Ok(&[])
    } else if p.is_null() {
        Err(null(name))
    } else {
        Ok(std::slice::from_raw_parts(p, n))
    }
}

/// # Safety
/// `p` must be null or valid for a write.
unsafe fn put<T>(p: *mut T, v: T, name: &str) -> Result<(), Failure> {
    if p.is_null() {
        return Err(null(name));
    }
    p.write(v);
    Ok(())
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn act_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn act_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// IoU of two boxes given as `{x, y, w, h}`.
///
/// # Safety
/// `a` and `b` must point to four doubles, `out` to one.
#[no_mangle]
pub unsafe extern "C" fn act_frame_iou(a: *const f64, b: *const f64, out: *mut f64) -> ActStatus {
    guard(|| {
        let a = slice(a, 4, "a")?;
        let b = slice(b, 4, "b")?;
        let ba = BoundingBox::new(0, a[0], a[1], a[2], a[3])?;
        let bb = BoundingBox::new(0, b[0], b[1], b[2], b[3])?;
        put(out, frame_iou(&ba, &bb), "out")
    })
}

/// Length-normalized DTW distance between two aspect-ratio series.
///
/// # Safety
/// `a` and `b` must be valid for `len_a` and `len_b` reads, `out` for one write.
#[no_mangle]
pub unsafe extern "C" fn act_dtw_distance(
    a: *const f64,
    len_a: usize,
    b: *const f64,
    len_b: usize,
    out: *mut f64,
) -> ActStatus {
    guard(|| {
        let sa = ShapeSeries::new(slice(a, len_a, "a")?.to_vec())?;
        let sb = ShapeSeries::new(slice(b, len_b, "b")?.to_vec())?;
        put(out, dtw_distance(&sa, &sb), "out")
    })
}

/// Minimum-cost assignment of a row-major `n x n` cost matrix.
/// `out_perm[row]` receives the assigned column.
///
/// # Safety
/// `cost` must be valid for `n * n` reads, `out_perm` for `n` writes and
/// `out_cost` for one.
#[no_mangle]
pub unsafe extern "C" fn act_hungarian(
    cost: *const f64,
    n: usize,
    out_perm: *mut usize,
    out_cost: *mut f64,
) -> ActStatus {
    guard(|| {
        let size = n
            .checked_mul(n)
            .ok_or_else(|| Failure(ActStatus::InvalidArgument, format!("matrix size {n} overflows")))?;
        let flat = slice(cost, size, "cost")?;
        if out_perm.is_null() && n > 0 {
            return Err(null("out_perm"));
        }
        let rows: Vec<Vec<f64>> = flat.chunks(n.max(1)).map(<[f64]>::to_vec).collect();
        let a = hungarian(&rows)?;
        put(out_cost, a.cost, "out_cost")?;
        if n > 0 {
            std::slice::from_raw_parts_mut(out_perm, n).copy_from_slice(&a.permutation);
        }
        Ok(())
    })
}

/// Builds a clique graph from dense inputs.
///
/// Nodes are numbered group by group: group `g` holds `group_sizes[g]`
/// consecutive nodes. `omega` and `eta` hold one value per node. `weights`
/// is a row-major `total x total` matrix read only between nodes of
/// different groups, with the earlier group as the row.
///
/// # Safety
/// `group_sizes` must be valid for `num_groups` reads, `omega` and `eta` for
/// `total` reads, `weights` for `total * total` reads and `out` for a write.
#[no_mangle]
pub unsafe extern "C" fn act_graph_new(
    num_groups: usize,
    group_sizes: *const usize,
    omega: *const f64,
    eta: *const f64,
    weights: *const f64,
    alpha: f64,
    out: *mut *mut ActGraph,
) -> ActStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let sizes = slice(group_sizes, num_groups, "group_sizes")?;
        let total = sizes
            .iter()
            .try_fold(0usize, |acc, &s| acc.checked_add(s))
            .filter(|t| t.checked_mul(*t).is_some())
            .ok_or_else(|| Failure(ActStatus::InvalidArgument, "group sizes overflow".into()))?;
        let omega = slice(omega, total, "omega")?;
        let eta = slice(eta, total, "eta")?;
        let weights = slice(weights, total * total, "weights")?;

        let mut offsets = Vec::with_capacity(num_groups);
        let mut groups = Vec::with_capacity(num_groups);
        let mut at = 0;
        for &s in sizes {
            offsets.push(at);
            groups.push((0..s).map(|k| GmcpNode::new(k as u32, omega[at + k], eta[at + k])).collect());
            at += s;
        }
        let graph = GmcpGraph::new(groups, alpha, |g, a, h, b| {
            weights[(offsets[g] + a) * total + offsets[h] + b]
        })?;
        out.write(Box::into_raw(Box::new(ActGraph { inner: graph })));
        Ok(())
    })
}

/// Releases a graph. Null is ignored.
///
/// # Safety
/// `graph` must be null or a handle from [`act_graph_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn act_graph_free(graph: *mut ActGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// Objective of choosing node `chosen[g]` (index within the group) in every
/// group.
///
/// # Safety
/// `graph` must be a live handle, `chosen` valid for one read per group and
/// `out` for one write.
#[no_mangle]
pub unsafe extern "C" fn act_graph_objective(graph: *const ActGraph, chosen: *const usize, out: *mut f64) -> ActStatus {
    guard(|| {
        let graph = &graph.as_ref().ok_or_else(|| null("graph"))?.inner;
        let chosen = slice(chosen, graph.num_groups(), "chosen")?;
        let map: BTreeMap<usize, usize> = chosen.iter().copied().enumerate().collect();
        put(out, graph.objective(&map)?, "out")
    })
}

/// Runs the local search. `out_chosen` receives one node index per group.
/// `out_iterations` may be null.
///
/// # Safety
/// `graph` must be a live handle, `out_chosen` valid for one write per group,
/// `out_objective` for one write and `out_iterations` null or valid.
#[no_mangle]
pub unsafe extern "C" fn act_graph_solve(
    graph: *const ActGraph,
    max_iterations: usize,
    restarts: usize,
    seed: u64,
    out_chosen: *mut usize,
    out_objective: *mut f64,
    out_iterations: *mut usize,
) -> ActStatus {
    guard(|| {
        let graph = &graph.as_ref().ok_or_else(|| null("graph"))?.inner;
        if out_chosen.is_null() {
            return Err(null("out_chosen"));
        }
        let options = SolverOptions {
            max_iterations,
            restarts,
            seed,
            ..SolverOptions::default()
        };
        let sel = gmcp::solve(graph, &options);
        put(out_objective, sel.objective, "out_objective")?;
        let dst = std::slice::from_raw_parts_mut(out_chosen, graph.num_groups());
        for (&g, &a) in &sel.chosen {
            dst[g] = a;
        }
        if !out_iterations.is_null() {
            out_iterations.write(sel.iterations);
        }
        Ok(())
    })
}
