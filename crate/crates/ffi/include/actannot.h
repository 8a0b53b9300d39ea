#ifndef ACTANNOT_H
#define ACTANNOT_H

/* Generated by cbindgen from crates/ffi/src. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ActStatus {
  ACT_STATUS_OK = 0,
  ACT_STATUS_NULL_POINTER = 1,
  ACT_STATUS_INVALID_ARGUMENT = 2,
  ACT_STATUS_DIMENSION_MISMATCH = 3,
  ACT_STATUS_PANIC = 4,
} ActStatus;

/**
 * Graph handle from [`act_graph_new`], released with [`act_graph_free`].
 */
typedef struct ActGraph ActGraph;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *act_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *act_version(void);

/**
 * IoU of two boxes given as `{x, y, w, h}`.
 *
 * # Safety
 * `a` and `b` must point to four doubles, `out` to one.
 */
enum ActStatus act_frame_iou(const double *a, const double *b, double *out);

/**
 * Length-normalized DTW distance between two aspect-ratio series.
 *
 * # Safety
 * `a` and `b` must be valid for `len_a` and `len_b` reads, `out` for one write.
 */
enum ActStatus act_dtw_distance(const double *a,
                                size_t len_a,
                                const double *b,
                                size_t len_b,
                                double *out);

/**
 * Minimum-cost assignment of a row-major `n x n` cost matrix.
 * `out_perm[row]` receives the assigned column.
 *
 * # Safety
 * `cost` must be valid for `n * n` reads, `out_perm` for `n` writes and
 * `out_cost` for one.
 */
enum ActStatus act_hungarian(const double *cost, size_t n, size_t *out_perm, double *out_cost);

/**
 * Builds a clique graph from dense inputs.
 *
 * Nodes are numbered group by group: group `g` holds `group_sizes[g]`
 * consecutive nodes. `omega` and `eta` hold one value per node. `weights`
 * is a row-major `total x total` matrix read only between nodes of
 * different groups, with the earlier group as the row.
 *
 * # Safety
 * `group_sizes` must be valid for `num_groups` reads, `omega` and `eta` for
 * `total` reads, `weights` for `total * total` reads and `out` for a write.
 */
enum ActStatus act_graph_new(size_t num_groups,
                             const size_t *group_sizes,
                             const double *omega,
                             const double *eta,
                             const double *weights,
                             double alpha,
                             struct ActGraph **out);

/**
 * Releases a graph. Null is ignored.
 *
 * # Safety
 * `graph` must be null or a handle from [`act_graph_new`] not yet freed.
 */
void act_graph_free(struct ActGraph *graph);

/**
 * Objective of choosing node `chosen[g]` (index within the group) in every
 * group.
 *
 * # Safety
 * `graph` must be a live handle, `chosen` valid for one read per group and
 * `out` for one write.
 */
enum ActStatus act_graph_objective(const struct ActGraph *graph, const size_t *chosen, double *out);

/**
 * Runs the local search. `out_chosen` receives one node index per group.
 * `out_iterations` may be null.
 *
 * # Safety
 * `graph` must be a live handle, `out_chosen` valid for one write per group,
 * `out_objective` for one write and `out_iterations` null or valid.
 */
enum ActStatus act_graph_solve(const struct ActGraph *graph,
                               size_t max_iterations,
                               size_t restarts,
                               uint64_t seed,
                               size_t *out_chosen,
                               double *out_objective,
                               size_t *out_iterations);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ACTANNOT_H */
