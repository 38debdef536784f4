"""Iterative token morphing and the baseline groupers.

``morph`` runs a schedule of bipartite matching rounds over progressively
merged target features and returns the hard group assignment; ``apply``
collapses a token matrix to per-group means and ``expand`` broadcasts the
means back over all token positions. ``kmeans_grouping`` (spherical
k-means) and ``downsample_grouping`` (context-free block pooling) produce
the same assignment type for comparison runs.

Group ids are canonical: ordered by each group's first (lowest) member
token, so an all-singleton grouping is always the identity assignment.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import (
    DimensionMismatchError,
    IndivisibleGridError,
    InvalidRangeError,
    ScheduleMismatchError,
    TooFewTokensError,
)
from .matching import (
    NORM_EPS,
    SplitRule,
    _error_band,
    nearest_by_cosine,
    split_indices,
    staged_rows,
)
from .rng import Rng
from .types import MorphingMatrix, MorphSchedule, validate_token_matrix


class IntermediateMean(enum.Enum):
    """How merged tokens combine into the intermediate representative.

    SIZE_WEIGHTED keeps a running flat mean of every constituent token, so
    matching always scores true group centroids and the final
    representatives coincide with ``apply``. ROUND_UNIFORM averages the
    representatives merged within one round with equal weight regardless
    of how many tokens each already carries; chained merges then weight
    late arrivals more. The two differ only when merges chain. On the CLI
    ROUND_UNIFORM is spelled ``paperliteral``.
    """

    SIZE_WEIGHTED = "sizeweighted"
    ROUND_UNIFORM = "paperliteral"


@dataclass(frozen=True)
class MorphConfig:
    intermediate_mean: IntermediateMean = IntermediateMean.SIZE_WEIGHTED


_DEFAULT_CFG = MorphConfig()

# Above this many elements the sparse-matrix product wins over np.add.at.
_SEGMENT_DENSE_LIMIT = 32768


def _segment_sums(labels, rows64, n_segments: int) -> np.ndarray:
    """Per-label row sums in float64; accumulation runs in ascending row
    order either way, so both branches produce identical bits."""
    if rows64.size >= _SEGMENT_DENSE_LIMIT:
        import scipy.sparse as sp

        order = np.argsort(labels, kind="stable")
        indptr = np.searchsorted(labels[order], np.arange(n_segments + 1))
        pick = sp.csr_matrix(
            (np.ones(rows64.shape[0]), order, indptr),
            shape=(n_segments, rows64.shape[0]),
        )
        return np.asarray(pick @ rows64)
    out = np.zeros((n_segments, rows64.shape[1]))
    np.add.at(out, labels, rows64)
    return out


def _canonical_labels(raw_labels: np.ndarray) -> np.ndarray:
    """Relabel group labels in [0, N) to dense ids in first-occurrence order."""
    return _kernels.first_occurrence_labels(np.ascontiguousarray(raw_labels, dtype=np.int64))


def morph(
    targets,
    schedule: MorphSchedule,
    rng: Rng,
    split: SplitRule = SplitRule.RANDOM,
    cfg: MorphConfig = _DEFAULT_CFG,
) -> MorphingMatrix:
    """Reduce N tokens to ``schedule.n_final`` groups by iterated matching.

    Iteration p merges exactly ``schedule.counts[p]`` tokens into their
    most-similar counterparts, scoring similarity on the current partially
    morphed representatives. One matching round can remove at most half of
    the current tokens; when a count exceeds that cap, additional rounds
    run inside the same iteration until the count is met, so the schedule
    total is always honored. A zero count is a pure no-op and draws
    nothing from the generator.

    Deterministic for fixed (targets, schedule, seed, split, cfg), and the
    assignment is invariant to positive rescaling of the targets.
    """
    m, _, _, _, _ = _morph_core(targets, schedule, rng, split, cfg)
    return m


def _morph_with_reps(targets, schedule, rng, split, cfg):
    """morph() plus the surviving intermediate representatives, one float64
    row per group in group-id order. Test hook for the size-weighted mode,
    whose representatives must track the true group centroids."""
    m, base, overlay, touched, alive = _morph_core(targets, schedule, rng, split, cfg)
    order = alive[np.argsort(m.assignment[alive], kind="stable")]
    reps = base[order].astype(np.float64)
    hit = touched[order]
    reps[hit] = overlay[order[hit]]
    return m, reps


def _morph_core(targets, schedule, rng, split, cfg):
    feats = np.asarray(targets)
    if feats.ndim == 2 and feats.dtype in (np.float32, np.float64) and min(feats.shape) >= 1:
        # Hot path: stage first, vet finiteness through the row norms (NaN
        # and infinity both propagate into them), and only fall back to
        # the elementwise scan to locate an offending entry.
        base = np.ascontiguousarray(feats)
        rows32, norms = _kernels.stage_pair(base)
        if not np.isfinite(norms).all():
            validate_token_matrix(base)
    else:
        base, rows32, norms = staged_rows(validate_token_matrix(targets))
    n_tokens = base.shape[0]
    if schedule.n_tokens != n_tokens:
        raise ScheduleMismatchError(
            f"schedule built for {schedule.n_tokens} tokens, targets have {n_tokens}"
        )

    # Merged rows get float64 storage in the overlay; the base is never
    # written. np.empty defers the page cost to rows actually touched.
    overlay = np.empty((n_tokens, base.shape[1]))
    touched = np.zeros(n_tokens, dtype=np.bool_)
    weights = np.ones(n_tokens, dtype=np.int64)
    parent = np.arange(n_tokens, dtype=np.int64)
    alive = np.arange(n_tokens, dtype=np.int64)
    band = _error_band(base.shape[1])
    update = (
        _kernels.sequential_weighted_merge
        if cfg.intermediate_mean is IntermediateMean.SIZE_WEIGHTED
        else _kernels.round_uniform_merge
    )
    # Round-local gather/product buffers, reused across rounds.
    half = n_tokens // 2
    buf_a = np.empty((half, rows32.shape[1]), dtype=np.float32)
    buf_b = np.empty((n_tokens - half, rows32.shape[1]), dtype=np.float32)
    buf_raw = np.empty((half, n_tokens - half), dtype=np.float32)

    rng_state = rng.pack_state()
    try:
        for count in schedule.counts:
            remaining = int(count)
            while remaining > 0:
                n_cur = alive.shape[0]
                if n_cur < 2:
                    raise TooFewTokensError("schedule demands merges with fewer than 2 tokens")
                if split is SplitRule.RANDOM:
                    a_pos, b_pos = _kernels.split_random(rng_state, n_cur, n_cur // 2)
                else:
                    a_pos, b_pos = split_indices(n_cur, rng, split)
                a_ids = alive[a_pos]
                b_ids = alive[b_pos]
                a_rows = np.take(rows32, a_ids, axis=0, out=buf_a[: a_ids.shape[0]])
                b_rows = np.take(rows32, b_ids, axis=0, out=buf_b[: b_ids.shape[0]])
                raw = np.matmul(a_rows, b_rows.T, out=buf_raw[: a_ids.shape[0], : b_ids.shape[0]])
                top_k = min(remaining, a_ids.shape[0])
                best_sim, best_pos = _kernels.best_counterparts(
                    raw, base, overlay, touched, norms, a_ids, b_ids, top_k, band
                )
                # Selection order matches the public matching round; the
                # merge pairs come back grouped by destination (sources
                # ascending within one destination), the fixed id order
                # the representative updates process them in.
                src, dst, alive = _kernels.finish_round(
                    best_sim, best_pos, a_ids, b_ids, top_k, alive, parent
                )
                update(base, overlay, touched, rows32, norms, weights, src, dst, NORM_EPS)
                remaining -= src.shape[0]
    finally:
        rng.unpack_state(rng_state)

    assignment = _kernels.resolve_labels(parent)
    return MorphingMatrix.from_assignment(assignment), base, overlay, touched, alive


def apply(m: MorphingMatrix, tokens) -> np.ndarray:
    """Collapse tokens to their per-group flat means (64-bit accumulation).

    Output dtype follows the input, so 32-bit storage stays 32-bit at the
    boundary while the sums themselves are float64.
    """
    arr = np.asarray(tokens)
    if arr.ndim != 2 or arr.shape[0] != m.n_tokens:
        raise DimensionMismatchError(
            f"expected ({m.n_tokens}, d) tokens, got {arr.shape}"
        )
    staged = np.ascontiguousarray(arr if arr.dtype in (np.float32, np.float64) else arr.astype(np.float64))
    order = np.argsort(m.assignment, kind="stable")
    starts = np.empty(m.n_groups + 1, dtype=np.int64)
    starts[0] = 0
    np.cumsum(m.weights, out=starts[1:])
    out = np.empty((m.n_groups, staged.shape[1]), dtype=staged.dtype)
    _kernels.group_means(order, starts, m.weights, staged, out)
    return out


def expand(m: MorphingMatrix, morphed) -> np.ndarray:
    """Broadcast group rows back over token positions: row j = morphed[g(j)]."""
    arr = np.asarray(morphed)
    if arr.ndim != 2 or arr.shape[0] != m.n_groups:
        raise DimensionMismatchError(
            f"expected ({m.n_groups}, d) group rows, got {arr.shape}"
        )
    return arr[m.assignment]


def kmeans_grouping(features, n_groups: int, iters: int = 10, rng: Rng = None) -> MorphingMatrix:
    """Spherical k-means on l2-normalized features.

    Seeding picks the first centroid uniformly and subsequent ones with
    probability proportional to squared cosine distance from the nearest
    chosen centroid. Each Lloyd iteration assigns by highest cosine
    similarity (ties to the lowest centroid id) and repairs empty clusters
    by stealing the point farthest from its own centroid. Runs exactly
    ``iters`` iterations; deterministic given the generator.
    """
    feats = validate_token_matrix(features)
    n = feats.shape[0]
    if not 1 <= n_groups <= n:
        raise InvalidRangeError(f"n_groups={n_groups} outside [1, {n}]")
    if iters < 1:
        raise InvalidRangeError(f"iters must be >= 1, got {iters}")
    if rng is None:
        raise InvalidRangeError("kmeans_grouping requires an Rng")

    pts = feats.astype(np.float64)
    pnorms = np.maximum(np.sqrt(np.einsum("ij,ij->i", pts, pts)), NORM_EPS)
    unit = pts / pnorms[:, None]

    centers = np.empty((n_groups, pts.shape[1]))
    chosen = np.zeros(n, dtype=bool)
    first = rng.uniform_int(0, n - 1)
    chosen[first] = True
    centers[0] = unit[first]
    min_dist = 1.0 - unit @ centers[0]
    for c in range(1, n_groups):
        weights = np.where(chosen, 0.0, np.maximum(min_dist, 0.0) ** 2)
        total = float(weights.sum())
        if total > 1e-30:
            cum = np.cumsum(weights)
            pick = int(np.searchsorted(cum, rng.next_float() * total, side="right"))
            if pick >= n or weights[pick] <= 0.0:
                pick = int(np.flatnonzero(weights > 0)[-1])
        else:
            open_ids = np.flatnonzero(~chosen)
            pick = int(open_ids[rng.uniform_int(0, open_ids.shape[0] - 1)])
        chosen[pick] = True
        centers[c] = unit[pick]
        min_dist = np.minimum(min_dist, 1.0 - unit @ centers[c])

    labels = np.zeros(n, dtype=np.int64)
    for _ in range(iters):
        _, best_pos = nearest_by_cosine(unit, centers)
        labels = best_pos.astype(np.int64)
        counts = np.bincount(labels, minlength=n_groups)
        for empty in np.flatnonzero(counts == 0):
            # Steal the point farthest (by cosine distance) from its
            # centroid, considering only clusters that can spare one.
            dist_own = 1.0 - np.einsum("ij,ij->i", unit, centers[labels])
            dist_own[counts[labels] < 2] = -np.inf
            victim = int(np.argmax(dist_own))
            counts[labels[victim]] -= 1
            labels[victim] = empty
            counts[empty] = 1
        sums = _segment_sums(labels, unit, n_groups)
        centers = sums / counts[:, None]
        cn = np.maximum(np.sqrt(np.einsum("ij,ij->i", centers, centers)), NORM_EPS)
        centers = centers / cn[:, None]

    return MorphingMatrix.from_assignment(_canonical_labels(labels))


def downsample_grouping(grid_h: int, grid_w: int, factor: int) -> MorphingMatrix:
    """Group a row-major grid of tokens into factor x factor blocks."""
    if grid_h < 1 or grid_w < 1 or factor < 1:
        raise InvalidRangeError("grid dimensions and factor must be >= 1")
    if grid_h % factor or grid_w % factor:
        raise IndivisibleGridError(
            f"factor {factor} does not divide grid {grid_h}x{grid_w}"
        )
    token = np.arange(grid_h * grid_w, dtype=np.int64)
    block_row = (token // grid_w) // factor
    block_col = (token % grid_w) // factor
    assignment = block_row * (grid_w // factor) + block_col
    return MorphingMatrix.from_assignment(assignment)
