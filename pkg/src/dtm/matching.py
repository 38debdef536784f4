"""One bipartite matching round.

Tokens are split into a source half A (|A| = floor(n/2)) and a
destination half B, every source is matched to its most cosine-similar
destination, and the r sources with the highest best-similarity merge into
their matches. Several sources may share a destination within one round,
so a single round removes at most floor(n/2) tokens.

Similarity comparisons are 64-bit. The pairwise scan runs a float32
prescreen; any source whose prescreen scores land within a conservative
error band of its maximum is re-scored with sequential float64 dot
products, and the cross-source ranking always uses the exact float64
similarities of the chosen pairs. The band bounds the worst-case float32
error, so selections are exactly those of all-float64 scoring.
"""

from __future__ import annotations

import enum

import numpy as np

from . import _kernels
from .errors import DimensionMismatchError, InvalidRangeError, TooFewTokensError
from .rng import Rng
from .types import StepMatching

# Norm floor for cosine computations; keeps zero vectors at similarity 0.
NORM_EPS = 1e-12

# Rows rewritten by merges live in a float64 overlay; a pristine token set
# needs none, and these placeholders mark every row as untouched.
_NO_OVERLAY = np.empty((1, 1))


class SplitRule(enum.Enum):
    """How a matching round partitions the current tokens into A and B."""

    RANDOM = "random"
    ALTERNATING = "alternating"


def cosine_similarity(a, b) -> float:
    """dot(a, b) / (max(|a|, eps) * max(|b|, eps)), accumulated in 64-bit.

    The result is clamped into [-1, 1] so float roundoff cannot push it
    past the mathematical range.
    """
    av = np.asarray(a, dtype=np.float64).reshape(-1)
    bv = np.asarray(b, dtype=np.float64).reshape(-1)
    if av.shape != bv.shape:
        raise DimensionMismatchError(f"vector lengths differ: {av.shape[0]} vs {bv.shape[0]}")
    na = max(float(np.linalg.norm(av)), NORM_EPS)
    nb = max(float(np.linalg.norm(bv)), NORM_EPS)
    return min(1.0, max(-1.0, float(np.dot(av, bv) / (na * nb))))


def split_indices(n: int, rng: Rng, split: SplitRule):
    """Partition [0, n) into sources A (floor(n/2)) and destinations B.

    RANDOM draws a uniform floor(n/2)-subset as A; ALTERNATING sends even
    indices to A and odd to B, except that for odd n the trailing unpaired
    even index moves to B so |A| stays floor(n/2). Both halves come back
    sorted ascending.
    """
    half = n // 2
    if split is SplitRule.ALTERNATING:
        a = np.arange(0, 2 * half, 2, dtype=np.int64)
        b = np.setdiff1d(np.arange(n, dtype=np.int64), a)
        return a, b
    return rng.split_random(n, half)


def staged_rows(features):
    """The (base, float32 rows, floored norms) triple the selection core
    works on: the caller's matrix as-is (upcast if not float), its exact
    float32 cast, and float64 row norms."""
    base = np.ascontiguousarray(features)
    if base.dtype not in (np.float32, np.float64):
        base = base.astype(np.float64)
    rows32, norms = _kernels.stage_pair(base)
    return base, rows32, norms


def _error_band(dim: int) -> float:
    # Worst-case float32 accumulation error of a normalized dot product is
    # below dim * 2^-24 plus cast noise; pad generously.
    return max(1e-3, 8.0 * dim * 2.0**-24)


def best_counterparts(base, rows32, norms, a_ids, b_ids, top_k: int = None, overlay=None, touched=None):
    """Per source id, the destination id with the highest 64-bit cosine.

    Returns (best_sim, best_pos): exact float64 similarities (sequential
    dot products over the float64 values) and positions into ``b_ids``;
    ties resolve to the lowest destination position. When ``top_k`` is
    given, only sources that can reach the top ``top_k`` are re-scored
    exactly; the rest keep the prescreen argmax and a -inf similarity
    (they provably cannot enter the exact top ``top_k``).
    """
    raw = rows32[a_ids] @ rows32[b_ids].T
    k = a_ids.shape[0] if top_k is None else min(top_k, a_ids.shape[0])
    if overlay is None:
        overlay = _NO_OVERLAY
        touched = np.zeros(base.shape[0], dtype=np.bool_)
    return _kernels.best_counterparts(
        raw, base, overlay, touched, norms, a_ids, b_ids, k, _error_band(rows32.shape[1])
    )


def nearest_by_cosine(src, dst):
    """Per source row, the destination row with the highest cosine
    similarity: (best_sim, best_pos) with float64 similarities and ties to
    the lowest destination position."""
    a_base, a32, na = staged_rows(src)
    b_base, b32, nb = staged_rows(dst)
    base = np.concatenate([a_base.astype(np.float64), b_base.astype(np.float64)])
    rows32 = np.concatenate([a32, b32])
    norms = np.concatenate([na, nb])
    a_ids = np.arange(a32.shape[0], dtype=np.int64)
    b_ids = np.arange(a32.shape[0], a32.shape[0] + b32.shape[0], dtype=np.int64)
    return best_counterparts(base, rows32, norms, a_ids, b_ids)


def bipartite_step(features, r: int, rng: Rng, split: SplitRule = SplitRule.RANDOM) -> StepMatching:
    """Select the top-r merges of one matching round.

    ``r = 0`` is a pure no-op: no split is drawn and the generator is left
    untouched. Otherwise the effective merge count is min(r, |A|). Merges
    come back ordered by (similarity desc, source index asc); equal
    similarities fall to the lower source index, and within one source to
    the lower destination index.
    """
    feats = np.asarray(features)
    if feats.ndim != 2:
        raise DimensionMismatchError(f"expected 2-D features, got ndim={feats.ndim}")
    if r < 0:
        raise InvalidRangeError(f"r must be >= 0, got {r}")
    n = feats.shape[0]
    if r == 0:
        return StepMatching((), tuple(range(n)))
    if n < 2:
        raise TooFewTokensError(f"need at least 2 tokens to merge, got {n}")

    a_idx, b_idx = split_indices(n, rng, split)
    base, rows32, norms = staged_rows(feats)
    best_sim, best_pos = best_counterparts(base, rows32, norms, a_idx, b_idx, r)
    order = np.lexsort((a_idx, -best_sim))
    take = order[: min(r, a_idx.shape[0])]
    src_ids = a_idx[take]
    dst_ids = b_idx[best_pos[take]]

    keep = np.ones(n, dtype=bool)
    keep[src_ids] = False
    merges = tuple((int(s), int(d)) for s, d in zip(src_ids, dst_ids))
    return StepMatching(merges, tuple(int(i) for i in np.flatnonzero(keep)))
