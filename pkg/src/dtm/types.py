"""Domain types and their validity rules.

A token matrix is a plain ``numpy`` array of shape (N, d): one row per
token embedding. Grouping results, schedules, and single matching rounds
get small frozen dataclasses whose constructors enforce the structural
invariants every other module relies on. All types are immutable after
construction and safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatchError,
    EmptyMatrixError,
    InvalidRangeError,
    NonFiniteError,
)

# Alias for readability in signatures; rows are tokens, columns features.
TokenMatrix = np.ndarray


def validate_token_matrix(tokens) -> np.ndarray:
    """Check an N x d token matrix: 2-D, N >= 1, d >= 1, all entries finite.

    Returns the array (cast to a floating dtype if needed, otherwise
    untouched) so callers can validate inline. Storage stays 32-bit where
    it arrives 32-bit; accumulation dtype is each operation's concern.
    """
    arr = np.asarray(tokens)
    if arr.dtype not in (np.float32, np.float64):
        arr = arr.astype(np.float64)
    if arr.ndim != 2:
        raise DimensionMismatchError(f"expected a 2-D token matrix, got ndim={arr.ndim}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise EmptyMatrixError(f"token matrix must be at least 1x1, got {arr.shape}")
    if not np.isfinite(arr).all():
        bad = np.argwhere(~np.isfinite(arr))[0]
        raise NonFiniteError((int(bad[0]), int(bad[1])))
    return arr


@dataclass(frozen=True)
class MorphingMatrix:
    """Hard assignment of ``n_tokens`` tokens onto ``n_groups`` nonempty groups.

    ``assignment[j]`` is the group id of token j and ``weights[i]`` counts
    the tokens in group i. This is the canonical storage of the equivalent
    {0,1} group-by-token matrix, whose columns each contain exactly one 1;
    :meth:`to_dense` materializes that matrix when needed.

    Invariants enforced at construction:
      * group ids are dense in [0, n_groups) and every group is nonempty,
      * weights[i] = |{j : assignment[j] = i}|, so sum(weights) = n_tokens,
      * 1 <= n_groups <= n_tokens.
    """

    n_tokens: int
    n_groups: int
    assignment: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        assignment = np.asarray(self.assignment, dtype=np.int64)
        if assignment.ndim != 1:
            raise DimensionMismatchError("assignment must be a 1-D vector")
        if assignment.shape[0] != self.n_tokens or self.n_tokens < 1:
            raise DimensionMismatchError(
                f"assignment has {assignment.shape[0]} entries for n_tokens={self.n_tokens}"
            )
        if not 1 <= self.n_groups <= self.n_tokens:
            raise InvalidRangeError(
                f"n_groups={self.n_groups} outside [1, {self.n_tokens}]"
            )
        if assignment.min() < 0 or assignment.max() >= self.n_groups:
            raise InvalidRangeError("group ids must lie in [0, n_groups)")
        counts = np.bincount(assignment, minlength=self.n_groups)
        if (counts == 0).any():
            empty = int(np.flatnonzero(counts == 0)[0])
            raise InvalidRangeError(f"group {empty} is empty; ids must be dense")
        weights = np.asarray(self.weights, dtype=np.int64)
        if weights.shape != (self.n_groups,) or not np.array_equal(weights, counts):
            raise InvalidRangeError("weights must equal per-group token counts")
        assignment.flags.writeable = False
        weights.flags.writeable = False
        object.__setattr__(self, "assignment", assignment)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def from_assignment(cls, assignment) -> "MorphingMatrix":
        """Build from an assignment vector alone; weights are derived."""
        arr = np.asarray(assignment, dtype=np.int64)
        if arr.ndim != 1 or arr.shape[0] < 1:
            raise DimensionMismatchError("assignment must be a nonempty 1-D vector")
        n_groups = int(arr.max()) + 1 if arr.size else 0
        counts = np.bincount(arr, minlength=max(n_groups, 1)) if arr.min() >= 0 else None
        if counts is None:
            raise InvalidRangeError("group ids must be nonnegative")
        return cls(arr.shape[0], n_groups, arr, counts)

    @classmethod
    def identity(cls, n_tokens: int) -> "MorphingMatrix":
        """Every token its own group: assignment j -> j."""
        ids = np.arange(n_tokens, dtype=np.int64)
        return cls(n_tokens, n_tokens, ids, np.ones(n_tokens, dtype=np.int64))

    def to_dense(self) -> np.ndarray:
        """Explicit {0,1} matrix of shape (n_groups, n_tokens)."""
        dense = np.zeros((self.n_groups, self.n_tokens), dtype=np.int8)
        dense[self.assignment, np.arange(self.n_tokens)] = 1
        return dense


@dataclass(frozen=True)
class MorphSchedule:
    """Removal plan: ``steps`` matching iterations, iteration p removing
    ``counts[p]`` tokens, leaving ``n_final`` of the original
    ``n_final + sum(counts)`` tokens.
    """

    n_final: int
    steps: int
    counts: tuple

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        if self.n_final < 1:
            raise InvalidRangeError(f"n_final must be >= 1, got {self.n_final}")
        if self.steps < 1 or self.steps != len(counts):
            raise InvalidRangeError(
                f"steps={self.steps} must be >= 1 and match len(counts)={len(counts)}"
            )
        if any(c < 0 for c in counts):
            raise InvalidRangeError("removal counts must be nonnegative")
        object.__setattr__(self, "counts", counts)

    @property
    def n_tokens(self) -> int:
        """Token count this schedule was built for."""
        return self.n_final + sum(self.counts)


@dataclass(frozen=True)
class StepMatching:
    """One matching round over the current token set.

    ``merges`` holds (src, dst) pairs ordered by similarity (descending,
    then source id ascending); ``kept`` lists surviving token ids in
    ascending order. A source merges at most once, never into itself, and
    destinations never appear as sources within the same round.
    """

    merges: tuple
    kept: tuple

    def __post_init__(self):
        merges = tuple((int(s), int(d)) for s, d in self.merges)
        kept = tuple(int(k) for k in self.kept)
        sources = [s for s, _ in merges]
        if len(set(sources)) != len(sources):
            raise InvalidRangeError("a source token may merge at most once per round")
        dsts = {d for _, d in merges}
        if any(s == d for s, d in merges) or dsts & set(sources):
            raise InvalidRangeError("destinations must be distinct from sources")
        object.__setattr__(self, "merges", merges)
        object.__setattr__(self, "kept", kept)
