"""Spatial-consistency analyses over token embeddings.

Given externally provided class embeddings, tokens are labeled by highest
cosine similarity, an image-level prediction pools the per-token score
vectors, and agreement against a ground-truth id counts how many token
labels are right. A continuous companion metric averages each token's
cosine with a reference vector. Each analysis can run on the raw tokens
or on tokens smoothed through a grouping (group means broadcast back over
all positions), which keeps every per-token quantity defined on all N
positions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, EmptyMatrixError, InvalidRangeError
from .matching import NORM_EPS
from .morphing import apply, expand
from .types import MorphingMatrix, validate_token_matrix


@dataclass(frozen=True)
class ConsistencyReport:
    """Bundle of the per-token labels, pooled label, agreement count
    (None without a ground-truth id), and mean reference cosine (None
    without a reference vector)."""

    per_token_labels: tuple
    ensemble_label: int
    agreement: int | None = None
    mean_ref_cosine: float | None = None


def validate_class_embeddings(classes, dim: int) -> np.ndarray:
    """Class embedding matrix: C x d with C >= 2, finite, d matching."""
    arr = validate_token_matrix(classes)
    if arr.shape[0] < 2:
        raise EmptyMatrixError(f"need at least 2 classes, got {arr.shape[0]}")
    if arr.shape[1] != dim:
        raise DimensionMismatchError(
            f"class dimension {arr.shape[1]} does not match token dimension {dim}"
        )
    return arr


def _unit_rows(arr64: np.ndarray) -> np.ndarray:
    norms = np.maximum(np.sqrt(np.einsum("ij,ij->i", arr64, arr64)), NORM_EPS)
    return arr64 / norms[:, None]


def _score_matrix(tokens, classes) -> np.ndarray:
    toks = validate_token_matrix(tokens)
    cls = validate_class_embeddings(classes, toks.shape[1])
    return _unit_rows(toks.astype(np.float64)) @ _unit_rows(cls.astype(np.float64)).T


def tokenwise_predict(tokens, classes) -> np.ndarray:
    """Per-token argmax of cosine score; ties go to the lowest class id."""
    return np.argmax(_score_matrix(tokens, classes), axis=1).astype(np.int64)


def ensemble_predict(tokens, classes, m: MorphingMatrix = None) -> int:
    """Image-level label: argmax of the token-averaged score vector.

    With a grouping, tokens are first replaced by their group means
    (broadcast back to all positions) so related tokens vote coherently.
    """
    toks = validate_token_matrix(tokens)
    if m is not None:
        toks = expand(m, apply(m, toks))
    scores = _score_matrix(toks, classes)
    return int(np.argmax(scores.mean(axis=0)))


def agreement_count(labels, truth: int) -> int:
    """How many labels equal the ground-truth class id."""
    arr = np.asarray(labels, dtype=np.int64)
    if arr.ndim != 1:
        raise DimensionMismatchError("labels must be a 1-D vector")
    return int((arr == int(truth)).sum())


def mean_reference_cosine(tokens, reference) -> float:
    """Mean cosine similarity between each token and a reference vector."""
    toks = validate_token_matrix(tokens)
    ref = np.asarray(reference, dtype=np.float64).reshape(-1)
    if ref.shape[0] != toks.shape[1]:
        raise DimensionMismatchError(
            f"reference dimension {ref.shape[0]} does not match tokens {toks.shape[1]}"
        )
    unit_t = _unit_rows(toks.astype(np.float64))
    unit_r = ref / max(float(np.linalg.norm(ref)), NORM_EPS)
    return float((unit_t @ unit_r).mean())


def consistency_report(
    tokens,
    classes,
    m: MorphingMatrix = None,
    truth: int = None,
    reference=None,
) -> ConsistencyReport:
    """Assemble the full bundle for one pipeline (raw, or smoothed via m)."""
    toks = validate_token_matrix(tokens)
    if truth is not None:
        cls = validate_class_embeddings(classes, toks.shape[1])
        if not 0 <= int(truth) < cls.shape[0]:
            raise InvalidRangeError(f"truth id {truth} outside [0, {cls.shape[0]})")
    smoothed = expand(m, apply(m, toks)) if m is not None else toks
    labels = tokenwise_predict(smoothed, classes)
    return ConsistencyReport(
        per_token_labels=tuple(int(x) for x in labels),
        ensemble_label=ensemble_predict(toks, classes, m),
        agreement=None if truth is None else agreement_count(labels, int(truth)),
        mean_ref_cosine=None if reference is None else mean_reference_cosine(smoothed, reference),
    )
