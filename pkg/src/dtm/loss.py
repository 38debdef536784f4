"""Alignment loss between morphed online and target tokens.

The loss sums, over groups, the group size times the cosine distance
between the group means of the online and target tokens. Weighting by
group size means a grouping that collapses everything reduces to an
image-level loss and an all-singleton grouping reduces to the plain
token-wise loss. The gradient flows only into the online tokens; targets
act as fixed supervision.

Accumulation is float64 throughout; outputs follow the input dtype at the
API boundary. Degenerate group means (norm below the shared epsilon) get
distance exactly 1 and a zero gradient rather than poisoning the batch.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateNormError, DimensionMismatchError
from .matching import NORM_EPS, SplitRule, cosine_similarity
from .morphing import MorphConfig, _segment_sums, morph
from .rng import Rng
from .scheduler import SchedulerConfig, sample_schedules
from .types import MorphingMatrix, validate_token_matrix


class DistanceKind(enum.Enum):
    """Distance between morphed pairs. Only COSINE carries a gradient."""

    COSINE = "cosine"
    L1 = "l1"
    L2 = "l2"
    SMOOTH_L1 = "smooth_l1"


@dataclass(frozen=True)
class LossReport:
    """Per-schedule loss bundle: total = sum of the per-group terms."""

    total: float
    per_group: np.ndarray
    schedule_id: int = 0


def cosine_distance(a, b) -> float:
    """1 - cosine_similarity(a, b)."""
    return 1.0 - cosine_similarity(a, b)


def grad_cosine_distance(a, b) -> np.ndarray:
    """Derivative of cosine distance with respect to the first argument.

    -(b / (|a| |b|) - (a . b) a / (|a|^3 |b|)), in float64. The second
    argument's norm is epsilon-floored (a zero b gives a zero gradient);
    a degenerate first argument raises, because the derivative blows up.
    """
    av = np.asarray(a, dtype=np.float64).reshape(-1)
    bv = np.asarray(b, dtype=np.float64).reshape(-1)
    if av.shape != bv.shape:
        raise DimensionMismatchError(f"vector lengths differ: {av.shape[0]} vs {bv.shape[0]}")
    na = float(np.linalg.norm(av))
    if na <= NORM_EPS:
        raise DegenerateNormError(f"first argument norm {na} is below {NORM_EPS}")
    nb = max(float(np.linalg.norm(bv)), NORM_EPS)
    dot = float(np.dot(av, bv))
    return -(bv / (na * nb) - dot * av / (na**3 * nb))


def _morphed_pairs(online, targets, m: MorphingMatrix):
    u = validate_token_matrix(online)
    v = validate_token_matrix(targets)
    if u.shape != v.shape:
        raise DimensionMismatchError(f"online {u.shape} vs targets {v.shape}")
    if u.shape[0] != m.n_tokens:
        raise DimensionMismatchError(
            f"grouping covers {m.n_tokens} tokens, matrices have {u.shape[0]}"
        )
    w = m.weights[:, None].astype(np.float64)
    u_hat = _segment_sums(m.assignment, u.astype(np.float64), m.n_groups) / w
    v_hat = _segment_sums(m.assignment, v.astype(np.float64), m.n_groups) / w
    return u, u_hat, v_hat


def dtm_loss(
    online,
    targets,
    m: MorphingMatrix,
    distance: DistanceKind = DistanceKind.COSINE,
    schedule_id: int = 0,
) -> LossReport:
    """Sum over groups of group size times the morphed-pair distance."""
    _, u_hat, v_hat = _morphed_pairs(online, targets, m)
    if distance is DistanceKind.COSINE:
        nu = np.sqrt(np.einsum("ij,ij->i", u_hat, u_hat))
        nv = np.sqrt(np.einsum("ij,ij->i", v_hat, v_hat))
        dots = np.einsum("ij,ij->i", u_hat, v_hat)
        cos = np.clip(dots / (np.maximum(nu, NORM_EPS) * np.maximum(nv, NORM_EPS)), -1.0, 1.0)
        # Bitwise-equal pairs sit exactly at the minimum; skip the sqrt
        # roundoff so aligned inputs give an exact zero.
        cos[(u_hat == v_hat).all(axis=1) & (nu > NORM_EPS)] = 1.0
        cos[(nu <= NORM_EPS) | (nv <= NORM_EPS)] = 0.0
        dist = 1.0 - cos
    else:
        diff = u_hat - v_hat
        if distance is DistanceKind.L1:
            dist = np.abs(diff).sum(axis=1)
        elif distance is DistanceKind.L2:
            dist = np.sqrt(np.einsum("ij,ij->i", diff, diff))
        else:
            ad = np.abs(diff)
            dist = np.where(ad < 1.0, 0.5 * diff * diff, ad - 0.5).sum(axis=1)
    per_group = m.weights.astype(np.float64) * dist
    per_group.flags.writeable = False
    return LossReport(total=float(per_group.sum()), per_group=per_group, schedule_id=schedule_id)


def _grad64(online, targets, m: MorphingMatrix) -> np.ndarray:
    _, u_hat, v_hat = _morphed_pairs(online, targets, m)
    nu = np.sqrt(np.einsum("ij,ij->i", u_hat, u_hat))
    nv = np.sqrt(np.einsum("ij,ij->i", v_hat, v_hat))
    dots = np.einsum("ij,ij->i", u_hat, v_hat)
    ok = (nu > NORM_EPS) & (nv > NORM_EPS)
    nu_s = np.where(ok, nu, 1.0)
    nv_s = np.where(ok, nv, 1.0)
    # d(1 - cos)/d(u_hat); the group-size weight cancels the mean's 1/w,
    # so every member token inherits its group's row unchanged.
    group_grad = -(v_hat / (nu_s * nv_s)[:, None] - (dots / (nu_s**3 * nv_s))[:, None] * u_hat)
    group_grad[~ok] = 0.0
    group_grad[(u_hat == v_hat).all(axis=1)] = 0.0
    return group_grad[m.assignment]


def dtm_loss_grad(
    online, targets, m: MorphingMatrix, distance: DistanceKind = DistanceKind.COSINE
) -> np.ndarray:
    """Gradient of the loss with respect to each online token.

    Row j is the cosine-distance derivative at token j's group pair; the
    targets receive no gradient. Degenerate groups contribute zero rows.
    """
    if distance is not DistanceKind.COSINE:
        raise NotImplementedError(f"no gradient for distance kind {distance.value!r}")
    arr = np.asarray(online)
    grad = _grad64(online, targets, m)
    return grad.astype(arr.dtype) if arr.dtype == np.float32 else grad


def objective(
    online,
    targets,
    cfg: SchedulerConfig,
    rng: Rng,
    split: SplitRule = SplitRule.RANDOM,
    mcfg: MorphConfig = MorphConfig(),
):
    """Multi-schedule objective: sum of per-schedule losses and gradients.

    Draws ``cfg.n_losses`` schedules off the stream, morphs the targets
    once per schedule (consuming the same stream), and sums losses and
    gradients in schedule order. Returns (total, gradient, reports).
    """
    u = validate_token_matrix(online)
    v = validate_token_matrix(targets)
    if u.shape != v.shape:
        raise DimensionMismatchError(f"online {u.shape} vs targets {v.shape}")
    schedules = sample_schedules(rng, v.shape[0], cfg)
    total = 0.0
    grad = np.zeros(u.shape, dtype=np.float64)
    reports = []
    for sid, schedule in enumerate(schedules):
        m = morph(v, schedule, rng, split, mcfg)
        report = dtm_loss(u, v, m, schedule_id=sid)
        reports.append(report)
        total += report.total
        grad += _grad64(u, v, m)
    out = grad.astype(u.dtype) if u.dtype == np.float32 else grad
    return total, out, reports
