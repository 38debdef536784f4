"""Dynamic schedule sampling.

A schedule fixes how many tokens survive (``n_final``) and how many
matching iterations run (``steps``); the per-iteration removal counts are
the near-constant split of the total removal across iterations. Both
``n_final`` and ``steps`` are drawn uniformly (inclusive ends), so the
grouping granularity varies from token-wise to image-level run to run.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import InvalidRangeError
from .rng import Rng
from .types import MorphSchedule


@dataclass(frozen=True)
class SchedulerConfig:
    """Sampling ranges for dynamic schedules.

    ``n_min`` is the smallest allowed final token count (1 permits full
    collapse to a single group), ``k_max`` the largest iteration count,
    and ``n_losses`` how many schedules one objective evaluation draws.
    """

    n_min: int = 1
    k_max: int = 14
    n_losses: int = 2

    def __post_init__(self):
        if self.n_min < 1:
            raise InvalidRangeError(f"n_min must be >= 1, got {self.n_min}")
        if self.k_max < 1:
            raise InvalidRangeError(f"k_max must be >= 1, got {self.k_max}")
        if self.n_losses < 1:
            raise InvalidRangeError(f"n_losses must be >= 1, got {self.n_losses}")


def constant_counts(n_tokens: int, n_final: int, steps: int) -> list:
    """Near-constant removal counts: floor((N - n_final) / steps) per
    iteration, with the remainder absorbed by the last one.

    The counts are nonnegative, sum to exactly ``n_tokens - n_final``, and
    a count of zero is a legal no-op iteration (it appears whenever
    ``n_final`` is close to ``n_tokens`` and ``steps`` is large).
    """
    if n_final < 1 or n_final > n_tokens:
        raise InvalidRangeError(f"n_final={n_final} outside [1, {n_tokens}]")
    if steps < 1:
        raise InvalidRangeError(f"steps must be >= 1, got {steps}")
    total = n_tokens - n_final
    base = total // steps
    counts = [base] * (steps - 1)
    counts.append(total - (steps - 1) * base)
    return counts


def sample_schedule(rng: Rng, n_tokens: int, cfg: SchedulerConfig) -> MorphSchedule:
    """Draw n_final ~ U(n_min, N) then steps ~ U(1, k_max), in that order.

    The draw order is part of the determinism contract: callers replaying
    a seed must see identical schedules.
    """
    if n_tokens < 1:
        raise InvalidRangeError(f"n_tokens must be >= 1, got {n_tokens}")
    if cfg.n_min > n_tokens:
        raise InvalidRangeError(f"n_min={cfg.n_min} exceeds n_tokens={n_tokens}")
    n_final = rng.uniform_int(cfg.n_min, n_tokens)
    steps = rng.uniform_int(1, cfg.k_max)
    counts = constant_counts(n_tokens, n_final, steps)
    return MorphSchedule(n_final=n_final, steps=steps, counts=tuple(counts))


def sample_schedules(rng: Rng, n_tokens: int, cfg: SchedulerConfig) -> list:
    """``cfg.n_losses`` independent draws off the single stream."""
    return [sample_schedule(rng, n_tokens, cfg) for _ in range(cfg.n_losses)]
