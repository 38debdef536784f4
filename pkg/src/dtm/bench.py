"""Microbenchmarks for the grouping variants.

Each rep times grouping plus the group-mean reduction on a fresh random
token matrix; warmup reps are discarded and the summary reports the median
and 90th percentile (nearest-rank). Per-rep inputs derive from seeds drawn
up front, so different variants run on identical inputs rep for rep, and
every output feeds a checksum sink and a validity check so no work can be
skipped or silently wrong.
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass

import numpy as np

from .errors import InvalidRangeError
from .matching import SplitRule
from .morphing import apply, downsample_grouping, kmeans_grouping, morph
from .rng import Rng
from .types import MorphSchedule


class GroupingVariant(enum.Enum):
    BIPARTITE = "bipartite"
    KMEANS = "kmeans"
    DOWNSAMPLE = "downsample"


@dataclass(frozen=True)
class TimingSummary:
    median_us: float
    p90_us: float
    reps: int
    per_rep_us: tuple
    checksum: float


def _percentile_nearest_rank(sorted_us, q: float) -> float:
    rank = max(1, math.ceil(q * len(sorted_us)))
    return sorted_us[rank - 1]


def default_schedule(n_tokens: int) -> MorphSchedule:
    """Half the tokens over two iterations: the headline configuration."""
    total = n_tokens - max(1, n_tokens // 2)
    return MorphSchedule(
        n_final=n_tokens - total, steps=2, counts=(total // 2, total - total // 2)
    )


def bench_variant(
    variant: GroupingVariant,
    n_tokens: int,
    dim: int,
    schedule: MorphSchedule,
    reps: int,
    rng: Rng,
    warmup: int = 5,
) -> TimingSummary:
    """Time one grouping variant for ``reps`` measured repetitions.

    kmeans uses ``schedule.n_final`` clusters and 10 iterations;
    downsample needs ``n_tokens`` to be a perfect square with an even side
    and pools 2x2 blocks. Timed region: grouping + apply, nothing else.
    """
    if reps < 30:
        raise InvalidRangeError(f"reps must be >= 30, got {reps}")
    if warmup < 5:
        raise InvalidRangeError(f"warmup must be >= 5, got {warmup}")
    if schedule.n_tokens != n_tokens:
        raise InvalidRangeError(
            f"schedule built for {schedule.n_tokens} tokens, bench runs {n_tokens}"
        )
    side = math.isqrt(n_tokens)
    if variant is GroupingVariant.DOWNSAMPLE and (side * side != n_tokens or side % 2):
        raise InvalidRangeError(
            f"downsample bench needs a square grid with even side, got n={n_tokens}"
        )

    total = warmup + reps
    seeds = [rng.next_u64() for _ in range(total)]
    times_us = []
    checksum = 0.0
    for i in range(total):
        feats = (
            np.random.default_rng(seeds[i])
            .standard_normal((n_tokens, dim))
            .astype(np.float32)
        )
        group_rng = Rng(seeds[i] ^ 0x9E3779B97F4A7C15)

        t0 = time.perf_counter_ns()
        if variant is GroupingVariant.BIPARTITE:
            m = morph(feats, schedule, group_rng, SplitRule.RANDOM)
        elif variant is GroupingVariant.KMEANS:
            m = kmeans_grouping(feats, schedule.n_final, 10, group_rng)
        else:
            m = downsample_grouping(side, side, 2)
        pooled = apply(m, feats)
        t1 = time.perf_counter_ns()

        # Sink + stress check, outside the timed region.
        checksum += float(pooled[0, 0]) + m.n_groups
        assert int(m.weights.sum()) == n_tokens
        if i >= warmup:
            times_us.append((t1 - t0) / 1e3)

    ordered = sorted(times_us)
    return TimingSummary(
        median_us=_percentile_nearest_rank(ordered, 0.5),
        p90_us=_percentile_nearest_rank(ordered, 0.9),
        reps=reps,
        per_rep_us=tuple(times_us),
        checksum=checksum,
    )
