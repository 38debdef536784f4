"""Deterministic, portable random number generation.

Every randomized operation in this package draws from :class:`Rng`, a
SplitMix64-seeded xoshiro256** stream with rejection-sampled integer
ranges. The same 64-bit seed yields the same stream on every platform,
which is what makes grouping runs and CLI output reproducible
byte-for-byte.
"""

_MASK64 = (1 << 64) - 1


class Rng:
    """xoshiro256** stream seeded from one 64-bit integer via SplitMix64.

    Single-owner by convention: pass the generator explicitly and never
    share an instance across threads. Integer draws use rejection sampling,
    so the mapping from raw 64-bit words to ranges is exact (no modulo
    bias) and identical everywhere.
    """

    __slots__ = ("_s0", "_s1", "_s2", "_s3")

    def __init__(self, seed: int) -> None:
        state = seed & _MASK64
        words = []
        for _ in range(4):
            state = (state + 0x9E3779B97F4A7C15) & _MASK64
            z = state
            z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
            z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
            words.append(z ^ (z >> 31))
        self._s0, self._s1, self._s2, self._s3 = words

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self._s0, self._s1, self._s2, self._s3
        x = (s1 * 5) & _MASK64
        result = ((((x << 7) | (x >> 57)) & _MASK64) * 9) & _MASK64
        t = (s1 << 17) & _MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = ((s3 << 45) | (s3 >> 19)) & _MASK64
        self._s0, self._s1, self._s2, self._s3 = s0, s1, s2, s3
        return result

    def uniform_int(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi], both ends inclusive."""
        if hi < lo:
            raise ValueError(f"empty range [{lo}, {hi}]")
        span = hi - lo + 1
        limit = ((1 << 64) // span) * span
        while True:
            x = self.next_u64()
            if x < limit:
                return lo + (x % span)

    def next_float(self) -> float:
        """Uniform in [0, 1) from the top 53 bits of one draw."""
        return (self.next_u64() >> 11) * 2.0**-53

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle, descending index order.

        Consumes exactly the draws of ``uniform_int(0, i)`` for
        i = len-1 .. 1; the generator step is inlined because shuffles sit
        on the matching hot path.
        """
        self._partial_shuffle(items, len(items) - 1)

    def choose(self, n: int, k: int):
        """Uniformly random k-subset of [0, n) as an ascending int64 array.

        Partial Fisher-Yates over an index array: consumes exactly the
        draws of ``uniform_int(0, i)`` for i = n-1 .. n-k (the i = 0 draw
        is skipped, it could only swap in place), selecting the shuffled
        tail.
        """
        return self.split_random(n, k)[0]

    def split_random(self, n: int, k: int):
        """choose(n, k) plus its complement, both ascending int64 arrays,
        off the same draws."""
        if not 0 <= k <= n:
            raise ValueError(f"cannot choose {k} of {n}")
        from . import _kernels

        state = self.pack_state()
        a, b = _kernels.split_random(state, n, k)
        self.unpack_state(state)
        return a, b

    def pack_state(self):
        """State words as a uint64 array, for handing to compiled draws.

        Callers own the array until they give the words back through
        :meth:`unpack_state`; the generator must not be used in between.
        """
        import numpy as np

        return np.array([self._s0, self._s1, self._s2, self._s3], dtype=np.uint64)

    def unpack_state(self, state) -> None:
        self._s0, self._s1, self._s2, self._s3 = (int(x) for x in state)

    def _partial_shuffle(self, items: list, draws: int) -> None:
        s0, s1, s2, s3 = self._s0, self._s1, self._s2, self._s3
        n = len(items)
        for i in range(n - 1, n - 1 - draws, -1):
            span = i + 1
            limit = ((1 << 64) // span) * span
            while True:
                x = (s1 * 5) & _MASK64
                x = ((((x << 7) | (x >> 57)) & _MASK64) * 9) & _MASK64
                t = (s1 << 17) & _MASK64
                s2 ^= s0
                s3 ^= s1
                s1 ^= s2
                s0 ^= s3
                s2 ^= t
                s3 = ((s3 << 45) | (s3 >> 19)) & _MASK64
                if x < limit:
                    break
            j = x % span
            items[i], items[j] = items[j], items[i]
        self._s0, self._s1, self._s2, self._s3 = s0, s1, s2, s3
