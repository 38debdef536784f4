import numpy as np
import pytest

from dtm import (
    DimensionMismatchError,
    IndivisibleGridError,
    IntermediateMean,
    InvalidRangeError,
    MorphConfig,
    MorphSchedule,
    MorphingMatrix,
    Rng,
    ScheduleMismatchError,
    SplitRule,
    apply,
    downsample_grouping,
    expand,
    kmeans_grouping,
    morph,
)
from helpers import oracle_group_means, random_assignment

FOUR_TOKENS = np.array([[1, 0], [0.95, 0.05], [0, 1], [0.1, 0.9]], dtype=np.float32)


def random_schedule(gen, n):
    n_final = int(gen.integers(1, n + 1))
    steps = int(gen.integers(1, 15))
    total = n - n_final
    base = total // steps
    counts = [base] * (steps - 1) + [total - base * (steps - 1)]
    return MorphSchedule(n_final=n_final, steps=steps, counts=tuple(counts))


class TestMorph:
    def test_nothing_to_morph_gives_identity(self):
        schedule = MorphSchedule(n_final=4, steps=1, counts=(0,))
        m = morph(FOUR_TOKENS, schedule, Rng(1))
        assert m.assignment.tolist() == [0, 1, 2, 3]
        assert m.weights.tolist() == [1, 1, 1, 1]

    def test_pairs_merge_into_two_groups(self):
        schedule = MorphSchedule(n_final=2, steps=1, counts=(2,))
        m = morph(FOUR_TOKENS, schedule, Rng(0), SplitRule.ALTERNATING)
        assert m.assignment.tolist() == [0, 0, 1, 1]
        assert m.weights.tolist() == [2, 2]

    def test_collapse_to_single_group_needs_subrounds(self):
        feats = np.random.default_rng(0).standard_normal((196, 8)).astype(np.float32)
        schedule = MorphSchedule(n_final=1, steps=1, counts=(195,))
        m = morph(feats, schedule, Rng(3))
        assert m.n_groups == 1
        assert m.weights.tolist() == [196]

    def test_schedule_built_for_other_n_rejected(self):
        schedule = MorphSchedule(n_final=3, steps=1, counts=(2,))
        with pytest.raises(ScheduleMismatchError):
            morph(FOUR_TOKENS, schedule, Rng(0))

    def test_deterministic(self):
        feats = np.random.default_rng(5).standard_normal((64, 12)).astype(np.float32)
        schedule = MorphSchedule(n_final=20, steps=3, counts=(14, 14, 16))
        a = morph(feats, schedule, Rng(11))
        b = morph(feats, schedule, Rng(11))
        assert a.assignment.tolist() == b.assignment.tolist()

    def test_scale_invariant_assignment(self):
        gen = np.random.default_rng(17)
        feats = gen.standard_normal((48, 10))
        schedule = MorphSchedule(n_final=12, steps=2, counts=(18, 18))
        base = morph(feats, schedule, Rng(21))
        for c in (1e-3, 1e3):
            scaled = morph(c * feats, schedule, Rng(21))
            assert scaled.assignment.tolist() == base.assignment.tolist()

    def test_invariants_under_fuzz(self):
        gen = np.random.default_rng(99)
        for _ in range(60):
            n = int(gen.integers(2, 80))
            d = int(gen.integers(1, 16))
            feats = gen.standard_normal((n, d)).astype(np.float32)
            schedule = random_schedule(gen, n)
            m = morph(feats, schedule, Rng(int(gen.integers(0, 2**63))))
            assert m.n_groups == schedule.n_final
            assert int(m.weights.sum()) == n
            assert (m.weights >= 1).all()

    def test_size_weighted_reps_match_group_means(self):
        # After a full run the internal running means must agree with the
        # flat per-group means; a deep collapse guarantees chained merges.
        from dtm.matching import SplitRule as SR
        from dtm.morphing import _morph_with_reps

        feats = np.random.default_rng(3).standard_normal((32, 5)).astype(np.float32)
        schedule = MorphSchedule(n_final=3, steps=2, counts=(15, 14))
        m, reps = _morph_with_reps(feats, schedule, Rng(2), SR.RANDOM, MorphConfig())
        np.testing.assert_allclose(reps, apply(m, feats.astype(np.float64)), rtol=1e-6)
        np.testing.assert_allclose(reps, oracle_group_means(m, feats), rtol=1e-6)

    def test_round_uniform_mode_differs_only_on_chained_merges(self):
        feats = np.random.default_rng(12).standard_normal((64, 6)).astype(np.float32)
        single = MorphSchedule(n_final=32, steps=1, counts=(32,))
        a = morph(feats, single, Rng(9), cfg=MorphConfig(IntermediateMean.SIZE_WEIGHTED))
        b = morph(feats, single, Rng(9), cfg=MorphConfig(IntermediateMean.ROUND_UNIFORM))
        # One round, no chains: identical groupings.
        assert a.assignment.tolist() == b.assignment.tolist()

    def test_group_ids_are_first_occurrence_ordered(self):
        gen = np.random.default_rng(31)
        feats = gen.standard_normal((40, 4)).astype(np.float32)
        schedule = MorphSchedule(n_final=10, steps=2, counts=(15, 15))
        m = morph(feats, schedule, Rng(8))
        seen = []
        for g in m.assignment:
            if g not in seen:
                seen.append(int(g))
        assert seen == list(range(m.n_groups))


class TestApply:
    def test_hand_mean(self):
        m = MorphingMatrix.from_assignment([0, 0, 1, 2])
        tokens = np.array([[1, 0], [0, 1], [2, 2], [4, 4]], dtype=np.float32)
        out = apply(m, tokens)
        np.testing.assert_array_equal(out, np.array([[0.5, 0.5], [2, 2], [4, 4]], dtype=np.float32))

    def test_identity_returns_input_exactly(self):
        tokens = np.random.default_rng(0).standard_normal((6, 3)).astype(np.float32)
        out = apply(MorphingMatrix.identity(6), tokens)
        np.testing.assert_array_equal(out, tokens)

    def test_matches_bruteforce_means(self):
        gen = np.random.default_rng(7)
        for _ in range(50):
            n = int(gen.integers(1, 50))
            k = int(gen.integers(1, n + 1))
            m = MorphingMatrix.from_assignment(random_assignment(gen, n, k))
            tokens = gen.standard_normal((n, int(gen.integers(1, 10)))).astype(np.float32)
            np.testing.assert_allclose(
                apply(m, tokens).astype(np.float64),
                oracle_group_means(m, tokens),
                rtol=1e-6,
                atol=1e-7,
            )

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            apply(MorphingMatrix.identity(3), np.ones((4, 2), dtype=np.float32))

    def test_dtype_follows_input(self):
        m = MorphingMatrix.from_assignment([0, 0])
        assert apply(m, np.ones((2, 2), dtype=np.float32)).dtype == np.float32
        assert apply(m, np.ones((2, 2), dtype=np.float64)).dtype == np.float64


class TestExpand:
    def test_broadcasts_group_rows(self):
        m = MorphingMatrix.from_assignment([0, 0, 1])
        morphed = np.array([[3, 3], [5, 5]], dtype=np.float32)
        np.testing.assert_array_equal(
            expand(m, morphed), np.array([[3, 3], [3, 3], [5, 5]], dtype=np.float32)
        )

    def test_identity_is_identity(self):
        morphed = np.random.default_rng(1).standard_normal((4, 2)).astype(np.float32)
        np.testing.assert_array_equal(expand(MorphingMatrix.identity(4), morphed), morphed)

    def test_apply_expand_apply_is_stable(self):
        gen = np.random.default_rng(13)
        m = MorphingMatrix.from_assignment(random_assignment(gen, 20, 6))
        tokens = gen.standard_normal((20, 4)).astype(np.float32)
        once = apply(m, tokens)
        np.testing.assert_array_equal(apply(m, expand(m, once)), once)

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            expand(MorphingMatrix.from_assignment([0, 0, 1]), np.ones((3, 2)))


class TestKmeansGrouping:
    def test_separated_blobs_recovered_exactly(self):
        # Two tight blobs around orthogonal directions; brute force over
        # all 2-partitions by within-group cosine cost picks the blobs.
        gen = np.random.default_rng(4)
        blob_a = np.array([1.0, 0.0, 0.0]) + 0.02 * gen.standard_normal((3, 3))
        blob_b = np.array([0.0, 1.0, 0.0]) + 0.02 * gen.standard_normal((3, 3))
        feats = np.vstack([blob_a, blob_b]).astype(np.float32)

        best_cost, best_mask = None, None
        for mask in range(1, 63):
            bits = [(mask >> i) & 1 for i in range(6)]
            if len(set(bits)) < 2:
                continue
            cost = 0.0
            for side in (0, 1):
                members = [i for i in range(6) if bits[i] == side]
                unit = feats[members] / np.linalg.norm(feats[members], axis=1, keepdims=True)
                centroid = unit.mean(axis=0)
                centroid /= np.linalg.norm(centroid)
                cost += float((1.0 - unit @ centroid).sum())
            if best_cost is None or cost < best_cost:
                best_cost, best_mask = cost, bits
        want = [best_mask[i] != best_mask[0] for i in range(6)]

        m = kmeans_grouping(feats, 2, 10, Rng(77))
        got = [int(g) != int(m.assignment[0]) for g in m.assignment]
        assert got == want
        assert want == [False, False, False, True, True, True]

    def test_n_groups_equals_n_gives_identity(self):
        feats = np.eye(5, dtype=np.float32)
        m = kmeans_grouping(feats, 5, 5, Rng(3))
        assert m.assignment.tolist() == [0, 1, 2, 3, 4]

    def test_single_group(self):
        feats = np.random.default_rng(2).standard_normal((7, 3)).astype(np.float32)
        m = kmeans_grouping(feats, 1, 3, Rng(1))
        assert m.weights.tolist() == [7]

    def test_invalid_ranges(self):
        feats = np.ones((3, 2), dtype=np.float32)
        with pytest.raises(InvalidRangeError):
            kmeans_grouping(feats, 0, 5, Rng(0))
        with pytest.raises(InvalidRangeError):
            kmeans_grouping(feats, 4, 5, Rng(0))
        with pytest.raises(InvalidRangeError):
            kmeans_grouping(feats, 2, 0, Rng(0))

    def test_deterministic_given_seed(self):
        feats = np.random.default_rng(6).standard_normal((30, 5)).astype(np.float32)
        a = kmeans_grouping(feats, 6, 10, Rng(9))
        b = kmeans_grouping(feats, 6, 10, Rng(9))
        assert a.assignment.tolist() == b.assignment.tolist()

    def test_all_groups_nonempty_under_fuzz(self):
        gen = np.random.default_rng(44)
        for _ in range(25):
            n = int(gen.integers(2, 40))
            k = int(gen.integers(1, n + 1))
            feats = gen.standard_normal((n, int(gen.integers(1, 8)))).astype(np.float32)
            m = kmeans_grouping(feats, k, 4, Rng(int(gen.integers(0, 2**63))))
            assert m.n_groups == k
            assert (m.weights >= 1).all()


class TestDownsampleGrouping:
    def test_full_pool(self):
        m = downsample_grouping(2, 2, 2)
        assert m.n_groups == 1
        assert m.weights.tolist() == [4]

    def test_two_by_two_blocks(self):
        m = downsample_grouping(4, 4, 2)
        assert m.n_groups == 4
        assert m.weights.tolist() == [4, 4, 4, 4]
        assert m.assignment.tolist() == [0, 0, 1, 1, 0, 0, 1, 1, 2, 2, 3, 3, 2, 2, 3, 3]

    def test_vit_grid(self):
        m = downsample_grouping(14, 14, 2)
        assert m.n_groups == 49
        assert (m.weights == 4).all()

    def test_indivisible(self):
        with pytest.raises(IndivisibleGridError):
            downsample_grouping(5, 4, 2)
