import pytest

from dtm import InvalidRangeError, Rng, SchedulerConfig, constant_counts, sample_schedule, sample_schedules


class TestConstantCounts:
    def test_halving_in_four_steps(self):
        assert constant_counts(196, 98, 4) == [24, 24, 24, 26]

    def test_zero_removal(self):
        assert constant_counts(196, 196, 3) == [0, 0, 0]

    def test_small_remainder(self):
        assert constant_counts(10, 3, 2) == [3, 4]

    def test_out_of_range(self):
        with pytest.raises(InvalidRangeError):
            constant_counts(10, 0, 2)
        with pytest.raises(InvalidRangeError):
            constant_counts(10, 11, 2)
        with pytest.raises(InvalidRangeError):
            constant_counts(10, 5, 0)

    def test_exhaustive_small(self):
        # Mirrors part of the acceptance sweep at reduced size.
        for n in range(1, 33):
            for n_final in range(1, n + 1):
                for steps in range(1, 15):
                    counts = constant_counts(n, n_final, steps)
                    assert len(counts) == steps
                    assert sum(counts) == n - n_final
                    assert min(counts) >= 0
                    assert max(counts) - min(counts) <= steps


class TestSampleSchedule:
    def test_contract(self):
        cfg = SchedulerConfig(n_min=1, k_max=14)
        s = sample_schedule(Rng(99), 196, cfg)
        assert 1 <= s.n_final <= 196
        assert 1 <= s.steps <= 14
        assert sum(s.counts) == 196 - s.n_final

    def test_degenerate_range(self):
        s = sample_schedule(Rng(5), 4, SchedulerConfig(n_min=4, k_max=14))
        assert s.n_final == 4
        assert all(c == 0 for c in s.counts)

    def test_invalid_n_min(self):
        with pytest.raises(InvalidRangeError):
            sample_schedule(Rng(0), 4, SchedulerConfig(n_min=5))

    def test_mean_matches_uniform_law(self):
        # Independent oracle: mean of U{1..20} by enumeration.
        expected = sum(range(1, 21)) / 20
        rng = Rng(0xABCDEF)
        cfg = SchedulerConfig(n_min=1, k_max=14)
        draws = 100_000
        acc = sum(sample_schedule(rng, 20, cfg).n_final for _ in range(draws))
        assert abs(acc / draws - expected) < 0.1

    def test_endpoints_are_reachable(self):
        rng = Rng(31337)
        cfg = SchedulerConfig(n_min=1, k_max=5)
        finals, steps = set(), set()
        for _ in range(3000):
            s = sample_schedule(rng, 8, cfg)
            finals.add(s.n_final)
            steps.add(s.steps)
        assert {1, 8} <= finals
        assert {1, 5} <= steps


class TestSampleSchedules:
    def test_draws_requested_count(self):
        cfg = SchedulerConfig(n_losses=2)
        assert len(sample_schedules(Rng(1), 50, cfg)) == 2
        assert len(sample_schedules(Rng(1), 50, SchedulerConfig(n_losses=1))) == 1

    def test_same_seed_same_schedules(self):
        cfg = SchedulerConfig()
        assert sample_schedules(Rng(7), 64, cfg) == sample_schedules(Rng(7), 64, cfg)

    def test_draws_are_sequential_off_one_stream(self):
        cfg = SchedulerConfig(n_losses=3)
        rng = Rng(123)
        batch = sample_schedules(rng, 64, cfg)
        ref = Rng(123)
        singles = [sample_schedule(ref, 64, cfg) for _ in range(3)]
        assert batch == singles
