"""Memory-bank checks: FIFO mechanics, the clamped-similarity weighting,
both deviation bounds, and the convergence experiment on generators with
known means.
"""

import math

import numpy as np
import numpy.testing as npt
import pytest

from ceres import membank as mb
from ceres.errors import (
    DimensionMismatch,
    InvalidInput,
    InvalidState,
    TimeOrderError,
)
from ceres.rng import stream


def filled_bank(gen, window=5, kappa=1.0, dim=4, scale=1.0):
    bank = mb.MemoryBank(capacity=window, kappa=kappa)
    for t in range(window):
        bank = mb.push(bank, scale * gen.normal(size=dim), t)
    return bank


class TestPush:
    def test_first_push(self):
        bank = mb.push(mb.MemoryBank(capacity=3, kappa=1.0), np.ones(2), 0)
        assert bank.count == 1
        assert bank.times == (0,)

    def test_eviction_after_capacity(self):
        bank = mb.MemoryBank(capacity=3, kappa=1.0)
        for t in range(4):
            bank = mb.push(bank, np.full(2, float(t)), t)
        assert bank.count == 3
        assert bank.times == (1, 2, 3)

    def test_hundred_pushes_window_five(self):
        bank = mb.MemoryBank(capacity=5, kappa=1.0)
        for t in range(1, 101):
            bank = mb.push(bank, np.array([float(t)]), t)
        assert bank.times == (96, 97, 98, 99, 100)

    def test_fifo_keeps_last_pushed_times(self):
        gen = stream(50, 0)
        for trial in range(20):
            capacity = int(gen.integers(1, 6))
            n_pushes = int(gen.integers(0, 12))
            times = sorted(gen.choice(1000, size=n_pushes, replace=False).tolist())
            bank = mb.MemoryBank(capacity=capacity, kappa=0.7)
            for t in times:
                bank = mb.push(bank, gen.normal(size=3), t)
            assert list(bank.times) == times[-min(n_pushes, capacity):]

    def test_time_must_increase(self):
        bank = mb.push(mb.MemoryBank(capacity=3, kappa=1.0), np.ones(2), 5)
        with pytest.raises(TimeOrderError):
            mb.push(bank, np.ones(2), 5)
        with pytest.raises(TimeOrderError):
            mb.push(bank, np.ones(2), 4)

    def test_dim_must_match(self):
        bank = mb.push(mb.MemoryBank(capacity=3, kappa=1.0), np.ones(2), 0)
        with pytest.raises(DimensionMismatch):
            mb.push(bank, np.ones(3), 1)

    def test_capacity_and_kappa_validated(self):
        with pytest.raises(InvalidInput):
            mb.MemoryBank(capacity=0, kappa=1.0)
        with pytest.raises(InvalidInput):
            mb.MemoryBank(capacity=2, kappa=0.0)


class TestContext:
    def test_single_slot(self):
        vec = np.array([1.0, -2.0])
        bank = mb.push(mb.MemoryBank(capacity=4, kappa=1.0), vec, 0)
        out, w = mb.context(bank, np.array([3.0, 3.0]))
        npt.assert_array_equal(out, vec)
        npt.assert_array_equal(w, [1.0])

    def test_vanishing_clamp_gives_slot_mean(self):
        gen = stream(51, 0)
        bank = filled_bank(gen, window=5, kappa=1e-12, dim=3, scale=4.0)
        out, w = mb.context(bank, gen.normal(size=3))
        assert np.abs(w - 0.2).max() <= 1e-9
        npt.assert_allclose(out, bank.embeddings.mean(axis=0), atol=1e-9)

    def test_empty_bank_passthrough(self):
        current = np.array([0.5, 0.7])
        out, w = mb.context(mb.MemoryBank(capacity=5, kappa=1.0), current)
        npt.assert_array_equal(out, current)
        assert w.size == 0

    def test_deterministic(self):
        gen = stream(52, 0)
        bank = filled_bank(gen, window=4, kappa=0.8)
        current = gen.normal(size=4)
        out1, w1 = mb.context(bank, current)
        out2, w2 = mb.context(bank, current)
        npt.assert_array_equal(out1, out2)
        npt.assert_array_equal(w1, w2)

    def test_output_in_hull_of_slots(self):
        gen = stream(53, 0)
        for _ in range(20):
            bank = filled_bank(gen, window=5, kappa=2.0, dim=3, scale=2.0)
            out, w = mb.context(bank, gen.normal(size=3))
            emb = bank.embeddings
            assert np.all(out <= emb.max(axis=0) + 1e-12)
            assert np.all(out >= emb.min(axis=0) - 1e-12)
            assert abs(w.sum() - 1.0) <= 1e-12

    def test_score_offset_hook_respects_clamp(self):
        gen = stream(54, 0)
        # Small embeddings keep raw similarities inside the clamp, so a
        # moderate offset visibly moves the weights.
        bank = filled_bank(gen, window=3, kappa=0.5, scale=0.05)
        current = gen.normal(size=4)
        _, w_plain = mb.context(bank, current)
        _, w_offset = mb.context(bank, current, score_offset=[0.3, 0.0, -0.3])
        assert not np.array_equal(w_plain, w_offset)
        # Offsets feed the clamp, so even huge ones cannot break the
        # per-coordinate weight range.
        _, w_huge = mb.context(bank, current, score_offset=[100.0, 0.0, -100.0])
        assert w_huge.min() >= math.exp(-2 * 0.5) / 3 - 1e-15
        assert w_huge.max() <= math.exp(2 * 0.5) / 3 + 1e-15

    def test_dim_mismatch(self):
        gen = stream(55, 0)
        bank = filled_bank(gen, window=2, kappa=1.0, dim=4)
        with pytest.raises(DimensionMismatch):
            mb.context(bank, np.zeros(3))
        with pytest.raises(DimensionMismatch):
            mb.context(bank, gen.normal(size=4), score_offset=[1.0])


class TestWeightDeviation:
    def test_vanishing_clamp_is_near_uniform(self):
        gen = stream(56, 0)
        bank = filled_bank(gen, window=5, kappa=1e-12, dim=4, scale=3.0)
        report = mb.weight_deviation(bank, gen.normal(size=4))
        assert report.max_deviation <= 1e-9
        assert report.per_coord_ok
        # The 1/W-scaled L1 bound fails here even at a vanishing clamp
        # (a 2-vs-3 saturation pattern yields L1 ~ 0.96 * 2*kappa against
        # a bound of 0.8 * 2*kappa); it is reported, never asserted.
        assert report.l1_deviation <= np.exp(2 * bank.kappa) - 1.0 + 1e-15

    def test_two_slot_hand_evaluation(self):
        # Similarities forced to (+kappa, -kappa) at kappa = 0.5: the
        # weights are softmax(0.5, -0.5) and everything below follows by
        # scalar arithmetic.
        kappa = 0.5
        e = math.exp(1.0)
        w1 = e / (1.0 + e)  # exp(0.5)/(exp(0.5)+exp(-0.5)) = e/(1+e)
        expected_dev = abs(w1 - 0.5)
        assert expected_dev == pytest.approx(0.2311, abs=1e-4)
        provable = (math.exp(2 * kappa) - 1.0) / 2
        assert provable == pytest.approx(0.8591, abs=1e-4)

        bank = mb.MemoryBank(capacity=2, kappa=kappa)
        bank = mb.push(bank, np.array([10.0, 0.0]), 0)   # clamps to +kappa
        bank = mb.push(bank, np.array([-10.0, 0.0]), 1)  # clamps to -kappa
        report = mb.weight_deviation(bank, np.array([1.0, 0.0]))
        assert report.max_deviation == pytest.approx(expected_dev, abs=1e-12)
        assert report.per_coord_bound == pytest.approx(provable, abs=1e-12)
        assert report.per_coord_ok

    def test_random_draws_never_break_provable_bound(self):
        window, kappa = 5, 1.0
        lower = math.exp(-2 * kappa) / window
        upper = math.exp(2 * kappa) / window
        l1_passes = 0
        n = 1000
        for i in range(n):
            gen = stream(57, i)
            bank = filled_bank(gen, window=window, kappa=kappa, dim=6, scale=2.0)
            report = mb.weight_deviation(bank, gen.normal(size=6))
            assert report.per_coord_ok
            assert report.weights.min() >= lower - 1e-15
            assert report.weights.max() <= upper + 1e-15
            l1_passes += report.scaled_l1_ok
        # The 1/W-scaled L1 bound is expected to fail often; it is
        # reported, never asserted.
        assert 0 <= l1_passes <= n

    def test_underfull_bank_rejected(self):
        gen = stream(58, 0)
        bank = mb.push(mb.MemoryBank(capacity=3, kappa=1.0), gen.normal(size=2), 0)
        with pytest.raises(InvalidState):
            mb.weight_deviation(bank, np.zeros(2))

    def test_report_serializes_to_json(self):
        import json

        gen = stream(59, 0)
        bank = filled_bank(gen, window=3, kappa=0.7, dim=4)
        report = mb.weight_deviation(bank, gen.normal(size=4))
        doc = mb.deviation_to_json(report)
        text = json.dumps(doc)  # must be JSON-native throughout
        assert json.loads(text)["per_coord_ok"] is True
        assert len(doc["weights"]) == 3


class TestConvergenceExperiment:
    GRID = (4, 16, 64, 256)

    def test_point_mass_has_zero_error(self):
        frames = mb.PointMassFrames(mean=np.array([1.0, -2.0]))
        result = mb.convergence_experiment(frames, self.GRID, range(10), kappa=1.0)
        for row in result.rows:
            assert row.mean_err_unweighted == 0.0
            assert row.mean_err_weighted == 0.0

    def test_lln_rate_for_gaussian_frames(self):
        frames = mb.GaussianFrames(mean=np.zeros(8), scale=1.0)
        result = mb.convergence_experiment(
            frames, (4, 16, 64, 256, 1024), range(80), kappa=1.0
        )
        assert -0.7 <= result.slope_unweighted <= -0.3
        errs = [r.mean_err_unweighted for r in result.rows]
        assert all(b < a for a, b in zip(errs, errs[1:]))

    def test_weighted_gap_envelope_and_decrease(self):
        kappa = 1.0
        frames = mb.GaussianFrames(mean=np.zeros(6), scale=1.0)
        result = mb.convergence_experiment(frames, self.GRID, range(120), kappa=kappa)
        envelope = math.exp(2 * kappa) - 1.0
        gaps = [r.mean_weighted_minus_unweighted for r in result.rows]
        sems = [r.sem_weighted_minus_unweighted for r in result.rows]
        for row, gap in zip(result.rows, gaps):
            assert gap <= envelope * row.mean_max_norm
        for i in range(len(gaps) - 1):
            assert gaps[i + 1] <= gaps[i] + 3 * (sems[i] + sems[i + 1])

    def test_nonzero_mean_recovered(self):
        mean = np.array([2.0, -1.0, 0.5])
        frames = mb.GaussianFrames(mean=mean, scale=0.5)
        result = mb.convergence_experiment(frames, self.GRID, range(40), kappa=0.5)
        last = result.rows[-1]
        assert last.mean_err_unweighted < 0.2

    def test_grid_validation(self):
        frames = mb.GaussianFrames(mean=np.zeros(2))
        with pytest.raises(InvalidInput):
            mb.convergence_experiment(frames, (4, 16, 8, 32), range(5), kappa=1.0)
        with pytest.raises(InvalidInput):
            mb.convergence_experiment(frames, (4, 16, 64), range(5), kappa=1.0)
