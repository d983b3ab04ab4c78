"""Kernel-level checks: stable softmax, log-sum-exp, convex combination,
and simplex projection, each against closed forms, extended-precision
evaluation, or brute-force search.
"""

import math

import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings, strategies as st

from ceres.errors import DimensionMismatch, InvalidInput
from ceres.numeric import (
    convex_combine,
    is_simplex,
    log_sum_exp,
    simplex_project,
    softmax,
)

finite_vectors = st.lists(
    st.floats(min_value=-1e6, max_value=1e6, allow_nan=False), min_size=1, max_size=32
).map(np.array)


class TestSoftmax:
    def test_uniform_on_equal_scores(self):
        npt.assert_allclose(softmax([0.0, 0.0, 0.0], 1.0), np.full(3, 1 / 3), rtol=0, atol=0)

    @pytest.mark.parametrize("c", [-700.0, -3.5, 0.0, 123.456, 699.0])
    def test_shifted_log_two_ratio(self, c):
        w = softmax([c, c + math.log(2.0)], 1.0)
        npt.assert_allclose(w, [1 / 3, 2 / 3], atol=1e-15)

    def test_extreme_scores_underflow_cleanly(self):
        # Extended-precision oracle: weights of (1000, 0) at temperature 1.
        mpmath = pytest.importorskip("mpmath")
        mpmath.mp.dps = 500
        small = mpmath.exp(mpmath.mpf(-1000))
        w_small = small / (1 + small)
        assert mpmath.mpf("1e-435") < w_small < mpmath.mpf("1e-434")
        assert float(w_small) == 0.0  # below the float64 subnormal range
        assert float(1 / (1 + small)) == 1.0

        w = softmax([1000.0, 0.0], 1.0)
        npt.assert_array_equal(w, [1.0, 0.0])
        assert w.sum() == 1.0

    def test_million_entries_stay_on_simplex(self):
        rng = np.random.default_rng(42)
        scores = rng.normal(0, 50, size=1_000_000)
        w = softmax(scores, 0.7)
        assert is_simplex(w)

    @given(finite_vectors, st.floats(min_value=1e-3, max_value=1e3))
    @settings(max_examples=150, deadline=None)
    def test_output_is_simplex(self, scores, temperature):
        assert is_simplex(softmax(scores, temperature))

    @given(
        st.lists(st.integers(min_value=-(2**34), max_value=2**34), min_size=1,
                 max_size=16),
        st.integers(min_value=-716_800, max_value=716_800),
    )
    @settings(max_examples=200, deadline=None)
    def test_shift_invariance(self, grid_scores, grid_shift):
        # Dyadic grid: scores are multiples of 2^-30 in [-16, 16] and the
        # shift a multiple of 2^-10 in [-700, 700], so s + c is exact and
        # the invariance is a statement about the function, not about
        # float addition in the caller.
        s = np.array(grid_scores, dtype=np.float64) / 2.0**30
        c = grid_shift / 2.0**10
        npt.assert_allclose(softmax(s + c, 1.0), softmax(s, 1.0), rtol=0, atol=1e-14)

    def test_temperature_sharpens_argmax(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            s = rng.normal(size=6)
            j = int(rng.integers(6))
            s[j] = s.max() + rng.uniform(0.1, 2.0)  # unique max, real margin
            previous = -1.0
            for tau in (10.0, 3.0, 1.0, 0.3, 0.1, 0.03, 0.01, 1e-3, 1e-4):
                w = softmax(s, tau)
                assert w[j] >= previous - 1e-12
                previous = w[j]
            assert previous > 1 - 1e-10

    def test_rejects_bad_inputs(self):
        with pytest.raises(InvalidInput):
            softmax([], 1.0)
        with pytest.raises(InvalidInput):
            softmax([0.0, np.nan], 1.0)
        with pytest.raises(InvalidInput):
            softmax([0.0, np.inf], 1.0)
        with pytest.raises(InvalidInput):
            softmax([0.0, 1.0], 0.0)
        with pytest.raises(InvalidInput):
            softmax([0.0, 1.0], -2.0)


class TestLogSumExp:
    @given(st.floats(min_value=-1e300, max_value=1e300, allow_nan=False))
    @settings(max_examples=100, deadline=None)
    def test_single_element_exact(self, x):
        assert log_sum_exp([x]) == x

    def test_two_zeros(self):
        assert abs(log_sum_exp([0.0, 0.0]) - math.log(2.0)) < 1e-15

    def test_shift_identity_avoids_overflow(self):
        # lse(s + c) = lse(s) + c; at s = (0, 0), c = 1000 the naive sum
        # would overflow.
        assert log_sum_exp([1000.0, 1000.0]) == pytest.approx(
            1000.0 + log_sum_exp([0.0, 0.0]), abs=1e-12
        )

    def test_rejects_empty(self):
        with pytest.raises(InvalidInput):
            log_sum_exp([])


class TestConvexCombine:
    def test_single_token(self):
        v = np.array([1.0, -2.0, 3.0])
        npt.assert_array_equal(convex_combine([1.0], [v]), v)

    def test_identical_tokens(self):
        u = np.array([0.5, 0.25])
        npt.assert_allclose(convex_combine([0.5, 0.5], [u, u]), u, atol=1e-16)

    def test_direct_arithmetic(self):
        out = convex_combine([0.25, 0.75], [(0.0, 0.0), (4.0, 8.0)])
        npt.assert_array_equal(out, [3.0, 6.0])

    @given(
        st.integers(min_value=1, max_value=8),
        st.integers(min_value=1, max_value=5),
        st.integers(min_value=0, max_value=2**31),
    )
    @settings(max_examples=100, deadline=None)
    def test_output_in_coordinate_hull(self, n_tokens, dim, seed):
        rng = np.random.default_rng(seed)
        tokens = rng.normal(size=(n_tokens, dim))
        weights = rng.dirichlet(np.ones(n_tokens))
        out = convex_combine(weights, tokens)
        assert np.all(out <= tokens.max(axis=0) + 1e-12)
        assert np.all(out >= tokens.min(axis=0) - 1e-12)

    def test_errors(self):
        with pytest.raises(DimensionMismatch):
            convex_combine([0.5, 0.5], [np.zeros(2)])
        with pytest.raises(InvalidInput):
            convex_combine([], [])
        with pytest.raises(DimensionMismatch):
            convex_combine([0.5, 0.5], [np.zeros(2), np.zeros(3)])


def _brute_force_project_2d(v, step=1e-4):
    """Grid search over the 1-simplex; the independent projection oracle."""
    ks = np.arange(0, int(round(1 / step)) + 1)
    candidates = np.column_stack([ks * step, 1.0 - ks * step])
    dists = np.linalg.norm(candidates - np.asarray(v), axis=1)
    return candidates[int(np.argmin(dists))]


class TestSimplexProject:
    def test_identity_on_simplex_points(self):
        v = np.array([0.2, 0.3, 0.5])
        npt.assert_array_equal(simplex_project(v), v)

    def test_clamps_to_vertex(self):
        npt.assert_array_equal(simplex_project([2.0, 0.0]), [1.0, 0.0])

    def test_matches_grid_search_oracle(self):
        v = np.array([0.6, 0.6])
        expected = _brute_force_project_2d(v)  # -> (0.5, 0.5)
        npt.assert_allclose(expected, [0.5, 0.5], atol=1e-12)
        npt.assert_allclose(simplex_project(v), expected, atol=1e-4)

    @given(st.integers(min_value=0, max_value=2**31))
    @settings(max_examples=100, deadline=None)
    def test_double_projection_is_exact(self, seed):
        rng = np.random.default_rng(seed)
        v = rng.normal(0, 3, size=rng.integers(1, 10))
        once = simplex_project(v)
        assert is_simplex(once, atol=1e-9)
        npt.assert_array_equal(simplex_project(once), once)

    @given(st.integers(min_value=0, max_value=2**31))
    @settings(max_examples=60, deadline=None)
    def test_projection_is_nearest_feasible_point(self, seed):
        # The projection must be at least as close as any sampled point.
        rng = np.random.default_rng(seed)
        v = rng.normal(0, 2, size=4)
        p = simplex_project(v)
        others = rng.dirichlet(np.ones(4), size=256)
        assert np.linalg.norm(p - v) <= np.linalg.norm(others - v, axis=1).min() + 1e-12

    def test_rejects_empty(self):
        with pytest.raises(InvalidInput):
            simplex_project([])
