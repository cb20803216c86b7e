import time

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dcfdelay.macmodel import (
    ConvergenceError,
    beta_backoff,
    beta_collision,
    saturation_capacity,
    saturation_throughput,
    slot_durations,
    slot_model,
    slot_probabilities,
    solve_attempt_probability,
)
from dcfdelay.params import InvalidParameterError, MacPhyParams


def backoff_curve_mp(p, w, m):
    """Uncancelled backoff-chain formula at 50 digits; limit taken at p=1/2."""
    mpmath.mp.dps = 50
    p = mpmath.mpf(p)
    if p == mpmath.mpf(1) / 2:
        return 2 / (w + 1 + mpmath.mpf(w) * m / 2)
    return 2 * (1 - 2 * p) / ((w + 1) * (1 - 2 * p) + p * w * (1 - (2 * p) ** m))


def grid_fixed_point(n, w, m, step=1e-7):
    """Brute-force oracle: argmin of |backoff - collision| over a uniform p grid."""
    p = np.arange(0.0, 1.0 + step / 2, step)
    x = 1.0 - 2.0 * p
    with np.errstate(invalid="ignore", divide="ignore"):
        b1 = 2.0 * x / ((w + 1) * x + p * w * (1.0 - (2.0 * p) ** m))
    b1[np.abs(x) < 1e-12] = 2.0 / (w + 1 + w * m / 2)
    b2 = 1.0 - (1.0 - p) ** (1.0 / (n - 1))
    k = int(np.nanargmin(np.abs(b1 - b2)))
    return p[k], b1[k]


class TestBackoffCurve:
    def test_endpoints(self):
        assert beta_backoff(0.0, 32, 5) == pytest.approx(2 / 33, rel=1e-15)
        assert beta_backoff(1.0, 32, 5) == pytest.approx(2 / 1025, rel=1e-15)

    @pytest.mark.parametrize("p", [0.1, 0.25, 0.4999, 0.5, 0.5001, 0.75, 0.9])
    @pytest.mark.parametrize("w,m", [(32, 5), (256, 2), (16, 0), (1024, 7)])
    def test_matches_high_precision(self, p, w, m):
        assert beta_backoff(p, w, m) == pytest.approx(float(backoff_curve_mp(p, w, m)), rel=1e-13)

    def test_quarter_value(self):
        # 1 / (16.5 + 7.75) = 4/97
        assert beta_backoff(0.25, 32, 5) == pytest.approx(4 / 97, rel=1e-15)
        assert 2 / 1025 < beta_backoff(0.25, 32, 5) < 2 / 33

    def test_continuous_at_half(self):
        mid = beta_backoff(0.5, 32, 5)
        assert beta_backoff(0.5 - 1e-9, 32, 5) == pytest.approx(mid, rel=1e-7)
        assert beta_backoff(0.5 + 1e-9, 32, 5) == pytest.approx(mid, rel=1e-7)

    @pytest.mark.parametrize("bad", [-1e-9, 1.0000001, float("nan")])
    def test_rejects_bad_probability(self, bad):
        with pytest.raises(InvalidParameterError):
            beta_backoff(bad, 32, 5)


class TestCollisionCurve:
    def test_examples(self):
        assert beta_collision(0.0, 10) == 0.0
        assert beta_collision(1.0, 10) == 1.0
        assert beta_collision(0.75, 3) == pytest.approx(0.5, rel=1e-15)

    def test_rejects_single_node(self):
        with pytest.raises(InvalidParameterError):
            beta_collision(0.3, 1)


@pytest.mark.parametrize("w,m,n", [(32, 5, 10), (256, 2, 10), (256, 2, 3)])
def test_curves_monotone_on_grid(w, m, n):
    grid = np.linspace(0.0, 1.0, 1000)
    b1 = np.array([beta_backoff(p, w, m) for p in grid])
    b2 = np.array([beta_collision(p, n) for p in grid])
    assert np.all(np.diff(b1) <= 0)
    assert np.all(np.diff(b2) >= 0)


class TestFixedPoint:
    def test_single_node(self, classic_params):
        assert solve_attempt_probability(1, classic_params) == (2 / 33, 0.0)

    @pytest.mark.parametrize("n", [2, 3, 5, 10, 20])
    def test_against_grid_oracle(self, n, classic_params):
        beta, p = solve_attempt_probability(n, classic_params)
        p_grid, beta_grid = grid_fixed_point(n, 32, 5)
        assert abs(p - p_grid) < 1e-6
        assert abs(beta - beta_grid) < 1e-6
        assert abs(beta_backoff(p, 32, 5) - beta_collision(p, n)) < 1e-12

    def test_beta_decreasing_in_n(self, classic_params, profile):
        for params in (classic_params, profile):
            betas = [solve_attempt_probability(n, params)[0] for n in range(2, 51)]
            assert all(b2 < b1 for b1, b2 in zip(betas, betas[1:]))

    def test_iteration_cap(self, classic_params):
        with pytest.raises(ConvergenceError):
            solve_attempt_probability(10, classic_params, tol=1e-300, max_iter=5)

    def test_bad_inputs(self, classic_params):
        with pytest.raises(InvalidParameterError):
            solve_attempt_probability(0, classic_params)
        with pytest.raises(InvalidParameterError):
            solve_attempt_probability(5, classic_params, tol=0.0)


class TestSlotProbabilities:
    def test_examples(self):
        assert slot_probabilities(0.0, 7) == (0.0, 1.0, 0.0)
        assert slot_probabilities(1.0, 2) == (0.0, 0.0, 1.0)
        p_s, p_i, p_c = slot_probabilities(0.1, 5)
        assert p_s == pytest.approx(0.32805, rel=1e-12)
        assert p_i == pytest.approx(0.59049, rel=1e-12)
        assert p_c == pytest.approx(0.08146, rel=1e-10)

    @given(st.floats(0.0, 1.0), st.integers(1, 200))
    def test_sum_to_one(self, beta, n):
        p_s, p_i, p_c = slot_probabilities(beta, n)
        assert abs(p_s + p_i + p_c - 1.0) <= 1e-12
        assert all(0.0 <= x <= 1.0 for x in (p_s, p_i, p_c))


class TestThroughput:
    def test_single_node_identity(self, profile):
        beta = 2 / (profile.w_min + 1)
        t_idle, t_s, _ = slot_durations(profile)
        assert saturation_throughput(1, profile) == pytest.approx(1 / (t_s + t_idle * (1 - beta) / beta), rel=1e-12)

    @pytest.mark.parametrize("n", [1, 2, 5, 10, 50, 100])
    def test_positive_and_bounded_by_success_rate(self, n, profile, classic_params):
        for params in (profile, classic_params):
            s = saturation_throughput(n, params)
            _, t_s, _ = slot_durations(params)
            assert s > 0
            assert s * t_s < 1 + 1e-12

    def test_slot_model_fields(self, profile):
        sm = slot_model(10, profile)
        assert sm.n == 10
        assert abs(sm.p_s + sm.p_i + sm.p_c - 1) <= 1e-12
        assert sm.t_success >= sm.t_collision >= sm.t_idle
        assert sm.throughput == saturation_throughput(10, profile)

    def test_capacity_is_s_at_reference(self, profile):
        assert saturation_capacity(profile, 10) == saturation_throughput(10, profile)
        assert saturation_capacity(profile) == saturation_throughput(10, profile)
        with pytest.raises(InvalidParameterError):
            saturation_capacity(profile, 1)

    def test_capacity_near_published_value(self, profile):
        assert saturation_capacity(profile) == pytest.approx(72.8, rel=0.05)

    def test_plateau(self, profile):
        s = [saturation_throughput(n, profile) for n in range(5, 51)]
        assert (max(s) - min(s)) / max(s) < 0.10
        c5, c20 = saturation_capacity(profile, 5), saturation_capacity(profile, 20)
        assert abs(c20 - c5) / c5 < 0.10

    def test_classic_window_does_not_plateau(self, classic_params):
        # why the shipped profile widens the window: W=32, m=5 sags well below 72.8
        s = [saturation_throughput(n, classic_params) for n in range(5, 51)]
        assert (max(s) - min(s)) / max(s) > 0.2
        assert saturation_capacity(classic_params) < 72.8 * 0.95

    def test_solver_is_fast(self, profile):
        start = time.perf_counter()
        for n in (2, 3, 5, 10, 20):
            solve_attempt_probability(n, profile)
        assert time.perf_counter() - start < 1.0


@settings(max_examples=50)
@given(st.integers(2, 60), st.sampled_from([16, 32, 64, 128, 256, 512]), st.integers(0, 7))
def test_fixed_point_residual_property(n, w, m):
    params = MacPhyParams(w_min=w, m_stages=m)
    beta, p = solve_attempt_probability(n, params)
    assert abs(beta_backoff(p, w, m) - beta_collision(p, n)) < 1e-12
    assert 0 <= p <= 1 and 0 <= beta <= 1
