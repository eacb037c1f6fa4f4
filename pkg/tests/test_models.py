import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, stats

from settrack.models import (ModelParams, ObjectState, clutter_likelihood, detect_likelihood,
                             not_false_probability, step_object, step_states)


def test_defaults_match_pets_column(params):
    assert params.birth_rate == 0.0
    assert params.death_rate == 0.02
    assert params.dash_power_sigma == 1.0
    assert params.false_rate == 6.0
    assert params.miss_rate == 2.0
    assert params.dt == 0.14
    np.testing.assert_array_equal(params.obs_cov, 0.5 * np.eye(2))
    assert (params.assign_threshold, params.fm_threshold) == (0.1, 0.001)
    assert (params.gamma_alpha0, params.gamma_beta0) == (2.0, 1.0)
    assert (params.n_particles, params.max_em_steps, params.report_conf) == (128, 10, 0.4)
    assert (params.bbox_area_min, params.bbox_area_max) == (0.5, 2.5)


@pytest.mark.parametrize("bad", [
    dict(death_rate=-1.0), dict(dt=0.0), dict(n_particles=0), dict(obs_cov=[[1, 2], [2, 1]]),
    dict(bbox_area_min=3.0), dict(arena=(0, 0, 0, 5)), dict(assign_threshold=1.5),
])
def test_invalid_params_rejected(bad):
    with pytest.raises(ValueError):
        ModelParams(**bad)


def test_scalar_obs_cov_is_isotropic():
    np.testing.assert_array_equal(ModelParams(obs_cov=0.25).obs_cov, 0.25 * np.eye(2))


def test_step_zero_accel_moves_linearly(rng):
    p = ModelParams(dash_power_sigma=0.0, dt=1.0)
    assert step_object((0, 0, 1, 0), p, rng) == ObjectState(1.0, 0.0, 1.0, 0.0)


@given(st.floats(0.01, 5.0), st.floats(-10, 10), st.floats(-10, 10))
def test_step_stationary_stays_put(dt, x, y):
    p = ModelParams(dash_power_sigma=0.0, dt=dt)
    s = step_object((x, y, 0, 0), p, np.random.default_rng(0))
    assert s == ObjectState(x, y, 0.0, 0.0)


@given(st.floats(0.01, 2.0), st.floats(-3, 3), st.floats(-3, 3))
def test_step_without_noise_is_linear_in_dt(dt, vx, vy):
    p1 = ModelParams(dash_power_sigma=0.0, dt=dt)
    p2 = ModelParams(dash_power_sigma=0.0, dt=2 * dt)
    a = step_object((1.0, 2.0, vx, vy), p1, np.random.default_rng(0))
    b = step_object((1.0, 2.0, vx, vy), p2, np.random.default_rng(0))
    assert b.x - 1.0 == pytest.approx(2 * (a.x - 1.0), abs=1e-12)
    assert b.y - 2.0 == pytest.approx(2 * (a.y - 2.0), abs=1e-12)


def test_velocity_spread_matches_closed_form():
    p = ModelParams(dash_power_sigma=1.0, dt=0.14)
    out = step_states(np.zeros((100_000, 4)), p, np.random.default_rng(7))
    # var(p cos theta) = sigma^2 / 2, so std(vx) = tau / sqrt(2)
    target = 0.14 / math.sqrt(2)
    se = target / math.sqrt(2 * (len(out) - 1))
    assert abs(out[:, 2].std() - target) < 3 * se
    # position gains half the acceleration times tau^2
    assert out[:, 0].std() == pytest.approx(0.5 * 0.14 ** 2 / math.sqrt(2), rel=0.02)


def test_detect_likelihood_values(params):
    # Beta(1 | 2, 1) = 2 times the peak 1 / (2 pi sqrt(det 0.5 I)) = 1 / pi
    assert detect_likelihood((0, 0, 1.0), (0, 0, 0, 0), params) == pytest.approx(2 / math.pi, rel=1e-12)
    assert detect_likelihood((1, 0, 0.5), (0, 0, 0, 0), params) == pytest.approx(0.1170996630, rel=1e-9)
    assert detect_likelihood((3, 4, 0.0), (3, 4, 0, 0), params) == 0.0


def test_detect_likelihood_agrees_with_scipy():
    p = ModelParams(obs_cov=[[0.7, 0.2], [0.2, 0.4]])
    want = stats.beta(2, 1).pdf(0.3) * stats.multivariate_normal([1.0, -1.0], p.obs_cov).pdf([1.4, -0.5])
    assert detect_likelihood((1.4, -0.5, 0.3), (1.0, -1.0, 5, 5), p) == pytest.approx(want, rel=1e-12)


@given(st.floats(-5, 5), st.floats(-5, 5))
def test_detect_likelihood_ignores_velocity(vx, vy):
    p = ModelParams()
    o = (2.0, 3.0, 0.7)
    assert detect_likelihood(o, (2.5, 2.0, vx, vy), p) == detect_likelihood(o, (2.5, 2.0, 0, 0), p)


def test_clutter_likelihood_values():
    p = ModelParams(arena=(0, 0, 20, 15))
    assert clutter_likelihood((5, 5, 0.0), p) == pytest.approx(2 / 300)
    assert clutter_likelihood((5, 5, 1.0), p) == 0.0
    assert clutter_likelihood((25, 5, 0.2), p) == 0.0


def test_detect_likelihood_integrates_to_one():
    p = ModelParams(obs_cov=[[0.5, 0.1], [0.1, 0.3]])
    s = (1.0, 2.0, 0.0, 0.0)
    h = 0.05
    xs = np.arange(-4, 6, h) + h / 2
    ys = np.arange(-3, 7, h) + h / 2
    cs = np.arange(0, 1, 0.01) + 0.005
    X, Y = np.meshgrid(xs, ys)
    dets = np.column_stack((X.ravel(), Y.ravel(), np.full(X.size, 1.0)))
    from settrack.models import loglik_matrix
    spatial = np.exp(loglik_matrix(np.array([s]), dets, p))[0] / 2.0  # strip Beta(1 | 2, 1) = 2
    total = spatial.sum() * h * h * (2 * cs).sum() * 0.01
    assert total == pytest.approx(1.0, abs=1e-3)


def test_clutter_likelihood_integrates_to_one():
    p = ModelParams(arena=(0, 0, 4, 3))
    val, _ = integrate.quad(lambda c: clutter_likelihood((1, 1, c), p), 0, 1)
    assert val * p.arena_area == pytest.approx(1.0, abs=1e-3)


@pytest.mark.parametrize("c", [0.0, 0.5, 1.0, 0.123])
def test_not_false_probability_is_identity(c):
    assert not_false_probability(c) == c


def test_not_false_probability_range():
    with pytest.raises(ValueError):
        not_false_probability(1.2)
