"""Recursive least squares against a dense ridge solve."""
import numpy as np
import pytest

from linbai.errors import InputError
from linbai.linalg import PosteriorState, SpdState


def _dense_ridge(xs, ys):
    # theta = (I + X^T X)^{-1} X^T y, recomputed from scratch
    d = xs.shape[1]
    a = np.eye(d) + xs.T @ xs
    return np.linalg.solve(a, xs.T @ ys)


def test_rls_matches_dense_ridge_along_trajectory():
    rng = np.random.default_rng(7)
    for d in (2, 4, 8):
        for _ in range(5):
            state = PosteriorState(d)
            xs = rng.standard_normal((200, d))
            ys = rng.standard_normal(200)
            for i in range(200):
                state.update(xs[i], float(ys[i]))
                ref = _dense_ridge(xs[: i + 1], ys[: i + 1])
                assert np.max(np.abs(state.theta_hat - ref)) < 1e-8


def test_rls_inverse_tracks_true_inverse():
    rng = np.random.default_rng(11)
    d = 5
    state = PosteriorState(d)
    xs = rng.standard_normal((300, d)) * 3.0
    for i in range(300):
        state.update(xs[i], float(rng.standard_normal()))
    v = np.eye(d) + xs.T @ xs
    assert np.allclose(state.spd.vinv, np.linalg.inv(v), atol=1e-8)
    assert np.allclose(state.spd.v, v, atol=1e-8)


def test_posterior_state_counts_and_copy_is_independent():
    rng = np.random.default_rng(0)
    state = PosteriorState(3)
    assert state.t == 0
    assert np.all(state.theta_hat == 0.0)
    for _ in range(4):
        state.update(rng.standard_normal(3), 1.0)
    clone = state.copy()
    clone.update(np.ones(3), -2.0)
    assert state.t == 4 and clone.t == 5
    assert not np.allclose(state.theta_hat, clone.theta_hat)


def test_spd_logdet_matches_slogdet():
    rng = np.random.default_rng(3)
    m = rng.standard_normal((4, 4))
    v = np.eye(4) + m @ m.T
    state = SpdState(v.copy())
    sign, ref = np.linalg.slogdet(v)
    assert sign > 0
    assert abs(state.logdet - ref) < 1e-10
    # rank-one updates keep the running logdet in sync
    for _ in range(20):
        x = rng.standard_normal(4)
        state.rank_one_update(x)
        v += np.outer(x, x)
        assert abs(state.logdet - np.linalg.slogdet(v)[1]) < 1e-8


def test_quad_norm_both_metrics():
    rng = np.random.default_rng(5)
    m = rng.standard_normal((6, 6))
    v = np.eye(6) + m @ m.T
    state = SpdState(v.copy())
    for _ in range(10):
        x = rng.standard_normal(6)
        assert abs(state.quad_norm(x) - x @ v @ x) < 1e-10
        assert abs(state.quad_norm(x, matrix="vinv") - x @ np.linalg.solve(v, x)) < 1e-10
    with pytest.raises(InputError):
        state.quad_norm(np.ones(6), matrix="q")


def test_sample_gaussian_moments_and_determinism():
    # N(mean, scale * V^{-1}): check first/second moments on a long stream
    rng = np.random.default_rng(21)
    v = np.diag([4.0, 1.0])
    state = SpdState(v.copy())
    mean = np.array([1.0, -2.0])
    draws = np.stack([state.sample_gaussian(rng, mean, 2.0) for _ in range(20000)])
    assert np.allclose(draws.mean(axis=0), mean, atol=0.05)
    cov = np.cov(draws.T)
    assert np.allclose(cov, 2.0 * np.linalg.inv(v), atol=0.1)
    a = np.stack([SpdState(v.copy()).sample_gaussian(np.random.default_rng(9), mean, 1.0) for _ in range(3)])
    b = np.stack([SpdState(v.copy()).sample_gaussian(np.random.default_rng(9), mean, 1.0) for _ in range(3)])
    assert np.array_equal(a, b)


def test_long_trajectory_stays_accurate_through_refactor():
    # enough steps to pass several re-factorization points
    rng = np.random.default_rng(13)
    d = 4
    state = PosteriorState(d)
    xs = rng.standard_normal((5000, d))
    ys = xs @ np.array([1.0, 0.0, -1.0, 0.5]) + rng.standard_normal(5000)
    for i in range(5000):
        state.update(xs[i], float(ys[i]))
    ref = _dense_ridge(xs, ys)
    assert np.max(np.abs(state.theta_hat - ref)) < 1e-8


def test_update_rejects_non_finite():
    state = PosteriorState(2)
    with pytest.raises(InputError):
        state.update(np.array([np.nan, 0.0]), 1.0)
    with pytest.raises(InputError):
        state.update(np.array([1.0, 0.0]), float("inf"))


def test_update_rejects_wrong_shape():
    state = PosteriorState(3)
    with pytest.raises(InputError):
        state.update(np.ones(2), 0.0)
