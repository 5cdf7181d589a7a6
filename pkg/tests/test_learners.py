"""Hedge and AdaHedge learners.

The AdaHedge oracle below is written directly from the defining loss-side
recurrences (De Rooij et al., JMLR 2014) without looking at the package
implementation: weights w ~ exp(-eta * L) with eta = ln(K)/Delta, Delta
accumulating the per-step mixability gap.
"""
import logging
import math

import numpy as np
import pytest

from linbai.errors import InputError
from linbai.learners import AdaHedge, Hedge, adahedge_update, current_distribution, hedge_update


class _ReferenceAdaHedge:
    def __init__(self, k):
        self.k = k
        self.losses = np.zeros(k)
        self.delta = 0.0

    def weights(self):
        if self.delta <= 0.0:
            return np.full(self.k, 1.0 / self.k)
        eta = math.log(self.k) / self.delta
        w = np.exp(-eta * (self.losses - self.losses.min()))
        return w / w.sum()

    def update(self, gains):
        loss = -np.asarray(gains, dtype=np.float64)
        w = self.weights()
        h = float(w @ loss)
        if self.delta <= 0.0:
            m = float(loss.min())
        else:
            eta = math.log(self.k) / self.delta
            shifted = -eta * loss
            peak = shifted.max()
            m = -(peak + math.log(float(w @ np.exp(shifted - peak)))) / eta
        self.delta += max(0.0, h - m)
        self.losses += loss


# -- Hedge


def test_hedge_single_step_example():
    learner = Hedge(2, eta=math.log(2.0))
    learner.update(np.array([1.0, 0.0]))
    assert np.allclose(learner.distribution(), [2.0 / 3.0, 1.0 / 3.0], atol=1e-12)


def test_hedge_starts_uniform():
    assert np.allclose(Hedge(3, 0.7).distribution(), np.full(3, 1 / 3), atol=1e-12)


def test_hedge_constant_and_zero_gains_leave_distribution_fixed():
    learner = Hedge(4, eta=0.3)
    learner.update(np.array([0.5, -1.0, 2.0, 0.0]))
    before = learner.distribution()
    learner.update(np.zeros(4))
    assert np.allclose(learner.distribution(), before, atol=1e-12)
    learner.update(np.full(4, 3.7))
    assert np.allclose(learner.distribution(), before, atol=1e-12)


def test_hedge_regret_bound_holds_exactly():
    # regret <= ln(K)/eta + eta T G^2 / 2 on arbitrary bounded sequences
    rng = np.random.default_rng(6)
    for _ in range(100):
        k = int(rng.integers(2, 9))
        horizon = int(rng.integers(10, 1001))
        eta = float(rng.uniform(0.01, 2.0))
        bound = float(rng.uniform(0.5, 2.0))
        gains = rng.uniform(-bound, bound, size=(horizon, k))
        learner = Hedge(k, eta)
        earned = 0.0
        for g in gains:
            earned += float(learner.distribution() @ g)
            learner.update(g)
        regret = float(gains.sum(axis=0).max()) - earned
        assert regret <= math.log(k) / eta + eta * horizon * bound**2 / 2.0 + 1e-9


def test_hedge_distribution_always_normalized():
    rng = np.random.default_rng(1)
    learner = Hedge(5, 1.3)
    for _ in range(200):
        learner.update(rng.standard_normal(5) * 10)
        assert abs(learner.distribution().sum() - 1.0) < 1e-9


def test_hedge_no_overflow_at_extreme_log_weights():
    learner = Hedge(2, eta=1.0)
    for _ in range(10):
        learner.update(np.array([700.0, 0.0]))
    d = learner.distribution()
    assert np.all(np.isfinite(d)) and abs(d.sum() - 1.0) < 1e-12
    assert d[0] > 1.0 - 1e-12


def test_hedge_gain_bound_warns_but_does_not_clamp(caplog):
    learner = Hedge(2, eta=0.1, gain_bound=1.0)
    with caplog.at_level(logging.WARNING, logger="linbai.learners"):
        learner.update(np.array([5.0, 0.0]))
    assert any("exceed" in rec.message for rec in caplog.records)
    ref = Hedge(2, eta=0.1).update(np.array([5.0, 0.0]))
    assert np.allclose(learner.distribution(), ref.distribution())


def test_hedge_rejects_bad_input():
    learner = Hedge(3, 0.5)
    with pytest.raises(InputError):
        learner.update(np.array([1.0, np.nan, 0.0]))
    with pytest.raises(InputError):
        learner.update(np.ones(2))
    with pytest.raises(InputError):
        Hedge(3, eta=0.0)
    with pytest.raises(InputError):
        Hedge(0, eta=1.0)


# -- AdaHedge


def test_adahedge_matches_reference_on_random_streams():
    rng = np.random.default_rng(14)
    for _ in range(20):
        k = int(rng.integers(2, 7))
        learner = AdaHedge(k)
        ref = _ReferenceAdaHedge(k)
        scale = float(rng.uniform(0.1, 20.0))
        for _ in range(300):
            assert np.allclose(learner.distribution(), ref.weights(), atol=1e-10)
            g = rng.standard_normal(k) * scale
            learner.update(g)
            ref.update(g)
        assert abs(learner.mixability_gap_sum - ref.delta) < 1e-8 * max(1.0, ref.delta)


def test_adahedge_concentrates_on_persistent_winner():
    learner = AdaHedge(2)
    for _ in range(500):
        learner.update(np.array([1.0, 0.0]))
    assert learner.distribution()[0] > 0.99


def test_adahedge_translation_invariance():
    rng = np.random.default_rng(4)
    a, b = AdaHedge(3), AdaHedge(3)
    for _ in range(100):
        g = rng.standard_normal(3)
        a.update(g)
        b.update(g + 11.5)
        assert np.allclose(a.distribution(), b.distribution(), atol=1e-9)


def test_adahedge_stays_uniform_without_information():
    learner = AdaHedge(4)
    for _ in range(50):
        assert np.allclose(learner.distribution(), np.full(4, 0.25), atol=1e-12)
        learner.update(np.zeros(4))
    assert learner.mixability_gap_sum == 0.0


def test_adahedge_gaps_nonnegative_and_budget_monotone():
    rng = np.random.default_rng(10)
    learner = AdaHedge(5)
    prev = 0.0
    for _ in range(400):
        learner.update(rng.standard_normal(5) * rng.uniform(0, 50))
        assert learner.last_gap >= -1e-12
        assert learner.mixability_gap_sum >= prev
        prev = learner.mixability_gap_sum


def test_adahedge_handles_huge_gains_without_overflow():
    learner = AdaHedge(3)
    for _ in range(20):
        learner.update(np.array([1e6, 0.0, -1e6]))
        d = learner.distribution()
        assert np.all(np.isfinite(d)) and abs(d.sum() - 1.0) < 1e-9


def test_adahedge_rejects_non_finite():
    with pytest.raises(InputError):
        AdaHedge(2).update(np.array([np.inf, 0.0]))


# -- functional wrappers


def test_functional_wrappers_mutate_and_return_state():
    h = hedge_update(Hedge(2, math.log(2.0)), np.array([1.0, 0.0]))
    assert np.allclose(current_distribution(h), [2 / 3, 1 / 3])
    a = adahedge_update(AdaHedge(2), np.array([1.0, 0.0]))
    assert a.t == 1
    assert abs(current_distribution(a).sum() - 1.0) < 1e-12
