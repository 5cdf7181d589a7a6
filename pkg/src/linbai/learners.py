"""No-regret learners on the arm simplex.

Gains are the interface unit (the caller maximizes); AdaHedge negates
internally since its usual statement is in losses.

Hedge: multiplicative weights w_{t+1,x} ∝ w_{t,x} exp(eta * g_{t,x}) with a
fixed step. For any gain sequence with |g| <= G the standard analysis gives
regret <= ln(K)/eta + eta T G² / 2.

AdaHedge (De Rooij, Van Erven, Grünwald & Koolen, JMLR 2014): parameter-free
Hedge on losses l = -g.  With cumulative losses L and mixability budget
Delta, each step plays w ∝ exp(-eta (L - min L)) at eta = ln(K)/Delta
(uniform while Delta = 0), then accrues

    h = <w, l>                       (expected loss)
    m = -(1/eta) ln <w, exp(-eta l)> (mix loss; min_i l_i in the eta -> inf limit)
    delta = h - m >= 0               (mixability gap)
    Delta += delta,  L += l.
"""
from __future__ import annotations

import logging
import math

import numpy as np
from scipy.special import logsumexp

from .errors import InputError

logger = logging.getLogger(__name__)


def _check_gains(gains, n: int) -> np.ndarray:
    g = np.asarray(gains, dtype=np.float64)
    if g.shape != (n,):
        raise InputError(f"gains must have shape ({n},), got {g.shape}")
    if not np.all(np.isfinite(g)):
        raise InputError("gains contain non-finite entries")
    return g


class Hedge:
    """Fixed-step exponential weights over K arms."""

    def __init__(self, n_arms: int, eta: float, gain_bound: float | None = None):
        if n_arms < 1:
            raise InputError(f"n_arms must be >= 1, got {n_arms}")
        if not (eta > 0 and math.isfinite(eta)):
            raise InputError(f"eta must be positive and finite, got {eta}")
        self.n_arms = int(n_arms)
        self.eta = float(eta)
        self.gain_bound = gain_bound
        self.log_weights = np.zeros(self.n_arms) - math.log(self.n_arms)
        self.t = 0

    def update(self, gains) -> "Hedge":
        g = _check_gains(gains, self.n_arms)
        if self.gain_bound is not None and np.abs(g).max() > self.gain_bound:
            logger.warning(
                "hedge gains exceed configured bound: |g|=%.4g > %.4g",
                np.abs(g).max(),
                self.gain_bound,
            )
        self.log_weights += self.eta * g
        self.log_weights -= logsumexp(self.log_weights)
        self.t += 1
        return self

    def distribution(self) -> np.ndarray:
        w = np.exp(self.log_weights - self.log_weights.max())
        return w / w.sum()


class AdaHedge:
    """Step-size-free Hedge; see module docstring for the recurrences."""

    def __init__(self, n_arms: int):
        if n_arms < 1:
            raise InputError(f"n_arms must be >= 1, got {n_arms}")
        self.n_arms = int(n_arms)
        self.cumulative_gains = np.zeros(self.n_arms)
        self.mixability_gap_sum = 0.0
        self.last_gap = 0.0
        self.t = 0

    def _log_weights(self) -> np.ndarray:
        if self.mixability_gap_sum <= 0.0:
            return np.zeros(self.n_arms) - math.log(self.n_arms)
        eta = math.log(self.n_arms) / self.mixability_gap_sum
        lw = eta * (self.cumulative_gains - self.cumulative_gains.max())
        return lw - logsumexp(lw)

    def distribution(self) -> np.ndarray:
        return np.exp(self._log_weights())

    def update(self, gains) -> "AdaHedge":
        g = _check_gains(gains, self.n_arms)
        losses = -g
        lw = self._log_weights()
        w = np.exp(lw)
        expected = float(w @ losses)
        if self.mixability_gap_sum <= 0.0:
            mix = float(losses.min())
        else:
            eta = math.log(self.n_arms) / self.mixability_gap_sum
            mix = -float(logsumexp(lw - eta * losses)) / eta
        self.last_gap = expected - mix
        self.mixability_gap_sum += max(0.0, self.last_gap)
        self.cumulative_gains += g
        self.t += 1
        return self


Learner = Hedge | AdaHedge


def hedge_update(state: Hedge, gains) -> Hedge:
    return state.update(gains)


def adahedge_update(state: AdaHedge, gains) -> AdaHedge:
    return state.update(gains)


def current_distribution(state: Learner) -> np.ndarray:
    return state.distribution()
