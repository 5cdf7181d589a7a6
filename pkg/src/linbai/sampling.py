"""The SAMPLE oracle: truncated-Gaussian rejection sampling and confidence.

A :class:`PosteriorSpec` describes N(mean, scale * V^-1).  Two supports are
handled by rejection: the alternative set of a target z (accept as soon as
the candidate's argmax differs from z) and a parameter ball (accept inside).
Exhausting the draw budget is a first-class signal, not an error: when no
candidate lands in the alternative after R_max draws, the incumbent is, with
high probability, very likely optimal under the posterior, and the caller
records the event.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp
from scipy.stats import norm

from . import kernels
from .errors import DegenerateTargetError, InputError, NumericalError
from .instances import Ball, ExplicitTargets, ThetaSpace, TopKTargets, Unbounded, argmax_oracle
from .linalg import SpdState, as_vector

DEFAULT_BUDGET = 1000


@dataclass(frozen=True)
class PosteriorSpec:
    """N(mean, scale * V^-1) with V held by an SpdState."""

    mean: np.ndarray
    precision_state: SpdState
    scale: float = 1.0

    def __post_init__(self):
        mean = as_vector(self.mean, self.precision_state.dim, "mean")
        object.__setattr__(self, "mean", mean)
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise InputError(f"scale must be positive and finite, got {self.scale}")

    def scaled_chol(self) -> np.ndarray:
        """Lower factor C with C C^T = scale * V^-1."""
        return math.sqrt(self.scale) * self.precision_state.chol_vinv()


@dataclass
class RejectionReport:
    sample: np.ndarray | None
    draws_used: int
    exhausted: bool


def sample_alternative(rng, spec: PosteriorSpec, targets, z_hat, budget: int = DEFAULT_BUDGET,
                       batch: int = kernels.DEFAULT_BATCH) -> RejectionReport:
    """Draw from N(mean, scale V^-1) until the draw's best target is not z_hat.

    Returns exhausted=True (no sample) after ``budget`` candidate draws.
    """
    if budget < 1:
        raise InputError(f"budget must be >= 1, got {budget}")
    chol = np.ascontiguousarray(spec.scaled_chol())
    if isinstance(targets, TopKTargets):
        sample, used = kernels.scan_topk(rng, spec.mean, chol, targets.mask(z_hat), budget, batch)
    else:
        sample, used = kernels.scan_explicit(
            rng, spec.mean, chol, targets.vectors, int(z_hat), budget, batch
        )
    if sample is not None:
        accepted, _ = argmax_oracle(targets, sample)
        z_ref = targets.check_key(z_hat) if isinstance(targets, TopKTargets) else int(z_hat)
        if accepted == z_ref:
            raise NumericalError("rejection scan accepted a sample whose argmax is still z_hat")
        return RejectionReport(sample, used, False)
    return RejectionReport(None, used, True)


def sample_theta_space(rng, spec: PosteriorSpec, theta_space: ThetaSpace,
                       budget: int = DEFAULT_BUDGET,
                       batch: int = kernels.DEFAULT_BATCH) -> RejectionReport:
    """Draw from N(mean, scale V^-1) restricted to the parameter space."""
    if budget < 1:
        raise InputError(f"budget must be >= 1, got {budget}")
    if isinstance(theta_space, Unbounded):
        theta = spec.precision_state.sample_gaussian(rng, spec.mean, spec.scale)
        return RejectionReport(theta, 1, False)
    if not isinstance(theta_space, Ball):
        raise InputError(f"unsupported theta space {theta_space!r}")
    chol = spec.scaled_chol()
    d = spec.mean.shape[0]
    used = 0
    while used < budget:
        n = min(batch, budget - used)
        cand = spec.mean + rng.standard_normal((n, d)) @ chol.T
        hits = np.flatnonzero(np.linalg.norm(cand, axis=1) <= theta_space.radius)
        if hits.size:
            return RejectionReport(cand[hits[0]].copy(), used + int(hits[0]) + 1, False)
        used += n
    return RejectionReport(None, used, True)


def is_exact_confidence(targets) -> bool:
    """True when posterior_confidence uses the closed-form two-target path."""
    return targets.n_targets == 2


def posterior_confidence(rng, spec: PosteriorSpec, targets, z_ref, n_draws: int = 1000) -> float:
    """P_{theta ~ N(mean, scale V^-1)}(argmax over targets == z_ref).

    Exactly Phi(<mean, v> / sqrt(scale v^T V^-1 v)) with v the difference of
    the two target vectors when |Z| = 2; Monte Carlo with ``n_draws`` draws
    otherwise.
    """
    if n_draws < 1:
        raise InputError(f"n_draws must be >= 1, got {n_draws}")
    if is_exact_confidence(targets):
        keys = list(targets.keys())
        z_ref_n = targets.check_key(z_ref) if isinstance(targets, TopKTargets) else int(z_ref)
        others = [k for k in keys if tuple(k) != tuple(z_ref_n)] if isinstance(targets, TopKTargets) \
            else [k for k in keys if k != z_ref_n]
        v = targets.vector(z_ref_n) - targets.vector(others[0])
        q = spec.scale * spec.precision_state.quad_norm(v, "vinv")
        if q <= 0:
            raise DegenerateTargetError("the two targets coincide; confidence undefined")
        x = float(spec.mean @ v) / math.sqrt(q)
        return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))
    d = spec.mean.shape[0]
    draws = spec.mean + rng.standard_normal((n_draws, d)) @ spec.scaled_chol().T
    if isinstance(targets, TopKTargets):
        mask = targets.mask(z_ref).astype(bool)
        wins = draws[:, mask].min(axis=1) > draws[:, ~mask].max(axis=1)
    else:
        wins = np.argmax(draws @ targets.vectors.T, axis=1) == int(z_ref)
    return float(wins.mean())


def alternative_log_tails(spec: PosteriorSpec, targets: ExplicitTargets, z_ref) -> tuple[float, float]:
    """Bounds on log P(argmax != z_ref) for explicit targets.

    Per competitor z, P(<theta, z - z_ref> > 0) has the exact log value
    log Phi(-g_z / sigma_z); the union of those events is bounded below by
    the largest single term and above by their sum, so

        lower = max_z log Phi(-g_z/sigma_z) <= log P(argmax != z_ref) <= logsumexp(...) = upper.

    Useful where 1 - confidence is far below Monte Carlo resolution.
    """
    if not isinstance(targets, ExplicitTargets):
        raise InputError("tail bounds are implemented for explicit target sets only")
    z_ref = int(z_ref)
    tails = []
    for k in targets.keys():
        if k == z_ref:
            continue
        v = targets.vector(z_ref) - targets.vector(k)
        q = spec.scale * spec.precision_state.quad_norm(v, "vinv")
        if q <= 0:
            raise DegenerateTargetError("duplicate target vector; tail undefined")
        g = float(spec.mean @ v)
        tails.append(float(norm.logsf(g / math.sqrt(q))))
    if not tails:
        raise DegenerateTargetError("no competitor targets")
    return max(tails), min(0.0, float(logsumexp(tails)))
