"""Pure NumPy implementations of the hot kernels.

Drop-in twin of the compiled extension ``linbai._kernels``: same function
names, same argument conventions, and — crucially — the same random-stream
consumption.  Candidate draws are generated in batches of
``min(batch, budget - used)`` rows, row-major, so a given Generator state
yields the same candidate sequence under either backend.

``draws_used`` counts candidate rows *examined* (the accepted row included),
not rows generated; surplus rows in the accepting batch are discarded but
their stream consumption is identical across backends.
"""
from __future__ import annotations

import numpy as np

BACKEND_NAME = "python"


def scan_explicit(rng, mean, chol, targets, z_hat, budget, batch):
    """Rejection scan over N(mean, chol chol^T) until argmax_z <z,theta> != z_hat.

    Returns ``(sample | None, draws_used)``; ``None`` means the budget was
    exhausted without an acceptable candidate.
    """
    d = mean.shape[0]
    used = 0
    while used < budget:
        n = min(batch, budget - used)
        cand = mean + rng.standard_normal((n, d)) @ chol.T
        best = np.argmax(cand @ targets.T, axis=1)
        hits = np.flatnonzero(best != z_hat)
        if hits.size:
            return cand[hits[0]].copy(), used + int(hits[0]) + 1
        used += n
    return None, used


def scan_topk(rng, mean, chol, in_mask, budget, batch):
    """Rejection scan accepting theta whose top-k set differs from ``in_mask``.

    The top-k set changes iff some excluded coordinate strictly exceeds some
    included one, i.e. max(theta[~mask]) > min(theta[mask]).
    """
    d = mean.shape[0]
    inside = in_mask.astype(bool)
    outside = ~inside
    used = 0
    while used < budget:
        n = min(batch, budget - used)
        cand = mean + rng.standard_normal((n, d)) @ chol.T
        hits = np.flatnonzero(cand[:, outside].max(axis=1) > cand[:, inside].min(axis=1))
        if hits.size:
            return cand[hits[0]].copy(), used + int(hits[0]) + 1
        used += n
    return None, used


def sm_update(v, vinv, x):
    """Rank-one update V += x x^T with Sherman-Morrison downdate of V^{-1}.

    In place; returns c = x^T V^{-1}_old x (caller folds log1p(c) into logdet).
    """
    u = vinv @ x
    c = float(x @ u)
    vinv -= np.outer(u, u) / (1.0 + c)
    vinv += vinv.T.copy()
    vinv *= 0.5
    v += np.outer(x, x)
    return c


def rls_update(v, vinv, s, theta, x, y):
    """Fused recursive least-squares step.

    Updates, in place: theta via the rank-one correction
    theta += V^{-1}_old x (y - x^T theta) / (1 + x^T V^{-1}_old x),
    then s += y x, V += x x^T and the Sherman-Morrison inverse.
    Returns c = x^T V^{-1}_old x.
    """
    u = vinv @ x
    c = float(x @ u)
    resid = (float(y) - float(x @ theta)) / (1.0 + c)
    theta += u * resid
    s += float(y) * x
    vinv -= np.outer(u, u) / (1.0 + c)
    vinv += vinv.T.copy()
    vinv *= 0.5
    v += np.outer(x, x)
    return c
