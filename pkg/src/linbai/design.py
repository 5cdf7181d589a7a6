"""Convex design computations.

Three related pieces:

* :func:`g_optimal` — the design minimizing worst-case leverage
  max_x ||x||^2_{A(lambda)^-1}.  By Kiefer-Wolfowitz equivalence the optimal
  value equals d, which provides a built-in optimality certificate.
* :func:`best_response` — exact projection of a reference parameter onto the
  halfspace where a competitor target beats the incumbent, in the A(lambda)
  metric.  From the KKT conditions of
  min ½||theta - theta_ref||²_A  s.t.  <v, theta> <= 0,  v = z* - z:
  if <theta_ref, v> <= 0 the constraint is slack (value 0); otherwise the
  minimizer is theta_ref - (g / v^T A^-1 v) A^-1 v with value
  g² / (2 v^T A^-1 v), sitting exactly on the boundary <v, theta> = 0.
* :func:`tau_star` — Frank-Wolfe ascent on the concave piecewise-min game
  value max_lambda min_z best_response(lambda, ..., z), with a duality gap
  from the linearization of the binding component.

Everything here treats the parameter space as all of R^d (projections onto
halfspaces intersected with a ball have no closed form and are out of scope).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.optimize

from .errors import DegenerateTargetError, InputError, NumericalError, RankError
from .instances import ExplicitTargets, Instance, TopKTargets
from .linalg import as_matrix, as_vector

_RIDGE = 1e-10
_WEIGHT_CLAMP = -1e-12


def check_weights(weights, n_arms: int | None = None) -> np.ndarray:
    """Validate a simplex point: clamps dust-level negatives, rejects the rest."""
    w = as_vector(weights, n_arms, "weights")
    if np.any(w < _WEIGHT_CLAMP):
        raise InputError(f"weights contain negative entries below {_WEIGHT_CLAMP}")
    w = np.maximum(w, 0.0)
    total = float(w.sum())
    if abs(total - 1.0) > 1e-9:
        raise InputError(f"weights must sum to 1 within 1e-9, got {total}")
    return w


def design_matrix(arms, weights) -> np.ndarray:
    arms = as_matrix(arms, name="arms")
    w = check_weights(weights, arms.shape[0])
    return np.einsum("i,ij,ik->jk", w, arms, arms)


def _inverse_spd(a: np.ndarray) -> np.ndarray:
    d = a.shape[0]
    try:
        cf = scipy.linalg.cho_factor(a + _RIDGE * np.eye(d), lower=True, check_finite=False)
        inv = scipy.linalg.cho_solve(cf, np.eye(d), check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise NumericalError(f"design matrix is not positive definite: {exc}") from exc
    return (inv + inv.T) * 0.5


def leverages(arms: np.ndarray, a_inv: np.ndarray) -> np.ndarray:
    return np.einsum("ij,jk,ik->i", arms, a_inv, arms)


def g_optimal(arms, tol: float = 1e-3, max_iters: int = 100_000) -> np.ndarray:
    """Design weights with max leverage <= d (1 + tol).

    Multiplicative reweighting (each weight scaled by leverage / d) mixed
    with pairwise exchange steps that shift mass from the lowest-leverage
    support point to the highest-leverage arm; the exchange can zero out
    weights exactly, which the multiplicative rule alone only does in the
    limit.  The exchange step size maximizes the rank-two determinant
    update det(A) [(1 + t a)(1 - t b) + t² c²] at t* = (a - b)/(2(ab - c²)).
    """
    arms = as_matrix(arms, name="arms")
    if tol <= 0:
        raise InputError(f"tol must be positive, got {tol}")
    n, d = arms.shape
    if np.linalg.matrix_rank(arms) < d:
        raise RankError(f"arms must span R^{d} (rank {np.linalg.matrix_rank(arms)})")
    w = np.full(n, 1.0 / n)
    target = d * (1.0 + tol)
    for _ in range(max_iters):
        a_inv = _inverse_spd(design_matrix(arms, w))
        lev = leverages(arms, a_inv)
        if lev.max() <= target:
            return w
        # multiplicative sweep
        w = w * lev / d
        w = np.maximum(w, 0.0)
        w /= w.sum()
        # one exchange: top leverage gains mass from the weakest support point
        a_inv = _inverse_spd(design_matrix(arms, w))
        lev = leverages(arms, a_inv)
        if lev.max() <= target:
            return w
        j = int(np.argmax(lev))
        support = np.flatnonzero(w > 0)
        i = int(support[np.argmin(lev[support])])
        if i == j:
            continue
        a = float(lev[j])
        b = float(lev[i])
        c = float(arms[j] @ a_inv @ arms[i])
        denom = a * b - c * c
        t = w[i] if denom <= 0 else min(w[i], max(0.0, (a - b) / (2.0 * denom)))
        w[j] += t
        w[i] -= t
        w = np.maximum(w, 0.0)
        w /= w.sum()
    raise NumericalError(f"g_optimal did not certify within {max_iters} iterations (tol={tol})")


@dataclass
class BestResponse:
    """Halfspace projection result: game value, minimizer, and which target bound."""

    value: float
    minimizer: np.ndarray
    target: object | None = None


@dataclass
class GameSolution:
    tau_star: float
    lambda_star: np.ndarray
    duality_gap_estimate: float
    iterations: int
    converged: bool


def _response_from_inverse(a_inv: np.ndarray, theta_ref: np.ndarray, v: np.ndarray) -> BestResponse:
    g = float(theta_ref @ v)
    if g <= 0.0:
        return BestResponse(0.0, theta_ref.copy())
    av = a_inv @ v
    q = float(v @ av)
    if q <= 0.0:
        raise NumericalError("alternative direction has nonpositive dispersion; matrix not PD")
    return BestResponse(g * g / (2.0 * q), theta_ref - (g / q) * av)


def best_response(weights, arms, theta_ref, z_star, z) -> BestResponse:
    """Project theta_ref onto {theta : <z, theta> >= <z*, theta>} in the A(lambda) metric."""
    arms = as_matrix(arms, name="arms")
    theta_ref = as_vector(theta_ref, arms.shape[1], "theta_ref")
    z_star = as_vector(z_star, arms.shape[1], "z_star")
    z = as_vector(z, arms.shape[1], "z")
    v = z_star - z
    if float(np.linalg.norm(v)) == 0.0:
        raise DegenerateTargetError("z equals z_star; the alternative halfspace is degenerate")
    a_inv = _inverse_spd(design_matrix(arms, weights))
    return _response_from_inverse(a_inv, theta_ref, v)


def closest_alternative_from_inverse(a_inv: np.ndarray, theta_ref: np.ndarray, targets) -> BestResponse:
    """Minimum best_response over all targets z != argmax(theta_ref), given A^-1.

    For top-k target sets only the k(d-k) single-index swaps of the incumbent
    are scanned; the minimizing alternative is always a swap, so this equals
    the full-enumeration minimum.
    """
    if isinstance(targets, TopKTargets):
        z_hat, _ = targets.argmax(theta_ref)
        swaps = targets.swaps(z_hat)
        ii = np.fromiter((s[0] for s in swaps), dtype=np.intp)
        jj = np.fromiter((s[1] for s in swaps), dtype=np.intp)
        g = theta_ref[ii] - theta_ref[jj]
        q = a_inv[ii, ii] + a_inv[jj, jj] - 2.0 * a_inv[ii, jj]
        if np.any(q <= 0.0):
            raise NumericalError("swap direction has nonpositive dispersion; matrix not PD")
        vals = np.where(g <= 0.0, 0.0, g * g / (2.0 * q))
        best = int(np.argmin(vals))
        i, j = int(ii[best]), int(jj[best])
        key = targets.swap_key(z_hat, i, j)
        if vals[best] == 0.0:
            return BestResponse(0.0, theta_ref.copy(), key)
        av = a_inv[:, i] - a_inv[:, j]
        minimizer = theta_ref - (float(g[best]) / float(q[best])) * av
        return BestResponse(float(vals[best]), minimizer, key)

    if targets.n_targets < 2:
        raise DegenerateTargetError("need at least two targets to form an alternative")
    z_hat, _ = targets.argmax(theta_ref)
    zs = targets.vectors
    others = np.delete(np.arange(targets.n_targets), z_hat)
    v_all = zs[z_hat] - zs[others]
    g_all = v_all @ theta_ref
    av_all = v_all @ a_inv
    q_all = np.einsum("ij,ij->i", av_all, v_all)
    if np.any(q_all <= 0.0):
        raise DegenerateTargetError("a target duplicates z_hat; alternative halfspace is degenerate")
    vals = np.where(g_all <= 0.0, 0.0, g_all * g_all / (2.0 * q_all))
    best = int(np.argmin(vals))
    key = int(others[best])
    if vals[best] == 0.0:
        return BestResponse(0.0, theta_ref.copy(), key)
    minimizer = theta_ref - (float(g_all[best]) / float(q_all[best])) * av_all[best]
    return BestResponse(float(vals[best]), minimizer, key)


def closest_alternative(weights, arms, theta_ref, targets) -> BestResponse:
    """Minimum-value best_response over all z != argmax(theta_ref)."""
    arms = as_matrix(arms, name="arms")
    theta_ref = as_vector(theta_ref, arms.shape[1], "theta_ref")
    a_inv = _inverse_spd(design_matrix(arms, weights))
    return closest_alternative_from_inverse(a_inv, theta_ref, targets)


def _binding_direction(targets, z_hat, key) -> np.ndarray:
    return targets.vector(z_hat) - targets.vector(key)


def _game_directions(instance: Instance) -> np.ndarray:
    """Rows are z* - z for every alternative z, in a fixed enumeration order."""
    targets = instance.targets
    if isinstance(targets, TopKTargets):
        swaps = targets.swaps(instance.z_star)
        v = np.zeros((len(swaps), instance.arms.shape[1]))
        for row, (i, j) in enumerate(swaps):
            v[row, i] = 1.0
            v[row, j] = -1.0
        return v
    zs = targets.vectors
    return zs[instance.z_star] - np.delete(zs, instance.z_star, axis=0)


def tau_star(instance: Instance, iters: int = 2000, tol: float = 1e-2) -> GameSolution:
    """Game value max_lambda min_{z != z*} best_response by Frank-Wolfe ascent.

    The objective f(lambda) = min_z g_z² / (2 v_z^T A(lambda)^-1 v_z) is
    concave: each component is an inf of functions linear in lambda, via
    v^T A^-1 v = min_{u : u^T v = 1} u^T A(lambda) u, with supergradient
    d r_z / d lambda_x = g² (x^T w)² / (2 (v^T w)²) at w = A^-1 v.
    Linearizing only the binding component stalls where two alternatives tie
    at the optimum, so each iteration linearizes every component and
    maximizes their pointwise min over the simplex — a small LP.  Since the
    linearizations overestimate their components, the LP optimum also
    upper-bounds the game value, which yields the reported duality gap.
    Steps are 2/(it+2) toward the LP maximizer (with a single alternative
    this degenerates to the classic step toward the best vertex).  The
    returned design is the best iterate by inner-minimum value, not the
    last one.
    """
    if iters < 1:
        raise InputError(f"iters must be >= 1, got {iters}")
    arms = instance.arms
    n, d = arms.shape
    theta = instance.theta_star
    targets = instance.targets
    if (isinstance(targets, ExplicitTargets) and targets.n_targets < 2) or n < 1:
        raise DegenerateTargetError("need at least two targets to define the game")

    v_all = _game_directions(instance)
    g_all = v_all @ theta
    n_alt = v_all.shape[0]
    lp_cost = np.concatenate([np.zeros(n), [-1.0]])
    lp_eq = np.concatenate([np.ones(n), [0.0]])[None, :]
    lp_bounds = [(0.0, 1.0)] * n + [(None, None)]

    lam = np.full(n, 1.0 / n)
    best_lam = lam.copy()
    best_val = -math.inf
    best_upper = math.inf
    used = 0
    for it in range(1, iters + 1):
        used = it
        a_inv = _inverse_spd(np.einsum("i,ij,ik->jk", lam, arms, arms))
        av = v_all @ a_inv
        q = np.einsum("ij,ij->i", av, v_all)
        if np.any(q <= 0.0):
            raise DegenerateTargetError(
                "a target duplicates z_star; alternative halfspace is degenerate")
        vals = np.where(g_all <= 0.0, 0.0, g_all * g_all / (2.0 * q))
        f_val = float(vals.min())
        if f_val > best_val:
            best_val = f_val
            best_lam = lam.copy()
        grads = (arms @ av.T) ** 2 * (g_all * g_all / (2.0 * q * q))
        if n_alt == 1:
            grad = grads[:, 0]
            upper = float(vals[0] + grad.max() - grad @ lam)
            towards = np.zeros(n)
            towards[int(np.argmax(grad))] = 1.0
        else:
            lp = scipy.optimize.linprog(
                c=lp_cost,
                A_ub=np.hstack([-grads.T, np.ones((n_alt, 1))]),
                b_ub=vals - grads.T @ lam,
                A_eq=lp_eq,
                b_eq=[1.0],
                bounds=lp_bounds,
                method="highs",
            )
            if lp.status != 0:
                raise NumericalError(f"game linearization subproblem failed: {lp.message}")
            upper = float(-lp.fun)
            towards = np.clip(lp.x[:n], 0.0, None)
        best_upper = min(best_upper, upper)
        if best_upper - best_val <= tol * max(best_val, 1e-300):
            break
        step = 2.0 / (it + 2.0)
        lam = (1.0 - step) * lam + step * towards
    gap = max(0.0, best_upper - best_val)
    converged = gap <= tol * max(best_val, 1e-300)
    return GameSolution(
        tau_star=best_val,
        lambda_star=best_lam,
        duality_gap_estimate=gap,
        iterations=used,
        converged=converged,
    )
