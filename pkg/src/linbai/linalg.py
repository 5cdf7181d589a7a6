"""Incremental SPD matrices and least-squares posterior state.

The design matrix V_t = V_0 + sum_s x_s x_s^T and its inverse are maintained
jointly: rank-one updates go through Sherman-Morrison (with symmetrization to
stop round-off drift), the log-determinant is accumulated via
log det V_t = log det V_{t-1} + log(1 + x^T V_{t-1}^{-1} x), and a full
re-factorization from V happens every ``REFACTOR_EVERY`` updates so that
errors cannot compound over long horizons.
"""
from __future__ import annotations

import math

import numpy as np
import scipy.linalg

from . import kernels
from .errors import DimensionError, InputError, NumericalError

REFACTOR_EVERY = 1000


def as_vector(x, dim: int | None = None, name: str = "vector") -> np.ndarray:
    """Validate and coerce to a finite, contiguous float64 1-D array."""
    arr = np.ascontiguousarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise DimensionError(f"{name} must be 1-D, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise DimensionError(f"{name} must have length {dim}, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} contains non-finite entries")
    return arr


def as_matrix(x, shape: tuple[int, int] | None = None, name: str = "matrix") -> np.ndarray:
    arr = np.ascontiguousarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {arr.shape}")
    if shape is not None and arr.shape != shape:
        raise DimensionError(f"{name} must have shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} contains non-finite entries")
    return arr


class SpdState:
    """A symmetric positive-definite matrix V with cached inverse and logdet."""

    __slots__ = ("dim", "v", "vinv", "logdet", "_chol_vinv", "_updates_since_refactor")

    def __init__(self, v: np.ndarray):
        v = as_matrix(v, name="v")
        if v.shape[0] != v.shape[1]:
            raise DimensionError(f"v must be square, got {v.shape}")
        self.dim = v.shape[0]
        self.v = v.copy()
        self._chol_vinv = None
        self._updates_since_refactor = 0
        self.vinv = np.empty_like(self.v)
        self.logdet = 0.0
        self.refactor()

    @classmethod
    def identity(cls, dim: int) -> "SpdState":
        if dim < 1:
            raise InputError(f"dim must be >= 1, got {dim}")
        return cls(np.eye(dim))

    def copy(self) -> "SpdState":
        other = SpdState.__new__(SpdState)
        other.dim = self.dim
        other.v = self.v.copy()
        other.vinv = self.vinv.copy()
        other.logdet = self.logdet
        other._chol_vinv = None if self._chol_vinv is None else self._chol_vinv.copy()
        other._updates_since_refactor = self._updates_since_refactor
        return other

    def quad_norm(self, x, matrix: str = "v") -> float:
        """Quadratic form x^T V x (matrix="v") or x^T V^{-1} x (matrix="vinv")."""
        x = as_vector(x, self.dim, "x")
        if matrix == "v":
            return float(x @ self.v @ x)
        if matrix == "vinv":
            return float(x @ self.vinv @ x)
        raise InputError(f"matrix must be 'v' or 'vinv', got {matrix!r}")

    def rank_one_update(self, x) -> float:
        """V += x x^T in place.  Returns x^T V_old^{-1} x."""
        x = as_vector(x, self.dim, "x")
        c = kernels.sm_update(self.v, self.vinv, x)
        self._after_update(c)
        return c

    def _after_update(self, c: float) -> None:
        self.logdet += math.log1p(c)
        self._chol_vinv = None
        self._updates_since_refactor += 1
        if self._updates_since_refactor >= REFACTOR_EVERY:
            self.refactor()

    def refactor(self) -> None:
        """Recompute vinv and logdet from V by Cholesky factorization."""
        try:
            chol, lower = scipy.linalg.cho_factor(self.v, lower=True, check_finite=False)
        except (scipy.linalg.LinAlgError, ValueError) as exc:
            raise NumericalError(f"V is not positive definite: {exc}") from exc
        vinv = scipy.linalg.cho_solve((chol, lower), np.eye(self.dim), check_finite=False)
        self.vinv = np.ascontiguousarray((vinv + vinv.T) * 0.5)
        self.logdet = 2.0 * float(np.sum(np.log(np.diag(chol))))
        self._chol_vinv = None
        self._updates_since_refactor = 0

    def chol_vinv(self) -> np.ndarray:
        """Lower Cholesky factor L of V^{-1} (L L^T = V^{-1}), cached."""
        if self._chol_vinv is None:
            try:
                self._chol_vinv = np.linalg.cholesky(self.vinv)
            except np.linalg.LinAlgError as exc:
                raise NumericalError(f"V^-1 lost positive definiteness: {exc}") from exc
        return self._chol_vinv

    def sample_gaussian(self, rng: np.random.Generator, mean, scale: float = 1.0) -> np.ndarray:
        """One draw from N(mean, scale * V^{-1})."""
        mean = as_vector(mean, self.dim, "mean")
        if not (scale > 0.0 and math.isfinite(scale)):
            raise InputError(f"scale must be positive and finite, got {scale}")
        eta = rng.standard_normal(self.dim)
        return mean + math.sqrt(scale) * (self.chol_vinv() @ eta)


class PosteriorState:
    """Least-squares estimate over a stream of (x, y) observations.

    Maintains V_t = I + sum x x^T, the score s_t = sum y x, and
    theta_hat_t = V_t^{-1} s_t, updated recursively in O(d^2) per step:
    theta' = theta + V_old^{-1} x (y - x^T theta) / (1 + x^T V_old^{-1} x).
    Exact in exact arithmetic; periodic refactorization (every
    ``REFACTOR_EVERY`` steps) re-solves theta from (V, s) to purge drift.
    """

    __slots__ = ("spd", "s", "theta_hat", "t")

    def __init__(self, dim: int):
        self.spd = SpdState.identity(dim)
        self.s = np.zeros(dim)
        self.theta_hat = np.zeros(dim)
        self.t = 0

    @property
    def dim(self) -> int:
        return self.spd.dim

    def copy(self) -> "PosteriorState":
        other = PosteriorState.__new__(PosteriorState)
        other.spd = self.spd.copy()
        other.s = self.s.copy()
        other.theta_hat = self.theta_hat.copy()
        other.t = self.t
        return other

    def update(self, x, y: float) -> None:
        x = as_vector(x, self.dim, "x")
        y = float(y)
        if not math.isfinite(y):
            raise InputError(f"y must be finite, got {y}")
        c = kernels.rls_update(self.spd.v, self.spd.vinv, self.s, self.theta_hat, x, y)
        self.t += 1
        spd = self.spd
        spd.logdet += math.log1p(c)
        spd._chol_vinv = None
        spd._updates_since_refactor += 1
        if spd._updates_since_refactor >= REFACTOR_EVERY:
            spd.refactor()
            self.theta_hat = spd.vinv @ self.s

    def sample(self, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
        """One draw from N(theta_hat, scale * V^{-1})."""
        return self.spd.sample_gaussian(rng, self.theta_hat, scale)
