"""Backend selection for the hot kernels.

The compiled extension (``linbai._kernels``) is preferred when importable;
otherwise the pure NumPy twin is used.  Selection can be forced with the
``LINBAI_BACKEND`` environment variable (``cython`` or ``python``) or at
runtime via :func:`use_backend`.  Both backends consume random streams
identically, so a fixed seed gives the same trajectory under either.
"""
from __future__ import annotations

import os

from . import _kernels_py
from .errors import ConfigError

try:
    from . import _kernels as _kernels_c
except ImportError:  # pragma: no cover - depends on build environment
    _kernels_c = None

DEFAULT_BATCH = 64

_BACKENDS = {"python": _kernels_py}
if _kernels_c is not None:
    _BACKENDS["cython"] = _kernels_c

_active = None


def available_backends() -> tuple[str, ...]:
    return tuple(sorted(_BACKENDS))


def use_backend(name: str):
    """Select a backend by name; returns the backend module."""
    global _active
    try:
        _active = _BACKENDS[name]
    except KeyError:
        raise ConfigError(f"unknown or unavailable kernel backend {name!r}; available: {available_backends()}") from None
    return _active


def active_backend():
    return _active


def backend_name() -> str:
    return _active.BACKEND_NAME


def _initial_choice() -> str:
    forced = os.environ.get("LINBAI_BACKEND", "").strip().lower()
    if forced:
        if forced not in _BACKENDS:
            raise ConfigError(f"LINBAI_BACKEND={forced!r} is not available; choices: {available_backends()}")
        return forced
    return "cython" if "cython" in _BACKENDS else "python"


use_backend(_initial_choice())


def scan_explicit(rng, mean, chol, targets, z_hat, budget, batch=DEFAULT_BATCH):
    return _active.scan_explicit(rng, mean, chol, targets, z_hat, budget, batch)


def scan_topk(rng, mean, chol, in_mask, budget, batch=DEFAULT_BATCH):
    return _active.scan_topk(rng, mean, chol, in_mask, budget, batch)


def sm_update(v, vinv, x):
    return _active.sm_update(v, vinv, x)


def rls_update(v, vinv, s, theta, x, y):
    return _active.rls_update(v, vinv, s, theta, x, y)
