# cython: language_level=3
"""Compiled hot kernels: rejection scans and rank-one posterior updates.

Mirrors linbai._kernels_py exactly — same signatures, same random-stream
consumption (whole batches of Gaussian rows are drawn before scanning), same
tie-breaking.  Gaussian variates come from the Generator's own BitGenerator
through numpy's C API, so the candidate sequence for a given seed matches the
pure backend's ``rng.standard_normal`` output element for element.
"""
import numpy as np

cimport numpy as cnp
from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport INFINITY
from numpy.random cimport bitgen_t
from numpy.random.c_distributions cimport random_standard_normal

cnp.import_array()

BACKEND_NAME = "cython"

DEF MAX_DIM = 128


cdef bitgen_t *_bitgen_ptr(object rng) except NULL:
    capsule = rng.bit_generator.capsule
    return <bitgen_t *> PyCapsule_GetPointer(capsule, "BitGenerator")


def scan_explicit(object rng, double[::1] mean, double[:, ::1] chol,
                  double[:, ::1] targets, Py_ssize_t z_hat,
                  Py_ssize_t budget, Py_ssize_t batch):
    """Rejection scan over N(mean, chol chol^T) until argmax_z <z,theta> != z_hat."""
    cdef Py_ssize_t d = mean.shape[0]
    cdef Py_ssize_t m = targets.shape[0]
    cdef Py_ssize_t used = 0, n, r, j, k, best
    cdef double acc, sc, best_sc
    cdef double theta[MAX_DIM]
    if d > MAX_DIM:
        raise ValueError(f"compiled kernel supports dim <= {MAX_DIM}, got {d}")
    cdef double[:, ::1] eta = np.empty((batch, d))
    cdef bitgen_t *bg = _bitgen_ptr(rng)
    with rng.bit_generator.lock:
        while used < budget:
            n = min(batch, budget - used)
            for r in range(n):
                for j in range(d):
                    eta[r, j] = random_standard_normal(bg)
            for r in range(n):
                for j in range(d):
                    acc = mean[j]
                    for k in range(j + 1):
                        acc += chol[j, k] * eta[r, k]
                    theta[j] = acc
                best = 0
                best_sc = -INFINITY
                for k in range(m):
                    sc = 0.0
                    for j in range(d):
                        sc += targets[k, j] * theta[j]
                    if sc > best_sc:
                        best_sc = sc
                        best = k
                if best != z_hat:
                    out = np.empty(d)
                    for j in range(d):
                        out[j] = theta[j]
                    return out, used + r + 1
            used += n
    return None, used


def scan_topk(object rng, double[::1] mean, double[:, ::1] chol,
              cnp.uint8_t[::1] in_mask, Py_ssize_t budget, Py_ssize_t batch):
    """Rejection scan accepting theta whose top-k set differs from ``in_mask``."""
    cdef Py_ssize_t d = mean.shape[0]
    cdef Py_ssize_t used = 0, n, r, j, k
    cdef double acc, mn, mx
    cdef double theta[MAX_DIM]
    if d > MAX_DIM:
        raise ValueError(f"compiled kernel supports dim <= {MAX_DIM}, got {d}")
    cdef double[:, ::1] eta = np.empty((batch, d))
    cdef bitgen_t *bg = _bitgen_ptr(rng)
    with rng.bit_generator.lock:
        while used < budget:
            n = min(batch, budget - used)
            for r in range(n):
                for j in range(d):
                    eta[r, j] = random_standard_normal(bg)
            for r in range(n):
                for j in range(d):
                    acc = mean[j]
                    for k in range(j + 1):
                        acc += chol[j, k] * eta[r, k]
                    theta[j] = acc
                mn = INFINITY
                mx = -INFINITY
                for j in range(d):
                    if in_mask[j]:
                        if theta[j] < mn:
                            mn = theta[j]
                    elif theta[j] > mx:
                        mx = theta[j]
                if mx > mn:
                    out = np.empty(d)
                    for j in range(d):
                        out[j] = theta[j]
                    return out, used + r + 1
            used += n
    return None, used


def sm_update(double[:, ::1] v, double[:, ::1] vinv, double[::1] x):
    """V += x x^T, Sherman-Morrison downdate of V^{-1}; returns x^T Vinv_old x."""
    cdef Py_ssize_t d = x.shape[0]
    cdef Py_ssize_t i, j
    cdef double c = 0.0, denom, m
    cdef double u[MAX_DIM]
    if d > MAX_DIM:
        raise ValueError(f"compiled kernel supports dim <= {MAX_DIM}, got {d}")
    for i in range(d):
        m = 0.0
        for j in range(d):
            m += vinv[i, j] * x[j]
        u[i] = m
        c += x[i] * m
    denom = 1.0 + c
    for i in range(d):
        for j in range(d):
            vinv[i, j] -= u[i] * u[j] / denom
    for i in range(d):
        for j in range(i):
            m = 0.5 * (vinv[i, j] + vinv[j, i])
            vinv[i, j] = m
            vinv[j, i] = m
    for i in range(d):
        for j in range(d):
            v[i, j] += x[i] * x[j]
    return c


def rls_update(double[:, ::1] v, double[:, ::1] vinv, double[::1] s,
               double[::1] theta, double[::1] x, double y):
    """Fused recursive least-squares step; see the pure twin for the algebra."""
    cdef Py_ssize_t d = x.shape[0]
    cdef Py_ssize_t i, j
    cdef double c = 0.0, denom, resid, m
    cdef double u[MAX_DIM]
    if d > MAX_DIM:
        raise ValueError(f"compiled kernel supports dim <= {MAX_DIM}, got {d}")
    resid = y
    for i in range(d):
        m = 0.0
        for j in range(d):
            m += vinv[i, j] * x[j]
        u[i] = m
        c += x[i] * m
        resid -= x[i] * theta[i]
    denom = 1.0 + c
    resid /= denom
    for i in range(d):
        theta[i] += u[i] * resid
        s[i] += y * x[i]
    for i in range(d):
        for j in range(d):
            vinv[i, j] -= u[i] * u[j] / denom
    for i in range(d):
        for j in range(i):
            m = 0.5 * (vinv[i, j] + vinv[j, i])
            vinv[i, j] = m
            vinv[j, i] = m
    for i in range(d):
        for j in range(d):
            v[i, j] += x[i] * x[j]
    return c
