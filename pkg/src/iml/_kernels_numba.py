"""numba-compiled kernels.

The integrator loop is the shared source in :mod:`iml._dp54`, compiled here
against loop-based right-hand sides.
"""
import numpy as np
from numba import njit

from . import _dp54

KIND_TRANSPORT = 0
KIND_SCHLESINGER = 1


@njit(cache=True, nogil=True)
def rhs(kind, s, y, cpar, ipar):
    n = ipar[0]
    r = ipar[1]
    rr = r * r
    out = np.zeros_like(y)
    if kind == 0:
        a = cpar[0]
        h = cpar[1] - a
        z = a + s * h
        M = np.zeros(rr, dtype=np.complex128)
        for k in range(n):
            w = 1.0 / (z - cpar[2 + k])
            base = 2 + n + k * rr
            for e in range(rr):
                M[e] += cpar[base + e] * w
        for i in range(r):
            for j in range(r):
                acc = 0j
                for m in range(r):
                    acc += M[i * r + m] * y[m * r + j]
                out[i * r + j] = -h * acc
        return out
    corrupt = ipar[2]
    i_drop = ipar[3]
    k_drop = ipar[4]
    for i in range(n):
        ti = cpar[i] + s * cpar[n + i]
        for k in range(n):
            if k == i:
                continue
            if corrupt != 0 and i == i_drop and k == k_drop:
                continue
            ddt = cpar[n + i] - cpar[n + k]
            if ddt == 0:
                continue
            coef = ddt / (ti - (cpar[k] + s * cpar[n + k]))
            bi = i * rr
            bk = k * rr
            for p in range(r):
                for q in range(r):
                    acc = 0j
                    for m in range(r):
                        acc += y[bi + p * r + m] * y[bk + m * r + q] - y[bk + p * r + m] * y[bi + m * r + q]
                    out[bi + p * r + q] += coef * acc
    return out


_vnorm = njit(cache=True, nogil=True)(_dp54.vnorm)
_max_block_norm = njit(cache=True, nogil=True)(_dp54.max_block_norm)

_integrate = njit(cache=True, nogil=True)(
    _dp54.bind(rhs=rhs, vnorm=_vnorm, max_block_norm=_max_block_norm))


def integrate(kind, cpar, ipar, y0, s0, s1, tol, h0, hmin, max_steps, threshold, block):
    return _integrate(kind, cpar, ipar.astype(np.int64), y0, float(s0), float(s1), float(tol),
                      float(h0), float(hmin), int(max_steps), float(threshold), int(block))


@njit(cache=True, nogil=True)
def _matmul(X, Y, out):
    r = X.shape[0]
    for i in range(r):
        for j in range(r):
            acc = 0j
            for k in range(r):
                acc += X[i, k] * Y[k, j]
            out[i, j] = acc


@njit(cache=True, nogil=True)
def _expm_small(X, out, term, tmp):
    """exp(X) into ``out`` by scaling, truncated Taylor series and squaring."""
    r = X.shape[0]
    nrm = 0.0
    for i in range(r):
        for j in range(r):
            nrm += X[i, j].real ** 2 + X[i, j].imag ** 2
    nrm = np.sqrt(nrm)
    sq = 0
    if nrm > 0.5:
        sq = int(np.ceil(np.log2(nrm / 0.5)))
    scale = 1.0 / (2.0 ** sq)
    for i in range(r):
        for j in range(r):
            v = 1.0 + 0j if i == j else 0j
            out[i, j] = v
            term[i, j] = v
    tnorm = 1.0
    k = 1
    while k < 19 and tnorm > 1e-18:
        _matmul(term, X, tmp)
        c = scale / k
        tnorm = 0.0
        for i in range(r):
            for j in range(r):
                term[i, j] = tmp[i, j] * c
                out[i, j] += term[i, j]
                tnorm = max(tnorm, abs(term[i, j]))
        k += 1
    for _ in range(sq):
        _matmul(out, out, tmp)
        out[:, :] = tmp


@njit(cache=True, nogil=True)
def _oracle_segment(t, A, a, b, steps):
    n = A.shape[0]
    r = A.shape[1]
    dz = (b - a) / steps
    Y = np.eye(r, dtype=np.complex128)
    M = np.empty((r, r), dtype=np.complex128)
    E = np.empty((r, r), dtype=np.complex128)
    term = np.empty((r, r), dtype=np.complex128)
    tmp = np.empty((r, r), dtype=np.complex128)
    for k in range(steps):
        z = a + (k + 0.5) * dz
        M[:, :] = 0
        for m in range(n):
            w = -dz / (z - t[m])
            for i in range(r):
                for j in range(r):
                    M[i, j] += A[m, i, j] * w
        _expm_small(M, E, term, tmp)
        _matmul(E, Y, tmp)
        Y[:, :] = tmp
    return Y


def oracle_segment(t, A, a, b, steps):
    return _oracle_segment(np.ascontiguousarray(t, dtype=np.complex128),
                           np.ascontiguousarray(A, dtype=np.complex128),
                           complex(a), complex(b), int(steps))
