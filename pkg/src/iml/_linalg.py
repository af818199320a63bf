"""Small dense linear-algebra routines: ordered Schur forms and common
invariant subspaces of matrix families."""
from __future__ import annotations

import numpy as np
import scipy.linalg
from scipy.optimize import linear_sum_assignment

from .core import intersect, null_space, orth
from .errors import RankBudgetExceeded, SpectrumMismatch

MATCH_TOL = 1e-6


def match_spectrum(values, eigs, tol=MATCH_TOL, scale=1.0):
    """Assign each target value to a distinct eigenvalue.

    Returns ``perm`` with ``eigs[perm[j]] ≈ values[j]``; raises
    :class:`SpectrumMismatch` when the best assignment misses by more than
    ``tol * max(1, scale)``.
    """
    values = np.asarray(values, dtype=complex)
    eigs = np.asarray(eigs, dtype=complex)
    if values.shape != eigs.shape:
        raise SpectrumMismatch("multiset sizes differ")
    cost = np.abs(values[:, None] - eigs[None, :])
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty(len(values), dtype=int)
    perm[rows] = cols
    worst = float(cost[rows, cols].max()) if len(values) else 0.0
    if worst > tol * max(1.0, scale):
        raise SpectrumMismatch(
            f"exponents {np.round(values, 6).tolist()} are not the spectrum "
            f"{np.round(eigs, 6).tolist()} (mismatch {worst:.3g})")
    return perm


def _swap(T, Z, k):
    a, b, x = T[k, k], T[k + 1, k + 1], T[k, k + 1]
    v = np.array([x, b - a])
    nv = np.linalg.norm(v)
    if nv == 0.0:
        return
    c, s = v / nv
    G = np.array([[c, -np.conj(s)], [s, np.conj(c)]])
    T[k:k + 2, :] = G.conj().T @ T[k:k + 2, :]
    T[:, k:k + 2] = T[:, k:k + 2] @ G
    Z[:, k:k + 2] = Z[:, k:k + 2] @ G
    T[k + 1, k] = 0.0


def ordered_schur(A, targets):
    """Unitary ``Z`` and triangular ``T = Z^H A Z`` with ``T[p,p] ≈ targets[p]``."""
    T, Z = scipy.linalg.schur(np.asarray(A, dtype=complex), output="complex")
    r = T.shape[0]
    scale = max(1.0, float(np.linalg.norm(A)))
    for p in range(r):
        q = p + int(np.argmin(np.abs(np.diag(T)[p:] - targets[p])))
        for k in range(q - 1, p - 1, -1):
            if abs(T[k, k] - T[k + 1, k + 1]) <= 1e-13 * scale:
                continue
            _swap(T, Z, k)
    return T, Z


def canonical_basis(B, tol=1e-12):
    """Deterministic adapted basis spanning the same flag as ``B``.

    Works from the deepest column up: each column is scaled to have a unit
    pivot in its largest unused row and that row is eliminated from the
    shallower columns, which keeps every ``l_j`` unchanged.
    """
    B = np.array(B, dtype=complex)
    r = B.shape[0]
    used = []
    for m in range(r - 1, -1, -1):
        col = B[:, m].copy()
        mags = np.abs(col)
        mags[used] = -1.0
        top = mags.max()
        p = int(np.flatnonzero(mags >= top * (1 - 1e-9) - tol)[0])
        B[:, m] = col / col[p]
        for k in range(m):
            B[:, k] -= B[p, k] * B[:, m]
        used.append(p)
    B[np.abs(B) < tol] = 0.0
    return B


def _eigen_clusters(X, tol):
    ev = np.linalg.eigvals(X)
    scale = max(1.0, float(np.linalg.norm(X)))
    clusters: list[list[complex]] = []
    for e in sorted(ev, key=lambda z: (z.real, z.imag)):
        for c in clusters:
            if abs(c[0] - e) <= 1e-6 * scale:
                c.append(e)
                break
        else:
            clusters.append([e])
    return [complex(np.mean(c)) for c in clusters]


def common_eigenspaces(mats, tol=1e-9):
    """Maximal subspaces on which every matrix in ``mats`` acts as a scalar."""
    r = mats[0].shape[0]
    spaces = [np.eye(r, dtype=complex)]
    for X in mats:
        scale = max(1.0, float(np.linalg.norm(X)))
        new = []
        for W in spaces:
            for mu in _eigen_clusters(X, tol):
                K = null_space(X - mu * np.eye(r), tol=max(tol, 1e-8) * scale)
                if K.shape[1] == 0:
                    continue
                S = intersect(W, K, tol=1e-8)
                if S.shape[1]:
                    new.append(S)
        spaces = _dedupe(new)
        if not spaces:
            break
    return spaces


def _dedupe(spaces, tol=1e-7):
    out = []
    for S in spaces:
        for T in out:
            if S.shape[1] == T.shape[1] and np.linalg.norm(S - T @ (T.conj().T @ S)) <= tol:
                break
        else:
            out.append(S)
    return out


def common_invariant_subspaces(mats, max_rank=3, tol=1e-9):
    """Proper nonzero subspaces invariant under every matrix in ``mats``.

    Returns ``(basis, family, kind)`` triples with ``kind`` in
    {"line", "plane"}.  Isolated subspaces have ``family=False`` and
    ``basis`` spanning the subspace.  A family of lines is every line inside
    ``basis``; a family of planes (r = 3) is every plane containing
    ``basis``.  Exhaustive for r <= 3.
    """
    mats = [np.asarray(M, dtype=complex) for M in mats]
    r = mats[0].shape[0]
    if r > min(max_rank, 3):
        raise RankBudgetExceeded(f"exhaustive invariant-subspace search needs r <= 3 (got r={r})")
    if r == 1:
        return []
    out = []
    for W in common_eigenspaces(mats, tol):
        out.append((W, W.shape[1] > 1, "line"))
    if r == 3:
        for Wd in common_eigenspaces([M.conj().T for M in mats], tol):
            # plane P is invariant iff its orthogonal line is a common eigenvector of the adjoints
            core = null_space(Wd.conj().T)
            out.append((core, Wd.shape[1] > 1, "plane"))
    return out
