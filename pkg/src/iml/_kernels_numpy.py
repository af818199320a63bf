"""Pure-numpy kernels (fallback backend)."""
import numpy as np

from . import _dp54

KIND_TRANSPORT = 0
KIND_SCHLESINGER = 1


def rhs(kind, s, y, cpar, ipar):
    n, r = int(ipar[0]), int(ipar[1])
    if kind == KIND_TRANSPORT:
        a, b = cpar[0], cpar[1]
        h = b - a
        z = a + s * h
        t = cpar[2:2 + n]
        A = cpar[2 + n:2 + n + n * r * r].reshape(n, r, r)
        M = np.tensordot(1.0 / (z - t), A, axes=1)
        return (-h * (M @ y.reshape(r, r))).ravel()
    t0 = cpar[:n]
    dt = cpar[n:2 * n]
    t = t0 + s * dt
    A = y.reshape(n, r, r)
    diff = t[:, None] - t[None, :]
    np.fill_diagonal(diff, 1.0)
    coef = (dt[:, None] - dt[None, :]) / diff
    np.fill_diagonal(coef, 0.0)
    if ipar[2]:
        coef[ipar[3], ipar[4]] = 0.0
    prod = np.einsum("iab,kbc->ikac", A, A)
    comm = prod - np.swapaxes(prod, 0, 1)
    return np.einsum("ik,ikac->iac", coef, comm).ravel()


_dp54_bound = _dp54.bind(rhs=rhs)


def integrate(kind, cpar, ipar, y0, s0, s1, tol, h0, hmin, max_steps, threshold, block):
    return _dp54_bound(kind, cpar, ipar, y0, s0, s1, tol, h0, hmin,
                       max_steps, threshold, block)


def expm_batch(X):
    """Matrix exponentials of a stack ``X`` (N, r, r) by scaling and squaring."""
    N, r, _ = X.shape
    norms = np.linalg.norm(X, axis=(1, 2))
    nmax = float(norms.max()) if N else 0.0
    sq = max(0, int(np.ceil(np.log2(nmax / 0.5)))) if nmax > 0.5 else 0
    Xs = X / (2.0 ** sq)
    term = np.broadcast_to(np.eye(r, dtype=complex), X.shape).copy()
    out = term.copy()
    for k in range(1, 19):
        term = term @ Xs / k
        out = out + term
    for _ in range(sq):
        out = out @ out
    return out


def oracle_segment(t, A, a, b, steps):
    """Product of midpoint exponentials ``exp(-A(z_mid) dz)`` along ``[a, b]``."""
    r = A.shape[1]
    dz = (b - a) / steps
    zmid = a + (np.arange(steps) + 0.5) * dz
    w = 1.0 / (zmid[:, None] - t[None, :])
    M = np.tensordot(w, A, axes=1)
    E = expm_batch(-M * dz)
    while E.shape[0] > 1:
        if E.shape[0] % 2:
            E = np.concatenate([E, np.eye(r, dtype=complex)[None]], axis=0)
        E = E[1::2] @ E[0::2]
    return E[0]
