"""Dormand–Prince 5(4) driver shared by both backends.

The driver is written in the subset of Python that numba compiles.  Each
backend binds its own ``rhs``, ``vnorm`` and ``max_block_norm`` with
:func:`bind`; the numba backend then jit-compiles the bound copy.
``rhs(kind, s, y, cpar, ipar)`` evaluates the right-hand side selected by
``kind``.

Status codes: 0 reached ``s1``, 1 block norm above ``threshold``,
2 step size below ``hmin``, 3 step budget exhausted.
"""
import types

import numpy as np

C2, C3, C4, C5 = 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0
A21 = 1.0 / 5.0
A31, A32 = 3.0 / 40.0, 9.0 / 40.0
A41, A42, A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
A51, A52, A53, A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
A61, A62, A63, A64, A65 = 9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0
B1, B3, B4, B5, B6 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
# fifth-order weights minus embedded fourth-order weights
E1 = 71.0 / 57600.0
E3 = -71.0 / 16695.0
E4 = 71.0 / 1920.0
E5 = -17253.0 / 339200.0
E6 = 22.0 / 525.0
E7 = -1.0 / 40.0

SAFETY = 0.9
ALPHA = 0.7 / 5.0
BETA = 0.4 / 5.0


def vnorm(v):
    acc = 0.0
    for k in range(v.shape[0]):
        acc += v[k].real * v[k].real + v[k].imag * v[k].imag
    return np.sqrt(acc)


def max_block_norm(y, block):
    best = 0.0
    nb = y.shape[0] // block
    for b in range(nb):
        acc = 0.0
        for k in range(b * block, (b + 1) * block):
            acc += y[k].real * y[k].real + y[k].imag * y[k].imag
        if acc > best:
            best = acc
    return np.sqrt(best)


def dp54(kind, cpar, ipar, y0, s0, s1, tol, h0, hmin, max_steps, threshold, block):
    """Integrate ``y' = rhs(s, y)`` from ``s0`` to ``s1`` (``s1 > s0``).

    Returns ``(y, s, err_acc, n_accepted, n_rejected, h_last, status)`` where
    ``err_acc`` sums the local error estimates of the accepted steps.
    """
    y = y0.copy()
    s = s0
    span = s1 - s0
    h = h0
    if h <= 0.0 or h > span:
        h = span
    k1 = rhs(kind, s, y, cpar, ipar)
    err_acc = 0.0
    n_acc = 0
    n_rej = 0
    err_old = 1e-4
    status = 0
    while s < s1:
        if n_acc + n_rej >= max_steps:
            status = 3
            break
        last = False
        if s + h >= s1 or (s1 - (s + h)) < 1e-14 * span:
            h = s1 - s
            last = True
        k2 = rhs(kind, s + C2 * h, y + h * (A21 * k1), cpar, ipar)
        k3 = rhs(kind, s + C3 * h, y + h * (A31 * k1 + A32 * k2), cpar, ipar)
        k4 = rhs(kind, s + C4 * h, y + h * (A41 * k1 + A42 * k2 + A43 * k3), cpar, ipar)
        k5 = rhs(kind, s + C5 * h, y + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4), cpar, ipar)
        k6 = rhs(kind, s + h, y + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5), cpar, ipar)
        y_new = y + h * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6)
        k7 = rhs(kind, s + h, y_new, cpar, ipar)
        err_vec = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7)
        err_abs = vnorm(err_vec)
        scale = tol * max(1.0, vnorm(y), vnorm(y_new))
        err = err_abs / scale
        if err <= 1.0:
            err_acc += err_abs
            s = s1 if last else s + h
            y = y_new
            k1 = k7
            n_acc += 1
            if block > 0 and max_block_norm(y, block) > threshold:
                status = 1
                break
            if err == 0.0:
                fac = 5.0
            else:
                fac = SAFETY * err ** (-ALPHA) * err_old ** BETA
                fac = min(5.0, max(0.2, fac))
            err_old = max(err, 1e-4)
            if not last:
                h = h * fac
        else:
            n_rej += 1
            fac = max(0.2, SAFETY * err ** (-0.2))
            h = h * fac
            if h < hmin * span:
                status = 2
                break
    return y, s, err_acc, n_acc, n_rej, h, status


def bind(**impls):
    """Copy of :func:`dp54` whose helper globals are replaced by ``impls``."""
    g = dict(globals())
    g.update(impls)
    return types.FunctionType(dp54.__code__, g, "dp54")
