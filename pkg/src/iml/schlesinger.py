"""Isomonodromic deformation: the Schlesinger flow on residues.

As the punctures move along a path ``t(s)`` the residues evolve by

    dA_i = sum_{k != i} [A_i, A_k] / (t_i - t_k) * (dt_i - dt_k),

which is the compact form of ``dA_i/dt_j = -[A_i, A_j]/(t_i - t_j)`` and
``dA_i/dt_i = sum_k [A_i, A_k]/(t_i - t_k)``.  Each derivative is a
commutator with ``A_i``, so spectra are conserved, and the commutators
cancel in the sum, so ``sum_i A_i`` is conserved too.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import _accel
from .core import DEFAULT_TOL, MarkedSphere, frob
from .errors import (ChartExit, ConfigurationCollision, FlagDegenerate, IMLError, OrderingCutCrossed,
                     SingularGauge, StepUnderflow, ValidationError)
from .monodromy import argument_order, monodromy_rep, rep_invariants
from .parabolic import FuchsianSystem, ParabolicConnection, build_flags

FLOW_TOL = 1e-12
BLOWUP = 1e6
CHECKPOINTS = 64


@dataclass(frozen=True)
class DeformationPath:
    """Piecewise-linear path of configurations ``samples[0] -> samples[-1]``."""

    samples: np.ndarray = field(repr=False)

    def __post_init__(self):
        S = np.array(self.samples, dtype=complex)
        if S.ndim != 2 or S.shape[0] < 2 or S.shape[1] < 1:
            raise ValidationError("a deformation path needs at least two configurations of n punctures")
        if not np.all(np.isfinite(S)):
            raise ValidationError("deformation path has non-finite entries")
        S.setflags(write=False)
        object.__setattr__(self, "samples", S)

    @classmethod
    def straight(cls, start, end) -> "DeformationPath":
        return cls(np.array([start, end], dtype=complex))

    @property
    def n(self) -> int:
        return self.samples.shape[1]

    @property
    def segments(self) -> int:
        return self.samples.shape[0] - 1

    @property
    def moving(self) -> tuple:
        return tuple(bool(np.any(self.samples[:, i] != self.samples[0, i])) for i in range(self.n))

    def at(self, seg: int, s: float) -> np.ndarray:
        return self.samples[seg] + s * (self.samples[seg + 1] - self.samples[seg])

    def reversed(self) -> "DeformationPath":
        return DeformationPath(self.samples[::-1].copy())

    def min_separation(self) -> float:
        """Smallest distance between two punctures anywhere on the path."""
        best = math.inf
        for a, b in zip(self.samples[:-1], self.samples[1:]):
            d = b - a
            for i in range(self.n):
                for k in range(i + 1, self.n):
                    p, q = a[i] - a[k], d[i] - d[k]
                    s = 0.0 if q == 0 else min(1.0, max(0.0, -(p * np.conj(q)).real / abs(q) ** 2))
                    best = min(best, abs(p + s * q))
        return best

    def validate(self, sphere: MarkedSphere, clearance: Optional[float] = None) -> float:
        if self.n != sphere.n:
            raise ValidationError(f"path moves {self.n} punctures, the sphere has {sphere.n}")
        if np.abs(self.samples[0] - sphere.as_array()).max() > 1e-12 * max(1.0, np.abs(self.samples[0]).max()):
            raise ValidationError("path does not start at the connection's configuration")
        start = self.samples[0]
        diam = float(np.abs(start[:, None] - start[None, :]).max()) if self.n > 1 else 1.0
        delta = 1e-3 * diam if clearance is None else clearance
        sep = self.min_separation()
        if sep < delta:
            raise ConfigurationCollision(f"punctures come within {sep:.3g} of each other (clearance {delta:.3g})")
        return delta


# --------------------------------------------------------------------------

def schlesinger_rhs(t, A, dt, corrupt: Optional[tuple] = None) -> np.ndarray:
    """Derivatives of the residues for puncture velocities ``dt``.

    ``corrupt=(i, k)`` drops the ``[A_i, A_k]`` term from ``dA_i``; it
    exists only to build negative controls.
    """
    t = np.asarray(t, dtype=complex)
    A = np.asarray(A, dtype=complex)
    dt = np.asarray(dt, dtype=complex)
    n = len(t)
    diff = t[:, None] - t[None, :]
    np.fill_diagonal(diff, 1.0)
    if np.any(np.abs(diff) == 0):
        raise ConfigurationCollision("two punctures coincide")
    out = np.zeros_like(A)
    for i in range(n):
        for k in range(n):
            if k == i or (corrupt is not None and (i, k) == tuple(corrupt)):
                continue
            out[i] += (A[i] @ A[k] - A[k] @ A[i]) * (dt[i] - dt[k]) / diff[i, k]
    return out


def _spectrum_distance(a, b) -> float:
    cost = np.abs(np.asarray(a)[:, None] - np.asarray(b)[None, :])
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].max())


@dataclass(frozen=True)
class Checkpoint:
    segment: int
    s: float
    punctures: np.ndarray = field(repr=False)
    residues: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class FlowResult:
    residues: np.ndarray = field(repr=False)
    checkpoints: tuple
    sum_drift: float
    spectrum_drift: float
    steps: dict
    endpoint: Optional[ParabolicConnection] = None

    @property
    def conservation(self) -> dict:
        return {"sum_drift": self.sum_drift, "spectrum_drift": self.spectrum_drift}


def _kernel_flow(kern, t0, dt, y, s0, s1, tol, h, threshold, r, corrupt):
    n = len(t0)
    cpar = np.concatenate([t0, dt]).astype(np.complex128)
    ci = (0, 0) if corrupt is None else corrupt
    ipar = np.array([n, r, 0 if corrupt is None else 1, ci[0], ci[1]], dtype=np.int64)
    return kern.integrate(kern.KIND_SCHLESINGER, cpar, ipar, y, s0, s1, tol, h, 1e-14,
                          1_000_000, threshold, r * r)


def _integrate_path(A0, path: DeformationPath, tol, threshold, corrupt, backend,
                    start=(0, 0.0), checkpoints=CHECKPOINTS):
    """Yield checkpoints; raises ChartExit with the last good state attached."""
    kern = _accel.get_kernels(backend)
    n, r = A0.shape[0], A0.shape[1]
    y = np.ascontiguousarray(A0, dtype=np.complex128).ravel()
    stats = {"accepted": 0, "rejected": 0}
    seg0, s_start = start
    for seg in range(seg0, path.segments):
        t0 = path.samples[seg]
        dt = path.samples[seg + 1] - t0
        h = 0.0
        grid = np.linspace(0.0, 1.0, checkpoints + 1)
        for a, b in zip(grid[:-1], grid[1:]):
            if seg == seg0 and b <= s_start:
                continue
            a = max(a, s_start) if seg == seg0 else a
            if b - a <= 0:
                continue
            if not np.any(dt):
                yield Checkpoint(seg, float(b), path.at(seg, b), y.reshape(n, r, r).copy()), stats
                continue
            y_new, s, err, na, nr, h_last, status = _kernel_flow(
                kern, t0, dt, y, float(a), float(b), tol, h, threshold, r, corrupt)
            stats["accepted"] += int(na)
            stats["rejected"] += int(nr)
            if status == 1:
                exc = ChartExit(f"residue norm exceeded {threshold:.3g} at segment {seg + 1}, s={s:.6g}",
                                s=(seg, float(s)), norm=float(np.abs(y_new).max()))
                exc.state = (seg, float(s), y_new.reshape(n, r, r).copy())
                raise exc
            if status == 2:
                raise StepUnderflow(f"step size underflow in the flow at segment {seg + 1}, s={s:.6g}")
            if status == 3:
                raise StepUnderflow(f"step budget exhausted in the flow at segment {seg + 1}")
            y = y_new
            h = float(h_last)
            yield Checkpoint(seg, float(b), path.at(seg, b), y.reshape(n, r, r).copy()), stats
        s_start = 0.0


def _conservation(A0, cps):
    s0 = A0.sum(axis=0)
    eig0 = [np.linalg.eigvals(a) for a in A0]
    sum_drift = 0.0
    spec_drift = 0.0
    for cp in cps:
        sum_drift = max(sum_drift, frob(cp.residues.sum(axis=0) - s0))
        for a, e in zip(cp.residues, eig0):
            spec_drift = max(spec_drift, _spectrum_distance(np.linalg.eigvals(a), e))
    return sum_drift, spec_drift


def _endpoint(conn: ParabolicConnection, punctures, residues, tol) -> ParabolicConnection:
    sphere = conn.sphere.moved(punctures)
    system = FuchsianSystem(sphere, residues, conn.system.tol)
    flags = build_flags(system, conn.exponents, tol)
    return ParabolicConnection(system, conn.exponents, flags, conn.provenance)


def flow(conn: ParabolicConnection, path: DeformationPath, tol: float = FLOW_TOL,
         threshold: float = BLOWUP, corrupt: Optional[tuple] = None,
         backend: Optional[str] = None, checkpoints: int = CHECKPOINTS) -> FlowResult:
    """Integrate the Schlesinger system along ``path``.

    Raises :class:`ChartExit` when some residue entry exceeds ``threshold``.
    The endpoint connection keeps the initial exponents; flags there are
    rebuilt from the endpoint residues.
    """
    path.validate(conn.sphere)
    A0 = np.array(conn.system.residues)
    cps = []
    stats = {"accepted": 0, "rejected": 0}
    for cp, stats in _integrate_path(A0, path, tol, threshold, corrupt, backend, checkpoints=checkpoints):
        cps.append(cp)
    end = cps[-1].residues if cps else A0
    sum_drift, spec_drift = _conservation(A0, cps)
    endpoint = None
    if corrupt is None:
        endpoint = _endpoint(conn, path.samples[-1], end, max(tol, 1e-6))
    return FlowResult(end, tuple(cps), sum_drift, spec_drift, dict(stats), endpoint)


# --------------------------------------------------------------------------
# isomonodromy certification

def check_ordering(sphere: MarkedSphere, path: DeformationPath, samples: int = 256):
    """Raise :class:`OrderingCutCrossed` if the argument order or the cut is crossed."""
    z0 = sphere.basepoint
    ref = None
    prev = None
    for seg in range(path.segments):
        for s in np.linspace(0.0, 1.0, samples + 1):
            t = path.at(seg, s)
            if np.any(np.abs(t - z0) < sphere.separation_tol):
                raise OrderingCutCrossed("a puncture passes through the basepoint")
            ang = np.angle(t - z0)
            order = argument_order(sphere.moved(t))
            if ref is None:
                ref = order
            if order != ref:
                raise OrderingCutCrossed(
                    f"argument order changes on segment {seg + 1} near s={s:.4g}; split the path")
            if prev is not None and np.any(np.abs(ang - prev) > np.pi):
                raise OrderingCutCrossed(f"a puncture crosses the sorting cut on segment {seg + 1}")
            prev = ang


@dataclass(frozen=True)
class IsomonodromyReport:
    deviation: float
    tol: float
    passed: bool
    transport_bound: float
    relation_residuals: tuple
    flow: Optional[FlowResult] = None


def verify_isomonodromy(conn: ParabolicConnection, path: DeformationPath, tol: float = 1e-6,
                        flow_result: Optional[FlowResult] = None, corrupt: Optional[tuple] = None,
                        word_budget: int = 3, transport_tol: float = 1e-12,
                        backend: Optional[str] = None) -> IsomonodromyReport:
    """Compare trace-word invariants of the monodromy at both ends of the flow."""
    path.validate(conn.sphere)
    check_ordering(conn.sphere, path)
    if flow_result is None:
        flow_result = flow(conn, path, corrupt=corrupt, backend=backend)
    # a corrupted field does not conserve the residue sum, so infinity must be allowed to carry it
    inf = conn.sphere.include_infinity or corrupt is not None
    sys1 = FuchsianSystem(conn.sphere.moved(path.samples[-1], inf), flow_result.residues, conn.system.tol)
    rep0 = monodromy_rep(conn.system, transport_tol, backend=backend)
    rep1 = monodromy_rep(sys1, transport_tol, backend=backend)
    dev = rep_invariants(rep0, word_budget).deviation(rep_invariants(rep1, word_budget))
    bound = sum(rep0.error_bounds) + sum(rep1.error_bounds)
    return IsomonodromyReport(dev, tol, dev <= tol, bound,
                              (rep0.relation_residual, rep1.relation_residual), flow_result)


# --------------------------------------------------------------------------
# horizontal lift with chart switching

@dataclass(frozen=True)
class ChartMove:
    segment: int
    s: float
    records: tuple
    norm_before: float
    norm_after: float


@dataclass(frozen=True)
class LiftResult:
    checkpoints: tuple
    endpoint: ParabolicConnection
    moves: tuple
    steps: dict


def _best_move(conn: ParabolicConnection, tol):
    from .transforms import balance, elm

    best = None
    for i in range(conn.n):
        for j in range(1, conn.r):
            try:
                out, rec = elm(conn, i, j, tol=1e-6)
                out, rec_b = balance(out)
            except (FlagDegenerate, SingularGauge):
                continue
            size = float(np.abs(out.system.residues).max())
            if best is None or size < best[0]:
                best = (size, out, (rec, rec_b))
    return best


def horizontal_lift(conn: ParabolicConnection, path: DeformationPath, tol: float = FLOW_TOL,
                    regularize: bool = False, switch: float = 1e3, threshold: float = BLOWUP,
                    max_moves: int = 8, backend: Optional[str] = None) -> LiftResult:
    """Follow the isomonodromic leaf through ``conn`` along ``path``.

    Without ``regularize`` this is :func:`flow` with the trajectory kept.
    With it, whenever a residue entry passes ``switch`` the connection is
    moved to another chart by the elementary transform that makes the
    residues smallest, the move is recorded, and integration continues.
    """
    path.validate(conn.sphere)
    A = np.array(conn.system.residues)
    current = conn
    cps: list = []
    moves: list = []
    stats = {"accepted": 0, "rejected": 0}
    start = (0, 0.0)
    limit = switch if regularize else threshold
    while True:
        try:
            for cp, st in _integrate_path(A, path, tol, limit, None, backend, start):
                cps.append((cp, len(moves)))
            stats["accepted"] += st["accepted"]
            stats["rejected"] += st["rejected"]
            break
        except ChartExit as exc:
            if not regularize:
                raise
            seg, s, Ahere = exc.state
            if len(moves) >= max_moves:
                raise ChartExit(f"gave up after {max_moves} chart moves", s=(seg, s), norm=exc.norm) from None
            t_here = path.at(seg, s)
            here = _endpoint(current, t_here, Ahere, 1e-6)
            best = _best_move(here, tol)
            before = float(np.abs(Ahere).max())
            if best is None or best[0] >= before:
                raise ChartExit(f"no elementary transform reduces the residues at segment {seg + 1}, s={s:.6g}",
                                s=(seg, s), norm=before) from None
            size, current, recs = best
            moves.append(ChartMove(seg, s, recs, before, size))
            # the rest of the path starts from the transformed residues
            A = np.array(current.system.residues)
            sub = np.array([t_here] + [path.samples[k] for k in range(seg + 1, path.samples.shape[0])])
            path = DeformationPath(sub)
            start = (0, 0.0)
    last_cp = cps[-1][0] if cps else None
    end_res = last_cp.residues if last_cp is not None else A
    end = _endpoint(current, path.samples[-1], end_res, 1e-6)
    return LiftResult(tuple(cp for cp, _ in cps), end, tuple(moves), stats)
