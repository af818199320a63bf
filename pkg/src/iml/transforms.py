"""Elementary transforms, regrouping, twists and normalization.

Every operation is carried out on the trivialized chart as a meromorphic
gauge transformation.  Horizontal sections change as ``Y' = G(z) Y``, so
residues transform by ``A' = G A G^{-1} - G' G^{-1}``.  When the degree of
the bundle changes, this shows up as a residue at infinity, which is
tracked explicitly.  Exponent bookkeeping is exact when the input exponents
are.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ._linalg import ordered_schur
from .core import DEFAULT_TOL, ExactScalar, Flag, floor_real, frob, imag_part, orth, real_part
from .errors import FlagDegenerate, NonTermination, SingularGauge, ValidationError
from .parabolic import (FuchsianSystem, ParabolicConnection, check_compatibility,
                        flag_for_residue)

CONDITION_LIMIT = 1e8


@dataclass(frozen=True)
class TransformRecord:
    """One step of a transform log.

    ``kind`` is "elm", "permute", "twist" or "gauge"; ``params`` holds the
    kind-specific arguments.  ``before``/``after`` are the exponent rows at
    the puncture, and ``degree_delta = -sum(after - before)``.
    """

    kind: str
    puncture: Optional[int]
    params: tuple
    before: tuple
    after: tuple
    degree_delta: int
    note: str = ""

    def __post_init__(self):
        if self.puncture is None:
            return
        delta = sum(self.after, ExactScalar(0)) - sum(self.before, ExactScalar(0))
        if isinstance(delta, ExactScalar):
            ok = delta == -self.degree_delta
        else:
            ok = abs(complex(delta) + self.degree_delta) < 1e-9
        if not ok:
            raise ValidationError("transform record violates the degree bookkeeping")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "puncture": None if self.puncture is None else self.puncture + 1,
            "params": dict(self.params),
            "before": [str(x) if isinstance(x, ExactScalar) else complex(x) for x in self.before],
            "after": [str(x) if isinstance(x, ExactScalar) else complex(x) for x in self.after],
            "degree_delta": self.degree_delta,
            "note": self.note,
        }


@dataclass(frozen=True)
class GaugeFunction:
    """``G(z) = U diag((z - t)^e) U^{-1} V`` with integer exponents ``e``.

    ``puncture`` indexes the point ``t`` of the sphere the monomials are
    centred at; with all ``e`` zero ``G`` is the constant matrix ``V``.
    """

    U: np.ndarray = field(repr=False)
    exponents: tuple
    puncture: int
    V: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        U = np.array(self.U, dtype=complex)
        r = U.shape[0]
        V = np.eye(r, dtype=complex) if self.V is None else np.array(self.V, dtype=complex)
        e = tuple(int(x) for x in self.exponents)
        if U.shape != (r, r) or V.shape != (r, r) or len(e) != r:
            raise ValidationError("gauge factors must be r x r with r exponents")
        if any(x != y for x, y in zip(e, self.exponents)):
            raise ValidationError("gauge exponents must be integers")
        for M in (U, V):
            if not np.all(np.isfinite(M)) or np.linalg.cond(M) > 1e14:
                raise SingularGauge("gauge factor is singular")
        object.__setattr__(self, "U", U)
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "exponents", e)

    @classmethod
    def constant(cls, V) -> "GaugeFunction":
        V = np.asarray(V, dtype=complex)
        return cls(np.eye(V.shape[0]), (0,) * V.shape[0], 0, V)

    @classmethod
    def scalar(cls, r: int, puncture: int, power: int) -> "GaugeFunction":
        return cls(np.eye(r), (power,) * r, puncture)

    def __call__(self, z: complex, t: complex) -> np.ndarray:
        w = complex(z) - complex(t)
        D = np.diag([w ** k for k in self.exponents])
        return self.U @ D @ np.linalg.solve(self.U, self.V)

    def inverse(self) -> "GaugeFunction":
        Vi = np.linalg.inv(self.V)
        return GaugeFunction(Vi @ self.U, tuple(-k for k in self.exponents), self.puncture, Vi)


def _laurent_terms(m: int, c: complex):
    """Partial fractions of ``w^m / (w - c)``: residue at ``c`` and Laurent part at 0."""
    terms = {}
    if m >= 0:
        for q in range(m):
            terms[q] = c ** (m - 1 - q)
        return c ** m, terms
    p = -m
    for q in range(1, p + 1):
        terms[-q] = -c ** (-(p - q + 1))
    return c ** (-p), terms


def apply_gauge(system: FuchsianSystem, G: GaugeFunction, tol: float = 1e-8) -> FuchsianSystem:
    """Residues of ``G A G^{-1} - G' G^{-1}``.

    Raises :class:`SingularGauge` when the result would have a higher-order
    pole at the centre or a pole of order > 1 at infinity.
    """
    n, r = system.n, system.r
    if not 0 <= G.puncture < n or G.U.shape[0] != r:
        raise SingularGauge("gauge does not fit the system")
    t = system.sphere.as_array()
    ti = t[G.puncture]
    Ui = np.linalg.inv(G.U)
    # B_k in the U-frame after the constant factor V
    B = np.einsum("ab,bc,kcd,de,ef->kaf", Ui, G.V, system.residues, np.linalg.inv(G.V), G.U)
    e = np.array(G.exponents)
    new = np.zeros_like(B)
    laurent: dict = {}
    scale = max(1.0, max(frob(b) for b in B))
    for p in range(r):
        for q in range(r):
            m = int(e[p] - e[q])
            for k in range(n):
                b = B[k, p, q]
                if b == 0:
                    continue
                if k == G.puncture:
                    laurent[m - 1] = laurent.get(m - 1, np.zeros((r, r), complex))
                    laurent[m - 1][p, q] += b
                    continue
                res, terms = _laurent_terms(m, t[k] - ti)
                new[k, p, q] += res * b
                for power, coef in terms.items():
                    laurent.setdefault(power, np.zeros((r, r), complex))[p, q] += coef * b
    # logarithmic derivative of the diagonal monomials
    laurent.setdefault(-1, np.zeros((r, r), complex))
    laurent[-1] = laurent[-1] - np.diag(e.astype(complex))
    for power, M in laurent.items():
        if power == -1:
            continue
        if frob(M) > tol * scale:
            where = "a pole of order %d at the centre" % -power if power < -1 else "a pole of order >= 2 at infinity"
            raise SingularGauge(f"gauge produces {where} (size {frob(M):.3g})")
    new[G.puncture] = laurent[-1]
    out = np.einsum("ab,kbc,cd->kad", G.U, new, Ui)
    drift = frob(out.sum(axis=0))
    include_inf = system.sphere.include_infinity or drift > system.tol * max(1.0, scale)
    return FuchsianSystem(system.sphere.moved(system.sphere.punctures, include_inf), out, system.tol)


def _check_output(conn: ParabolicConnection, tol: float):
    rep = check_compatibility(conn, 10 * tol)
    if not rep.passed:
        raise FlagDegenerate(f"transformed flags lost compatibility (residual {rep.max_residual:.3g})")
    return conn


# --------------------------------------------------------------------------
# elementary transform

def _invariant_complements(Ainf: np.ndarray, L: np.ndarray, j: int, tol: float):
    """j-dimensional ``Ainf``-invariant subspaces, as transversal to ``L`` as possible."""
    r = Ainf.shape[0]
    PL = orth(L)
    away = np.eye(r) - PL @ PL.conj().T
    scale = max(1.0, frob(Ainf))
    if frob(Ainf - np.trace(Ainf) / r * np.eye(r)) <= tol * scale:
        _, _, vh = np.linalg.svd(away)
        return [vh[:j].conj().T]
    ev, W = np.linalg.eig(Ainf)
    clusters: list = []
    for k in np.argsort(ev.real + 1e-9 * ev.imag, kind="stable"):
        for c in clusters:
            if abs(ev[c[0]] - ev[k]) <= 1e-6 * scale:
                c.append(k)
                break
        else:
            clusters.append([k])
    spaces = []
    semisimple = True
    for c in clusters:
        mu = ev[c].mean()
        _, s, vh = np.linalg.svd(Ainf - mu * np.eye(r))
        K = vh[r - len(c):].conj().T
        if s[r - len(c)] > 1e-7 * scale:
            semisimple = False
        spaces.append(K)
    out = []
    if semisimple:
        sizes = [S.shape[1] for S in spaces]
        for alloc in itertools.product(*[range(k + 1) for k in sizes]):
            if sum(alloc) != j:
                continue
            parts = []
            for S, k in zip(spaces, alloc):
                if k:
                    _, _, vh = np.linalg.svd(away @ S)
                    parts.append(S @ vh[:k].conj().T)
            out.append(np.hstack(parts))
    else:
        for order in itertools.islice(itertools.permutations(range(len(clusters))), 720):
            lead = [i for c in order for i in clusters[c]]
            _, Z = ordered_schur(Ainf, [ev[i] for i in lead])
            out.append(Z[:, :j])
    return out


def elm(conn: ParabolicConnection, i: int, j: int, tol: float = DEFAULT_TOL,
        complement: Optional[np.ndarray] = None):
    """Elementary transform along ``l_j`` at puncture ``i`` (0-based ``i``).

    Exponents at ``i`` become ``(lam_j, ..., lam_{r-1}, lam_0 + 1, ...,
    lam_{j-1} + 1)`` and the degree drops by ``j``.  The gauge is
    ``U diag((z - t_i)^{-1} on C, 1 on l_j) U^{-1}`` where ``C`` is a
    complement of ``l_j`` invariant under the residue at infinity, so that
    no new singularity appears there beyond a simple pole.  By default the
    best-conditioned such ``C`` is used; ``complement`` fixes it instead.
    """
    r, n = conn.r, conn.n
    if not 0 <= i < n:
        raise ValidationError(f"puncture index {i} outside 0..{n - 1}")
    if not 1 <= j <= r - 1:
        raise ValidationError(f"elementary transform needs 1 <= j <= r-1 (r={r}, j={j})")
    B = conn.flags[i].adapted_basis
    L = B[:, j:]
    Ainf = conn.system.residue_infinity
    best = None
    if complement is not None:
        choices = [np.asarray(complement, dtype=complex).reshape(r, j)]
    else:
        choices = _invariant_complements(Ainf, L, j, tol)
    for C in choices:
        # project the leading flag vectors onto C along l_j so the basis stays adapted
        W = np.hstack([C, L])
        coeff = np.linalg.lstsq(W, B[:, :j], rcond=None)[0]
        Cv = C @ coeff[:j]
        U = np.hstack([Cv, L])
        cond = np.linalg.cond(U)
        if np.isfinite(cond) and (best is None or cond < best[0]):
            best = (cond, U)
    if best is None or best[0] > CONDITION_LIMIT:
        cond = math.inf if best is None else best[0]
        raise FlagDegenerate(f"no well-conditioned invariant complement of l_{j} (condition {cond:.3g})")
    U = best[1]
    e = (-1,) * j + (0,) * (r - j)
    G = GaugeFunction(U, e, i)
    system = apply_gauge(conn.system, G)
    t = conn.sphere.as_array()
    flags = []
    for k in range(n):
        if k == i:
            flags.append(Flag(U[:, list(range(j, r)) + list(range(j))]))
        else:
            flags.append(conn.flags[k].transformed(G(t[k], t[i])))
    old = conn.exponents.row(i)
    new = tuple(old[j:]) + tuple(x + 1 for x in old[:j])
    exps = conn.exponents.replace_row(i, new)
    rec = TransformRecord("elm", i, (("j", j),), old, new, -j)
    out = ParabolicConnection(system, exps, tuple(flags), conn.provenance + (rec,))
    return _check_output(out, tol), rec


# --------------------------------------------------------------------------
# regrouping and twists

def _reorder(conn: ParabolicConnection, i: int, order, tol: float):
    row = conn.exponents.row(i)
    new = tuple(row[k] for k in order)
    exps = conn.exponents.replace_row(i, new)
    flags = list(conn.flags)
    trial = conn.replace(exponents=exps)
    rep = check_compatibility(trial, tol)
    refit = False
    if not rep.residuals[i].max() <= tol:
        flags[i] = flag_for_residue(conn.system.residues[i], new, tol)
        refit = True
    return conn.replace(exponents=exps, flags=tuple(flags)), new, refit


def _sort_key(x, sign):
    return (sign * real_part(x), sign * imag_part(x))


def permute_a(conn: ParabolicConnection, i: int, tol: float = DEFAULT_TOL):
    """Order the exponents at ``i`` by decreasing real part.

    Ties in the real part are broken by decreasing imaginary part, a
    convention recorded in the returned record's note.  The flag is kept if
    it is still compatible and rebuilt from the residue otherwise.
    """
    row = conn.exponents.row(i)
    order = sorted(range(len(row)), key=lambda k: (_sort_key(row[k], -1), k))
    out, new, refit = _reorder(conn, i, order, tol)
    ties = any(real_part(a) == real_part(b) and a != b for a, b in zip(new, new[1:]))
    note = "equal real parts ordered by decreasing imaginary part" if ties else ""
    rec = TransformRecord("permute", i, (("order", "decreasing"), ("flag_rebuilt", refit)),
                          row, new, 0, note)
    out = out.replace(provenance=conn.provenance + (rec,))
    return _check_output(out, tol), rec


def twist_b(conn: ParabolicConnection, i: int, direction: int, tol: float = DEFAULT_TOL):
    """Tensor by the line bundle of ``t_i`` (``direction=+1``) or its inverse.

    Exponents at ``i`` drop by ``direction``; the degree changes by
    ``r * direction``.  Realized by ``G = (z - t_i)^direction``, so
    ``A_i -> A_i - direction`` and ``A_inf -> A_inf + direction``.
    """
    if direction not in (1, -1):
        raise ValidationError("twist direction must be +1 or -1")
    r = conn.r
    system = apply_gauge(conn.system, GaugeFunction.scalar(r, i, direction))
    old = conn.exponents.row(i)
    new = tuple(x - direction for x in old)
    exps = conn.exponents.replace_row(i, new)
    rec = TransformRecord("twist", i, (("direction", direction),), old, new, r * direction)
    out = ParabolicConnection(system, exps, conn.flags, conn.provenance + (rec,))
    return out, rec


def elm_inverse(conn: ParabolicConnection, i: int, j: int, tol: float = DEFAULT_TOL):
    """Undo ``elm(., i, j)`` on the exponents: ``elm(., i, r - j)`` then a twist."""
    out, r1 = elm(conn, i, conn.r - j, tol)
    out, r2 = twist_b(out, i, 1, tol)
    return out, (r1, r2)


def balance(conn: ParabolicConnection, sweeps: int = 50):
    """Constant diagonal gauge that evens out the residue entries (Osborne sweeps).

    Minimises ``sum_k ||D A_k D^{-1}||^2`` over positive diagonal ``D``; the
    monodromy only changes by the conjugation ``D``.
    """
    A = conn.system.residues
    r = conn.r
    W = (np.abs(A) ** 2).sum(axis=0)
    np.fill_diagonal(W, 0.0)
    d = np.ones(r)
    for _ in range(sweeps):
        for p in range(r):
            out = float(W[p] @ (1.0 / d ** 2)) * d[p] ** 2
            inc = float(W[:, p] @ d ** 2) / d[p] ** 2
            if out > 0 and inc > 0:
                d[p] *= (inc / out) ** 0.25
    d /= np.exp(np.mean(np.log(d)))
    D = np.diag(d).astype(complex)
    system = apply_gauge(conn.system, GaugeFunction.constant(D))
    flags = tuple(f.transformed(D) for f in conn.flags)
    rec = TransformRecord("gauge", None, (("diagonal", tuple(float(x) for x in d)),), (), (), 0)
    out = ParabolicConnection(system, conn.exponents, flags, conn.provenance + (rec,))
    return out, rec


# --------------------------------------------------------------------------
# normalization

def _in_window(x) -> bool:
    re = real_part(x)
    return 0 <= re < 1


def normalize_sigma(conn: ParabolicConnection, tol: float = DEFAULT_TOL):
    """Bring every exponent into the strip ``0 <= Re < 1``.

    Punctures are processed in order.  At each one the row is first twisted
    so that its largest real part lies in ``[0, 1)``; then, repeatedly, the
    exponents are ordered by increasing real part and an elementary
    transform along ``l_j`` (``j`` = number of exponents left of the strip)
    raises those ``j`` exponents by one while keeping the rest in place.
    """
    r, n = conn.r, conn.n
    spread = max(abs(floor_real(x)) for row in conn.exponents.lam for x in row)
    budget = 10 * n * r * (1 + spread)
    log: list = []
    steps = 0

    def tick():
        nonlocal steps
        steps += 1
        if steps > budget:
            raise NonTermination(f"normalization exceeded its budget of {budget} steps", log)

    for i in range(n):
        row = conn.exponents.row(i)
        if all(_in_window(x) for x in row):
            continue
        top = max(real_part(x) for x in row)
        shift = math.floor(top)
        while shift != 0:
            tick()
            d = 1 if shift > 0 else -1
            conn, rec = twist_b(conn, i, d, tol)
            log.append(rec)
            shift -= d
        while not all(_in_window(x) for x in conn.exponents.row(i)):
            tick()
            row = conn.exponents.row(i)
            order = sorted(range(r), key=lambda k: (_sort_key(row[k], 1), k))
            if order != list(range(r)):
                conn, new, refit = _reorder(conn, i, order, tol)
                rec = TransformRecord("permute", i, (("order", "increasing"), ("flag_rebuilt", refit)),
                                      row, new, 0)
                conn = conn.replace(provenance=conn.provenance + (rec,))
                log.append(rec)
            row = conn.exponents.row(i)
            j = sum(1 for x in row if real_part(x) < 0)
            if r == 1 or j == 0:
                raise NonTermination("exponent outside the strip cannot be moved by the elementary steps", log)
            conn, rec = elm(conn, i, j, tol)
            log.append(rec)
    return conn, log
