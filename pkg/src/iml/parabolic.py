"""Parabolic connections on the trivial-bundle chart of P^1.

A :class:`FuchsianSystem` is the connection ``d + sum_i A_i dz/(z - t_i)``;
together with exponent data and one full flag per puncture it becomes a
:class:`ParabolicConnection`.  This module also decides the resonance /
reducibility class of an exponent table and runs the weighted slope test
for stability.
"""
from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from . import _linalg
from .core import (DEFAULT_TOL, ExactScalar, Flag, MarkedSphere, as_scalar, exact_sum,
                   flag_subspace, frob, imag_part, intersect, intersection_dim, is_exact,
                   is_integral, orth, real_part)
from .errors import (InconsistentCandidate, NonIntegralDegree, RankBudgetExceeded,
                     SpectrumMismatch, ValidationError)

CLASSIFY_MAX_R = 4
CLASSIFY_MAX_N = 6


# --------------------------------------------------------------------------
# exponents

def degree_of(lam, tol: float = DEFAULT_TOL) -> int:
    """Degree ``d = -sum(lambda)``; must be an integer."""
    total = exact_sum(x for row in lam for x in row)
    if isinstance(total, ExactScalar):
        if not total.is_integer():
            raise NonIntegralDegree(f"sum of exponents {total} is not an integer")
        return -int(total.re)
    if not is_integral(total, tol):
        raise NonIntegralDegree(f"sum of exponents {total} is not within {tol} of an integer")
    return -int(round(total.real))


@dataclass(frozen=True)
class ExponentData:
    """The n x r table of local exponents and the degree it determines."""

    lam: tuple
    degree: int

    def __post_init__(self):
        table = tuple(tuple(as_scalar(x) for x in row) for row in self.lam)
        if not table or len({len(row) for row in table}) != 1 or not table[0]:
            raise ValidationError("exponent table must be a non-empty rectangular n x r table")
        object.__setattr__(self, "lam", table)
        d = degree_of(table)
        if d != self.degree:
            raise ValidationError(f"degree {self.degree} violates d + sum(lambda) = 0 (expected {d})")

    @classmethod
    def from_table(cls, table) -> "ExponentData":
        table = tuple(tuple(as_scalar(x) for x in row) for row in table)
        return cls(table, degree_of(table))

    @property
    def n(self) -> int:
        return len(self.lam)

    @property
    def r(self) -> int:
        return len(self.lam[0])

    @property
    def exact(self) -> bool:
        return all(isinstance(x, ExactScalar) for row in self.lam for x in row)

    def row(self, i: int) -> tuple:
        return self.lam[i]

    def as_complex(self) -> np.ndarray:
        return np.array([[complex(x) for x in row] for row in self.lam], dtype=complex)

    def replace_row(self, i: int, row) -> "ExponentData":
        rows = list(self.lam)
        rows[i] = tuple(as_scalar(x) for x in row)
        return ExponentData.from_table(rows)

    def __eq__(self, other):
        return isinstance(other, ExponentData) and self.lam == other.lam and self.degree == other.degree

    def __hash__(self):
        return hash((self.lam, self.degree))


# --------------------------------------------------------------------------
# systems and connections

@dataclass(frozen=True)
class FuchsianSystem:
    """Residues ``A_1..A_n`` at the sphere's punctures.

    When ``sphere.include_infinity`` is false the residues must sum to zero;
    otherwise ``-sum(A_i)`` is the residue at infinity.
    """

    sphere: MarkedSphere
    residues: np.ndarray = field(repr=False)
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        A = np.array(self.residues, dtype=complex)
        if A.ndim == 2:
            A = A[None]
        if A.ndim != 3 or A.shape[1] != A.shape[2] or A.shape[1] < 1:
            raise ValidationError(f"residues must have shape (n, r, r), got {A.shape}")
        if A.shape[0] != self.sphere.n:
            raise ValidationError(f"{A.shape[0]} residues for {self.sphere.n} punctures")
        if not np.all(np.isfinite(A)):
            raise ValidationError("residues contain non-finite entries")
        if not self.sphere.include_infinity:
            scale = max(1.0, max(frob(a) for a in A))
            drift = frob(A.sum(axis=0))
            if drift > self.tol * scale:
                raise ValidationError(
                    f"sum of residues has norm {drift:.3g}; mark infinity to allow a pole there")
        A.setflags(write=False)
        object.__setattr__(self, "residues", A)

    @property
    def n(self) -> int:
        return self.residues.shape[0]

    @property
    def r(self) -> int:
        return self.residues.shape[1]

    @property
    def residue_infinity(self) -> np.ndarray:
        return -self.residues.sum(axis=0)

    def connection_matrix(self, z: complex) -> np.ndarray:
        t = self.sphere.as_array()
        return np.tensordot(1.0 / (z - t), self.residues, axes=1)

    def with_residues(self, residues, sphere: Optional[MarkedSphere] = None) -> "FuchsianSystem":
        return FuchsianSystem(sphere or self.sphere, residues, self.tol)

    def conjugated(self, g: np.ndarray) -> "FuchsianSystem":
        g = np.asarray(g, dtype=complex)
        gi = np.linalg.inv(g)
        return self.with_residues(np.einsum("ab,ibc,cd->iad", g, self.residues, gi))


@dataclass(frozen=True)
class ParabolicConnection:
    """Fuchsian system + exponents + one compatible flag per puncture.

    ``provenance`` is the log of transforms that produced this connection.
    Shapes and the trace condition ``tr A_i = sum_j lambda_ij`` are checked
    at construction; flag compatibility is checked by
    :func:`check_compatibility` (or :meth:`build`).
    """

    system: FuchsianSystem
    exponents: ExponentData
    flags: tuple
    provenance: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "flags", tuple(self.flags))
        object.__setattr__(self, "provenance", tuple(self.provenance))
        sysm, ex = self.system, self.exponents
        if ex.n != sysm.n or ex.r != sysm.r:
            raise ValidationError(f"exponent table {ex.n}x{ex.r} does not match system {sysm.n}x{sysm.r}")
        if len(self.flags) != sysm.n or any(f.rank != sysm.r for f in self.flags):
            raise ValidationError("need one rank-r flag per puncture")
        for i, A in enumerate(sysm.residues):
            tr = complex(np.trace(A))
            s = complex(exact_sum(ex.row(i)))
            if abs(tr - s) > 10 * sysm.tol * max(1.0, frob(A)):
                raise ValidationError(f"trace of A_{i + 1} ({tr:.6g}) differs from the exponent sum ({s:.6g})")

    @classmethod
    def build(cls, system: FuchsianSystem, exponents: ExponentData, flags=None,
              tol: float = DEFAULT_TOL) -> "ParabolicConnection":
        if flags is None:
            flags = build_flags(system, exponents)
        conn = cls(system, exponents, tuple(flags))
        report = check_compatibility(conn, tol)
        if not report.passed:
            raise ValidationError(f"flags incompatible with residues (max residual {report.max_residual:.3g})")
        return conn

    @property
    def n(self) -> int:
        return self.system.n

    @property
    def r(self) -> int:
        return self.system.r

    @property
    def sphere(self) -> MarkedSphere:
        return self.system.sphere

    def replace(self, **changes) -> "ParabolicConnection":
        fields = dict(system=self.system, exponents=self.exponents, flags=self.flags,
                      provenance=self.provenance)
        fields.update(changes)
        return ParabolicConnection(**fields)


@dataclass(frozen=True)
class CompatibilityReport:
    residuals: np.ndarray
    tol: float
    passed: bool

    @property
    def max_residual(self) -> float:
        return float(self.residuals.max()) if self.residuals.size else 0.0


def _residual(A, lam_j, Lj, Lnext):
    Q = orth(Lj)
    X = (A - lam_j * np.eye(A.shape[0])) @ Q
    P = orth(Lnext)
    return frob(X - P @ (P.conj().T @ X))


def check_compatibility(conn: ParabolicConnection, tol: float = DEFAULT_TOL) -> CompatibilityReport:
    """Residual of ``(A_i - lambda_ij) l_j ⊆ l_{j+1}`` for every (i, j).

    Residuals are measured on orthonormalised bases and scaled by
    ``max(1, ||A_i||)``; the check passes when all are at most ``tol``.
    """
    n, r = conn.n, conn.r
    res = np.zeros((n, r))
    for i in range(n):
        A = conn.system.residues[i]
        scale = max(1.0, frob(A))
        flag = conn.flags[i]
        for j in range(r):
            lam = complex(conn.exponents.lam[i][j])
            res[i, j] = _residual(A, lam, flag_subspace(flag, j), flag_subspace(flag, j + 1)) / scale
    return CompatibilityReport(res, tol, bool(np.all(res <= tol)))


def flag_for_residue(A: np.ndarray, lam_row: Sequence, tol: float = DEFAULT_TOL) -> Flag:
    """Compatible flag for one residue with exponents in the given order."""
    A = np.asarray(A, dtype=complex)
    r = A.shape[0]
    vals = np.array([complex(x) for x in lam_row])
    scale = frob(A)
    eigs = np.linalg.eigvals(A)
    perm = _linalg.match_spectrum(vals, eigs, scale=scale)
    mu = complex(np.mean(eigs))
    if frob(A - mu * np.eye(r)) <= tol * max(1.0, scale):
        return Flag.identity(r)
    # position p of the Schur form holds the eigenvalue paired with lambda_{r-1-p}
    targets = [eigs[perm[r - 1 - p]] for p in range(r)]
    _, Z = _linalg.ordered_schur(A, targets)
    return Flag(_linalg.canonical_basis(Z[:, ::-1]))


def build_flags(system: FuchsianSystem, exponents: ExponentData,
                tol: float = DEFAULT_TOL) -> tuple:
    """One compatible flag per puncture, ordered to match ``exponents``.

    Raises :class:`SpectrumMismatch` if a row is not the spectrum of its
    residue.
    """
    if exponents.n != system.n or exponents.r != system.r:
        raise ValidationError("exponent table shape does not match the system")
    flags = []
    for i in range(system.n):
        A = system.residues[i]
        try:
            flags.append(flag_for_residue(A, exponents.row(i), tol))
        except SpectrumMismatch as exc:
            raise SpectrumMismatch(f"puncture {i + 1}: {exc}") from None
    return tuple(flags)


# --------------------------------------------------------------------------
# classification of exponent tables

@dataclass(frozen=True)
class LambdaClass:
    kind: str  # "generic" | "resonant" | "reducible_special"
    witness: tuple = ()
    exhaustive: bool = True
    note: str = ""


def _integral(x, tol):
    return is_integral(x, tol)


def classify_lambda(exponents: ExponentData, tol: float = DEFAULT_TOL) -> LambdaClass:
    """Generic / resonant / reducible-special classification with a witness.

    Resonant: two exponents at one puncture differ by an integer (witness
    ``(i, j, k)``, 0-based).  Reducible-special: for some ``1 <= s < r`` a
    choice of ``s`` exponents at every puncture sums to an integer (witness
    ``(s, subsets)``).  The subset search is exhaustive for r <= 4, n <= 6.
    """
    lam = exponents.lam
    n, r = exponents.n, exponents.r
    for i in range(n):
        for j in range(r):
            for k in range(j + 1, r):
                if _integral(lam[i][j] - lam[i][k], tol):
                    return LambdaClass("resonant", (i, j, k))
    exhaustive = r <= CLASSIFY_MAX_R and n <= CLASSIFY_MAX_N
    budget = None if exhaustive else 200_000
    checked = 0
    for s in range(1, r):
        per_point = [list(itertools.combinations(range(r), s)) for _ in range(n)]
        partial = [[exact_sum(lam[i][j] for j in sub) for sub in per_point[i]] for i in range(n)]
        for choice in itertools.product(*[range(len(p)) for p in per_point]):
            checked += 1
            if budget is not None and checked > budget:
                return LambdaClass("generic", (), False, "generic within searched budget")
            total = exact_sum(partial[i][c] for i, c in enumerate(choice))
            if _integral(total, tol):
                subsets = tuple(per_point[i][c] for i, c in enumerate(choice))
                return LambdaClass("reducible_special", (s, subsets), exhaustive)
    return LambdaClass("generic", (), exhaustive,
                       "" if exhaustive else "generic within searched budget")


# --------------------------------------------------------------------------
# invariant subspaces and stability

@dataclass(frozen=True)
class InvariantSubspace:
    basis: np.ndarray = field(repr=False)
    exponents: tuple  # per puncture, eigenvalues of A_i restricted to the subspace
    family: bool = False
    kind: str = "line"

    @property
    def rank(self) -> int:
        return self.basis.shape[1]


def _restricted_spectra(residues, V):
    Q = orth(V)
    return tuple(tuple(np.linalg.eigvals(Q.conj().T @ A @ Q).tolist()) for A in residues)


def residue_invariant_subspaces(system: FuchsianSystem, max_rank: int = 3,
                                tol: float = DEFAULT_TOL) -> list:
    """Proper subspaces ``V`` with ``A_i V ⊆ V`` for every residue.

    Each gives the trivial invariant subbundle ``O ⊗ V``.  Continua of
    invariant subspaces are returned as ``family=True`` entries (see
    :func:`iml._linalg.common_invariant_subspaces`).
    """
    if system.r > max_rank:
        raise RankBudgetExceeded(f"rank {system.r} exceeds the exhaustive budget {max_rank}")
    out = []
    for basis, family, kind in _linalg.common_invariant_subspaces(system.residues, max_rank, tol):
        spectra = () if family else _restricted_spectra(system.residues, basis)
        out.append(InvariantSubspace(basis, spectra, family, kind))
    return out


@dataclass(frozen=True)
class Weights:
    """Rational weights ``0 < alpha_i1 < ... < alpha_ir < 1``, pairwise distinct."""

    alpha: tuple

    def __post_init__(self):
        table = tuple(tuple(Fraction(a) for a in row) for row in self.alpha)
        if not table or len({len(row) for row in table}) != 1:
            raise ValidationError("weights must be a rectangular n x r table")
        seen = set()
        for i, row in enumerate(table):
            if not all(0 < a < 1 for a in row):
                raise ValidationError(f"weights at puncture {i + 1} must lie in (0, 1)")
            if any(b <= a for a, b in zip(row, row[1:])):
                raise ValidationError(f"weights at puncture {i + 1} must be strictly increasing")
            for a in row:
                if a in seen:
                    raise ValidationError(f"weight {a} repeated")
                seen.add(a)
        object.__setattr__(self, "alpha", table)

    @property
    def n(self) -> int:
        return len(self.alpha)

    @property
    def r(self) -> int:
        return len(self.alpha[0])

    def genericity_certificate(self, degree: int, max_exhaustive: int = 20_000, seed: int = 0):
        """Check that no proper (rank, degree, flag pattern) hits the total slope.

        For every ``1 <= k < r`` and every choice of ``k`` weights per puncture,
        ``(e + S_J)/k == (d + S)/r`` must fail for all integers ``e``.
        Returns ``(generic, exhaustive, witness)``.
        """
        n, r = self.n, self.r
        S = sum(sum(row) for row in self.alpha)
        exhaustive = True
        rng = np.random.default_rng(seed)
        for k in range(1, r):
            combos = [list(itertools.combinations(range(r), k)) for _ in range(n)]
            total = 1
            for c in combos:
                total *= len(c)
            if total <= max_exhaustive:
                choices = itertools.product(*[range(len(c)) for c in combos])
            else:
                exhaustive = False
                choices = (tuple(int(rng.integers(len(c))) for c in combos) for _ in range(max_exhaustive))
            for choice in choices:
                SJ = sum(sum(self.alpha[i][j] for j in combos[i][ci]) for i, ci in enumerate(choice))
                x = (r * SJ - k * (S + degree)) / r
                if x.denominator == 1:
                    return False, exhaustive, (k, tuple(combos[i][ci] for i, ci in enumerate(choice)))
        return True, exhaustive, None


@dataclass(frozen=True)
class StabilityCandidate:
    """Descriptor of an invariant subbundle F.

    ``dims[i][j-1] = dim((F|t_i ∩ l_{j-1}) / (F|t_i ∩ l_j))`` for ``j = 1..r``.
    """

    rank: int
    degree: int
    dims: tuple
    label: str = ""

    def validate(self, n: int, r: int):
        if not 0 < self.rank < r:
            raise InconsistentCandidate(f"candidate rank {self.rank} is not proper for rank {r}")
        if len(self.dims) != n or any(len(row) != r for row in self.dims):
            raise InconsistentCandidate("intersection-dimension table has the wrong shape")
        for i, row in enumerate(self.dims):
            if any(d not in (0, 1) for d in row) or sum(row) != self.rank:
                raise InconsistentCandidate(
                    f"intersection dimensions at puncture {i + 1} do not sum to rank {self.rank}")


@dataclass(frozen=True)
class SlopeComparison:
    candidate: StabilityCandidate
    lhs: Fraction
    rhs: Fraction

    @property
    def holds(self) -> bool:
        return self.lhs < self.rhs


@dataclass(frozen=True)
class StabilityResult:
    verdict: str  # "stable" | "unstable" | "undecided"
    witness: Optional[SlopeComparison]
    comparisons: tuple
    reason: str = ""
    notes: tuple = ()


def flag_pattern(flags, V, tol: float = 1e-8) -> tuple:
    """Intersection-dimension table of span(V) against each flag."""
    out = []
    for flag in flags:
        r = flag.rank
        dims = [intersection_dim(V, flag_subspace(flag, m), tol) if m < r else 0 for m in range(r + 1)]
        out.append(tuple(dims[j - 1] - dims[j] for j in range(1, r + 1)))
    return tuple(out)


def _subbundle_degree(exponents: ExponentData, pattern, tol):
    # F ∩ l_{j-1} / F ∩ l_j embeds in l_{j-1}/l_j, where the residue acts by lambda_{j-1}
    total = exact_sum(exponents.lam[i][j] for i, row in enumerate(pattern)
                      for j, d in enumerate(row) if d)
    if not is_integral(total, tol):
        return None
    if isinstance(total, ExactScalar):
        return -int(total.re)
    return -int(round(complex(total).real))


def _family_representatives(conn, basis, kind, rng):
    """Subspaces realising every intersection pattern inside a continuum."""
    r, n = conn.r, conn.n
    reps = []
    depths = itertools.product(range(r), repeat=n)
    for combo in depths:
        if kind == "line":
            S = basis
            for i, m in enumerate(combo):
                S = intersect(S, flag_subspace(conn.flags[i], m))
                if S.shape[1] == 0:
                    break
            if S.shape[1] == 0:
                continue
            v = S @ (rng.standard_normal(S.shape[1]) + 1j * rng.standard_normal(S.shape[1]))
            reps.append(v[:, None])
        else:
            # planes containing `basis`: orthogonal line must avoid nothing, pick it inside
            # the complement of `basis` intersected with complements of flag pieces
            comp = orth(np.eye(r) - orth(basis) @ orth(basis).conj().T) if basis.shape[1] else np.eye(r, dtype=complex)
            S = comp
            for i, m in enumerate(combo):
                Lm = flag_subspace(conn.flags[i], m)
                perp = orth(np.eye(r) - orth(Lm) @ orth(Lm).conj().T) if Lm.shape[1] else np.eye(r, dtype=complex)
                S = intersect(S, perp)
                if S.shape[1] == 0:
                    break
            if S.shape[1] == 0:
                continue
            w = S @ (rng.standard_normal(S.shape[1]) + 1j * rng.standard_normal(S.shape[1]))
            reps.append(orth(np.eye(r) - np.outer(w, w.conj()) / np.vdot(w, w)))
    return reps


def default_candidates(conn: ParabolicConnection, tol: float = DEFAULT_TOL, seed: int = 0):
    """Candidates from residue-invariant subspaces (trivial, degree-0 subbundles).

    Returns ``(candidates, exhaustive, notes)``.
    """
    notes = []
    try:
        subspaces = residue_invariant_subspaces(conn.system, tol=tol)
    except RankBudgetExceeded as exc:
        return [], False, [str(exc)]
    rng = np.random.default_rng(seed)
    seen = {}
    for sub in subspaces:
        bases = _family_representatives(conn, sub.basis, sub.kind, rng) if sub.family else [sub.basis]
        for V in bases:
            pattern = flag_pattern(conn.flags, V)
            k = V.shape[1]
            deg = _subbundle_degree(conn.exponents, pattern, 1e-6)
            if deg is None:
                notes.append(f"skipped invariant rank-{k} subspace with non-integral exponent sum")
                continue
            key = (k, deg, pattern)
            if key not in seen:
                label = f"rank-{k} invariant {'family member' if sub.family else 'subspace'}"
                seen[key] = StabilityCandidate(k, deg, pattern, label)
    cands = sorted(seen.values(), key=lambda c: (c.rank, c.degree, c.dims))
    return cands, True, notes


def stability_test(conn: ParabolicConnection, weights: Weights, candidates=None,
                   tol: float = DEFAULT_TOL) -> StabilityResult:
    """Weighted slope test over invariant subbundle candidates.

    Both sides are compared as exact rationals.  With ``candidates=None`` the
    trivial invariant subbundles are enumerated; an enumeration that could
    not run exhaustively yields ``undecided`` unless a violation was found.
    """
    n, r = conn.n, conn.r
    if weights.n != n or weights.r != r:
        raise ValidationError("weights table shape does not match the connection")
    notes = []
    exhaustive = True
    if candidates is None:
        candidates, exhaustive, notes = default_candidates(conn, tol)
    for c in candidates:
        c.validate(n, r)
    d = conn.exponents.degree
    total_weight = sum(sum(row) for row in weights.alpha)
    rhs = (Fraction(d) + total_weight) / r
    comps = []
    for c in candidates:
        w = sum(weights.alpha[i][j] for i in range(n) for j in range(r) if c.dims[i][j])
        comps.append(SlopeComparison(c, (Fraction(c.degree) + w) / c.rank, rhs))
    generic, _, _ = weights.genericity_certificate(d)
    if not generic:
        notes.append("weights are not generic for this degree: semistable and stable may differ")
    violations = [cmp for cmp in comps if not cmp.holds]
    if violations:
        worst = max(violations, key=lambda cmp: (cmp.lhs - cmp.rhs, cmp.candidate.dims))
        return StabilityResult("unstable", worst, tuple(comps), "", tuple(notes))
    if r == 1:
        return StabilityResult("stable", None, tuple(comps), "rank one", tuple(notes))
    if not exhaustive:
        return StabilityResult("undecided", None, tuple(comps),
                               "candidate enumeration exceeded its budget", tuple(notes))
    return StabilityResult("stable", None, tuple(comps), "", tuple(notes))


# --------------------------------------------------------------------------

class ModuliDimensionWarning(UserWarning):
    pass


def moduli_dimension(g: int, r: int, n: int) -> int:
    """``2 r^2 (g - 1) + n r (r - 1) + 2``, warning outside the theorem's range."""
    if g < 0 or r < 1 or n < 0:
        raise ValidationError("need g >= 0, r >= 1, n >= 0")
    if g == 0 and r * n - 2 * r - 2 <= 0:
        warnings.warn(f"rn - 2r - 2 = {r * n - 2 * r - 2} <= 0: outside the assumed range for g = 0",
                      ModuliDimensionWarning, stacklevel=2)
    elif g == 1 and n <= 1:
        warnings.warn("g = 1 requires n > 1", ModuliDimensionWarning, stacklevel=2)
    elif g >= 2 and n < 1:
        warnings.warn("g >= 2 requires n >= 1", ModuliDimensionWarning, stacklevel=2)
    return 2 * r * r * (g - 1) + n * r * (r - 1) + 2
