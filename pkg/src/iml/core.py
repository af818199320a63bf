"""Foundational types: exact Gaussian rationals, marked spheres, flags.

Every approximate comparison in the package is made relative to Frobenius
norms against a single default tolerance, :data:`DEFAULT_TOL`, which each
public routine lets the caller override.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import Sequence, Union

import numpy as np

from .errors import GeometryTooTight, ValidationError

DEFAULT_TOL = 1e-9
SEPARATION_TOL = 1e-9


@dataclass(frozen=True)
class ExactScalar:
    """Gaussian rational ``re + i*im`` with exact arithmetic."""

    re: Fraction
    im: Fraction = Fraction(0)

    def __post_init__(self):
        object.__setattr__(self, "re", Fraction(self.re))
        object.__setattr__(self, "im", Fraction(self.im))

    @classmethod
    def parse(cls, text: str) -> "ExactScalar":
        return cls(Fraction(text.strip()))

    def _coerce(self, other):
        if isinstance(other, ExactScalar):
            return other
        if isinstance(other, (int, Rational)):
            return ExactScalar(Fraction(other))
        return NotImplemented

    def __add__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return complex(self) + other
        return ExactScalar(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __neg__(self):
        return ExactScalar(-self.re, -self.im)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return complex(self) * other
        return ExactScalar(self.re * o.re - self.im * o.im,
                           self.re * o.im + self.im * o.re)

    __rmul__ = __mul__

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def __eq__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return complex(self) == other
        return self.re == o.re and self.im == o.im

    def __hash__(self):
        return hash((self.re, self.im))

    @property
    def real(self) -> Fraction:
        return self.re

    @property
    def imag(self) -> Fraction:
        return self.im

    def is_integer(self) -> bool:
        return self.im == 0 and self.re.denominator == 1

    def __str__(self):
        if self.im == 0:
            return str(self.re)
        return f"{self.re}{'+' if self.im >= 0 else '-'}{abs(self.im)}i"

    def __repr__(self):
        return f"ExactScalar({self})"


Scalar = Union[ExactScalar, complex]


def is_exact(x) -> bool:
    return isinstance(x, (ExactScalar, int, Fraction))


def as_scalar(x) -> Scalar:
    """Normalise ints/Fractions to ExactScalar and floats to complex."""
    if isinstance(x, ExactScalar):
        return x
    if isinstance(x, (int, Rational)) and not isinstance(x, bool):
        return ExactScalar(Fraction(x))
    return complex(x)


def real_part(x) -> Union[Fraction, float]:
    return x.re if isinstance(x, ExactScalar) else complex(x).real


def imag_part(x) -> Union[Fraction, float]:
    return x.im if isinstance(x, ExactScalar) else complex(x).imag


def floor_real(x) -> int:
    return math.floor(real_part(x))


def is_integral(x, tol: float = DEFAULT_TOL) -> bool:
    if isinstance(x, ExactScalar):
        return x.is_integer()
    z = complex(x)
    return abs(z.imag) <= tol and abs(z.real - round(z.real)) <= tol


def exact_sum(values) -> Scalar:
    total: Scalar = ExactScalar(0)
    for v in values:
        total = total + as_scalar(v)
    return total


# --------------------------------------------------------------------------
# linear-algebra helpers shared by the modules

def frob(m) -> float:
    return float(np.linalg.norm(m))


def orth(V: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Orthonormal basis of the column span of ``V`` (rank by relative SVD)."""
    V = np.asarray(V, dtype=complex)
    if V.size == 0 or V.shape[1] == 0:
        return np.zeros((V.shape[0], 0), dtype=complex)
    u, s, _ = np.linalg.svd(V, full_matrices=False)
    if s[0] == 0.0:
        return np.zeros((V.shape[0], 0), dtype=complex)
    rank = int(np.sum(s > tol * s[0]))
    return u[:, :rank]


def null_space(M: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Kernel of ``M``; singular values below ``tol * s_max`` count as zero."""
    M = np.asarray(M, dtype=complex)
    m, k = M.shape
    if k == 0:
        return np.zeros((0, 0), dtype=complex)
    _, s, vh = np.linalg.svd(M)
    smax = s[0] if s.size else 0.0
    if smax == 0.0:
        return np.eye(k, dtype=complex)
    rank = int(np.sum(s > tol * max(smax, 1.0)))
    return vh[rank:].conj().T


def intersect(U: np.ndarray, V: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Orthonormal basis of span(U) ∩ span(V)."""
    r = U.shape[0]
    if U.shape[1] == 0 or V.shape[1] == 0:
        return np.zeros((r, 0), dtype=complex)
    Qu, Qv = orth(U), orth(V)
    if Qu.shape[1] == 0 or Qv.shape[1] == 0:
        return np.zeros((r, 0), dtype=complex)
    K = null_space(np.hstack([Qu, -Qv]), tol)
    if K.shape[1] == 0:
        return np.zeros((r, 0), dtype=complex)
    return orth(Qu @ K[: Qu.shape[1]])


def intersection_dim(U: np.ndarray, V: np.ndarray, tol: float = 1e-9) -> int:
    return intersect(U, V, tol).shape[1]


# --------------------------------------------------------------------------

@dataclass(frozen=True)
class MarkedSphere:
    """Punctures ``t_1..t_n`` on P^1, a basepoint, and whether ∞ is marked."""

    punctures: tuple
    basepoint: complex
    include_infinity: bool = False
    separation_tol: float = SEPARATION_TOL

    def __post_init__(self):
        pts = tuple(complex(p) for p in self.punctures)
        object.__setattr__(self, "punctures", pts)
        object.__setattr__(self, "basepoint", complex(self.basepoint))
        if not pts:
            raise ValidationError("at least one puncture is required")
        if not all(np.isfinite(p) for p in pts) or not np.isfinite(self.basepoint):
            raise ValidationError("punctures and basepoint must be finite")
        for a in range(len(pts)):
            for b in range(a + 1, len(pts)):
                if abs(pts[a] - pts[b]) < self.separation_tol:
                    raise ValidationError(f"punctures {a + 1} and {b + 1} coincide")
            if abs(pts[a] - self.basepoint) < self.separation_tol:
                raise GeometryTooTight(f"basepoint sits on puncture {a + 1}")

    @property
    def n(self) -> int:
        return len(self.punctures)

    def as_array(self) -> np.ndarray:
        return np.array(self.punctures, dtype=complex)

    def min_separation(self) -> float:
        p = self.as_array()
        if p.size < 2:
            return math.inf
        d = np.abs(p[:, None] - p[None, :])
        d[np.diag_indices_from(d)] = np.inf
        return float(d.min())

    def moved(self, punctures: Sequence[complex], include_infinity=None) -> "MarkedSphere":
        return MarkedSphere(tuple(punctures), self.basepoint,
                            self.include_infinity if include_infinity is None else include_infinity,
                            self.separation_tol)


@dataclass(frozen=True)
class Flag:
    """Full flag stored as an adapted basis.

    Columns ``v_1..v_r`` of ``adapted_basis`` define
    ``l_j = span(v_{j+1}, ..., v_r)``, so consecutive quotients are
    one-dimensional by construction.
    """

    adapted_basis: np.ndarray = field(repr=False)

    def __post_init__(self):
        B = np.array(self.adapted_basis, dtype=complex)
        if B.ndim != 2 or B.shape[0] != B.shape[1] or B.shape[0] < 1:
            raise ValidationError("adapted basis must be a square matrix")
        if not np.all(np.isfinite(B)):
            raise ValidationError("adapted basis has non-finite entries")
        if np.linalg.matrix_rank(B) < B.shape[0]:
            raise ValidationError("adapted basis is singular")
        B.setflags(write=False)
        object.__setattr__(self, "adapted_basis", B)

    @property
    def rank(self) -> int:
        return self.adapted_basis.shape[0]

    @property
    def condition_number(self) -> float:
        return float(np.linalg.cond(self.adapted_basis))

    @classmethod
    def identity(cls, r: int) -> "Flag":
        return cls(np.eye(r, dtype=complex))

    def transformed(self, g: np.ndarray) -> "Flag":
        return Flag(np.asarray(g) @ self.adapted_basis)

    def __eq__(self, other):
        return isinstance(other, Flag) and np.array_equal(self.adapted_basis, other.adapted_basis)

    def __hash__(self):
        return hash(self.adapted_basis.tobytes())


def flag_subspace(flag: Flag, j: int) -> np.ndarray:
    """Basis (r x (r-j)) of ``l_j``; ``l_0`` is everything, ``l_r`` is zero."""
    r = flag.rank
    if not 0 <= j <= r:
        raise IndexError(f"flag index {j} outside 0..{r}")
    return np.array(flag.adapted_basis[:, j:])


def subspace_contains(V: np.ndarray, w: np.ndarray, tol: float = DEFAULT_TOL) -> bool:
    w = np.asarray(w, dtype=complex).ravel()
    nw = np.linalg.norm(w)
    if nw == 0.0:
        return True
    Q = orth(np.asarray(V, dtype=complex).reshape(len(w), -1))
    resid = w - Q @ (Q.conj().T @ w)
    return bool(np.linalg.norm(resid) <= tol * nw)


def subspace_distance(V: np.ndarray, W: np.ndarray) -> float:
    """Frobenius norm of the component of orthonormalised ``W`` outside span(V)."""
    Q = orth(V)
    Wq = orth(W)
    if Wq.shape[1] == 0:
        return 0.0
    return frob(Wq - Q @ (Q.conj().T @ Wq))
