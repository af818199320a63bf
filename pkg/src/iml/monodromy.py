"""Monodromy of Fuchsian systems by numerical parallel transport.

Horizontal sections solve ``dY/dz = -A(z) Y``, so local monodromy around
``t_i`` has eigenvalues ``exp(-2 pi i lambda)``.  ``M_i`` is the transport
matrix around the keyhole loop ``gamma_i``.  Because transport composes in
reverse (going along ``gamma`` and then ``eta`` gives ``T_eta T_gamma``),
the relation reads ``M_{o_1} M_{o_2} ... M_{o_n} = I``, where ``o`` lists
the punctures by decreasing argument seen from the basepoint.  This order
is stored on every :class:`MonodromyRep`.
"""
from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import _accel, _linalg
from .core import DEFAULT_TOL, MarkedSphere, frob
from .errors import GeometryTooTight, IMLError, RankBudgetExceeded, StepUnderflow, ValidationError
from .parabolic import ExponentData, FuchsianSystem, ParabolicConnection

TRANSPORT_TOL = 1e-12
POLYGON_SIDES = 16
CONVENTION = ("counterclockwise keyhole loops; punctures sorted by argument from the basepoint in (-pi, pi]; "
              "relation M[o1] @ M[o2] @ ... = I with o = decreasing argument")


# --------------------------------------------------------------------------
# loops

@dataclass(frozen=True)
class Loop:
    """Closed polygon from the basepoint around one puncture."""

    vertices: np.ndarray = field(repr=False)
    puncture: int
    winding: tuple
    clearance: float


def winding_numbers(vertices: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Winding number of the closed polygon around each point (argument summation)."""
    v = np.asarray(vertices, dtype=complex)
    out = []
    for p in np.atleast_1d(points):
        rel = v - p
        turn = np.angle(rel[1:] / rel[:-1]).sum()
        out.append(int(round(turn / (2 * np.pi))))
    return np.array(out)


def _segment_distance(a: complex, b: complex, p: complex) -> float:
    d = b - a
    if d == 0:
        return abs(p - a)
    s = ((p - a) * np.conj(d)).real / abs(d) ** 2
    s = min(1.0, max(0.0, s))
    return abs(p - (a + s * d))


def path_clearance(vertices: np.ndarray, points: np.ndarray) -> float:
    best = math.inf
    for a, b in zip(vertices[:-1], vertices[1:]):
        for p in points:
            best = min(best, _segment_distance(a, b, p))
    return best


def default_clearance(sphere: MarkedSphere) -> float:
    if sphere.n == 1:
        return abs(sphere.basepoint - sphere.punctures[0]) / 4
    return sphere.min_separation() / 4


def argument_order(sphere: MarkedSphere) -> list:
    """Puncture indices sorted by increasing argument in (-pi, pi] seen from ``z_0``."""
    ang = np.angle(sphere.as_array() - sphere.basepoint)
    ang = np.where(ang <= -np.pi, np.pi, ang)
    return sorted(range(sphere.n), key=lambda k: (ang[k], abs(sphere.punctures[k] - sphere.basepoint)))


def standard_loops(sphere: MarkedSphere, clearance: Optional[float] = None,
                   sides: int = POLYGON_SIDES) -> list:
    """Keyhole loops ``gamma_1..gamma_n`` (indexed like the punctures).

    Each loop runs straight from ``z_0`` towards ``t_i``, goes once
    counterclockwise around a polygon circumscribing the circle of radius
    ``clearance``, and returns.  Every segment keeps at least ``clearance``
    from every puncture.
    """
    delta = default_clearance(sphere) if clearance is None else float(clearance)
    t = sphere.as_array()
    z0 = sphere.basepoint
    rho = delta / math.cos(math.pi / sides)
    loops = []
    for i, ti in enumerate(t):
        gap = abs(z0 - ti)
        if gap <= rho:
            raise GeometryTooTight(f"basepoint within {rho:.3g} of puncture {i + 1}")
        u = (z0 - ti) / gap
        ring = ti + rho * u * np.exp(2j * np.pi * np.arange(sides + 1) / sides)
        verts = np.concatenate([[z0], ring, [z0]])
        others = np.delete(t, i)
        if others.size and path_clearance(verts, others) < delta:
            raise GeometryTooTight(f"loop around puncture {i + 1} passes within {delta:.3g} of another puncture")
        wind = winding_numbers(verts, t)
        expected = np.zeros(len(t), dtype=int)
        expected[i] = 1
        if not np.array_equal(wind, expected):
            raise GeometryTooTight(f"loop around puncture {i + 1} has winding numbers {wind.tolist()}")
        loops.append(Loop(verts, i, tuple(int(w) for w in wind), delta))
    return loops


def infinity_loop(sphere: MarkedSphere, clearance: Optional[float] = None,
                  sides: int = 64) -> np.ndarray:
    """Counterclockwise polygon around all punctures, entered along the sorting cut."""
    delta = default_clearance(sphere) if clearance is None else float(clearance)
    t = sphere.as_array()
    z0 = sphere.basepoint
    centre = t.mean()
    R = float(np.abs(t - centre).max() + abs(z0 - centre)) + 4 * delta
    # leave z_0 along the cut (direction -1) until the big circle is reached
    d = z0 - centre
    # solve |d - s| = R for s > 0
    s = d.real + math.sqrt(R * R - d.imag ** 2)
    start = z0 - s
    phi = np.angle(start - centre)
    ring = centre + R * np.exp(1j * (phi + 2 * np.pi * np.arange(sides + 1) / sides))
    ring[0] = ring[-1] = start
    verts = np.concatenate([[z0], ring, [z0]])
    if path_clearance(verts, t) < delta:
        raise GeometryTooTight("the cut from the basepoint passes too close to a puncture")
    return verts


# --------------------------------------------------------------------------
# transport

def _segment(kern, t, A, a, b, tol):
    n, r = A.shape[0], A.shape[1]
    cpar = np.concatenate([[a, b], t, A.ravel()]).astype(np.complex128)
    ipar = np.array([n, r], dtype=np.int64)
    y0 = np.eye(r, dtype=np.complex128).ravel()
    y, s, err, nacc, nrej, h, status = kern.integrate(
        kern.KIND_TRANSPORT, cpar, ipar, y0, 0.0, 1.0, tol, 0.0, 1e-13, 200_000, np.inf, 0)
    if status == 2:
        raise StepUnderflow(f"step size underflow on segment {a} -> {b}")
    if status == 3:
        raise StepUnderflow(f"step budget exhausted on segment {a} -> {b}")
    return y.reshape(r, r), err, nacc, nrej


def transport(system: FuchsianSystem, path: Sequence[complex], tol: float = TRANSPORT_TOL,
              backend: Optional[str] = None):
    """Transport matrix along a polygonal path with an accumulated error bound.

    Returns ``(T, bound, stats)``: ``Y(end) = T`` for the solution of
    ``dY/dz = -A(z) Y`` with ``Y(start) = I``.
    """
    kern = _accel.get_kernels(backend)
    path = np.asarray(path, dtype=complex)
    t = system.sphere.as_array()
    A = np.ascontiguousarray(system.residues)
    r = system.r
    T = np.eye(r, dtype=complex)
    bound = 0.0
    nacc = nrej = 0
    for a, b in zip(path[:-1], path[1:]):
        if a == b:
            continue
        S, err, na, nr = _segment(kern, t, A, complex(a), complex(b), tol)
        # first-order propagation: E_new = S E_old + E_seg T_old
        bound = bound * np.linalg.norm(S, 2) + err * np.linalg.norm(T, 2)
        T = S @ T
        nacc += na
        nrej += nr
    return T, bound, {"accepted": nacc, "rejected": nrej}


def oracle_transport(system: FuchsianSystem, path: Sequence[complex], steps: int,
                     backend: Optional[str] = None) -> np.ndarray:
    """Product of midpoint exponentials ``exp(-A(z_mid) dz)`` with ``steps`` per segment."""
    if steps < 1:
        raise ValidationError("steps must be >= 1")
    kern = _accel.get_kernels(backend)
    path = np.asarray(path, dtype=complex)
    t = system.sphere.as_array()
    A = np.ascontiguousarray(system.residues)
    T = np.eye(system.r, dtype=complex)
    for a, b in zip(path[:-1], path[1:]):
        if a != b:
            T = kern.oracle_segment(t, A, complex(a), complex(b), int(steps)) @ T
    return T


# --------------------------------------------------------------------------
# representations

@dataclass(frozen=True)
class MonodromyRep:
    """Monodromy matrices indexed like the punctures.

    ``order`` is the product order of the relation; ``inf`` is the
    transport around infinity when infinity is marked.
    """

    matrices: np.ndarray = field(repr=False)
    order: tuple
    basepoint: complex
    error_bounds: tuple
    relation_residual: float
    convention: str = CONVENTION
    inf: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.matrices.shape[0]

    @property
    def r(self) -> int:
        return self.matrices.shape[1]

    def conjugated(self, g: np.ndarray) -> "MonodromyRep":
        gi = np.linalg.inv(g)
        mats = np.einsum("ab,ibc,cd->iad", g, self.matrices, gi)
        inf = None if self.inf is None else g @ self.inf @ gi
        return MonodromyRep(mats, self.order, self.basepoint, self.error_bounds,
                            self.relation_residual, self.convention, inf)


def relation_product(matrices: np.ndarray, order: Sequence[int]) -> np.ndarray:
    P = np.eye(matrices.shape[1], dtype=complex)
    for k in order:
        P = P @ matrices[k]
    return P


def monodromy_rep(source, tol: float = TRANSPORT_TOL, loops=None, threads: Optional[int] = None,
                  backend: Optional[str] = None) -> MonodromyRep:
    """Monodromy of a system (or of a connection's system) around the standard loops.

    Loops are transported concurrently on up to ``IML_THREADS`` threads;
    results are assembled in puncture order, so the output does not depend
    on scheduling.
    """
    system = source.system if isinstance(source, ParabolicConnection) else source
    sphere = system.sphere
    if loops is None:
        loops = standard_loops(sphere)
    workers = min(len(loops), threads or _accel.max_threads())
    paths = [lp.vertices for lp in loops]
    if sphere.include_infinity:
        paths.append(infinity_loop(sphere, loops[0].clearance if loops else None))

    def run(p):
        return transport(system, p, tol, backend)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, paths))
    else:
        results = [run(p) for p in paths]
    mats = np.array([results[k][0] for k in range(len(loops))])
    bounds = tuple(float(results[k][1]) for k in range(len(loops)))
    order = tuple(reversed(argument_order(sphere)))
    P = relation_product(mats, order)
    inf = None
    if sphere.include_infinity:
        big = results[-1][0]
        # the loop around infinity is the big loop traversed backwards
        inf = np.linalg.inv(big)
        P = P @ inf
        bounds_inf = float(results[-1][1])
    else:
        bounds_inf = 0.0
    resid = frob(P - np.eye(system.r))
    return MonodromyRep(mats, order, sphere.basepoint, bounds + ((bounds_inf,) if inf is not None else ()),
                        resid, CONVENTION, inf)


@dataclass(frozen=True)
class LocalMonodromyData:
    """Characteristic-polynomial coefficients ``a[i][j]`` (coefficient of ``X^j``)."""

    a: np.ndarray = field(repr=False)
    product_residual: float = 0.0

    def __post_init__(self):
        a = np.asarray(self.a, dtype=complex)
        n, r = a.shape
        resid = abs(np.prod(a[:, 0]) - (-1) ** (r * n))
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "product_residual", float(resid))

    def satisfies_product(self, tol: float = 1e-9) -> bool:
        return self.product_residual <= tol


def _charpoly_low_first(eigs) -> np.ndarray:
    c = np.poly(np.asarray(eigs, dtype=complex))
    return c[::-1][:-1]


def rh_map(exponents: ExponentData) -> LocalMonodromyData:
    """Coefficients of ``prod_j (X - exp(-2 pi i lambda_ij))`` for each puncture."""
    lam = exponents.as_complex()
    return LocalMonodromyData(np.array([_charpoly_low_first(np.exp(-2j * np.pi * row)) for row in lam]))


def charpoly_coefficients(M: np.ndarray) -> np.ndarray:
    return _charpoly_low_first(np.linalg.eigvals(M))


@dataclass(frozen=True)
class RHReport:
    deviations: tuple
    max_deviation: float
    tol: float
    passed: bool


def check_rh_consistency(conn: ParabolicConnection, rep: MonodromyRep, tol: float = 1e-6,
                         exponents=None) -> RHReport:
    """Compare char-poly coefficients of each ``M_i`` with those predicted from the exponents.

    ``exponents`` overrides the table carried by ``conn`` (used to audit a
    declared table that does not match the residues).
    """
    target = rh_map(conn.exponents if exponents is None else exponents).a
    devs = []
    for i in range(rep.n):
        got = np.real_if_close(np.poly(rep.matrices[i]))[::-1][:-1]
        devs.append(float(np.abs(got - target[i]).max()))
    worst = max(devs) if devs else 0.0
    return RHReport(tuple(devs), worst, tol, worst <= tol)


# --------------------------------------------------------------------------
# invariants

def canonical_words(n: int, budget: int = 3) -> list:
    """Words up to ``budget`` letters, one per cyclic-rotation class, in canonical order."""
    words = []
    for length in range(1, budget + 1):
        seen = set()
        for w in itertools.product(range(n), repeat=length):
            rep = min(w[k:] + w[:k] for k in range(length))
            if rep not in seen:
                seen.add(rep)
                words.append(rep)
    return words


@dataclass(frozen=True)
class InvariantVector:
    words: tuple
    values: np.ndarray = field(repr=False)

    def deviation(self, other: "InvariantVector") -> float:
        if self.words != other.words:
            raise ValidationError("invariant vectors built from different word lists")
        return float(np.abs(self.values - other.values).max()) if len(self.words) else 0.0


def rep_invariants(rep: MonodromyRep, word_budget: int = 3) -> InvariantVector:
    """Traces of all words of length ``<= word_budget`` in the ``M_i``."""
    words = canonical_words(rep.n, word_budget)
    vals = []
    r = rep.r
    for w in words:
        P = np.eye(r, dtype=complex)
        for k in w:
            P = P @ rep.matrices[k]
        vals.append(np.trace(P))
    return InvariantVector(tuple(words), np.array(vals, dtype=complex))


@dataclass(frozen=True)
class SingularVerdict:
    singular: bool
    reducible: bool
    invariant_subspace: Optional[np.ndarray] = field(default=None, repr=False)
    kernel_witness: Optional[tuple] = None  # (i, j, kernel dimension)
    note: str = ""


def is_singular_point(rep: MonodromyRep, exponents: ExponentData, tol: float = 1e-7) -> SingularVerdict:
    """Reducible representation, or an eigenvalue with a kernel of dimension >= 2."""
    mats = list(rep.matrices)
    note = ""
    witness_V = None
    try:
        subs = _linalg.common_invariant_subspaces(mats, max_rank=3, tol=tol)
    except RankBudgetExceeded:
        subs = [(W, W.shape[1] > 1, "line") for W in _linalg.common_eigenspaces(mats, tol)]
        note = "rank above 3: only common eigenvectors searched"
    if rep.r > 1:
        subs = [s for s in subs if 0 < s[0].shape[1] < rep.r or s[1]]
    if subs:
        witness_V = subs[0][0]
    lam = exponents.as_complex()
    kernel = None
    for i in range(rep.n):
        for j in range(rep.r):
            mu = np.exp(-2j * np.pi * lam[i, j])
            s = np.linalg.svd(rep.matrices[i] - mu * np.eye(rep.r), compute_uv=False)
            smax = max(float(s[0]), float(np.abs(mu)), 1.0)
            dim = int(np.sum(s <= tol * smax))
            if dim >= 2 and kernel is None:
                kernel = (i, j, dim)
    reducible = witness_V is not None
    return SingularVerdict(reducible or kernel is not None, reducible, witness_V, kernel, note)
