import math
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from iml.core import ExactScalar, MarkedSphere, real_part
from iml.errors import NonTermination, SingularGauge, ValidationError
from iml.monodromy import monodromy_rep, rep_invariants
from iml.parabolic import FuchsianSystem, check_compatibility
from iml.transforms import (GaugeFunction, apply_gauge, balance, elm, elm_inverse, normalize_sigma,
                            permute_a, twist_b)

from conftest import connection_from, random_connection


def E(x):
    return ExactScalar(F(x))


def exact_connection(seed, rows, t=None, z0=None):
    """Connection with residues ``P diag(row) P^-1`` and the exact table ``rows``.

    The last entry is raised by the amount that makes the degree integral.
    """
    rng = np.random.default_rng(seed)
    rows = [[x if isinstance(x, ExactScalar) else E(x) for x in row] for row in rows]
    total = sum((x for row in rows for x in row), E(0))
    rows[-1][-1] = rows[-1][-1] + (math.ceil(total.re) - total.re)
    n, r = len(rows), len(rows[0])
    A = []
    for row in rows:
        P = np.eye(r) + 0.3 * (rng.standard_normal((r, r)) + 1j * rng.standard_normal((r, r)))
        A.append(P @ np.diag([complex(x) for x in row]) @ np.linalg.inv(P))
    t = tuple(range(n)) if t is None else t
    z0 = (n - 1) / 2 - 2j if z0 is None else z0
    return connection_from(A, t, z0, include_infinity=True, lam=rows)


def invariants(conn):
    return rep_invariants(monodromy_rep(conn))


def relative_deviation(a, b):
    """Invariant deviation measured against the size of the invariants."""
    iv = invariants(a)
    return iv.deviation(invariants(b)) / max(1.0, float(np.abs(iv.values).max()))


def closing_rows(seed, n, r, lo=-3, hi=3):
    """Random rational rows in (lo, hi) whose total is an integer."""
    rng = np.random.default_rng(seed)
    rows = [[F(int(rng.integers(lo * 12 + 1, hi * 12)), 12) + F(1, 97 + k + 5 * i) for k in range(r)]
            for i in range(n)]
    total = sum(sum(row) for row in rows)
    rows[-1][-1] -= total - int(total)
    return [[str(x) for x in row] for row in rows]


# -- elm ------------------------------------------------------------------

def test_elm_rank_two_recipe():
    conn = exact_connection(0, [["1/5", "-1/3"], ["1/7", "2/5"], ["-1/4", "1/9"]])
    out, rec = elm(conn, 1, 1)
    assert out.exponents.row(1) == (E("2/5"), E("1/7") + 1)
    assert out.exponents.degree == conn.exponents.degree - 1
    assert rec.degree_delta == -1 and rec.kind == "elm"
    assert check_compatibility(out, 1e-8).passed


def test_elm_rank_three_recipe():
    conn = exact_connection(1, [["1/5", "-1/3", "1/8"], ["1/7", "2/5", "-1/6"]])
    out, _ = elm(conn, 0, 2)
    a, b, c = conn.exponents.row(0)
    assert out.exponents.row(0) == (c, a + 1, b + 1)
    assert out.exponents.degree == conn.exponents.degree - 2


def test_elm_rank_one_rejected():
    conn = connection_from([[[0.5]], [[-0.5]]], (0, 1), 0.5 + 2j)
    with pytest.raises(ValidationError):
        elm(conn, 0, 1)


def test_elm_preserves_invariants(r2n4):
    conn = r2n4.connection()
    out, _ = elm(conn, 0, 1)
    assert out.sphere.include_infinity
    assert invariants(conn).deviation(invariants(out)) <= 1e-8


def test_elm_inverse_round_trip():
    conn = exact_connection(2, [["1/5", "-1/3"], ["1/7", "2/5"], ["-1/4", "1/9"]])
    out, _ = elm(conn, 0, 1)
    back, recs = elm_inverse(out, 0, 1)
    assert back.exponents == conn.exponents
    assert len(recs) == 2
    assert invariants(conn).deviation(invariants(back)) <= 1e-8


# -- permute / twist ------------------------------------------------------

def test_permute_decreasing_real_part():
    conn = exact_connection(3, [["0", "1/2"], ["1/3", "1/6"]])
    out, rec = permute_a(conn, 0)
    assert out.exponents.row(0) == (E("1/2"), E(0))
    assert np.array_equal(out.system.residues, conn.system.residues)
    assert rec.note == ""


def test_permute_already_sorted_is_identity():
    conn = exact_connection(4, [["1/2", "0"], ["1/3", "1/6"]])
    out, _ = permute_a(conn, 0)
    assert out.exponents == conn.exponents


def test_permute_tie_rule():
    conn = exact_connection(5, [[ExactScalar(0, 1), ExactScalar(0, 2)], ["1/3", ExactScalar(F(-1, 3), -3)]])
    out, rec = permute_a(conn, 0)
    assert out.exponents.row(0) == (ExactScalar(0, 2), ExactScalar(0, 1))
    assert "imaginary" in rec.note


def test_twist_rank_one():
    conn = connection_from([[[0.5]], [[-0.5]]], (0, 1), 0.5 + 2j, lam=[[E("1/2")], [E("-1/2")]])
    out, rec = twist_b(conn, 0, 1)
    assert out.exponents.row(0) == (E("-1/2"),)
    assert out.exponents.degree == conn.exponents.degree + 1
    assert out.system.residues[0, 0, 0] == pytest.approx(-0.5)
    assert out.system.residue_infinity[0, 0] == pytest.approx(1.0)


def test_twist_inverse_pair_exact(r2n4):
    conn = exact_connection(6, [["1/5", "-1/3"], ["1/7", "2/5"], ["-1/4", "1/9"]])
    there, _ = twist_b(conn, 1, 1)
    back, _ = twist_b(there, 1, -1)
    assert back.exponents == conn.exponents
    assert np.allclose(back.system.residues, conn.system.residues, atol=1e-15, rtol=0)


def test_twist_trace_drop_and_monodromy(r2n4):
    conn = r2n4.connection()
    out, _ = twist_b(conn, 2, 1)
    assert np.trace(conn.system.residues[2] - out.system.residues[2]) == pytest.approx(2)
    a, b = monodromy_rep(conn).matrices, monodromy_rep(out).matrices
    assert np.abs(a - b).max() < 1e-9


def test_twist_direction_checked(r2n4):
    with pytest.raises(ValidationError):
        twist_b(r2n4.connection(), 0, 2)


# -- normalization --------------------------------------------------------

def test_normalize_noop():
    conn = exact_connection(7, [["1/5", "2/3"], ["1/7", "2/5"], ["1/4", "1/9"]])
    _, log = normalize_sigma(conn)
    assert log == []


def test_normalize_scalar_by_twists():
    conn = connection_from([[[1.5]], [[-1.5]]], (0, 1), 0.5 + 2j, lam=[[E("3/2")], [E("-3/2")]])
    out, log = normalize_sigma(conn)
    assert out.exponents.lam == ((E("1/2"),), (E("1/2"),))
    assert out.exponents.degree == -1
    assert {rec.kind for rec in log} == {"twist"}


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000))
def test_normalize_window_and_idempotent(seed):
    rows = closing_rows(seed, 4, 2)
    conn = exact_connection(seed, rows)
    out, log = normalize_sigma(conn)
    for row in out.exponents.lam:
        for x in row:
            assert 0 <= real_part(x) < 1
    assert out.exponents.degree == conn.exponents.degree + sum(rec.degree_delta for rec in log)
    _, again = normalize_sigma(out)
    assert again == []
    assert check_compatibility(out, 1e-7).passed


def test_normalize_budget_error_carries_log(monkeypatch):
    import iml.transforms as tr
    conn = exact_connection(8, [["7/2", "-1/3"], ["1/7", "-7/3"], ["-1/4", "1/9"]])
    monkeypatch.setattr(tr, "floor_real", lambda x: 0)
    monkeypatch.setattr(tr, "_in_window", lambda x: False)
    with pytest.raises(NonTermination):
        tr.normalize_sigma(conn)


# -- gauges ---------------------------------------------------------------

def _system(A, include_infinity=True):
    n = len(A)
    return FuchsianSystem(MarkedSphere(tuple(range(n)), 0.5 - 2j, include_infinity),
                          np.array(A, dtype=complex))


def test_gauge_constant_is_conjugation():
    A = np.random.default_rng(0).standard_normal((3, 2, 2)).astype(complex)
    U = np.array([[1, 2], [0, 1]], dtype=complex)
    out = apply_gauge(_system(A), GaugeFunction.constant(U))
    assert np.allclose(out.residues, U @ A @ np.linalg.inv(U))


def test_gauge_scalar_rank_one():
    sysm = _system([[[0.3]], [[0.1]]])
    out = apply_gauge(sysm, GaugeFunction.scalar(1, 0, 1))
    assert out.residues[0, 0, 0] == pytest.approx(-0.7)
    assert out.residue_infinity[0, 0] == pytest.approx(sysm.residue_infinity[0, 0] + 1)


def test_gauge_identity():
    A = np.random.default_rng(1).standard_normal((3, 2, 2)).astype(complex)
    out = apply_gauge(_system(A), GaugeFunction.constant(np.eye(2)))
    assert np.array_equal(out.residues, A)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.integers(0, 2))
def test_gauge_round_trip(seed, puncture):
    rng = np.random.default_rng(seed)
    A = 0.5 * (rng.standard_normal((3, 2, 2)) + 1j * rng.standard_normal((3, 2, 2)))
    G = GaugeFunction.constant(np.eye(2) + 0.4 * rng.standard_normal((2, 2)))
    sysm = _system(A)
    back = apply_gauge(apply_gauge(sysm, G), G.inverse())
    assert np.abs(back.residues - A).max() < 1e-10
    # a twist and its inverse
    T = GaugeFunction.scalar(2, puncture, 1)
    back = apply_gauge(apply_gauge(sysm, T), T.inverse())
    assert np.abs(back.residues - A).max() < 1e-10


def test_gauge_singular():
    A = np.array([[[0.1, 1.0], [0.3, 0.2]], [[-0.1, 0.0], [0.0, 0.4]]])
    G = GaugeFunction(np.eye(2), (-1, 0), 0)
    with pytest.raises(SingularGauge):
        apply_gauge(_system(A), G)
    with pytest.raises(SingularGauge):
        GaugeFunction.constant(np.zeros((2, 2)))


def test_balance_keeps_invariants():
    conn = random_connection(9)
    out, rec = balance(conn)
    assert rec.kind == "gauge"
    assert invariants(conn).deviation(invariants(out)) <= 1e-8


# -- property: the local system survives every transform ------------------

@settings(max_examples=6, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["elm", "permute", "twist"]), st.integers(0, 3))
def test_transforms_preserve_invariants(seed, kind, i):
    conn = random_connection(seed)
    if kind == "elm":
        out, rec = elm(conn, i, 1)
    elif kind == "permute":
        out, rec = permute_a(conn, i)
    else:
        out, rec = twist_b(conn, i, -1)
    assert out.exponents.degree == conn.exponents.degree + rec.degree_delta
    assert check_compatibility(out, 1e-8).passed
    assert relative_deviation(conn, out) <= 1e-10
