import warnings
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from iml.core import ExactScalar, Flag, MarkedSphere
from iml.errors import (InconsistentCandidate, NonIntegralDegree, RankBudgetExceeded, SpectrumMismatch,
                        ValidationError)
from iml.parabolic import (ExponentData, FuchsianSystem, ModuliDimensionWarning, ParabolicConnection,
                           StabilityCandidate, Weights, build_flags, check_compatibility, classify_lambda,
                           degree_of, moduli_dimension, residue_invariant_subspaces, stability_test)

from conftest import connection_from, random_connection


def E(x):
    return ExactScalar(F(x))


# -- degree ---------------------------------------------------------------

@pytest.mark.parametrize("lam,d", [
    ([[0, 0], [0, 0]], 0),
    ([[E("1/2")], [E("-1/2")]], 0),
    ([[E("-1/2"), E("-1/2")]], 1),
])
def test_degree_examples(lam, d):
    assert degree_of(lam) == d


def test_degree_non_integral():
    with pytest.raises(NonIntegralDegree):
        degree_of([[E("1/3"), 0]])
    with pytest.raises(NonIntegralDegree):
        degree_of([[0.25, 0.5]])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.fractions(min_value=-3, max_value=3, max_denominator=12), min_size=3, max_size=3),
       st.permutations([0, 1, 2, 3]))
def test_degree_permutation_invariant(vals, perm):
    row = [E(v) for v in vals]
    row.append(E(-sum(vals)) + 2)
    assert degree_of([row]) == degree_of([[row[k] for k in perm]]) == -2


# -- compatibility and flags ---------------------------------------------

def _system(residues, include_infinity=True):
    n = len(residues)
    return FuchsianSystem(MarkedSphere(tuple(range(n)), 0.5 - 2j, include_infinity),
                          np.array(residues, dtype=complex))


def test_compatibility_diagonal():
    A = [np.diag([0.1, 0.3]), np.diag([-0.1, -0.3])]
    ex = ExponentData.from_table([[0.1, 0.3], [-0.1, -0.3]])
    conn = ParabolicConnection(_system(A, False), ex, (Flag.identity(2), Flag.identity(2)))
    rep = check_compatibility(conn)
    assert rep.passed and rep.max_residual == 0.0


def test_compatibility_upper_triangular():
    # l_1 must be the eigenline of the last exponent
    A = np.array([[0.2, 1.0], [0.0, -0.2]])
    ex = ExponentData.from_table([[-0.2, 0.2]])
    good = ParabolicConnection(_system([A]), ex, (Flag(np.array([[0, 1], [1, 0]])),))
    assert check_compatibility(good).passed
    bad = ParabolicConnection(_system([A]), ex, (Flag.identity(2),))
    rep = check_compatibility(bad)
    assert not rep.passed
    assert rep.max_residual > 0.5


def test_build_flags_diagonal():
    sysm = _system([np.diag([0.25, 0.75])])
    (f,) = build_flags(sysm, ExponentData.from_table([[0.25, 0.75]]))
    l1 = f.adapted_basis[:, 1]
    assert abs(l1[0]) < 1e-12 and abs(l1[1]) > 0


def test_build_flags_scalar_residue():
    sysm = _system([0.5 * np.eye(2)])
    (f,) = build_flags(sysm, ExponentData.from_table([[0.5, 0.5]]))
    assert np.array_equal(f.adapted_basis, np.eye(2))


def test_build_flags_spectrum_mismatch():
    with pytest.raises(SpectrumMismatch):
        build_flags(_system([np.diag([0.0, 1.0])]), ExponentData.from_table([[0, 2]]))


def test_build_flags_jordan_block():
    A = np.array([[0.5, 1.0], [0.0, 0.5]])
    conn = ParabolicConnection.build(_system([A]), ExponentData.from_table([[0.5, 0.5]]))
    assert check_compatibility(conn).passed


def test_trace_condition_enforced():
    with pytest.raises(ValidationError):
        ParabolicConnection(_system([np.diag([0.1, 0.2])]), ExponentData.from_table([[0.1, 0.3]]),
                            (Flag.identity(2),))


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 1000))
def test_compatibility_conjugation_invariant(seed):
    conn = random_connection(seed)
    g = np.random.default_rng(seed).standard_normal((2, 2)) + 2 * np.eye(2)
    moved = ParabolicConnection(conn.system.conjugated(g), conn.exponents,
                                tuple(f.transformed(g) for f in conn.flags))
    assert check_compatibility(moved, 1e-8).passed


# -- classification -------------------------------------------------------

def test_classify_resonant():
    lam = [[E(0), E(1)], [E("1/3"), E("-1/3")], [E("1/5"), E("-1/5")], [E("-1/7"), E("-6/7")]]
    c = classify_lambda(ExponentData.from_table(lam))
    assert c.kind == "resonant" and c.witness == (0, 0, 1)


def test_classify_generic():
    rng = np.random.default_rng(1)
    vals = rng.standard_normal((4, 2)) * np.sqrt(2) + 1j * rng.standard_normal((4, 2)) * np.pi / 7
    vals[3, 1] -= vals.sum()
    c = classify_lambda(ExponentData.from_table(vals))
    assert c.kind == "generic" and c.exhaustive


def test_classify_reducible_special():
    # 1/5 + 3/10 + 1/6 + 1/3 = 1 uses two exponents at each puncture
    lam = [[E("1/5"), E("3/10"), E("1/7")], [E("1/6"), E("1/3"), E("-1/7")]]
    c = classify_lambda(ExponentData.from_table(lam))
    assert c.kind == "reducible_special"
    assert c.witness[0] in (1, 2)
    s, subsets = c.witness
    total = sum(lam[i][j] for i, sub in enumerate(subsets) for j in sub)
    assert total.is_integer()


def test_classify_shift_keeps_resonance():
    lam = [[E("1/3"), E("4/3")], [E("-1/3"), E("-4/3")]]
    shifted = [[E("1/3") + 2, E("4/3")], [E("-1/3") - 2, E("-4/3")]]
    for t in (lam, shifted):
        assert classify_lambda(ExponentData.from_table(t)).kind == "resonant"


# -- invariant subspaces and stability -----------------------------------

def test_invariant_subspaces_upper_triangular():
    A = [np.array([[0.1, 1], [0, 0.4]]), np.array([[0.2, -2], [0, -0.1]])]
    A.append(-sum(A))
    subs = residue_invariant_subspaces(_system(A, False))
    lines = [s for s in subs if s.rank == 1 and not s.family]
    assert len(lines) == 1
    v = lines[0].basis[:, 0]
    assert abs(v[1]) < 1e-12


def test_invariant_subspaces_irreducible():
    A1 = np.array([[0, 1], [0, 0]])
    A2 = np.array([[0, 0], [1, 0]])
    assert residue_invariant_subspaces(_system([A1, A2, -A1 - A2], False)) == []


def test_invariant_subspaces_rank_one_and_budget():
    assert residue_invariant_subspaces(_system([[[0.5]], [[-0.5]]], False)) == []
    with pytest.raises(RankBudgetExceeded):
        residue_invariant_subspaces(_system([np.zeros((4, 4))] * 2, False))


def _split_connection():
    a, c = [F(1, 5), F(3, 10), F(-1, 4), F(-1, 4)], [F(-1, 3), F(1, 6), F(1, 10), F(1, 15)]
    b = [1.0, -0.5, 0.7, -1.2]
    A = [np.array([[float(a[i]), b[i]], [0, float(c[i])]]) for i in range(4)]
    lam = [[E(c[0]), E(a[0])], [E(c[1]), E(a[1])], [E(a[2]), E(c[2])], [E(a[3]), E(c[3])]]
    return connection_from(A, range(4), 1.5 - 2j, lam=lam)


ALPHA_A = [["1/10", "9/10"], ["1/5", "4/5"], ["2/5", "1/2"], ["3/10", "7/10"]]
ALPHA_B = [["2/5", "1/2"], ["3/10", "7/10"], ["1/10", "9/10"], ["1/5", "4/5"]]


def _w(table):
    return Weights(tuple(tuple(F(x) for x in row) for row in table))


def test_stability_split_unstable_then_stable():
    conn = _split_connection()
    res = stability_test(conn, _w(ALPHA_A))
    assert res.verdict == "unstable"
    assert res.witness.candidate.dims == ((0, 1), (0, 1), (1, 0), (1, 0))
    assert (res.witness.lhs, res.witness.rhs) == (F(12, 5), F(39, 20))
    assert stability_test(conn, _w(ALPHA_B)).verdict == "stable"


def test_stability_irreducible_stable():
    conn = random_connection(2)
    w = _w([["1/9", "5/9"], ["2/9", "2/3"], ["1/3", "7/9"], ["4/9", "8/9"]])
    res = stability_test(conn, w)
    assert res.verdict == "stable" and res.comparisons == ()


def test_stability_rank_one():
    conn = connection_from([[[0.5]], [[-0.5]]], (0, 1), 0.5 + 2j)
    res = stability_test(conn, _w([["1/3"], ["1/2"]]))
    assert res.verdict == "stable"


def test_stability_empty_list_never_unstable():
    conn = _split_connection()
    assert stability_test(conn, _w(ALPHA_A), candidates=[]).verdict == "stable"


def test_stability_rank_four_undecided():
    from conftest import load
    inst = load("r4n3")
    res = stability_test(inst.connection(), inst.weights["alpha"])
    assert res.verdict == "undecided"


def test_inconsistent_candidate():
    conn = _split_connection()
    bad = StabilityCandidate(1, 0, ((1, 1), (0, 1), (0, 1), (0, 1)))
    with pytest.raises(InconsistentCandidate):
        stability_test(conn, _w(ALPHA_A), candidates=[bad])


def test_weights_validation():
    with pytest.raises(ValidationError):
        _w([["1/2", "1/3"]])
    with pytest.raises(ValidationError):
        _w([["1/4", "1/2"], ["1/4", "3/4"]])
    with pytest.raises(ValidationError):
        _w([["0", "1/2"]])


# -- dimension ------------------------------------------------------------

def test_moduli_dimension_values():
    assert moduli_dimension(0, 2, 4) == 2
    assert moduli_dimension(0, 2, 5) == 4  # see the decisions ledger on the (0, 2, 5) example


def test_moduli_dimension_warning():
    with pytest.warns(ModuliDimensionWarning):
        assert moduli_dimension(0, 1, 3) == 0
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        moduli_dimension(0, 2, 4)
