import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from iml.errors import ChartExit, ConfigurationCollision, OrderingCutCrossed, ValidationError
from iml.monodromy import monodromy_rep, rep_invariants
from iml.parabolic import build_flags
from iml.schlesinger import (DeformationPath, check_ordering, flow, horizontal_lift, schlesinger_rhs,
                             verify_isomonodromy)

from conftest import connection_from, load, random_connection

T4_PATH = DeformationPath(np.array([[0, 1, 2, 3], [0, 1, 2, 3 + 1j]]))


def commuting_connection():
    A = [np.diag([0.2, -0.3]), np.diag([0.1, 0.25]), np.diag([-0.3, 0.05])]
    return connection_from(A, (0, 1, 2), 1 - 2j)


# -- vector field ---------------------------------------------------------

def test_rhs_commuting_is_zero():
    A = np.array([np.diag([0.2, -0.3]), np.diag([0.1, 0.25]), np.diag([-0.3, 0.05])])
    assert np.array_equal(schlesinger_rhs([0, 1, 2], A, [0.3, -1, 2j]), np.zeros_like(A))


def test_rhs_two_punctures_cancel():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((2, 3, 3)) + 1j * rng.standard_normal((2, 3, 3))
    d = schlesinger_rhs([0, 1 + 1j], A, [0.2, -0.7j])
    assert np.abs(d.sum(axis=0)).max() < 1e-14


def test_rhs_hand_example():
    A1 = np.array([[0, 1], [0, 0]])
    A2 = np.array([[0, 0], [1, 0]])
    A = np.array([A1, A2, -A1 - A2], dtype=complex)
    d = schlesinger_rhs([0, 1, 2], A, [0, 1, 0])
    assert np.allclose(d[0], np.diag([1, -1]))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_rhs_sum_cancels(seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((4, 2, 2)) + 1j * rng.standard_normal((4, 2, 2))
    t = np.array([0, 1, 2.5, 1j])
    dt = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    assert np.abs(schlesinger_rhs(t, A, dt).sum(axis=0)).max() < 1e-12


def test_rhs_collision():
    with pytest.raises(ConfigurationCollision):
        schlesinger_rhs([0, 0], np.zeros((2, 2, 2)), [1, 0])


# -- flow -----------------------------------------------------------------

def test_flow_commuting_constant():
    conn = commuting_connection()
    fr = flow(conn, DeformationPath(np.array([[0, 1, 2], [0, 1, 2 + 1j], [0, 1.5, 2 + 1j]])))
    assert np.array_equal(fr.residues, conn.system.residues)
    assert fr.sum_drift == 0 and fr.spectrum_drift == 0


def test_flow_conservation_and_checkpoints(r2n4):
    conn = r2n4.connection()
    fr = flow(conn, T4_PATH)
    assert fr.sum_drift <= 1e-9 and fr.spectrum_drift <= 1e-8
    s = [c.s for c in fr.checkpoints]
    assert all(b > a for a, b in zip(s, s[1:]))
    for c in fr.checkpoints[::8]:
        sysm = conn.system.with_residues(c.residues, conn.sphere.moved(c.punctures))
        build_flags(sysm, conn.exponents)
    assert np.allclose(fr.endpoint.sphere.punctures, [0, 1, 2, 3 + 1j])


def test_flow_small_contractible_loop():
    conn = load("r2n4").connection()
    c = 3 + 0.25j
    ring = [[0, 1, 2, 3]] + [[0, 1, 2, c - 0.25j * np.exp(2j * np.pi * k / 12)] for k in range(1, 13)]
    fr = flow(conn, DeformationPath(np.array(ring)))
    assert np.abs(fr.residues - conn.system.residues).max() < 1e-7


def test_flow_reverse_composition(r2n4):
    conn = r2n4.connection()
    there = flow(conn, T4_PATH)
    back = flow(there.endpoint, T4_PATH.reversed())
    assert np.abs(back.residues - conn.system.residues).max() < 1e-7


def test_flow_collision_guard(r2n4):
    with pytest.raises(ConfigurationCollision):
        flow(r2n4.connection(), DeformationPath(np.array([[0, 1, 2, 3], [0, 1, 2, 2]])))


def test_flow_path_must_start_at_sphere(r2n4):
    with pytest.raises(ValidationError):
        flow(r2n4.connection(), DeformationPath(np.array([[0, 1, 2, 3.5], [0, 1, 2, 4]])))


def test_flow_backends_agree(r2n4):
    conn = r2n4.connection()
    a = flow(conn, T4_PATH, backend="numba").residues
    b = flow(conn, T4_PATH, backend="numpy").residues
    assert np.abs(a - b).max() < 1e-12


# -- isomonodromy ---------------------------------------------------------

def test_verify_commuting():
    conn = commuting_connection()
    rep = verify_isomonodromy(conn, DeformationPath(np.array([[0, 1, 2], [0, 1, 2.5 + 0.5j]])))
    assert rep.passed and rep.deviation < 1e-9


def test_verify_fixture_and_negative_control(r2n4):
    conn = r2n4.connection()
    good = verify_isomonodromy(conn, T4_PATH)
    assert good.passed and good.deviation <= 1e-6
    bad = verify_isomonodromy(conn, T4_PATH, corrupt=(3, 0))
    assert not bad.passed and bad.deviation >= 1e-3


def test_ordering_cut():
    conn = random_connection(1)
    # t_4 swings past t_3 as seen from the basepoint
    path = DeformationPath(np.array([[0, 1, 2, 3], [0, 1, 2, 3 + 3j], [0, 1, 2, 0.5 + 3j]]))
    with pytest.raises(OrderingCutCrossed):
        check_ordering(conn.sphere, path)
    with pytest.raises(OrderingCutCrossed):
        verify_isomonodromy(conn, path)


# -- horizontal lift ------------------------------------------------------

def test_lift_constant_path(r2n4):
    conn = r2n4.connection()
    lift = horizontal_lift(conn, DeformationPath(np.array([[0, 1, 2, 3], [0, 1, 2, 3]])))
    assert np.array_equal(lift.endpoint.system.residues, conn.system.residues)
    assert lift.moves == ()


def test_lift_matches_flow(r2n4):
    conn = r2n4.connection()
    a = horizontal_lift(conn, T4_PATH).endpoint.system.residues
    b = flow(conn, T4_PATH).residues
    assert np.abs(a - b).max() < 1e-12


def test_lift_through_chart_exit():
    inst = load("near_blowup")
    conn = inst.connection()
    with pytest.raises(ChartExit):
        horizontal_lift(conn, inst.path)
    lift = horizontal_lift(conn, inst.path, regularize=True)
    assert len(lift.moves) >= 1
    assert any(rec.kind == "elm" for m in lift.moves for rec in m.records)
    assert all(m.norm_after < m.norm_before for m in lift.moves)
    dev = rep_invariants(monodromy_rep(conn)).deviation(rep_invariants(monodromy_rep(lift.endpoint)))
    assert dev <= 1e-5
