from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from iml.core import (ExactScalar, Flag, MarkedSphere, flag_subspace, is_integral, subspace_contains,
                      subspace_distance)
from iml.errors import GeometryTooTight, ValidationError


def test_flag_subspace_extremes():
    f = Flag.identity(3)
    assert np.array_equal(flag_subspace(f, 0), np.eye(3))
    assert flag_subspace(f, 3).shape == (3, 0)


def test_flag_subspace_swapped_basis():
    f = Flag(np.array([[0, 1], [1, 0]]))
    V = flag_subspace(f, 1)
    assert subspace_contains(V, [1, 0], 1e-12)
    assert not subspace_contains(V, [0, 1], 1e-12)


def test_flag_subspace_range():
    with pytest.raises(IndexError):
        flag_subspace(Flag.identity(2), 3)


def test_flag_chain_drops_one_dimension():
    rng = np.random.default_rng(0)
    f = Flag(rng.standard_normal((4, 4)))
    dims = [np.linalg.matrix_rank(flag_subspace(f, j)) if j < 4 else 0 for j in range(5)]
    assert dims == [4, 3, 2, 1, 0]


def test_singular_flag_rejected():
    with pytest.raises(ValidationError):
        Flag(np.array([[1, 1], [1, 1]]))


@pytest.mark.parametrize("V,w,expected", [
    ([[1], [0]], [1, 0], True),
    ([[1], [0]], [0, 1], False),
    ([[1], [1]], [1, -1], False),
    ([[1], [0]], [0, 0], True),
])
def test_subspace_contains_examples(V, w, expected):
    assert subspace_contains(np.array(V, dtype=complex), np.array(w, dtype=complex), 1e-12) is expected


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_subspace_contains_basis_invariant(seed):
    rng = np.random.default_rng(seed)
    V = rng.standard_normal((4, 2)) + 1j * rng.standard_normal((4, 2))
    g = rng.standard_normal((2, 2)) + 3 * np.eye(2)
    w_in = V @ rng.standard_normal(2)
    w_out = rng.standard_normal(4)
    for basis in (V, V @ g):
        assert subspace_contains(basis, w_in, 1e-9)
        assert subspace_contains(basis, w_out, 1e-9) == subspace_contains(V, w_out, 1e-9)
    assert subspace_distance(V, V @ g) < 1e-10


def test_exact_scalar_arithmetic():
    a = ExactScalar(Fraction(1, 2), Fraction(1, 3))
    b = ExactScalar.parse("-1/2")
    assert a + b == ExactScalar(0, Fraction(1, 3))
    assert (a * 2).re == 1
    assert (a - a) == 0
    assert ExactScalar(3).is_integer()
    assert not a.is_integer()
    assert complex(a) == complex(0.5, 1 / 3)
    assert str(ExactScalar(Fraction(1, 2), Fraction(-1, 4))) == "1/2-1/4i"


def test_is_integral_float_and_exact():
    assert is_integral(ExactScalar(2))
    assert is_integral(2.0 + 1e-12)
    assert not is_integral(0.5)


def test_marked_sphere_validation():
    with pytest.raises(ValidationError):
        MarkedSphere((0, 0), 1j)
    with pytest.raises(GeometryTooTight):
        MarkedSphere((0, 1), 1)
    with pytest.raises(ValidationError):
        MarkedSphere((), 1)
    s = MarkedSphere((0, 1, 3), 1j)
    assert s.n == 3 and s.min_separation() == 1.0
