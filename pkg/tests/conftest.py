from importlib import resources

import numpy as np
import pytest

from iml.core import MarkedSphere
from iml.instance import load_instance
from iml.parabolic import ExponentData, FuchsianSystem, ParabolicConnection


def fixture_path(name: str) -> str:
    return str(resources.files("iml") / "fixtures" / f"{name}.json")


def load(name: str):
    return load_instance(fixture_path(name))


def random_residues(seed, r, n, scale=0.6):
    """n residues of Frobenius norm ``scale`` (the last closes the sum to zero)."""
    rng = np.random.default_rng(seed)
    A = []
    for _ in range(n - 1):
        a = rng.standard_normal((r, r)) + 1j * rng.standard_normal((r, r))
        A.append(scale * a / np.linalg.norm(a))
    A.append(-sum(A))
    return np.array(A)


def connection_from(residues, punctures, basepoint, include_infinity=False, lam=None):
    sphere = MarkedSphere(tuple(punctures), basepoint, include_infinity)
    system = FuchsianSystem(sphere, np.asarray(residues, dtype=complex))
    if lam is None:
        lam = [np.linalg.eigvals(A) for A in system.residues]
    return ParabolicConnection.build(system, ExponentData.from_table(lam))


def random_connection(seed, r=2, n=4, scale=0.6):
    t = tuple(range(n))
    return connection_from(random_residues(seed, r, n, scale), t, (n - 1) / 2 - 2j)


@pytest.fixture(scope="session")
def r2n4():
    return load("r2n4")
