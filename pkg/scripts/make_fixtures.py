"""Regenerate the shipped instance files under src/iml/fixtures.

    python scripts/make_fixtures.py
"""
from fractions import Fraction
from pathlib import Path

import numpy as np

from iml.core import MarkedSphere
from iml.instance import SCHEMA_VERSION, connection_to_instance, dumps
from iml.parabolic import ExponentData, FuchsianSystem, ParabolicConnection
from iml.schlesinger import DeformationPath, flow
from iml.transforms import elm

OUT = Path(__file__).resolve().parents[1] / "src" / "iml" / "fixtures"


def random_residues(seed, r, n, scale=0.6):
    rng = np.random.default_rng(seed)
    A = []
    for _ in range(n - 1):
        a = rng.standard_normal((r, r)) + 1j * rng.standard_normal((r, r))
        A.append(scale * a / np.linalg.norm(a))
    A.append(-sum(A))
    return np.array(A)


def base(name, r, t, z0, A, **extra):
    d = {"schema_version": SCHEMA_VERSION, "name": name, "rank": r,
         "punctures": list(t), "include_infinity": False, "basepoint": z0, "residues": A}
    d.update(extra)
    return d


def write(name, data):
    (OUT / f"{name}.json").write_text(dumps(data), encoding="utf-8")


def main():
    OUT.mkdir(exist_ok=True)
    write("scalar_r1n2", base("scalar_r1n2", 1, (0, 1), 0.5 + 2j, np.array([[[0.5]], [[-0.5]]]),
                              **{"lambda": [["1/2"], ["-1/2"]], "seed": 0}))

    lam = [["1/5", "-3/10", "1/7"], ["1/10", "1/4", "-2/5"], ["-3/10", "1/20", "1/3"]]
    # last row closes the sums column-wise
    cols = [sum(Fraction(row[j]) for row in lam[:3]) for j in range(3)]
    lam.append([str(-c) for c in cols])
    A = np.array([np.diag([float(Fraction(x)) for x in row]) for row in lam], dtype=complex)
    write("abelian_r3n4", base("abelian_r3n4", 3, (0, 1, 2, 3), 1.5 - 2j, A,
                               **{"lambda": lam, "seed": 0,
                                  "deformation_path": [[0, 1, 2, 3], [0, 1, 2, [3, 1]]]}))

    A = random_residues(2, 2, 4)
    path = [[0, 1, 2, 3], [0, 1, 2, [3, 1]]]
    weights = {"alpha": [["1/9", "5/9"], ["2/9", "2/3"], ["1/3", "7/9"], ["4/9", "8/9"]]}
    write("r2n4", base("r2n4", 2, (0, 1, 2, 3), 1.5 - 2j, A, seed=2, deformation_path=path, weights=weights,
                       script=["elm i=1 j=1", "elm inverse"]))

    lam_bad = [[complex(v) for v in np.linalg.eigvals(a)] for a in A]
    lam_bad[0] = [lam_bad[0][0] + 0.01, lam_bad[0][1] - 0.01]
    write("r2n4_corrupted_lambda", base("r2n4_corrupted_lambda", 2, (0, 1, 2, 3), 1.5 - 2j, A, seed=2,
                                        **{"lambda": lam_bad}))

    write("r2n4_collision", base("r2n4_collision", 2, (0, 1, 2, 3), 1.5 - 2j, A, seed=2,
                                 deformation_path=[[0, 1, 2, 3], [0, 1, 2, 2]]))

    write("r2n5", base("r2n5", 2, (0, 1, 2, 3, 4), 2 - 2j, random_residues(5, 2, 5), seed=5))
    write("r2n3", base("r2n3", 2, (0, 1, 2), 1 - 2j, random_residues(3, 2, 3), seed=3))

    a = ["1/5", "3/10", "-1/4", "-1/4"]
    c = ["-1/3", "1/6", "1/10", "1/15"]
    b = [1.0, -0.5, 0.7, -1.2]
    A = np.array([[[float(Fraction(a[i])), b[i]], [0, float(Fraction(c[i]))]] for i in range(4)], dtype=complex)
    # invariant line e1 sits in the last flag step at punctures 1, 2 and in the first at 3, 4
    lam = [[c[0], a[0]], [c[1], a[1]], [a[2], c[2]], [a[3], c[3]]]
    write("split_r2n4", base("split_r2n4", 2, (0, 1, 2, 3), 1.5 - 2j, A, seed=0, **{
        "lambda": lam,
        "weights": {"alpha_A": [["1/10", "9/10"], ["1/5", "4/5"], ["2/5", "1/2"], ["3/10", "7/10"]],
                    "alpha_B": [["2/5", "1/2"], ["3/10", "7/10"], ["1/10", "9/10"], ["1/5", "4/5"]]},
        "notes": "upper-triangular residues; span(e1) is the only invariant line (degree 0, "
                 "flag dims (0,1),(0,1),(1,0),(1,0)); alpha_A destabilizes it, alpha_B does not"}))

    A = random_residues(4, 4, 3, scale=0.8)
    write("r4n3", base("r4n3", 4, (0, 1, 2), 1 - 2j, A, seed=4, weights={"alpha": [
        ["1/20", "3/20", "5/20", "7/20"], ["9/20", "11/20", "13/20", "15/20"],
        ["2/25", "4/25", "6/25", "17/20"]]}))

    write("near_blowup", near_blowup())


def near_blowup():
    rng = np.random.default_rng(11)
    xs = 0.5 + 1.0j
    lam = (0.31 + 0.05j, -0.17)
    D = np.diag([0.41, -0.41])
    A3 = np.array([[lam[1], 0.4], [0, lam[0]]])
    A1 = 0.5 * (rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)))
    A2 = D - A1 - A3
    tstar = (0, 1, xs)
    sysm = FuchsianSystem(MarkedSphere(tstar, 0.5 - 1j, True), np.array([A1, A2, A3]))
    ex = ExponentData.from_table([np.linalg.eigvals(A1), np.linalg.eigvals(A2), lam])
    conn = ParabolicConnection.build(sysm, ex)
    x0, x1 = xs - 0.4, xs + 0.4
    c0 = flow(conn, DeformationPath.straight(tstar, (0, 1, x0))).endpoint
    S, _ = elm(c0, 2, 1, complement=np.array([1, 0]))
    d = connection_to_instance(S)
    d.update({"name": "near_blowup", "seed": 11,
              "deformation_path": [[0, 1, x0], [0, 1, x1]],
              "flow_options": {"regularize": True},
              "notes": "the plain flow leaves the trivial-bundle chart midway; the lift recovers it "
                       "with one elementary transform"})
    return d


if __name__ == "__main__":
    main()
