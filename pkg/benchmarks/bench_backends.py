"""Compare the numba and numpy kernels on the shipped r=2 n=4 fixture.

    python benchmarks/bench_backends.py [--repeat 3]

Times a full monodromy representation, a Schlesinger flow along the
fixture's path and a 10^5-step oracle transport on each backend, and
reports the largest difference between the two results.
"""
import argparse
import time
from importlib import resources

import numpy as np

from iml.instance import load_instance
from iml.monodromy import monodromy_rep, oracle_transport, standard_loops
from iml.schlesinger import flow


def _best(fn, repeat):
    out, best = None, float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return out, best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    path = resources.files("iml") / "fixtures" / "r2n4.json"
    inst = load_instance(str(path))
    conn = inst.connection()
    loop = standard_loops(conn.sphere)[0].vertices

    jobs = {
        "monodromy": lambda b: monodromy_rep(conn, backend=b, threads=1).matrices,
        "flow": lambda b: flow(conn, inst.path, backend=b).residues,
        "oracle 1e5": lambda b: oracle_transport(conn.system, loop, 100_000, backend=b),
    }
    print(f"{'job':<12}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>10}{'max diff':>12}")
    for name, job in jobs.items():
        job("numba")  # compile outside the timed runs
        a, ta = _best(lambda: job("numba"), args.repeat)
        b, tb = _best(lambda: job("numpy"), args.repeat)
        diff = float(np.abs(np.asarray(a) - np.asarray(b)).max())
        print(f"{name:<12}{ta:>12.4f}{tb:>12.4f}{tb / ta:>10.2f}{diff:>12.2e}")


if __name__ == "__main__":
    main()
