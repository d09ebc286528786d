"""Benchmark the RK4 propagator backends on representative link problems.

Usage: python benchmarks/bench_propagator.py [--csv out.csv]

Times the pure-Python (numpy/scipy) backend against the compiled Cython
kernel on the same Liouvillians and reports steps/second and speedup.
"""

import argparse
import math
import time

import numpy as np

from warmlink import engine
from warmlink.config import preset_config
from warmlink.dynamics import ground_state, liouvillian
from warmlink.results import write_csv

TWO_PI = 2 * math.pi


def cases():
    cfg = preset_config()
    link = cfg.link(two_qubit=False)
    link2 = cfg.link()

    cooled = link.system(d_coupler="on")
    yield "qubit+cooled-mode", cooled, 4000

    hot = link.system(d_coupler="off")
    yield "qubit+hot-mode", hot, 1500

    transfer = link2.system(d_coupler="off", cutoff=12)
    yield "two-qubit transfer", transfer, 1500


def run_case(name, model, n_steps):
    L = liouvillian(model.hamiltonian(), model.collapse_operators())
    d = int(np.prod(model.dims))
    v0 = ground_state(model.dims).matrix.reshape(-1)
    dt = 0.05e-9
    rows = []
    results = {}
    for backend in engine.available_backends():
        t0 = time.perf_counter()
        out = engine.propagate(L, v0, dt, n_steps, n_steps, backend=backend)
        wall = time.perf_counter() - t0
        results[backend] = (wall, out[-1])
        rows.append((name, backend, d, L.nnz, n_steps, wall, n_steps / wall))
    if len(results) == 2:
        diff = np.max(np.abs(results["python"][1] - results["cython"][1]))
        speedup = results["python"][0] / results["cython"][0]
    else:
        diff, speedup = 0.0, 1.0
    return rows, diff, speedup


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--csv", default=None, help="write timing rows to CSV")
    args = parser.parse_args()

    all_rows = []
    print(f"{'case':24s} {'backend':8s} {'dim':>5s} {'nnz':>9s} {'steps':>6s} "
          f"{'wall s':>8s} {'steps/s':>9s}")
    for name, model, n_steps in cases():
        rows, diff, speedup = run_case(name, model, n_steps)
        for r in rows:
            print(f"{r[0]:24s} {r[1]:8s} {r[2]:5d} {r[3]:9d} {r[4]:6d} "
                  f"{r[5]:8.2f} {r[6]:9.0f}")
            all_rows.append(r)
        print(f"{'':24s} backend agreement {diff:.2e}, speedup x{speedup:.2f}")
    if args.csv:
        write_csv(args.csv, ["case", "backend", "dim", "nnz", "steps", "wall_s",
                             "steps_per_s"], all_rows)
        print(f"wrote {args.csv}")


if __name__ == "__main__":
    main()
