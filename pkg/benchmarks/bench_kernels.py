"""Time the compiled and pure-Python kernel backends on cavity (1,1) blocks.

Usage: python3 benchmarks/bench_kernels.py [--grids 8 16 32] [--repeats 3] [--out bench.csv]
"""
import argparse
import csv
import sys
import timeit

import numpy as np
import scipy.sparse as sp

from msbench import kernels
from msbench.oseen import generate_oseen


def velocity_block(grid_n):
    prob = generate_oseen(grid_n, 0.01)
    D = prob.C.to_scipy()[: prob.p, : prob.p].tocsr()
    D.sort_indices()
    return D


def cases(D):
    n = D.shape[0]
    rp, ci, vals = D.indptr.astype(np.int64), D.indices.astype(np.int64), D.data
    csc = sp.csc_matrix(D)
    csc.sort_indices()
    cp, ri, cv = csc.indptr.astype(np.int64), csc.indices.astype(np.int64), csc.data
    x = np.ones(n)
    X = np.ones((n, 8))
    return {
        "matvec": lambda k: k.csr_matvec(rp, ci, vals, x),
        "dense_matmul": lambda k: k.csr_dense_matmul(rp, ci, vals, X),
        "ilut_1e-3": lambda k: k.ilut_factor(n, rp, ci, vals, 1e-3),
        "lu": lambda k: k.lu_factor(n, cp, ri, cv),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--grids", type=int, nargs="+", default=[8, 16, 32])
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--out")
    args = ap.parse_args(argv)

    backends = kernels.available_backends()
    if "cython" not in backends:
        print("compiled kernels are not built; only the Python backend is timed", file=sys.stderr)
    rows = []
    for grid_n in args.grids:
        D = velocity_block(grid_n)
        for name, fn in cases(D).items():
            times = {}
            for b in backends:
                mod = kernels.get_backend(b)
                times[b] = min(timeit.repeat(lambda: fn(mod), number=1, repeat=args.repeats))
            speedup = times["python"] / times["cython"] if "cython" in times else float("nan")
            rows.append({"grid": grid_n, "n": D.shape[0], "kernel": name,
                         "cython_s": times.get("cython", float("nan")),
                         "python_s": times["python"], "speedup": speedup})

    print(f"{'grid':>4} {'n':>6} {'kernel':>13} {'cython_s':>10} {'python_s':>10} {'speedup':>8}")
    for r in rows:
        print(f"{r['grid']:>4} {r['n']:>6} {r['kernel']:>13} {r['cython_s']:>10.4f} "
              f"{r['python_s']:>10.4f} {r['speedup']:>8.1f}")
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
