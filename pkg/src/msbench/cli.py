"""Command line entry point: ``msbench run|solve|gen|scaling``."""
import argparse
import json
import os
import sys

import numpy as np

from .harness import (
    BenchmarkSpec,
    MethodSpec,
    PreparedProblem,
    ProblemSpec,
    prepare_problem,
    run_benchmark,
    run_cell,
    scale_rows,
    scaling_benchmark,
    write_rows,
)
from .krylov import SolverConfig
from .mmio import load_matrix_market, read_vector, write_matrix_market, write_vector
from .oseen import generate_oseen
from .precond import PcdInputs


def _load_aux(directory, p, scales):
    if not directory:
        return None, None
    aux = PcdInputs(
        A_p=load_matrix_market(os.path.join(directory, "A_p.mtx")).scale_rows(1.0 / scales[p:]),
        D_p=load_matrix_market(os.path.join(directory, "D_p.mtx")),
        Q_p=load_matrix_market(os.path.join(directory, "Q_p.mtx")),
    )
    q_path = os.path.join(directory, "q_diag.mtx")
    q = read_vector(q_path) / scales[:p] if os.path.exists(q_path) else None
    return aux, q


def cmd_run(args):
    spec = BenchmarkSpec.from_json(args.spec)
    if args.output:
        spec.output = args.output
        spec.format = "json" if args.output.endswith(".json") else "csv"
    if args.spectra:
        spec.spectra = True
    rows = run_benchmark(spec, workers=args.workers)
    for r in rows:
        print(f"{r['method']:>7} {r['grid']:>10} nu={r['nu']} its={r.get('its')} "
              f"ff={r.get('ff')} status={r.get('status')}")
    print(f"wrote {spec.output}")
    return 0 if all(r.get("status") == "ok" for r in rows) else 1


def cmd_solve(args):
    if args.matrix:
        if args.split is None:
            raise SystemExit("--split is required with --matrix")
        C = load_matrix_market(args.matrix)
        b = read_vector(args.rhs) if args.rhs else C @ np.ones(C.ncols)
        Cs, bs, s = scale_rows(C, b)
        aux, q = _load_aux(args.aux, args.split, s)
        prob = PreparedProblem(os.path.basename(args.matrix), "file", float("nan"),
                               Cs, bs, args.split, s, aux, q)
    else:
        prob = prepare_problem(ProblemSpec(
            grid_n=args.grid, nu=args.nu,
            grid="stretched" if args.stretch else "uniform",
            stretch=args.stretch or 1.056, wind=args.wind,
        ))
    method = MethodSpec(variant=args.method, sz=args.sz, overlap=args.overlap, tolA=args.tolA,
                        sA=args.sA, nA=args.nA, radius=args.radius, partition=args.partition)
    solver = SolverConfig(restart=args.restart, max_iters=args.maxit, rel_tol=args.tol,
                          side=args.side)
    row, extra = run_cell(prob, method, solver, spectra=args.spectra)
    print(json.dumps({k: (v if not isinstance(v, np.generic) else v.item())
                      for k, v in row.items()}, default=str))
    if args.out:
        write_rows([row], args.out, "json" if args.out.endswith(".json") else "csv")
    if args.spectra:
        if "spectra" not in extra:
            print("spectra skipped: system larger than the dense limit", file=sys.stderr)
        else:
            path = args.spectra_out or "spectra.csv"
            with open(path, "w") as fh:
                fh.write("side,re,im\n")
                for side, vals in extra["spectra"].items():
                    for z in vals:
                        fh.write(f"{side},{z.real!r},{z.imag!r}\n")
            print(f"wrote {path}")
    if args.history:
        with open(args.history, "w") as fh:
            fh.write("step,relres\n")
            for i, r in enumerate(extra.get("residual_history", [])):
                fh.write(f"{i},{r!r}\n")
    return 0 if row["status"] == "ok" else 1


def cmd_gen(args):
    prob = generate_oseen(args.grid, args.nu, "stretched" if args.stretch else "uniform",
                          args.stretch or 1.056, args.wind)
    os.makedirs(args.out, exist_ok=True)
    write_matrix_market(os.path.join(args.out, "C.mtx"), prob.C)
    write_vector(os.path.join(args.out, "b.mtx"), prob.rhs)
    write_matrix_market(os.path.join(args.out, "A_p.mtx"), prob.aux.A_p)
    write_matrix_market(os.path.join(args.out, "D_p.mtx"), prob.aux.D_p)
    write_matrix_market(os.path.join(args.out, "Q_p.mtx"), prob.aux.Q_p)
    write_vector(os.path.join(args.out, "q_diag.mtx"), prob.q_diag)
    meta = {"grid_n": prob.grid_n, "nu": prob.nu, "grid": prob.grid, "stretch": prob.stretch,
            "wind": prob.wind, "n": prob.n, "p": prob.p, "n_u": prob.n_u, "n_v": prob.n_v}
    with open(os.path.join(args.out, "meta.json"), "w") as fh:
        json.dump(meta, fh, indent=2)
    print(f"wrote {args.out}: n={prob.n} p={prob.p} nnz={prob.C.nnz}")
    return 0


def cmd_scaling(args):
    threads = [int(t) for t in args.threads.split(",")]
    rows = scaling_benchmark(args.aggregates, args.size, threads, args.repeats, args.seed,
                             args.density)
    for r in rows:
        print(f"threads={r['threads']} seconds={r['seconds']:.4f} ratio={r['ratio_to_1']:.3f}")
    if args.out:
        write_rows(rows, args.out, "csv", list(rows[0].keys()))
    return 0


def build_parser():
    ap = argparse.ArgumentParser(prog="msbench", description=__doc__)
    sub = ap.add_subparsers(dest="cmd", required=True)

    r = sub.add_parser("run", help="run a JSON benchmark spec")
    r.add_argument("spec")
    r.add_argument("--output", "-o")
    r.add_argument("--spectra", action="store_true")
    r.add_argument("--workers", type=int)
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("solve", help="solve one system with one method")
    src = s.add_argument_group("system")
    src.add_argument("--matrix", help="Matrix Market file of the whole system")
    src.add_argument("--split", type=int, help="size of the (1,1) block")
    src.add_argument("--rhs", help="Matrix Market right-hand side (default C*1)")
    src.add_argument("--aux", help="directory with A_p/D_p/Q_p/q_diag.mtx for PCD and LSC")
    src.add_argument("--grid", type=int, default=16, help="generate a cavity problem instead")
    src.add_argument("--nu", type=float, default=0.1)
    src.add_argument("--stretch", type=float)
    src.add_argument("--wind", default="recirculating", choices=["recirculating", "lid-picard"])
    s.add_argument("--method", default="MSCN")
    s.add_argument("--sz", type=int)
    s.add_argument("--overlap", type=int)
    s.add_argument("--tolA", type=float, default=1e-4)
    s.add_argument("--sA", type=float, default=400)
    s.add_argument("--nA", type=int, default=4)
    s.add_argument("--radius", type=int)
    s.add_argument("--partition", default="saddle", choices=["saddle", "physics", "none"])
    s.add_argument("--restart", type=int, default=300)
    s.add_argument("--maxit", type=int, default=3000)
    s.add_argument("--tol", type=float, default=1e-9)
    s.add_argument("--side", default="right", choices=["left", "right"])
    s.add_argument("--spectra", action="store_true")
    s.add_argument("--spectra-out")
    s.add_argument("--history", help="write the residual history as CSV")
    s.add_argument("--out", help="write the result row (csv or json)")
    s.set_defaults(func=cmd_solve)

    g = sub.add_parser("gen", help="write a cavity problem as Matrix Market files")
    g.add_argument("--grid", type=int, required=True)
    g.add_argument("--nu", type=float, required=True)
    g.add_argument("--stretch", type=float)
    g.add_argument("--wind", default="recirculating", choices=["recirculating", "lid-picard"])
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    c = sub.add_parser("scaling", help="thread scaling of mini Schur construction")
    c.add_argument("--aggregates", type=int, default=32)
    c.add_argument("--size", type=int, default=200)
    c.add_argument("--threads", default="1,2,4")
    c.add_argument("--repeats", type=int, default=3)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--density", type=float, default=0.01)
    c.add_argument("--out")
    c.set_defaults(func=cmd_scaling)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
