"""Benchmark pipeline: problem setup, row scaling, method construction and sweeps."""
import csv
import io
import json
import os
import tempfile
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .aggregation import (
    aggregate_by_edges,
    aggregate_by_numbering,
    aggregate_overlapped,
    equal_sizes,
    overlap_widths,
    snap_sizes,
)
from .graph import build_graph
from .krylov import SolverConfig, gmres
from .mmio import load_matrix_market, read_vector
from .oseen import generate_oseen
from .partitioned import PartitionedMatrix, partition_system
from .precond import PcdInputs, build_identity, build_lsc, build_pcd, build_preconditioner
from .schur import VARIANTS, build_exact_schur, build_msc, worker_count
from .sparse import SparseMatrix
from .spectral import MAX_DENSE, preconditioned_spectra

__all__ = [
    "scale_rows",
    "random_saddle",
    "ProblemSpec",
    "MethodSpec",
    "BenchmarkSpec",
    "PreparedProblem",
    "prepare_problem",
    "build_method",
    "run_cell",
    "run_benchmark",
    "write_rows",
    "scaling_benchmark",
    "RESULT_COLUMNS",
]

METHODS = (*VARIANTS, "EXACT", "PCD", "LSC", "NONE")
RESULT_COLUMNS = [
    "method", "grid", "grid_kind", "nu", "n", "sz", "overlap", "nA", "nS", "sA", "tolA",
    "its", "setup_s", "solve_s", "ff", "converged", "final_residual", "status",
]


def scale_rows(C, b=None):
    """Divide each row by its signed largest-magnitude entry.

    Ties go to the lowest column. Returns ``(C_scaled, b_scaled, scales)``
    with ``C_scaled = diag(1/scales) C``.
    """
    m = C.to_scipy()
    lens = np.diff(m.indptr)
    if np.any(lens == 0):
        raise ValueError(f"row {int(np.flatnonzero(lens == 0)[0])} is identically zero")
    scales = np.empty(C.nrows)
    for i in range(C.nrows):
        row = m.data[m.indptr[i]:m.indptr[i + 1]]
        scales[i] = row[np.argmax(np.abs(row))]
    rows = C.row_ids()
    Cs = SparseMatrix(C.nrows, C.ncols, C.indptr, C.indices, C.data / scales[rows])
    bs = None if b is None else np.asarray(b, dtype=np.float64) / scales
    return Cs, bs, scales


def random_saddle(p, n_g, seed=0, density=0.1, g_shift=1.0, coupling=1.0):
    """Random nonsingular-block saddle system for property tests.

    ``D`` and ``G`` are diagonally dominant (so every principal submatrix
    is nonsingular); ``E`` and ``F`` are random sparse couplings.
    """
    rng = np.random.default_rng(seed)

    def rand(m, n, dens):
        return sp.random(m, n, density=dens, random_state=rng, data_rvs=rng.standard_normal,
                         format="csr")

    def dominant(m, shift):
        return m + sp.diags(abs(m).sum(axis=1).A1 + shift + rng.random(m.shape[0]))

    D = dominant(rand(p, p, density), 1.0)
    E = coupling * rand(p, n_g, max(density, 2.0 / p))
    F = coupling * rand(n_g, p, max(density, 2.0 / p))
    G = dominant(rand(n_g, n_g, density), g_shift)
    C = sp.bmat([[D, E], [F, G]], format="csr")
    return PartitionedMatrix(SparseMatrix.from_scipy(C), p)


@dataclass
class ProblemSpec:
    grid_n: int = 16
    nu: float = 0.1
    grid: str = "uniform"
    stretch: float = 1.056
    wind: str = "recirculating"
    matrix: str = None
    rhs: str = None
    p: int = None

    @property
    def label(self):
        if self.matrix:
            return os.path.basename(self.matrix)
        return f"{self.grid_n}x{self.grid_n}"


@dataclass
class MethodSpec:
    variant: str = "MSCN"
    sz: int = None
    overlap: int = None
    tolA: float = 1e-4
    sA: float = 400
    nA: int = 4
    radius: int = None
    partition: str = "saddle"

    def __post_init__(self):
        self.variant = self.variant.upper()
        if self.variant not in METHODS:
            raise ValueError(f"unknown method {self.variant!r}; choose from {', '.join(METHODS)}")
        if self.sA is None or (isinstance(self.sA, str) and self.sA.lower() in ("inf", "none")):
            self.sA = float("inf")


@dataclass
class BenchmarkSpec:
    problems: list
    methods: list
    solver: SolverConfig = field(default_factory=SolverConfig)
    output: str = "results.csv"
    format: str = None
    spectra: bool = False
    workers: int = 1

    def __post_init__(self):
        if not self.problems:
            raise ValueError("benchmark needs at least one problem")
        if not self.methods:
            raise ValueError("benchmark needs at least one method")
        self.problems = [p if isinstance(p, ProblemSpec) else ProblemSpec(**p) for p in self.problems]
        self.methods = [m if isinstance(m, MethodSpec) else MethodSpec(**m) for m in self.methods]
        if isinstance(self.solver, dict):
            self.solver = SolverConfig(**self.solver)
        if self.format is None:
            self.format = "json" if str(self.output).endswith(".json") else "csv"
        if self.format not in ("csv", "json"):
            raise ValueError("format must be csv or json")

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            data = json.load(fh)
        base = os.path.dirname(os.path.abspath(path))
        for prob in data.get("problems", []):
            for key in ("matrix", "rhs"):
                if prob.get(key) and not os.path.isabs(prob[key]):
                    prob[key] = os.path.join(base, prob[key])
        return cls(**data)


@dataclass
class PreparedProblem:
    """A row-scaled system with everything the methods need."""

    label: str
    grid_kind: str
    nu: float
    C: SparseMatrix
    b: np.ndarray
    p: int
    scales: np.ndarray
    aux: PcdInputs = None
    q_diag: np.ndarray = None
    _partitions: dict = field(default_factory=dict, repr=False)

    @property
    def n(self):
        return self.C.nrows

    def physics(self):
        return PartitionedMatrix(self.C, self.p)

    def partitioned(self, nA, mode="saddle"):
        key = (int(nA), mode)
        if key not in self._partitions:
            self._partitions[key] = partition_system(self.C, self.p, int(nA), mode)
        return self._partitions[key]


def prepare_problem(spec, scale=True):
    """Generate or load a problem and apply row scaling.

    PCD and LSC inputs are rescaled to stay consistent with the scaled
    rows: the pressure Laplacian by the pressure-row factors and the
    velocity mass diagonal by the velocity-row factors.
    """
    if spec.matrix:
        C = load_matrix_market(spec.matrix)
        b = read_vector(spec.rhs) if spec.rhs else C @ np.ones(C.ncols)
        if spec.p is None:
            raise ValueError("a loaded matrix needs the split size p")
        p, aux, q = int(spec.p), None, None
        kind, nu = "file", float("nan")
    else:
        prob = generate_oseen(spec.grid_n, spec.nu, spec.grid, spec.stretch, spec.wind)
        C, b, p, aux, q = prob.C, prob.rhs, prob.p, prob.aux, prob.q_diag
        kind, nu = spec.grid, spec.nu
    if scale:
        C, b, s = scale_rows(C, b)
    else:
        s = np.ones(C.nrows)
    if aux is not None:
        aux = PcdInputs(aux.A_p.scale_rows(1.0 / s[p:]), aux.D_p, aux.Q_p)
        q = q / s[:p]
    return PreparedProblem(spec.label, kind, nu, C, b, p, s, aux, q)


def _aggregates(P, method):
    n_g = P.n_g
    sz = method.sz or max(n_g // 8, 1)
    sz = min(sz, n_g)
    cuts = np.intersect1d(P.g_cuts, P.d_cuts[P.d_cuts <= n_g])
    sizes = snap_sizes(equal_sizes(n_g, sz), cuts)
    v = method.variant
    if v in ("OMSCN", "OMSCNR", "OLUM"):
        width = method.overlap if method.overlap is not None else sz
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            widths = overlap_widths(sizes, width, clip=True, cuts=cuts)
        return aggregate_overlapped(n_g, sizes, widths), sz
    if v in ("MSCE", "MSCER"):
        bounds = np.concatenate(([0], np.cumsum(sizes)))
        ranges = [range(a, b) for a, b in zip(bounds[:-1], bounds[1:])]
        radius = method.radius or sz
        return aggregate_by_edges(build_graph(P.C), P.p, ranges, radius, P.d_cuts), sz
    if n_g > P.p:
        raise ValueError("numbering-based aggregates need n_g <= p")
    return aggregate_by_numbering(n_g, sizes), sz


def build_method(prob, method, workers=None):
    """Construct the preconditioner for one method.

    Returns ``(system, preconditioner, info)`` where ``system`` is the
    PartitionedMatrix the preconditioner acts on. Partitioning time is not
    included in ``info["setup_s"]``.
    """
    v = method.variant
    info = {"sz": None, "nS": None}
    if v in ("PCD", "LSC", "NONE"):
        P = prob.physics()
        t0 = time.perf_counter()
        if v == "PCD":
            if prob.aux is None:
                raise ValueError("PCD needs auxiliary pressure operators")
            B = build_pcd(P, prob.aux, method.tolA, method.sA)
        elif v == "LSC":
            if prob.q_diag is None:
                raise ValueError("LSC needs the velocity mass diagonal")
            B = build_lsc(P, prob.q_diag, method.tolA, method.sA)
        else:
            B = build_identity(P)
        info["setup_s"] = time.perf_counter() - t0
        info["nA"] = len(B.d_solver.ranges) if B.d_solver else 0
        return P, B, info
    P = prob.partitioned(method.nA, method.partition)
    t0 = time.perf_counter()
    if v == "EXACT":
        schur = build_exact_schur(P)
        info["nS"] = 1
    else:
        agg, sz = _aggregates(P, method)
        schur = build_msc(P, agg, v, workers)
        info["sz"], info["nS"] = sz, agg.k
    B = build_preconditioner(P, schur, method.tolA, method.sA)
    info["setup_s"] = time.perf_counter() - t0
    info["nA"] = len(P.d_block_ranges)
    return P, B, info


def run_cell(prob, method, solver, spectra=False, workers=None):
    """Build, solve and summarise one (problem, method) cell; never raises."""
    row = {
        "method": method.variant, "grid": prob.label, "grid_kind": prob.grid_kind,
        "nu": prob.nu, "n": prob.n, "sz": method.sz, "overlap": method.overlap,
        "nA": None, "nS": None, "sA": method.sA, "tolA": method.tolA, "its": None,
        "setup_s": None, "solve_s": None, "ff": None, "converged": False,
        "final_residual": None, "status": "",
    }
    extra = {}
    try:
        P, B, info = build_method(prob, method, workers)
        row.update(nA=info["nA"], nS=info["nS"], setup_s=info["setup_s"], ff=B.fill)
        if info["sz"] is not None:
            row["sz"] = info["sz"]
        b = P.to_working(prob.b)
        x, rep = gmres(P.C, B, b, solver)
        row.update(
            its=rep.iterations, solve_s=rep.solve_seconds, converged=rep.converged,
            final_residual=rep.final_residual, status="ok" if rep.converged else "NC",
        )
        extra["residual_history"] = rep.residual_history
        if spectra and P.n <= MAX_DENSE:
            left, right = preconditioned_spectra(P.C, B)
            extra["spectra"] = {"left": left, "right": right}
    except Exception as exc:  # recorded per cell, the sweep continues
        row["status"] = f"error: {type(exc).__name__}: {exc}"
    return row, extra


def _atomic_write_text(path, text):
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _clean(v):
    if isinstance(v, (np.floating, np.integer)):
        v = v.item()
    if isinstance(v, float) and (np.isinf(v) or np.isnan(v)):
        return str(v)
    return v


def write_rows(rows, path, fmt="csv", columns=None):
    columns = columns or RESULT_COLUMNS
    if fmt == "json":
        text = json.dumps([{k: _clean(r.get(k)) for k in columns} for r in rows], indent=2)
    else:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=columns, extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: ("" if r.get(k) is None else _clean(r.get(k))) for k in columns})
        text = buf.getvalue()
    _atomic_write_text(path, text)


def _spectra_path(output):
    stem, _ = os.path.splitext(os.fspath(output))
    return stem + "_spectra.csv"


def run_benchmark(spec, workers=None):
    """Run every (problem, method) cell and write the results table.

    Cells run on up to ``spec.workers`` threads, capped by
    ``MSBENCH_THREADS``; rows keep the spec's order.
    """
    prepared = []
    for ps in spec.problems:
        try:
            prepared.append(prepare_problem(ps))
        except Exception as exc:
            prepared.append(exc)
    cells = [(i, m) for i in range(len(prepared)) for m in spec.methods]

    def go(cell):
        i, m = cell
        prob = prepared[i]
        if isinstance(prob, Exception):
            ps = spec.problems[i]
            return {"method": m.variant, "grid": ps.label, "nu": ps.nu,
                    "converged": False, "status": f"error: {prob}"}, {}
        return run_cell(prob, m, spec.solver, spec.spectra)

    nw = spec.workers if workers is None else workers
    env = os.environ.get("MSBENCH_THREADS")
    if env:
        nw = min(nw, worker_count())
    if nw > 1:
        # partitions are cached per problem; build them up front
        for i, prob in enumerate(prepared):
            if not isinstance(prob, Exception):
                for m in spec.methods:
                    if m.variant not in ("PCD", "LSC", "NONE"):
                        try:
                            prob.partitioned(m.nA, m.partition)
                        except Exception:
                            pass
        with ThreadPoolExecutor(max_workers=nw) as ex:
            results = list(ex.map(go, cells))
    else:
        results = [go(c) for c in cells]
    rows = [r for r, _ in results]
    write_rows(rows, spec.output, spec.format)
    if spec.spectra:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["method", "grid", "nu", "side", "re", "im"])
        for (r, extra) in results:
            for side, vals in extra.get("spectra", {}).items():
                for z in vals:
                    w.writerow([r["method"], r["grid"], r["nu"], side, repr(z.real), repr(z.imag)])
        _atomic_write_text(_spectra_path(spec.output), buf.getvalue())
    return rows


def scaling_benchmark(k=32, sz=200, threads=(1, 2, 4), repeats=3, seed=0, density=0.01):
    """Wall time of MSCN construction for several thread counts.

    The test system has ``k`` aggregates of size ``sz`` on both sides.
    Block extraction is done once before timing. Returns rows with the
    best-of-``repeats`` time per thread count.
    """
    n_g = k * sz
    P = random_saddle(n_g, n_g, seed=seed, density=density)
    agg = aggregate_by_numbering(n_g, [sz] * k)
    build_msc(P, agg, "MSCN", workers=1)
    rows = []
    base = None
    for t in threads:
        best = np.inf
        for _ in range(repeats):
            t0 = time.perf_counter()
            build_msc(P, agg, "MSCN", workers=t)
            best = min(best, time.perf_counter() - t0)
        base = best if base is None else base
        rows.append({"threads": t, "aggregates": k, "size": sz, "seconds": best,
                     "ratio_to_1": best / base, "cpus": os.cpu_count()})
    return rows
