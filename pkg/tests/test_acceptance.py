"""Numbered acceptance criteria; each prints a PASS/FAIL line in the summary."""
import os
import time
import warnings

import numpy as np
import pytest

from conftest import record, worked_example
from msbench.aggregation import (
    aggregate_by_edges,
    aggregate_by_numbering,
    aggregate_overlapped,
    equal_sizes,
    overlap_widths,
)
from msbench.graph import build_graph
from msbench.harness import (
    MethodSpec,
    ProblemSpec,
    prepare_problem,
    random_saddle,
    run_cell,
    scale_rows,
    scaling_benchmark,
)
from msbench.krylov import SolverConfig
from msbench.oseen import generate_oseen
from msbench.partitioned import PartitionedMatrix
from msbench.precond import build_pcd, build_preconditioner
from msbench.schur import VARIANTS, build_exact_schur, build_msc
from msbench.sparse import SparseMatrix, extract_block, factor_exact, factor_ilut
from msbench.spectral import (
    count_unit_eigenvalues,
    match_multisets,
    preconditioned_spectra,
    spectrum,
    trailing_spectrum,
)

pytestmark = pytest.mark.acceptance

SPECTRAL_SIZES = [(20, 5), (48, 16), (90, 24), (140, 40), (200, 60)]
SPECTRAL_VARIANTS = ["MSCN", "LUM", "OMSCN"]
GRIDS = (16, 32)
VISCOSITIES = (0.1, 0.01, 0.002)
OSEEN_VARIANTS = ("MSCN", "OMSCN", "LUM")


def spectral_case(p, n_g, seed, variant):
    C = random_saddle(p, n_g, seed=seed, density=min(0.2, 6.0 / p))
    sizes = equal_sizes(n_g, max(n_g // 4, 2))
    if variant.startswith("O"):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            agg = aggregate_overlapped(n_g, sizes, overlap_widths(sizes, 2, clip=True))
    else:
        agg = aggregate_by_numbering(n_g, sizes)
    B = build_preconditioner(C, build_msc(C, agg, variant), tolA=0.0, sA=np.inf)
    return C, B


@pytest.fixture(scope="module")
def spectral_results():
    out = []
    t0 = time.perf_counter()
    for seed, (p, n_g) in enumerate(SPECTRAL_SIZES):
        for variant in SPECTRAL_VARIANTS:
            C, B = spectral_case(p, n_g, seed, variant)
            left, right = preconditioned_spectra(C.C, B)
            S = build_exact_schur(C).s_hat.toarray()
            ref = spectrum(np.linalg.solve(B.schur.s_hat.toarray(), S))
            out.append({
                "p": p, "variant": variant, "units": count_unit_eigenvalues(left, 1e-6),
                "trailing": match_multisets(trailing_spectrum(left, p), ref),
                "similar": match_multisets(left, right),
            })
    return out, time.perf_counter() - t0


def test_criterion_01_unit_eigenvalues(spectral_results):
    rows, seconds = spectral_results
    short = [r for r in rows if r["units"] < r["p"]]
    ok = not short and seconds < 30.0
    record(1, ok, f"{len(rows)} systems x variants, {len(short)} short of p unit "
                  f"eigenvalues, {seconds:.1f}s")
    assert ok


def test_criterion_02_trailing_spectrum(spectral_results):
    rows, _ = spectral_results
    worst_t = max(r["trailing"] for r in rows)
    worst_s = max(r["similar"] for r in rows)
    ok = worst_t <= 1e-6 and worst_s <= 1e-6
    record(2, ok, f"max trailing mismatch {worst_t:.2e}, max left/right mismatch {worst_s:.2e}")
    assert ok


@pytest.mark.slow
def test_criterion_03_exact_schur_oracle():
    its = {}
    exact = MethodSpec(variant="EXACT", tolA=0.0, sA=np.inf, partition="none")
    for grid_n, nu, kind in [(8, 0.1, "uniform"), (16, 0.01, "uniform"),
                             (16, 0.002, "stretched"), (24, 0.01, "uniform")]:
        prob = prepare_problem(ProblemSpec(grid_n=grid_n, nu=nu, grid=kind))
        assert prob.n <= 2000
        row, _ = run_cell(prob, exact, SolverConfig())
        its[(grid_n, nu, kind)] = (row["its"], row["converged"])
    ok = all(c and i is not None and i <= 2 for i, c in its.values())
    record(3, ok, "iterations " + ", ".join(f"{k[0]}/{k[1]}/{k[2][0]}={v[0]}"
                                             for k, v in its.items()))
    assert ok


def dense_local(C, g_idx, d_idx, variant):
    D, E, F, G = (m.toarray() for m in (C.D, C.E, C.F, C.G))
    G_ii = G[np.ix_(g_idx, g_idx)]
    if variant in ("LUM", "OLUM"):
        return G_ii
    E_ii = E[np.ix_(d_idx, g_idx)]
    if variant.endswith("R"):
        comp = np.zeros_like(E_ii)
        for i, row in enumerate(E_ii):
            if row.any():
                j = i if E_ii.shape[0] == E_ii.shape[1] else int(np.argmax(np.abs(row)))
                comp[i, j] = row.sum()
        E_ii = comp
    return G_ii - F[np.ix_(g_idx, d_idx)] @ np.linalg.inv(D[np.ix_(d_idx, d_idx)]) @ E_ii


def variant_aggregates(C, variant, rng):
    n_g = C.n_g
    sizes = equal_sizes(n_g, int(rng.integers(4, 16)))
    if variant in ("MSCE", "MSCER"):
        bounds = np.cumsum([0] + sizes)
        ranges = [range(a, b) for a, b in zip(bounds[:-1], bounds[1:])]
        return aggregate_by_edges(build_graph(C.C), C.p, ranges, int(rng.integers(1, 3)))
    if variant.startswith("O"):
        return aggregate_overlapped(n_g, sizes, overlap_widths(sizes, int(rng.integers(1, 4))))
    return aggregate_by_numbering(n_g, sizes)


def test_criterion_04_brute_force_equivalence():
    rng = np.random.default_rng(2024)
    worst, checked, lum_equal = 0.0, 0, True
    for inst in range(20):
        n_g = int(rng.integers(12, 61))
        p = int(rng.integers(n_g, 61))
        C = random_saddle(p, n_g, seed=1000 + inst, density=0.15)
        for variant in VARIANTS:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")  # overlap clipping notices
                agg = variant_aggregates(C, variant, rng)
            approx = build_msc(C, agg, variant)
            for i, g_idx in enumerate(agg.g_sets):
                ref = dense_local(C, g_idx, agg.d_sets[i], variant)
                got = approx.local[i].toarray()
                err = np.linalg.norm(got - ref) / max(np.linalg.norm(ref), 1e-300)
                worst = max(worst, err)
                checked += 1
        C0 = PartitionedMatrix.from_blocks(C.D, C.E, SparseMatrix.zeros(n_g, p), C.G)
        agg = aggregate_by_numbering(n_g, equal_sizes(n_g, 6))
        a = build_msc(C0, agg, "MSCN").s_hat.toarray()
        b = build_msc(C0, agg, "LUM").s_hat.toarray()
        lum_equal &= bool(np.array_equal(a, b))
    ok = worst <= 1e-11 and lum_equal
    record(4, ok, f"{checked} mini Schur blocks, worst rel. Frobenius error {worst:.2e}, "
                  f"LUM == MSCN with F = 0: {lum_equal}")
    assert ok


def test_criterion_05_worked_example():
    C = worked_example()
    agg = aggregate_by_numbering(16, [2, 3, 4, 2, 2, 3])
    S = build_msc(C, agg, "MSCN").s_hat.toarray()
    full = C.C.toarray()
    D4, E4, F4, G4 = full[9:11, 9:11], full[9:11, 25:27], full[25:27, 9:11], full[25:27, 25:27]
    det = D4[0, 0] * D4[1, 1] - D4[0, 1] * D4[1, 0]
    D4_inv = np.array([[D4[1, 1], -D4[0, 1]], [-D4[1, 0], D4[0, 0]]]) / det
    S4 = G4 - F4 @ D4_inv @ E4
    err = np.abs(S[9:11, 9:11] - S4).max()
    cols = np.flatnonzero(np.any(S[:, 9:11] != 0, axis=1)).tolist()
    ok = err <= 1e-14 * np.abs(S4).max() and cols == [9, 10] and \
        np.flatnonzero(np.any(S[9:11] != 0, axis=0)).tolist() == [9, 10]
    record(5, ok, f"S_4 max error {err:.1e}, rows holding columns 9-10: {cols}")
    assert ok


@pytest.fixture(scope="module")
def oseen_runs():
    """Iteration counts for every (grid, nu, method) of the trend checks."""
    solver = SolverConfig()
    out = {}
    t0 = time.perf_counter()
    for grid_n in GRIDS:
        for nu in VISCOSITIES:
            prob = prepare_problem(ProblemSpec(grid_n=grid_n, nu=nu))
            methods = list(OSEEN_VARIANTS)
            if grid_n == 32 and nu in (0.1, 0.002):
                methods += ["PCD", "LSC"]
            for m in methods:
                row, _ = run_cell(prob, MethodSpec(variant=m, tolA=1e-4), solver)
                out[(grid_n, nu, m)] = row
    return out, time.perf_counter() - t0


@pytest.mark.slow
def test_criterion_06_oseen_convergence(oseen_runs):
    rows, seconds = oseen_runs
    cells = [rows[(g, nu, m)] for g in GRIDS for nu in VISCOSITIES for m in OSEEN_VARIANTS]
    all_conv = all(r["converged"] and r["its"] <= 3000 for r in cells)
    wins = {}
    for g in GRIDS:
        wins[g] = sum(rows[(g, nu, "OMSCN")]["its"] <= rows[(g, nu, "MSCN")]["its"]
                      for nu in VISCOSITIES)
    ok = all_conv and all(w >= 2 for w in wins.values()) and seconds < 300
    table = "; ".join(
        f"{g}/{nu}: " + "/".join(str(rows[(g, nu, m)]["its"]) for m in OSEEN_VARIANTS)
        for g in GRIDS for nu in VISCOSITIES)
    record(6, ok, f"its MSCN/OMSCN/LUM {table}; OMSCN<=MSCN on {wins} of 3; {seconds:.0f}s")
    assert ok


@pytest.mark.slow
def test_criterion_07_baseline_degradation(oseen_runs):
    rows, _ = oseen_runs
    its = {(nu, m): rows[(32, nu, m)]["its"] for nu in (0.1, 0.002) for m in ("PCD", "LSC", "MSCN")}
    pcd_up = its[(0.002, "PCD")] > its[(0.1, "PCD")]
    lsc_up = its[(0.002, "LSC")] > its[(0.1, "LSC")]
    g_mscn = its[(0.002, "MSCN")] / its[(0.1, "MSCN")]
    g_lsc = its[(0.002, "LSC")] / its[(0.1, "LSC")]
    ok = pcd_up and lsc_up and g_mscn < g_lsc
    record(7, ok, f"PCD {its[(0.1, 'PCD')]}->{its[(0.002, 'PCD')]}, "
                  f"LSC {its[(0.1, 'LSC')]}->{its[(0.002, 'LSC')]}, "
                  f"growth MSCN {g_mscn:.2f} vs LSC {g_lsc:.2f}")
    assert ok


def test_criterion_08_row_scaling():
    unit_rows, bounded, worst = True, True, 0.0
    systems = []
    for grid_n, nu in [(8, 0.1), (12, 0.002)]:
        prob = generate_oseen(grid_n, nu)
        systems.append((prob.C, prob.rhs))
    rng = np.random.default_rng(8)
    for _ in range(3):
        a = rng.standard_normal((40, 40)) * (rng.random((40, 40)) < 0.2) + 5 * np.eye(40)
        a *= rng.uniform(1e-4, 1e4, (40, 1))
        systems.append((SparseMatrix.from_dense(a), rng.standard_normal(40)))
    for C, b in systems:
        Cs, bs, _ = scale_rows(C, b)
        d = Cs.toarray()
        unit_rows &= bool(np.all(np.any(d == 1.0, axis=1)))
        bounded &= bool(np.abs(d).max() <= 1.0)
        x0 = np.linalg.solve(C.toarray(), b)
        x1 = np.linalg.solve(d, bs)
        worst = max(worst, np.linalg.norm(x1 - x0) / np.linalg.norm(x0))
    ok = unit_rows and bounded and worst <= 1e-10
    record(8, ok, f"{len(systems)} systems, unit entry per row {unit_rows}, "
                  f"max |entry| <= 1 {bounded}, solution change {worst:.1e}")
    assert ok


def test_criterion_09_ilut_contract():
    small = generate_oseen(16, 0.01)
    D = extract_block(small.C, (0, small.p), (0, small.p))
    f0 = factor_ilut(D, 0.0)
    dense = D.toarray()
    rec = np.linalg.norm(f0.reconstruct() - dense) / np.linalg.norm(dense)
    big = generate_oseen(32, 0.01)
    D32 = extract_block(big.C, (0, big.p), (0, big.p))
    ladder = [0.0, 1e-5, 1e-4, 1e-3, 1e-2]
    counts = [factor_ilut(D32, t).nnz for t in ladder]
    mono = all(a >= b for a, b in zip(counts, counts[1:]))
    ok = rec <= 1e-12 and mono
    record(9, ok, f"tol 0 reconstruction {rec:.1e}; nnz over {ladder}: {counts}")
    assert ok


def count_factor(f):
    return int(np.count_nonzero(f.lower.toarray()) + np.count_nonzero(f.upper.toarray()))


def test_criterion_10_fill_factor():
    prob = prepare_problem(ProblemSpec(grid_n=16, nu=0.01))
    results = []
    for variant in ("MSCN", "OMSCN"):
        P = prob.partitioned(4)
        n_g = P.n_g
        sizes = equal_sizes(n_g, max(n_g // 8, 1))
        if variant == "OMSCN":
            agg = aggregate_overlapped(n_g, sizes, overlap_widths(sizes, 3))
        else:
            agg = aggregate_by_numbering(n_g, sizes)
        B = build_preconditioner(P, build_msc(P, agg, variant), tolA=1e-4, sA=100)
        dense = P.C.toarray()
        num = sum(count_factor(f) for f in B.d_solver.factors)
        if B.schur.structure == "block-diagonal":
            num += sum(count_factor(factor_exact(S)) for S in B.schur.local)
        else:
            num += count_factor(factor_exact(B.schur.s_hat))
        num += int(np.count_nonzero(dense[:P.p, P.p:]) + np.count_nonzero(dense[P.p:, :P.p]))
        results.append((variant, B.fill, num / np.count_nonzero(dense)))
    P = prob.physics()
    B = build_pcd(P, prob.aux, tolA=1e-4, sA=np.inf)
    dense = P.C.toarray()
    num = sum(count_factor(f) for f in B.d_solver.factors)
    num += count_factor(factor_exact(prob.aux.A_p)) + count_factor(factor_exact(prob.aux.Q_p))
    num += int(np.count_nonzero(prob.aux.D_p.toarray()) + np.count_nonzero(dense[:P.p, P.p:]))
    results.append(("PCD", B.fill, num / np.count_nonzero(dense)))
    ok = all(a == b for _, a, b in results)
    record(10, ok, ", ".join(f"{v} ff={a:.4f} oracle={b:.4f}" for v, a, b in results))
    assert ok


@pytest.mark.slow
def test_criterion_11_construction_scaling():
    rows = scaling_benchmark(k=32, sz=200, threads=(1, 4), repeats=3)
    t1, t4 = rows[0]["seconds"], rows[1]["seconds"]
    ok = t4 <= 0.7 * t1
    record(11, ok, f"1 worker {t1:.3f}s, 4 workers {t4:.3f}s, ratio {t4 / t1:.2f} "
                   f"(limit 0.70) on {os.cpu_count()} CPU(s)")
    assert ok


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q"]))
