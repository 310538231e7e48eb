"""Mini Schur complements and the assembled approximation of ``G - F D^-1 E``."""
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .sparse import SingularMatrixError, SparseMatrix, TriangularFactors, extract_block, factor_exact

__all__ = [
    "VARIANTS",
    "SchurApproximation",
    "build_msc",
    "mini_schur",
    "rowsum_compress",
    "build_exact_schur",
    "fill_factor",
    "stored_nnz",
    "worker_count",
]

VARIANTS = ("MSCN", "MSCNR", "LUM", "MSCE", "MSCER", "OMSCN", "OMSCNR", "OLUM")
_ROWSUM = {"MSCNR", "MSCER", "OMSCNR"}
_LUMPED = {"LUM", "OLUM"}
_OVERLAPPED = {"OMSCN", "OMSCNR", "OLUM"}
_EDGE = {"MSCE", "MSCER"}


def worker_count(requested=None):
    """Thread count: explicit request, else ``MSBENCH_THREADS``, else 1."""
    if requested is not None:
        return max(int(requested), 1)
    env = os.environ.get("MSBENCH_THREADS")
    return max(int(env), 1) if env else 1


@dataclass(frozen=True)
class SchurApproximation:
    """Assembled ``S_hat`` plus its per-aggregate pieces.

    ``local`` holds each ``S_ii`` over its full (overlapped) index set;
    ``structure`` is ``"block-diagonal"``, ``"overlapped-banded"`` or
    ``"single"``.
    """

    s_hat: SparseMatrix
    local: list
    g_sets: list
    base_ranges: list
    structure: str
    variant: str

    @property
    def k(self):
        return len(self.local)


def rowsum_compress(E_ii):
    """Replace each row of ``E_ii`` by its sum placed on one column.

    For a square block the sum lands on the diagonal, i.e. ``diag(E_ii 1)``.
    Otherwise it lands on the column of the row's largest-magnitude entry
    (lowest column on ties); all-zero rows stay zero.
    """
    E_ii = np.asarray(E_ii, dtype=np.float64)
    out = np.zeros_like(E_ii)
    sums = E_ii.sum(axis=1)
    if E_ii.shape[0] == E_ii.shape[1]:
        np.fill_diagonal(out, sums)
        return out
    nz = np.any(E_ii != 0.0, axis=1)
    cols = np.argmax(np.abs(E_ii), axis=1)
    rows = np.flatnonzero(nz)
    out[rows, cols[rows]] = sums[rows]
    return out


def mini_schur(D_ii, E_ii, F_ii, G_ii, variant, index=None):
    """Dense ``S_ii`` for one aggregate.

    ``D_ii`` is a SparseMatrix, the couplings are dense arrays.
    """
    G_ii = np.asarray(G_ii, dtype=np.float64)
    if variant in _LUMPED:
        return G_ii.copy()
    if E_ii.shape[0] != D_ii.nrows or F_ii.shape[1] != D_ii.nrows:
        raise ValueError(f"aggregate {index}: D slice does not match E/F slices")
    if variant in _ROWSUM:
        E_ii = rowsum_compress(E_ii)
    try:
        lu = factor_exact(D_ii)
    except SingularMatrixError as exc:
        raise SingularMatrixError(
            f"aggregate {index}: D block is singular (pivot {exc.index})", index
        ) from exc
    X = lu.solve(np.ascontiguousarray(E_ii))
    return G_ii - F_ii @ X


def _variant_ok(variant, agg):
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    if variant in _EDGE and agg.scheme != "edge":
        raise ValueError(f"{variant} needs edge-based aggregates")
    if variant not in _EDGE and agg.scheme == "edge":
        raise ValueError(f"{variant} needs numbering-based aggregates")


def build_msc(C, agg, variant, workers=None):
    """Compute every ``S_ii`` (concurrently) and assemble ``S_hat``.

    Non-overlapped variants give ``blkDiag(S_ii)``. For overlapped ones each
    column of ``S_hat`` is taken from the aggregate owning it, including the
    rows of that aggregate's overlap.
    """
    variant = variant.upper()
    _variant_ok(variant, agg)
    if agg.n_g != C.n_g:
        raise ValueError(f"aggregates cover {agg.n_g} G indices, G has {C.n_g}")
    for i, d in enumerate(agg.d_sets):
        if len(d) and d.max() >= C.p:
            raise ValueError(f"aggregate {i}: D indices exceed p={C.p}")
    D, E, F, G = C.D, C.E, C.F, C.G
    # scipy slicing is read-only here and thread-safe
    Es, Fs, Gs = E.to_scipy(), F.to_scipy(), G.to_scipy()

    def one(i):
        g_idx, d_idx = agg.g_sets[i], agg.d_sets[i]
        G_ii = Gs[g_idx][:, g_idx].toarray()
        if variant in _LUMPED:
            return mini_schur(None, None, None, G_ii, variant, i)
        D_ii = extract_block(D, d_idx, d_idx)
        E_ii = Es[d_idx][:, g_idx].toarray()
        F_ii = Fs[g_idx][:, d_idx].toarray()
        return mini_schur(D_ii, E_ii, F_ii, G_ii, variant, i)

    nw = worker_count(workers)
    if nw > 1 and agg.k > 1:
        with ThreadPoolExecutor(max_workers=nw) as ex:
            local = list(ex.map(one, range(agg.k)))
    else:
        local = [one(i) for i in range(agg.k)]

    rows, cols, vals = [], [], []
    for i, S_ii in enumerate(local):
        g_idx = agg.g_sets[i]
        if variant in _OVERLAPPED:
            own = agg.base_ranges[i]
            keep = (g_idx >= own.start) & (g_idx < own.stop)
        else:
            keep = np.ones(len(g_idx), dtype=bool)
        r, c = np.nonzero(S_ii[:, keep])
        rows.append(g_idx[r])
        cols.append(g_idx[keep][c])
        vals.append(S_ii[:, keep][r, c])
    s_hat = SparseMatrix.from_coo(
        C.n_g, C.n_g, np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)
    )
    overlapped = variant in _OVERLAPPED and bool(np.any(agg.overlaps))
    return SchurApproximation(
        s_hat=s_hat,
        local=[SparseMatrix.from_dense(S) for S in local],
        g_sets=list(agg.g_sets),
        base_ranges=list(agg.base_ranges),
        structure="overlapped-banded" if overlapped else "block-diagonal",
        variant=variant,
    )


def build_exact_schur(C):
    """Dense ``S = G - F D^-1 E`` stored sparse (entries below 1e-14 pruned)."""
    D = C.D.toarray()
    with warnings.catch_warnings():
        # singularity is reported below as an exception
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(D, check_finite=False)
    if np.any(np.diag(lu) == 0.0):
        raise SingularMatrixError("D is singular", int(np.flatnonzero(np.diag(lu) == 0)[0]))
    X = sla.lu_solve((lu, piv), C.E.toarray(), check_finite=False)
    S = C.G.toarray() - C.F.toarray() @ X
    s_hat = SparseMatrix.from_dense(S, prune=1e-14)
    return SchurApproximation(
        s_hat=s_hat,
        local=[s_hat],
        g_sets=[np.arange(C.n_g)],
        base_ranges=[range(0, C.n_g)],
        structure="single",
        variant="EXACT",
    )


def stored_nnz(obj):
    """Stored nonzeros of a matrix, factor pair or plain integer."""
    if obj is None:
        return 0
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (SparseMatrix, TriangularFactors)):
        return obj.nnz
    if sp.issparse(obj):
        return int(obj.nnz)
    if isinstance(obj, np.ndarray):
        return int(np.count_nonzero(obj))
    raise TypeError(f"cannot count nonzeros of {type(obj).__name__}")


def fill_factor(parts, C):
    """Total stored nonzeros of ``parts`` divided by ``nnz(C)``."""
    nnz_c = C.C.nnz if hasattr(C, "C") else C.nnz
    return sum(stored_nnz(p) for p in parts) / nnz_c
