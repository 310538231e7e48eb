"""Applicable block preconditioners: the mini-Schur family, PCD and LSC."""
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .partitioned import PartitionedMatrix
from .schur import SchurApproximation, fill_factor
from .sparse import (
    SingularMatrixError,
    SparseMatrix,
    extract_block,
    factor_exact,
    factor_ilut,
    matvec,
)

__all__ = [
    "PartitionedMatrix",
    "PcdInputs",
    "Preconditioner",
    "BlockSolver",
    "build_preconditioner",
    "build_identity",
    "apply_msc",
    "build_pcd",
    "build_lsc",
    "contiguous_blocks",
]


@dataclass(frozen=True)
class PcdInputs:
    """Pressure Laplacian, pressure convection-diffusion and pressure mass."""

    A_p: SparseMatrix
    D_p: SparseMatrix
    Q_p: SparseMatrix

    def __post_init__(self):
        n = self.A_p.nrows
        for name in ("A_p", "D_p", "Q_p"):
            m = getattr(self, name)
            if m.shape != (n, n):
                raise ValueError(f"{name} must be square of size {n}")


class BlockSolver:
    """Block-diagonal solve with one factorization per block."""

    def __init__(self, ranges, factors):
        self.ranges = list(ranges)
        self.factors = list(factors)

    @property
    def nnz(self):
        return sum(f.nnz for f in self.factors)

    @property
    def kinds(self):
        return [f.kind for f in self.factors]

    def solve(self, y):
        y = np.asarray(y, dtype=np.float64)
        x = np.empty_like(y)
        for r, f in zip(self.ranges, self.factors):
            x[r.start:r.stop] = f.solve(y[r.start:r.stop])
        return x


def _factor_d_blocks(D, ranges, tolA, sA):
    factors = []
    for i, r in enumerate(ranges):
        blk = extract_block(D, (r.start, r.stop), (r.start, r.stop))
        try:
            if len(r) <= sA:
                factors.append(factor_exact(blk))
            else:
                factors.append(factor_ilut(blk, tolA))
        except SingularMatrixError as exc:
            raise SingularMatrixError(
                f"(1,1) block {i} is singular at local pivot {exc.index}", i
            ) from exc
    return BlockSolver(ranges, factors)


@dataclass
class Preconditioner:
    """``x = B^{-1} y`` for a block preconditioner.

    ``form`` is ``"three-factor"`` (``[D 0; F S][D^-1 0; 0 S^-1][D E; 0 S]``),
    ``"upper"`` (``[D E; 0 S]``) or ``"identity"``.
    """

    kind: str
    form: str
    p: int
    n: int
    d_solver: BlockSolver = None
    schur_solve: object = None
    E: SparseMatrix = None
    F: SparseMatrix = None
    schur: SchurApproximation = None
    stored: list = field(default_factory=list)
    fill: float = 0.0
    info: dict = field(default_factory=dict)

    def apply(self, y):
        y = np.asarray(y, dtype=np.float64)
        if y.shape != (self.n,):
            raise ValueError(f"expected a vector of length {self.n}")
        if self.form == "identity":
            return y.copy()
        if self.form == "three-factor":
            return apply_msc(self, y)
        y1, y2 = y[: self.p], y[self.p:]
        x2 = self.schur_solve(y2)
        x1 = self.d_solver.solve(y1 - matvec(self.E, x2))
        return np.concatenate((x1, x2))

    __call__ = apply

    def as_dense(self):
        """Dense ``B^{-1}`` by applying to every unit vector."""
        return np.column_stack([self.apply(e) for e in np.eye(self.n)])


def apply_msc(B, y):
    """Forward and backward sweeps of the three-factor form."""
    y = np.asarray(y, dtype=np.float64)
    p = B.p
    z1 = B.d_solver.solve(y[:p])
    z2 = B.schur_solve(y[p:] - matvec(B.F, z1))
    x1 = z1 - B.d_solver.solve(matvec(B.E, z2))
    return np.concatenate((x1, z2))


def _schur_solver(schur):
    """Factor ``S_hat``: per block when block-diagonal, whole when banded."""
    if schur.structure == "block-diagonal":
        order = np.concatenate(schur.g_sets)
        contiguous = np.array_equal(order, np.arange(len(order)))
        factors = []
        for i, (S_ii, g) in enumerate(zip(schur.local, schur.g_sets)):
            try:
                factors.append(factor_exact(S_ii))
            except SingularMatrixError as exc:
                raise SingularMatrixError(
                    f"mini Schur complement {i} is singular at local pivot {exc.index}", i
                ) from exc
        if contiguous:
            bs = BlockSolver(schur.base_ranges, factors)
            return bs.solve, factors
        sets = list(schur.g_sets)

        def solve(y):
            x = np.empty_like(y)
            for f, g in zip(factors, sets):
                x[g] = f.solve(y[g])
            return x

        return solve, factors
    try:
        f = factor_exact(schur.s_hat)
    except SingularMatrixError as exc:
        raise SingularMatrixError(
            f"approximate Schur complement is singular at pivot {exc.index}", exc.index
        ) from exc
    return f.solve, [f]


def build_preconditioner(C, schur, tolA=1e-4, sA=np.inf):
    """Three-factor preconditioner from a Schur approximation.

    (1,1) blocks no larger than ``sA`` are factored exactly, larger ones by
    ILUT with drop tolerance ``tolA``.
    """
    if schur.s_hat.nrows != C.n_g:
        raise ValueError("Schur approximation does not match the (2,2) block")
    d_solver = _factor_d_blocks(C.D, C.d_block_ranges, tolA, sA)
    solve, s_factors = _schur_solver(schur)
    stored = [*d_solver.factors, *s_factors, C.E, C.F]
    return Preconditioner(
        kind=schur.variant,
        form="three-factor",
        p=C.p,
        n=C.n,
        d_solver=d_solver,
        schur_solve=solve,
        E=C.E,
        F=C.F,
        schur=schur,
        stored=stored,
        fill=fill_factor(stored, C),
        info={"tolA": tolA, "sA": sA, "d_kinds": d_solver.kinds},
    )


def build_identity(C):
    n = C.n if hasattr(C, "n") else C.nrows
    return Preconditioner(kind="none", form="identity", p=n, n=n, fill=0.0)


def contiguous_blocks(D):
    """Split ``[0, p)`` at every offset not crossed by any entry of ``D``."""
    p = D.nrows
    rows, cols = D.row_ids(), D.indices
    lo = np.minimum(rows, cols)
    hi = np.maximum(rows, cols)
    # an edge (lo, hi) crosses every cut c with lo < c <= hi
    cover = np.zeros(p + 1, dtype=np.int64)
    np.add.at(cover, lo + 1, 1)
    np.add.at(cover, hi + 1, -1)
    crossing = np.cumsum(cover)
    cuts = [0] + [c for c in range(1, p) if crossing[c] == 0] + [p]
    return [range(a, b) for a, b in zip(cuts[:-1], cuts[1:])]


def _baseline_blocks(C):
    if len(C.d_block_ranges) > 1:
        return C.d_block_ranges
    return contiguous_blocks(C.D)


def build_pcd(C, aux, tolA=1e-4, sA=np.inf):
    """Block upper-triangular preconditioner with ``S_hat^{-1} = -Q_p^{-1} D_p A_p^{-1}``."""
    if aux.A_p.nrows != C.n_g:
        raise ValueError(f"auxiliary operators have size {aux.A_p.nrows}, expected {C.n_g}")
    ranges = _baseline_blocks(C)
    d_solver = _factor_d_blocks(C.D, ranges, tolA, sA)
    try:
        fa = factor_exact(aux.A_p)
        fq = factor_exact(aux.Q_p)
    except SingularMatrixError as exc:
        raise SingularMatrixError(f"PCD auxiliary operator singular: {exc}", exc.index) from exc
    D_p = aux.D_p

    def solve(y):
        return -fq.solve(matvec(D_p, fa.solve(y)))

    stored = [*d_solver.factors, fa, fq, D_p, C.E]
    return Preconditioner(
        kind="PCD", form="upper", p=C.p, n=C.n, d_solver=d_solver, schur_solve=solve,
        E=C.E, F=C.F, stored=stored, fill=fill_factor(stored, C),
        info={"tolA": tolA, "sA": sA, "d_kinds": d_solver.kinds},
    )


def build_lsc(C, q_diag, tolA=1e-4, sA=np.inf):
    """Least-squares commutator preconditioner.

    With ``M = -F Q^{-1} E`` and ``K = -F Q^{-1} D Q^{-1} E`` the Schur
    inverse is applied as ``M^{-1} K M^{-1}``. Pressure indices where ``M``
    has an empty row, and the last index if ``M`` annihilates constants, are
    pinned: ``M`` gets a unit row and column there and ``K`` the entry
    ``1/g`` with ``g`` the matching diagonal of ``G`` (1 when that is zero).
    """
    q = np.asarray(q_diag, dtype=np.float64)
    if q.shape != (C.p,):
        raise ValueError(f"q_diag must have length {C.p}")
    if np.any(q == 0.0):
        raise ValueError("q_diag entries must be nonzero")
    ranges = _baseline_blocks(C)
    d_solver = _factor_d_blocks(C.D, ranges, tolA, sA)
    Es, Fs, Ds = C.E.to_scipy(), C.F.to_scipy(), C.D.to_scipy()
    qinv = sp.diags(1.0 / q)
    M = (-(Fs @ qinv @ Es)).tocsr()
    M.eliminate_zeros()
    n_g = C.n_g
    row_nnz = np.diff(M.indptr)
    pinned = set(np.flatnonzero(row_nnz == 0).tolist())
    ones = np.ones(n_g)
    free = np.array([i not in pinned for i in range(n_g)])
    if free.any():
        resid = np.abs(M @ (ones * free))[free]
        scale = np.abs(M).sum(axis=1).A1[free].max()
        if resid.max() <= 1e-12 * scale:
            pinned.add(int(np.flatnonzero(free)[-1]))
    pinned = np.array(sorted(pinned), dtype=np.int64)
    mask = np.ones(n_g)
    mask[pinned] = 0.0
    Pm = sp.diags(mask)
    Mp = (Pm @ M @ Pm + sp.diags(1.0 - mask)).tocsr()
    try:
        fm = factor_exact(SparseMatrix.from_scipy(Mp))
    except SingularMatrixError as exc:
        raise SingularMatrixError(f"LSC pressure Laplacian singular: {exc}", exc.index) from exc
    gdiag = C.G.diagonal()[pinned] if len(pinned) else np.zeros(0)
    gdiag = np.where(gdiag == 0.0, 1.0, gdiag)

    def apply_k(t):
        t = t * mask
        u = -(Fs @ (qinv @ (Ds @ (qinv @ (Es @ t)))))
        u *= mask
        return u

    def solve(y):
        t = fm.solve(y)
        u = apply_k(t)
        u[pinned] = t[pinned] / gdiag
        return fm.solve(u)

    stored = [*d_solver.factors, fm, C.D, C.E, C.F, len(q)]
    return Preconditioner(
        kind="LSC", form="upper", p=C.p, n=C.n, d_solver=d_solver, schur_solve=solve,
        E=C.E, F=C.F, stored=stored, fill=fill_factor(stored, C),
        info={"tolA": tolA, "sA": sA, "pinned": pinned.tolist(), "d_kinds": d_solver.kinds},
    )
