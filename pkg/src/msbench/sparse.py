"""Compressed sparse row storage, permutations and LU/ILUT factorizations."""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import kernels

__all__ = [
    "SingularMatrixError",
    "SparseMatrix",
    "Permutation",
    "TriangularFactors",
    "matvec",
    "extract_block",
    "factor_exact",
    "factor_ilut",
    "solve",
    "permute",
    "block_diag",
]


class SingularMatrixError(ValueError):
    """Raised when a factorization meets a zero pivot.

    ``index`` is the pivot step (exact LU) or row (ILUT) that failed.
    """

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


def _frozen(a, dtype):
    a = np.ascontiguousarray(a, dtype=dtype)
    if a.flags.writeable:
        a = a.copy() if not a.flags.owndata else a
        a.flags.writeable = False
    return a


class SparseMatrix:
    """Immutable CSR matrix with sorted column indices and no stored zeros.

    Build one with :meth:`from_coo`, :meth:`from_dense` or :meth:`from_scipy`;
    the raw constructor trusts its arguments unless ``check=True``.
    """

    __slots__ = ("nrows", "ncols", "indptr", "indices", "data")

    def __init__(self, nrows, ncols, indptr, indices, data, check=False):
        self.nrows = int(nrows)
        self.ncols = int(ncols)
        self.indptr = _frozen(indptr, np.int64)
        self.indices = _frozen(indices, np.int64)
        self.data = _frozen(data, np.float64)
        if check:
            self._validate()

    def _validate(self):
        if self.indptr.shape != (self.nrows + 1,) or self.indptr[0] != 0:
            raise ValueError("indptr has the wrong shape")
        if np.any(np.diff(self.indptr) < 0):
            raise ValueError("indptr must be non-decreasing")
        if self.indptr[-1] != len(self.indices) or len(self.indices) != len(self.data):
            raise ValueError("nnz does not match the row extents")
        if len(self.indices) and (self.indices.min() < 0 or self.indices.max() >= self.ncols):
            raise ValueError("column index out of range")
        for i in range(self.nrows):
            cols = self.indices[self.indptr[i]:self.indptr[i + 1]]
            if np.any(np.diff(cols) <= 0):
                raise ValueError(f"row {i}: column indices not strictly increasing")
        if np.any(self.data == 0.0):
            raise ValueError("explicit zeros are not allowed")

    # construction -------------------------------------------------------

    @classmethod
    def from_scipy(cls, m):
        m = sp.csr_matrix(m, dtype=np.float64, copy=True)
        m.sum_duplicates()
        m.eliminate_zeros()
        m.sort_indices()
        return cls(m.shape[0], m.shape[1], m.indptr, m.indices, m.data)

    @classmethod
    def from_coo(cls, nrows, ncols, rows, cols, vals):
        """Duplicates are summed, then exact zeros are pruned."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=np.float64)
        if len(rows) and (rows.min() < 0 or rows.max() >= nrows):
            raise ValueError("row index out of range")
        if len(cols) and (cols.min() < 0 or cols.max() >= ncols):
            raise ValueError("column index out of range")
        return cls.from_scipy(sp.coo_matrix((vals, (rows, cols)), shape=(nrows, ncols)))

    @classmethod
    def from_dense(cls, a, prune=0.0):
        a = np.atleast_2d(np.asarray(a, dtype=np.float64))
        keep = np.abs(a) > prune if prune > 0 else a != 0.0
        r, c = np.nonzero(keep)
        return cls.from_coo(a.shape[0], a.shape[1], r, c, a[r, c])

    @classmethod
    def identity(cls, n):
        return cls(n, n, np.arange(n + 1), np.arange(n), np.ones(n))

    @classmethod
    def zeros(cls, nrows, ncols=None):
        ncols = nrows if ncols is None else ncols
        return cls(nrows, ncols, np.zeros(nrows + 1), np.zeros(0), np.zeros(0))

    @classmethod
    def diag(cls, values):
        values = np.asarray(values, dtype=np.float64)
        n = len(values)
        return cls.from_coo(n, n, np.arange(n), np.arange(n), values)

    # views ----------------------------------------------------------------

    @property
    def shape(self):
        return (self.nrows, self.ncols)

    @property
    def nnz(self):
        return int(self.indptr[-1])

    def to_scipy(self):
        return sp.csr_matrix(
            (self.data.copy(), self.indices.copy(), self.indptr.copy()), shape=self.shape
        )

    def toarray(self):
        return self.to_scipy().toarray()

    def transpose(self):
        return SparseMatrix.from_scipy(self.to_scipy().T)

    @property
    def T(self):
        return self.transpose()

    def diagonal(self):
        return self.to_scipy().diagonal()

    def row_ids(self):
        return np.repeat(np.arange(self.nrows), np.diff(self.indptr))

    def scale_rows(self, s):
        s = np.asarray(s, dtype=np.float64)
        return SparseMatrix.from_coo(
            self.nrows, self.ncols, self.row_ids(), self.indices, self.data * s[self.row_ids()]
        )

    def __matmul__(self, other):
        if isinstance(other, SparseMatrix):
            return SparseMatrix.from_scipy(self.to_scipy() @ other.to_scipy())
        other = np.asarray(other)
        if other.ndim == 1:
            return matvec(self, other)
        return kernels.csr_dense_matmul(
            self.indptr, self.indices, self.data, np.ascontiguousarray(other, dtype=np.float64)
        )

    def __add__(self, other):
        return SparseMatrix.from_scipy(self.to_scipy() + other.to_scipy())

    def __sub__(self, other):
        return SparseMatrix.from_scipy(self.to_scipy() - other.to_scipy())

    def __neg__(self):
        return SparseMatrix(self.nrows, self.ncols, self.indptr, self.indices, -self.data)

    def __mul__(self, alpha):
        return SparseMatrix.from_coo(
            self.nrows, self.ncols, self.row_ids(), self.indices, self.data * float(alpha)
        )

    __rmul__ = __mul__

    def __repr__(self):
        return f"SparseMatrix({self.nrows}x{self.ncols}, nnz={self.nnz})"


def matvec(A, x):
    """``A @ x`` with row-major accumulation."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != A.ncols:
        raise ValueError(f"dimension mismatch: {A.shape} @ {x.shape}")
    return kernels.csr_matvec(A.indptr, A.indices, A.data, x)


def _as_index(sel, bound, what):
    if isinstance(sel, range):
        idx = np.arange(sel.start, sel.stop, sel.step, dtype=np.int64)
    elif isinstance(sel, slice):
        idx = np.arange(*sel.indices(bound), dtype=np.int64)
    elif isinstance(sel, tuple) and len(sel) == 2 and all(np.isscalar(s) for s in sel):
        lo, hi = int(sel[0]), int(sel[1])
        if lo < 0 or hi > bound or lo > hi:
            raise IndexError(f"{what} range [{lo}, {hi}) outside [0, {bound})")
        idx = np.arange(lo, hi, dtype=np.int64)
    else:
        idx = np.asarray(sel, dtype=np.int64).ravel()
    if len(idx) and (idx.min() < 0 or idx.max() >= bound):
        raise IndexError(f"{what} index outside [0, {bound})")
    return idx


def extract_block(A, rows, cols):
    """Submatrix ``A[rows, cols]`` re-indexed from 0.

    ``rows``/``cols`` are ``range``, ``slice``, ``(start, stop)`` tuples or
    integer index lists (gathered in the given order).
    """
    ridx = _as_index(rows, A.nrows, "row")
    cidx = _as_index(cols, A.ncols, "column")
    colmap = np.full(A.ncols, -1, dtype=np.int64)
    colmap[cidx] = np.arange(len(cidx))
    starts = A.indptr[ridx]
    lens = A.indptr[ridx + 1] - starts
    total = int(lens.sum())
    if total == 0:
        return SparseMatrix.zeros(len(ridx), len(cidx))
    offs = np.repeat(starts - np.concatenate(([0], np.cumsum(lens)[:-1])), lens)
    pos = np.arange(total) + offs
    newrow = np.repeat(np.arange(len(ridx)), lens)
    newcol = colmap[A.indices[pos]]
    keep = newcol >= 0
    return SparseMatrix.from_coo(
        len(ridx), len(cidx), newrow[keep], newcol[keep], A.data[pos][keep]
    )


def block_diag(blocks):
    """Block-diagonal assembly of square SparseMatrix blocks."""
    return SparseMatrix.from_scipy(sp.block_diag([b.to_scipy() for b in blocks], format="csr"))


@dataclass(frozen=True)
class Permutation:
    """``forward[new] = old`` and ``inverse[old] = new``."""

    forward: np.ndarray
    inverse: np.ndarray

    def __post_init__(self):
        n = len(self.forward)
        if len(self.inverse) != n:
            raise ValueError("forward and inverse lengths differ")
        if not np.array_equal(self.forward[self.inverse], np.arange(n)):
            raise ValueError("not a bijection with matching inverse")

    @classmethod
    def from_forward(cls, forward):
        forward = np.asarray(forward, dtype=np.int64)
        n = len(forward)
        if sorted(forward.tolist()) != list(range(n)):
            raise ValueError("forward is not a permutation of range(n)")
        inverse = np.empty(n, dtype=np.int64)
        inverse[forward] = np.arange(n)
        return cls(forward, inverse)

    @classmethod
    def identity(cls, n):
        return cls.from_forward(np.arange(n))

    def inverted(self):
        return Permutation(self.inverse, self.forward)

    def __len__(self):
        return len(self.forward)


def permute(A, p):
    """Symmetric permutation ``P^T A P``: entry (i, j) is A[forward[i], forward[j]]."""
    if A.nrows != A.ncols:
        raise ValueError("permute needs a square matrix")
    if len(p) != A.nrows:
        raise ValueError(f"permutation of length {len(p)} for a {A.shape} matrix")
    rows = p.inverse[A.row_ids()]
    cols = p.inverse[A.indices]
    return SparseMatrix.from_coo(A.nrows, A.ncols, rows, cols, A.data)


@dataclass(frozen=True)
class TriangularFactors:
    """``A[perm] = (I + lower) @ upper``; ``perm`` is None for ILUT."""

    lower: SparseMatrix
    upper: SparseMatrix
    kind: str
    drop_tol: float = 0.0
    perm: Permutation = None

    @property
    def n(self):
        return self.upper.nrows

    @property
    def nnz(self):
        return self.lower.nnz + self.upper.nnz

    def solve(self, b):
        return solve(self, b)

    def reconstruct(self):
        """Dense ``P^T L U`` (the factored matrix), for checks on small blocks."""
        lu = (self.lower.toarray() + np.eye(self.n)) @ self.upper.toarray()
        if self.perm is None:
            return lu
        out = np.empty_like(lu)
        out[self.perm.forward] = lu
        return out


def factor_exact(A):
    """Sparse LU with partial pivoting (no fill-reducing column ordering)."""
    if A.nrows != A.ncols:
        raise ValueError("factor_exact needs a square matrix")
    n = A.nrows
    csc = A.to_scipy().tocsc()
    csc.sort_indices()
    status, Lp, Li, Lx, Up, Ui, Ux, perm = kernels.lu_factor(
        n,
        csc.indptr.astype(np.int64),
        csc.indices.astype(np.int64),
        csc.data.astype(np.float64),
    )
    if status == -2:
        raise MemoryError("out of memory in factor_exact")
    if status >= 0:
        raise SingularMatrixError(f"matrix is singular: zero pivot at step {status}", status)
    return TriangularFactors(
        lower=SparseMatrix(n, n, Lp, Li, Lx),
        upper=SparseMatrix(n, n, Up, Ui, Ux),
        kind="exact",
        perm=Permutation.from_forward(perm),
    )


def factor_ilut(A, drop_tol):
    """Incomplete LU without pivoting.

    An entry is dropped when its magnitude is below ``drop_tol`` times the
    2-norm of the original row; diagonal entries are always kept.
    """
    if A.nrows != A.ncols:
        raise ValueError("factor_ilut needs a square matrix")
    if drop_tol < 0:
        raise ValueError("drop_tol must be non-negative")
    n = A.nrows
    status, Lp, Li, Lx, Up, Ui, Ux = kernels.ilut_factor(
        n, A.indptr, A.indices, A.data, float(drop_tol)
    )
    if status == -2:
        raise MemoryError("out of memory in factor_ilut")
    if status >= 0:
        raise SingularMatrixError(f"zero pivot in ILUT at row {status}", status)
    return TriangularFactors(
        lower=SparseMatrix(n, n, Lp, Li, Lx),
        upper=SparseMatrix(n, n, Up, Ui, Ux),
        kind="incomplete",
        drop_tol=float(drop_tol),
    )


def solve(factors, b):
    b = np.asarray(b, dtype=np.float64)
    if b.shape[0] != factors.n:
        raise ValueError(f"right-hand side has {b.shape[0]} rows, expected {factors.n}")
    vec = b.ndim == 1
    B = np.ascontiguousarray(b.reshape(factors.n, -1))
    L, U = factors.lower, factors.upper
    perm = factors.perm.forward if factors.perm is not None else None
    X = kernels.lu_solve(L.indptr, L.indices, L.data, U.indptr, U.indices, U.data, perm, B)
    return X[:, 0] if vec else X
