"""Matrix Market coordinate/array reader and writer."""
import os
import tempfile

import numpy as np

from .partitioned import PartitionedMatrix
from .sparse import SparseMatrix

__all__ = [
    "MatrixMarketError",
    "read_matrix_market",
    "write_matrix_market",
    "load_matrix_market",
    "read_vector",
    "write_vector",
    "load_partitioned",
]


class MatrixMarketError(ValueError):
    def __init__(self, path, line, message):
        super().__init__(f"{path}:{line}: {message}")
        self.line = line


def _data_lines(fh, start):
    for lineno, raw in enumerate(fh, start=start):
        s = raw.strip()
        if not s or s.startswith("%"):
            continue
        yield lineno, s


def read_matrix_market(path):
    """Read a real or integer Matrix Market file.

    Returns a SparseMatrix for ``coordinate`` files (general, symmetric or
    skew-symmetric; pattern entries read as 1) and a dense ndarray for
    ``array`` files.
    """
    path = os.fspath(path)
    with open(path, "r") as fh:
        header = fh.readline()
        parts = header.strip().split()
        if len(parts) != 5 or parts[0].lower() != "%%matrixmarket" or parts[1].lower() != "matrix":
            raise MatrixMarketError(path, 1, "missing '%%MatrixMarket matrix' header")
        fmt, field, symm = (p.lower() for p in parts[2:])
        if fmt not in ("coordinate", "array"):
            raise MatrixMarketError(path, 1, f"unsupported format {fmt!r}")
        if field not in ("real", "integer", "double", "pattern"):
            raise MatrixMarketError(path, 1, f"unsupported field {field!r}")
        if symm not in ("general", "symmetric", "skew-symmetric"):
            raise MatrixMarketError(path, 1, f"unsupported symmetry {symm!r}")
        if field == "pattern" and fmt == "array":
            raise MatrixMarketError(path, 1, "pattern is only valid for coordinate files")
        lines = _data_lines(fh, 2)
        try:
            lineno, size = next(lines)
        except StopIteration:
            raise MatrixMarketError(path, 2, "missing size line") from None
        try:
            dims = [int(t) for t in size.split()]
        except ValueError:
            raise MatrixMarketError(path, lineno, f"bad size line {size!r}") from None
        if fmt == "coordinate":
            if len(dims) != 3 or min(dims) < 0:
                raise MatrixMarketError(path, lineno, "size line needs 'rows cols nnz'")
            return _read_coordinate(path, lines, dims, field, symm)
        if len(dims) != 2 or min(dims) < 0:
            raise MatrixMarketError(path, lineno, "size line needs 'rows cols'")
        return _read_array(path, lines, dims, symm)


def _read_coordinate(path, lines, dims, field, symm):
    m, n, nnz = dims
    rows = np.empty(nnz, dtype=np.int64)
    cols = np.empty(nnz, dtype=np.int64)
    vals = np.ones(nnz)
    want = 2 if field == "pattern" else 3
    k = 0
    last = 2
    for lineno, s in lines:
        last = lineno
        if k >= nnz:
            raise MatrixMarketError(path, lineno, f"more than {nnz} entries")
        tok = s.split()
        if len(tok) != want:
            raise MatrixMarketError(path, lineno, f"expected {want} fields, got {len(tok)}")
        try:
            i, j = int(tok[0]), int(tok[1])
            if want == 3:
                vals[k] = float(tok[2])
        except ValueError:
            raise MatrixMarketError(path, lineno, f"cannot parse entry {s!r}") from None
        if not (1 <= i <= m and 1 <= j <= n):
            raise MatrixMarketError(path, lineno, f"index ({i}, {j}) outside {m}x{n}")
        rows[k], cols[k] = i - 1, j - 1
        k += 1
    if k != nnz:
        raise MatrixMarketError(path, last, f"expected {nnz} entries, found {k}")
    if symm != "general":
        off = rows != cols
        sign = -1.0 if symm == "skew-symmetric" else 1.0
        rows, cols, vals = (
            np.concatenate((rows, cols[off])),
            np.concatenate((cols, rows[off])),
            np.concatenate((vals, sign * vals[off])),
        )
    return SparseMatrix.from_coo(m, n, rows, cols, vals)


def _read_array(path, lines, dims, symm):
    m, n = dims
    vals = []
    for lineno, s in lines:
        try:
            vals.append(float(s.split()[0]))
        except (ValueError, IndexError):
            raise MatrixMarketError(path, lineno, f"cannot parse value {s!r}") from None
    if symm == "general":
        if len(vals) != m * n:
            raise MatrixMarketError(path, 0, f"expected {m * n} values, found {len(vals)}")
        return np.asarray(vals).reshape((n, m)).T.copy()
    out = np.zeros((m, n))
    k = 0
    for j in range(n):
        start = j if symm == "symmetric" else j + 1
        for i in range(start, m):
            if k >= len(vals):
                raise MatrixMarketError(path, 0, "too few values for a symmetric array")
            out[i, j] = vals[k]
            out[j, i] = vals[k] if symm == "symmetric" else -vals[k]
            k += 1
    return out


def _atomic_write(path, text):
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=".mtx")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_matrix_market(path, A, comment=None):
    """Write a SparseMatrix as a general real coordinate file (17 significant digits)."""
    out = ["%%MatrixMarket matrix coordinate real general"]
    if comment:
        out.extend(f"% {line}" for line in comment.splitlines())
    out.append(f"{A.nrows} {A.ncols} {A.nnz}")
    rows = A.row_ids() + 1
    cols = A.indices + 1
    out.extend(f"{i} {j} {v:.17g}" for i, j, v in zip(rows, cols, A.data))
    _atomic_write(path, "\n".join(out) + "\n")


def write_vector(path, v):
    v = np.asarray(v, dtype=np.float64).ravel()
    out = ["%%MatrixMarket matrix array real general", f"{len(v)} 1"]
    out.extend(f"{x:.17g}" for x in v)
    _atomic_write(path, "\n".join(out) + "\n")


def read_vector(path):
    a = read_matrix_market(path)
    if isinstance(a, SparseMatrix):
        a = a.toarray()
    return np.asarray(a).ravel()


def load_matrix_market(path):
    A = read_matrix_market(path)
    if not isinstance(A, SparseMatrix):
        A = SparseMatrix.from_dense(A)
    return A


def load_partitioned(c_path=None, p=None, d_path=None, e_path=None, f_path=None, g_path=None):
    """Build a PartitionedMatrix from one file plus a split, or from four block files."""
    if c_path is not None:
        if p is None:
            raise ValueError("a split size p is required with a whole-system file")
        return PartitionedMatrix(load_matrix_market(c_path), int(p))
    paths = (d_path, e_path, f_path, g_path)
    if any(x is None for x in paths):
        raise ValueError("give either c_path and p, or all of D, E, F, G")
    D, E, F, G = (load_matrix_market(x) for x in paths)
    if E.nrows != D.nrows or F.ncols != D.ncols or G.nrows != F.nrows or G.ncols != E.ncols:
        raise ValueError("block dimensions are inconsistent")
    return PartitionedMatrix.from_blocks(D, E, F, G)
