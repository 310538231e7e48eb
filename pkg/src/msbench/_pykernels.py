"""Pure-Python twins of the compiled kernels in ``_kernels.pyx``.

Same signatures, same status convention, same elimination order, so the two
backends agree to rounding. These are slow and exist for portability and for
cross-checking the extension.
"""
import heapq

import numpy as np


def _compress(n, rows):
    """Turn per-row lists of (col, val) into CSR arrays."""
    ptr = np.zeros(n + 1, dtype=np.int64)
    for i, r in enumerate(rows):
        ptr[i + 1] = ptr[i] + len(r)
    ind = np.fromiter((c for r in rows for c, _ in r), dtype=np.int64, count=ptr[n])
    val = np.fromiter((v for r in rows for _, v in r), dtype=np.float64, count=ptr[n])
    return ptr, ind, val


def csr_matvec(indptr, indices, data, x):
    n = len(indptr) - 1
    row = np.repeat(np.arange(n), np.diff(indptr))
    return np.bincount(row, weights=data * np.asarray(x)[indices], minlength=n).astype(
        np.float64
    )


def csr_dense_matmul(indptr, indices, data, X):
    n = len(indptr) - 1
    X = np.asarray(X)
    out = np.zeros((n, X.shape[1]))
    for i in range(n):
        for q in range(indptr[i], indptr[i + 1]):
            out[i] += data[q] * X[indices[q]]
    return out


def lu_factor(n, colptr, rowind, vals):
    x = np.zeros(n)
    mark = [-1] * n
    pinv = [-1] * n
    perm = [0] * n
    lcols = []
    ucols = []
    for j in range(n):
        nz = []
        heap = []
        for q in range(colptr[j], colptr[j + 1]):
            r = int(rowind[q])
            mark[r] = j
            nz.append(r)
            x[r] = vals[q]
            if pinv[r] >= 0:
                heapq.heappush(heap, pinv[r])
        ucol = []
        while heap:
            k = heapq.heappop(heap)
            ukj = x[perm[k]]
            if ukj == 0.0:
                continue
            ucol.append((k, ukj))
            for i, lik in lcols[k]:
                if mark[i] != j:
                    mark[i] = j
                    nz.append(i)
                    x[i] = 0.0
                    if pinv[i] >= 0:
                        heapq.heappush(heap, pinv[i])
                x[i] = x[i] - lik * ukj
        piv = -1
        best = 0.0
        for i in nz:
            if pinv[i] < 0:
                a = abs(x[i])
                if a > best or (a == best and a > 0.0 and i < piv):
                    best = a
                    piv = i
        if piv < 0:
            return (j, None, None, None, None, None, None, None)
        d = x[piv]
        ucol.append((j, d))
        ucols.append(ucol)
        pinv[piv] = j
        perm[j] = piv
        lcols.append([(i, x[i] / d) for i in nz if pinv[i] < 0 and x[i] != 0.0])
        x[nz] = 0.0
    lrows = [[] for _ in range(n)]
    for k, col in enumerate(lcols):
        for i, v in col:
            lrows[pinv[i]].append((k, v))
    urows = [[] for _ in range(n)]
    for j, col in enumerate(ucols):
        for k, v in col:
            urows[k].append((j, v))
    Lp, Li, Lx = _compress(n, lrows)
    Up, Ui, Ux = _compress(n, urows)
    return (-1, Lp, Li, Lx, Up, Ui, Ux, np.asarray(perm, dtype=np.int64))


def ilut_factor(n, indptr, indices, data, drop_tol):
    lrows = []
    urows = []
    udiag = np.zeros(n)
    for i in range(n):
        lo, hi = indptr[i], indptr[i + 1]
        thr = drop_tol * float(np.sqrt(np.sum(np.asarray(data[lo:hi]) ** 2)))
        w = {}
        heap = []
        for q in range(lo, hi):
            c = int(indices[q])
            w[c] = data[q]
            if c < i:
                heapq.heappush(heap, c)
        w.setdefault(i, 0.0)
        lrow = []
        while heap:
            k = heapq.heappop(heap)
            wk = w[k]
            if wk == 0.0:
                continue
            wk = wk / udiag[k]
            if abs(wk) < thr:
                w[k] = 0.0
                continue
            w[k] = wk
            lrow.append((k, wk))
            for c, u in urows[k][1:]:
                if c not in w:
                    w[c] = 0.0
                    if c < i:
                        heapq.heappush(heap, c)
                w[c] = w[c] - wk * u
        if w[i] == 0.0:
            return (i, None, None, None, None, None, None)
        udiag[i] = w[i]
        upart = sorted(c for c, v in w.items() if c > i and v != 0.0 and abs(v) >= thr)
        urows.append([(i, w[i])] + [(c, w[c]) for c in upart])
        lrows.append(lrow)
    Lp, Li, Lx = _compress(n, lrows)
    Up, Ui, Ux = _compress(n, urows)
    return (-1, Lp, Li, Lx, Up, Ui, Ux)


def lu_solve(Lp, Li, Lx, Up, Ui, Ux, perm, B):
    B = np.asarray(B, dtype=np.float64)
    X = B[perm].copy() if perm is not None else B.copy()
    n = X.shape[0]
    for i in range(n):
        lo, hi = Lp[i], Lp[i + 1]
        if hi > lo:
            X[i] -= Lx[lo:hi] @ X[Li[lo:hi]]
    for i in range(n - 1, -1, -1):
        lo, hi = Up[i], Up[i + 1]
        if hi > lo + 1:
            X[i] -= Ux[lo + 1:hi] @ X[Ui[lo + 1:hi]]
        X[i] /= Ux[lo]
    return X
