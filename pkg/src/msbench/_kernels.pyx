# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled sparse kernels.

Every routine here has a pure-Python twin in :mod:`msbench._pykernels` with
the same signature and the same floating-point operation order. The heavy
loops run without the GIL so that per-block work can be spread over threads.

Status convention for the factorizations: a return value of ``-1`` means
success, ``>= 0`` is the pivot index that failed, ``-2`` is out of memory.
"""

import numpy as np
cimport numpy as cnp
from libc.stdlib cimport malloc, realloc, free, qsort
from libc.math cimport fabs, sqrt

cnp.import_array()

ctypedef cnp.int64_t idx_t


cdef struct Buf:
    idx_t* idx
    double* val
    Py_ssize_t size
    Py_ssize_t cap


cdef int buf_init(Buf* b, Py_ssize_t cap) noexcept nogil:
    if cap < 16:
        cap = 16
    b.idx = <idx_t*> malloc(cap * sizeof(idx_t))
    b.val = <double*> malloc(cap * sizeof(double))
    b.size = 0
    b.cap = cap
    if b.idx == NULL or b.val == NULL:
        return -1
    return 0


cdef void buf_free(Buf* b) noexcept nogil:
    free(b.idx)
    free(b.val)
    b.idx = NULL
    b.val = NULL


cdef int buf_push(Buf* b, idx_t i, double v) noexcept nogil:
    cdef Py_ssize_t newcap
    cdef idx_t* ni
    cdef double* nv
    if b.size == b.cap:
        newcap = 2 * b.cap
        ni = <idx_t*> realloc(b.idx, newcap * sizeof(idx_t))
        if ni == NULL:
            return -1
        b.idx = ni
        nv = <double*> realloc(b.val, newcap * sizeof(double))
        if nv == NULL:
            return -1
        b.val = nv
        b.cap = newcap
    b.idx[b.size] = i
    b.val[b.size] = v
    b.size += 1
    return 0


cdef inline void heap_push(idx_t* h, Py_ssize_t* size, idx_t v) noexcept nogil:
    cdef Py_ssize_t i = size[0]
    cdef Py_ssize_t parent
    size[0] += 1
    while i > 0:
        parent = (i - 1) >> 1
        if h[parent] <= v:
            break
        h[i] = h[parent]
        i = parent
    h[i] = v


cdef inline idx_t heap_pop(idx_t* h, Py_ssize_t* size) noexcept nogil:
    cdef idx_t top = h[0]
    cdef idx_t last
    cdef Py_ssize_t n, i, child
    size[0] -= 1
    n = size[0]
    if n == 0:
        return top
    last = h[n]
    i = 0
    while True:
        child = 2 * i + 1
        if child >= n:
            break
        if child + 1 < n and h[child + 1] < h[child]:
            child += 1
        if h[child] >= last:
            break
        h[i] = h[child]
        i = child
    h[i] = last
    return top


cdef int cmp_idx(const void* a, const void* b) noexcept nogil:
    cdef idx_t x = (<idx_t*> a)[0]
    cdef idx_t y = (<idx_t*> b)[0]
    return (x > y) - (x < y)


cdef object _transpose(Py_ssize_t n_out, Py_ssize_t n_in, idx_t* ptr, idx_t* ind,
                       double* val):
    """Counting transpose of compressed storage; returns sorted (ptr, ind, val)."""
    cdef Py_ssize_t nnz = ptr[n_in]
    cdef cnp.ndarray[idx_t, ndim=1] tptr = np.zeros(n_out + 1, dtype=np.int64)
    cdef cnp.ndarray[idx_t, ndim=1] tind = np.empty(nnz, dtype=np.int64)
    cdef cnp.ndarray[double, ndim=1] tval = np.empty(nnz, dtype=np.float64)
    cdef idx_t[::1] tp = tptr
    cdef idx_t[::1] ti = tind
    cdef double[::1] tv = tval
    cdef Py_ssize_t j, q, r, dest
    cdef idx_t* nxt
    with nogil:
        for q in range(nnz):
            tp[ind[q] + 1] += 1
        for r in range(n_out):
            tp[r + 1] += tp[r]
        nxt = <idx_t*> malloc((n_out + 1) * sizeof(idx_t))
        for r in range(n_out):
            nxt[r] = tp[r]
        for j in range(n_in):
            for q in range(ptr[j], ptr[j + 1]):
                r = ind[q]
                dest = nxt[r]
                ti[dest] = j
                tv[dest] = val[q]
                nxt[r] += 1
        free(nxt)
    return tptr, tind, tval


def csr_matvec(const idx_t[::1] indptr, const idx_t[::1] indices,
               const double[::1] data, const double[::1] x):
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef cnp.ndarray[double, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef double[::1] y = out
    cdef Py_ssize_t i, q
    cdef double s
    with nogil:
        for i in range(n):
            s = 0.0
            for q in range(indptr[i], indptr[i + 1]):
                s = s + data[q] * x[indices[q]]
            y[i] = s
    return out


def csr_dense_matmul(const idx_t[::1] indptr, const idx_t[::1] indices,
                     const double[::1] data, const double[:, ::1] X):
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t m = X.shape[1]
    cdef cnp.ndarray[double, ndim=2] out = np.zeros((n, m), dtype=np.float64)
    cdef double[:, ::1] Y = out
    cdef Py_ssize_t i, q, c, j
    cdef double a
    with nogil:
        for i in range(n):
            for q in range(indptr[i], indptr[i + 1]):
                j = indices[q]
                a = data[q]
                for c in range(m):
                    Y[i, c] = Y[i, c] + a * X[j, c]
    return out


def lu_factor(Py_ssize_t n, const idx_t[::1] colptr, const idx_t[::1] rowind,
              const double[::1] vals):
    """Left-looking sparse LU with partial pivoting on a CSC matrix.

    Returns ``(status, Lp, Li, Lx, Up, Ui, Ux, perm)`` with L (unit diagonal
    implicit) and U in CSR form, both in pivot order, so that
    ``A[perm, :] = L @ U``.
    """
    cdef double* x = <double*> malloc(max(n, 1) * sizeof(double))
    cdef idx_t* mark = <idx_t*> malloc(max(n, 1) * sizeof(idx_t))
    cdef idx_t* pinv = <idx_t*> malloc(max(n, 1) * sizeof(idx_t))
    cdef idx_t* nz = <idx_t*> malloc(max(n, 1) * sizeof(idx_t))
    cdef idx_t* heap = <idx_t*> malloc(max(n, 1) * sizeof(idx_t))
    cdef idx_t* lcp = <idx_t*> malloc((n + 1) * sizeof(idx_t))
    cdef idx_t* ucp = <idx_t*> malloc((n + 1) * sizeof(idx_t))
    cdef cnp.ndarray[idx_t, ndim=1] perm_arr = np.empty(n, dtype=np.int64)
    cdef idx_t[::1] perm = perm_arr
    cdef Buf L, U
    cdef Py_ssize_t j, q, t, nnz, hsize, i, r, k, piv
    cdef double ukj, best, a, d
    cdef int status = -1
    cdef int ok = 0
    ok |= buf_init(&L, 4 * colptr[n] + n)
    ok |= buf_init(&U, 4 * colptr[n] + n)
    if x == NULL or mark == NULL or pinv == NULL or nz == NULL or heap == NULL \
            or lcp == NULL or ucp == NULL or ok != 0:
        status = -2
    with nogil:
        if status == -1:
            for i in range(n):
                x[i] = 0.0
                mark[i] = -1
                pinv[i] = -1
            lcp[0] = 0
            ucp[0] = 0
            for j in range(n):
                nnz = 0
                hsize = 0
                for q in range(colptr[j], colptr[j + 1]):
                    r = rowind[q]
                    mark[r] = j
                    nz[nnz] = r
                    nnz += 1
                    x[r] = vals[q]
                    if pinv[r] >= 0:
                        heap_push(heap, &hsize, pinv[r])
                while hsize > 0:
                    k = heap_pop(heap, &hsize)
                    r = perm[k]
                    ukj = x[r]
                    if ukj == 0.0:
                        continue
                    if buf_push(&U, k, ukj) != 0:
                        status = -2
                        break
                    for q in range(lcp[k], lcp[k + 1]):
                        i = L.idx[q]
                        if mark[i] != j:
                            mark[i] = j
                            nz[nnz] = i
                            nnz += 1
                            x[i] = 0.0
                            if pinv[i] >= 0:
                                heap_push(heap, &hsize, pinv[i])
                        x[i] = x[i] - L.val[q] * ukj
                if status != -1:
                    break
                piv = -1
                best = 0.0
                for t in range(nnz):
                    i = nz[t]
                    if pinv[i] < 0:
                        a = fabs(x[i])
                        if a > best or (a == best and a > 0.0 and i < piv):
                            best = a
                            piv = i
                if piv < 0:
                    status = j
                    break
                d = x[piv]
                if buf_push(&U, j, d) != 0:
                    status = -2
                    break
                ucp[j + 1] = U.size
                pinv[piv] = j
                perm[j] = piv
                for t in range(nnz):
                    i = nz[t]
                    if pinv[i] < 0 and x[i] != 0.0:
                        if buf_push(&L, i, x[i] / d) != 0:
                            status = -2
                            break
                lcp[j + 1] = L.size
                for t in range(nnz):
                    x[nz[t]] = 0.0
                if status != -1:
                    break
            if status == -1:
                for q in range(L.size):
                    L.idx[q] = pinv[L.idx[q]]
    result = None
    if status == -1:
        Lp, Li, Lx = _transpose(n, n, lcp, L.idx, L.val)
        Up, Ui, Ux = _transpose(n, n, ucp, U.idx, U.val)
        result = (status, Lp, Li, Lx, Up, Ui, Ux, perm_arr)
    free(x); free(mark); free(pinv); free(nz); free(heap); free(lcp); free(ucp)
    buf_free(&L)
    buf_free(&U)
    if result is None:
        return (status, None, None, None, None, None, None, None)
    return result


def ilut_factor(Py_ssize_t n, const idx_t[::1] indptr, const idx_t[::1] indices,
                const double[::1] data, double drop_tol):
    """Row-wise (IKJ) incomplete LU with a relative drop tolerance, no pivoting.

    Returns ``(status, Lp, Li, Lx, Up, Ui, Ux)`` in CSR form.
    """
    cdef double* w = <double*> malloc(max(n, 1) * sizeof(double))
    cdef idx_t* mark = <idx_t*> malloc(max(n, 1) * sizeof(idx_t))
    cdef idx_t* nzl = <idx_t*> malloc(max(n, 1) * sizeof(idx_t))
    cdef idx_t* heap = <idx_t*> malloc(max(n, 1) * sizeof(idx_t))
    cdef idx_t* upart = <idx_t*> malloc(max(n, 1) * sizeof(idx_t))
    cdef double* udiag = <double*> malloc(max(n, 1) * sizeof(double))
    cdef cnp.ndarray[idx_t, ndim=1] Lp_arr = np.zeros(n + 1, dtype=np.int64)
    cdef cnp.ndarray[idx_t, ndim=1] Up_arr = np.zeros(n + 1, dtype=np.int64)
    cdef idx_t[::1] Lp = Lp_arr
    cdef idx_t[::1] Up = Up_arr
    cdef Buf L, U
    cdef Py_ssize_t i, q, nnz, hsize, k, c, t, nu
    cdef double s, thr, wk
    cdef int status = -1
    cdef int ok = 0
    ok |= buf_init(&L, 2 * indptr[n] + n)
    ok |= buf_init(&U, 2 * indptr[n] + n)
    if w == NULL or mark == NULL or nzl == NULL or heap == NULL or upart == NULL \
            or udiag == NULL or ok != 0:
        status = -2
    with nogil:
        if status == -1:
            for i in range(n):
                w[i] = 0.0
                mark[i] = -1
            for i in range(n):
                s = 0.0
                for q in range(indptr[i], indptr[i + 1]):
                    s = s + data[q] * data[q]
                thr = drop_tol * sqrt(s)
                nnz = 0
                hsize = 0
                for q in range(indptr[i], indptr[i + 1]):
                    c = indices[q]
                    mark[c] = i
                    nzl[nnz] = c
                    nnz += 1
                    w[c] = data[q]
                    if c < i:
                        heap_push(heap, &hsize, c)
                if mark[i] != i:
                    mark[i] = i
                    nzl[nnz] = i
                    nnz += 1
                    w[i] = 0.0
                while hsize > 0:
                    k = heap_pop(heap, &hsize)
                    wk = w[k]
                    if wk == 0.0:
                        continue
                    wk = wk / udiag[k]
                    if fabs(wk) < thr:
                        w[k] = 0.0
                        continue
                    w[k] = wk
                    if buf_push(&L, k, wk) != 0:
                        status = -2
                        break
                    for q in range(Up[k] + 1, Up[k + 1]):
                        c = U.idx[q]
                        if mark[c] != i:
                            mark[c] = i
                            nzl[nnz] = c
                            nnz += 1
                            w[c] = 0.0
                            if c < i:
                                heap_push(heap, &hsize, c)
                        w[c] = w[c] - wk * U.val[q]
                if status != -1:
                    break
                Lp[i + 1] = L.size
                if w[i] == 0.0:
                    status = i
                    break
                udiag[i] = w[i]
                if buf_push(&U, i, w[i]) != 0:
                    status = -2
                    break
                nu = 0
                for t in range(nnz):
                    c = nzl[t]
                    if c > i and w[c] != 0.0 and fabs(w[c]) >= thr:
                        upart[nu] = c
                        nu += 1
                qsort(upart, nu, sizeof(idx_t), cmp_idx)
                for t in range(nu):
                    if buf_push(&U, upart[t], w[upart[t]]) != 0:
                        status = -2
                        break
                Up[i + 1] = U.size
                for t in range(nnz):
                    w[nzl[t]] = 0.0
                if status != -1:
                    break
    result = None
    if status == -1:
        Li = np.array(<idx_t[:L.size]> L.idx, copy=True) if L.size else np.empty(0, np.int64)
        Lx = np.array(<double[:L.size]> L.val, copy=True) if L.size else np.empty(0, np.float64)
        Ui = np.array(<idx_t[:U.size]> U.idx, copy=True) if U.size else np.empty(0, np.int64)
        Ux = np.array(<double[:U.size]> U.val, copy=True) if U.size else np.empty(0, np.float64)
        result = (status, Lp_arr, Li, Lx, Up_arr, Ui, Ux)
    free(w); free(mark); free(nzl); free(heap); free(upart); free(udiag)
    buf_free(&L)
    buf_free(&U)
    if result is None:
        return (status, None, None, None, None, None, None)
    return result


def lu_solve(const idx_t[::1] Lp, const idx_t[::1] Li, const double[::1] Lx,
             const idx_t[::1] Up, const idx_t[::1] Ui, const double[::1] Ux,
             perm, const double[:, ::1] B):
    """Solve ``L U X = B[perm]`` for a block of right-hand sides (rows x rhs)."""
    cdef Py_ssize_t n = B.shape[0]
    cdef Py_ssize_t m = B.shape[1]
    cdef cnp.ndarray[double, ndim=2] out = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] X = out
    cdef const idx_t[::1] p
    cdef bint has_perm = perm is not None
    cdef Py_ssize_t i, q, c, j
    cdef double a, d
    if has_perm:
        p = perm
    with nogil:
        for i in range(n):
            if has_perm:
                j = p[i]
            else:
                j = i
            for c in range(m):
                X[i, c] = B[j, c]
        for i in range(n):
            for q in range(Lp[i], Lp[i + 1]):
                j = Li[q]
                a = Lx[q]
                for c in range(m):
                    X[i, c] = X[i, c] - a * X[j, c]
        for i in range(n - 1, -1, -1):
            d = Ux[Up[i]]
            for q in range(Up[i] + 1, Up[i + 1]):
                j = Ui[q]
                a = Ux[q]
                for c in range(m):
                    X[i, c] = X[i, c] - a * X[j, c]
            for c in range(m):
                X[i, c] = X[i, c] / d
    return out
