"""Dense spectral diagnostics for preconditioned operators."""
import numpy as np

__all__ = [
    "SpectrumError",
    "materialize",
    "spectrum",
    "count_unit_eigenvalues",
    "match_multisets",
    "trailing_spectrum",
    "preconditioned_spectra",
]

MAX_DENSE = 600


class SpectrumError(RuntimeError):
    pass


def materialize(op, n):
    """Dense matrix of a linear operator by applying it to unit vectors."""
    if hasattr(op, "toarray"):
        return op.toarray()
    if isinstance(op, np.ndarray):
        return op
    f = op.apply if hasattr(op, "apply") else op
    return np.column_stack([f(e) for e in np.eye(n)])


def spectrum(M, n=None, limit=MAX_DENSE):
    """Eigenvalues of a dense-representable operator (LAPACK Hessenberg QR)."""
    if not isinstance(M, np.ndarray) or M.ndim != 2:
        if n is None:
            n = M.shape[0] if hasattr(M, "shape") else None
        if n is None:
            raise ValueError("n is required for an operator without a shape")
        M = materialize(M, n)
    if M.shape[0] != M.shape[1]:
        raise ValueError("spectrum needs a square operator")
    if M.shape[0] > limit:
        raise ValueError(f"dense spectrum limited to n <= {limit}")
    try:
        return np.linalg.eigvals(M)
    except np.linalg.LinAlgError as exc:
        raise SpectrumError(f"eigenvalue iteration did not converge: {exc}") from exc


def count_unit_eigenvalues(spec, tol=1e-6):
    return int(np.count_nonzero(np.abs(np.asarray(spec) - 1.0) <= tol))


def match_multisets(a, b, tol=None):
    """Greedy nearest pairing of two equal-size multisets.

    Repeatedly pairs the globally closest unmatched couple. Returns the
    largest paired distance, or a bool when ``tol`` is given.
    """
    a = np.asarray(a, dtype=complex).ravel()
    b = np.asarray(b, dtype=complex).ravel()
    if len(a) != len(b):
        return False if tol is not None else np.inf
    if len(a) == 0:
        return True if tol is not None else 0.0
    dist = np.abs(a[:, None] - b[None, :])
    order = np.argsort(dist, axis=None, kind="stable")
    used_a = np.zeros(len(a), dtype=bool)
    used_b = np.zeros(len(b), dtype=bool)
    worst = 0.0
    left = len(a)
    for flat in order:
        i, j = divmod(int(flat), len(b))
        if used_a[i] or used_b[j]:
            continue
        used_a[i] = used_b[j] = True
        worst = max(worst, dist[i, j])
        left -= 1
        if left == 0:
            break
    return worst <= tol if tol is not None else float(worst)


def trailing_spectrum(spec, p):
    """Drop the ``p`` eigenvalues closest to 1."""
    spec = np.asarray(spec)
    keep = np.argsort(np.abs(spec - 1.0), kind="stable")[p:]
    return spec[np.sort(keep)]


def preconditioned_spectra(C, B):
    """Spectra of ``B^{-1} C`` (left) and ``C B^{-1}`` (right)."""
    n = B.n
    Binv = materialize(B, n)
    Cd = C.toarray()
    return spectrum(Binv @ Cd), spectrum(Cd @ Binv)
