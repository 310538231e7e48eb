"""Restarted GMRES with left or right preconditioning."""
import time
from dataclasses import dataclass, field

import numpy as np

from .sparse import SparseMatrix, matvec

__all__ = ["SolverConfig", "SolveReport", "gmres", "true_residual", "as_operator"]

BREAKDOWN_TOL = 1e-14


@dataclass(frozen=True)
class SolverConfig:
    restart: int = 300
    max_iters: int = 3000
    rel_tol: float = 1e-9
    side: str = "right"

    def __post_init__(self):
        if self.restart < 1:
            raise ValueError("restart must be at least 1")
        if self.max_iters < 0:
            raise ValueError("max_iters must be non-negative")
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if self.side not in ("left", "right"):
            raise ValueError("side must be 'left' or 'right'")


@dataclass
class SolveReport:
    iterations: int
    converged: bool
    residual_history: list
    setup_seconds: float = 0.0
    solve_seconds: float = 0.0
    fill_factor: float = 0.0
    final_residual: float = float("nan")
    breakdown: bool = False
    extra: dict = field(default_factory=dict)


def as_operator(A):
    """Wrap a SparseMatrix, dense array or callable as ``x -> A x``."""
    if isinstance(A, SparseMatrix):
        return lambda x: matvec(A, x)
    if isinstance(A, np.ndarray):
        return lambda x: A @ x
    if hasattr(A, "apply"):
        return A.apply
    if callable(A):
        return A
    raise TypeError(f"cannot use {type(A).__name__} as an operator")


def true_residual(A, x, b):
    """``||b - A x|| / ||b||``; the absolute ``||A x||`` when ``b`` is zero."""
    op = as_operator(A)
    b = np.asarray(b, dtype=np.float64)
    nb = np.linalg.norm(b)
    r = b - op(np.asarray(x, dtype=np.float64))
    return float(np.linalg.norm(r) / nb) if nb > 0 else float(np.linalg.norm(r))


def _givens(a, b):
    if b == 0.0:
        return 1.0, 0.0
    h = np.hypot(a, b)
    return a / h, b / h


def gmres(A, B, b, cfg=None, x0=None):
    """Solve ``A x = b`` with restarted GMRES.

    Parameters
    ----------
    A : SparseMatrix, ndarray or callable
    B : Preconditioner, callable or None
        Applied as ``B^{-1}``; on the right by default.
    b : ndarray
    cfg : SolverConfig

    Returns
    -------
    x : ndarray
    report : SolveReport
        ``residual_history`` holds relative residuals: the true residual at
        the start of each cycle and the recurrence estimate after each inner
        step; ``extra["cycle_starts"]`` indexes the true-residual entries.
        For left preconditioning these are preconditioned residuals
        apart from the true-residual checks.
    """
    cfg = cfg or SolverConfig()
    op = as_operator(A)
    prec = (lambda v: v) if B is None else as_operator(B)
    b = np.asarray(b, dtype=np.float64)
    n = b.shape[0]
    t0 = time.perf_counter()
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=np.float64)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n), SolveReport(0, True, [0.0], final_residual=0.0)
    left = cfg.side == "left"
    scale = np.linalg.norm(prec(b)) if left else bnorm
    history = []
    starts = []
    its = 0
    breakdown = False
    m = cfg.restart

    while True:
        r = b - op(x)
        true_rel = np.linalg.norm(r) / bnorm
        starts.append(len(history))
        history.append(float(true_rel))
        if true_rel <= cfg.rel_tol or its >= cfg.max_iters or breakdown:
            break
        if left:
            r = prec(r)
        beta = np.linalg.norm(r)
        V = np.zeros((m + 1, n))
        H = np.zeros((m + 1, m))
        cs = np.zeros(m)
        sn = np.zeros(m)
        g = np.zeros(m + 1)
        g[0] = beta
        V[0] = r / beta
        k_done = 0
        for k in range(m):
            if left:
                w = prec(op(V[k]))
            else:
                w = op(prec(V[k]))
            wnorm0 = np.linalg.norm(w)
            for j in range(k + 1):
                H[j, k] = np.dot(V[j], w)
                w -= H[j, k] * V[j]
            H[k + 1, k] = np.linalg.norm(w)
            its += 1
            k_done = k + 1
            for j in range(k):
                t = cs[j] * H[j, k] + sn[j] * H[j + 1, k]
                H[j + 1, k] = -sn[j] * H[j, k] + cs[j] * H[j + 1, k]
                H[j, k] = t
            hk1 = H[k + 1, k]
            cs[k], sn[k] = _givens(H[k, k], hk1)
            H[k, k] = cs[k] * H[k, k] + sn[k] * hk1
            H[k + 1, k] = 0.0
            g[k + 1] = -sn[k] * g[k]
            g[k] = cs[k] * g[k]
            est = abs(g[k + 1]) / scale
            history.append(float(est))
            if hk1 <= BREAKDOWN_TOL * max(wnorm0, 1e-300):
                breakdown = True
                break
            V[k + 1] = w / hk1
            if est <= cfg.rel_tol or its >= cfg.max_iters:
                break
        y = np.linalg.solve(np.triu(H[:k_done, :k_done]), g[:k_done]) if k_done else np.zeros(0)
        upd = V[:k_done].T @ y
        x = x + (upd if left else prec(upd))

    elapsed = time.perf_counter() - t0
    final = history[-1]
    return x, SolveReport(
        iterations=its,
        converged=bool(final <= cfg.rel_tol),
        residual_history=history,
        solve_seconds=elapsed,
        final_residual=final,
        breakdown=breakdown,
        extra={"cycle_starts": starts},
    )
