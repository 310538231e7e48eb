"""Marker-and-cell discretization of the leaky lid-driven cavity Oseen problem.

Unknown layout on an ``N x N`` cell grid of the unit square:

* ``u`` on interior vertical faces ``x_i`` (i = 1..N-1) of cell row ``j``,
  index ``j*(N-1) + (i-1)``;
* ``v`` on interior horizontal faces ``y_j`` (j = 1..N-1) of cell column
  ``i``, index ``nu + (j-1)*N + i``;
* ``p`` at cell centres, index ``nu + nv + j*N + i``.

All equations are integrated over their control volume, so the gradient
block is the negative transpose of the divergence block. Convection is
first-order upwind in advective form.
"""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .precond import PcdInputs
from .sparse import SparseMatrix

__all__ = ["OseenProblem", "generate_oseen", "grid_widths", "recirculating_wind"]


def grid_widths(n, kind="uniform", stretch=1.056):
    """Cell widths on [0, 1]; stretched grids grow geometrically away from the walls."""
    if kind == "uniform":
        return np.full(n, 1.0 / n)
    if kind != "stretched":
        raise ValueError(f"unknown grid kind {kind!r}")
    if stretch <= 1.0:
        raise ValueError("stretch factor must exceed 1")
    half = stretch ** np.arange((n + 1) // 2)
    w = np.concatenate((half, half[: n // 2][::-1]))
    return w / w.sum()


def recirculating_wind(x, y):
    """Analytic recirculating wind mapped from [-1, 1]^2 onto the unit square."""
    X, Y = 2 * x - 1, 2 * y - 1
    return 2 * Y * (1 - X**2), -2 * X * (1 - Y**2)


@dataclass
class OseenProblem:
    grid_n: int
    nu: float
    grid: str
    stretch: float
    wind: str
    C: SparseMatrix
    rhs: np.ndarray
    p: int
    aux: PcdInputs
    q_diag: np.ndarray
    n_u: int
    n_v: int

    @property
    def n(self):
        return self.C.nrows

    @property
    def n_p(self):
        return self.n - self.p


class _Builder:
    def __init__(self, N, widths):
        self.N = N
        self.h = widths
        self.xf = np.concatenate(([0.0], np.cumsum(widths)))
        self.xf[-1] = 1.0
        self.xc = 0.5 * (self.xf[:-1] + self.xf[1:])
        self.nu_ = (N - 1) * N
        self.nv_ = N * (N - 1)
        self.np_ = N * N

    def ui(self, i, j):
        return j * (self.N - 1) + (i - 1)

    def vi(self, i, j):
        return self.nu_ + (j - 1) * self.N + i

    def pi(self, i, j):
        return j * self.N + i


def _momentum(b, nu, wind_u, wind_v, lid):
    """Convection-diffusion rows for both velocity components.

    ``wind_u(i, j)`` gives the wind at the u-face ``(x_i, yc_j)``, ``wind_v``
    at the v-face ``(xc_i, y_j)``. Returns (rows, cols, vals, rhs, volumes).
    """
    N, h, xf, xc = b.N, b.h, b.xf, b.xc
    rows, cols, vals = [], [], []
    rhs = np.zeros(b.nu_ + b.nv_)
    vol = np.zeros(b.nu_ + b.nv_)

    def add(r, c, v):
        rows.append(r)
        cols.append(c)
        vals.append(v)

    # u-momentum: control volume [xc_{i-1}, xc_i] x [y_j, y_{j+1}]
    for j in range(N):
        for i in range(1, N):
            r = b.ui(i, j)
            dx = xc[i] - xc[i - 1]
            dy = h[j]
            vol[r] = dx * dy
            w1, w2 = wind_u(i, j)
            diag = 0.0
            # east / west neighbours along x (distance = cell width)
            for di, dist in ((1, h[i]), (-1, h[i - 1])):
                ii = i + di
                coef = nu * dy / dist
                adv = 0.0
                if (di < 0 and w1 > 0) or (di > 0 and w1 < 0):
                    adv = abs(w1) * dx * dy / dist
                diag += coef + adv
                if 1 <= ii <= N - 1:
                    add(r, b.ui(ii, j), -(coef + adv))
            # north / south neighbours along y
            for dj in (1, -1):
                jj = j + dj
                wall = jj < 0 or jj > N - 1
                dist = h[j] / 2 if wall else abs(xc[jj] - xc[j])
                coef = nu * dx / dist
                adv = 0.0
                if (dj < 0 and w2 > 0) or (dj > 0 and w2 < 0):
                    adv = abs(w2) * dx * dy / dist
                diag += coef + adv
                if wall:
                    ub = lid if jj > N - 1 else 0.0
                    rhs[r] += (coef + adv) * ub
                else:
                    add(r, b.ui(i, jj), -(coef + adv))
            add(r, r, diag)

    # v-momentum: control volume [x_i, x_{i+1}] x [yc_{j-1}, yc_j]
    for j in range(1, N):
        for i in range(N):
            r = b.vi(i, j)
            dx = h[i]
            dy = xc[j] - xc[j - 1]
            vol[r] = dx * dy
            w1, w2 = wind_v(i, j)
            diag = 0.0
            for dj, dist in ((1, h[j]), (-1, h[j - 1])):
                jj = j + dj
                coef = nu * dx / dist
                adv = 0.0
                if (dj < 0 and w2 > 0) or (dj > 0 and w2 < 0):
                    adv = abs(w2) * dx * dy / dist
                diag += coef + adv
                if 1 <= jj <= N - 1:
                    add(r, b.vi(i, jj), -(coef + adv))
            for di in (1, -1):
                ii = i + di
                wall = ii < 0 or ii > N - 1
                dist = h[i] / 2 if wall else abs(xc[ii] - xc[i])
                coef = nu * dy / dist
                adv = 0.0
                if (di < 0 and w1 > 0) or (di > 0 and w1 < 0):
                    adv = abs(w1) * dx * dy / dist
                diag += coef + adv
                if not wall:
                    add(r, b.vi(ii, j), -(coef + adv))
            add(r, r, diag)
    return rows, cols, vals, rhs, vol


def _divergence(b):
    """Area-integrated divergence, rows = cells, columns = velocity unknowns."""
    N, h = b.N, b.h
    rows, cols, vals = [], [], []
    for j in range(N):
        for i in range(N):
            r = b.pi(i, j)
            if i >= 1:
                rows.append(r), cols.append(b.ui(i, j)), vals.append(-h[j])
            if i <= N - 2:
                rows.append(r), cols.append(b.ui(i + 1, j)), vals.append(h[j])
            if j >= 1:
                rows.append(r), cols.append(b.vi(i, j)), vals.append(-h[i])
            if j <= N - 2:
                rows.append(r), cols.append(b.vi(i, j + 1)), vals.append(h[i])
    return sp.csr_matrix((vals, (rows, cols)), shape=(b.np_, b.nu_ + b.nv_))


def _pressure_convection(b, wind_c):
    """Upwind convection on the pressure grid with no flux through the walls."""
    N, h, xc = b.N, b.h, b.xc
    rows, cols, vals = [], [], []
    for j in range(N):
        for i in range(N):
            r = b.pi(i, j)
            area = h[i] * h[j]
            w1, w2 = wind_c(i, j)
            # upwind neighbour in each direction; skipped at the wall
            for w, nb in ((w1, (i - 1, j) if w1 > 0 else (i + 1, j)),
                          (w2, (i, j - 1) if w2 > 0 else (i, j + 1))):
                ii, jj = nb
                if w == 0.0 or not (0 <= ii < N and 0 <= jj < N):
                    continue
                dist = abs(xc[ii] - xc[i]) + abs(xc[jj] - xc[j])
                c = abs(w) * area / dist
                rows += [r, r]
                cols += [r, b.pi(ii, jj)]
                vals += [c, -c]
    return sp.csr_matrix((vals, (rows, cols)), shape=(b.np_, b.np_))


def _pin_last(m):
    m = sp.lil_matrix(m)
    k = m.shape[0] - 1
    m[k, :] = 0
    m[:, k] = 0
    m[k, k] = 1.0
    return sp.csr_matrix(m)


def _assemble(b, nu, winds, lid=1.0):
    wind_u, wind_v, wind_c = winds
    rows, cols, vals, rhs_v, vol = _momentum(b, nu, wind_u, wind_v, lid)
    nvel = b.nu_ + b.nv_
    Dm = sp.csr_matrix((vals, (rows, cols)), shape=(nvel, nvel))
    Bm = _divergence(b)
    E = -Bm.T
    F = Bm.tocsr()
    C = sp.bmat([[Dm, E], [F, None]], format="lil")
    k = C.shape[0] - 1
    # pin the last pressure: identity row, zero column
    C[k, :] = 0
    C[:, k] = 0
    C[k, k] = 1.0
    C = sp.csr_matrix(C)
    rhs = np.concatenate((rhs_v, np.zeros(b.np_)))
    return C, rhs, vol, Bm


def _interp_winds(b, uvec, vvec):
    """Winds at u-faces, v-faces and cell centres from a discrete velocity."""
    N = b.N
    U = np.zeros((N, N + 1))  # U[j, i] on face x_i, row j
    V = np.zeros((N + 1, N))  # V[j, i] on face y_j, column i
    U[:, 1:N] = uvec.reshape(N, N - 1)
    V[1:N, :] = vvec.reshape(N - 1, N)
    Uc = 0.5 * (U[:, :-1] + U[:, 1:])
    Vc = 0.5 * (V[:-1, :] + V[1:, :])

    def wu(i, j):
        vbar = 0.25 * (V[j, i - 1] + V[j + 1, i - 1] + V[j, i] + V[j + 1, i])
        return U[j, i], vbar

    def wv(i, j):
        ubar = 0.25 * (U[j - 1, i] + U[j - 1, i + 1] + U[j, i] + U[j, i + 1])
        return ubar, V[j, i]

    def wc(i, j):
        return Uc[j, i], Vc[j, i]

    return wu, wv, wc


def _analytic_winds(b):
    xf, xc = b.xf, b.xc

    def wu(i, j):
        return recirculating_wind(xf[i], xc[j])

    def wv(i, j):
        return recirculating_wind(xc[i], xf[j])

    def wc(i, j):
        return recirculating_wind(xc[i], xc[j])

    return wu, wv, wc


def generate_oseen(grid_n, nu, grid="uniform", stretch=1.056, wind="recirculating",
                   picard_steps=3):
    """Build the leaky-cavity Oseen system and its PCD/LSC auxiliary data.

    Parameters
    ----------
    grid_n : int
        Cells per side (at least 8).
    nu : float
        Viscosity, positive.
    grid : {"uniform", "stretched"}
    stretch : float
        Geometric growth factor for stretched grids.
    wind : {"recirculating", "lid-picard"}
        Analytic wind, or the velocity after ``picard_steps`` Picard sweeps
        started from the Stokes solution.

    Returns
    -------
    OseenProblem
        ``C`` is ordered [u, v, p]; the last pressure is pinned.
    """
    if int(grid_n) != grid_n or grid_n < 8:
        raise ValueError("grid_n must be an integer >= 8")
    if not nu > 0:
        raise ValueError("viscosity must be positive")
    N = int(grid_n)
    b = _Builder(N, grid_widths(N, grid, stretch))
    if wind == "recirculating":
        winds = _analytic_winds(b)
    elif wind == "lid-picard":
        zero = lambda i, j: (0.0, 0.0)  # noqa: E731
        winds = (zero, zero, zero)
        for _ in range(picard_steps + 1):
            C, rhs, _, _ = _assemble(b, nu, winds)
            x = spla.spsolve(C.tocsc(), rhs)
            winds = _interp_winds(b, x[: b.nu_], x[b.nu_: b.nu_ + b.nv_])
    else:
        raise ValueError(f"unknown wind {wind!r}")
    C, rhs, vol, Bm = _assemble(b, nu, winds)

    A_p = (Bm @ sp.diags(1.0 / vol) @ Bm.T).tocsr()
    D_p = nu * A_p + _pressure_convection(b, winds[2])
    Q_p = sp.diags(np.outer(b.h, b.h).ravel())
    aux = PcdInputs(
        A_p=SparseMatrix.from_scipy(_pin_last(A_p)),
        D_p=SparseMatrix.from_scipy(_pin_last(D_p)),
        Q_p=SparseMatrix.from_scipy(Q_p),
    )
    return OseenProblem(
        grid_n=N,
        nu=float(nu),
        grid=grid,
        stretch=float(stretch),
        wind=wind,
        C=SparseMatrix.from_scipy(C),
        rhs=rhs,
        p=b.nu_ + b.nv_,
        aux=aux,
        q_diag=vol,
        n_u=b.nu_,
        n_v=b.nv_,
    )
