"""Tensor-product Q_k finite elements on the pixel mesh with Nitsche boundary terms.

Each pixel carries the (k+1)^2 Lagrange functions on Gauss-Lobatto nodes.
With ``k_star = 0`` the boundary terms are plain Nitsche on dOmega_h; with
``k_star >= 1`` the trial trace is replaced by the Taylor series along the
fine-edge normal.
"""

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import geometry
from . import quadrature as qd
from .errors import ErrorRecord
from .exceptions import ConfigError
from .pixelmesh import boundary_edge_arrays
from .solver import solve_sparse


@dataclass
class FemConfig:
    k: int = 1
    gamma: float = None
    k_star: int = 0
    g_star_mode: str = "projected"  # or "trace"

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if self.gamma is None:
            self.gamma = 10.0 * self.k ** 2
        if self.gamma <= 0:
            raise ConfigError("gamma must be positive")
        if self.k_star < 0:
            raise ConfigError("k_star must be >= 0")
        if self.g_star_mode not in ("projected", "trace"):
            raise ConfigError("g_star_mode must be 'projected' or 'trace'")


@dataclass
class FemSolution:
    grid: object
    k: int
    nodes: np.ndarray  # (n_pix, (k+1)^2) global DOF ids per inside pixel
    pixels: np.ndarray  # (n_pix, 2) rows (iy, ix)
    values: np.ndarray
    report: object


class _RefSquare:
    """Q_k Lagrange basis on the unit square, local node (a, b) -> index a + (k+1) b."""

    def __init__(self, k):
        self.k = k
        self.nodes, _ = qd.gauss_lobatto(k + 1)

    def eval(self, s, t, ds=0, dt=0):
        ls = qd.lagrange_basis(self.nodes, s, ds)  # (n, k+1)
        lt = qd.lagrange_basis(self.nodes, t, dt)
        return (ls[:, None, :] * lt[:, :, None]).reshape(len(ls), -1)


def _dof_numbering(grid, k):
    iy, ix = np.nonzero(grid.inside)
    a = np.arange(k + 1)
    gx = k * ix[:, None, None] + a[None, None, :]
    gy = k * iy[:, None, None] + a[None, :, None]
    key = (gy * (k * grid.nx + 1) + gx).reshape(len(ix), -1)
    uniq, inv = np.unique(key, return_inverse=True)
    return inv.reshape(key.shape), np.stack([iy, ix], 1), uniq


def _coo(rows, cols, vals, n):
    m = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    m.sum_duplicates()
    m.sort_indices()
    return m


def fem_assemble(grid, case, config):
    k = config.k
    h = grid.h
    ref = _RefSquare(k)
    dofs, pixels, _ = _dof_numbering(grid, k)
    n = int(dofs.max()) + 1
    nq = k + 2
    t, w = qd.gauss_legendre(nq)
    S, T = np.meshgrid(t, t, indexing="ij")
    S, T, W = S.ravel(), T.ravel(), np.outer(w, w).ravel()
    phi = ref.eval(S, T)
    dxs = ref.eval(S, T, 1, 0)
    dyt = ref.eval(S, T, 0, 1)
    K_ref = (dxs.T * W) @ dxs + (dyt.T * W) @ dyt  # scale invariant in 2D

    nloc = (k + 1) ** 2
    r = np.repeat(dofs, nloc, axis=1).ravel()
    c = np.tile(dofs, (1, nloc)).ravel()
    rows, cols, vals = [r], [c], [np.tile(K_ref.ravel(), len(dofs))]

    x0, y0 = grid.node_xy(pixels[:, 1], pixels[:, 0])
    X = np.stack([x0[:, None] + h * S[None], y0[:, None] + h * T[None]], axis=-1)
    F = case.f(X) * (h * h * W)[None]
    rhs = np.zeros(n)
    np.add.at(rhs, dofs, F @ phi)

    # boundary edges
    start, end, normal, owner = boundary_edge_arrays(grid.inside)
    pix_index = -np.ones(grid.inside.shape, dtype=int)
    pix_index[pixels[:, 0], pixels[:, 1]] = np.arange(len(pixels))
    tq, wq = qd.gauss_legendre(k + 3)
    P = np.stack(grid.node_xy(start[:, 0], start[:, 1]), -1)
    Q = np.stack(grid.node_xy(end[:, 0], end[:, 1]), -1)
    pts = P[:, None, :] + tq[None, :, None] * (Q - P)[:, None, :]
    nu = normal.astype(float)
    if config.k_star > 0 or config.g_star_mode == "projected":
        delta = geometry.delta_along(case.domain, pts.reshape(-1, 2),
                                     np.repeat(nu, len(tq), axis=0), step=0.5 * h).reshape(pts.shape[:2])
    else:
        delta = np.zeros(pts.shape[:2])
    gam = config.gamma / h
    for i in range(len(start)):
        p = pix_index[owner[i, 0], owner[i, 1]]
        xo, yo = grid.node_xy(owner[i, 1], owner[i, 0])
        s = (pts[i, :, 0] - xo) / h
        tt = (pts[i, :, 1] - yo) / h
        axis = 0 if nu[i, 0] != 0 else 1
        sign = nu[i, axis]
        val = ref.eval(s, tt)
        dn = sign * (ref.eval(s, tt, 1, 0) if axis == 0 else ref.eval(s, tt, 0, 1)) / h
        corr = np.zeros_like(val)
        for j in range(1, min(config.k_star, k) + 1):
            dj = ref.eval(s, tt, j, 0) if axis == 0 else ref.eval(s, tt, 0, j)
            corr += (delta[i] ** j / math.factorial(j))[:, None] * sign ** j * dj / h ** j
        wl = wq * h
        test = dn - gam * val
        block = -(val.T * wl) @ dn - (test.T * wl) @ (val + corr)
        d = dofs[p]
        rows.append(np.repeat(d, nloc))
        cols.append(np.tile(d, nloc))
        vals.append(block.ravel())
        if config.g_star_mode == "projected":
            g = case.g(pts[i] + delta[i][:, None] * nu[i])
        else:
            g = case.g(pts[i])
        rhs[d] -= test.T @ (wl * g)
    A = _coo(np.concatenate(rows), np.concatenate(cols), np.concatenate(vals), n)
    return A, rhs, dofs, pixels


def fem_errors(grid, k, dofs, pixels, u, case, relative=True):
    """L2 and H1-seminorm errors on the pixel domain, relative unless ``relative`` is false."""
    h = grid.h
    ref = _RefSquare(k)
    t, w = qd.gauss_legendre(k + 3)
    S, T = np.meshgrid(t, t, indexing="ij")
    S, T, W = S.ravel(), T.ravel(), np.outer(w, w).ravel() * h * h
    phi = ref.eval(S, T)
    dx = ref.eval(S, T, 1, 0) / h
    dy = ref.eval(S, T, 0, 1) / h
    x0, y0 = grid.node_xy(pixels[:, 1], pixels[:, 0])
    X = np.stack([x0[:, None] + h * S[None], y0[:, None] + h * T[None]], axis=-1)
    U = u[dofs]
    uh = U @ phi.T
    gh = np.stack([U @ dx.T, U @ dy.T], axis=-1)
    ue = case.u_exact(X)
    ge = case.grad_u_exact(X)
    e0 = math.sqrt(np.sum(W * (ue - uh) ** 2))
    e1 = math.sqrt(np.sum(W[None, :, None] * (ge - gh) ** 2))
    if relative:
        e0 /= math.sqrt(np.sum(W * ue ** 2))
        e1 /= math.sqrt(np.sum(W[None, :, None] * ge ** 2))
    return e0, e1


def fem_solve(grid, case, config):
    """Solve on the pixel mesh; returns (FemSolution, ErrorRecord)."""
    A, b, dofs, pixels = fem_assemble(grid, case, config)
    u, report = solve_sparse((A, b))
    e0, e1 = fem_errors(grid, config.k, dofs, pixels, u, case)
    sol = FemSolution(grid, config.k, dofs, pixels, u, report)
    rec = ErrorRecord(grid.h, grid.h, config.k, 1.0, len(u), e0, e1)
    return sol, rec
