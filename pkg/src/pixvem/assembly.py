"""Global VEM system with Nitsche boundary terms and the Taylor boundary correction.

Matrix rows are test functions v, columns trial functions u:

    a_h(u, v) - int_{dOmega_h} d_nu(Pi u) v
              - int_{dOmega_h} (Pi u + sum_j delta^j/j! d_sigma^j Pi u)(d_nu Pi v - gamma/H Pi v)

with right-hand side int f Pi0 v - int_{dOmega_h} g*(d_nu Pi v - gamma/H Pi v).
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import geometry
from . import quadrature as qd
from .exceptions import NonFiniteEntry

logger = logging.getLogger(__name__)


@dataclass
class BdtConfig:
    k: int = 1
    k_star: int = None
    gamma: float = None
    beta: float = 1.0
    edge_quadrature_points: int = None
    volume_quadrature_points: int = None
    first_term: str = "raw"  # or "projected"

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.k_star is None:
            self.k_star = self.k
        if self.gamma is None:
            self.gamma = 10.0 * self.k ** 2
        if self.edge_quadrature_points is None:
            self.edge_quadrature_points = self.k + 3
        if self.volume_quadrature_points is None:
            self.volume_quadrature_points = self.k + 3
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.k_star < 0:
            raise ValueError("k_star must be >= 0")
        if self.beta < 0:
            raise ValueError("beta must be >= 0")
        if self.first_term not in ("raw", "projected"):
            raise ValueError("first_term must be 'raw' or 'projected'")


@dataclass
class LinearSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray
    dofmap: object
    symmetric: bool = False
    stabilization: sp.csr_matrix = None
    info: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.matrix.shape[0]


class _Triplets:
    def __init__(self):
        self.rows, self.cols, self.vals = [], [], []

    def add(self, dofs_r, dofs_c, block):
        r, c = np.meshgrid(dofs_r, dofs_c, indexing="ij")
        self.rows.append(r.ravel())
        self.cols.append(c.ravel())
        self.vals.append(np.asarray(block).ravel())

    def tocsr(self, n):
        if not self.rows:
            return sp.csr_matrix((n, n))
        m = sp.coo_matrix((np.concatenate(self.vals),
                           (np.concatenate(self.rows), np.concatenate(self.cols))), shape=(n, n))
        m = m.tocsr()
        m.sum_duplicates()
        m.sort_indices()
        return m


def directional_derivative_matrix(sigma, j, k, scale=1.0):
    """Monomial-coefficient matrix of p -> d_sigma^j p on P_k."""
    dx, dy = qd.derivative_matrices(k)
    d1 = (sigma[0] * dx + sigma[1] * dy) / scale
    return np.linalg.matrix_power(d1, j)


def correction_values(basis, pts, sigma, delta, k_star):
    """Values at ``pts`` of sum_{j=1}^{k*} delta^j/j! d_sigma^j m_alpha.

    ``sigma`` is one direction for all points, ``delta`` is per point;
    returns (npts, dim P_k).
    """
    vals = basis(pts)
    out = np.zeros_like(vals)
    for j in range(1, min(k_star, basis.k) + 1):
        Dj = directional_derivative_matrix(sigma, j, basis.k, basis.size)
        out += (delta ** j / math.factorial(j))[:, None] * (vals @ Dj)
    return out


def boundary_edges(mesh):
    """Boundary edge ids with their owning element and outward unit normal."""
    ids = np.flatnonzero(mesh.edge_is_boundary())
    owner = np.where(mesh.edge_left[ids] >= 0, mesh.edge_left[ids], mesh.edge_right[ids])
    t = mesh.edge_vectors()[ids]
    t = t / np.linalg.norm(t, axis=1, keepdims=True)
    n = np.stack([t[:, 1], -t[:, 0]], axis=1)
    n = np.where((mesh.edge_left[ids] >= 0)[:, None], n, -n)
    return ids, owner, n


@dataclass
class BoundaryData:
    """Quadrature on boundary edges: points, weights, sigma and delta per point."""

    edges: np.ndarray
    owner: np.ndarray
    normal: np.ndarray
    sigma: np.ndarray  # per edge
    t: np.ndarray  # reference points on [0, 1]
    points: np.ndarray  # (n_edges, nq, 2)
    weights: np.ndarray  # (n_edges, nq), include the edge length
    delta: np.ndarray  # (n_edges, nq)


def boundary_data(mesh, domain, nq, with_delta=True):
    ids, owner, normal = boundary_edges(mesh)
    xy = mesh.nodes
    P = xy[mesh.edge_p[ids]]
    Q = xy[mesh.edge_q[ids]]
    t, w = qd.gauss_legendre(nq)
    pts = P[:, None, :] + t[None, :, None] * (Q - P)[:, None, :]
    L = np.linalg.norm(Q - P, axis=1)
    wts = w[None, :] * L[:, None]
    if with_delta:
        sigma = geometry.sigma_direction(domain, 0.5 * (P + Q))
        s_pts = np.repeat(sigma, nq, axis=0)
        delta = geometry.delta_along(domain, pts.reshape(-1, 2), s_pts,
                                     step=0.5 * mesh.h).reshape(len(ids), nq)
    else:
        sigma = normal.copy()
        delta = np.zeros((len(ids), nq))
    return BoundaryData(ids, owner, normal, sigma, t, pts, wts, delta)


def _edge_trace(ops, edge, t_points):
    """Raw trace of local basis functions on ``edge`` at reference points: (nq, n_dofs)."""
    k = ops.k
    gl, _ = qd.gauss_lobatto(k + 1)
    lag = qd.lagrange_basis(gl, t_points)
    out = np.zeros((len(t_points), ops.n_dofs))
    out[:, ops.edge_nodes[int(edge)]] = lag
    return out


def penalty_scale(mesh, element):
    """Mesh size in the penalty gamma/H: the element's nominal block side."""
    return mesh.elements[element].block_size


def assemble_full(mesh, dofmap, ops, case, config, bdata=None):
    """Assemble the full system; ``case`` supplies f, g and the domain."""
    N = dofmap.N
    k = dofmap.k
    A = _Triplets()
    S = _Triplets()
    rhs = np.zeros(N)
    nv = config.volume_quadrature_points

    for el, op in zip(mesh.elements, ops):
        A.add(op.dofs, op.dofs, op.consistency + config.beta * op.S_unit)
        S.add(op.dofs, op.dofs, config.beta * op.S_unit)
        x, w = _volume_quadrature(mesh, el, nv)
        F = (w * case.f(x)) @ op.basis(x)
        rhs[op.dofs] += op.Pi0_star.T @ F

    if bdata is None:
        bdata = boundary_data(mesh, case.domain, config.edge_quadrature_points)
    for i, e in enumerate(bdata.edges):
        K = int(bdata.owner[i])
        op = ops[K]
        pts = bdata.points[i]
        w = bdata.weights[i]
        nu = bdata.normal[i]
        sig = bdata.sigma[i]
        delta = bdata.delta[i]
        Hpen = penalty_scale(mesh, K)

        vals = op.basis(pts)
        gx, gy = op.basis.gradients(pts)
        dn = (gx * nu[0] + gy * nu[1]) @ op.Pi_star  # (nq, n_dofs)
        piv = vals @ op.Pi_star
        corr = correction_values(op.basis, pts, sig, delta, config.k_star) @ op.Pi_star
        test = dn - config.gamma / Hpen * piv
        if config.first_term == "raw":
            vtrace = _edge_trace(op, e, bdata.t)
        else:
            vtrace = piv
        block = -(vtrace.T * w) @ dn - (test.T * w) @ (piv + corr)
        A.add(op.dofs, op.dofs, block)
        g_star = case.g(pts + delta[:, None] * sig)
        rhs[op.dofs] -= test.T @ (w * g_star)

    mat = A.tocsr(N)
    if not np.all(np.isfinite(mat.data)) or not np.all(np.isfinite(rhs)):
        raise NonFiniteEntry("assembled system has non-finite entries")
    return LinearSystem(mat, rhs, dofmap, False, S.tocsr(N),
                        {"k": k, "k_star": config.k_star, "gamma": config.gamma,
                         "beta": config.beta, "n_boundary_edges": len(bdata.edges),
                         "max_delta": float(bdata.delta.max(initial=0.0))})


def _volume_quadrature(mesh, element, n):
    from .vemspace import pixel_quadrature
    return pixel_quadrature(mesh, element, n)


def assemble_plain_nitsche(mesh, dofmap, ops, case, config):
    """VEM with plain Nitsche terms on dOmega_h and data g taken in place.

    An independent code path (loops over elements, then over their boundary
    edges) used to cross-check :func:`assemble_full` where the correction
    vanishes.
    """
    N = dofmap.N
    A = _Triplets()
    rhs = np.zeros(N)
    nq = config.edge_quadrature_points
    tq, wq = qd.gauss_legendre(nq)
    gl, _ = qd.gauss_lobatto(dofmap.k + 1)
    lag = qd.lagrange_basis(gl, tq)
    xy = mesh.nodes
    for el, op in zip(mesh.elements, ops):
        local = op.consistency + config.beta * op.S_unit
        x, w = _volume_quadrature(mesh, el, config.volume_quadrature_points)
        rhs[op.dofs] += op.Pi0_star.T @ ((w * case.f(x)) @ op.basis(x))
        normals = mesh.outward_normals(el)
        Hpen = el.block_size
        for e, nu in zip(el.edges, normals):
            if mesh.edge_left[e] >= 0 and mesh.edge_right[e] >= 0:
                continue
            p, q = xy[mesh.edge_p[e]], xy[mesh.edge_q[e]]
            L = np.hypot(*(q - p))
            pts = p + tq[:, None] * (q - p)
            W = np.diag(wq * L)
            phi = op.basis(pts) @ op.Pi_star
            gx, gy = op.basis.gradients(pts)
            dphi = (nu[0] * gx + nu[1] * gy) @ op.Pi_star
            if config.first_term == "raw":
                tr = np.zeros_like(phi)
                tr[:, op.edge_nodes[int(e)]] = lag
            else:
                tr = phi
            local = local - tr.T @ W @ dphi - dphi.T @ W @ phi + config.gamma / Hpen * phi.T @ W @ phi
            gv = case.g(pts)
            rhs[op.dofs] -= dphi.T @ W @ gv - config.gamma / Hpen * phi.T @ W @ gv
        A.add(op.dofs, op.dofs, local)
    return LinearSystem(A.tocsr(N), rhs, dofmap, False)


def assemble_triple_norm(mesh, ops, u, beta=1.0):
    """|Pi u|^2_{1,T_H} + s-energy of (u - Pi u) + ||Pi u||^2_{0,dOmega_h}, square-rooted."""
    grad_part = 0.0
    stab_part = 0.0
    for op in ops:
        ul = u[op.dofs]
        c = op.Pi_star @ ul
        Gt = op.G.copy()
        Gt[0] = 0.0
        grad_part += float(c @ Gt @ c)
        stab_part += float(beta * ul @ op.S_unit @ ul)
    ids, owner, _ = boundary_edges(mesh)
    xy = mesh.nodes
    t, w = qd.gauss_legendre(ops[0].k + 2)
    bnd = 0.0
    for e, K in zip(ids, owner):
        op = ops[K]
        p, q = xy[mesh.edge_p[e]], xy[mesh.edge_q[e]]
        pts = p + t[:, None] * (q - p)
        vals = op.basis(pts) @ (op.Pi_star @ u[op.dofs])
        bnd += float(np.hypot(*(q - p)) * w @ vals ** 2)
    return math.sqrt(max(grad_part, 0.0) + max(stab_part, 0.0) + bnd)
