"""Enhanced virtual element space of order k on agglomerated pixel meshes.

Local degrees of freedom of an element are ordered as: values at its
vertices (ascending global id), values at the k-1 interior Gauss-Lobatto
nodes of each of its edges (edge order of the element, nodes running from
the edge's first to its second vertex), and the scaled moments
(1/|K|) int_K v m_beta for beta in P_{k-2}.
"""

from dataclasses import dataclass

import numpy as np

from . import quadrature as qd
from .exceptions import SingularG


@dataclass(frozen=True)
class DofMap:
    k: int
    n_vertices: int
    n_edges: int
    n_elements: int

    @property
    def n_edge_dofs(self):
        return self.k - 1

    @property
    def n_moments(self):
        return qd.dim_poly(self.k - 2)

    @property
    def edge_offset(self):
        return self.n_vertices

    @property
    def moment_offset(self):
        return self.n_vertices + self.n_edges * (self.k - 1)

    @property
    def N(self):
        return self.moment_offset + self.n_elements * self.n_moments

    def vertex_dofs(self, v):
        return np.asarray(v)

    def edge_dofs(self, e):
        return self.edge_offset + np.asarray(e)[..., None] * (self.k - 1) + np.arange(self.k - 1)

    def moment_dofs(self, K):
        return self.moment_offset + np.asarray(K)[..., None] * self.n_moments + np.arange(self.n_moments)

    def kind(self):
        """Per-DOF tag: 0 vertex, 1 edge node, 2 moment."""
        out = np.full(self.N, 2, dtype=int)
        out[: self.edge_offset] = 0
        out[self.edge_offset: self.moment_offset] = 1
        return out


def build_dof_map(mesh, k):
    if k < 1:
        raise ValueError("order k must be >= 1")
    return DofMap(int(k), mesh.n_vertices, mesh.n_edges, mesh.n_elements)


class Monomials:
    """Scaled monomials ((x - x_K)/H_K)^a ((y - y_K)/H_K)^b of degree <= k."""

    def __init__(self, k, center, size):
        self.k = k
        self.center = np.asarray(center, dtype=float)
        self.size = float(size)
        self.exponents = qd.monomial_exponents(k)
        self.dim = len(self.exponents)

    def local(self, pts):
        pts = np.asarray(pts, dtype=float)
        return (pts[..., 0] - self.center[0]) / self.size, (pts[..., 1] - self.center[1]) / self.size

    def __call__(self, pts):
        return qd.eval_monomials(*self.local(pts), self.k)

    def gradients(self, pts):
        return qd.eval_monomial_gradients(*self.local(pts), self.k, self.size)

    def evaluate(self, coeffs, pts):
        return self(pts) @ coeffs

    def evaluate_gradient(self, coeffs, pts):
        gx, gy = self.gradients(pts)
        return np.stack([gx @ coeffs, gy @ coeffs], axis=-1)


def monomials(k, x_K, H_K):
    return Monomials(k, x_K, H_K)


# --------------------------------------------------------------------------
# pixel quadrature

def basis_scale(element):
    """Monomial scaling length: half the element size, so xi, eta lie in [-1, 1]."""
    return 0.5 * element.H_K


def pixel_corners(mesh, element):
    h = mesh.h
    iy, ix = element.pixels[:, 0], element.pixels[:, 1]
    return mesh.grid.origin[0] + ix * h, mesh.grid.origin[1] + iy * h


def monomial_integrals(mesh, element, deg):
    """Exact table T[a, b] = int_K xi^a eta^b over the element's pixels."""
    x0, y0 = pixel_corners(mesh, element)
    H = basis_scale(element)
    xc, yc = element.x_K
    p = np.arange(deg + 1)
    a0, a1 = (x0 - xc) / H, (x0 + mesh.h - xc) / H
    b0, b1 = (y0 - yc) / H, (y0 + mesh.h - yc) / H
    Ix = H * (a1[:, None] ** (p + 1) - a0[:, None] ** (p + 1)) / (p + 1)
    Iy = H * (b1[:, None] ** (p + 1) - b0[:, None] ** (p + 1)) / (p + 1)
    return Ix.T @ Iy


def mass_matrix(table, k):
    ex = qd.monomial_exponents(k)
    return table[ex[:, 0][:, None] + ex[:, 0][None, :], ex[:, 1][:, None] + ex[:, 1][None, :]]


def pixel_quadrature(mesh, element, n):
    """Tensor Gauss points (npix * n^2, 2) and weights on the element's pixels."""
    t, w = qd.gauss_legendre(n)
    h = mesh.h
    x0, y0 = pixel_corners(mesh, element)
    X = x0[:, None, None] + h * t[None, :, None]
    Y = y0[:, None, None] + h * t[None, None, :]
    X, Y = np.broadcast_arrays(X, Y)
    W = np.broadcast_to(h * h * w[:, None] * w[None, :], X.shape)
    return np.stack([X.ravel(), Y.ravel()], axis=-1), W.ravel().copy()


# --------------------------------------------------------------------------
# element operators

@dataclass
class ElementOperators:
    index: int
    k: int
    dofs: np.ndarray  # global DOF ids, local order
    basis: Monomials
    area: float
    perimeter: float
    edge_nodes: dict  # edge id -> local DOF indices of its k+1 GL nodes
    D: np.ndarray
    B: np.ndarray
    G: np.ndarray
    G_direct: np.ndarray
    M: np.ndarray  # L2 mass matrix of P_k
    Pi_star: np.ndarray  # Pi^nabla in monomial coordinates
    Pi: np.ndarray  # Pi^nabla in DOF coordinates
    Pi0_star: np.ndarray  # Pi^0_k in monomial coordinates
    Pi0_grad_star: np.ndarray  # (2, dim P_{k-1}, n_dofs)
    S_unit: np.ndarray  # (I - Pi)^T (I - Pi)
    beta: float = 1.0

    @property
    def n_dofs(self):
        return len(self.dofs)

    @property
    def S(self):
        return self.beta * self.S_unit

    @property
    def consistency(self):
        Gt = self.G.copy()
        Gt[0] = 0.0
        return self.Pi_star.T @ Gt @ self.Pi_star

    @property
    def stiffness(self):
        return self.consistency + self.S


def element_vertices(mesh, element):
    return np.unique(np.concatenate([mesh.edge_p[element.edges], mesh.edge_q[element.edges]]))


def build_projectors(mesh, dofmap, element, beta=1.0):
    """Local matrices of the order-k enhanced VEM space on one element."""
    k = dofmap.k
    nk = qd.dim_poly(k)
    nk1 = qd.dim_poly(k - 1)
    nk2 = qd.dim_poly(k - 2)
    HK = basis_scale(element)
    basis = Monomials(k, element.x_K, HK)
    area = element.area

    verts = element_vertices(mesh, element)
    ne = len(element.edges)
    nv = len(verts)
    n_dofs = nv + ne * (k - 1) + nk2
    vloc = {int(v): i for i, v in enumerate(verts)}
    dofs = np.concatenate([
        dofmap.vertex_dofs(verts),
        dofmap.edge_dofs(element.edges).ravel(),
        dofmap.moment_dofs(element.index).ravel()]).astype(int)

    xy = mesh.nodes
    P = xy[mesh.edge_p[element.edges]]
    Q = xy[mesh.edge_q[element.edges]]
    L = np.linalg.norm(Q - P, axis=1)
    normals = mesh.outward_normals(element)
    t, w = qd.gauss_lobatto(k + 1)
    pts = P[:, None, :] + t[None, :, None] * (Q - P)[:, None, :]  # (ne, k+1, 2)
    loc = np.empty((ne, k + 1), dtype=int)
    loc[:, 0] = [vloc[int(v)] for v in mesh.edge_p[element.edges]]
    loc[:, -1] = [vloc[int(v)] for v in mesh.edge_q[element.edges]]
    if k > 1:
        loc[:, 1:-1] = nv + np.arange(ne)[:, None] * (k - 1) + np.arange(k - 1)
    edge_nodes = {int(e): loc[i] for i, e in enumerate(element.edges)}
    perimeter = float(L.sum())

    table = monomial_integrals(mesh, element, 2 * k)
    M = mass_matrix(table, k)

    # D: degrees of freedom of each monomial
    D = np.zeros((n_dofs, nk))
    D[:nv] = basis(xy[verts])
    if k > 1:
        D[nv: nv + ne * (k - 1)] = basis(pts[:, 1:-1].reshape(-1, 2))
        D[nv + ne * (k - 1):] = M[:nk2] / area

    # B: right-hand side of the Pi^nabla system
    gx, gy = basis.gradients(pts.reshape(-1, 2))
    dn = (gx.reshape(ne, k + 1, nk) * normals[:, None, 0, None]
          + gy.reshape(ne, k + 1, nk) * normals[:, None, 1, None])
    wl = w[None, :] * L[:, None]  # (ne, k+1)
    B = np.zeros((nk, n_dofs))
    np.add.at(B.T, loc.ravel(), (dn * wl[..., None]).reshape(-1, nk))
    dx, dy = qd.derivative_matrices(k)
    lap = (dx @ dx + dy @ dy) / HK ** 2  # coefficients of Laplacians, in P_{k-2}
    if k > 1:
        B[:, nv + ne * (k - 1):] -= area * lap[:nk2].T
    B[0] = 0.0
    np.add.at(B[0], loc.ravel(), wl.ravel() / perimeter)

    G = B @ D
    ex = qd.monomial_exponents(k)
    G_direct = np.zeros((nk, nk))
    # int grad m_a . grad m_b from the exact monomial table
    for i, (a1, b1) in enumerate(ex):
        for j, (a2, b2) in enumerate(ex):
            val = 0.0
            if a1 and a2:
                val += a1 * a2 * table[a1 + a2 - 2, b1 + b2]
            if b1 and b2:
                val += b1 * b2 * table[a1 + a2, b1 + b2 - 2]
            G_direct[i, j] = val / HK ** 2
    G_direct[0] = B[0] @ D

    cond = np.linalg.cond(G)
    if not np.isfinite(cond) or cond > 1e14:
        raise SingularG(f"element {element.index}: Pi-nabla matrix G is singular (cond {cond:.3g})")
    Pi_star = np.linalg.solve(G, B)
    Pi = D @ Pi_star

    # Pi^0_k via the enhancement on the L2 complement of P_{k-2}
    C = np.zeros((nk, n_dofs))
    mom = nv + ne * (k - 1)
    if nk2:
        C[:nk2, mom:] = area * np.eye(nk2)
        A = np.linalg.solve(M[:nk2, :nk2], M[:nk2, nk2:])  # P_{k-2} parts of higher monomials
        comp = np.zeros((nk, nk - nk2))
        comp[nk2:] = np.eye(nk - nk2)
        comp[:nk2] = -A
        # int v q_j = int Pi v q_j for q_j = m_j - Pi0_{k-2} m_j
        C[nk2:] = comp.T @ M @ Pi_star + A.T @ C[:nk2]
    else:
        C[:] = M @ Pi_star
    Pi0_star = np.linalg.solve(M, C)

    # Pi^0_{k-1} of the gradient: boundary terms minus moments of derivatives
    vals = basis(pts.reshape(-1, 2))[:, :nk1].reshape(ne, k + 1, nk1)
    Pi0_grad_star = np.zeros((2, nk1, n_dofs))
    for c, dmat in enumerate((dx, dy)):
        R = np.zeros((nk1, n_dofs))
        np.add.at(R.T, loc.ravel(), (vals * (wl * normals[:, c, None])[..., None]).reshape(-1, nk1))
        if nk2:
            R[:, mom:] -= area * dmat[:nk2, :nk1].T / HK
        Pi0_grad_star[c] = np.linalg.solve(M[:nk1, :nk1], R)

    I_Pi = np.eye(n_dofs) - Pi
    S_unit = I_Pi.T @ I_Pi
    return ElementOperators(element.index, k, dofs, basis, area, perimeter, edge_nodes,
                            D, B, G, G_direct, M, Pi_star, Pi, Pi0_star, Pi0_grad_star,
                            S_unit, float(beta))


def build_all(mesh, dofmap, beta=1.0):
    return [build_projectors(mesh, dofmap, el, beta) for el in mesh.elements]


def stabilization(ops, beta):
    """Dofi-dofi stabilization beta (I - Pi)^T (I - Pi) in DOF coordinates."""
    return beta * ops.S_unit


# --------------------------------------------------------------------------
# interpolation

def edge_gl_points(mesh, k):
    """Interior Gauss-Lobatto nodes of every edge, shape (n_edges, k-1, 2)."""
    t, _ = qd.gauss_lobatto(k + 1)
    xy = mesh.nodes
    P = xy[mesh.edge_p]
    Q = xy[mesh.edge_q]
    return P[:, None, :] + t[None, 1:-1, None] * (Q - P)[:, None, :]


def interpolate_dofs(u, mesh, dofmap, quad_points=None):
    """Global DOF vector of a smooth function ``u`` (callable on (..., 2) arrays)."""
    k = dofmap.k
    out = np.zeros(dofmap.N)
    out[: dofmap.n_vertices] = u(mesh.nodes)
    if k > 1:
        pts = edge_gl_points(mesh, k)
        out[dofmap.edge_offset: dofmap.moment_offset] = u(pts.reshape(-1, 2))
        n = quad_points or k + 2
        for el in mesh.elements:
            x, wq = pixel_quadrature(mesh, el, n)
            m = Monomials(k - 2, el.x_K, basis_scale(el))(x)
            out[dofmap.moment_dofs(el.index)] = (wq * u(x)) @ m / el.area
    return out
