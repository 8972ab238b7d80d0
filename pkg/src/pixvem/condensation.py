"""Static condensation of lazy degrees of freedom along macro edges.

A lazy function lives on the interior of a macro edge E (its inner vertices
and the Gauss-Lobatto nodes of its edges) and is orthogonal on E to q nu_E
for every q in P_{k-1}, and to constants. Such functions have vanishing
elliptic and L2 projections on both neighbouring elements, so their test
rows carry stabilization terms only and they can be eliminated exactly.
"""

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from . import quadrature as qd
from .exceptions import SingularReducedSystem
from .solver import solve_sparse

logger = logging.getLogger(__name__)

SVD_RTOL = 1e-10


@dataclass
class LazyBasis:
    macro_edge: int
    dofs: np.ndarray  # global ids of the interior-of-E DOFs
    basis: np.ndarray  # (len(dofs), n_lazy) columns spanning the lazy space
    retained: np.ndarray  # global ids kept as unknowns
    eliminated: np.ndarray  # global ids replaced by lazy coordinates
    rank: int

    @property
    def n_lazy(self):
        return self.basis.shape[1]


def chain_constraints(P, Q, normals, node_cols, n_cols, k, mean_row=True):
    """Constraint matrix of the lazy condition on a chain of straight segments.

    P, Q: segment endpoints (n, 2); normals: unit normals (n, 2);
    node_cols: (n, k+1) column index of each Gauss-Lobatto node, -1 for
    nodes that carry no unknown (the chain endpoints).
    """
    P = np.asarray(P, dtype=float)
    Q = np.asarray(Q, dtype=float)
    normals = np.asarray(normals, dtype=float)
    node_cols = np.asarray(node_cols)
    t, w = qd.gauss_lobatto(k + 1)
    pts = P[:, None, :] + t[None, :, None] * (Q - P)[:, None, :]
    L = np.linalg.norm(Q - P, axis=1)
    lo = np.minimum(P.min(0), Q.min(0))
    hi = np.maximum(P.max(0), Q.max(0))
    centre = 0.5 * (lo + hi)
    size = max(0.5 * float((hi - lo).max()), 1e-300)
    q = qd.eval_monomials((pts[..., 0] - centre[0]) / size, (pts[..., 1] - centre[1]) / size, k - 1)
    wl = (w[None, :] * L[:, None])[..., None]
    blocks = [q * wl * normals[:, None, 0, None], q * wl * normals[:, None, 1, None]]
    if mean_row:
        blocks.append(wl)
    vals = np.concatenate(blocks, axis=-1)  # (n, k+1, rows)
    M = np.zeros((vals.shape[-1], n_cols))
    ok = node_cols >= 0
    np.add.at(M.T, node_cols[ok], vals[ok])
    return M


def nullspace_split(M, rtol=SVD_RTOL):
    """Nullspace basis (SVD) and pivot columns (column-pivoted QR) of M."""
    n = M.shape[1]
    if n == 0:
        return np.zeros((0, 0)), np.zeros(0, dtype=int), 0
    U, s, Vt = np.linalg.svd(M)
    smax = s.max(initial=0.0)
    rank = int(np.sum(s > rtol * smax)) if smax > 0 else 0
    N = Vt[rank:].T
    if rank:
        _, _, piv = scipy.linalg.qr(M, pivoting=True, mode="economic")
        pivots = np.sort(piv[:rank])
    else:
        pivots = np.zeros(0, dtype=int)
    return N, pivots, rank


def _edge_normal(mesh, e, owner):
    xy = mesh.nodes
    t = xy[mesh.edge_q[e]] - xy[mesh.edge_p[e]]
    t = t / np.linalg.norm(t)
    n = np.array([t[1], -t[0]])
    return n if mesh.edge_left[e] == owner else -n


def lazy_basis_for_macro_edge(mesh, dofmap, index, mean_row=True, rtol=SVD_RTOL):
    me = mesh.macro_edges[index]
    k = dofmap.k
    inner = [int(v) for v in me.interior_nodes]
    edofs = dofmap.edge_dofs(np.asarray(me.edges, dtype=int)).reshape(-1) if k > 1 else np.zeros(0, int)
    dofs = np.concatenate([dofmap.vertex_dofs(np.asarray(inner, dtype=int)), edofs]).astype(int)
    col = {int(d): j for j, d in enumerate(dofs)}
    xy = mesh.nodes
    ne = len(me.edges)
    node_cols = -np.ones((ne, k + 1), dtype=int)
    normals = np.zeros((ne, 2))
    for i, e in enumerate(me.edges):
        node_cols[i, 0] = col.get(int(mesh.edge_p[e]), -1)
        node_cols[i, -1] = col.get(int(mesh.edge_q[e]), -1)
        if k > 1:
            node_cols[i, 1:-1] = [col[int(d)] for d in dofmap.edge_dofs(e)]
        normals[i] = _edge_normal(mesh, e, me.owner)
    P = xy[mesh.edge_p[me.edges]]
    Q = xy[mesh.edge_q[me.edges]]
    M = chain_constraints(P, Q, normals, node_cols, len(dofs), k, mean_row)
    N, piv, rank = nullspace_split(M, rtol)
    retained = dofs[piv]
    eliminated = np.setdiff1d(dofs, retained)
    return LazyBasis(index, dofs, N, retained, eliminated, rank)


@dataclass
class CondensationMap:
    N: int
    retained: np.ndarray  # sorted global ids of the reduced unknowns
    lazy: sp.csr_matrix  # (N, n_lazy) block-sparse lazy basis
    weights: np.ndarray  # diagonal s-weights, per DOF
    bases: list
    block_ptr: np.ndarray  # lazy column ranges per macro edge

    @property
    def n_lazy(self):
        return self.lazy.shape[1]

    @property
    def n_retained(self):
        return len(self.retained)

    def gram_blocks(self):
        """Dense blocks of B^T W B, one per macro edge with lazy functions."""
        out = []
        for lb in self.bases:
            if lb.n_lazy:
                w = self.weights[lb.dofs]
                out.append((lb, (lb.basis.T * w) @ lb.basis))
        return out

    def Pi_S(self, x):
        """s-orthogonal projection of a global vector onto the lazy space."""
        y = np.zeros(self.N)
        for lb, K in self.gram_blocks():
            w = self.weights[lb.dofs]
            c = np.linalg.solve(K, lb.basis.T @ (w * x[lb.dofs]))
            y[lb.dofs] += lb.basis @ c
        return y


def dof_multiplicity(dofmap, ops):
    mult = np.zeros(dofmap.N)
    for op in ops:
        mult[op.dofs] += 1.0
    return mult


def build_condensation(mesh, dofmap, ops, beta=1.0, mean_row=True):
    bases = []
    cols, rows, vals = [], [], []
    ptr = [0]
    eliminated = []
    for i in range(len(mesh.macro_edges)):
        lb = lazy_basis_for_macro_edge(mesh, dofmap, i, mean_row)
        bases.append(lb)
        if lb.n_lazy:
            r, c = np.meshgrid(lb.dofs, ptr[-1] + np.arange(lb.n_lazy), indexing="ij")
            rows.append(r.ravel())
            cols.append(c.ravel())
            vals.append(lb.basis.ravel())
            eliminated.append(lb.eliminated)
        ptr.append(ptr[-1] + lb.n_lazy)
    N = dofmap.N
    nl = ptr[-1]
    if nl:
        B = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(N, nl)).tocsr()
        elim = np.concatenate(eliminated)
    else:
        B = sp.csr_matrix((N, 0))
        elim = np.zeros(0, dtype=int)
    keep = np.ones(N, dtype=bool)
    keep[elim] = False
    weights = beta * dof_multiplicity(dofmap, ops)
    return CondensationMap(N, np.flatnonzero(keep), B, weights, bases, np.array(ptr))


def _block_inverse(cmap):
    blocks = [np.linalg.inv(K) for _, K in cmap.gram_blocks()]
    if not blocks:
        return sp.csr_matrix((0, 0))
    return sp.block_diag(blocks, format="csr")


def reduce_system(system, cmap):
    """Reduced matrix and right-hand side on the retained unknowns."""
    A = system.matrix.tocsr()
    b = system.rhs
    P = sp.identity(cmap.N, format="csr")[:, cmap.retained]
    A_RR = (P.T @ A @ P).tocsr()
    b_R = P.T @ b
    if cmap.n_lazy == 0:
        return A_RR, b_R, None
    B = cmap.lazy
    Kinv = _block_inverse(cmap)
    A_RB = P.T @ (A @ B)
    A_BR = B.T @ (A @ P)
    b_B = B.T @ b
    A_red = (A_RR - A_RB @ Kinv @ A_BR).tocsr()
    b_red = b_R - A_RB @ (Kinv @ b_B)
    return A_red, b_red, (Kinv, A_BR, b_B)


def reconstruct(x, cmap, extra):
    u = np.zeros(cmap.N)
    u[cmap.retained] = x
    if extra is not None:
        Kinv, A_BR, b_B = extra
        y = Kinv @ (b_B - A_BR @ x)
        u += cmap.lazy @ y
    return u


def condense_and_solve(system, cmap):
    """Solve the reduced problem and return (retained values, full DOF vector, report)."""
    A_red, b_red, extra = reduce_system(system, cmap)
    A_red.sum_duplicates()
    A_red.sort_indices()
    x, report = solve_sparse((A_red, b_red), error=SingularReducedSystem)
    return x, reconstruct(x, cmap, extra), report
