import numpy as np
import pytest

from conftest import disk_mesh, vem_setup
from pixvem import assembly, condensation, geometry, solver


def _chain(dirs, h=0.25):
    """Chain of unit steps; returns P, Q and the right-hand normals."""
    steps = {"R": (1, 0), "U": (0, 1), "L": (-1, 0), "D": (0, -1)}
    pts = np.cumsum([(0, 0)] + [steps[d] for d in dirs], axis=0) * h
    P, Q = pts[:-1], pts[1:]
    t = (Q - P) / h
    normals = np.stack([t[:, 1], -t[:, 0]], axis=1)
    return P, Q, normals


def _k1_columns(n_edges):
    cols = -np.ones((n_edges, 2), dtype=int)
    for i in range(n_edges):
        if i > 0:
            cols[i, 0] = i - 1
        if i < n_edges - 1:
            cols[i, 1] = i
    return cols


@pytest.mark.parametrize("mean_row", [False, True])
def test_straight_macro_edge_five_fine_edges(mean_row):
    P, Q, nu = _chain("UUUUU")
    M = condensation.chain_constraints(P, Q, nu, _k1_columns(5), 4, 1, mean_row)
    assert M.shape == (3 if mean_row else 2, 4)
    assert np.allclose(M[1], 0.0)  # the second normal component vanishes on a straight edge
    N, piv, rank = condensation.nullspace_split(M)
    assert rank == 1 and N.shape == (4, 3)
    assert np.allclose(M @ N, 0.0)


def test_single_fine_edge_has_no_interior_dofs():
    P, Q, nu = _chain("R")
    M = condensation.chain_constraints(P, Q, nu, _k1_columns(1), 0, 1)
    N, piv, rank = condensation.nullspace_split(M)
    assert N.shape[1] == 0 and rank == 0


@pytest.mark.parametrize("mean_row", [False, True])
def test_staircase_with_both_normal_orientations(mean_row):
    P, Q, nu = _chain("RUUR")
    M = condensation.chain_constraints(P, Q, nu, _k1_columns(4), 3, 1, mean_row)
    N, piv, rank = condensation.nullspace_split(M)
    assert rank == 2 and N.shape == (3, 1)
    assert len(piv) == 2


def test_lazy_count_formula_on_chain():
    P, Q, nu = _chain("RRRUUURRUU")
    M = condensation.chain_constraints(P, Q, nu, _k1_columns(10), 9, 1)
    N, _, rank = condensation.nullspace_split(M)
    assert N.shape[1] == max(0, 9 - np.linalg.matrix_rank(M))


@pytest.mark.parametrize("k", [1, 2, 3])
def test_pixel_mesh_has_no_lazy_dofs(k):
    _, mesh = disk_mesh(1 / 8, 1)
    dofmap, ops = vem_setup(mesh, k)
    cmap = condensation.build_condensation(mesh, dofmap, ops)
    assert cmap.n_lazy == 0 and cmap.n_retained == dofmap.N
    case = geometry.builtin_case("test1a")
    system = assembly.assemble_full(mesh, dofmap, ops, case, assembly.BdtConfig(k=k))
    full, _ = solver.solve_sparse(system)
    _, u, _ = condensation.condense_and_solve(system, cmap)
    assert np.max(np.abs(u - full)) <= 1e-13 * np.max(np.abs(full))


@pytest.fixture(scope="module", params=[1, 2, 3])
def condensed(request):
    k = request.param
    _, mesh = disk_mesh(1 / 8, 4)
    dofmap, ops = vem_setup(mesh, k)
    cmap = condensation.build_condensation(mesh, dofmap, ops)
    case = geometry.builtin_case("test1b")
    system = assembly.assemble_full(mesh, dofmap, ops, case, assembly.BdtConfig(k=k))
    return mesh, dofmap, ops, cmap, system


def test_counts(condensed):
    _, dofmap, _, cmap, _ = condensed
    assert cmap.n_lazy > 0
    assert cmap.n_retained + cmap.n_lazy == dofmap.N


def test_lazy_functions_have_zero_projections(condensed):
    _, _, ops, cmap, _ = condensed
    B = cmap.lazy.toarray()
    for op in ops:
        local = B[op.dofs]
        if not np.any(local):
            continue
        assert np.max(np.abs(op.Pi_star @ local)) < 1e-10
        assert np.max(np.abs(op.Pi0_star @ local)) < 1e-10


def test_lazy_rows_are_pure_stabilization(condensed):
    _, _, _, cmap, system = condensed
    B = cmap.lazy
    diff = B.T @ (system.matrix - system.stabilization)
    assert abs(diff).max() <= 1e-11 * abs(system.matrix).max()
    assert np.max(np.abs(B.T @ system.rhs)) <= 1e-11 * np.max(np.abs(system.rhs))


def test_lazy_stabilization_is_the_diagonal_product(condensed):
    _, _, _, cmap, system = condensed
    B = cmap.lazy
    K = (B.T @ system.stabilization @ B).toarray()
    W = (B.T @ (cmap.weights[:, None] * B.toarray()))
    assert np.max(np.abs(K - W)) <= 1e-11 * np.max(np.abs(W))


def test_pi_s_projection(condensed):
    _, _, _, cmap, _ = condensed
    rng = np.random.default_rng(5)
    x, y = rng.standard_normal((2, cmap.N))
    px, py = cmap.Pi_S(x), cmap.Pi_S(y)
    assert np.max(np.abs(cmap.Pi_S(px) - px)) <= 1e-10 * np.max(np.abs(px))
    s = lambda a, b: a @ (cmap.weights * b)  # noqa: E731
    assert s(px, y) == pytest.approx(s(x, py), rel=1e-11, abs=1e-11)
    lazy_vec = cmap.lazy @ rng.standard_normal(cmap.n_lazy)
    assert np.allclose(cmap.Pi_S(lazy_vec), lazy_vec, atol=1e-10)


def test_condensed_solution_matches_full(condensed):
    _, _, _, cmap, system = condensed
    full, _ = solver.solve_sparse(system)
    x, u, rep = condensation.condense_and_solve(system, cmap)
    assert rep.dof_count == cmap.n_retained
    assert np.max(np.abs(u - full)) <= 1e-9 * np.max(np.abs(full))
