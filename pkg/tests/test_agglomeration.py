import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import disk_mesh
from pixvem import agglomeration, geometry, pixelmesh
from pixvem.exceptions import ParseError

DISK = geometry.disk_domain()


def _grid(mask, h=1.0, origin=(0.0, 0.0)):
    return pixelmesh.grid_from_mask(np.array(mask, dtype=bool), origin=origin, h=h)


def _central4():
    return pixelmesh.classify_pixels(DISK, 0.25)


def test_single_block_element():
    mesh = agglomeration.agglomerate_uniform(_central4(), 2)
    assert mesh.n_elements == 1
    el = mesh.elements[0]
    assert el.H_K == pytest.approx(0.5)
    assert np.allclose(el.x_K, (0.5, 0.5))
    assert mesh.tau_hat == pytest.approx(0.5)


def test_single_element_boundary_split_in_two():
    mesh = agglomeration.agglomerate_uniform(_central4(), 2)
    assert len(mesh.macro_edges) == 2
    assert all(me.is_boundary for me in mesh.macro_edges)
    assert sum(me.n_fine for me in mesh.macro_edges) == 8


def test_pixel_mesh_itself():
    mesh = agglomeration.agglomerate_uniform(_central4(), 1)
    assert mesh.n_elements == 4
    assert mesh.tau_hat == pytest.approx(1.0)
    assert all(el.area == pytest.approx(0.0625) for el in mesh.elements)


def test_disk_h8_m4():
    mesh = agglomeration.agglomerate_uniform(pixelmesh.classify_pixels(DISK, 1 / 8), 4)
    assert mesh.n_elements <= 4
    L = np.linalg.norm(mesh.edge_vectors()[mesh.edge_is_boundary()], axis=1)
    assert np.allclose(L, 1 / 8)
    for el in mesh.elements:
        assert len(el.boundary_loop) == len(el.edges)  # one loop through all edges


def test_two_squares_share_one_straight_edge():
    grid = _grid(np.ones((2, 4)), h=0.25)
    mesh = agglomeration.agglomerate_uniform(grid, 2)
    assert mesh.n_elements == 2
    inner = [me for me in mesh.macro_edges if not me.is_boundary]
    assert len(inner) == 1
    assert inner[0].n_fine == 2 and len(inner[0].edges) == 1
    assert inner[0].elements == (0, 1)


def test_graded_one_level_is_uniform():
    grid = pixelmesh.classify_pixels(DISK, 1 / 32)
    a = agglomeration.agglomerate_uniform(grid, 4)
    b = agglomeration.agglomerate_graded(grid, (0.5, 0.5), 4, 1)
    assert np.array_equal(a.labels, b.labels)
    assert a.H_nominal == b.H_nominal


def test_graded_two_levels_refine_at_corner():
    grid = _grid(np.ones((8, 8)), h=1 / 8)
    mesh = agglomeration.agglomerate_graded(grid, (0.0, 0.0), 4, 2)
    near = [el for el in mesh.elements if max(el.x_K) < 4 / 8]
    assert len(near) == 4
    assert all(el.H_K == pytest.approx(2 / 8) for el in near)
    far = [el for el in mesh.elements if el not in near]
    assert all(el.H_K == pytest.approx(4 / 8) for el in far)
    assert mesh.H_nominal == pytest.approx(2 / 8)


def test_bean_graded_sizes_geometric():
    grid = pixelmesh.classify_pixels(geometry.bean_domain(), 0.25 / 4 / 8)
    mesh = agglomeration.agglomerate_graded(grid, (0.0, 0.0), 32, 4)
    sizes = sorted({round(el.block_size, 12) for el in mesh.elements})
    assert sizes == pytest.approx([0.25 / 8, 0.25 / 4, 0.25 / 2, 0.25])
    smallest = [el for el in mesh.elements if el.block_size == pytest.approx(0.25 / 8)]
    assert all(np.hypot(*el.x_K) < 0.1 for el in smallest)


def test_graded_corner_must_be_node():
    grid = _grid(np.ones((8, 8)), h=1 / 8)
    with pytest.raises(ValueError):
        agglomeration.agglomerate_graded(grid, (0.51, 0.5), 4, 2)


def _check_mesh(mesh, m=None):
    grid = mesh.grid
    h = grid.h
    area = sum(el.area for el in mesh.elements)
    assert area == pytest.approx(grid.n_inside * h * h, rel=1e-12)
    assert np.array_equal(mesh.labels >= 0, grid.inside)
    # every edge belongs to exactly one macro edge, and macro edges list each once
    listed = np.sort(np.concatenate([me.edges for me in mesh.macro_edges]))
    assert np.array_equal(listed, np.arange(mesh.n_edges))
    for i, me in enumerate(mesh.macro_edges):
        assert np.all(mesh.edge_macro[me.edges] == i)
        assert me.n_fine == round(sum(np.linalg.norm(mesh.edge_vectors()[me.edges], axis=1)) / h)
    # conformity: each element boundary is a closed loop with zero net normal flux
    for el in mesh.elements:
        n = mesh.outward_normals(el)
        L = np.linalg.norm(mesh.edge_vectors()[el.edges], axis=1)
        assert np.allclose((n * L[:, None]).sum(0), 0.0, atol=1e-12)
        assert sum(L) >= 4 * np.sqrt(el.area) - 1e-12
    # fine-edge counts of boundary edges are one pixel each
    Lb = np.linalg.norm(mesh.edge_vectors()[mesh.edge_is_boundary()], axis=1)
    assert np.allclose(Lb, h)
    if m is not None:
        assert min(len(el.pixels) for el in mesh.elements) >= m * m / 4
        assert max(el.H_K for el in mesh.elements) <= 2 * m * h + 1e-12


@pytest.mark.parametrize("H, m", [(1 / 8, 4), (1 / 16, 4), (1 / 8, 8), (1 / 16, 2)])
def test_disk_mesh_invariants(H, m):
    _, mesh = disk_mesh(H, m)
    _check_mesh(mesh, m)


@pytest.mark.parametrize("rule", pixelmesh.RULES)
def test_mesh_invariants_each_rule(rule):
    _, mesh = disk_mesh(1 / 8, 4, rule)
    _check_mesh(mesh)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.lists(st.booleans(), min_size=8, max_size=8), min_size=8, max_size=8),
       st.sampled_from([1, 2, 3, 4]))
def test_random_masks(rows, m):
    mask = np.array(rows, dtype=bool)
    if not mask.any():
        return
    try:
        grid = pixelmesh.grid_from_mask(mask, h=1 / 8)
        mesh = agglomeration.agglomerate_uniform(grid, m)
    except ParseError:
        return
    _check_mesh(mesh)


def test_audit_report(disk_h8m4):
    _, mesh = disk_h8m4
    rep = agglomeration.audit_assumption(mesh)
    assert rep["n_elements"] == mesh.n_elements
    assert 0 < rep["alpha_min"] <= rep["alpha_max"] <= 1
    assert rep["H_ratio_max"] == pytest.approx(1.0)
    assert rep["N0_max"] >= 2


def test_json_and_svg_dumps(tmp_path, disk_h8m4):
    _, mesh = disk_h8m4
    agglomeration.dump_json(mesh, tmp_path / "m.json")
    data = json.loads((tmp_path / "m.json").read_text())
    assert len(data["elements"]) == mesh.n_elements
    agglomeration.render_svg(mesh, tmp_path / "m.svg")
    assert (tmp_path / "m.svg").read_text().startswith("<svg")
