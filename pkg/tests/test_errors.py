import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_poly_coeffs, square_mesh, vem_setup
from pixvem import errors, geometry, vemspace

REFERENCE_FEM_K1_H1 = [(2.0 ** -3, 1.8095e-1), (2.0 ** -4, 1.1855e-1), (2.0 ** -5, 7.5812e-2),
             (2.0 ** -6, 5.2118e-2), (2.0 ** -7, 3.5581e-2)]


def test_fit_slope_examples():
    Hs = [0.5, 0.25, 0.125]
    assert errors.fit_slope([(H, 3 * H ** 2) for H in Hs]) == pytest.approx(2.0)
    assert errors.fit_slope([(H, 0.7) for H in Hs]) == pytest.approx(0.0, abs=1e-12)
    assert errors.fit_slope(REFERENCE_FEM_K1_H1) == pytest.approx(0.586, abs=0.002)


@settings(max_examples=40)
@given(st.floats(-3, 6), st.floats(1e-3, 1e3))
def test_fit_slope_exact_on_power_laws(p, C):
    pts = [(2.0 ** -j, C * 2.0 ** (-j * p)) for j in range(2, 7)]
    assert errors.fit_slope(pts) == pytest.approx(p, abs=1e-9)


@pytest.fixture(scope="module")
def poly_setup():
    k = 2
    dom, mesh = square_mesh(1 / 16, 4)
    dofmap, ops = vem_setup(mesh, k)
    case = geometry.polynomial_case(dom, random_poly_coeffs(np.random.default_rng(0), k))
    return mesh, dofmap, ops, case


def test_exact_interpolant_has_no_error(poly_setup):
    mesh, dofmap, ops, case = poly_setup
    u = vemspace.interpolate_dofs(case.u_exact, mesh, dofmap)
    e0, e1 = errors.compute_errors(mesh, ops, u, case)
    assert e0 <= 1e-10 and e1 <= 1e-10


def test_zero_solution_has_unit_error(poly_setup):
    mesh, dofmap, ops, case = poly_setup
    e0, e1 = errors.compute_errors(mesh, ops, np.zeros(dofmap.N), case)
    assert e0 == pytest.approx(1.0) and e1 == pytest.approx(1.0)


@pytest.mark.parametrize("c", [-2.5, 1e-3, 7.0])
def test_scaling_invariance(poly_setup, c):
    mesh, dofmap, ops, case = poly_setup
    u = vemspace.interpolate_dofs(lambda p: case.u_exact(p) + 0.1 * np.sin(5 * p[..., 0]), mesh, dofmap)
    scaled = geometry.ManufacturedCase(case.domain, lambda p: c * case.u_exact(p),
                                       lambda p: c * case.grad_u_exact(p),
                                       lambda p: c * case.f(p), lambda p: c * case.g(p))
    a = errors.compute_errors(mesh, ops, u, case)
    b = errors.compute_errors(mesh, ops, c * u, scaled)
    assert np.allclose(a, b, rtol=1e-13, atol=0)


def test_csv_roundtrip(tmp_path):
    recs = [errors.ErrorRecord(0.125, 0.03125, 2, 0.25, 311, 1.43e-2, 8.0e-2),
            errors.ErrorRecord(0.0625, 0.015625, 2, 0.25, 1032, 1.5e-3, 2.0e-2)]
    path = tmp_path / "r.csv"
    errors.write_csv(recs, path)
    text = path.read_text()
    assert text.splitlines()[0] == ",".join(errors.CSV_FIELDS) == "H,h,k,tau_hat,active_dofs,e0,e1"
    back = errors.read_csv(path)
    assert [r.active_dofs for r in back] == [311, 1032]
    assert back[0].e1 == pytest.approx(8.0e-2)
    buf = io.StringIO()
    errors.write_csv(recs, buf)
    assert buf.getvalue() == text
