import numpy as np
import pytest

from pixvem import agglomeration, geometry, pixelmesh, vemspace


def square_mesh(h=1 / 8, m=2, lower=(0.25, 0.25), upper=(0.75, 0.75)):
    dom = geometry.square_domain(lower, upper)
    grid = pixelmesh.classify_pixels(dom, h)
    return dom, agglomeration.agglomerate_uniform(grid, m)


def disk_mesh(H=0.125, m=4, rule="contained"):
    dom = geometry.disk_domain()
    grid = pixelmesh.classify_pixels(dom, H / m, rule=rule)
    return dom, agglomeration.agglomerate_uniform(grid, m)


def vem_setup(mesh, k, beta=1.0):
    dofmap = vemspace.build_dof_map(mesh, k)
    return dofmap, vemspace.build_all(mesh, dofmap, beta)


def random_poly_coeffs(rng, k):
    return {(a, b): rng.uniform(-1, 1) for a in range(k + 1) for b in range(k + 1 - a)}


@pytest.fixture(scope="session")
def disk_h8m4():
    return disk_mesh(0.125, 4)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240611)


# one line per acceptance criterion, printed at the end of the run
CRITERIA = {}


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        terminalreporter.write_line(CRITERIA[n])
