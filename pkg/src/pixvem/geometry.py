"""Implicit domains, manufactured solutions and boundary transfer geometry.

All callables are vectorised: points are arrays of shape (..., 2) and scalar
fields return arrays of shape (...).
"""

import csv
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .exceptions import NoIntersection, ParseError, ZeroGradient

ScalarField = Callable[[np.ndarray], np.ndarray]
VectorField = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ImplicitDomain:
    """Domain {level_set < 0} inside an axis-aligned bounding box."""

    level_set: ScalarField
    level_set_gradient: VectorField
    bounding_box: tuple  # (xmin, ymin, xmax, ymax)
    name: str

    @property
    def diameter(self):
        x0, y0, x1, y1 = self.bounding_box
        return float(np.hypot(x1 - x0, y1 - y0))


@dataclass(frozen=True)
class ManufacturedCase:
    domain: ImplicitDomain
    u_exact: ScalarField
    grad_u_exact: VectorField
    f: ScalarField
    g: ScalarField
    name: str = ""


def _pts(p):
    p = np.asarray(p, dtype=float)
    return p[..., 0], p[..., 1]


# --------------------------------------------------------------------------
# domains

def disk_domain(center=(0.5, 0.5), radius=0.5):
    cx, cy = center

    def phi(p):
        x, y = _pts(p)
        return np.hypot(x - cx, y - cy) - radius

    def grad(p):
        x, y = _pts(p)
        r = np.hypot(x - cx, y - cy)
        r = np.where(r == 0.0, np.inf, r)
        return np.stack([(x - cx) / r, (y - cy) / r], axis=-1)

    box = (cx - radius, cy - radius, cx + radius, cy + radius)
    return ImplicitDomain(phi, grad, box, "disk")


def square_domain(lower=(0.25, 0.25), upper=(0.75, 0.75)):
    """Axis-aligned rectangle; pixel-exact when its sides lie on grid lines."""
    cx, cy = 0.5 * (lower[0] + upper[0]), 0.5 * (lower[1] + upper[1])
    hx, hy = 0.5 * (upper[0] - lower[0]), 0.5 * (upper[1] - lower[1])

    def phi(p):
        x, y = _pts(p)
        return np.maximum(np.abs(x - cx) - hx, np.abs(y - cy) - hy)

    def grad(p):
        x, y = _pts(p)
        dx = np.abs(x - cx) - hx
        dy = np.abs(y - cy) - hy
        use_x = dx >= dy
        gx = np.where(use_x, np.sign(x - cx), 0.0)
        gy = np.where(use_x, 0.0, np.sign(y - cy))
        return np.stack([gx, gy], axis=-1)

    # one pixel of margin is added by the grid builder, not here
    box = (lower[0], lower[1], upper[0], upper[1])
    return ImplicitDomain(phi, grad, box, "square")


def _disk_piece(x, y, cx, cy, r):
    d = np.hypot(x - cx, y - cy)
    safe = np.where(d == 0.0, np.inf, d)
    return d - r, (x - cx) / safe, (y - cy) / safe


def bean_domain():
    """Quarter unit disk in x >= 0, y <= 0 plus the disks of radius 1/2 built
    on its two straight sides.

    The union has a single reentrant corner at the origin (interior angle
    3*pi/2, missing the second quadrant) and is curved everywhere else.
    """

    def pieces(p):
        x, y = _pts(p)
        r = np.hypot(x, y)
        safe = np.where(r == 0.0, np.inf, r)
        # quarter disk: max(r - 1, -x, y)
        q_vals = np.stack([r - 1.0, -x, y])
        q_gx = np.stack([x / safe, -np.ones_like(x), np.zeros_like(x)])
        q_gy = np.stack([y / safe, np.zeros_like(x), np.ones_like(x)])
        qi = np.argmax(q_vals, axis=0)
        qv = np.take_along_axis(q_vals, qi[None], 0)[0]
        qgx = np.take_along_axis(q_gx, qi[None], 0)[0]
        qgy = np.take_along_axis(q_gy, qi[None], 0)[0]
        d1, g1x, g1y = _disk_piece(x, y, 0.5, 0.0, 0.5)
        d2, g2x, g2y = _disk_piece(x, y, 0.0, -0.5, 0.5)
        vals = np.stack([qv, d1, d2])
        gxs = np.stack([qgx, g1x, g2x])
        gys = np.stack([qgy, g1y, g2y])
        i = np.argmin(vals, axis=0)
        take = lambda a: np.take_along_axis(a, i[None], 0)[0]  # noqa: E731
        return take(vals), take(gxs), take(gys)

    def phi(p):
        return pieces(p)[0]

    def grad(p):
        _, gx, gy = pieces(p)
        return np.stack([gx, gy], axis=-1)

    return ImplicitDomain(phi, grad, (-0.5, -1.0, 1.0, 0.5), "bean")


def polyline_domain(points, name="polyline"):
    """Domain bounded by a closed polyline; level set = signed distance.

    Sign from the winding number, magnitude from the nearest segment.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 3:
        raise ParseError("polyline needs at least 3 points (x, y)")
    if np.allclose(pts[0], pts[-1]):
        pts = pts[:-1]
    a = pts
    b = np.roll(pts, -1, axis=0)
    ab = b - a
    ab2 = np.einsum("ij,ij->i", ab, ab)

    def nearest(p):
        p = np.asarray(p, dtype=float)
        flat = p.reshape(-1, 2)
        ap = flat[:, None, :] - a[None]
        t = np.clip(np.einsum("nij,ij->ni", ap, ab) / ab2, 0.0, 1.0)
        proj = a[None] + t[..., None] * ab[None]
        d = np.linalg.norm(flat[:, None, :] - proj, axis=-1)
        j = np.argmin(d, axis=1)
        rows = np.arange(len(flat))
        return flat, proj[rows, j], d[rows, j]

    def winding(flat):
        x, y = flat[:, 0:1], flat[:, 1:2]
        ax, ay, bx, by = a[:, 0], a[:, 1], b[:, 0], b[:, 1]
        up = (ay <= y) & (by > y)
        down = (ay > y) & (by <= y)
        cross = (bx - ax) * (y - ay) - (x - ax) * (by - ay)
        return np.sum(up & (cross > 0), axis=1) - np.sum(down & (cross < 0), axis=1)

    def phi(p):
        flat, _, d = nearest(p)
        inside = winding(flat) != 0
        return np.where(inside, -d, d).reshape(np.shape(p)[:-1])

    def grad(p):
        flat, proj, d = nearest(p)
        inside = winding(flat) != 0
        diff = flat - proj
        safe = np.where(d == 0.0, np.inf, d)[:, None]
        g = diff / safe
        g = np.where(inside[:, None], -g, g)
        return g.reshape(np.shape(p))

    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    return ImplicitDomain(phi, grad, (lo[0], lo[1], hi[0], hi[1]), name)


def load_polyline_csv(path):
    rows = []
    try:
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].strip().startswith("#"):
                    continue
                try:
                    rows.append((float(row[0]), float(row[1])))
                except (ValueError, IndexError):
                    if rows:
                        raise
    except (OSError, ValueError, IndexError) as exc:
        raise ParseError(f"cannot read polyline {path}: {exc}") from exc
    return polyline_domain(rows, name=str(path))


# --------------------------------------------------------------------------
# manufactured solutions

def franke(p):
    x, y = _pts(p)
    return _franke_all(x, y)[0]


def _franke_all(x, y):
    """Franke function with gradient and Laplacian."""
    X, Y = 9.0 * x, 9.0 * y
    t1 = 0.75 * np.exp(-((X - 2) ** 2 + (Y - 2) ** 2) / 4.0)
    t2 = 0.75 * np.exp(-((X + 1) ** 2) / 49.0 - (Y + 1) / 10.0)
    t3 = 0.5 * np.exp(-((X - 7) ** 2 + (Y - 3) ** 2) / 4.0)
    t4 = 0.2 * np.exp(-((X - 4) ** 2) - (Y - 7) ** 2)
    val = t1 + t2 + t3 + t4

    # exp(-c((X-a)^2 + (Y-b)^2)): d/dx = -18 c (X-a), d2/dx2 = (18c(X-a))^2 - 162c
    def gauss(t, c, a, b):
        ax = -18.0 * c * (X - a)
        ay = -18.0 * c * (Y - b)
        return t * ax, t * ay, t * (ax ** 2 + ay ** 2 - 2 * 162.0 * c)

    g1 = gauss(t1, 0.25, 2, 2)
    g3 = gauss(t3, 0.25, 7, 3)
    g4 = gauss(t4, 1.0, 4, 7)
    a2 = -18.0 * (X + 1) / 49.0
    g2 = (t2 * a2, -0.9 * t2, t2 * (a2 ** 2 - 162.0 / 49.0 + 0.81))
    gx = g1[0] + g2[0] + g3[0] + g4[0]
    gy = g1[1] + g2[1] + g3[1] + g4[1]
    lap = g1[2] + g2[2] + g3[2] + g4[2]
    return val, gx, gy, lap


def franke_gradient(p):
    x, y = _pts(p)
    _, gx, gy, _ = _franke_all(x, y)
    return np.stack([gx, gy], axis=-1)


def franke_laplacian(p):
    x, y = _pts(p)
    return _franke_all(x, y)[3]


def u1(p):
    """Franke function times the bubble 1/4 - |x - (0.5, 0.5)|^2 (zero on the unit-diameter disk)."""
    x, y = _pts(p)
    return (0.25 - (x - 0.5) ** 2 - (y - 0.5) ** 2) * _franke_all(x, y)[0]


def u1_gradient(p):
    x, y = _pts(p)
    F, Fx, Fy, _ = _franke_all(x, y)
    w = 0.25 - (x - 0.5) ** 2 - (y - 0.5) ** 2
    return np.stack([-2.0 * (x - 0.5) * F + w * Fx, -2.0 * (y - 0.5) * F + w * Fy], axis=-1)


def u1_laplacian(p):
    x, y = _pts(p)
    F, Fx, Fy, lapF = _franke_all(x, y)
    w = 0.25 - (x - 0.5) ** 2 - (y - 0.5) ** 2
    return -4.0 * F - 4.0 * ((x - 0.5) * Fx + (y - 0.5) * Fy) + w * lapF


def u1_cone(p):
    """Franke function times 1/2 - |x - (0.5, 0.5)|; Lipschitz cone at the centre."""
    x, y = _pts(p)
    return (0.5 - np.hypot(x - 0.5, y - 0.5)) * _franke_all(x, y)[0]


def u1_cone_gradient(p):
    x, y = _pts(p)
    F, Fx, Fy, _ = _franke_all(x, y)
    dx, dy = x - 0.5, y - 0.5
    r = np.hypot(dx, dy)
    safe = np.where(r == 0.0, np.inf, r)
    w = 0.5 - r
    return np.stack([-F * dx / safe + w * Fx, -F * dy / safe + w * Fy], axis=-1)


def u1_cone_laplacian(p):
    x, y = _pts(p)
    F, Fx, Fy, lapF = _franke_all(x, y)
    dx, dy = x - 0.5, y - 0.5
    r = np.hypot(dx, dy)
    safe = np.where(r == 0.0, np.inf, r)
    return -F / safe - 2.0 * (dx * Fx + dy * Fy) / safe + (0.5 - r) * lapF


def _bean_angle(x, y):
    # four-quadrant arctangent of (-x, -y) with atan(0, y) = 0
    a = np.arctan2(-x, -y)
    a = np.where(x == 0.0, 0.0, a)
    return np.pi + a


def bean_exact(p):
    x, y = _pts(p)
    r2 = x * x + y * y
    return r2 ** (1.0 / 3.0) * np.sin(2.0 * _bean_angle(x, y) / 3.0)


def bean_gradient(p):
    x, y = _pts(p)
    r = np.hypot(x, y)
    psi = _bean_angle(x, y)
    safe = np.where(r == 0.0, np.inf, r)
    # psi = pi/2 - theta (mod 2 pi), so d(psi)/d(theta) = -1
    ur = (2.0 / 3.0) * safe ** (-1.0 / 3.0) * np.sin(2.0 * psi / 3.0)
    ut = -(2.0 / 3.0) * safe ** (-1.0 / 3.0) * np.cos(2.0 * psi / 3.0)
    cx, cy = x / safe, y / safe
    return np.stack([ur * cx - ut * cy, ur * cy + ut * cx], axis=-1)


def polynomial_case(domain, coeffs, name="polynomial"):
    """Case with u(x, y) = sum c_ab x^a y^b for ``coeffs`` = {(a, b): c}."""
    items = [(int(a), int(b), float(c)) for (a, b), c in dict(coeffs).items()]

    def u(p):
        x, y = _pts(p)
        return sum(c * x ** a * y ** b for a, b, c in items) + 0.0 * x

    def grad(p):
        x, y = _pts(p)
        gx = sum(c * a * x ** max(a - 1, 0) * y ** b for a, b, c in items if a) + 0.0 * x
        gy = sum(c * b * x ** a * y ** max(b - 1, 0) for a, b, c in items if b) + 0.0 * x
        return np.stack([gx, gy], axis=-1)

    def f(p):
        x, y = _pts(p)
        lap = 0.0 * x
        for a, b, c in items:
            if a >= 2:
                lap = lap + c * a * (a - 1) * x ** (a - 2) * y ** b
            if b >= 2:
                lap = lap + c * b * (b - 1) * x ** a * y ** (b - 2)
        return -lap

    return ManufacturedCase(domain, u, grad, f, u, name)


def builtin_case(name):
    """Manufactured cases by name: test1a, test1a-cone, test1b, bean."""
    zero = lambda p: np.zeros(np.shape(p)[:-1])  # noqa: E731
    if name == "test1a":
        return ManufacturedCase(disk_domain(), u1, u1_gradient,
                                lambda p: -u1_laplacian(p), zero, "test1a")
    if name == "test1a-cone":
        return ManufacturedCase(disk_domain(), u1_cone, u1_cone_gradient,
                                lambda p: -u1_cone_laplacian(p), zero, "test1a-cone")
    if name == "test1b":
        return ManufacturedCase(disk_domain(), franke, franke_gradient,
                                lambda p: -franke_laplacian(p), franke, "test1b")
    if name == "bean":
        return ManufacturedCase(bean_domain(), bean_exact, bean_gradient,
                                lambda p: np.zeros(np.shape(p)[:-1]), bean_exact, "bean")
    from .exceptions import ConfigError
    raise ConfigError(f"unknown case {name!r}")


def builtin_domain(name):
    if name == "disk":
        return disk_domain()
    if name == "bean":
        return bean_domain()
    if name == "square":
        return square_domain()
    from .exceptions import ConfigError
    raise ConfigError(f"unknown domain {name!r}")


# --------------------------------------------------------------------------
# boundary transfer

def signed_distance_proxy(domain, p):
    return domain.level_set(np.asarray(p, dtype=float))


def sigma_direction(domain, edge_midpoint, tol=1e-12):
    """Unit outward transfer direction(s): the normalised level-set gradient."""
    g = np.asarray(domain.level_set_gradient(np.asarray(edge_midpoint, dtype=float)), dtype=float)
    n = np.linalg.norm(g, axis=-1, keepdims=True)
    if np.any(~np.isfinite(n)) or np.any(n < tol):
        raise ZeroGradient("level-set gradient vanishes at a boundary edge midpoint")
    return g / n


def delta_along(domain, x, sigma, step=None, tol=None):
    """Smallest t >= 0 with level_set(x + t sigma) = 0.

    Brackets by marching with ``step`` (default diam/512), then bisects to
    ``tol`` (default 1e-12 diam). Works on arrays of points.
    """
    x = np.asarray(x, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    scalar = x.ndim == 1
    X = np.atleast_2d(x)
    S = np.broadcast_to(np.atleast_2d(sigma), X.shape)
    diam = domain.diameter
    step = diam / 512.0 if step is None else float(step)
    tol = 1e-12 * diam if tol is None else float(tol)
    phi = domain.level_set

    f0 = phi(X)
    out = np.zeros(len(X))
    on_boundary = np.abs(f0) <= tol
    if np.any((f0 > tol)):
        raise NoIntersection("point lies outside the domain; the transfer ray never reaches the boundary")
    todo = np.flatnonzero(~on_boundary)
    lo = np.zeros(len(X))
    hi = np.full(len(X), np.nan)
    t = 0.0
    tmax = 2.0 * diam
    active = todo
    while active.size and t < tmax:
        t_next = min(t + step, tmax)
        fv = phi(X[active] + t_next * S[active])
        hit = fv >= 0.0
        hi[active[hit]] = t_next
        lo[active[~hit]] = t_next
        active = active[~hit]
        t = t_next
    if active.size:
        raise NoIntersection(f"no boundary crossing within 2*diam for {active.size} point(s)")
    a = lo[todo]
    b = hi[todo]
    Xt, St = X[todo], S[todo]
    for _ in range(200):
        if np.max(b - a, initial=0.0) <= tol:
            break
        mid = 0.5 * (a + b)
        inside = phi(Xt + mid[:, None] * St) < 0.0
        a = np.where(inside, mid, a)
        b = np.where(inside, b, mid)
    out[todo] = 0.5 * (a + b)
    return float(out[0]) if scalar else out


def gstar(case, x, sigma, step=None):
    """Boundary datum transferred to x: g(x + delta(x) sigma)."""
    x = np.asarray(x, dtype=float)
    d = delta_along(case.domain, x, sigma, step=step)
    return case.g(x + np.asarray(d)[..., None] * np.asarray(sigma))
