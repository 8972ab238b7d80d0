"""Fine pixel grid: classification against a domain, mask I/O, boundary edges."""

import logging
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .exceptions import EmptyDomain, NoIntersection, ParseError
from . import geometry

logger = logging.getLogger(__name__)

RULES = ("contained", "center", "intersecting")


@dataclass(frozen=True)
class PixelGrid:
    """Structured grid of ``nx * ny`` square pixels of side ``h``.

    ``inside[iy, ix]`` flags pixel ``[x0 + ix h, x0 + (ix+1) h] x [...]``.
    """

    origin: tuple
    h: float
    nx: int
    ny: int
    inside: np.ndarray

    @property
    def n_inside(self):
        return int(self.inside.sum())

    def node_xy(self, ix, iy):
        return (self.origin[0] + np.asarray(ix) * self.h,
                self.origin[1] + np.asarray(iy) * self.h)

    def pixel_centers(self):
        iy, ix = np.nonzero(self.inside)
        x, y = self.node_xy(ix + 0.5, iy + 0.5)
        return np.stack([x, y], axis=-1)


@dataclass(frozen=True)
class BoundaryEdge:
    """Fine edge on the boundary of the pixel domain, oriented counterclockwise."""

    start: tuple
    end: tuple
    normal: tuple
    owner_pixel: tuple  # (iy, ix)

    @property
    def midpoint(self):
        return (0.5 * (self.start[0] + self.end[0]), 0.5 * (self.start[1] + self.end[1]))


def _keep_largest(inside):
    lab, n = ndimage.label(inside)
    if n == 0:
        raise EmptyDomain("no pixel selected")
    if n > 1:
        sizes = np.bincount(lab.ravel())[1:]
        keep = int(np.argmax(sizes)) + 1
        logger.warning("pixel domain has %d components; keeping the largest (%d pixels)",
                       n, sizes[keep - 1])
        inside = lab == keep
    return inside


def _check_holes(inside):
    padded = np.pad(~inside, 1, constant_values=True)
    _, n = ndimage.label(padded, structure=np.ones((3, 3), dtype=bool))
    if n > 1:
        raise ParseError(f"pixel domain has {n - 1} hole(s); only simply connected domains are supported")


def grid_for_domain(domain, h, margin=1):
    """Grid aligned with the lower-left corner of the bounding box, padded by
    ``margin`` pixels on every side."""
    x0, y0, x1, y1 = domain.bounding_box
    ox = x0 - margin * h
    oy = y0 - margin * h
    nx = int(np.ceil((x1 - x0) / h - 1e-9)) + 2 * margin
    ny = int(np.ceil((y1 - y0) / h - 1e-9)) + 2 * margin
    return (ox, oy), nx, ny


def classify_pixels(domain, h, rule="contained", margin=1, finalize=True):
    """Select pixels of a grid covering ``domain.bounding_box``.

    contained: every corner has level_set <= tol; center: the center does;
    intersecting: some corner has level_set < -tol.
    """
    if h <= 0:
        raise ValueError("pixel size must be positive")
    if rule not in RULES:
        raise ValueError(f"unknown rule {rule!r}")
    origin, nx, ny = grid_for_domain(domain, h, margin)
    tol = 1e-12 * domain.diameter
    if rule == "center":
        xs = origin[0] + (np.arange(nx) + 0.5) * h
        ys = origin[1] + (np.arange(ny) + 0.5) * h
        X, Y = np.meshgrid(xs, ys)
        inside = domain.level_set(np.stack([X, Y], axis=-1)) <= tol
    else:
        xs = origin[0] + np.arange(nx + 1) * h
        ys = origin[1] + np.arange(ny + 1) * h
        X, Y = np.meshgrid(xs, ys)
        phi = domain.level_set(np.stack([X, Y], axis=-1))
        corners = np.stack([phi[:-1, :-1], phi[:-1, 1:], phi[1:, :-1], phi[1:, 1:]])
        if rule == "contained":
            inside = np.all(corners <= tol, axis=0)
        else:
            inside = np.any(corners < -tol, axis=0)
    if not inside.any():
        raise EmptyDomain(f"rule {rule!r} selects no pixel at h={h}")
    if finalize:
        inside = _keep_largest(inside)
        _check_holes(inside)
    return PixelGrid(origin, float(h), nx, ny, inside)


def grid_from_mask(inside, origin=(0.0, 0.0), h=None):
    inside = np.asarray(inside, dtype=bool)
    ny, nx = inside.shape
    if h is None:
        h = 1.0 / max(nx, ny)
    inside = _keep_largest(inside)
    _check_holes(inside)
    return PixelGrid(tuple(origin), float(h), nx, ny, inside)


def _read_pgm(path):
    with open(path, "rb") as fh:
        data = fh.read()
    magic = data[:2]
    if magic not in (b"P2", b"P5"):
        raise ParseError(f"{path}: not a P2/P5 PGM file")
    # header: magic, width, height, maxval, separated by whitespace/comments
    tokens = []
    pos = 2
    while len(tokens) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ParseError(f"{path}: truncated PGM header")
        tokens.append(int(data[start:pos]))
    width, height, maxval = tokens
    if magic == b"P5":
        pos += 1
        dtype = np.uint8 if maxval < 256 else np.dtype(">u2")
        raw = np.frombuffer(data[pos:], dtype=dtype, count=width * height)
        values = raw.astype(float)
    else:
        values = np.array(data[pos:].split()[: width * height], dtype=float)
    if values.size != width * height:
        raise ParseError(f"{path}: expected {width * height} pixel values, got {values.size}")
    img = values.reshape(height, width)
    return img >= 0.5 * maxval


def load_mask(path, origin=(0.0, 0.0), h=None):
    """Read a PGM (P2/P5, thresholded at 50% gray) or 0/1 CSV mask.

    The first image row is the top of the domain, so rows are flipped to get
    ``inside[iy, ix]`` with iy increasing upwards.
    """
    path = str(path)
    try:
        if path.lower().endswith(".pgm"):
            img = _read_pgm(path)
        else:
            img = np.loadtxt(path, delimiter=",", ndmin=2) > 0.5
    except ParseError:
        raise
    except (OSError, ValueError) as exc:
        raise ParseError(f"cannot read mask {path}: {exc}") from exc
    if not img.any():
        raise EmptyDomain(f"{path}: mask selects no pixel")
    return grid_from_mask(img[::-1], origin=origin, h=h)


def boundary_edge_arrays(inside):
    """All fine boundary edges as integer arrays.

    Returns (start, end, normal, owner) with start/end node indices (ix, iy),
    integer axis normals and owner pixel (iy, ix). Edges are oriented with the
    pixel domain on the left (counterclockwise around the outer loop).
    """
    pad = np.pad(inside, 1)
    starts, ends, normals, owners = [], [], [], []
    # vertical edges at node column ix between pixels ix-1 (left) and ix (right)
    left = pad[1:-1, :-1]
    right = pad[1:-1, 1:]
    iy, ix = np.nonzero(left & ~right)  # normal +x, edge goes up
    starts.append(np.stack([ix, iy], 1)); ends.append(np.stack([ix, iy + 1], 1))
    normals.append(np.tile([1, 0], (len(ix), 1))); owners.append(np.stack([iy, ix - 1], 1))
    iy, ix = np.nonzero(~left & right)  # normal -x, edge goes down
    starts.append(np.stack([ix, iy + 1], 1)); ends.append(np.stack([ix, iy], 1))
    normals.append(np.tile([-1, 0], (len(ix), 1))); owners.append(np.stack([iy, ix], 1))
    below = pad[:-1, 1:-1]
    above = pad[1:, 1:-1]
    iy, ix = np.nonzero(below & ~above)  # normal +y, edge goes right to left
    starts.append(np.stack([ix + 1, iy], 1)); ends.append(np.stack([ix, iy], 1))
    normals.append(np.tile([0, 1], (len(ix), 1))); owners.append(np.stack([iy - 1, ix], 1))
    iy, ix = np.nonzero(~below & above)  # normal -y, edge goes left to right
    starts.append(np.stack([ix, iy], 1)); ends.append(np.stack([ix + 1, iy], 1))
    normals.append(np.tile([0, -1], (len(ix), 1))); owners.append(np.stack([iy, ix], 1))
    cat = lambda a: np.concatenate(a).astype(int).reshape(-1, 2)  # noqa: E731
    return cat(starts), cat(ends), cat(normals), cat(owners)


def trace_loops(start, end):
    """Chain directed edges (integer node pairs) into closed loops.

    At nodes with several outgoing edges the leftmost turn is taken, which
    keeps pinched corners on separate passes. Returns a list of edge-index
    lists.
    """
    start = np.asarray(start)
    end = np.asarray(end)
    n = len(start)
    out = {}
    for i in range(n):
        out.setdefault((int(start[i, 0]), int(start[i, 1])), []).append(i)
    used = np.zeros(n, dtype=bool)
    loops = []
    order = np.lexsort((start[:, 0], start[:, 1]))
    for first in order:
        if used[first]:
            continue
        loop = [first]
        used[first] = True
        cur = first
        while True:
            node = (int(end[cur, 0]), int(end[cur, 1]))
            cands = [j for j in out.get(node, []) if not used[j]]
            if not cands:
                break
            if len(cands) > 1:
                d_in = end[cur] - start[cur]

                def turn(j):
                    d = end[j] - start[j]
                    cross = d_in[0] * d[1] - d_in[1] * d[0]
                    dot = d_in[0] * d[0] + d_in[1] * d[1]
                    return -np.arctan2(cross, dot)

                cands.sort(key=turn)
            cur = cands[0]
            used[cur] = True
            loop.append(cur)
        loops.append(loop)
    return loops


def extract_boundary(grid):
    """Boundary edges of the pixel domain and their counterclockwise loops."""
    start, end, normal, owner = boundary_edge_arrays(grid.inside)
    edges = []
    for s, e, n, o in zip(start, end, normal, owner):
        edges.append(BoundaryEdge(
            tuple(map(float, grid.node_xy(*s))), tuple(map(float, grid.node_xy(*e))),
            (float(n[0]), float(n[1])), (int(o[0]), int(o[1]))))
    loops = trace_loops(start, end)
    return edges, loops


def boundary_loop_length(edges, loop):
    return sum(np.hypot(edges[i].end[0] - edges[i].start[0], edges[i].end[1] - edges[i].start[1])
               for i in loop)


def sanity_check(grid, domain=None):
    """Report components, holes, and the maximal boundary gap delta."""
    _, ncomp = ndimage.label(grid.inside)
    padded = np.pad(~grid.inside, 1, constant_values=True)
    _, nout = ndimage.label(padded, structure=np.ones((3, 3), dtype=bool))
    report = {"components": int(ncomp), "holes": int(nout - 1),
              "pixels": grid.n_inside, "h": grid.h}
    if domain is not None:
        start, end, normal, _ = boundary_edge_arrays(grid.inside)
        mid = 0.5 * (np.array(grid.node_xy(*start.T)).T + np.array(grid.node_xy(*end.T)).T)
        try:
            sigma = geometry.sigma_direction(domain, mid)
            delta = geometry.delta_along(domain, mid, sigma, step=grid.h / 4)
            report["max_delta"] = float(delta.max())
            report["max_delta_over_h"] = float(delta.max() / grid.h)
            report["distance_order_h"] = bool(delta.max() <= 3.0 * grid.h)
        except NoIntersection as exc:
            report["max_delta"] = None
            report["error"] = str(exc)
    return report
