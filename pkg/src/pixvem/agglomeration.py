"""Polygonal meshes obtained by agglomerating pixels.

Elements are unions of pixels. Element edges are straight segments: fine
pixel edges on the boundary of the pixel domain, and maximal collinear runs
of fine edges inside each interface between two elements. Macro edges are
the maximal connected components of an interface (or of an element's share
of the domain boundary).
"""

import json
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .exceptions import DegenerateMesh
from .pixelmesh import trace_loops

logger = logging.getLogger(__name__)

OUTSIDE = -1


@dataclass
class PolyElement:
    index: int
    pixels: np.ndarray  # (n, 2) rows of (iy, ix)
    edges: np.ndarray  # edge ids
    sides: np.ndarray  # +1 where the element lies left of p -> q
    H_K: float
    x_K: tuple
    area: float
    block_size: float  # nominal block side, physical units
    is_boundary: bool
    boundary_loop: list = field(default_factory=list)  # node ids, counterclockwise


@dataclass
class MacroEdge:
    elements: tuple  # (K, K') with K' = -1 on the domain boundary
    edges: list  # edge ids in chain order
    nodes: list  # vertex ids along the chain, endpoints included
    n_fine: int  # number of fine pixel edges
    owner: int  # element whose outward normal orients the macro edge

    @property
    def is_boundary(self):
        return self.elements[1] == OUTSIDE

    @property
    def interior_nodes(self):
        return self.nodes[1:-1]


@dataclass
class PolyMesh:
    grid: object
    labels: np.ndarray  # (ny, nx) element id per pixel, -1 outside
    node_ij: np.ndarray  # (NV, 2) grid node indices (ix, iy)
    edge_p: np.ndarray
    edge_q: np.ndarray
    edge_left: np.ndarray
    edge_right: np.ndarray
    edge_macro: np.ndarray
    elements: list
    macro_edges: list
    H_nominal: float

    @property
    def h(self):
        return self.grid.h

    @property
    def nodes(self):
        return np.stack(self.grid.node_xy(self.node_ij[:, 0], self.node_ij[:, 1]), axis=-1)

    @property
    def H(self):
        return max(el.H_K for el in self.elements)

    @property
    def tau_hat(self):
        return self.h / self.H_nominal

    @property
    def n_vertices(self):
        return len(self.node_ij)

    @property
    def n_edges(self):
        return len(self.edge_p)

    @property
    def n_elements(self):
        return len(self.elements)

    def edge_is_boundary(self):
        return (self.edge_left == OUTSIDE) | (self.edge_right == OUTSIDE)

    def edge_vectors(self):
        xy = self.nodes
        return xy[self.edge_q] - xy[self.edge_p]

    def outward_normals(self, element):
        """Unit outward normals of ``element`` on each of its edges."""
        t = self.edge_vectors()[element.edges]
        t = t / np.linalg.norm(t, axis=1, keepdims=True)
        n = np.stack([t[:, 1], -t[:, 0]], axis=1)
        return n * element.sides[:, None]


# --------------------------------------------------------------------------
# pixel blocks

def _block_keys(grid, m, corner_node=None, levels=1):
    """Block key and block side (in pixels) for every pixel.

    Blocks are m x m squares anchored at ``corner_node``; blocks having the
    corner as a vertex are split into four, ``levels - 1`` times.
    """
    if m < 1:
        raise ValueError("agglomeration ratio must be >= 1")
    if levels > 1 and m % (2 ** (levels - 1)):
        raise ValueError(f"block side {m} not divisible by 2^(levels-1) = {2 ** (levels - 1)}")
    cx, cy = (0, 0) if corner_node is None else corner_node
    iy, ix = np.indices(grid.inside.shape)
    dx = ix - cx
    dy = iy - cy
    size = np.full(dx.shape, m, dtype=int)
    level = np.zeros(dx.shape, dtype=int)
    bx = np.floor_divide(dx, m)
    by = np.floor_divide(dy, m)
    for lev in range(1, levels):
        touching = np.isin(bx, (-1, 0)) & np.isin(by, (-1, 0)) & (level == lev - 1)
        s = m // 2 ** lev
        bx = np.where(touching, np.floor_divide(dx, s), bx)
        by = np.where(touching, np.floor_divide(dy, s), by)
        size = np.where(touching, s, size)
        level = np.where(touching, lev, level)
    # pack (level, bx, by) into one integer key
    off = 2 * (max(grid.nx, grid.ny) + 1)
    key = (level * (2 * off) + (bx + off)) * (2 * off) + (by + off)
    return key, size


def _pixel_adjacency(mask, key):
    """Sparse 4-neighbour graph of pixels in ``mask`` sharing the same ``key``."""
    ny, nx = mask.shape
    idx = np.arange(ny * nx).reshape(ny, nx)
    rows, cols = [], []
    h_ok = mask[:, :-1] & mask[:, 1:] & (key[:, :-1] == key[:, 1:])
    rows.append(idx[:, :-1][h_ok]); cols.append(idx[:, 1:][h_ok])
    v_ok = mask[:-1, :] & mask[1:, :] & (key[:-1, :] == key[1:, :])
    rows.append(idx[:-1, :][v_ok]); cols.append(idx[1:, :][v_ok])
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    return coo_matrix((np.ones(len(r)), (r, c)), shape=(ny * nx, ny * nx))


def _relabel_in_order(labels):
    """Relabel non-negative labels by first occurrence in row-major order."""
    flat = labels.ravel()
    valid = flat >= 0
    uniq, first = np.unique(flat[valid], return_index=True)
    order = np.argsort(first)
    remap = np.full(uniq.max() + 1 if uniq.size else 1, -1)
    remap[uniq[order]] = np.arange(len(uniq))
    out = np.full_like(flat, -1)
    out[valid] = remap[flat[valid]]
    return out.reshape(labels.shape)


def _has_square(mask, s):
    """Whether a boolean mask contains an s x s all-true square."""
    if s <= 1:
        return bool(mask.any())
    if mask.shape[0] < s or mask.shape[1] < s:
        return False
    sat = np.pad(mask.astype(np.int64).cumsum(0).cumsum(1), ((1, 0), (1, 0)))
    win = sat[s:, s:] - sat[:-s, s:] - sat[s:, :-s] + sat[:-s, :-s]
    return bool((win == s * s).any())


def largest_square(mask):
    lo, hi = 0, min(mask.shape)
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if _has_square(mask, mid):
            lo = mid
        else:
            hi = mid - 1
    return lo


def _interfaces(labels):
    """Shared fine-edge counts between distinct elements: dict (a, b) -> n, a < b."""
    pairs = []
    a, b = labels[:, :-1], labels[:, 1:]
    ok = (a >= 0) & (b >= 0) & (a != b)
    pairs.append(np.stack([a[ok], b[ok]], 1))
    a, b = labels[:-1, :], labels[1:, :]
    ok = (a >= 0) & (b >= 0) & (a != b)
    pairs.append(np.stack([a[ok], b[ok]], 1))
    p = np.concatenate(pairs)
    p = np.sort(p, axis=1)
    if len(p) == 0:
        return {}
    uniq, cnt = np.unique(p, axis=0, return_counts=True)
    return {(int(x), int(y)): int(c) for (x, y), c in zip(uniq, cnt)}


def _bboxes(labels, n):
    objs = ndimage.find_objects(labels + 1, max_label=n)
    return objs


def _failing(labels, block_px, n):
    """Elements failing the quality audit (too few pixels, no inner square)."""
    counts = np.bincount(labels[labels >= 0], minlength=n)
    fails = []
    for lab, sl in enumerate(_bboxes(labels, n)):
        if sl is None:
            continue
        m = block_px[lab]
        if counts[lab] >= m * m:
            continue
        mask = labels[sl] == lab
        if counts[lab] < m * m / 4.0 or not _has_square(mask, int(np.ceil(m / 4.0))):
            fails.append(lab)
    return fails, counts


def _merge_slivers(labels, block_px):
    """Merge failing components into the neighbour with the longest interface."""
    for _ in range(1000):
        n = int(labels.max()) + 1
        fails, counts = _failing(labels, block_px, n)
        if not fails or n == 1:
            return labels, block_px
        inter = _interfaces(labels)
        nbrs = {}
        for (a, b), c in inter.items():
            nbrs.setdefault(a, []).append((c, b))
            nbrs.setdefault(b, []).append((c, a))
        parent = np.arange(n)

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for lab in sorted(fails, key=lambda e: (counts[e], e)):
            cands = nbrs.get(lab, [])
            if not cands:
                continue
            best = max(cands, key=lambda cb: (cb[0], -cb[1]))[1]
            ra, rb = find(lab), find(best)
            if ra != rb:
                # the surviving root keeps its block size
                keep, drop = (rb, ra)
                parent[drop] = keep
        roots = np.array([find(i) for i in range(n)])
        new = roots[np.where(labels >= 0, labels, 0)]
        labels = np.where(labels >= 0, new, -1)
        uniq = np.unique(labels[labels >= 0])
        block_px = np.asarray(block_px)[uniq]
        remap = np.full(n, -1)
        remap[uniq] = np.arange(len(uniq))
        labels = np.where(labels >= 0, remap[np.maximum(labels, 0)], -1)
    raise DegenerateMesh("sliver merging did not converge")


def _check_simply_connected(labels, n):
    eight = np.ones((3, 3), dtype=bool)
    for lab, sl in enumerate(_bboxes(labels, n)):
        mask = labels[sl] == lab
        _, ncomp = ndimage.label(mask)
        _, nout = ndimage.label(np.pad(~mask, 1, constant_values=True), structure=eight)
        if ncomp != 1 or nout != 1:
            raise DegenerateMesh(f"element {lab} is not simply connected "
                                 f"({ncomp} component(s), {nout - 1} hole(s))")


def agglomerate_labels(grid, m, corner_node=None, levels=1, merge=True):
    """Element label per pixel plus the nominal block side (pixels) per element."""
    key, size = _block_keys(grid, m, corner_node, levels)
    mask = grid.inside
    adj = _pixel_adjacency(mask, key)
    _, comp = connected_components(adj, directed=False)
    labels = np.where(mask, comp.reshape(mask.shape), -1)
    labels = _relabel_in_order(labels)
    n = int(labels.max()) + 1
    block_px = np.zeros(n, dtype=int)
    block_px[labels[mask]] = size[mask]
    if merge:
        labels, block_px = _merge_slivers(labels, block_px)
        n = int(labels.max()) + 1
    _check_simply_connected(labels, n)
    return labels, block_px


# --------------------------------------------------------------------------
# skeleton: fine edges, macro edges, merged edges

def _fine_edges(labels):
    """Directed fine edges between distinct regions.

    Returns start (n, 2), end (n, 2) node indices (ix, iy), left and right
    region ids relative to start -> end.
    """
    lp = np.pad(labels, 1, constant_values=OUTSIDE)
    ny, nx = labels.shape
    # vertical edges at node column j, rows iy: upward, left region = pixel j-1
    L = lp[1:-1, :-1]
    R = lp[1:-1, 1:]
    iy, j = np.nonzero(L != R)
    s1 = np.stack([j, iy], 1)
    e1 = np.stack([j, iy + 1], 1)
    l1, r1 = L[iy, j], R[iy, j]
    # horizontal edges at node row j, columns ix: rightward, left region = above
    B = lp[:-1, 1:-1]
    A = lp[1:, 1:-1]
    j, ix = np.nonzero(A != B)
    s2 = np.stack([ix, j], 1)
    e2 = np.stack([ix + 1, j], 1)
    l2, r2 = A[j, ix], B[j, ix]
    start = np.concatenate([s1, s2])
    end = np.concatenate([e1, e2])
    left = np.concatenate([l1, l2])
    right = np.concatenate([r1, r2])
    return start, end, left, right


def _trace_chains(start, end, nxn):
    """Split the fine-edge skeleton into chains between macro vertices.

    Returns a list of chains, each a list of (fine edge id, forward flag).
    Closed chains without a macro vertex are split at their
    lexicographically smallest and largest nodes.
    """
    ks = start[:, 1] * nxn + start[:, 0]
    ke = end[:, 1] * nxn + end[:, 0]
    inc = {}
    for i, (a, b) in enumerate(zip(ks.tolist(), ke.tolist())):
        inc.setdefault(a, []).append(i)
        inc.setdefault(b, []).append(i)
    macro = {node for node, lst in inc.items() if len(lst) != 2}
    used = np.zeros(len(ks), dtype=bool)
    chains = []

    def walk(node, eid):
        chain = []
        while True:
            used[eid] = True
            fwd = ks[eid] == node
            chain.append((eid, bool(fwd)))
            node = int(ke[eid] if fwd else ks[eid])
            if node in macro:
                return chain
            nxt = [e for e in inc[node] if not used[e]]
            if not nxt:
                return chain
            eid = nxt[0]

    for node in sorted(macro):
        for eid in sorted(inc[node]):
            if not used[eid]:
                chains.append(walk(node, eid))
    # closed loops without macro vertices
    while not used.all():
        rest = np.flatnonzero(~used)
        nodes = np.concatenate([ks[rest], ke[rest]])
        # lexicographic (iy, ix) order equals key order
        first = int(nodes.min())
        last = int(nodes.max())
        macro.update({first, last})
        eid = min(e for e in inc[first] if not used[e])
        chains.append(walk(first, eid))
        nxt = [e for e in inc[last] if not used[e]]
        if nxt:
            chains.append(walk(last, nxt[0]))
    return chains


def build_mesh(grid, labels, block_px, H_nominal):
    """Assemble the polygonal mesh (vertices, edges, macro edges) from labels."""
    n_el = int(labels.max()) + 1
    fstart, fend, fleft, fright = _fine_edges(labels)
    nxn = grid.nx + 1
    chains = _trace_chains(fstart, fend, nxn)

    vert_key = {}
    node_ij = []

    def vid(ij):
        kk = (int(ij[0]), int(ij[1]))
        if kk not in vert_key:
            vert_key[kk] = len(node_ij)
            node_ij.append(kk)
        return vert_key[kk]

    ep, eq, el, er, emacro = [], [], [], [], []
    macro_edges = []
    for chain in chains:
        e0, fwd0 = chain[0]
        a, b = (fleft[e0], fright[e0]) if fwd0 else (fright[e0], fleft[e0])
        boundary = a == OUTSIDE or b == OUTSIDE
        pts = [fstart[e0] if fwd0 else fend[e0]]
        for eid, fwd in chain:
            pts.append(fend[eid] if fwd else fstart[eid])
        pts = np.array(pts)
        if boundary:
            breaks = list(range(len(pts)))
        else:
            d = np.diff(pts, axis=0)
            turn = np.any(d[1:] != d[:-1], axis=1)
            breaks = [0] + [i + 1 for i in np.flatnonzero(turn)] + [len(pts) - 1]
        real = [x for x in (a, b) if x != OUTSIDE]
        owner = int(min(real))
        other = int(max(real)) if len(real) == 2 else OUTSIDE
        mid = len(macro_edges)
        ids, nodes = [], [vid(pts[breaks[0]])]
        for i0, i1 in zip(breaks[:-1], breaks[1:]):
            ids.append(len(ep))
            ep.append(vid(pts[i0]))
            eq.append(vid(pts[i1]))
            el.append(int(a))
            er.append(int(b))
            emacro.append(mid)
            nodes.append(eq[-1])
        macro_edges.append(MacroEdge((owner, other), ids, nodes, len(chain), owner))

    node_ij = np.array(node_ij, dtype=int)
    ep, eq = np.array(ep), np.array(eq)
    el, er = np.array(el), np.array(er)
    h = grid.h

    elements = []
    for k in range(n_el):
        iy, ix = np.nonzero(labels == k)
        on_left = np.flatnonzero(el == k)
        on_right = np.flatnonzero(er == k)
        edges = np.concatenate([on_left, on_right])
        sides = np.concatenate([np.ones(len(on_left)), -np.ones(len(on_right))])
        order = np.argsort(edges, kind="stable")
        edges, sides = edges[order], sides[order]
        x0 = grid.origin[0] + ix.min() * h
        x1 = grid.origin[0] + (ix.max() + 1) * h
        y0 = grid.origin[1] + iy.min() * h
        y1 = grid.origin[1] + (iy.max() + 1) * h
        is_bnd = bool(np.any((el[edges] == OUTSIDE) | (er[edges] == OUTSIDE)))
        s = np.where(sides > 0, ep[edges], eq[edges])
        t = np.where(sides > 0, eq[edges], ep[edges])
        loops = trace_loops(node_ij[s], node_ij[t])
        loop = max(loops, key=len)
        elements.append(PolyElement(
            k, np.stack([iy, ix], 1), edges, sides, max(x1 - x0, y1 - y0),
            (0.5 * (x0 + x1), 0.5 * (y0 + y1)), len(ix) * h * h,
            float(block_px[k] * h), is_bnd, [int(s[i]) for i in loop]))
    return PolyMesh(grid, labels, node_ij, ep, eq, el, er, np.array(emacro),
                    elements, macro_edges, float(H_nominal))


def agglomerate_uniform(grid, m, merge=True):
    """Agglomerate m x m pixel blocks (block grid anchored at the grid origin)."""
    m = int(m)
    labels, block_px = agglomerate_labels(grid, m, None, 1, merge)
    return build_mesh(grid, labels, block_px, m * grid.h)


def corner_node_index(grid, corner):
    cx = (corner[0] - grid.origin[0]) / grid.h
    cy = (corner[1] - grid.origin[1]) / grid.h
    if abs(cx - round(cx)) > 1e-9 or abs(cy - round(cy)) > 1e-9:
        raise ValueError(f"corner {corner} is not a grid node")
    return int(round(cx)), int(round(cy))


def agglomerate_graded(grid, corner, m0, levels, merge=True):
    """Geometrically graded agglomeration toward ``corner``.

    Coarse blocks have side m0 pixels; blocks having the corner as a vertex
    are split in four, ``levels - 1`` times. The recorded nominal H is the
    smallest block side. With one level nothing is refined and the result
    is the uniform agglomeration.
    """
    node = corner_node_index(grid, corner)
    if levels == 1:
        return agglomerate_uniform(grid, m0, merge)
    labels, block_px = agglomerate_labels(grid, int(m0), node, int(levels), merge)
    return build_mesh(grid, labels, block_px, m0 * grid.h / 2 ** (levels - 1))


def build_macro_edges(mesh):
    """Macro edges are built with the mesh; returned here for API symmetry."""
    return mesh.macro_edges


# --------------------------------------------------------------------------
# audit and output

def audit_assumption(mesh):
    """Shape-regularity report per element and extremes over the mesh."""
    labels = mesh.labels
    n = mesh.n_elements
    H = mesh.H
    rows = []
    for el, sl in zip(mesh.elements, _bboxes(labels, n)):
        mask = labels[sl] == el.index
        side = largest_square(mask) * mesh.h
        # crossings of grid-centred axis lines with the element boundary
        pad = np.pad(mask, 1)
        cross_x = np.abs(np.diff(pad.astype(int), axis=0)).sum(axis=0).max()
        cross_y = np.abs(np.diff(pad.astype(int), axis=1)).sum(axis=1).max()
        rows.append({"element": el.index, "H_ratio": el.H_K / H,
                     "alpha": side / el.H_K, "N0": int(max(cross_x, cross_y)),
                     "pixels": len(el.pixels), "n_edges": len(el.edges)})
    ratios = [r["H_ratio"] for r in rows]
    alphas = [r["alpha"] for r in rows]
    n0 = [r["N0"] for r in rows]
    return {"elements": rows, "H": H, "h": mesh.h, "tau_hat": mesh.tau_hat,
            "H_ratio_min": min(ratios), "H_ratio_max": max(ratios),
            "alpha_min": min(alphas), "alpha_max": max(alphas),
            "N0_max": max(n0), "n_elements": n,
            "n_macro_edges": len(mesh.macro_edges)}


def mesh_to_dict(mesh):
    return {
        "h": mesh.h,
        "H_nominal": mesh.H_nominal,
        "vertices": mesh.nodes.tolist(),
        "elements": [{"loop": el.boundary_loop, "pixels": int(len(el.pixels)),
                      "H_K": el.H_K, "x_K": list(el.x_K), "boundary": el.is_boundary}
                     for el in mesh.elements],
        "edges": np.stack([mesh.edge_p, mesh.edge_q, mesh.edge_left, mesh.edge_right], 1).tolist(),
        "macro_edges": [{"elements": list(me.elements), "nodes": me.nodes,
                         "n_fine": me.n_fine} for me in mesh.macro_edges],
    }


def dump_json(mesh, path):
    with open(path, "w") as fh:
        json.dump(mesh_to_dict(mesh), fh, indent=1)


_PALETTE = ["#8dd3c7", "#ffffb3", "#bebada", "#fb8072", "#80b1d3",
            "#fdb462", "#b3de69", "#fccde5", "#d9d9d9", "#bc80bd"]


def render_svg(mesh, path, size=600):
    """Element fills, edges, and macro-edge endpoints (red on the boundary,
    blue inside)."""
    xy = mesh.nodes
    lo = xy.min(axis=0)
    span = float((xy.max(axis=0) - lo).max())
    sc = size / span

    def tr(p):
        return (p[0] - lo[0]) * sc + 10, size - (p[1] - lo[1]) * sc + 10

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size + 20}" height="{size + 20}">']
    for el in mesh.elements:
        pts = " ".join("%.2f,%.2f" % tr(xy[v]) for v in el.boundary_loop)
        out.append(f'<polygon points="{pts}" fill="{_PALETTE[el.index % len(_PALETTE)]}" '
                   'stroke="black" stroke-width="0.6"/>')
    for me in mesh.macro_edges:
        colour = "red" if me.is_boundary else "blue"
        for v in (me.nodes[0], me.nodes[-1]):
            x, y = tr(xy[v])
            out.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="2" fill="{colour}"/>')
    out.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(out))
