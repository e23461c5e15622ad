"""Marching-squares contour extraction and closed-polyline utilities.

Level curves are extracted with linear interpolation along cell edges.
Ambiguous saddle cells are resolved by the cell-average rule: the sign of
the cell-center value (mean of the four corners) decides which pair of
crossings is connected.  Cells are visited in row-major order and loops are
normalized to counterclockwise orientation, so the output is deterministic.
"""

from dataclasses import dataclass, field

import numpy as np
from matplotlib.path import Path

from .errors import SelfIntersectionError

# segments per marching-squares case, as pairs of local edge names
# corners: b0=(i,j) b1=(i+1,j) b2=(i+1,j+1) b3=(i,j+1); edges B,R,T,L
_CASE_SEGMENTS = {
    0: [],
    1: [("L", "B")],
    2: [("B", "R")],
    3: [("L", "R")],
    4: [("R", "T")],
    6: [("B", "T")],
    7: [("L", "T")],
    8: [("L", "T")],
    9: [("B", "T")],
    11: [("R", "T")],
    12: [("L", "R")],
    13: [("B", "R")],
    14: [("L", "B")],
    15: [],
}


def _edge_key(i, j, orient, nx):
    return ((j * nx + i) << 1) | orient


def contour_polylines(grid, values, level):
    """Trace the level curves of ``values`` at ``level``.

    Returns a list of vertex arrays (K, 2), each a closed loop in CCW
    orientation, sorted by enclosed area (largest first).  Open chains
    (contours leaving the array) are dropped; compactly supported data
    never produces them.
    """
    v = np.asarray(values, dtype=float)
    ny, nx = v.shape
    inside = v > level

    points = {}

    hx = inside[:, :-1] != inside[:, 1:]
    jj, ii = np.nonzero(hx)
    if jj.size:
        va = v[jj, ii]
        vb = v[jj, ii + 1]
        t = np.clip((level - va) / (vb - va), 0.0, 1.0)
        px = grid.x0 + (ii + t) * grid.h
        py = grid.y0 + jj * grid.h
        for a, b, x, y in zip(ii, jj, px, py):
            points[_edge_key(a, b, 0, nx)] = (x, y)

    vx = inside[:-1, :] != inside[1:, :]
    jj, ii = np.nonzero(vx)
    if jj.size:
        va = v[jj, ii]
        vb = v[jj + 1, ii]
        t = np.clip((level - va) / (vb - va), 0.0, 1.0)
        px = grid.x0 + ii * grid.h
        py = grid.y0 + (jj + t) * grid.h
        for a, b, x, y in zip(ii, jj, px, py):
            points[_edge_key(a, b, 1, nx)] = (x, y)

    if not points:
        return []

    b0 = inside[:-1, :-1]
    b1 = inside[:-1, 1:]
    b2 = inside[1:, 1:]
    b3 = inside[1:, :-1]
    case = (
        b0.astype(np.uint8)
        | (b1.astype(np.uint8) << 1)
        | (b2.astype(np.uint8) << 2)
        | (b3.astype(np.uint8) << 3)
    )
    jj, ii = np.nonzero((case != 0) & (case != 15))

    adjacency = {}

    def _connect(ka, kb):
        adjacency.setdefault(ka, []).append(kb)
        adjacency.setdefault(kb, []).append(ka)

    for i, j in zip(ii, jj):
        c = int(case[j, i])
        local = {
            "B": _edge_key(i, j, 0, nx),
            "T": _edge_key(i, j + 1, 0, nx),
            "L": _edge_key(i, j, 1, nx),
            "R": _edge_key(i + 1, j, 1, nx),
        }
        if c == 5 or c == 10:
            center_inside = (
                v[j, i] + v[j, i + 1] + v[j + 1, i] + v[j + 1, i + 1]
            ) > 4.0 * level
            if c == 5:
                segs = [("B", "R"), ("L", "T")] if center_inside else [("L", "B"), ("R", "T")]
            else:
                segs = [("L", "B"), ("R", "T")] if center_inside else [("B", "R"), ("L", "T")]
        else:
            segs = _CASE_SEGMENTS[c]
        for a, b in segs:
            _connect(local[a], local[b])

    loops = []
    visited = set()
    for start in sorted(adjacency):
        if start in visited or len(adjacency[start]) != 2:
            continue
        loop = [start]
        visited.add(start)
        prev, cur = None, start
        closed = False
        while True:
            nbrs = adjacency[cur]
            nxt = nbrs[0] if nbrs[0] != prev else (nbrs[1] if len(nbrs) > 1 else None)
            if nxt is None:
                break
            if nxt == start:
                closed = True
                break
            if nxt in visited:
                break
            loop.append(nxt)
            visited.add(nxt)
            prev, cur = cur, nxt
        if closed and len(loop) >= 3:
            verts = np.array([points[k] for k in loop])
            if polygon_area(verts) < 0:
                verts = verts[::-1]
            loops.append(verts)

    loops.sort(key=lambda p: (-abs(polygon_area(p)), p[0, 0], p[0, 1]))
    return loops


def polygon_area(vertices):
    """Signed shoelace area of a closed loop (last-to-first edge implied)."""
    x = vertices[:, 0]
    y = vertices[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def points_in_polygon(vertices, points):
    return Path(vertices).contains_points(np.asarray(points, dtype=float))


def refine_polyline(vertices, factor=2):
    """Insert evenly spaced points on every edge (winding refinement tests)."""
    out = []
    nxt = np.roll(vertices, -1, axis=0)
    for k in range(factor):
        out.append(vertices + (k / factor) * (nxt - vertices))
    return np.stack(out, axis=1).reshape(-1, 2)


def segment_point_distance(points, a, b):
    """Distance from each point to segment(s) a-b; shapes broadcast."""
    ab = b - a
    ap = points - a
    denom = np.sum(ab * ab, axis=-1)
    t = np.where(denom > 0, np.sum(ap * ab, axis=-1) / np.where(denom > 0, denom, 1.0), 0.0)
    t = np.clip(t, 0.0, 1.0)
    proj = a + t[..., None] * ab
    return np.linalg.norm(points - proj, axis=-1)


@dataclass
class OrientedPolyline:
    """Closed simple polyline; CCW carries positive enclosed area."""

    vertices: np.ndarray
    _checked_simple: bool = field(default=False, repr=False)

    def __post_init__(self):
        verts = np.asarray(self.vertices, dtype=float)
        if verts.ndim != 2 or verts.shape[1] != 2 or len(verts) < 3:
            raise ValueError("polyline needs at least 3 two-dimensional vertices")
        # drop duplicated consecutive vertices (incl. an explicit closing point)
        keep = np.linalg.norm(verts - np.roll(verts, -1, axis=0), axis=1) > 0
        verts = verts[keep] if keep.any() else verts
        if len(verts) < 3:
            raise ValueError("degenerate polyline after removing repeated vertices")
        self.vertices = verts

    @property
    def n(self):
        return len(self.vertices)

    def enclosed_area(self):
        return polygon_area(self.vertices)

    def edges(self):
        return self.vertices, np.roll(self.vertices, -1, axis=0)

    def edge_lengths(self):
        a, b = self.edges()
        return np.linalg.norm(b - a, axis=1)

    def length(self):
        return float(self.edge_lengths().sum())

    def tangents(self):
        """Unit tangent per vertex, from the consecutive-vertex difference."""
        a, b = self.edges()
        t = b - a
        return t / np.linalg.norm(t, axis=1, keepdims=True)

    def vertex_normals(self):
        """Unit normals pointing to the right of travel (outward for CCW loops
        around positively oriented regions)."""
        t = self.tangents()
        prev_t = np.roll(t, 1, axis=0)
        avg = t + prev_t
        norms = np.linalg.norm(avg, axis=1, keepdims=True)
        avg = np.where(norms > 1e-300, avg / np.where(norms > 0, norms, 1.0), t)
        return np.column_stack([avg[:, 1], -avg[:, 0]])

    def reversed(self):
        return OrientedPolyline(self.vertices[::-1].copy())

    def turning_number(self):
        """Exact turning number from exterior angles (discrete Gauss-Bonnet)."""
        self.require_simple()
        t = self.tangents()
        prev_t = np.roll(t, 1, axis=0)
        cross = prev_t[:, 0] * t[:, 1] - prev_t[:, 1] * t[:, 0]
        dot = np.sum(prev_t * t, axis=1)
        total = float(np.sum(np.arctan2(cross, dot)))
        turns = total / (2.0 * np.pi)
        rounded = int(np.rint(turns))
        if abs(turns - rounded) > 0.1:
            raise SelfIntersectionError(
                f"exterior angles sum to {turns:.4f} turns, not close to an integer"
            )
        return rounded

    def is_simple(self):
        a, b = self.edges()
        n = self.n
        idx = np.arange(n)
        chunk = 512
        for s in range(0, n, chunk):
            sl = slice(s, min(s + chunk, n))
            i = idx[sl]
            # pairwise proper-intersection test against all later segments
            j = idx[None, :]
            ii = i[:, None]
            nonadjacent = (j > ii + 1) & ~((ii == 0) & (j == n - 1))
            p1, p2 = a[sl][:, None, :], b[sl][:, None, :]
            q1, q2 = a[None, :, :], b[None, :, :]

            def orient(p, q, r):
                return (q[..., 0] - p[..., 0]) * (r[..., 1] - p[..., 1]) - (
                    q[..., 1] - p[..., 1]
                ) * (r[..., 0] - p[..., 0])

            d1 = orient(p1, p2, q1)
            d2 = orient(p1, p2, q2)
            d3 = orient(q1, q2, p1)
            d4 = orient(q1, q2, p2)
            crosses = (d1 * d2 < 0) & (d3 * d4 < 0)
            if np.any(crosses & nonadjacent):
                return False
        return True

    def require_simple(self):
        if not self._checked_simple:
            if not self.is_simple():
                raise SelfIntersectionError("polyline intersects itself")
            self._checked_simple = True

    def contains_points(self, points):
        return points_in_polygon(self.vertices, points)

    def refined(self, factor=2):
        return OrientedPolyline(refine_polyline(self.vertices, factor))
