"""Domain masks: support detection, labeled boundary components, distance fields.

A mask describes the open set where a flow lives: a boolean inside/outside
per node, the boundary as closed polylines (component 0 encloses maximal
area), the distance to the boundary (zero outside), and for every inside
node the index of its nearest boundary component.
"""

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .contours import OrientedPolyline, contour_polylines, segment_point_distance
from .errors import AmbiguousOuterBoundaryError, EmptySupportError
from .grid import Grid2, ScalarField, VectorField2


@dataclass
class DomainMask:
    grid: Grid2
    inside: np.ndarray
    components: list  # OrientedPolyline, index 0 = outer
    distance: ScalarField
    nearest_component: np.ndarray  # int per node, -1 outside

    @property
    def n_holes(self):
        return len(self.components) - 1

    def outer(self):
        return self.components[0]

    def interior_nodes(self, offset=0.0):
        """Boolean mask of inside nodes with distance strictly above ``offset``."""
        return self.inside & (self.distance.values > offset)

    def retract(self, eps):
        """The mask of {d > eps}, with boundary traced on the distance field."""
        if eps <= 0:
            raise ValueError("retraction width must be positive")
        inner = self.inside & (self.distance.values > eps)
        if not inner.any():
            raise EmptySupportError(f"no nodes at distance > {eps}")
        polylines = contour_polylines(self.grid, self.distance.values, eps)
        return mask_from_polylines(self.grid, polylines, inside=inner)


def _polyline_distance(grid, polylines, query_mask, k_nearest=6):
    """Exact distance to the nearest polyline segment for masked nodes.

    Candidate segments come from the k nearest vertices; segments are short
    (at most one cell diagonal) so the true minimizer is always among them.
    """
    verts = []
    seg_a = []
    seg_b = []
    seg_comp = []
    vert_to_seg = []
    for ci, poly in enumerate(polylines):
        v = poly.vertices if isinstance(poly, OrientedPolyline) else np.asarray(poly)
        n0 = len(seg_a)
        nxt = np.roll(v, -1, axis=0)
        for j in range(len(v)):
            seg_a.append(v[j])
            seg_b.append(nxt[j])
            seg_comp.append(ci)
        for j in range(len(v)):
            verts.append(v[j])
            vert_to_seg.append((n0 + j, n0 + (j - 1) % len(v)))
    verts = np.asarray(verts)
    seg_a = np.asarray(seg_a)
    seg_b = np.asarray(seg_b)
    seg_comp = np.asarray(seg_comp)
    vert_to_seg = np.asarray(vert_to_seg)

    x, y = grid.meshgrid()
    pts = np.column_stack([x[query_mask], y[query_mask]])
    dist = np.zeros(grid.shape)
    nearest = np.full(grid.shape, -1, dtype=int)
    if len(pts) == 0:
        return dist, nearest

    tree = cKDTree(verts)
    k = min(k_nearest, len(verts))
    _, idx = tree.query(pts, k=k)
    if k == 1:
        idx = idx[:, None]
    cand = vert_to_seg[idx].reshape(len(pts), -1)  # (N, 2k) segment ids

    d = segment_point_distance(pts[:, None, :], seg_a[cand], seg_b[cand])
    best = np.argmin(d, axis=1)
    rows = np.arange(len(pts))
    dist[query_mask] = d[rows, best]
    nearest[query_mask] = seg_comp[cand[rows, best]]
    return dist, nearest


def mask_from_polylines(grid, polylines, inside=None):
    """Assemble a DomainMask from traced boundary loops.

    Components are ordered by enclosed area (largest first).  When ``inside``
    is not given, membership is outer-loop minus all other loops.
    """
    if not polylines:
        raise EmptySupportError("no boundary polylines")
    polys = [
        p if isinstance(p, OrientedPolyline) else OrientedPolyline(np.asarray(p))
        for p in polylines
    ]
    polys.sort(key=lambda p: -abs(p.enclosed_area()))
    if len(polys) >= 2:
        a0 = abs(polys[0].enclosed_area())
        a1 = abs(polys[1].enclosed_area())
        if abs(a0 - a1) < grid.h ** 2:
            raise AmbiguousOuterBoundaryError(
                f"two maximal boundary components with areas {a0:.6g}, {a1:.6g}"
            )
    if inside is None:
        x, y = grid.meshgrid()
        pts = np.column_stack([x.ravel(), y.ravel()])
        member = polys[0].contains_points(pts)
        for p in polys[1:]:
            member &= ~p.contains_points(pts)
        inside = member.reshape(grid.shape)
    dist, nearest = _polyline_distance(grid, polys, inside)
    return DomainMask(grid, inside, polys, ScalarField(grid, dist), nearest)


def support_mask(u: VectorField2, tol: float) -> DomainMask:
    """Mask of {|u| > tol} with marching-squares boundary polylines."""
    if tol <= 0:
        raise ValueError("support threshold must be positive")
    mag = np.hypot(u.ux, u.uy)
    inside = mag > tol
    if not inside.any():
        raise EmptySupportError("velocity field vanishes everywhere (below tol)")
    polylines = contour_polylines(u.grid, mag, tol)
    if not polylines:
        raise EmptySupportError("support does not close inside the grid")
    return mask_from_polylines(u.grid, polylines, inside=inside)


def distance_field(mask: DomainMask) -> ScalarField:
    """Distance to the boundary polylines; zero outside the domain."""
    return mask.distance


def _circle_polyline(center, radius, h):
    n = max(16, int(np.ceil(2.0 * np.pi * radius / h)))
    th = 2.0 * np.pi * np.arange(n) / n
    return np.column_stack(
        [center[0] + radius * np.cos(th), center[1] + radius * np.sin(th)]
    )


def disk_mask(grid, center, radius):
    """Analytic disk: polyline boundary, exact radial distance."""
    x, y = grid.meshgrid()
    r = np.hypot(x - center[0], y - center[1])
    inside = r < radius
    if not inside.any():
        raise EmptySupportError("disk does not intersect the grid nodes")
    poly = OrientedPolyline(_circle_polyline(center, radius, grid.h))
    dist = np.where(inside, radius - r, 0.0)
    nearest = np.where(inside, 0, -1)
    return DomainMask(grid, inside, [poly], ScalarField(grid, dist), nearest)


def annulus_mask(grid, center, r_inner, r_outer):
    """Analytic annulus mask with exact distances to the two circles."""
    if not 0 < r_inner < r_outer:
        raise ValueError("need 0 < r_inner < r_outer")
    x, y = grid.meshgrid()
    r = np.hypot(x - center[0], y - center[1])
    inside = (r > r_inner) & (r < r_outer)
    if not inside.any():
        raise EmptySupportError("annulus contains no grid nodes")
    outer = OrientedPolyline(_circle_polyline(center, r_outer, grid.h))
    inner = OrientedPolyline(_circle_polyline(center, r_inner, grid.h))
    d_out = r_outer - r
    d_in = r - r_inner
    dist = np.where(inside, np.minimum(d_out, d_in), 0.0)
    nearest = np.where(inside, (d_in < d_out).astype(int), -1)
    return DomainMask(grid, inside, [outer, inner], ScalarField(grid, dist), nearest)


def box_mask(grid, x_lo, x_hi, y_lo, y_hi):
    """Analytic axis-aligned rectangle mask (exact distances)."""
    x, y = grid.meshgrid()
    inside = (x > x_lo) & (x < x_hi) & (y > y_lo) & (y < y_hi)
    if not inside.any():
        raise EmptySupportError("box contains no grid nodes")
    corners = np.array(
        [[x_lo, y_lo], [x_hi, y_lo], [x_hi, y_hi], [x_lo, y_hi]], dtype=float
    )
    # densify edges so nearest-vertex queries stay local
    dense = []
    for a, b in zip(corners, np.roll(corners, -1, axis=0)):
        n = max(2, int(np.ceil(np.linalg.norm(b - a) / grid.h)))
        dense.append(a + (b - a) * np.linspace(0, 1, n, endpoint=False)[:, None])
    poly = OrientedPolyline(np.vstack(dense))
    d = np.minimum.reduce([x - x_lo, x_hi - x, y - y_lo, y_hi - y])
    dist = np.where(inside, d, 0.0)
    nearest = np.where(inside, 0, -1)
    return DomainMask(grid, inside, [poly], ScalarField(grid, dist), nearest)
