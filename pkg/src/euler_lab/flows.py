"""Construction of circular flows, the explicit annulus example, and pressure.

The explicit example lives on the annulus 1 < |x| < 2 with stream function

    phi(r) = r^2 (2 - r)^2,

velocity u = V(r) x^perp with V(r) = phi'(r)/r = 4 (2 - r)(1 - r), vorticity
Delta phi = 16 r^2 - 36 r + 16, and the semilinear profile

    f(s) = 4 (4 sqrt(s) + sqrt(1 - sqrt(s)) - 3),   s in [0, 1],

which satisfies -Delta phi = f(phi) on the annulus (note f(0) = -8 and
f(1) = 4: the velocity vanishes linearly at the boundary, so f does not
vanish at the endpoint values).  The stream function is extended by its
boundary values: 1 inside the hole, 0 outside the support.
"""

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .grid import Grid2, ScalarField, VectorField2


@dataclass
class RadialProfile:
    """A function of radius supported on [r1, r2].

    ``extend`` selects the out-of-support values: 'zero' or 'continuous'
    (constant continuation of the endpoint values, used for pressure).
    """

    r1: float
    r2: float
    func: Callable[[np.ndarray], np.ndarray]
    smoothness: str = "C0"
    extend: str = "zero"

    def __post_init__(self):
        if not 0 <= self.r1 < self.r2:
            raise ValueError("need 0 <= r1 < r2")

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        inside = (r >= self.r1) & (r <= self.r2)
        vals = np.where(inside, self.func(np.clip(r, self.r1, self.r2)), 0.0)
        if self.extend == "continuous":
            lo = float(self.func(np.asarray(self.r1)))
            hi = float(self.func(np.asarray(self.r2)))
            vals = np.where(r < self.r1, lo, vals)
            vals = np.where(r > self.r2, hi, vals)
        return vals


@dataclass
class ClosedFormPair:
    """Closed forms of the explicit example: phi(r), V(r), f(s), -Delta phi(r)."""

    phi_of_r: Callable
    v_of_r: Callable
    f_of_s: Callable
    neg_laplacian_of_r: Callable
    r1: float
    r2: float
    center: tuple = (0.0, 0.0)

    def phi_extended(self, r):
        """phi continued by 1 inside the hole and 0 outside the support."""
        r = np.asarray(r, dtype=float)
        return np.where(
            r <= self.r1, 1.0, np.where(r >= self.r2, 0.0, self.phi_of_r(np.clip(r, self.r1, self.r2)))
        )


def example_profile():
    """Velocity profile of the explicit annulus flow."""
    return RadialProfile(1.0, 2.0, lambda r: 4.0 * (2.0 - r) * (1.0 - r), smoothness="C0")


def example_closed_forms(center=(0.0, 0.0)):
    def f_of_s(s):
        s = np.asarray(s, dtype=float)
        root = np.sqrt(np.clip(s, 0.0, 1.0))
        return 4.0 * (4.0 * root + np.sqrt(np.clip(1.0 - root, 0.0, None)) - 3.0)

    return ClosedFormPair(
        phi_of_r=lambda r: (np.asarray(r) * (2.0 - np.asarray(r))) ** 2,
        v_of_r=lambda r: 4.0 * (2.0 - np.asarray(r)) * (1.0 - np.asarray(r)),
        f_of_s=f_of_s,
        neg_laplacian_of_r=lambda r: -16.0 * np.asarray(r) ** 2 + 36.0 * np.asarray(r) - 16.0,
        r1=1.0,
        r2=2.0,
        center=center,
    )


def circular_flow(V: RadialProfile, center, grid: Grid2) -> VectorField2:
    """u(x) = V(|x - center|) (x - center)^perp, exactly zero outside support."""
    cx, cy = float(center[0]), float(center[1])
    if (
        cx - V.r2 < grid.x0
        or cx + V.r2 > grid.x_max
        or cy - V.r2 < grid.y0
        or cy + V.r2 > grid.y_max
    ):
        raise ValueError("profile support extends beyond the grid")
    x, y = grid.meshgrid()
    dx = x - cx
    dy = y - cy
    r = np.hypot(dx, dy)
    vals = V(r)
    inside = (r >= V.r1) & (r <= V.r2)
    vals = np.where(inside, vals, 0.0)
    return VectorField2(grid, -vals * dy, vals * dx)


def example_flow(grid: Grid2):
    """The explicit annulus flow sampled on a grid.

    Returns (u, phi, pair).  u is sampled from the analytic perp gradient so
    that steadiness tests measure operator error, not construction error;
    phi carries the extension by boundary values (1 in the hole, 0 outside).
    """
    if grid.x0 > -2.2 or grid.y0 > -2.2 or grid.x_max < 2.2 or grid.y_max < 2.2:
        raise ValueError("grid must cover [-2.2, 2.2]^2")
    pair = example_closed_forms()
    u = circular_flow(example_profile(), pair.center, grid)
    x, y = grid.meshgrid()
    r = np.hypot(x - pair.center[0], y - pair.center[1])
    phi = ScalarField(grid, pair.phi_extended(r))
    return u, phi, pair


def _cumulative_simpson(y, dx):
    """Cumulative integral on a uniform grid, composite Simpson on pairs of
    intervals with a 3-point rule for the odd endpoints."""
    n = len(y)
    out = np.zeros(n)
    if n < 2:
        return out
    # integral over [t_{k}, t_{k+2}] via Simpson
    for k in range(0, n - 2, 2):
        out[k + 2] = out[k] + dx * (y[k] + 4.0 * y[k + 1] + y[k + 2]) / 3.0
    # odd nodes: quadratic through (k-1, k, k+1) integrated over [k-1, k]
    for k in range(1, n, 2):
        if k + 1 < n:
            out[k] = out[k - 1] + dx * (5.0 * y[k - 1] + 8.0 * y[k] - y[k + 1]) / 12.0
        else:
            out[k] = out[k - 1] + dx * (y[k - 1] + y[k]) / 2.0
    return out


def pressure_radial(V: RadialProfile, n_table=16385) -> RadialProfile:
    """Pressure balancing the circular flow: p(r) = int_{r1}^{r} s V(s)^2 ds.

    Tabulated with a dense composite Simpson rule (absolute error far below
    1e-10 for smooth profiles) and evaluated by interpolation; constant
    continuation outside the support.
    """
    rs = np.linspace(V.r1, V.r2, n_table)
    integrand = rs * V(rs) ** 2
    table = _cumulative_simpson(integrand, rs[1] - rs[0])

    def p_func(r):
        return np.interp(np.asarray(r, dtype=float), rs, table)

    return RadialProfile(V.r1, V.r2, p_func, smoothness="C1", extend="continuous")


def radial_scalar_field(profile, center, grid: Grid2) -> ScalarField:
    """Sample a radial profile (or plain callable of r) around a center."""
    x, y = grid.meshgrid()
    r = np.hypot(x - float(center[0]), y - float(center[1]))
    return ScalarField(grid, np.asarray(profile(r), dtype=float))


def superpose_disjoint(flows, grid: Grid2) -> VectorField2:
    """Pointwise sum of circular flows whose support annuli are disjoint.

    Disjointness is certified by center distance exceeding the sum of outer
    radii, except for concentric nested profiles which may share a center
    with non-overlapping radial supports.
    """
    flows = list(flows)
    if not flows:
        raise ValueError("need at least one flow")
    for i in range(len(flows)):
        for j in range(i + 1, len(flows)):
            Vi, ci = flows[i]
            Vj, cj = flows[j]
            gap = np.hypot(ci[0] - cj[0], ci[1] - cj[1])
            if gap == 0.0:
                lo, hi = (Vi, Vj) if Vi.r2 <= Vj.r1 else (Vj, Vi)
                if lo.r2 >= hi.r1:
                    raise ValueError("concentric profiles overlap radially")
            elif gap <= Vi.r2 + Vj.r2:
                raise ValueError("support annuli overlap")
    total = None
    for V, center in flows:
        u = circular_flow(V, center, grid)
        if total is None:
            total = u
        else:
            total = VectorField2(grid, total.ux + u.ux, total.uy + u.uy)
    return total
