"""Elliptic operators -Delta + c with boundary-singular coefficients.

Covers the quadratic-form machinery: principal eigenpairs of the 5-point
Dirichlet discretization on subdomains, the discrete Hardy ratio, the weak
maximum principle verdict, positivity radii near boundary points, and the
closed-form comparison functions used by the Hopf and corner lemmas.  The
comparison functions are evaluated analytically, never by differencing:
the inequalities they satisfy are exact mathematics and are checked as such.
"""

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .domain import DomainMask
from .errors import (
    ConvergenceFailureError,
    DomainEvaluationError,
    ProfileFailureError,
    SingularNodeError,
)
from .grid import ScalarField


@dataclass
class SingularPotential:
    """Coefficient c on a mask with the certified bound max |c(x)| d(x)."""

    field: ScalarField
    bound: float

    @classmethod
    def from_distance(cls, mask: DomainMask, fn):
        """Build c = fn(d) on nodes with d > 0 (zero elsewhere)."""
        d = mask.distance.values
        ok = mask.inside & (d > 0)
        c = np.zeros(mask.grid.shape)
        c[ok] = fn(d[ok])
        bound = float(np.abs(c[ok] * d[ok]).max()) if ok.any() else 0.0
        return cls(ScalarField(mask.grid, c), bound)

    @classmethod
    def constant(cls, mask: DomainMask, value):
        c = np.full(mask.grid.shape, float(value))
        dmax = float(mask.distance.values.max())
        return cls(ScalarField(mask.grid, c), abs(value) * dmax)


@dataclass
class DiscreteOperator:
    """Symmetric 5-point -Delta + diag(c), Dirichlet by node elimination."""

    mask: DomainMask
    subdomain: np.ndarray
    matrix: sp.csr_matrix
    dof_flat: np.ndarray  # flat grid indices of the degrees of freedom

    @property
    def n_dof(self):
        return int(len(self.dof_flat))

    def embed(self, vec):
        out = np.zeros(self.mask.grid.n_nodes)
        out[self.dof_flat] = vec
        return ScalarField(self.mask.grid, out.reshape(self.mask.grid.shape))


def assemble(mask: DomainMask, subdomain, c: SingularPotential | None = None) -> DiscreteOperator:
    """Assemble the operator on the nodes selected by ``subdomain``."""
    sub = np.asarray(subdomain, dtype=bool)
    if sub.shape != mask.grid.shape:
        raise ValueError("subdomain mask shape does not match the grid")
    if not sub.any():
        raise ValueError("empty subdomain")
    if c is not None:
        if c.field.grid != mask.grid:
            raise ValueError("potential and mask grids differ")
        d = mask.distance.values
        bad = sub & ((d <= 0) | ~mask.inside)
        if bad.any():
            j, i = np.argwhere(bad)[0]
            raise SingularNodeError(
                f"subdomain node ({i}, {j}) has zero boundary distance"
            )

    nx = mask.grid.nx
    h2 = mask.grid.h ** 2
    flat = np.flatnonzero(sub.ravel())
    index = -np.ones(mask.grid.n_nodes, dtype=np.int64)
    index[flat] = np.arange(len(flat))

    diag = np.full(len(flat), 4.0 / h2)
    if c is not None:
        diag = diag + c.field.values.ravel()[flat]

    rows = [np.arange(len(flat))]
    cols = [np.arange(len(flat))]
    vals = [diag]
    n_total = mask.grid.n_nodes
    for shift, same_row in ((1, True), (-1, True), (nx, False), (-nx, False)):
        nb = flat + shift
        ok = (nb >= 0) & (nb < n_total)
        if same_row:
            ok &= (flat // nx) == (np.clip(nb, 0, n_total - 1) // nx)
        ok &= index[np.clip(nb, 0, n_total - 1)] >= 0
        rows.append(index[flat[ok]])
        cols.append(index[nb[ok]])
        vals.append(np.full(int(ok.sum()), -1.0 / h2))
    matrix = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(len(flat), len(flat)),
    )
    return DiscreteOperator(mask, sub, matrix, flat)


def _gershgorin_floor(matrix):
    diag = matrix.diagonal()
    offsum = np.abs(matrix).sum(axis=1).A1 - np.abs(diag)
    return float((diag - offsum).min())


def _smallest_eigs(matrix, k, v0_seed=None):
    """Deterministic smallest eigenpairs: dense below a size cutoff, otherwise
    shift-invert Lanczos anchored below the Gershgorin floor with a fixed
    start vector."""
    n = matrix.shape[0]
    k = min(k, n)
    if n <= 600:
        dense = matrix.toarray() if sp.issparse(matrix) else np.asarray(matrix)
        w, v = scipy.linalg.eigh(dense)
        return w[:k], v[:, :k]
    sigma = _gershgorin_floor(matrix) - 1.0
    v0 = np.ones(n) if v0_seed is None else v0_seed
    try:
        w, v = spla.eigsh(matrix, k=k, sigma=sigma, which="LM", v0=v0, maxiter=5000)
    except spla.ArpackNoConvergence as exc:
        raise ConvergenceFailureError(f"eigen iteration stagnated: {exc}") from exc
    order = np.argsort(w)
    return w[order], v[:, order]


def principal_eigenpair(op: DiscreteOperator, return_second=False):
    """Smallest eigenvalue and eigenfunction (unit discrete L2, positive mean)."""
    if op.n_dof == 0:
        raise ValueError("operator has no degrees of freedom")
    k = 2 if (return_second and op.n_dof >= 2) else 1
    w, v = _smallest_eigs(op.matrix, k)
    lam1 = float(w[0])
    vec = v[:, 0]
    res = np.linalg.norm(op.matrix @ vec - lam1 * vec)
    if res > 1e-8 * max(abs(lam1), 1.0) * np.linalg.norm(vec):
        raise ConvergenceFailureError(
            f"eigenresidual {res:.2e} above target for lambda1={lam1:.6g}"
        )
    if vec.sum() < 0:
        vec = -vec
    vec = vec / (np.linalg.norm(vec) * op.mask.grid.h)
    phi1 = op.embed(vec)
    if return_second:
        lam2 = float(w[1]) if len(w) > 1 else math.inf
        return lam1, phi1, lam2
    return lam1, phi1


def rayleigh_quotient(op: DiscreteOperator, field: ScalarField):
    v = field.values.ravel()[op.dof_flat]
    return float(v @ (op.matrix @ v)) / float(v @ v)


def resolved_interior(mask: DomainMask):
    """Inside nodes whose boundary distance the mesh resolves (d > h/2).

    Nodal quadrature of 1/d^2 is meaningful only on this class; all
    singular-potential subdomains use it so that the discrete Hardy chain
    ||c d|| C r < 1  =>  lambda1 > 0 holds exactly.
    """
    return mask.inside & (mask.distance.values > 0.5 * mask.grid.h)


def hardy_ratio(mask: DomainMask, subdomain) -> float:
    """min of sum |grad psi|^2 / sum psi^2 / d^2 over grid functions supported
    on the distance-resolved part of the subdomain; the reciprocal is the
    measured Hardy constant."""
    sub = np.asarray(subdomain, dtype=bool) & resolved_interior(mask)
    d = mask.distance.values
    if not sub.any():
        raise ValueError("empty subdomain")
    op = assemble(mask, sub, None)
    dd = d.ravel()[op.dof_flat]
    scaled = sp.diags(dd) @ op.matrix @ sp.diags(dd)
    scaled = (scaled + scaled.T) * 0.5
    w, _ = _smallest_eigs(scaled.tocsr(), 1)
    return float(w[0])


@dataclass
class PositivityResult:
    radius: float
    eigenvalue: float
    flagged: bool


def positivity_radius(mask: DomainMask, c: SingularPotential, q, r_max=None,
                      n_bisect=12) -> PositivityResult:
    """Largest tested r with lambda1(B(q, r) iff Omega) > 0, by bisection.

    Domain monotonicity of lambda1 makes the sign change monotone in r.
    Returns radius 0 with a flag when even r = 4h fails.
    """
    grid = mask.grid
    h = grid.h
    if r_max is None:
        r_max = 0.5 * max(grid.x_max - grid.x0, grid.y_max - grid.y0)
    x, ygrid = grid.meshgrid()
    rr = np.hypot(x - q[0], ygrid - q[1])
    usable = resolved_interior(mask)

    def lam_at(r):
        sub = usable & (rr < r)
        if not sub.any():
            return None
        lam, _ = principal_eigenpair(assemble(mask, sub, c))
        return lam

    lo = 4.0 * h
    lam_lo = lam_at(lo)
    if lam_lo is None or lam_lo <= 0:
        return PositivityResult(0.0, lam_lo if lam_lo is not None else math.nan, True)
    lam_hi = lam_at(r_max)
    if lam_hi is not None and lam_hi > 0:
        return PositivityResult(r_max, lam_hi, False)
    hi = r_max
    best_r, best_lam = lo, lam_lo
    for _ in range(n_bisect):
        mid = 0.5 * (lo + hi)
        lam = lam_at(mid)
        if lam is not None and lam > 0:
            lo, best_r, best_lam = mid, mid, lam
        else:
            hi = mid
    return PositivityResult(best_r, best_lam, False)


@dataclass
class MaxPrincipleVerdict:
    hypotheses_hold: bool
    lambda1: float
    min_omega: float
    violation: tuple | None = None
    reason: str = ""


def weak_max_principle_check(op: DiscreteOperator, omega: ScalarField,
                             tol=1e-8) -> MaxPrincipleVerdict:
    """Check lambda1 > 0, L(omega) >= 0 inside, omega >= 0 on the rim; if the
    hypotheses hold the conclusion min(omega) >= 0 is reported, not assumed."""
    if omega.grid != op.mask.grid:
        raise ValueError("field grid does not match the operator")
    lam1, _ = principal_eigenpair(op)
    vals = omega.values
    sub = op.subdomain
    grid = op.mask.grid
    h2 = grid.h ** 2

    # L omega with true neighbor values (nonzero Dirichlet data allowed)
    lap = np.zeros_like(vals)
    lap[1:-1, 1:-1] = (
        vals[1:-1, 2:] + vals[1:-1, :-2] + vals[2:, 1:-1] + vals[:-2, 1:-1]
        - 4.0 * vals[1:-1, 1:-1]
    ) / h2
    cdiag = np.zeros(grid.n_nodes)
    cdiag[op.dof_flat] = op.matrix.diagonal() - 4.0 / h2
    lw = -lap + cdiag.reshape(grid.shape) * vals

    scale = max(float(np.abs(lw[sub]).max()), 1.0)
    min_omega = float(vals[sub].min())

    if lam1 <= 0:
        return MaxPrincipleVerdict(False, lam1, min_omega, reason="lambda1 <= 0")

    inner_bad = sub & (lw < -tol * scale)
    # interior check only where the full stencil is representable
    inner_bad[0, :] = inner_bad[-1, :] = False
    inner_bad[:, 0] = inner_bad[:, -1] = False
    if inner_bad.any():
        j, i = np.argwhere(inner_bad)[0]
        return MaxPrincipleVerdict(
            False, lam1, min_omega, violation=(int(i), int(j)),
            reason=f"L(omega) = {lw[j, i]:.3e} < 0 at node ({i}, {j})",
        )

    rim = np.zeros_like(sub)
    rim[1:-1, 1:-1] = (
        sub[1:-1, 2:] | sub[1:-1, :-2] | sub[2:, 1:-1] | sub[:-2, 1:-1]
    ) & ~sub[1:-1, 1:-1]
    om_scale = max(float(np.abs(vals[sub]).max()), 1.0)
    rim_bad = rim & (vals < -tol * om_scale)
    if rim_bad.any():
        j, i = np.argwhere(rim_bad)[0]
        return MaxPrincipleVerdict(
            False, lam1, min_omega, violation=(int(i), int(j)),
            reason=f"omega = {vals[j, i]:.3e} < 0 on the rim at ({i}, {j})",
        )
    return MaxPrincipleVerdict(True, lam1, min_omega)


@dataclass
class ComparisonProfile:
    """The barrier profile rho(t) = (r - t) + ((m-1)/t + 2C)(r - t)^2 / 2."""

    m: int
    C: float
    r: float
    r0: float

    def _B(self, t):
        return (self.m - 1) / t + 2.0 * self.C

    def rho(self, t):
        t = np.asarray(t, dtype=float)
        return (self.r - t) + self._B(t) * (self.r - t) ** 2 / 2.0

    def drho(self, t):
        t = np.asarray(t, dtype=float)
        dB = -(self.m - 1) / t ** 2
        return -1.0 + dB * (self.r - t) ** 2 / 2.0 - self._B(t) * (self.r - t)

    def ddrho(self, t):
        t = np.asarray(t, dtype=float)
        dB = -(self.m - 1) / t ** 2
        ddB = 2.0 * (self.m - 1) / t ** 3
        return ddB * (self.r - t) ** 2 / 2.0 - 2.0 * dB * (self.r - t) + self._B(t)

    def induced_c(self, t):
        """Coefficient for which rho solves the radial equation exactly;
        tends to 2C as t -> r and exceeds C on (r0, r)."""
        t = np.asarray(t, dtype=float)
        return (self.ddrho(t) + (self.m - 1) * self.drho(t) / t) * (self.r - t) / self.rho(t)

    def radial_inequality_residual(self, t):
        """-rho'' - (m-1) rho'/t + C rho/(r-t); nonpositive on (r0, r)."""
        t = np.asarray(t, dtype=float)
        return (
            -self.ddrho(t)
            - (self.m - 1) * self.drho(t) / t
            + self.C * self.rho(t) / (self.r - t)
        )


def comparison_profile(m, C, r, n_scan=10000) -> ComparisonProfile:
    """Find the inner radius r0 below which the induced coefficient dips to C.

    Dense scan on (0.01 r, r), then bisection refinement of the last crossing.
    """
    if m < 2 or int(m) != m:
        raise ValueError("m must be an integer >= 2")
    if C <= 0 or r <= 0:
        raise ValueError("C and r must be positive")
    prof = ComparisonProfile(int(m), float(C), float(r), r0=0.01 * r)
    ts = np.linspace(0.01 * r, r * (1.0 - 1e-9), n_scan)
    cs = prof.induced_c(ts)
    if not (cs[-1] > C):
        raise ProfileFailureError("induced coefficient does not exceed C near r")
    below = np.nonzero(cs <= C)[0]
    if len(below) == 0:
        return prof
    k = below[-1]
    if k + 1 >= n_scan:
        raise ProfileFailureError("no valid inner radius in (0.01 r, r)")
    lo, hi = ts[k], ts[k + 1]
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if prof.induced_c(mid) <= C:
            lo = mid
        else:
            hi = mid
    prof.r0 = float(hi)
    return prof


class PsiField:
    """Closed-form comparison function psi_1 = rho(|x|) or psi_2 = x1 rho(|x|).

    Planar evaluation: psi_1 needs a profile with m = 2 and psi_2 one with
    m = 4 (the radial part of psi_2 sees the Laplacian with two extra
    dimensions).  All derivatives are analytic.
    """

    def __init__(self, profile: ComparisonProfile, which: int):
        if which not in (1, 2):
            raise ValueError("which must be 1 or 2")
        needed = 2 if which == 1 else 4
        if profile.m != needed:
            raise ValueError(
                f"psi_{which} in the plane needs a profile with m = {needed}, got m = {profile.m}"
            )
        self.profile = profile
        self.which = which

    def _radii(self, points, extrapolate):
        pts = np.asarray(points, dtype=float)
        t = np.hypot(pts[..., 0], pts[..., 1])
        if not extrapolate:
            bad = (t < self.profile.r0) | (t > self.profile.r)
            if self.which == 2:
                bad |= pts[..., 0] < 0
            if np.any(bad):
                raise DomainEvaluationError("point outside the comparison annulus")
        return pts, t

    def value(self, points, extrapolate=False):
        pts, t = self._radii(points, extrapolate)
        rho = self.profile.rho(t)
        return rho if self.which == 1 else pts[..., 0] * rho

    def grad(self, points, extrapolate=False):
        pts, t = self._radii(points, extrapolate)
        g = self.profile.drho(t)
        if self.which == 1:
            return g[..., None] * pts / t[..., None]
        rho = self.profile.rho(t)
        x1 = pts[..., 0]
        out = (x1 * g / t)[..., None] * pts
        out[..., 0] += rho
        return out

    def laplacian(self, points, extrapolate=False):
        pts, t = self._radii(points, extrapolate)
        if self.which == 1:
            return self.profile.ddrho(t) + self.profile.drho(t) / t
        # Delta(x1 g(t)) = x1 (g'' + 3 g'/t) in the plane
        return pts[..., 0] * (self.profile.ddrho(t) + 3.0 * self.profile.drho(t) / t)

    def inequality_residual(self, points, extrapolate=False):
        """-Delta psi + (C/(r - |x|)) psi, evaluated from closed forms."""
        pts, t = self._radii(points, extrapolate)
        val = self.value(points, extrapolate=True)
        return -self.laplacian(points, extrapolate=True) + self.profile.C / (
            self.profile.r - t
        ) * val

    def hessian(self, points, extrapolate=False):
        pts, t = self._radii(points, extrapolate)
        g = self.profile.drho(t)
        gg = self.profile.ddrho(t)
        x = pts[..., 0]
        y = pts[..., 1]
        # Hessian of rho(|x|)
        rr = np.empty(pts.shape[:-1] + (2, 2))
        a = gg / t ** 2 - g / t ** 3
        rr[..., 0, 0] = a * x * x + g / t
        rr[..., 1, 1] = a * y * y + g / t
        rr[..., 0, 1] = rr[..., 1, 0] = a * x * y
        if self.which == 1:
            return rr
        grad_rho = g[..., None] * pts / t[..., None]
        out = x[..., None, None] * rr
        out[..., 0, :] += grad_rho
        out[..., :, 0] += grad_rho
        return out

    def corner_second_derivative(self, p, eta):
        """Analytic directional second derivative of psi_2 at a corner point p
        (p1 = 0, |p| = r): eta^T H eta = -(2/r)(p . eta) eta1."""
        if self.which != 2:
            raise ValueError("corner derivative is a psi_2 quantity")
        p = np.asarray(p, dtype=float)
        eta = np.asarray(eta, dtype=float)
        return -2.0 / self.profile.r * float(p @ eta) * float(eta[0])


def psi_fields(profile: ComparisonProfile, which: int) -> PsiField:
    return PsiField(profile, which)


@dataclass
class PointwiseVerdict:
    kind: str  # 'strictly-negative' | 'positive' | 'identically-zero' | 'inconclusive'
    derivative: float
    max_abs: float


def hopf_check(omega: ScalarField, mask: DomainMask, ball, p,
               tol=1e-9, tol_d=1e-6) -> PointwiseVerdict:
    """Hopf-lemma trichotomy at a boundary zero of a nonnegative supersolution.

    Estimates the outward normal derivative at p by a one-sided 3-point rule
    along the inward radius of the tangent ball.
    """
    center, r = np.asarray(ball[0], dtype=float), float(ball[1])
    grid = omega.grid
    h = grid.h
    d_center = float(mask.distance.sample(center[None, :])[0])
    if not mask.inside[
        min(grid.ny - 1, max(0, int(round((center[1] - grid.y0) / h)))),
        min(grid.nx - 1, max(0, int(round((center[0] - grid.x0) / h)))),
    ] or d_center < r - 1.5 * h:
        raise ValueError("ball is not contained in the domain closure")
    p = np.asarray(p, dtype=float)
    x, y = grid.meshgrid()
    in_ball = mask.inside & (np.hypot(x - center[0], y - center[1]) < r)
    max_abs = float(np.abs(omega.values[in_ball]).max()) if in_ball.any() else 0.0
    scale = max(max_abs, 1e-300)
    if in_ball.any() and float(omega.values[in_ball].min()) < -tol_d * scale - tol:
        raise ValueError("omega is negative on the ball; hypothesis violated")
    if max_abs < tol:
        return PointwiseVerdict("identically-zero", 0.0, max_abs)
    inward = center - p
    inward = inward / np.linalg.norm(inward)
    delta = h
    pts = np.array([p, p + delta * inward, p + 2 * delta * inward])
    w0, w1, w2 = omega.sample(pts)
    d_inward = (-3.0 * w0 + 4.0 * w1 - w2) / (2.0 * delta)
    dnu = -d_inward
    if dnu < -tol_d:
        return PointwiseVerdict("strictly-negative", float(dnu), max_abs)
    return PointwiseVerdict("inconclusive", float(dnu), max_abs)


def corner_check(omega: ScalarField, mask: DomainMask, half_ball, p, eta,
                 tol=1e-9, tol_d=1e-6) -> PointwiseVerdict:
    """Serrin-corner trichotomy: second derivative along an entering direction
    at a corner zero with vanishing gradient."""
    center, r, axis = (
        np.asarray(half_ball[0], dtype=float),
        float(half_ball[1]),
        np.asarray(half_ball[2], dtype=float),
    )
    axis = axis / np.linalg.norm(axis)
    eta = np.asarray(eta, dtype=float)
    eta = eta / np.linalg.norm(eta)
    p = np.asarray(p, dtype=float)
    if float(eta @ axis) <= 0 or float((p - center) @ eta) >= 0:
        raise ValueError("eta must enter the half ball: eta . axis > 0, (p - center) . eta < 0")
    grid = omega.grid
    h = grid.h
    x, y = grid.meshgrid()
    rel = np.stack([x - center[0], y - center[1]], axis=-1)
    in_half = mask.inside & (np.hypot(rel[..., 0], rel[..., 1]) < r) & (rel @ axis > 0)
    max_abs = float(np.abs(omega.values[in_half]).max()) if in_half.any() else 0.0
    scale = max(max_abs, 1e-300)
    if in_half.any() and float(omega.values[in_half].min()) < -tol_d * scale - tol:
        raise ValueError("omega is negative on the half ball; hypothesis violated")
    if max_abs < tol:
        return PointwiseVerdict("identically-zero", 0.0, max_abs)
    # gradient at p by central differences (must vanish at a Serrin corner)
    gpts = np.array([p + [h, 0], p - [h, 0], p + [0, h], p - [0, h]])
    gv = omega.sample(gpts)
    gnorm = np.hypot(gv[0] - gv[1], gv[2] - gv[3]) / (2 * h)
    if gnorm > math.sqrt(max(tol_d, 1e-12)) * scale / max(r, h):
        raise ValueError(f"gradient at the corner is {gnorm:.3e}, not approximately zero")
    delta = h
    pts = np.array([p, p + delta * eta, p + 2 * delta * eta])
    w0, w1, w2 = omega.sample(pts)
    second = (w0 - 2.0 * w1 + w2) / delta ** 2
    if second > tol_d:
        return PointwiseVerdict("positive", float(second), max_abs)
    return PointwiseVerdict("inconclusive", float(second), max_abs)
