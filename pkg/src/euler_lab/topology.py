"""Winding numbers, boundary degree bookkeeping, and the annularity verdict.

The degree identity being certified: for a velocity with no zeros on the
retracted domain and nonvanishing tangential component on its boundary,
every boundary winding number is 1 and the combination

    winding(outer) - sum of winding(inner_i) = 1 - n

must equal the Brouwer degree of the velocity, which is 0 whenever the
enclosed region is free of stagnation points; hence n = 1 and the domain is
annular.
"""

from dataclasses import dataclass, field

import numpy as np

from .contours import OrientedPolyline
from .domain import DomainMask, mask_from_polylines, support_mask
from .errors import (
    StagnationPointError,
    UndersampledCurveError,
    VanishingFieldOnCurveError,
    HypothesisViolationError,
)
from .grid import VectorField2


def winding_from_vectors(vectors):
    """Net rotations of a closed chain of nonvanishing vectors.

    Raises when any angle increment exceeds pi/2 (undersampling) or the total
    is not close to an integer.
    """
    v = np.asarray(vectors, dtype=float)
    norms = np.linalg.norm(v, axis=1)
    vmax = norms.max() if len(norms) else 0.0
    if vmax == 0.0 or norms.min() < 1e-14 * vmax:
        raise VanishingFieldOnCurveError("vector field vanishes at a curve sample")
    nxt = np.roll(v, -1, axis=0)
    cross = v[:, 0] * nxt[:, 1] - v[:, 1] * nxt[:, 0]
    dot = np.sum(v * nxt, axis=1)
    inc = np.arctan2(cross, dot)
    if np.abs(inc).max() > np.pi / 2:
        raise UndersampledCurveError(
            f"angle increment {np.abs(inc).max():.3f} exceeds pi/2; refine the curve"
        )
    total = float(inc.sum()) / (2.0 * np.pi)
    rounded = int(np.rint(total))
    if abs(total - rounded) > 0.1:
        raise UndersampledCurveError(
            f"winding sum {total:.4f} is not within 0.1 of an integer"
        )
    return rounded


def winding_number(F: VectorField2, gamma: OrientedPolyline) -> int:
    """Winding number of the field sampled (bilinearly) along the curve."""
    return winding_from_vectors(F.sample(gamma.vertices))


def tangential_nonvanishing(u: VectorField2, gamma: OrientedPolyline):
    """(flag, min |u . tau|) along the curve.

    The flag certifies a single-signed tangential component: a sign change
    between consecutive vertices implies a zero in between regardless of how
    large the vertex values are.
    """
    tau = gamma.tangents()
    vals = u.sample(gamma.vertices)
    s = np.sum(vals * tau, axis=1)
    m = float(np.abs(s).min())
    scale = float(np.abs(s).max())
    one_signed = bool(np.all(s > 0) or np.all(s < 0))
    ok = one_signed and scale > 0 and m > 1e-12 * scale
    return ok, m


def curvature_winding(gamma: OrientedPolyline) -> int:
    """Turning number from exterior angles; exact integer for simple loops."""
    return gamma.turning_number()


@dataclass
class AnnularityReport:
    n: int
    windings: list
    min_u_tau: list
    min_speed: float
    degree_combination: int
    eps: float
    tol: float
    annular: bool
    component_areas: list = field(default_factory=list)


def annularity_verdict(u: VectorField2, tol: float, eps: float,
                       mask: DomainMask | None = None):
    """Count the holes of the support from the velocity alone.

    Builds the eps-retracted domain, certifies the absence of stagnation
    points on its closure and the nonvanishing tangential component on each
    boundary piece, computes all winding numbers, and solves the degree
    identity 0 = 1 - n.  Returns (n, report).
    """
    if mask is None:
        mask = support_mask(u, tol)
    h = u.grid.h
    if eps <= 2.0 * h:
        raise ValueError("retraction width must exceed 2h")
    closure = mask.inside & (mask.distance.values >= eps)
    if not closure.any():
        raise ValueError("retracted domain is empty; decrease eps")
    speeds = np.hypot(u.ux, u.uy)[closure]
    min_speed = float(speeds.min())
    if min_speed <= tol:
        raise StagnationPointError(
            f"velocity magnitude {min_speed:.3e} <= tol inside the retracted domain"
        )
    retr = mask.retract(eps)

    windings = []
    min_taus = []
    for idx, comp in enumerate(retr.components):
        ok, m = tangential_nonvanishing(u, comp)
        min_taus.append(m)
        if not ok:
            raise HypothesisViolationError(
                f"tangential component of u vanishes on retracted component {idx}",
                location=tuple(comp.vertices[int(np.argmin(np.abs(
                    np.sum(u.sample(comp.vertices) * comp.tangents(), axis=1))))]),
            )
        windings.append(winding_number(u, comp))

    n = len(retr.components) - 1
    combo = windings[0] - sum(windings[1:])
    report = AnnularityReport(
        n=n,
        windings=windings,
        min_u_tau=min_taus,
        min_speed=min_speed,
        degree_combination=combo,
        eps=eps,
        tol=tol,
        annular=(n == 1 and combo == 0 and all(w == 1 for w in windings)),
        component_areas=[abs(c.enclosed_area()) for c in retr.components],
    )
    return n, report
