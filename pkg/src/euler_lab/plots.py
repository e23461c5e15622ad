"""Figure rendering for the report pipeline.

Every plotting helper takes computed results and a target path, renders a
single PNG, and returns the path; nothing here feeds back into the
analysis.  The style keeps to matplotlib defaults with a slightly tighter
layout so the figures drop into notes unedited.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_DPI = 150


def _finish(fig, path):
    fig.savefig(path, dpi=_DPI, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_speed(u, mask, path, title="speed and support boundary"):
    fig, ax = plt.subplots(figsize=(5.2, 4.4))
    extent = (u.grid.x0, u.grid.x_max, u.grid.y0, u.grid.y_max)
    mag = np.hypot(u.ux, u.uy)
    im = ax.imshow(mag, origin="lower", extent=extent, cmap="viridis")
    fig.colorbar(im, ax=ax, label="|u|")
    for comp in mask.components:
        v = comp.vertices
        ax.plot(np.append(v[:, 0], v[0, 0]), np.append(v[:, 1], v[0, 1]),
                color="white", lw=0.8)
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_title(title)
    ax.set_aspect("equal")
    return _finish(fig, path)


def plot_nonlinearity(nl, path, reference=None):
    """Extracted f(c) with its per-level spread band; optional closed form."""
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    c, f, s = nl.levels, nl.f, nl.spread
    ax.fill_between(c, f - s, f + s, alpha=0.3, label="mean +- spread")
    ax.plot(c, f, lw=1.2, label="extracted f")
    if reference is not None:
        cs = np.linspace(0, 1, 512)
        ax.plot(cs, reference(cs), "k--", lw=0.8, label="closed form")
    ax.axhline(0.0, color="gray", lw=0.5)
    ax.set_xlabel("level c")
    ax.set_ylabel("f(c)")
    ax.legend(loc="best", fontsize=8)
    ax.set_title("extracted nonlinearity")
    return _finish(fig, path)


def plot_sweep_history(report, path):
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    for st in report.sweeps:
        if len(st.w_min_history):
            ang = np.degrees(np.arctan2(st.direction[1], st.direction[0]))
            ax.plot(st.w_min_history[:, 0], st.w_min_history[:, 1],
                    lw=0.8, label=f"{ang:.0f} deg")
    ax.axhline(0.0, color="gray", lw=0.5)
    ax.set_xlabel("plane offset")
    ax.set_ylabel("min w on cap")
    if len(report.sweeps) <= 8:
        ax.legend(fontsize=7)
    ax.set_title("moving-plane sweeps")
    return _finish(fig, path)


def plot_radial_fit(report, path):
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    if report.profile_r is not None:
        ax.plot(report.profile_r, report.profile_values, lw=1.2)
        ax.set_xlabel("|x - center|")
        ax.set_ylabel("binned stream value")
        res = f"{report.fit_residual:.2e}" if report.fit_residual is not None else "n/a"
        ax.set_title(f"radial profile fit (residual {res})")
    else:
        ax.text(0.5, 0.5, "no radial fit (non-symmetric)", ha="center", va="center")
        ax.set_axis_off()
    return _finish(fig, path)
