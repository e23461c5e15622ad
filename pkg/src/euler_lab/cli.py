"""Command-line interface: one executable exposing every pipeline stage.

Exit codes: 0 success, 1 tolerance failure, 2 usage error, 3 hypothesis
violation (stagnation point, wrong topology, ...) with a structured reason
in the JSON output.  Every JSON document embeds the full run configuration.
Figures are rendered alongside the delimited outputs on the report path
(disable with --no-figures).
"""

import argparse
import json
import os
import sys
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import fieldio
from .domain import support_mask, disk_mask
from .errors import (
    EulerLabError,
    StagnationPointError,
    UnsupportedTopologyError,
    HypothesisViolationError,
)
from .euler import steady_residual, stream_function
from .flows import example_flow, example_profile, pressure_radial, radial_scalar_field
from .grid import make_grid
from .moving_plane import symmetry_verdict
from .nonlinearity import endpoint_regularity, extract_f, mean_zero_check
from .singular import (
    SingularPotential,
    assemble,
    comparison_profile,
    principal_eigenpair,
    psi_fields,
    resolved_interior,
)
from .topology import annularity_verdict

EXIT_OK = 0
EXIT_TOLERANCE = 1
EXIT_USAGE = 2
EXIT_HYPOTHESIS = 3


@dataclass
class RunConfig:
    command: str
    grid: dict | None = None
    support_tol: float = 1e-6
    sweep_tol_factor: float = 10.0
    eigen_residual: float = 1e-8
    eps: float | None = None
    levels: int = 128
    directions: int = 8
    threads: int = 0
    out: str | None = None
    inputs: dict = field(default_factory=dict)

    def doc(self):
        return asdict(self)


def _parse_grid(spec):
    try:
        x0, y0, h, nx, ny = spec.split(",")
        return make_grid(float(x0), float(y0), float(h), int(nx), int(ny))
    except (ValueError, TypeError) as exc:
        raise argparse.ArgumentTypeError(f"bad grid spec {spec!r}: {exc}") from exc


class _ExprParser:
    """constants, `d`, + - * /, parentheses, unary minus."""

    def __init__(self, text):
        self.text = text
        self.pos = 0

    def _skip(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def _peek(self):
        self._skip()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def parse(self, d):
        val = self._expr(d)
        self._skip()
        if self.pos != len(self.text):
            raise ValueError(f"trailing junk in expression at {self.pos}")
        return val

    def _expr(self, d):
        val = self._term(d)
        while self._peek() in "+-":
            op = self.text[self.pos]
            self.pos += 1
            rhs = self._term(d)
            val = val + rhs if op == "+" else val - rhs
        return val

    def _term(self, d):
        val = self._factor(d)
        while self._peek() in "*/":
            op = self.text[self.pos]
            self.pos += 1
            rhs = self._factor(d)
            val = val * rhs if op == "*" else val / rhs
        return val

    def _factor(self, d):
        ch = self._peek()
        if ch == "-":
            self.pos += 1
            return -self._factor(d)
        if ch == "+":
            self.pos += 1
            return self._factor(d)
        if ch == "(":
            self.pos += 1
            val = self._expr(d)
            if self._peek() != ")":
                raise ValueError("unbalanced parentheses")
            self.pos += 1
            return val
        if ch == "d":
            self.pos += 1
            return d
        start = self.pos
        while self._peek() and (self.text[self.pos].isdigit() or self.text[self.pos] in ".eE"):
            self.pos += 1
            if self.text[self.pos - 1] in "eE" and self._peek() in "+-":
                self.pos += 1
        if start == self.pos:
            raise ValueError(f"cannot parse expression at position {start}")
        return float(self.text[start:self.pos])


def potential_from_expression(mask, expr):
    return SingularPotential.from_distance(mask, lambda d: _ExprParser(expr).parse(d))


def _parse_subdomain(mask, spec):
    if spec == "all":
        return resolved_interior(mask)
    if spec.startswith("ball:"):
        cx, cy, r = (float(t) for t in spec[5:].split(","))
        x, y = mask.grid.meshgrid()
        return resolved_interior(mask) & (np.hypot(x - cx, y - cy) < r)
    raise argparse.ArgumentTypeError(f"unknown subdomain spec {spec!r}")


def _outdir(args):
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    return out


def _emit(path, doc):
    fieldio.write_json(path, doc)
    print(path)


def cmd_build_example(args, config):
    grid = args.grid or make_grid(-2.2, -2.2, 1.0 / 64, 283, 283)
    config.grid = fieldio._grid_doc(grid)
    u, phi, pair = example_flow(grid)
    mask = support_mask(u, args.tol)
    out = _outdir(args)
    fieldio.write_field(u, os.path.join(out, "u.json"))
    fieldio.write_field(phi, os.path.join(out, "phi.json"))
    fieldio.write_mask(mask, os.path.join(out, "mask.json"))
    pressure = radial_scalar_field(pressure_radial(example_profile()), pair.center, grid)
    fieldio.write_field(pressure, os.path.join(out, "p.json"))
    meta = {
        "config": config.doc(),
        "center": list(pair.center),
        "radii": [pair.r1, pair.r2],
        "f_endpoints": [float(pair.f_of_s(0.0)), float(pair.f_of_s(1.0))],
        "stream_extension": "1 inside the hole, 0 outside the support",
        "support_tol_note": "support threshold is a caller decision; "
                            f"this build used {args.tol}",
    }
    _emit(os.path.join(out, "meta.json"), meta)
    return EXIT_OK


def cmd_verify_steady(args, config):
    u = fieldio.read_field(args.u)
    mask = fieldio.read_mask(args.mask) if args.mask else support_mask(u, args.tol)
    if args.p:
        p = fieldio.read_field(args.p)
    else:
        p = radial_scalar_field(lambda r: np.zeros_like(r), (0.0, 0.0), u.grid)
    report = steady_residual(u, p, mask)
    normalized = report.normalized(u, p if args.p else None)
    doc = {
        "config": config.doc(),
        "residuals": asdict(report),
        "normalized": normalized,
        "tolerance": args.check_tol,
        "passed": all(v < args.check_tol for v in normalized.values()),
    }
    out = os.path.join(_outdir(args), "steady_report.json")
    _emit(out, doc)
    return EXIT_OK if doc["passed"] else EXIT_TOLERANCE


def cmd_extract_f(args, config):
    phi = fieldio.read_field(args.phi)
    mask = fieldio.read_mask(args.mask)
    nl = extract_f(phi, mask, args.levels)
    rates = endpoint_regularity(nl) if args.levels >= 160 else None
    mz = mean_zero_check(nl, phi, mask)
    out = _outdir(args)
    fieldio.write_csv(
        os.path.join(out, "f.csv"),
        ["c", "f", "spread"],
        zip(nl.levels.tolist(), nl.f.tolist(), nl.spread.tolist()),
    )
    print(os.path.join(out, "f.csv"))
    doc = {
        "config": config.doc(),
        "endpoint_rates": rates,
        "mean_zero_normalized": mz,
        "f0": float(nl.f[0]),
        "f1": float(nl.f[-1]),
        "support_tol_note": "mask thresholds were chosen by the caller",
    }
    _emit(os.path.join(out, "f_diagnostics.json"), doc)
    return EXIT_OK


def cmd_topology(args, config):
    u = fieldio.read_field(args.u)
    eps = args.eps if args.eps is not None else 4.0 * u.grid.h
    config.eps = eps
    mask = fieldio.read_mask(args.mask) if args.mask else None
    n, rep = annularity_verdict(u, args.tol, eps, mask=mask)
    doc = {
        "config": config.doc(),
        "n": n,
        "windings": rep.windings,
        "min_u_tau": rep.min_u_tau,
        "min_speed": rep.min_speed,
        "degree_combination": rep.degree_combination,
        "verdict": "annular" if rep.annular else f"{n} holes",
    }
    _emit(os.path.join(_outdir(args), "topology.json"), doc)
    return EXIT_OK


def cmd_eigen(args, config):
    mask = fieldio.read_mask(args.mask)
    if args.c and os.path.exists(args.c):
        cfield = fieldio.read_field(args.c)
        d = mask.distance.values
        ok = mask.inside & (d > 0)
        bound = float(np.abs(cfield.values[ok] * d[ok]).max()) if ok.any() else 0.0
        c = SingularPotential(cfield, bound)
    elif args.c:
        c = potential_from_expression(mask, args.c)
    else:
        c = None
    sub = _parse_subdomain(mask, args.subdomain)
    op = assemble(mask, sub, c)
    lam, phi1 = principal_eigenpair(op)
    vec = phi1.values.ravel()[op.dof_flat]
    res = float(np.linalg.norm(op.matrix @ vec - lam * vec) / np.linalg.norm(vec))
    if args.export_matrix:
        fieldio.write_matrix_coo(op.matrix, args.export_matrix)
        print(args.export_matrix)
    doc = {
        "config": config.doc(),
        "lambda1": lam,
        "residual": res,
        "positivity": lam > 0,
        "n_dof": op.n_dof,
        "c_bound": c.bound if c else 0.0,
    }
    _emit(os.path.join(_outdir(args), "eigen.json"), doc)
    return EXIT_OK


def cmd_comparison(args, config):
    prof = comparison_profile(args.m, args.C, args.r)
    ts = np.linspace(prof.r0 * (1 + 1e-9), prof.r * (1 - 1e-7), 10000)
    res1 = prof.radial_inequality_residual(ts)
    doc = {
        "config": config.doc(),
        "m": args.m,
        "C": args.C,
        "r": args.r,
        "r0": prof.r0,
        "rho_at_r": float(prof.rho(prof.r)),
        "drho_at_r": float(prof.drho(prof.r)),
        "ddrho_at_r": float(prof.ddrho(prof.r)),
        "radial_residual_max": float(res1.max()),
        "radial_residual_min": float(res1.min()),
        "induced_c_limit_sample": float(prof.induced_c(prof.r * (1 - 1e-6))),
    }
    _emit(os.path.join(_outdir(args), "comparison.json"), doc)
    return EXIT_OK


def cmd_moving_plane(args, config):
    phi = fieldio.read_field(args.phi)
    mask = fieldio.read_mask(args.mask)
    rep = symmetry_verdict(phi, mask, n_directions=args.dirs,
                           tol_factor=args.sweep_tol, max_workers=config.threads)
    out = _outdir(args)
    doc = _symmetry_doc(rep, config)
    if args.history_csv:
        rows = []
        for st in rep.sweeps:
            ang = float(np.arctan2(st.direction[1], st.direction[0]))
            for lam, mw in st.w_min_history:
                rows.append((ang, lam, mw))
        fieldio.write_csv(os.path.join(out, "w_min_history.csv"),
                          ["angle", "lambda", "min_w"], rows)
        print(os.path.join(out, "w_min_history.csv"))
    _emit(os.path.join(out, "symmetry.json"), doc)
    return EXIT_OK if rep.verdict == "radial" else EXIT_TOLERANCE


def _symmetry_doc(rep, config):
    return {
        "config": config.doc(),
        "verdict": rep.verdict,
        "center": None if rep.center is None else [float(c) for c in rep.center],
        "fit_residual": rep.fit_residual,
        "monotone": rep.monotone,
        "failed_direction": None if rep.failed_direction is None
        else [float(c) for c in rep.failed_direction],
        "sweeps": [
            {
                "direction": [float(c) for c in st.direction],
                "lambda_bar": st.lambda_bar,
                "lambda_star": st.lambda_star,
                "event": st.event,
                "violated": st.violated,
                "w_flat": st.w_flat,
                "corner_second_diff": st.corner_second_diff,
                "borderline_normals": st.borderline_normals,
            }
            for st in rep.sweeps
        ],
    }


def cmd_report(args, config):
    from . import plots

    t_start = time.time()
    u = fieldio.read_field(args.u)
    mask = fieldio.read_mask(args.mask) if args.mask else None
    eps = args.eps if args.eps is not None else 4.0 * u.grid.h
    config.eps = eps
    out = _outdir(args)
    doc = {"config": config.doc(), "support_tol_note":
           "the support threshold tol has no counterpart in the continuous "
           "statement; every verdict below depends on it"}

    def fail(code, reason, detail):
        doc["verdict"] = "failed"
        doc["reason"] = reason
        doc["detail"] = detail
        _emit(os.path.join(out, "report.json"), doc)
        return code

    try:
        if mask is None:
            mask = support_mask(u, args.tol)
        n, topo = annularity_verdict(u, args.tol, eps, mask=mask)
        doc["topology"] = {
            "n": n, "windings": topo.windings, "min_u_tau": topo.min_u_tau,
            "degree_combination": topo.degree_combination, "annular": topo.annular,
        }
        if n != 1 or not topo.annular:
            return fail(EXIT_HYPOTHESIS, "not-annular", f"detected n = {n}")
    except StagnationPointError as exc:
        return fail(EXIT_HYPOTHESIS, "stagnation-point", str(exc))
    except (UnsupportedTopologyError, HypothesisViolationError) as exc:
        return fail(EXIT_HYPOTHESIS, "hypothesis-violation", str(exc))

    try:
        phi, info = stream_function(u, mask, details=True)
        doc["stream"] = info
        nl = extract_f(phi, mask, args.levels)
        rates = endpoint_regularity(nl) if args.levels >= 160 else None
        mz = mean_zero_check(nl, phi, mask)
        doc["nonlinearity"] = {
            "levels": args.levels,
            "endpoint_rates": rates,
            "mean_zero_normalized": mz,
            "f0": float(nl.f[0]),
            "f1": float(nl.f[-1]),
            "max_spread": float(nl.spread.max()),
        }
        fieldio.write_csv(os.path.join(out, "f.csv"), ["c", "f", "spread"],
                          zip(nl.levels.tolist(), nl.f.tolist(), nl.spread.tolist()))
        rep = symmetry_verdict(phi, mask, n_directions=args.dirs,
                               tol_factor=args.sweep_tol, max_workers=config.threads)
        doc["symmetry"] = _symmetry_doc(rep, config)
    except EulerLabError as exc:
        return fail(EXIT_HYPOTHESIS, type(exc).__name__, str(exc))

    if args.figures:
        doc["figures"] = [
            plots.plot_speed(u, mask, os.path.join(out, "speed.png")),
            plots.plot_nonlinearity(nl, os.path.join(out, "nonlinearity.png")),
            plots.plot_sweep_history(rep, os.path.join(out, "sweeps.png")),
            plots.plot_radial_fit(rep, os.path.join(out, "radial_fit.png")),
        ]
    doc["elapsed_seconds"] = time.time() - t_start
    doc["verdict"] = rep.verdict
    if rep.center is not None:
        doc["center"] = [float(c) for c in rep.center]
    _emit(os.path.join(out, "report.json"), doc)
    if rep.verdict != "radial":
        return EXIT_TOLERANCE
    if abs(mz) > args.check_tol:
        return EXIT_TOLERANCE
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="euler-lab",
        description="verification laboratory for compactly supported steady planar flows",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--grid", type=_parse_grid, default=None,
                       help="x0,y0,h,nx,ny")
        p.add_argument("--tol", type=float, default=1e-6,
                       help="support threshold for |u| > tol")
        p.add_argument("--out", default=None, help="output directory")

    p = sub.add_parser("build-example", help="write the explicit annulus flow")
    common(p)

    p = sub.add_parser("verify-steady", help="steadiness residuals of (u, p)")
    common(p)
    p.add_argument("--u", required=True)
    p.add_argument("--p", default=None)
    p.add_argument("--mask", default=None)
    p.add_argument("--check-tol", type=float, default=0.01,
                   help="normalized residual threshold for exit code 0")

    p = sub.add_parser("extract-f", help="level-set extraction of f")
    common(p)
    p.add_argument("--phi", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--levels", type=int, default=128)

    p = sub.add_parser("topology", help="winding numbers and annularity verdict")
    common(p)
    p.add_argument("--u", required=True)
    p.add_argument("--mask", default=None)
    p.add_argument("--eps", type=float, default=None, help="retraction width (default 4h)")

    p = sub.add_parser("eigen", help="principal eigenvalue of -Delta + c")
    common(p)
    p.add_argument("--mask", required=True)
    p.add_argument("--c", default=None, help="field file or expression in d")
    p.add_argument("--subdomain", default="all", help='"all" or "ball:cx,cy,r"')
    p.add_argument("--export-matrix", default=None)

    p = sub.add_parser("comparison", help="barrier profile diagnostics")
    common(p)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--C", type=float, required=True)
    p.add_argument("--r", type=float, required=True)

    p = sub.add_parser("moving-plane", help="plane-sweep symmetry detector")
    common(p)
    p.add_argument("--phi", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--dirs", type=int, default=8)
    p.add_argument("--sweep-tol", type=float, default=10.0,
                   help="sweep tolerance factor (units of h^2 osc)")
    p.add_argument("--history-csv", action="store_true")

    p = sub.add_parser("report", help="full pipeline: support, topology, stream, f, symmetry")
    common(p)
    p.add_argument("--u", required=True)
    p.add_argument("--mask", default=None)
    p.add_argument("--p", default=None)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--levels", type=int, default=192)
    p.add_argument("--dirs", type=int, default=8)
    p.add_argument("--sweep-tol", type=float, default=10.0)
    p.add_argument("--check-tol", type=float, default=0.05)
    p.add_argument("--figures", action="store_true", default=True)
    p.add_argument("--no-figures", dest="figures", action="store_false")
    return parser


_COMMANDS = {
    "build-example": cmd_build_example,
    "verify-steady": cmd_verify_steady,
    "extract-f": cmd_extract_f,
    "topology": cmd_topology,
    "eigen": cmd_eigen,
    "comparison": cmd_comparison,
    "moving-plane": cmd_moving_plane,
    "report": cmd_report,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    threads = int(os.environ.get("EULER_LAB_THREADS", "0") or 0)
    config = RunConfig(
        command=args.command,
        grid=fieldio._grid_doc(args.grid) if getattr(args, "grid", None) else None,
        support_tol=getattr(args, "tol", 1e-6),
        sweep_tol_factor=getattr(args, "sweep_tol", 10.0),
        eps=getattr(args, "eps", None),
        levels=getattr(args, "levels", 128),
        directions=getattr(args, "dirs", 8),
        threads=threads,
        out=getattr(args, "out", None),
        inputs={
            k: getattr(args, k)
            for k in ("u", "p", "phi", "mask")
            if getattr(args, k, None)
        },
    )
    try:
        return _COMMANDS[args.command](args, config)
    except StagnationPointError as exc:
        print(json.dumps({"verdict": "failed", "reason": "stagnation-point",
                          "detail": str(exc), "config": config.doc()}))
        return EXIT_HYPOTHESIS
    except (UnsupportedTopologyError, HypothesisViolationError) as exc:
        print(json.dumps({"verdict": "failed", "reason": "hypothesis-violation",
                          "detail": str(exc), "config": config.doc()}))
        return EXIT_HYPOTHESIS


if __name__ == "__main__":
    sys.exit(main())
