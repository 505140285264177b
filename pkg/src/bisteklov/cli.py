"""Command-line entry point: ``bisteklov <subcommand> [flags]``.

Every subcommand writes CSV (17 significant digits, header row) and/or one
JSON object ``{"meta": {...}, "data": ...}`` to ``--out`` or stdout. A flat
``key=value`` file given with ``--config`` supplies defaults that explicit
flags override. Relative output paths are resolved against ``OUTPUT_DIR``
when that variable is set.

Exit status: 0 on success, 2 when a verdict fails (incompatible data, a
failed Weyl fit or branch check), 1 on any error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .assembly import (
    Geometry,
    assemble_boundary_mass,
    assemble_Qsigma,
    disk_mode_basis,
    square_basis,
)
from .ball import ball_spectrum
from .branches import check_lipschitz, check_monotone, limit_check, parse_grid, sweep
from .core import ConfigurationError, Problem, SpectralParameter, fmt
from .dirichlet import (
    BoundaryFunction,
    EdgeFunction,
    HarmonicModes,
    IncompatibleDataError,
    SampledCircle,
    compat_residual,
    solve_dirichlet,
)
from .eigensolver import solve_geometry
from .weyl import ball_values, compare, fit_power_law, predicted

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_ERROR, EXIT_VERDICT = 0, 1, 2


class CliError(Exception):
    """User-facing failure mapped to exit status 1."""


# ---------------------------------------------------------------------------
# output plumbing


class Output:
    """Collects the CSV text and JSON payload of one run and writes them."""

    def __init__(self, args: argparse.Namespace, default_format: str):
        self.args = args
        self.format = args.format or default_format
        self.csv_text: str | None = None
        self.data = None

    def _config_echo(self) -> dict:
        skip = {"func", "config", "out", "format"}
        echo = {}
        for k, v in sorted(vars(self.args).items()):
            if k in skip:
                continue
            echo[k] = v if isinstance(v, (int, float, str, bool, type(None))) else str(v)
        return echo

    def json_text(self) -> str:
        doc = {"meta": {"version": __version__, "subcommand": self.args.command, "config": self._config_echo()},
               "data": self.data}
        return json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n"

    def write(self) -> list[Path]:
        want_csv = self.format in ("csv", "both") and self.csv_text is not None
        want_json = self.format in ("json", "both") or self.csv_text is None
        out = self.args.out
        written: list[Path] = []
        if out in (None, "-"):
            if want_csv:
                sys.stdout.write(self.csv_text)
            if want_json:
                sys.stdout.write(self.json_text())
            return written
        path = resolve_output(out)
        path.parent.mkdir(parents=True, exist_ok=True)
        if want_csv:
            path.write_text(self.csv_text)
            written.append(path)
            if want_json:
                side = path.with_suffix(".json")
                side.write_text(self.json_text())
                written.append(side)
        else:
            path.write_text(self.json_text())
            written.append(path)
        return written


def resolve_output(out: str) -> Path:
    p = Path(out)
    base = os.environ.get("OUTPUT_DIR")
    if base and not p.is_absolute():
        p = Path(base) / p
    return p


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _csv(header: list[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def _floats(values) -> list:
    return [None if not np.isfinite(v) else float(v) for v in np.asarray(values, dtype=float).ravel()]


# ---------------------------------------------------------------------------
# boundary data specs


def _edge(func, name) -> EdgeFunction:
    return EdgeFunction(func, name=name)


def parse_boundary_spec(spec: str, geometry: Geometry) -> BoundaryFunction:
    """Boundary data from a spec string.

    ``zero``, ``const:V``, ``coord:x1|x2``, ``normal:1|2`` work on both
    geometries; ``modes:l,harmonic,value;...`` (harmonic c/s or 0/1) and
    ``file:PATH`` (CSV with columns theta,value at equispaced angles) are
    disk-only.
    """
    kind, _, rest = spec.partition(":")
    kind = kind.strip().lower()
    disk = geometry is Geometry.DISK
    if kind == "zero":
        return HarmonicModes({}) if disk else _edge(lambda x, y, nx, ny: 0.0 * x, spec)
    if kind == "const":
        c = float(rest)
        return HarmonicModes({(0, "c"): c}) if disk else _edge(lambda x, y, nx, ny: c + 0.0 * x, spec)
    if kind in ("coord", "normal"):
        idx = rest.strip().lstrip("x")
        if idx not in ("1", "2"):
            raise CliError(f"bad component in {spec!r}; use 1 or 2")
        if disk:
            # on the unit circle x = nu = (cos t, sin t)
            return HarmonicModes({(1, "c" if idx == "1" else "s"): 1.0})
        if kind == "coord":
            return _edge((lambda x, y, nx, ny: x) if idx == "1" else (lambda x, y, nx, ny: y), spec)
        return _edge((lambda x, y, nx, ny: nx) if idx == "1" else (lambda x, y, nx, ny: ny), spec)
    if kind == "modes":
        if not disk:
            raise CliError("modes: data are defined on the disk only")
        coeffs = {}
        for item in filter(None, (s.strip() for s in rest.split(";"))):
            parts = [p.strip() for p in item.split(",")]
            if len(parts) != 3:
                raise CliError(f"mode entry {item!r} must be l,harmonic,value")
            l, h, v = int(parts[0]), parts[1].lower(), float(parts[2])
            h = {"0": "c", "1": "s", "cos": "c", "sin": "s"}.get(h, h)
            coeffs[(l, h)] = coeffs.get((l, h), 0.0) + v
        try:
            return HarmonicModes(coeffs)
        except ValueError as exc:
            raise CliError(str(exc)) from exc
    if kind == "file":
        if not disk:
            raise CliError("file: data are supported on the disk only")
        path = Path(rest)
        try:
            rows = list(csv.DictReader(path.read_text().splitlines()))
            theta = np.array([float(r["theta"]) for r in rows])
            vals = np.array([float(r["value"]) for r in rows])
        except (OSError, KeyError, ValueError) as exc:
            raise CliError(f"cannot read boundary samples from {path}: {exc}") from exc
        order = np.argsort(theta)
        theta, vals = theta[order], vals[order]
        n = theta.size
        expect = theta[0] + 2 * np.pi * np.arange(n) / n
        if n < 4 or np.abs(theta - expect).max() > 1e-9 * n or abs(theta[0]) > 1e-12:
            raise CliError("boundary samples must sit at equispaced angles 2 pi k / n starting at 0")
        return SampledCircle(vals)
    raise CliError(f"unknown boundary spec {spec!r}")


# ---------------------------------------------------------------------------
# subcommands


def _param(problem: Problem, value) -> SpectralParameter:
    if problem in (Problem.BSM, Problem.BSL):
        if value is None:
            raise CliError(f"--param is required for {problem.value}")
        return SpectralParameter(problem, float(value))
    return SpectralParameter(problem)


def cmd_ball_spectrum(args) -> int:
    problem = Problem.parse(args.problem)
    spec = ball_spectrum(args.dim, _param(problem, args.param), args.lmax)
    out = Output(args, "csv")
    out.csv_text = spec.to_csv()
    out.data = {"values": _floats(spec.values), "multiplicity": spec.multiplicity_column(), **spec.sidecar()}
    out.write()
    return EXIT_OK


def cmd_solve(args) -> int:
    problem = Problem.parse(args.problem)
    b = "auto" if args.b == "auto" else float(args.b)
    rep = solve_geometry(args.geometry, _param(problem, args.param), args.sigma, args.lmax, args.K,
                         args.degree, b=b, threads=args.threads)
    out = Output(args, "both")
    out.csv_text = rep.spectrum.to_csv()
    out.data = {
        "values": _floats(rep.values),
        "multiplicity": rep.spectrum.multiplicity_column(),
        "j0": rep.spectrum.j0,
        "b_used": rep.b_used,
        "discarded_kernel_dim": rep.discarded_kernel_dim,
        "kernel_tol": rep.kernel_tol,
        "max_residual": float(rep.residuals.max()) if rep.residuals.size else 0.0,
        "basis_size": rep.total_size,
    }
    out.write()
    return EXIT_OK


def cmd_branch_trace(args) -> int:
    grid = parse_grid(args.grid)
    table = sweep(args.problem, args.geometry, args.sigma, grid, args.jmax, source=args.source, N=args.dim,
                  l_max=args.lmax, K=args.K, degree=args.degree, threads=args.threads)
    view = args.view
    mat, labels, targets = table.view(view)
    header = ["param", "j", "value", "source"] + (["branch"] if view == "continued" else [])
    with_targets = args.targets == "auto" and targets is not None
    if with_targets:
        header.append("target")
    rows = []
    for i, row in enumerate(table.long_rows(view)):
        rows.append(row + ([float(targets[i // grid.size])] if with_targets else []))
    out = Output(args, "csv")
    out.csv_text = _csv(header, rows)
    mono = check_monotone(table, view)
    checks = {"monotone": {str(r.label): r.ok for r in mono}}
    if table.problem is Problem.BSM and grid.max() <= -1.0:
        checks["lipschitz_delta_1"] = {str(r.label): r.ok for r in check_lipschitz(table, 1.0, view)}
    if grid.min() <= -1e6 and with_targets:
        checks["limit"] = {str(r.label): {"decade_gaps": list(r.decade_gaps), "decreasing": r.decreasing,
                                          "persistent": r.persistent}
                           for r in limit_check(table, None, view)}
    out.data = {"grid": _floats(grid), "labels": [str(x) for x in labels], "values": [_floats(r) for r in mat],
                "targets": None if targets is None else _floats(targets),
                "poles": [[str(a), float(p)] for a, p in table.poles], "checks": checks}
    if args.figure:
        from .plotting import plot_branches

        out.data["figure"] = str(plot_branches(table, resolve_output(args.figure), view))
    out.write()
    ok = all(mono_r.ok for mono_r in mono) and all(checks.get("lipschitz_delta_1", {}).values() or [True])
    return EXIT_OK if ok else EXIT_VERDICT


def _eval_points(args, geometry: Geometry) -> tuple[np.ndarray, np.ndarray, np.ndarray, list]:
    """Interior points (x, y), the coordinates echoed in the CSV, and their names."""
    if args.eval:
        pts = []
        for item in filter(None, (s.strip() for s in args.eval.split(";"))):
            try:
                a, b = (float(v) for v in item.split(","))
            except ValueError as exc:
                raise CliError(f"bad evaluation point {item!r}") from exc
            pts.append((a, b))
        pts = np.array(pts, dtype=float)
    else:
        rng = np.random.default_rng(args.seed)
        if geometry is Geometry.DISK:
            pts = np.column_stack([np.sqrt(rng.uniform(0, 1, 10)), rng.uniform(0, 2 * np.pi, 10)])
        else:
            pts = rng.uniform(0, 1, (10, 2))
    if geometry is Geometry.DISK:
        r, th = pts[:, 0], pts[:, 1]
        if np.any(r > 1 + 1e-12) or np.any(r < 0):
            raise CliError("evaluation radii must lie in [0, 1]")
        return r * np.cos(th), r * np.sin(th), pts, ["r", "theta"]
    if np.any(pts < 0) or np.any(pts > 1):
        raise CliError("square evaluation points must lie in [0, 1]^2")
    return pts[:, 0], pts[:, 1], pts, ["x", "y"]


def _part_json(part) -> dict:
    return {"family": part.family.value, "hat": _floats(part.hat.entries), "weighted": _floats(part.weighted),
            "eigenvalues": _floats(part.values), "member": part.verdict.member}


def cmd_dirichlet_solve(args) -> int:
    geometry = Geometry(args.geometry)
    f = parse_boundary_spec(args.f, geometry)
    g = parse_boundary_spec(args.g, geometry)
    try:
        res = solve_dirichlet(f, g, lam=args.lam, mu=args.mu, l_max=args.lmax, K=args.K, degree=args.degree,
                              forms=args.forms, threads=args.threads)
    except IncompatibleDataError as exc:
        rep = compat_residual(f, g, lam=args.lam, l_max=args.lmax, K=args.K, degree=args.degree)
        out = Output(args, "json")
        out.data = {"error": str(exc), "compat": rep.as_dict()}
        out.format = "json"
        out.write()
        return EXIT_VERDICT
    x, y, pts, names = _eval_points(args, geometry)
    cols = [res.form_i, res.form_ii]
    header = names + [f"u_form_{s.form}" for s in cols if s is not None]
    evals = [s.evaluate(x, y) for s in cols if s is not None]
    rows = [[float(pts[i, 0]), float(pts[i, 1])] + [float(e[i]) for e in evals] for i in range(x.size)]
    out = Output(args, "both")
    out.csv_text = _csv(header, rows)
    out.data = {
        "compat": res.compat.as_dict(),
        "forms": {s.form: [_part_json(p) for p in s.parts] for s in cols if s is not None},
        "evaluations": {"header": header, "rows": rows},
    }
    if geometry is Geometry.DISK:
        modes = {}
        for s in cols:
            if s is None:
                continue
            for key, (pb, c) in s.field.parts.items():
                l, par = pb.mode
                modes.setdefault(s.form, {})[f"{l}{par}"] = _floats(c)
        out.data["radial_coefficients"] = modes
    out.write()
    return EXIT_OK


def cmd_trace_check(args) -> int:
    geometry = Geometry(args.geometry)
    f = parse_boundary_spec(args.f, geometry)
    g = parse_boundary_spec(args.g, geometry)
    rep = compat_residual(f, g, lam=args.lam, l_max=args.lmax, K=args.K, degree=args.degree, threads=args.threads)
    out = Output(args, "json")
    out.data = rep.as_dict()
    out.write()
    return EXIT_OK if rep.compatible else EXIT_VERDICT


def cmd_weyl_check(args) -> int:
    problem = Problem.parse(args.problem)
    param = args.param
    if problem in (Problem.BSM, Problem.BSL) and param is None:
        param = -10.0
    vals = ball_values(problem, args.dim, args.J, param)
    fit = fit_power_law(vals, args.J)
    pred = predicted(problem, args.dim)
    cmp_ = compare(fit, pred, args.tol_exp, args.tol_const)
    out = Output(args, "json")
    out.data = {"problem": problem.value, "N": args.dim, "J": args.J, "param": param, **cmp_.as_dict()}
    if args.figure:
        from .plotting import plot_weyl

        out.data["figure"] = str(plot_weyl(vals, fit, pred, resolve_output(args.figure)))
    out.write()
    return EXIT_OK if cmp_.passed else EXIT_VERDICT


def cmd_assemble(args) -> int:
    if args.geometry == "disk":
        basis = disk_mode_basis(args.mode, args.degree, args.parity)
    else:
        basis = square_basis(args.degree)
    mats = {"Q": assemble_Qsigma(basis, args.sigma), "M0": assemble_boundary_mass(basis, 0),
            "M1": assemble_boundary_mass(basis, 1)}
    names = list(mats) if args.matrix == "all" else [args.matrix]
    rows = [[name, i, j, float(mats[name][i, j])] for name in names
            for i in range(basis.size) for j in range(basis.size)]
    out = Output(args, "csv")
    out.csv_text = _csv(["matrix", "row", "col", "value"], rows)
    out.data = {name: [_floats(r) for r in mats[name]] for name in names}
    out.write()
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", default=None, help="output file (default: stdout)")
    p.add_argument("--format", choices=("csv", "json", "both"), default=None,
                   help="csv, json, or both (CSV at --out plus a .json sidecar)")
    p.add_argument("--config", default=None, help="flat key=value file of defaults")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)


def _geometry_flags(p, lmax=10, K=4, degree=6) -> None:
    p.add_argument("--geometry", choices=("disk", "square"), default="disk")
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--lmax", type=int, default=lmax)
    p.add_argument("--K", type=int, default=K, help="radial order per disk mode")
    p.add_argument("--degree", type=int, default=degree, help="Legendre degree on the square")


PROBLEMS = ("bsm", "bsl", "dbs", "nbs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bisteklov", description="Biharmonic Steklov spectra and Dirichlet series")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ball-spectrum", help="closed-form spectrum on the unit ball")
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--problem", choices=PROBLEMS, required=True)
    p.add_argument("--param", type=float, default=None)
    p.add_argument("--lmax", type=int, default=10)
    _common(p)
    p.set_defaults(func=cmd_ball_spectrum)

    p = sub.add_parser("solve", help="Galerkin spectrum on the disk or square")
    p.add_argument("--problem", choices=PROBLEMS, required=True)
    p.add_argument("--param", type=float, default=None)
    p.add_argument("--b", default="auto", help="shift: auto or a non-negative number")
    _geometry_flags(p)
    _common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("branch-trace", help="eigenvalue branches over a parameter grid")
    p.add_argument("--problem", choices=("bsm", "bsl"), required=True)
    p.add_argument("--grid", required=True, help="a:b:steps or a:b:steps:log")
    p.add_argument("--jmax", type=int, default=5)
    p.add_argument("--targets", choices=("auto", "none"), default="auto")
    p.add_argument("--source", choices=("analytic", "galerkin"), default="analytic")
    p.add_argument("--view", choices=("sorted", "continued"), default="sorted")
    p.add_argument("--dim", type=int, default=2, help="ball dimension for analytic branches")
    p.add_argument("--figure", default=None, help="also render the branches to this image file")
    _geometry_flags(p, K=2)
    _common(p)
    p.set_defaults(func=cmd_branch_trace)

    for name, func, helptext in (
        ("dirichlet-solve", cmd_dirichlet_solve, "biharmonic Dirichlet problem by Steklov series"),
        ("trace-check", cmd_trace_check, "compatibility test for Dirichlet data"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--f", required=True, help="trace data spec")
        p.add_argument("--g", required=True, help="normal-derivative data spec")
        p.add_argument("--lambda", dest="lam", type=float, default=-1.0)
        p.add_argument("--mu", type=float, default=-1.0)
        p.add_argument("--geometry", choices=("disk", "square"), default="disk")
        p.add_argument("--lmax", type=int, default=None)
        p.add_argument("--K", type=int, default=1)
        p.add_argument("--degree", type=int, default=6)
        if name == "dirichlet-solve":
            p.add_argument("--eval", default=None, help='"r,theta;..." (disk) or "x,y;..." (square)')
            p.add_argument("--forms", choices=("i", "ii", "both"), default="both")
        _common(p)
        p.set_defaults(func=func)

    p = sub.add_parser("weyl-check", help="power-law fit of analytic ball spectra")
    p.add_argument("--problem", choices=PROBLEMS, required=True)
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--J", type=int, default=10_000)
    p.add_argument("--param", type=float, default=None)
    p.add_argument("--tol-exp", dest="tol_exp", type=float, default=0.005)
    p.add_argument("--tol-const", dest="tol_const", type=float, default=0.02)
    p.add_argument("--figure", default=None, help="also render a log-log plot to this image file")
    _common(p)
    p.set_defaults(func=cmd_weyl_check)

    p = sub.add_parser("assemble", help="dump Galerkin matrices (debug)")
    p.add_argument("--geometry", choices=("disk", "square"), default="disk")
    p.add_argument("--mode", type=int, default=0)
    p.add_argument("--parity", choices=("c", "s"), default="c")
    p.add_argument("--degree", type=int, default=2, help="radial order K (disk) or Legendre degree (square)")
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--matrix", choices=("Q", "M0", "M1", "all"), default="all")
    _common(p)
    p.set_defaults(func=cmd_assemble)
    return parser


def read_config(path: str) -> dict[str, str]:
    """Flat key=value lines; '#' starts a comment; dashes in keys map to underscores."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise CliError(f"cannot read config {path}: {exc}") from exc
    for n, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CliError(f"{path}:{n}: expected key=value")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k.lstrip("-").replace("-", "_")] = v
    return out


def _subparser(parser: argparse.ArgumentParser, name: str) -> argparse.ArgumentParser:
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[name]
    raise KeyError(name)


# flags whose values may begin with '-' (negative parameters and grids)
_SIGNED = ("--grid", "--param", "--lambda", "--mu", "--eval", "--sigma", "--b")


def _glue_signed(argv: list[str]) -> list[str]:
    out, i = [], 0
    while i < len(argv):
        tok = argv[i]
        if tok in _SIGNED and i + 1 < len(argv) and argv[i + 1].startswith("-"):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


def parse_args(argv: list[str] | None = None) -> argparse.Namespace:
    argv = _glue_signed(list(sys.argv[1:] if argv is None else argv))
    parser = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", default=None)
    known_pre, rest = pre.parse_known_args(argv)
    command = next((tok for tok in rest if not tok.startswith("-")), None)
    if known_pre.config and command is not None:
        cfg = read_config(known_pre.config)
        try:
            sp = _subparser(parser, command)
        except KeyError as exc:
            raise CliError(f"unknown subcommand {command!r}") from exc
        known = {a.dest: a for a in sp._actions}
        unknown = sorted(set(cfg) - set(known))
        if unknown:
            raise CliError(f"unknown config keys: {', '.join(unknown)}")
        for act in sp._actions:
            if act.dest in cfg:
                act.required = False
                act.default = cfg[act.dest]
        args = parser.parse_args(argv)
        # string defaults are not converted by argparse when the flag is absent
        for k in cfg:
            act = known[k]
            val = getattr(args, k)
            if isinstance(val, str) and act.type is not None:
                try:
                    val = act.type(val)
                except ValueError as exc:
                    raise CliError(f"config value {k}={val!r}: {exc}") from exc
                setattr(args, k, val)
            if act.choices is not None and val not in act.choices:
                raise CliError(f"config value {k}={val!r} not in {sorted(act.choices)}")
        return args
    return parser.parse_args(argv)


def main(argv: list[str] | None = None) -> int:
    try:
        args = parse_args(argv)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except SystemExit as exc:  # argparse usage errors and --help/--version
        return EXIT_OK if exc.code in (0, None) else EXIT_ERROR
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (CliError, ConfigurationError, ValueError, TypeError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
