"""Command-line front end.

Every subcommand reads a phase file (JSON, see :mod:`hessosc.polyphase`)
where relevant and writes JSON or CSV to stdout or ``--out``.  Exit status is
0 on success, 2 on invalid input and 3 when a quadrature budget is exceeded.

Numerical settings live in :class:`Config`.  They can be given in a flat
``key = value`` file passed with ``--config`` and overridden by the matching
``--key`` flags.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, fields

import numpy as np

from . import decayscan, foldcut, geomschrod, newton, oscquad, vdc
from .bumps import BumpSpec, CutoffSpec
from .polyphase import PhaseFormatError, load_phase

EXIT_OK, EXIT_INPUT, EXIT_BUDGET = 0, 2, 3


@dataclass
class Config:
    tol: float = 1e-8
    max_nodes: int = oscquad.MAX_NODES
    budget: float = math.pi
    scan_budget: float = decayscan.SCAN_BUDGET
    xi_grid: int = 17
    xi_margin: float = 0.5
    refinements: int = 2
    lambda_exp_min: int = 4
    lambda_exp_max: int = 11
    eps_exp_min: int = 2
    eps_exp_max: int = 8
    grid_density: int = 32
    region_margin: float = 0.125
    c_edge: float = 2.0
    j_max: int = 24
    psi_radius: float = 0.5
    threads: int = 1

    @classmethod
    def from_file(cls, path) -> "Config":
        """Read a flat ``key = value`` file; ``#`` starts a comment."""
        with open(path) as fh:
            text = fh.read()
        parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
        parser.optionxform = str
        try:
            parser.read_string("[config]\n" + text)
        except configparser.Error as err:
            raise ValueError(f"malformed config file {path}: {err}") from err
        return cls().updated(dict(parser["config"]))

    def updated(self, values: dict) -> "Config":
        known = {f.name for f in fields(self)}
        out = Config(**{f.name: getattr(self, f.name) for f in fields(self)})
        for key, raw in values.items():
            name = key.replace("-", "_")
            if name not in known:
                raise ValueError(f"unknown config key {key!r}")
            try:
                num = float(raw)
            except (TypeError, ValueError) as err:
                raise ValueError(f"config key {key!r}: cannot parse {raw!r}") from err
            if isinstance(getattr(self, name), int):
                if num != int(num):
                    raise ValueError(f"config key {key!r} must be an integer, got {raw!r}")
                val = int(num)
            else:
                val = num
            setattr(out, name, val)
        return out


def _floats(text: str, n: int | None = None):
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError as err:
        raise ValueError(f"expected comma-separated numbers, got {text!r}") from err
    if n is not None and len(vals) != n:
        raise ValueError(f"expected {n} numbers, got {text!r}")
    return vals


def _write(args, text: str):
    if getattr(args, "out", None):
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _json(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=True) + "\n"


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def _psi(cfg: Config, dim: int = 2):
    return BumpSpec(dim, radius=cfg.psi_radius)


# -- subcommands -------------------------------------------------------------------

def cmd_analyze(args, cfg: Config) -> int:
    P = load_phase(args.phase)
    r = cfg.psi_radius * 4
    report = newton.analyze(P, box=((-r, r), (-r, r)), grid_density=cfg.grid_density,
                            margin=cfg.region_margin)
    _write(args, _json(report))
    return EXIT_OK


def cmd_integrate(args, cfg: Config) -> int:
    P = load_phase(args.phase)
    xi = _floats(args.xi, P.dimension)
    res = oscquad.osc2d(P, xi, args.lam, CutoffSpec(), args.eps, _psi(cfg), tol=cfg.tol,
                        budget=cfg.budget, max_nodes=cfg.max_nodes)
    out = {"lambda": args.lam, "eps": args.eps, "xi": xi}
    out.update(res.to_dict())
    _write(args, _json(out))
    return EXIT_OK


def cmd_expand(args, cfg: Config) -> int:
    P = load_phase(args.phase)
    p = _floats(args.p, P.dimension) if args.p else [0.0] * P.dimension
    res = geomschrod.expansion(P, _psi(cfg, P.dimension), p=p, N=args.N, k=args.k,
                               error_integrals=not args.no_error_integrals)
    _write(args, _json(res.to_dict()))
    return EXIT_OK


def cmd_foldcurve(args, cfg: Config) -> int:
    P = load_phase(args.phase)
    xi = _floats(args.xi, 2)
    s_range = _floats(args.s_range, 2)
    r = cfg.psi_radius
    window = ((-r, r), (-r, r))
    curve = foldcut.trace_curve(P, xi, None, window, tuple(s_range), n_samples=args.samples)
    rows = []
    for b, br in enumerate(curve.branches):
        f2 = foldcut.reduced_f2(br, br.s)
        f2n = foldcut.numeric_f2(br, br.s)
        for i in range(len(br.s)):
            rows.append((b, br.s[i], br.gamma[i, 0], br.gamma[i, 1], br.f[i], br.f1[i],
                         f2[i], f2n[i], br.density[i]))
    header = ("branch", "s", "gamma1", "gamma2", "f", "f1", "f2_formula", "f2_numeric", "dphi_ds")
    _write(args, _csv(header, rows))
    return EXIT_OK


def cmd_vdc(args, cfg: Config) -> int:
    if args.family == "fresnel":
        inst = vdc.fresnel_instance()
    elif args.family == "delta":
        inst = vdc.delta_scaling_instance(args.delta)
    else:
        inst = vdc.cubic_instance(args.alpha)
    ts = np.logspace(math.log10(args.t_min), math.log10(args.t_max), args.t_points)
    rep = vdc.estprop_verify(inst, ts, tol=min(cfg.tol, 1e-10))
    rows = [(r["t"], r["lhs"], r["rhs"], r["ratio"]) for r in rep.rows]
    _write(args, _csv(("t", "lhs", "rhs", "ratio"), rows))
    return EXIT_OK


def cmd_scan(args, cfg: Config) -> int:
    P = load_phase(args.phase)
    lams = [2.0**k for k in range(cfg.lambda_exp_min, cfg.lambda_exp_max + 1)]
    epss = [2.0**-k for k in range(cfg.eps_exp_max, cfg.eps_exp_min - 1, -1)]
    psi = _psi(cfg)
    xi_box = decayscan.default_xi_box(P, psi, cfg.xi_margin)
    recs = decayscan.scan(P, lams, epss, threads=max(cfg.threads, 1), xi_box=xi_box,
                          grid=cfg.xi_grid, refinements=cfg.refinements, psi=psi,
                          budget=cfg.scan_budget, max_nodes=cfg.max_nodes)
    rows = [(r.lam, r.eps, r.xi_star[0], r.xi_star[1], r.sup_val, r.est_error) for r in recs]
    _write(args, _csv(("lambda", "eps", "xi1", "xi2", "absval", "est_error"), rows))
    try:
        fit = decayscan.fit_decay(recs, s_hint=newton.diagonal_class(newton.build_polygon(P))).to_dict()
    except decayscan.FitError as err:
        fit = {"error": str(err)}
    text = _json(fit)
    if args.fit_out:
        with open(args.fit_out, "w") as fh:
            fh.write(text)
    else:
        sys.stderr.write(text)
    return EXIT_OK


def cmd_boxes(args, cfg: Config) -> int:
    P = load_phase(args.phase)
    boxes = decayscan.classify_boxes(P, C_edge=cfg.c_edge, j_max=cfg.j_max, psi=_psi(cfg))
    rows = []
    for b in boxes:
        d = b.to_dict()
        label = d["label"]
        label = "" if label is None else (" ".join(map(str, label)) if isinstance(label, list) else label)
        row = [d["j1"], d["j2"], d["kind"], label, d["norm_exp"],
               "" if d["band"] is None else repr(float(d["band"]))]
        if args.eps is not None:
            row.append(int(b.active(args.eps)))
        rows.append(row)
    header = ["j1", "j2", "kind", "label", "norm_exp", "band"] + (["active"] if args.eps is not None else [])
    _write(args, _csv(header, rows))
    return EXIT_OK


# -- parser --------------------------------------------------------------------------

def _config_parent() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    g = parent.add_argument_group("configuration (flags override --config)")
    g.add_argument("--config", default=argparse.SUPPRESS,
                   help="flat key = value file with the settings below")
    for f in fields(Config):
        default = getattr(Config, f.name)
        g.add_argument("--" + f.name.replace("_", "-"), dest="cfg_" + f.name, default=argparse.SUPPRESS,
                       metavar=f.name.upper(), help=f"(default: {default!r})")
    g.add_argument("--out", default=argparse.SUPPRESS, help="output file (default: stdout)")
    return parent


def build_parser() -> argparse.ArgumentParser:
    parent = _config_parent()
    fmt = argparse.ArgumentDefaultsHelpFormatter
    p = argparse.ArgumentParser(prog="hessosc", description=__doc__.split("\n\n")[0],
                                formatter_class=fmt)
    p.add_argument("--threads", dest="global_threads", type=int, default=None,
                   help="worker threads for every subcommand (same as the subcommand flag)")
    sub = p.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    s = sub.add_parser("analyze", parents=[parent], formatter_class=fmt,
                       help="Newton polygon, edges and fold verdicts (JSON)")
    s.add_argument("--phase", required=True)
    s.set_defaults(func=cmd_analyze)

    s = sub.add_parser("integrate", parents=[parent], formatter_class=fmt,
                       help="cutoff oscillatory integral at one (lambda, eps, xi) (JSON)")
    s.add_argument("--phase", required=True)
    s.add_argument("--lambda", dest="lam", type=float, required=True)
    s.add_argument("--eps", type=float, required=True)
    s.add_argument("--xi", default="0,0", help="comma-separated frequency")
    s.set_defaults(func=cmd_integrate)

    s = sub.add_parser("expand", parents=[parent], formatter_class=fmt,
                       help="stationary-phase coefficients and error integrals (JSON)")
    s.add_argument("--phase", required=True)
    s.add_argument("--p", default=None, help="critical point (default: origin)")
    s.add_argument("--N", type=int, default=2)
    s.add_argument("--k", type=int, default=None, help="interpolation order (default: smallest with 2k > n)")
    s.add_argument("--no-error-integrals", action="store_true")
    s.set_defaults(func=cmd_expand)

    s = sub.add_parser("foldcurve", parents=[parent], formatter_class=fmt,
                       help="fold curve samples with reduced phase data (CSV)")
    s.add_argument("--phase", required=True)
    s.add_argument("--xi", default="0,0")
    s.add_argument("--s-range", default="0.25,1.0", help="range of det Hess along the curve")
    s.add_argument("--samples", type=int, default=129)
    s.set_defaults(func=cmd_foldcurve)

    s = sub.add_parser("vdc-check", parents=[parent], formatter_class=fmt,
                       help="one-dimensional estimate: both sides on a t grid (CSV)")
    s.add_argument("--family", choices=("fresnel", "delta", "cubic"), default="fresnel")
    s.add_argument("--delta", type=float, default=1.0)
    s.add_argument("--alpha", type=float, default=0.05)
    s.add_argument("--t-min", type=float, default=1e-4)
    s.add_argument("--t-max", type=float, default=1.0)
    s.add_argument("--t-points", type=int, default=9)
    s.set_defaults(func=cmd_vdc)

    s = sub.add_parser("scan", parents=[parent], formatter_class=fmt,
                       help="sup over xi on the (lambda, eps) grid (CSV) and power-law fit (JSON)")
    s.add_argument("--phase", required=True)
    s.add_argument("--fit-out", default=None, help="file for the fit JSON (default: stderr)")
    s.set_defaults(func=cmd_scan)

    s = sub.add_parser("boxes", parents=[parent], formatter_class=fmt,
                       help="bi-dyadic box classification (CSV)")
    s.add_argument("--phase", required=True)
    s.add_argument("--eps", type=float, default=None, help="mark boxes active at this eps")
    s.set_defaults(func=cmd_boxes)

    return p


def _resolve_config(args) -> Config:
    cfg = Config.from_file(args.config) if getattr(args, "config", None) else Config()
    flags = {f.name: getattr(args, "cfg_" + f.name) for f in fields(Config)
             if getattr(args, "cfg_" + f.name, None) is not None}
    if getattr(args, "global_threads", None) is not None and "threads" not in flags:
        flags["threads"] = args.global_threads
    return cfg.updated(flags)


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_INPUT
    try:
        cfg = _resolve_config(args)
        return args.func(args, cfg)
    except oscquad.QuadratureBudgetError as err:
        print(f"hessosc: budget exceeded: {err}", file=sys.stderr)
        return EXIT_BUDGET
    except PhaseFormatError as err:
        print(f"hessosc: malformed phase file: {err}", file=sys.stderr)
        return EXIT_INPUT
    except (ValueError, OSError) as err:
        print(f"hessosc: {err}", file=sys.stderr)
        return EXIT_INPUT


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
