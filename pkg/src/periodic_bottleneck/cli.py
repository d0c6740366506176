"""Command line interface.

Exit codes: 0 success, 1 verification failure, 2 usage or input error,
3 result truncated by the effort budget.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from . import export, formats
from . import gadgets as gz
from .bottleneck import (
    Budget,
    bottleneck_finite,
    bottleneck_periodic_upper,
    euclidean_bottleneck_finite,
    euclidean_bottleneck_periodic,
)
from .geometry import FinitePointSet, PeriodicPointSet, covering_radius, packing_radius
from .separation import build_separated_family, gamma_lattice
from .transport import flatten_motif, normalize_to_integer_lattice
from .verify import SUITES, run_suite

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_TRUNCATED = 0, 1, 2, 3
BUDGET_ENV = "PPSB_BUDGET"


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    tolerance: float = 1e-9
    max_nodes: int = 200_000
    max_seconds: float = 120.0
    seed: int | None = None
    output_dir: Path | None = None
    explicit_budget: bool = False

    def budget(self, target_width: float = 1e-6) -> Budget:
        return Budget(self.max_nodes, self.max_seconds, target_width)


def _parse_budget(text: str) -> dict:
    """``SECONDS`` or ``NODES:SECONDS``."""
    try:
        if ":" in text:
            nodes, seconds = text.split(":", 1)
            return {"max_nodes": int(nodes), "max_seconds": float(seconds)}
        return {"max_seconds": float(text)}
    except ValueError:
        raise UsageError(f"bad budget {text!r}; expected SECONDS or NODES:SECONDS") from None


def load_config(args) -> RunConfig:
    """Defaults, then the config file, then the environment, then flags."""
    cfg = RunConfig()
    if getattr(args, "config", None):
        obj, _ = formats.read_json(args.config)
        if not isinstance(obj, dict):
            raise UsageError("config file must hold a JSON object")
        for key, value in obj.items():
            if not hasattr(cfg, key):
                raise UsageError(f"unknown config key {key!r}")
            setattr(cfg, key, Path(value) if key == "output_dir" else value)
            cfg.explicit_budget |= key in ("max_nodes", "max_seconds")
    env = os.environ.get(BUDGET_ENV)
    for text in (env, getattr(args, "budget", None)):
        if text:
            for key, value in _parse_budget(text).items():
                setattr(cfg, key, value)
            cfg.explicit_budget = True
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "tolerance", None) is not None:
        cfg.tolerance = args.tolerance
    if not cfg.tolerance > 0:
        raise UsageError("tolerance must be positive")
    return cfg


def _emit(obj, args, cfg: RunConfig):
    text = obj if isinstance(obj, str) else formats.dumps(obj)
    out = getattr(args, "out", None)
    if out:
        path = Path(out)
        if cfg.output_dir is not None and not path.is_absolute():
            path = cfg.output_dir / path
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    else:
        sys.stdout.write(text)


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"expected comma separated numbers, got {text!r}") from None


# ---- commands


def cmd_invariants(args, cfg):
    x = formats.load_point_set(args.path)
    if not isinstance(x, PeriodicPointSet):
        raise UsageError("invariants need a periodic point set")
    cover = covering_radius(x, args.resolution)
    _emit({"density": x.density, "packing_radius": packing_radius(x),
           "covering_radius": [cover.lower, cover.upper]}, args, cfg)
    return EXIT_OK


def cmd_dist(args, cfg):
    x, y = formats.load_point_set(args.x), formats.load_point_set(args.y)
    if type(x) is not type(y):
        raise UsageError("both inputs must be finite or both periodic")
    if x.dim != y.dim:
        raise UsageError("inputs have different dimensions")
    budget = cfg.budget(args.target_width)
    finite = isinstance(x, FinitePointSet)
    if args.metric == "dB":
        res = bottleneck_finite(x, y) if finite else bottleneck_periodic_upper(x, y)
    elif finite:
        res = euclidean_bottleneck_finite(x, y, budget, seed=cfg.seed or 0)
    else:
        res = euclidean_bottleneck_periodic(x, y, args.window, budget)
    _emit(formats.result_to_dict(res), args, cfg)
    if res.truncated and res.upper - res.lower > args.target_width:
        return EXIT_TRUNCATED
    return EXIT_OK


def cmd_normalize(args, cfg):
    x = formats.load_point_set(args.path)
    if not isinstance(x, PeriodicPointSet) or x.size != 1:
        raise UsageError("normalize needs a lattice (a periodic set with one motif point)")
    # work at density 1 and scale the plan back: the target is then c Z^d
    c = x.lattice.det ** (1 / x.dim)
    plan = normalize_to_integer_lattice(x.lattice.scaled(1 / c)).scaled(c)
    _emit(formats.plan_to_dict(plan), args, cfg)
    return EXIT_OK


def cmd_flatten(args, cfg):
    x = formats.load_point_set(args.path)
    if not isinstance(x, PeriodicPointSet):
        raise UsageError("flatten needs a periodic point set")
    flat, res = flatten_motif(x)
    _emit({"lattice": formats.pps_to_dict(flat), "result": formats.result_to_dict(res)}, args, cfg)
    return EXIT_OK


def _grid_point(args) -> gz.GridPoint:
    coords = _floats(args.coords)
    return gz.GridPoint(args.m, len(coords) if args.n is None else args.n, args.t, tuple(coords))


def _grid_dict(p: gz.GridPoint) -> dict:
    return {"m": p.m, "n": p.n, "t": p.t, "coords": list(p.coords)}


def cmd_gadget(args, cfg):
    kind = args.kind
    if kind == "grid":
        if args.metric:
            obj, _ = formats.read_json(args.metric)
            dist = obj["distances"] if isinstance(obj, dict) else obj
            pts, m, n = gz.embed_metric_space(gz.FiniteMetricSpace(dist), args.t)
            _emit({"m": m, "n": n, "t": args.t, "points": [_grid_dict(p) for p in pts]}, args, cfg)
        else:
            if args.m is None or args.n is None:
                raise UsageError("gadget grid needs --metric FILE or both --m and --n")
            _emit([_grid_dict(p) for p in gz.grid_points(args.m, args.n, args.t)], args, cfg)
    elif kind == "interval":
        p = _grid_point(args)
        pts = gz.encode_grid_to_interval(p)
        _emit({"M": gz.interval_length(p.t, p.m, p.n), **formats.finite_to_dict(pts)}, args, cfg)
    elif kind == "phi":
        p = _grid_point(args)
        pps, spec = gz.build_phi_gadget(p, args.r, args.kappa, args.dim)
        _emit({"pps": formats.pps_to_dict(pps), "spec": spec.to_dict()}, args, cfg)
    elif kind == "psi":
        p = _grid_point(args)
        pps, spec = gz.build_psi_gadget(p, args.R, args.kappa, args.dim, args.eps)
        _emit({"pps": formats.pps_to_dict(pps), "spec": spec.to_dict()}, args, cfg)
    elif kind == "gamma":
        if args.family:
            lats = build_separated_family(args.kappa, args.family, args.dim)
            _emit([formats.pps_to_dict(lat) for lat in lats], args, cfg)
        else:
            _emit(formats.pps_to_dict(gamma_lattice(args.alpha, args.dim).lattice), args, cfg)
    return EXIT_OK


def cmd_verify(args, cfg):
    options = {"seed": cfg.seed, "kind": args.kind, "upto": args.upto}
    if args.suite in ("gamma", "psi", "triangles"):
        options["budget"] = cfg.budget() if cfg.explicit_budget else None
    reports = run_suite(args.suite, **options)
    failed = [r for r in reports if not r.passed]
    if args.json:
        _emit([r.to_dict() for r in reports], args, cfg)
    else:
        lines = []
        for r in reports:
            status = "PASS" if r.passed else "FAIL"
            lines.append(f"{status} {r.lemma} {json.dumps(r.params, sort_keys=True)} "
                         f"measured={json.dumps(r.measured, sort_keys=True)}"
                         + (f" repro: {r.repro}" if r.repro else ""))
        lines.append(f"{len(reports) - len(failed)}/{len(reports)} passed")
        _emit("\n".join(lines) + "\n", args, cfg)
    return EXIT_FAIL if failed else EXIT_OK


def cmd_export(args, cfg):
    obj, text = formats.read_json(args.path)
    if isinstance(obj, dict) and "steps" in obj:
        plan = formats.plan_from_dict(obj)
        if args.csv:
            d = len(plan.source)
            rows = [",".join(["step"] + [f"from{i}" for i in range(1, d + 1)]
                             + [f"to{i}" for i in range(1, d + 1)])]
            for k, arrows in enumerate(export.plan_arrows(plan, args.window), start=1):
                for a, b in arrows:
                    rows.append(",".join([str(k)] + [export.format_number(v) for v in (*a, *b)]))
            _emit("\n".join(rows) + "\n", args, cfg)
        else:
            _emit(export.svg_plan(plan, args.window), args, cfg)
        return EXIT_OK
    x = formats.load_point_set(args.path)
    if args.match:
        y = formats.load_point_set(args.match)
        if not (isinstance(x, FinitePointSet) and isinstance(y, FinitePointSet)):
            raise UsageError("--match needs two finite point sets")
        res = bottleneck_finite(x, y)
        if res.witness is None:
            raise UsageError("point sets have different sizes")
        if args.csv:
            _emit(export.csv_pairs(res.witness.pairs), args, cfg)
        else:
            _emit(export.svg_matching(x.points, y.points, res.witness.pairs, args.window), args, cfg)
        return EXIT_OK
    if args.csv:
        _emit(export.csv_points(x, args.window), args, cfg)
    else:
        _emit(export.svg_points(x, args.window), args, cfg)
    return EXIT_OK


# ---- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with RunConfig fields")
    common.add_argument("--budget", help=f"SECONDS or NODES:SECONDS (default from ${BUDGET_ENV})")
    common.add_argument("--seed", type=int)
    common.add_argument("--tolerance", type=float)
    common.add_argument("--out", help="write output to this file instead of stdout")

    parser = argparse.ArgumentParser(prog="ppsb", description="Bottleneck distances between periodic point sets.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("invariants", parents=[common], help="density, packing and covering radius")
    p.add_argument("path")
    p.add_argument("--resolution", type=float, default=0.01)
    p.set_defaults(func=cmd_invariants)

    p = sub.add_parser("dist", parents=[common], help="bottleneck distance between two sets")
    p.add_argument("x")
    p.add_argument("y")
    p.add_argument("--metric", choices=("dB", "dEB"), default="dB")
    p.add_argument("--window", type=float, default=8.0)
    p.add_argument("--target-width", type=float, default=1e-6)
    p.set_defaults(func=cmd_dist)

    p = sub.add_parser("normalize", parents=[common], help="coset-shift plan onto the integer lattice")
    p.add_argument("path")
    p.set_defaults(func=cmd_normalize)

    p = sub.add_parser("flatten", parents=[common], help="match a periodic set onto a lattice")
    p.add_argument("path")
    p.set_defaults(func=cmd_flatten)

    p = sub.add_parser("gadget", parents=[common], help="grid encodings and gadget point sets")
    p.add_argument("kind", choices=("grid", "interval", "phi", "psi", "gamma"))
    p.add_argument("--m", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--t", type=float, help="grid spacing (default 1, or 2r for phi)")
    p.add_argument("--coords", default="")
    p.add_argument("--metric", help="finite metric space JSON for 'grid'")
    p.add_argument("--r", type=float, default=0.5)
    p.add_argument("--R", type=float, default=1.0)
    p.add_argument("--kappa", type=float)
    p.add_argument("--eps", type=float, default=0.25)
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--family", type=int, help="emit this many rescaled Gamma lattices")
    p.set_defaults(func=cmd_gadget)

    p = sub.add_parser("verify", parents=[common], help="run a verification suite")
    p.add_argument("suite", choices=sorted(SUITES))
    p.add_argument("--kind", choices=("phi", "psi"))
    p.add_argument("--upto", type=int)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("export", parents=[common], help="SVG or CSV rendering")
    p.add_argument("path")
    fmt = p.add_mutually_exclusive_group(required=True)
    fmt.add_argument("--svg", action="store_true")
    fmt.add_argument("--csv", action="store_true")
    p.add_argument("--window", type=float, default=5.0)
    p.add_argument("--match", help="second finite set; draws the optimal bottleneck matching")
    p.set_defaults(func=cmd_export)
    return parser


_KAPPA_DEFAULTS = {"phi": 0.02, "psi": 1.0, "gamma": 1.0}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "gadget":
        if args.kappa is None:
            args.kappa = _KAPPA_DEFAULTS.get(args.kind, 1.0)
        if args.kind in ("interval", "phi", "psi"):
            if args.m is None or not args.coords:
                parser.error(f"gadget {args.kind} needs --m and --coords")
        if args.t is None:
            args.t = 2 * args.r if args.kind == "phi" else 1.0
    try:
        cfg = load_config(args)
        return args.func(args, cfg)
    except (UsageError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
