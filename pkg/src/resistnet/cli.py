"""Command-line interface: ``resistnet <command> ...``.

Every command writes CSV (header row first) or, with ``--json``, a single
JSON object to stdout. A run manifest goes to stderr or ``--manifest FILE``;
``resistnet replay FILE`` re-executes it.

Exit codes: 0 success, 1 validation failure, 2 non-convergence, 64 usage.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import time
from typing import Sequence

import numpy as np

from . import __version__
from .network import Network, NetworkError, ball_exhaustion, dumps_network, generate, load_network, validate

EXIT_OK, EXIT_INVALID, EXIT_NONCONVERGED, EXIT_USAGE = 0, 1, 2, 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# helpers


class Output:
    def __init__(self, args):
        self.json = args.json
        self.digits = 17 if args.full_precision else 12

    def fmt(self, x):
        if isinstance(x, (bool, np.bool_)):
            return "true" if x else "false"
        if isinstance(x, (float, np.floating)):
            x = float(x)
            if math.isinf(x):
                return "inf" if x > 0 else "-inf"
            return f"{x + 0.0:.{self.digits}g}"  # no negative zero
        return "" if x is None else str(x)

    def jsonable(self, x):
        if isinstance(x, (np.floating, float)):
            x = float(x)
            return x if math.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan")
        if isinstance(x, np.integer):
            return int(x)
        if isinstance(x, np.bool_):
            return bool(x)
        if isinstance(x, dict):
            return {k: self.jsonable(v) for k, v in x.items()}
        if isinstance(x, (list, tuple)):
            return [self.jsonable(v) for v in x]
        return x

    def table(self, header, rows, extra: dict | None = None) -> str:
        if self.json:
            obj = dict(extra or {})
            obj["columns"] = list(header)
            obj["rows"] = [dict(zip(header, r)) for r in rows]
            return json.dumps(self.jsonable(obj), sort_keys=False) + "\n"
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([self.fmt(v) for v in r])
        return buf.getvalue()


def _source(text: str):
    if os.path.exists(text):
        return load_network(text)
    if os.sep in text or text.endswith(".net"):
        raise UsageError(f"file not found: {text}")
    return generate(text)


def _finite(text: str) -> Network:
    src = _source(text)
    if not isinstance(src, Network):
        raise UsageError(f"{text} is an infinite model; use 'limits' or pass --radii")
    return src


def _pairs(items: Sequence[str] | None) -> list[tuple[str, str]] | None:
    if not items:
        return None
    out = []
    for item in items:
        for chunk in item.split(";"):
            if not chunk:
                continue
            parts = chunk.split(",")
            if len(parts) != 2 or not all(parts):
                raise UsageError(f"pair {chunk!r} must look like 'x,y'")
            out.append((parts[0], parts[1]))
    return out


def _radii(text: str) -> list[int]:
    try:
        if ".." in text:
            lo, hi = text.split("..", 1)
            return list(range(int(lo), int(hi) + 1))
        return [int(t) for t in text.split(",") if t]
    except ValueError:
        raise UsageError(f"bad radius list {text!r}; use '1..30' or '1,2,4'") from None


def _list(text: str | None) -> list[str] | None:
    return None if text is None else [t for t in text.split(",") if t]


def _check_vertices(net, names):
    if isinstance(net, Network):
        for v in names:
            if v not in net.index:
                raise UsageError(f"unknown vertex {v!r}")


def _all_pairs(net: Network) -> list[tuple[str, str]]:
    vs = net.vertices
    return [(vs[i], vs[j]) for i in range(len(vs)) for j in range(i + 1, len(vs))]


def _exhaustion(spec, args):
    from .limits import default_exhaustion

    if getattr(args, "radii", None):
        return ball_exhaustion(spec, _radii(args.radii))
    return default_exhaustion(spec)


# ---------------------------------------------------------------------------
# commands


def cmd_validate(args, out: Output):
    from .network import loads_network

    with open(args.file, encoding="utf-8") as fh:
        text = fh.read()
    try:
        net = loads_network(text, check=False)
    except NetworkError as exc:
        sys.stdout.write(out.table(["invariant", "passed", "witness"],
                                   [[exc.invariant or "syntax", False, str(exc)]]))
        return EXIT_INVALID
    report = validate(net)
    rows = [[c.name, c.passed, "" if c.witness is None else c.witness] for c in report.checks]
    sys.stdout.write(out.table(["invariant", "passed", "witness"], rows,
                               {"vertices": net.n, "edges": net.m, "base": net.base}))
    return EXIT_OK if report.ok else EXIT_INVALID


def cmd_resistance(args, out: Output):
    from .resistance import FORMULATIONS, effective_resistance, resistance_report

    net = _finite(args.source)
    pairs = _pairs(args.pairs) or _all_pairs(net)
    for p in pairs:
        _check_vertices(net, p)
    if args.report:
        header = ["x", "y", *FORMULATIONS, "consensus", "spread"]
        rows = []
        for x, y in pairs:
            r = resistance_report(net, x, y)
            rows.append([x, y, *(r.values[k] for k in FORMULATIONS), r.consensus, r.spread])
    else:
        header = ["x", "y", "resistance"]
        rows = [[x, y, effective_resistance(net, x, y)] for x, y in pairs]
    sys.stdout.write(out.table(header, rows))
    return EXIT_OK


def cmd_limits(args, out: Output):
    from .limits import limit

    spec = _source(args.model)
    ex = _exhaustion(spec, args)
    est = limit(spec, args.x, args.y, args.metric, ex, args.tol)
    rows = [[args.metric, args.x, args.y, r, v, ""] for r, v in zip(est.radii, est.values)]
    rows.append([args.metric, args.x, args.y, "limit", est.estimate, est.verdict])
    extra = {"metric": args.metric, "estimate": est.estimate, "verdict": est.verdict}
    if args.metric == "boundary":
        extra["product_formula"] = est.extras.get("product_formula")
    sys.stdout.write(out.table(["metric", "x", "y", "radius", "value", "verdict"], rows, extra))
    return EXIT_OK if est.converged else EXIT_NONCONVERGED


def cmd_reduce(args, out: Output):
    from .trace import parallel_merge, schur_trace, series_reduce, wye_delta

    net = _finite(args.file)
    if bool(args.keep) == bool(args.transform):
        raise UsageError("give exactly one of --keep or --transform")
    if args.keep:
        keep = _list(args.keep)
        _check_vertices(net, keep)
        reduced = schur_trace(net, keep).network
    else:
        name, _, vertex = args.transform.partition(":")
        if name == "parallel":
            reduced = parallel_merge(net)
        elif name in ("series", "wye-delta") and vertex:
            _check_vertices(net, [vertex])
            reduced = (series_reduce if name == "series" else wye_delta)(net, vertex)
        else:
            raise UsageError("transform must be parallel, series:<v> or wye-delta:<v>")
    if out.json:
        edges = [{"u": u, "v": v, "conductance": float(c)} for u, v, c in reduced.edge_list()]
        sys.stdout.write(json.dumps({"base": reduced.base, "edges": edges}) + "\n")
    else:
        sys.stdout.write(dumps_network(reduced))
    return EXIT_OK


def cmd_walk(args, out: Output):
    from . import walk

    cfg = walk.WalkConfig(seed=args.seed, max_steps=args.max_steps, episodes=args.episodes,
                          threads=args.threads)
    if args.task == "free-kernel":
        if not args.experimental:
            raise UsageError("free-kernel is experimental; pass --experimental")
        if len(args.vertices) != 2:
            raise UsageError("free-kernel needs X Y")
        spec = _source(args.source)
        ex = _exhaustion(spec, args)
        rows = [[r, v] for r, v in walk.experimental_free_kernel(spec, *args.vertices, ex)]
        sys.stdout.write(out.table(["radius", "value"], rows, {"experimental": True}))
        return EXIT_OK
    if args.task == "wired-identity":
        spec = _source(args.source)
        if len(args.vertices) != 1:
            raise UsageError("wired-identity needs X")
        rep = walk.wired_fx_probabilistic(spec, args.vertices[0], _exhaustion(spec, args))
        rows = [[r.radius, r.relative_error, r.prefactor] for r in rep.rows]
        sys.stdout.write(out.table(["radius", "relative_error", "prefactor"], rows, {"ok": rep.ok}))
        return EXIT_OK if rep.ok else EXIT_INVALID

    net = _finite(args.source)
    _check_vertices(net, args.vertices)
    need = {"escape": 2, "path-integral": 2, "visits": 2, "dipole": 1, "hitting": 3}[args.task]
    if len(args.vertices) != need:
        raise UsageError(f"{args.task} takes {need} vertex argument(s)")
    meta = {"seed": cfg.seed, "rng": walk.RNG_ALGORITHM}
    if args.task == "escape":
        a, b = args.vertices
        h = walk.simulate_escape(net, a, b, cfg)
        exact = walk.escape_probability(net, a, b)
        rows = [[a, b, h.estimate, h.std_error, h.episodes, h.truncated, exact]]
        header = ["a", "b", "estimate", "std_error", "episodes", "truncated", "exact"]
    elif args.task == "path-integral":
        x, y = args.vertices
        r = walk.path_integral_resistance(net, x, y, cfg)
        rows = [[x, y, r.exact, r.resistance, r.mc_resistance, r.monte_carlo.estimate,
                 r.monte_carlo.std_error, r.escape]]
        header = ["x", "y", "exact", "effective_resistance", "monte_carlo", "escape_estimate",
                  "std_error", "escape_exact"]
    elif args.task == "visits":
        a, b = args.vertices
        v = walk.simulate_visits(net, a, b, cfg)
        rows = [[a, b, v.mean, v.std_error, v.episodes, v.exact]]
        header = ["a", "b", "mean_visits", "std_error", "episodes", "exact"]
    elif args.task == "dipole":
        rep = walk.dipole_probability_check(net, args.vertices[0])
        rows = [[args.vertices[0], rep.details["resistance"], rep.relative_error, rep.ok]]
        header = ["x", "resistance", "relative_error", "ok"]
    else:
        start, targets, avoid = args.vertices
        h = walk.exact_hitting(net, None, _list(targets), _list(avoid) or [])
        rows = [[v, h[net.index[v]]] for v in net.vertices] if start == "*" else [[start, h[net.index[start]]]]
        header = ["start", "probability"]
    sys.stdout.write(out.table(header, rows, meta))
    return EXIT_OK


def cmd_embed(args, out: Output):
    from .embedding import embed_resistance
    from .limits import limit_resistance_matrix
    from .resistance import resistance_matrix

    src = _source(args.source)
    vertices = _list(args.vertices)
    converged = True
    if isinstance(src, Network) and args.metric == "finite":
        vertices = vertices or list(src.vertices)
        _check_vertices(src, vertices)
        R = resistance_matrix(src, vertices)
    else:
        if args.metric == "finite":
            raise UsageError("finite metric needs a finite network")
        if not vertices:
            vertices = (src.vertices if isinstance(src, Network) else src.enumerate(10))
            vertices = list(vertices)[:10]
        lm = limit_resistance_matrix(src, vertices, args.metric, _exhaustion(src, args))
        R, converged = lm.matrix, lm.converged
    res = embed_resistance(R, vertices)
    text = res.to_csv(precision=out.digits)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    if out.json:
        sys.stdout.write(json.dumps(out.jsonable({
            "vertices": list(res.vertices), "rank": res.rank, "defect": res.defect,
            "coordinates": res.coordinates.tolist(), "converged": converged})) + "\n")
    else:
        sys.stdout.write(text)
    return EXIT_OK if converged else EXIT_NONCONVERGED


def cmd_compare(args, out: Output):
    from .metric import geodesic_distance

    src = _source(args.source)
    if isinstance(src, Network):
        from .resistance import effective_resistance
        from .walk import escape_probability

        pairs = _pairs(args.pairs) or _all_pairs(src)
        for p in pairs:
            _check_vertices(src, p)
        header = ["x", "y", "resistance", "path_integral", "geodesic"]
        rows = [[x, y, effective_resistance(src, x, y),
                 1.0 / (src.c(x) * escape_probability(src, x, y)),
                 geodesic_distance(src, x, y)] for x, y in pairs]
        sys.stdout.write(out.table(header, rows))
        return EXIT_OK
    from .limits import boundary_resistance, trace_limit

    pairs = _pairs(args.pairs)
    if not pairs:
        raise UsageError("--pairs is required for infinite models")
    ex = _exhaustion(src, args)
    header = ["x", "y", "free", "wired", "harmonic", "boundary", "trace", "geodesic", "verdict"]
    rows, ok = [], True
    for x, y in pairs:
        b = boundary_resistance(src, x, y, ex, args.tol)
        h = b.extras["harmonic"]
        t = trace_limit(src, x, y, ex, args.tol)
        conv = h.converged and t.converged
        ok &= conv
        rows.append([x, y, h.extras["free"].estimate, h.extras["wired"].estimate, h.estimate,
                     b.estimate, t.estimate, geodesic_distance(src, x, y),
                     "converged" if conv else "not-converged"])
    sys.stdout.write(out.table(header, rows))
    return EXIT_OK if ok else EXIT_NONCONVERGED


COMMANDS = {
    "validate": cmd_validate,
    "resistance": cmd_resistance,
    "limits": cmd_limits,
    "reduce": cmd_reduce,
    "walk": cmd_walk,
    "embed": cmd_embed,
    "compare": cmd_compare,
}


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="emit one JSON object instead of CSV")
    common.add_argument("--full-precision", action="store_true", help="17 significant digits")
    common.add_argument("--manifest", metavar="FILE", help="write the run manifest here instead of stderr")
    common.add_argument("--threads", type=int, default=None,
                        help="worker cap (default: RESISTNET_THREADS or 1)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="resistnet", description="Effective-resistance metrics on weighted networks.")
    p.add_argument("--version", action="version", version=f"resistnet {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("validate", parents=[common], help="check a network file")
    s.add_argument("file")

    s = sub.add_parser("resistance", parents=[common], help="effective resistance on a finite network")
    s.add_argument("source", help="edge-list file or finite model such as complete:4")
    s.add_argument("--pairs", nargs="+", metavar="X,Y")
    s.add_argument("--report", action="store_true", help="all six formulations")

    s = sub.add_parser("limits", parents=[common], help="exhaustion limits on a model")
    s.add_argument("model")
    s.add_argument("x")
    s.add_argument("y")
    s.add_argument("--metric", choices=["free", "wired", "harmonic", "boundary", "trace"], default="free")
    s.add_argument("--radii", help="e.g. 1..30 or 1,2,4")
    s.add_argument("--tol", type=float, default=1e-7)

    s = sub.add_parser("reduce", parents=[common], help="trace or classical reductions")
    s.add_argument("file")
    s.add_argument("--keep", help="comma-separated vertices to keep")
    s.add_argument("--transform", help="parallel | series:<v> | wye-delta:<v>")

    s = sub.add_parser("walk", parents=[common], help="random-walk checks")
    s.add_argument("source")
    s.add_argument("task", choices=["escape", "hitting", "path-integral", "dipole", "visits",
                                    "wired-identity", "free-kernel"])
    s.add_argument("vertices", nargs="*",
                   help="escape/path-integral/visits: A B; dipole: X; hitting: START|* TARGETS AVOID")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--episodes", type=int, default=10**5)
    s.add_argument("--max-steps", type=int, default=10**6)
    s.add_argument("--radii")
    s.add_argument("--experimental", action="store_true")

    s = sub.add_parser("embed", parents=[common], help="von Neumann embedding of a resistance metric")
    s.add_argument("source")
    s.add_argument("--metric", choices=["finite", "free", "wired"], default="finite")
    s.add_argument("--vertices", help="comma-separated sample (default: all, or 10 for models)")
    s.add_argument("--radii")
    s.add_argument("--out", help="also write coordinates CSV here")

    s = sub.add_parser("compare", parents=[common], help="compare resistance variants and geodesic distance")
    s.add_argument("source")
    s.add_argument("--pairs", nargs="+", metavar="X,Y")
    s.add_argument("--radii")
    s.add_argument("--tol", type=float, default=1e-7)

    s = sub.add_parser("replay", help="re-run a saved manifest")
    s.add_argument("manifest_file")
    return p


def _manifest(args, argv, elapsed) -> dict:
    params = {k: v for k, v in vars(args).items() if k not in ("manifest", "verbose")}
    return {
        "command": args.command,
        "argv": list(argv),
        "parameters": params,
        "seed": getattr(args, "seed", None),
        "rng": "numpy.PCG64 via SeedSequence.spawn(block)" if args.command == "walk" else None,
        "version": __version__,
        "elapsed_seconds": round(elapsed, 6),
    }


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command == "replay":
        try:
            with open(args.manifest_file, encoding="utf-8") as fh:
                saved = json.load(fh)
            return main(saved["argv"])
        except (OSError, ValueError, KeyError) as exc:
            print(f"resistnet: cannot replay manifest: {exc}", file=sys.stderr)
            return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="resistnet: %(levelname)s: %(message)s")
    if args.threads is None and os.environ.get("RESISTNET_THREADS"):
        args.threads = int(os.environ["RESISTNET_THREADS"])
    out = Output(args)
    t0 = time.perf_counter()
    try:
        code = COMMANDS[args.command](args, out)
    except UsageError as exc:
        print(f"resistnet: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NetworkError as exc:
        print(f"resistnet: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"resistnet: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    manifest = _manifest(args, argv, time.perf_counter() - t0)
    text = json.dumps(manifest, sort_keys=True, default=str)
    if args.manifest:
        with open(args.manifest, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(f"manifest: {text}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
