"""Command-line interface: ``singsusp <command> ...``.

JSON arguments are given inline or as ``@path`` to read a file.  Every
command prints JSON on stdout; usage errors go to stderr with exit code 2.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import experiments, symbolic
from .entropy import DEFAULT_EPS, CylinderSampler, entropy_estimate_flow, entropy_estimate_map
from .expansive import NearPairs, ReparamGrid, flow_expansiveness_falsifier, map_expansiveness_falsifier
from .mapping_torus import FiberPoint, MappingTorus, bar_metric
from .singular import Brake, SingularSuspension, expected_gamma, sampler_from_json
from .systems import UsageError, point_from_json, system_from_json


def _json_arg(text: str):
    if text.startswith("@"):
        text = Path(text[1:]).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"bad JSON argument: {exc}") from None


def _range_arg(text: str) -> list[int]:
    # "a:b" (inclusive), "a:b:step" or "a,b,c"
    if ":" in text:
        parts = [int(v) for v in text.split(":")]
        step = parts[2] if len(parts) > 2 else 1
        return list(range(parts[0], parts[1] + 1, step))
    return [int(v) for v in text.split(",")]


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",")]


def _workers(args) -> int:
    if args.workers is not None:
        return max(1, args.workers)
    env = os.environ.get("SINGSUSP_WORKERS")
    return max(1, int(env)) if env else 1


def _emit(obj, out: str | None = None):
    text = json.dumps(experiments._clean(obj), sort_keys=True, indent=1)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _flow(args) -> SingularSuspension:
    system = system_from_json(_json_arg(args.system))
    brake = Brake.from_json(_json_arg(args.brake)) if args.brake else Brake()
    return SingularSuspension(MappingTorus(system), brake, cap=args.cap)


def _add_flow_args(p, brake=True):
    p.add_argument("--system", required=True, help="base system JSON, e.g. '{\"kind\": \"CatMap\"}'")
    if brake:
        p.add_argument("--brake", help="brake JSON; omitted means alpha = 1")
        p.add_argument("--cap", type=float, default=1e6, help="clock values above this count as infinite")


# ---------------------------------------------------------------------------
# commands


def cmd_list(args):
    _emit([{"name": sc.name, "statement": sc.statement, "expected": sc.expected, "description": sc.description}
           for sc in experiments.bundled_suite()])
    return 0


def cmd_run(args):
    if args.all:
        scenarios = experiments.bundled_suite()
    elif args.scenario:
        scenarios = [experiments.load_scenario(s) for s in args.scenario]
    else:
        raise UsageError("give a scenario name or file, or --all")
    if args.seed is not None:
        scenarios = [sc.with_seed(args.seed) for sc in scenarios]
    reports = experiments.run_suite(scenarios, _workers(args))
    if args.tsv:
        d = Path(args.tsv)
        d.mkdir(parents=True, exist_ok=True)
        for r in reports:
            for key, text in r.tsv.items():
                (d / f"{r.scenario.name}.{key}.tsv").write_text(text)
    body = "\n".join(r.dumps() for r in reports) if len(reports) == 1 else \
        json.dumps([json.loads(r.dumps()) for r in reports], sort_keys=True, indent=1)
    if args.out:
        Path(args.out).write_text(body + "\n")
    else:
        print(body)
    for r in reports:
        mark = "PASS" if r.passed else "FAIL"
        print(f"{mark} {r.scenario.name}: " + "; ".join(f"{v['verdict']} ({v['detail']})" for v in r.verdicts),
              file=sys.stderr)
    return 0 if all(r.passed for r in reports) else 1


def cmd_metric(args):
    mt = MappingTorus(system_from_json(_json_arg(args.system)))
    p = FiberPoint.from_json(_json_arg(args.p))
    q = FiberPoint.from_json(_json_arg(args.q))
    _emit({"distance": bar_metric(mt, p, q, hops=args.hops), "hops": args.hops})
    return 0


def cmd_gamma(args):
    ss = _flow(args)
    out = []
    for x in args.points:
        b = point_from_json(_json_arg(x))
        out.append({"base": json.loads(json.dumps(experiments._clean(_json_arg(x)))), "gamma": ss.gamma(b)})
    _emit(out)
    return 0


def cmd_egamma(args):
    ss = _flow(args)
    mobj = _json_arg(args.measure)
    sub = None
    if mobj.get("kind") == "UniformOnSubshift":
        sub = symbolic.minimal_subshift_with_entropy(mobj["target"], mobj.get("levels", 3), mobj.get("tol", 0.02))
    mu = sampler_from_json(mobj, ss.system, sub, args.seed)
    _emit(expected_gamma(ss, mu, args.samples).to_json())
    return 0


def cmd_flow(args):
    ss = _flow(args)
    p = FiberPoint.from_json(_json_arg(args.point))
    pts = ss.trajectory(p, _floats(args.times))
    _emit([{"t": t, "point": q.to_json()} for t, q in zip(_floats(args.times), pts)])
    return 0


def cmd_entropy(args):
    eps = _floats(args.eps) if args.eps else list(DEFAULT_EPS)
    system = system_from_json(_json_arg(args.system))
    mobj = _json_arg(args.measure)
    sub = None
    if mobj.get("kind") == "UniformOnSubshift":
        sub = symbolic.minimal_subshift_with_entropy(mobj["target"], mobj.get("levels", 3), mobj.get("tol", 0.02))
    if args.which == "map":
        sampler = CylinderSampler(system.k) if mobj.get("kind") == "Cylinders" else \
            sampler_from_json(mobj, system, sub, args.seed)
        est = entropy_estimate_map(system, sampler, _range_arg(args.grid or "2:10"), eps,
                                   n_samples=args.samples or 1 << 14, workers=_workers(args))
    else:
        ss = _flow(args)
        sampler = sampler_from_json(mobj, system, sub, args.seed)
        est = entropy_estimate_flow(ss, sampler, _range_arg(args.grid or "2:10"), eps,
                                    n_samples=args.samples or 1 << 12, workers=_workers(args))
    if args.tsv:
        Path(args.tsv).write_text(est.to_tsv())
    _emit(est.to_json())
    return 0


def cmd_subshift(args):
    if args.action == "build":
        sh = symbolic.minimal_subshift_with_entropy(args.target, args.levels, args.tol, args.seed)
        _emit(sh.to_json(), args.out)
        if args.out:
            print(json.dumps({"target": sh.target, "measured_entropy": sh.measured_entropy, "L1": sh.L1,
                              "L2": sh.L2}), file=sys.stderr)
        return 0
    if not args.file:
        raise UsageError("certify needs a subshift file")
    sh = symbolic.Subshift.from_json(_json_arg("@" + args.file))
    word_len = args.word_len or sh.L1
    window = args.window or 2 * sh.L2
    cert = symbolic.minimality_certificate(sh, word_len, window)
    _emit({"word_len": word_len, "window": window, "measured_entropy": sh.measured_entropy, **cert.to_json()})
    return 0 if isinstance(cert, symbolic.Certified) else 1


def cmd_expansive(args):
    if args.which == "map":
        system = system_from_json(_json_arg(args.system))
        lo = args.lo if args.lo is not None else 2.0 ** -args.horizon
        pairs = NearPairs(system, lo, args.e, seed=args.seed)
        res = map_expansiveness_falsifier(system, args.e, pairs, args.horizon, n_pairs=args.pairs)
    else:
        ss = _flow(args)
        pairs = NearPairs(ss.system, args.delta / 4, args.delta, seed=args.seed)
        res = flow_expansiveness_falsifier(ss, args.eps, args.delta, pairs, ReparamGrid(args.T, args.dt),
                                           n_pairs=args.pairs)
    _emit(res.to_json())
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="singsusp", description="Suspension flows and singular suspensions.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("list", help="list the bundled scenarios")
    p.set_defaults(fn=cmd_list)

    p = sub.add_parser("run", help="run scenarios and print their reports")
    p.add_argument("scenario", nargs="*", help="bundled scenario name or scenario JSON file")
    p.add_argument("--all", action="store_true", help="run the whole bundled suite")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, help="worker budget (default: $SINGSUSP_WORKERS or 1)")
    p.add_argument("--out", help="write the report JSON here instead of stdout")
    p.add_argument("--tsv", help="directory for count tables")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("metric", help="chain distance between two mapping-torus points")
    _add_flow_args(p, brake=False)
    p.add_argument("p", help='point JSON, e.g. \'{"base": [0.1, 0.2], "height": 0.5}\'')
    p.add_argument("q")
    p.add_argument("--hops", type=int, default=5)
    p.set_defaults(fn=cmd_metric)

    p = sub.add_parser("gamma", help="fiber traversal time at base points")
    _add_flow_args(p)
    p.add_argument("points", nargs="+", help="base point JSON")
    p.set_defaults(fn=cmd_gamma)

    p = sub.add_parser("egamma", help="expected traversal time under a measure")
    _add_flow_args(p)
    p.add_argument("--measure", default='{"kind": "LebesgueOnBase"}')
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_egamma)

    p = sub.add_parser("flow", help="trajectory of the singular suspension")
    _add_flow_args(p)
    p.add_argument("--point", required=True)
    p.add_argument("--times", required=True, help="comma-separated times")
    p.set_defaults(fn=cmd_flow)

    p = sub.add_parser("entropy", help="separated-set entropy estimate")
    p.add_argument("which", choices=["map", "flow"])
    _add_flow_args(p)
    p.add_argument("--measure", default='{"kind": "LebesgueOnBase"}',
                   help='measure JSON; {"kind": "Cylinders"} counts exhaustive cylinders of a shift')
    p.add_argument("--grid", help="n (map) or T (flow) grid, 'a:b[:step]' or 'a,b,c'")
    p.add_argument("--eps", help="comma-separated scales")
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int)
    p.add_argument("--tsv", help="write the count table here")
    p.set_defaults(fn=cmd_entropy)

    p = sub.add_parser("subshift", help="build or certify a minimal subshift")
    p.add_argument("action", choices=["build", "certify"])
    p.add_argument("file", nargs="?", help="subshift JSON (certify)")
    p.add_argument("--target", type=float, default=0.3)
    p.add_argument("--levels", type=int, default=3)
    p.add_argument("--tol", type=float, default=0.02)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.add_argument("--word-len", type=int)
    p.add_argument("--window", type=int)
    p.set_defaults(fn=cmd_subshift)

    p = sub.add_parser("expansive", help="expansiveness falsifiers")
    p.add_argument("which", choices=["map", "flow"])
    _add_flow_args(p)
    p.add_argument("--pairs", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--e", type=float, default=0.25, help="map expansivity constant")
    p.add_argument("--horizon", type=int, default=10)
    p.add_argument("--lo", type=float, help="least initial separation of map pairs")
    p.add_argument("--eps", type=float, default=0.25)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--T", type=float, default=20.0)
    p.add_argument("--dt", type=float, default=0.1)
    p.set_defaults(fn=cmd_expansive)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (UsageError, symbolic.InfeasibleTarget, FileNotFoundError) as exc:
        print(f"singsusp: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
