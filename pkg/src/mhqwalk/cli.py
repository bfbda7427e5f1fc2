"""Command line entry point: ``mhqwalk {run,spectrum,cost,scenario,plot-data}``."""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from . import experiment, resources
from .ising import build_chain, build_random_sparse, single_spin_moves
from .walk import WalkSpec, spectral


def _cmd_run(args) -> int:
    cfg = experiment.load_config(args.config)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, master_seed=args.seed)
    res = experiment.run(cfg, out_dir=args.out, workers=args.workers)
    short = {k: v for k, v in res.summary.items() if k not in ("config", "flags")}
    print(json.dumps(short, indent=2, sort_keys=True))
    print(f"wrote {res.out_dir}", file=sys.stderr)
    return 0 if res.error_count == 0 else 1


def _cmd_spectrum(args) -> int:
    if args.model == "chain":
        model = build_chain(args.n)
    else:
        model = build_random_sparse(args.n, rng_seed=args.seed or 0)
    spec = WalkSpec(model, single_spin_moves(args.n), args.beta, args.rule, args.padded)
    print(json.dumps(spectral(spec, method=args.method).to_dict(), indent=2))
    return 0


def _cmd_cost(args) -> int:
    report = resources.component_costs(args.n, args.N if args.N else args.n, args.d, args.epsilon)
    out = report.to_dict()
    out["synthesis_count"] = resources.synthesis_count(args.epsilon)
    out["rotation_depth"] = resources.rotation_depth(report.N, args.d)
    print(json.dumps(out, indent=2))
    return 0


def _cmd_scenario(args) -> int:
    alphas = args.alpha or list(resources.REFERENCE_GATE_TIMES)
    reports = [resources.scenario(a, args.rate, args.duration, args.depth, args.synthesis).to_dict()
               for a in alphas]
    print(json.dumps(reports, indent=2))
    return 0


def _cmd_plot(args) -> int:
    for name, path in experiment.emit_plot_data(args.results).items():
        print(f"{name}\t{path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mhqwalk", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config")
    r.add_argument("--seed", type=int, help="override master_seed")
    r.add_argument("--workers", type=int, help="process count (instance-level)")
    r.add_argument("--out", help="output directory (default: config out_dir)")
    r.set_defaults(func=_cmd_run)

    s = sub.add_parser("spectrum", help="spectral report of one walk")
    s.add_argument("--n", type=int, default=6)
    s.add_argument("--model", choices=("chain", "random"), default="chain")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--beta", type=float, default=1.0)
    s.add_argument("--rule", choices=("metropolis", "glauber"), default="metropolis")
    s.add_argument("--padded", action="store_true")
    s.add_argument("--method", choices=("auto", "dense", "iterative"), default="auto")
    s.set_defaults(func=_cmd_spectrum)

    c = sub.add_parser("cost", help="per-component gate costs of one walk step")
    c.add_argument("--n", type=int, default=80 ** 3)
    c.add_argument("--N", type=int, default=None, help="move count (default n)")
    c.add_argument("--d", type=int, default=6)
    c.add_argument("--epsilon", type=float, default=1e-16)
    c.set_defaults(func=_cmd_cost)

    g = sub.add_parser("scenario", help="logical gate time needed to match a classical machine")
    g.add_argument("--alpha", type=float, action="append")
    g.add_argument("--rate", type=float, default=1e12, help="classical updates per second")
    g.add_argument("--duration", type=float, default=resources.MONTH_S, help="seconds")
    g.add_argument("--depth", type=float, default=1000, help="rotation depth per walk step")
    g.add_argument("--synthesis", type=float, default=200, help="T gates per rotation")
    g.set_defaults(func=_cmd_scenario)

    d = sub.add_parser("plot-data", help="write plot-ready CSVs for a results directory")
    d.add_argument("results")
    d.set_defaults(func=_cmd_plot)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
