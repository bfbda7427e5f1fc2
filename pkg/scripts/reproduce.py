"""Run the shipped experiment configs and write plot-ready CSVs.

    python3 scripts/reproduce.py                  # everything
    python3 scripts/reproduce.py fig1_chain cost_report --out results
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from mhqwalk.experiment import emit_plot_data, load_config, run

CONFIGS = Path(__file__).resolve().parent / "configs"
ORDER = ("cost_report", "spectrum_suite", "fig1_chain", "fig3_parallel", "fig2_random")


def headline(kind: str, summary: dict) -> str:
    if kind in ("fig1_chain", "fig2_random"):
        return ", ".join(f"{m} {f['exponent']:.3f}" for m, f in sorted(summary["fits"].items())
                         if "exponent" in f)
    if kind == "fig3_parallel":
        return ", ".join(f"{k} {v:.1f}" for k, v in sorted(summary["final_median"].items()))
    if kind == "spectrum_suite":
        return f"{summary['reports']} reports, {summary['quadratic_violations']} gap violations"
    return ", ".join(f"alpha {s['alpha']}: {s['gate_time_online']:.2e} s" for s in summary["scenarios"])


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("names", nargs="*", default=list(ORDER), help=f"config names from {ORDER}")
    ap.add_argument("--out", default="results")
    ap.add_argument("--workers", type=int)
    args = ap.parse_args(argv)
    failed = 0
    for name in args.names:
        cfg = load_config(CONFIGS / f"{name}.json")
        t0 = time.perf_counter()
        res = run(cfg, out_dir=Path(args.out) / name, workers=args.workers)
        if cfg.kind in ("fig1_chain", "fig2_random", "fig3_parallel"):
            emit_plot_data(res.out_dir)
        failed += res.error_count
        print(f"{name:15s} {time.perf_counter() - t0:7.1f}s  {headline(cfg.kind, res.summary)}")
    if failed:
        print(json.dumps({"errors": failed}), file=sys.stderr)
    return 0 if failed == 0 else 1


if __name__ == "__main__":
    sys.exit(main())
