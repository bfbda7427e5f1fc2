"""Render PNGs from the plot-ready CSVs written by ``mhqwalk plot-data``.

Needs matplotlib (``pip install .[plots]``).

    python3 scripts/plot_figures.py results/fig1_chain results/fig3_parallel
"""
from __future__ import annotations

import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from mhqwalk.experiment import read_csv  # noqa: E402


def scatter(out: Path) -> Path:
    plot = out / "plot"
    fig, ax = plt.subplots(figsize=(5, 4.5))
    for f in sorted(plot.glob("scatter_*.csv")):
        method = f.stem.removeprefix("scatter_")
        pts = read_csv(f)
        ax.scatter([float(r["classical_tts"]) for r in pts], [float(r["quantum_tts"]) for r in pts],
                   s=14, label=method)
        lines = read_csv(plot / f"lines_{method}.csv")
        fit = [r for r in lines if r["line"] == "fit"]
        ax.plot([float(r["x"]) for r in fit], [float(r["y"]) for r in fit], lw=1)
    ref = [r for r in lines if r["line"] == "x=y"]
    ax.plot([float(r["x"]) for r in ref], [float(r["y"]) for r in ref], "k--", lw=1, label="x=y")
    ax.set(xscale="log", yscale="log", xlabel="classical min TTS", ylabel="quantum min TTS")
    ax.legend(fontsize=8)
    path = plot / "scatter.png"
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    return path


def traces(out: Path) -> Path:
    rows = read_csv(out / "plot" / "fig3_median_traces.csv")
    fig, ax = plt.subplots(figsize=(5.5, 4))
    steps = [float(r["step"]) for r in rows]
    for name in rows[0]:
        if name != "step":
            ax.plot(steps, [float(r[name]) for r in rows], label=name)
    ax.set(yscale="symlog", xlabel="normalized steps", ylabel="median energy above baseline")
    ax.legend(fontsize=8)
    path = out / "plot" / "traces.png"
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    return path


def main(argv=None) -> int:
    for d in (argv if argv is not None else sys.argv[1:]):
        out = Path(d)
        path = traces(out) if (out / "plot" / "fig3_median_traces.csv").exists() else scatter(out)
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
