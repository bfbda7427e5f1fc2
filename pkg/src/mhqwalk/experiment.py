"""Batch driver: config in, CSV/JSON out.

Each kind writes into ``out_dir``:

- ``fig1_chain`` / ``fig2_random``: results.csv (one row per instance and
  method), curves/<instance_id>.csv, errors.csv, summary.json with the log-log
  fits of every quantum method against the classical walk.
- ``fig3_parallel``: traces.csv and summary.json with final-energy medians.
- ``spectrum_suite``: spectrum.csv and summary.json.
- ``cost_report``: cost.json.

CSV files start with one ``# meta: {...}`` line holding the config echo, code
version and the flags in effect.
"""
from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import __version__
from .heuristics import (
    DURATION_CONVENTIONS,
    Problem,
    classical_min_tts,
    fit_speedup,
    unitary_min_tts,
    zeno_min_tts,
)
from .ising import build_chain, build_complete_binary, build_random_sparse, single_spin_moves
from .parallel import energy_trace
from .resources import component_costs, scenario, synthesis_count
from .szegedy import COMPLETIONS
from .walk import GAP_SECTORS, AcceptanceRule, NumericalFailure, WalkSpec, spectral

SCHEMA_VERSION = 1
KINDS = ("fig1_chain", "fig2_random", "fig3_parallel", "spectrum_suite", "cost_report")
METHODS = ("classical", "zeno", "zeno_rewind", "unitary")
RESULT_FIELDS = ("instance_id", "n", "seed", "method", "min_tts", "argmin_duration",
                 "argmin_steps", "success_prob", "wall_time_s", "schema_version")
ERROR_FIELDS = ("instance_id", "n", "seed", "method", "error", "message")


@dataclass(frozen=True)
class ScanParams:
    classical_max: int = 1 << 18
    zeno_max: int = 1 << 12
    unitary_max: int = 1 << 14


@dataclass(frozen=True)
class ParallelParams:
    n: int = 500
    beta: float = 3.0
    budget: int = 1_500_000
    seeds: int = 64
    q_values: tuple = (0.5, 0.25, 0.125)
    sample_stride: int = 5000


@dataclass(frozen=True)
class CostParams:
    n: int = 80 ** 3
    N: int = 80 ** 3
    d: int = 6
    epsilon: float = 1e-16
    alphas: tuple = (0.75, 0.5, 0.42)


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    master_seed: int
    sizes: tuple = ()
    instances_per_size: int = 1
    beta_final: float = 2.0
    rule: str = "metropolis"
    confidence: float = 0.99
    completion: str = "householder"
    duration: str = "steps"
    gap_sector: str = "full"
    methods: tuple = METHODS
    betas: tuple = (0.0, 0.5, 1.0, 2.0)
    out_dir: str = "results"
    workers: int = 1
    scan: ScanParams = field(default_factory=ScanParams)
    parallel: ParallelParams = field(default_factory=ParallelParams)
    cost: CostParams = field(default_factory=CostParams)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}; expected one of {KINDS}")
        if not isinstance(self.master_seed, int) or self.master_seed < 0:
            raise ValueError("master_seed must be a non-negative integer")
        AcceptanceRule(self.rule)
        if not 0 < self.confidence < 1:
            raise ValueError("confidence must be in (0, 1)")
        if self.completion not in COMPLETIONS:
            raise ValueError(f"completion must be one of {COMPLETIONS}")
        if self.duration not in DURATION_CONVENTIONS:
            raise ValueError(f"duration must be one of {DURATION_CONVENTIONS}")
        if self.gap_sector not in GAP_SECTORS:
            raise ValueError(f"gap_sector must be one of {GAP_SECTORS}")
        if self.beta_final < 0 or not math.isfinite(self.beta_final):
            raise ValueError("beta_final must be finite and >= 0")
        if self.instances_per_size < 1 or self.workers < 1:
            raise ValueError("instances_per_size and workers must be >= 1")
        bad = set(self.methods) - set(METHODS)
        if bad or "classical" not in self.methods:
            raise ValueError(f"methods must include 'classical' and be drawn from {METHODS}")
        if self.kind in ("fig1_chain", "fig2_random", "spectrum_suite") and not self.sizes:
            raise ValueError(f"{self.kind} needs a non-empty sizes list")
        lo = 2 if self.kind == "fig1_chain" else 3 if self.kind == "fig2_random" else 2
        for n in self.sizes:
            if not isinstance(n, int) or n < lo or n > 20:
                raise ValueError(f"size {n!r} out of range [{lo}, 20]")
        p = self.parallel
        if not all(0 <= q <= 1 for q in p.q_values) or p.seeds < 1 or p.budget < 1 or p.n < 2:
            raise ValueError("invalid parallel-walk parameters")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if "master_seed" not in d:
            raise ValueError("master_seed is mandatory")
        for key, sub in (("scan", ScanParams), ("parallel", ParallelParams), ("cost", CostParams)):
            if key in d:
                extra = set(d[key]) - {f.name for f in fields(sub)}
                if extra:
                    raise ValueError(f"unknown {key} keys: {sorted(extra)}")
                d[key] = sub(**{k: tuple(v) if isinstance(v, list) else v for k, v in d[key].items()})
        for key in ("sizes", "methods", "betas"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)

    def to_dict(self) -> dict:
        return json.loads(json.dumps(asdict(self)))


def load_config(path) -> ExperimentConfig:
    return ExperimentConfig.from_dict(json.loads(Path(path).read_text()))


def instance_seed(master_seed: int, n: int, index: int) -> int:
    """Seed of instance ``index`` at size ``n``; independent of other sizes and counts."""
    return int(np.random.SeedSequence([master_seed, n, index]).generate_state(1)[0])


def instance_id(kind: str, n: int, index: int) -> str:
    return f"{kind}-n{n:02d}-i{index:03d}"


def build_instance(cfg: ExperimentConfig, n: int, index: int):
    seed = instance_seed(cfg.master_seed, n, index)
    if cfg.kind == "fig1_chain":
        return build_chain(n), seed
    return build_random_sparse(n, rng_seed=seed), seed


def flags(cfg: ExperimentConfig) -> dict:
    return {
        "v_completion": cfg.completion,
        "tts_duration": cfg.duration,
        "zeno_gap_sector": cfg.gap_sector,
        "confidence": cfg.confidence,
        "target_set": "all_ground_states_atol_1e-9",
        "chain_boundary": "open",
        "classical_padding": "unpadded",
        "quantum_padding": "padded",
        "rule": cfg.rule,
    }


def meta(cfg: ExperimentConfig) -> dict:
    return {"config": cfg.to_dict(), "code_version": __version__, "schema_version": SCHEMA_VERSION,
            "flags": flags(cfg)}


# -- per-instance work ---------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else str(v)
    return str(v)


def run_instance(cfg: ExperimentConfig, n: int, index: int) -> dict:
    """All methods on one instance. Failures are caught per method."""
    model, seed = build_instance(cfg, n, index)
    iid = instance_id(cfg.kind, n, index)
    sc = cfg.scan
    pb = Problem(model, None, cfg.beta_final, cfg.rule, cfg.confidence, cfg.completion, cfg.gap_sector)
    rows, curves, errors = [], {}, []
    for method in cfg.methods:
        t0 = time.perf_counter()
        try:
            if method == "classical":
                curve = classical_min_tts(model, None, cfg.beta_final, problem=pb,
                                          max_steps=sc.classical_max)
            elif method in ("zeno", "zeno_rewind"):
                curve = zeno_min_tts(model, None, cfg.beta_final, rewind=method == "zeno_rewind",
                                     problem=pb, max_steps=sc.zeno_max)
            else:
                curve = unitary_min_tts(model, None, cfg.beta_final, problem=pb,
                                        duration=cfg.duration, max_steps=sc.unitary_max)
            if not math.isfinite(curve.min_tts):
                raise NumericalFailure("no finite TTS on the scanned grid", math.inf)
        except (NumericalFailure, ValueError, MemoryError, FloatingPointError) as exc:
            errors.append(dict(instance_id=iid, n=n, seed=seed, method=method,
                               error=type(exc).__name__, message=str(exc)))
            continue
        best = curve.best
        rows.append(dict(instance_id=iid, n=n, seed=seed, method=method, min_tts=best.tts,
                         argmin_duration=best.duration, argmin_steps=best.steps,
                         success_prob=best.success_prob,
                         wall_time_s=round(time.perf_counter() - t0, 3),
                         schema_version=SCHEMA_VERSION))
        curves[method] = [asdict(r) for r in curve.rows]
    return {"instance_id": iid, "rows": rows, "curves": curves, "errors": errors}


def _run_instance_star(args):
    return run_instance(*args)


# -- file helpers ----------------------------------------------------------------

def _write_csv(path: Path, header, rows, meta_line: dict | None) -> None:
    buf = io.StringIO()
    if meta_line is not None:
        buf.write("# meta: " + json.dumps(meta_line, sort_keys=True) + "\n")
    w = csv.DictWriter(buf, fieldnames=list(header), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: _fmt(r[k]) for k in header})
    try:
        path.write_text(buf.getvalue())
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def read_csv(path) -> list[dict]:
    path = Path(path)
    if not path.exists():
        return []
    lines = [ln for ln in path.read_text().splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def _row_key(r: dict):
    return (int(r["n"]), r["instance_id"], METHODS.index(r["method"]))


def _fit_summary(rows: list[dict], methods) -> dict:
    by_inst: dict[str, dict] = {}
    for r in rows:
        by_inst.setdefault(r["instance_id"], {})[r["method"]] = float(r["min_tts"])
    fits = {}
    for m in methods:
        if m == "classical":
            continue
        pairs = [(v["classical"], v[m]) for _, v in sorted(by_inst.items())
                 if "classical" in v and m in v]
        try:
            fits[m] = fit_speedup(pairs).to_dict()
        except ValueError as exc:
            fits[m] = {"error": str(exc), "points": len(pairs)}
    return fits


# -- runners ---------------------------------------------------------------------

@dataclass
class RunResult:
    out_dir: Path
    summary: dict
    error_count: int


def _pool_map(fn, tasks, workers: int):
    if workers <= 1 or len(tasks) <= 1:
        for t in tasks:
            yield fn(t)
        return
    with ProcessPoolExecutor(max_workers=workers) as ex:
        # map keeps submission order, so the single collector below writes deterministically
        yield from ex.map(fn, tasks)


def _run_benchmark(cfg: ExperimentConfig, out: Path, workers: int) -> RunResult:
    curves_dir = out / "curves"
    curves_dir.mkdir(parents=True, exist_ok=True)
    m = meta(cfg)
    results_path, errors_path = out / "results.csv", out / "errors.csv"
    rows = read_csv(results_path)
    have: dict[str, set] = {}
    for r in rows:
        have.setdefault(r["instance_id"], set()).add(r["method"])
    # an instance is done only when every method produced a row; partial ones rerun
    done = {iid for iid, ms in have.items() if set(cfg.methods) <= ms}
    rows = [r for r in rows if r["instance_id"] in done]
    errors: list[dict] = []
    tasks = [(cfg, n, i) for n in cfg.sizes for i in range(cfg.instances_per_size)
             if instance_id(cfg.kind, n, i) not in done]
    for res in _pool_map(_run_instance_star, tasks, workers):
        rows.extend(res["rows"])
        errors.extend(res["errors"])
        for method, curve in res["curves"].items():
            path = curves_dir / f"{res['instance_id']}__{method}.csv"
            _write_csv(path, ("steps", "duration", "success_prob", "tts"), curve, None)
        # flush after every instance so an interrupted run can resume
        rows.sort(key=_row_key)
        _write_csv(results_path, RESULT_FIELDS, rows, m)
    rows.sort(key=_row_key)
    _write_csv(results_path, RESULT_FIELDS, rows, m)
    _write_csv(errors_path, ERROR_FIELDS, errors, m)
    summary = dict(m, fits=_fit_summary(rows, cfg.methods), instances=len({r["instance_id"] for r in rows}),
                   errors=len(errors))
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    return RunResult(out, summary, len(errors))


@lru_cache(maxsize=2)
def _complete_instance(n: int, master: int):
    model = build_complete_binary(n, instance_seed(master, n, 0))
    return model, model.coupling_matrix()


def _trace_task(args):
    n, master, beta, budget, kind, q, k, stride = args
    model, J = _complete_instance(n, master)
    seed = int(np.random.SeedSequence([master, n, 0, k]).generate_state(1)[0])
    tr = energy_trace(model, kind, beta, budget, seed, sample_stride=stride, q=q, J=J)
    return kind, q, k, tr.steps, tr.energies


def _run_parallel(cfg: ExperimentConfig, out: Path, workers: int) -> RunResult:
    p = cfg.parallel
    walks = [("standard", None)] + [("parallel", float(q)) for q in p.q_values]
    tasks = [(p.n, cfg.master_seed, p.beta, p.budget, kind, q, k, p.sample_stride)
             for kind, q in walks for k in range(p.seeds)]
    traces = list(_pool_map(_trace_task, tasks, workers))
    baseline = min(float(e.min()) for *_, e in traces)
    rows = []
    finals: dict[str, list[float]] = {}
    for kind, q, k, steps, energies in traces:
        label = kind if q is None else f"parallel_q{q:g}"
        finals.setdefault(label, []).append(float(energies[-1]))
        for s, e in zip(steps, energies):
            rows.append(dict(series=label, seed_index=k, step=float(s), energy=float(e),
                             energy_above_baseline=float(e - baseline)))
    m = meta(cfg)
    m["baseline"] = {"rule": "best energy observed over all traces", "value": baseline}
    _write_csv(out / "traces.csv", ("series", "seed_index", "step", "energy", "energy_above_baseline"),
               rows, m)
    medians = {k: float(np.median(v)) for k, v in finals.items()}
    std = medians["standard"]
    summary = dict(m, final_median=medians,
                   final_median_above_baseline={k: v - baseline for k, v in medians.items()},
                   parallel_le_standard={k: v <= std for k, v in medians.items() if k != "standard"})
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    _write_csv(out / "errors.csv", ERROR_FIELDS, [], m)
    return RunResult(out, summary, 0)


def _run_spectrum(cfg: ExperimentConfig, out: Path) -> RunResult:
    rows, errors = [], []
    for n in cfg.sizes:
        for i in range(cfg.instances_per_size):
            seed = instance_seed(cfg.master_seed, n, i)
            models = [("chain", build_chain(n))]
            if n >= 3:
                models.append(("random", build_random_sparse(n, rng_seed=seed)))
            for name, model in models:
                for padded in (False, True):
                    for beta in cfg.betas:
                        spec = WalkSpec(model, single_spin_moves(n), float(beta), cfg.rule, padded)
                        iid = f"spectrum-{name}-n{n:02d}-i{i:03d}"
                        try:
                            r = spectral(spec)
                        except NumericalFailure as exc:
                            errors.append(dict(instance_id=iid, n=n, seed=seed, method="spectral",
                                               error=type(exc).__name__, message=str(exc)))
                            continue
                        rows.append(dict(instance_id=iid, n=n, seed=seed, padded=padded, beta=float(beta),
                                         lambda1=r.lambda1, Delta=r.Delta, delta=r.delta,
                                         sqrt_Delta=math.sqrt(max(r.Delta, 0.0)), method=r.method,
                                         residual=r.residual,
                                         quadratic_ok=r.delta >= math.sqrt(max(r.Delta, 0.0)) - 1e-9))
    m = meta(cfg)
    header = ("instance_id", "n", "seed", "padded", "beta", "lambda1", "Delta", "delta", "sqrt_Delta",
              "method", "residual", "quadratic_ok")
    _write_csv(out / "spectrum.csv", header, rows, m)
    _write_csv(out / "errors.csv", ERROR_FIELDS, errors, m)
    summary = dict(m, reports=len(rows), quadratic_violations=sum(not r["quadratic_ok"] for r in rows))
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    return RunResult(out, summary, len(errors))


def _run_cost(cfg: ExperimentConfig, out: Path) -> RunResult:
    c = cfg.cost
    report = {
        "costs": component_costs(c.n, c.N, c.d, c.epsilon).to_dict(),
        "synthesis_count": synthesis_count(c.epsilon),
        "scenarios": [scenario(a).to_dict() for a in c.alphas],
    }
    summary = dict(meta(cfg), **report)
    (out / "cost.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    _write_csv(out / "errors.csv", ERROR_FIELDS, [], meta(cfg))
    return RunResult(out, summary, 0)


def run(cfg: ExperimentConfig, out_dir=None, workers: int | None = None) -> RunResult:
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    workers = cfg.workers if workers is None else workers
    if cfg.kind in ("fig1_chain", "fig2_random"):
        return _run_benchmark(cfg, out, workers)
    if cfg.kind == "fig3_parallel":
        return _run_parallel(cfg, out, workers)
    if cfg.kind == "spectrum_suite":
        return _run_spectrum(cfg, out)
    return _run_cost(cfg, out)


# -- plot data -------------------------------------------------------------------

def emit_plot_data(out_dir) -> dict[str, Path]:
    """Scatter/fit/reference-line CSVs for benchmark runs, wide trace medians for fig3."""
    out = Path(out_dir)
    summary_path = out / "summary.json"
    if not summary_path.exists():
        raise ValueError(f"no summary.json in {out}")
    summary = json.loads(summary_path.read_text())
    plot = out / "plot"
    plot.mkdir(exist_ok=True)
    written: dict[str, Path] = {}
    kind = summary["config"]["kind"]
    if kind in ("fig1_chain", "fig2_random"):
        rows = read_csv(out / "results.csv")
        if not rows:
            raise ValueError(f"no results in {out}")
        by_inst: dict[str, dict] = {}
        for r in rows:
            by_inst.setdefault(r["instance_id"], {})[r["method"]] = float(r["min_tts"])
        for method, fit in summary["fits"].items():
            pts = [(iid, v["classical"], v[method]) for iid, v in sorted(by_inst.items())
                   if "classical" in v and method in v]
            path = plot / f"scatter_{method}.csv"
            _write_csv(path, ("instance_id", "classical_tts", "quantum_tts"),
                       [dict(instance_id=a, classical_tts=b, quantum_tts=c) for a, b, c in pts], None)
            written[f"scatter_{method}"] = path
            if "exponent" not in fit:
                continue
            xs = np.array([p[1] for p in pts])
            lo, hi = float(xs.min()), float(xs.max())
            lines = []
            for x in (lo, hi):
                lines.append(dict(line="fit", x=x, y=math.exp(fit["intercept"]) * x ** fit["exponent"]))
            for x in (lo, hi):
                lines.append(dict(line="x=y", x=x, y=x))
            path = plot / f"lines_{method}.csv"
            _write_csv(path, ("line", "x", "y"), lines, {"fit_slope": fit["exponent"], "reference_slope": 1.0})
            written[f"lines_{method}"] = path
    elif kind == "fig3_parallel":
        rows = read_csv(out / "traces.csv")
        if not rows:
            raise ValueError(f"no traces in {out}")
        series: dict[str, dict[float, list[float]]] = {}
        for r in rows:
            series.setdefault(r["series"], {}).setdefault(float(r["step"]), []).append(
                float(r["energy_above_baseline"]))
        names = sorted(series)
        steps = sorted(set().union(*[set(v) for v in series.values()]))
        wide = []
        for s in steps:
            row = {"step": s}
            for nme in names:
                vals = series[nme].get(s)
                row[nme] = float(np.median(vals)) if vals else float("nan")
            wide.append(row)
        path = plot / "fig3_median_traces.csv"
        _write_csv(path, ["step"] + names, wide, None)
        written["fig3"] = path
    else:
        raise ValueError(f"no plot data for kind {kind!r}")
    return written
