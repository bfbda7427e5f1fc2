"""Total time to solution for classical annealing and the two quantum heuristics.

Durations are counted in walk steps: one classical transition, one application
of the quantum walk operator, or 1/delta applications for a phase-gap-limited
projective measurement.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .ising import IsingModel, MoveSet, ground_states, single_spin_moves
from .szegedy import WalkOperator, apply_walk, init_state, measure_system_marginal
from .walk import (
    GAP_SECTORS,
    AcceptanceRule,
    WalkSpec,
    WalkTables,
    anneal_distribution,
    boltzmann,
    linear_betas,
    spectral,
    tables_for,
)

DEFAULT_CONFIDENCE = 0.99
MAX_TARGET_N = 20
DURATION_CONVENTIONS = ("steps", "none")


def tts(duration_cost: float, p: float, confidence: float = DEFAULT_CONFIDENCE) -> float:
    """duration * max(1, log(1 - confidence) / log(1 - p))."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"success probability {p} outside [0, 1]")
    if not 0.0 < confidence < 1.0:
        raise ValueError(f"confidence {confidence} outside (0, 1)")
    if not duration_cost > 0:
        raise ValueError("duration must be positive")
    if p == 0.0:
        return math.inf
    if p >= 1.0:
        return float(duration_cost)
    reps = math.log1p(-confidence) / math.log1p(-p)
    return float(duration_cost * max(1.0, reps))


@dataclass(frozen=True)
class Schedule:
    beta_final: float
    L: int

    def __post_init__(self):
        if self.L < 0:
            raise ValueError("schedule length must be >= 0")

    @property
    def betas(self) -> np.ndarray:
        if self.L == 0:
            return np.empty(0)
        return linear_betas(self.beta_final, self.L)


@dataclass(frozen=True)
class TargetSet:
    configs: np.ndarray
    energy: float

    def mass(self, p: np.ndarray) -> float:
        return float(p[self.configs].sum())


def target_set(model: IsingModel, energies: np.ndarray | None = None) -> TargetSet:
    """All brute-force ground states (the degenerate minima count as success)."""
    if model.n > MAX_TARGET_N:
        raise MemoryError(f"brute-force target search is limited to n <= {MAX_TARGET_N}")
    e0, configs = ground_states(model, energies)
    return TargetSet(configs, e0)


@dataclass(frozen=True)
class TTSRow:
    steps: int
    duration: float
    success_prob: float
    tts: float


@dataclass
class TTSCurve:
    method: str
    rows: list[TTSRow] = field(default_factory=list)

    @property
    def argmin(self) -> int:
        return int(np.argmin([r.tts for r in self.rows]))

    @property
    def best(self) -> TTSRow:
        return self.rows[self.argmin]

    @property
    def min_tts(self) -> float:
        return self.best.tts


def scan_min(method: str, evaluate: Callable[[int], tuple[float, float]], *,
             confidence: float, p_gate: float, grid: Iterable[int] | None = None,
             start: int = 1, ratio: float = 1.25, rise: float = 2.0,
             max_steps: int = 1 << 16, refine: float = 0.2, refine_points: int = 21) -> TTSCurve:
    """Minimise TTS over a step count.

    ``evaluate(steps)`` returns ``(duration_cost, success_prob)``. Without an
    explicit grid the scan walks a geometric grid and stops once TTS is ``rise``
    times its running minimum *and* the success probability has passed
    ``p_gate``; the gate keeps the scan from stopping in the early regime where
    TTS grows linearly only because nothing has happened yet.
    """
    cache: dict[int, TTSRow] = {}

    def row(s: int) -> TTSRow:
        if s not in cache:
            d, p = evaluate(s)
            cache[s] = TTSRow(s, float(d), float(p), tts(d, min(max(p, 0.0), 1.0), confidence))
        return cache[s]

    if grid is not None:
        for s in grid:
            row(int(s))
    else:
        best = math.inf
        x = float(start)
        s = start
        while True:
            r = row(s)
            best = min(best, r.tts)
            if (r.tts >= rise * best and r.success_prob >= p_gate) or s >= max_steps:
                break
            x *= ratio
            s = max(s + 1, int(round(x)))
        s_best = min(cache.values(), key=lambda r: r.tts).steps
        for f in np.linspace(1 - refine, 1 + refine, refine_points):
            s = int(round(s_best * f))
            if s >= start:
                row(s)
    return TTSCurve(method, [cache[s] for s in sorted(cache)])


def rewind_level_cost(F2: float, cost_prev: float, cost_cur: float) -> float:
    """Expected cost to reach Q_j from Q_{j-1} when failures are rewound.

    Absorbing chain over the last outcome: a = Q_{j-1}, b = Q_j^perp,
    c = Q_{j-1}^perp; measuring level j costs ``cost_cur`` and level j-1
    costs ``cost_prev``. Solved in closed form from
    E_a = u + r E_b, E_b = v + r E_a + a E_c, E_c = u + a E_b.
    """
    if not 0.0 <= F2 <= 1.0:
        raise ValueError("F2 must be a probability")
    if F2 == 0.0:
        return math.inf
    r = 1.0 - F2
    if r == 0.0:
        return cost_cur
    return cost_cur + (cost_cur + cost_prev) / (2.0 * F2)


def simulate_rewind_cost(F2: float, cost_prev: float, cost_cur: float, samples: int,
                         rng_seed: int = 0) -> tuple[float, float]:
    """Monte Carlo of the rewind measurement chain: (mean cost, standard error)."""
    rng = np.random.default_rng(rng_seed)
    cost = np.zeros(samples)
    # 0: holding Q_{j-1}, 1: holding Q_j^perp, 2: holding Q_{j-1}^perp
    state = np.zeros(samples, dtype=np.int8)
    live = np.ones(samples, dtype=bool)
    while live.any():
        idx = np.flatnonzero(live)
        u = rng.random(idx.size)
        st = state[idx]
        at_a, at_b, at_c = st == 0, st == 1, st == 2
        cost[idx[at_a | at_c]] += cost_cur
        cost[idx[at_b]] += cost_prev
        done = (at_a & (u < F2)) | (at_c & (u >= F2))
        nxt = st.copy()
        nxt[at_a & (u >= F2)] = 1
        nxt[at_c & (u < F2)] = 1
        nxt[at_b & (u < F2)] = 2
        nxt[at_b & (u >= F2)] = 0
        state[idx] = nxt
        live[idx[done]] = False
    return float(cost.mean()), float(cost.std(ddof=1) / math.sqrt(samples))


class Problem:
    """One optimisation instance with every table the heuristics share.

    The classical walk uses the unpadded move distribution, the quantum walks
    the padded one.
    """

    def __init__(self, model: IsingModel, moves: MoveSet | None = None, beta_final: float = 2.0,
                 rule=AcceptanceRule.METROPOLIS, confidence: float = DEFAULT_CONFIDENCE,
                 completion: str = "householder", gap_sector: str = "full"):
        self.model = model
        self.moves = moves if moves is not None else single_spin_moves(model.n)
        self.beta_final = float(beta_final)
        self.rule = AcceptanceRule(rule)
        self.confidence = confidence
        self.completion = completion
        if gap_sector not in GAP_SECTORS:
            raise ValueError(f"gap_sector must be one of {GAP_SECTORS}")
        if gap_sector == "flip_symmetric" and not model.flip_symmetric:
            raise ValueError("flip_symmetric gaps need a model with even-order terms only")
        self.gap_sector = gap_sector
        self.tables: WalkTables = tables_for(model, self.moves)
        self.target = target_set(model, self.tables.energies)
        self.quantum_spec = WalkSpec(model, self.moves, 0.0, self.rule, padded=True)
        self._gaps: dict[float, float] = {}

    @property
    def dim(self) -> int:
        return self.tables.dim

    def uniform(self) -> np.ndarray:
        return np.full(self.dim, 1.0 / self.dim)

    def boltzmann(self, beta: float) -> np.ndarray:
        return boltzmann(self.model, beta, self.tables.energies)

    def target_mass(self, beta: float) -> float:
        return self.target.mass(self.boltzmann(beta))

    def p_gate(self, fraction: float = 0.5) -> float:
        p0 = self.target_mass(0.0)
        return p0 + fraction * (self.target_mass(self.beta_final) - p0)

    # classical -------------------------------------------------------------
    def classical_success(self, t: int) -> float:
        p = anneal_distribution(self.tables, self.rule, linear_betas(self.beta_final, t),
                                self.uniform())
        return self.target.mass(p)

    # zeno ------------------------------------------------------------------
    def phase_gap(self, beta: float) -> float:
        key = float(beta)
        if key not in self._gaps:
            self._gaps[key] = spectral(self.quantum_spec.with_beta(key), sector=self.gap_sector).delta
        return self._gaps[key]

    def overlaps(self, L: int) -> np.ndarray:
        """F_j = sum_x sqrt(pi^{j-1}_x pi^j_x) for j = 1..L."""
        betas = np.concatenate([[0.0], linear_betas(self.beta_final, L)])
        roots = [np.sqrt(self.boltzmann(b)) for b in betas]
        return np.array([roots[j - 1] @ roots[j] for j in range(1, L + 1)])

    def zeno(self, L: int, rewind: bool) -> tuple[float, float]:
        """(expected walk applications, success probability) for an L-level run."""
        if L < 1:
            raise ValueError("Zeno schedule needs L >= 1")
        betas = np.concatenate([[0.0], linear_betas(self.beta_final, L)])
        inv = np.array([1.0 / self.phase_gap(b) for b in betas])
        F2 = np.minimum(self.overlaps(L) ** 2, 1.0)
        mass = self.target_mass(self.beta_final)
        if np.any(F2 == 0.0):
            return math.inf, 0.0
        if not rewind:
            return float(inv[1:].sum()), float(mass * np.prod(F2))
        cost = sum(rewind_level_cost(F2[j - 1], inv[j - 1], inv[j]) for j in range(1, L + 1))
        return float(cost), float(mass)

    def zeno_tts(self, L: int, rewind: bool) -> float:
        d, p = self.zeno(L, rewind)
        if math.isinf(d):
            return math.inf
        return tts(d, p, self.confidence)

    # unitary ---------------------------------------------------------------
    def handle(self, beta: float) -> WalkOperator:
        return WalkOperator(self.quantum_spec.with_beta(float(beta)), self.completion, self.tables)

    def unitary_state(self, L: int, p0: np.ndarray | None = None,
                      betas: Sequence[float] | None = None) -> np.ndarray:
        betas = linear_betas(self.beta_final, L) if betas is None else betas
        h0 = self.handle(0.0)
        psi = init_state(self.uniform() if p0 is None else p0, h0)
        for b in betas:
            apply_walk(psi, self.handle(b))
        return psi

    def unitary_success(self, L: int) -> float:
        if L == 0:
            return self.target.mass(self.uniform())
        return self.target.mass(measure_system_marginal(self.unitary_state(L)))


def _problem(model, moves, beta_final, confidence, rule, completion="householder") -> Problem:
    return Problem(model, moves, beta_final, rule, confidence, completion)


def classical_min_tts(model: IsingModel, moves: MoveSet | None, beta_final: float,
                      confidence: float = DEFAULT_CONFIDENCE, t_grid=None, *,
                      rule=AcceptanceRule.METROPOLIS, problem: Problem | None = None,
                      max_steps: int = 1 << 18) -> TTSCurve:
    pb = problem or _problem(model, moves, beta_final, confidence, rule)
    return scan_min("classical", lambda t: (t, pb.classical_success(t)), confidence=pb.confidence,
                    p_gate=pb.p_gate(), grid=t_grid, max_steps=max_steps)


def zeno_tts(model: IsingModel, moves: MoveSet | None, beta_final: float,
             confidence: float = DEFAULT_CONFIDENCE, L: int = 1, rewind: bool = True, *,
             rule=AcceptanceRule.METROPOLIS, problem: Problem | None = None) -> float:
    pb = problem or _problem(model, moves, beta_final, confidence, rule)
    return pb.zeno_tts(L, rewind)


def zeno_min_tts(model: IsingModel, moves: MoveSet | None, beta_final: float,
                 confidence: float = DEFAULT_CONFIDENCE, L_grid=None, rewind: bool = True, *,
                 rule=AcceptanceRule.METROPOLIS, problem: Problem | None = None,
                 max_steps: int = 1 << 12) -> TTSCurve:
    pb = problem or _problem(model, moves, beta_final, confidence, rule)
    method = "zeno_rewind" if rewind else "zeno"
    return scan_min(method, lambda L: pb.zeno(L, rewind), confidence=pb.confidence,
                    p_gate=pb.p_gate(), grid=L_grid, max_steps=max_steps)


def unitary_success_prob(model: IsingModel, moves: MoveSet | None, beta_final: float, L: int, *,
                         rule=AcceptanceRule.METROPOLIS, problem: Problem | None = None,
                         completion: str = "householder") -> float:
    pb = problem or _problem(model, moves, beta_final, DEFAULT_CONFIDENCE, rule, completion)
    return pb.unitary_success(L)


def unitary_min_tts(model: IsingModel, moves: MoveSet | None, beta_final: float,
                    confidence: float = DEFAULT_CONFIDENCE, L_grid=None, *,
                    rule=AcceptanceRule.METROPOLIS, problem: Problem | None = None,
                    duration: str = "steps", completion: str = "householder",
                    max_steps: int = 1 << 14) -> TTSCurve:
    """Min TTS of the measurement-free heuristic.

    ``duration="steps"`` bills L walk applications per run; ``"none"`` uses
    the bare repetition count.
    """
    if duration not in DURATION_CONVENTIONS:
        raise ValueError(f"unknown duration convention {duration!r}")
    pb = problem or _problem(model, moves, beta_final, confidence, rule, completion)

    def evaluate(L):
        return (L if duration == "steps" else 1.0), pb.unitary_success(L)

    return scan_min("unitary", evaluate, confidence=pb.confidence, p_gate=pb.p_gate(),
                    grid=L_grid, max_steps=max_steps)


@dataclass(frozen=True)
class SpeedupFit:
    pairs: tuple[tuple[float, float], ...]
    exponent: float
    intercept: float
    residual: float

    def to_dict(self) -> dict:
        return dict(exponent=self.exponent, intercept=self.intercept, residual=self.residual,
                    points=len(self.pairs))


def fit_speedup(pairs: Sequence[tuple[float, float]]) -> SpeedupFit:
    """Least-squares slope of log(quantum) against log(classical)."""
    pairs = tuple((float(c), float(q)) for c, q in pairs)
    if len(pairs) < 3:
        raise ValueError("need at least 3 (classical, quantum) pairs")
    arr = np.array(pairs)
    if np.any(arr <= 0) or not np.all(np.isfinite(arr)):
        raise ValueError("times must be positive and finite")
    x, y = np.log(arr[:, 0]), np.log(arr[:, 1])
    if np.ptp(x) == 0:
        raise ValueError("classical times have no spread")
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    return SpeedupFit(pairs, float(slope), float(intercept), float(np.sqrt(np.mean(resid ** 2))))
