"""Irreversible parallel walk: one sweep proposes every spin with probability q,
all acceptances evaluated against the configuration at the start of the sweep.

Large-n dynamics work on +1/-1 ``int8`` vectors and a dense coupling matrix
with cached local fields ``h_i = sum_j J_ij x_j``, so a single-spin energy
change is ``-2 x_i h_i``. Small-n helpers build exact transition matrices for
checking the sweep against the product formula and the standard walk.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .ising import IsingModel, all_energies, single_spin_moves
from .walk import WalkSpec, acceptance, transition_matrix

RESYNC_SWEEPS = 1000


@dataclass(frozen=True)
class ParallelWalkConfig:
    q: float
    beta: float
    model: IsingModel

    def __post_init__(self):
        if not 0.0 <= self.q <= 1.0:
            raise ValueError(f"q must be in [0, 1], got {self.q}")
        if self.beta < 0:
            raise ValueError("beta must be non-negative")


def local_fields(J: np.ndarray, x: np.ndarray) -> np.ndarray:
    return J @ x.astype(np.float64)


def spin_energy(J: np.ndarray, x: np.ndarray) -> float:
    xf = x.astype(np.float64)
    return 0.5 * float(xf @ J @ xf)


def _metropolis(dE: np.ndarray, beta: float) -> np.ndarray:
    return np.exp(-np.maximum(beta * dE, 0.0))


def parallel_step(x: np.ndarray, cfg: ParallelWalkConfig, rng: np.random.Generator,
                  J: np.ndarray | None = None, h: np.ndarray | None = None) -> np.ndarray:
    """One sweep of the parallel walk; returns the new configuration.

    ``h`` (fields of ``x``) is updated in place when given, so a caller can
    carry it from sweep to sweep.
    """
    J = cfg.model.coupling_matrix() if J is None else J
    fields_ = local_fields(J, x) if h is None else h
    dE = -2.0 * x * fields_
    accept = _metropolis(dE, cfg.beta)
    propose = rng.random(x.size) < cfg.q
    flip = propose & (rng.random(x.size) < accept)
    if not flip.any():
        return x.copy()
    idx = np.flatnonzero(flip)
    if h is not None:
        h -= 2.0 * (J[:, idx] @ x[idx].astype(np.float64))
    y = x.copy()
    y[idx] = -y[idx]
    return y


def sequential_step(x: np.ndarray, cfg: ParallelWalkConfig, u_propose: np.ndarray,
                    u_accept: np.ndarray, J: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Same sweep with acceptances conditioned on the flips made so far.

    Returns (new config, flip mask). Shares the uniforms with a frozen sweep so
    the two can be compared draw for draw.
    """
    y = x.copy()
    flips = np.zeros(x.size, dtype=bool)
    for i in range(x.size):
        if u_propose[i] < cfg.q:
            dE = -2.0 * y[i] * float(J[i] @ y)
            if u_accept[i] < math.exp(-max(cfg.beta * dE, 0.0)):
                y[i] = -y[i]
                flips[i] = True
    return y, flips


def frozen_step(x: np.ndarray, cfg: ParallelWalkConfig, u_propose: np.ndarray,
                u_accept: np.ndarray, J: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    dE = -2.0 * x * local_fields(J, x)
    flips = (u_propose < cfg.q) & (u_accept < _metropolis(dE, cfg.beta))
    y = x.copy()
    y[flips] = -y[flips]
    return y, flips


# -- exact small-n matrices ---------------------------------------------------

def _spins_of(index: int, n: int) -> np.ndarray:
    return 1 - 2 * ((index >> np.arange(n)) & 1)


def flip_probabilities(model: IsingModel, q: float, beta: float) -> np.ndarray:
    """``P[x, i] = q * B_i(x)`` for every packed configuration."""
    E = all_energies(model)
    idx = np.arange(E.size)
    P = np.empty((E.size, model.n))
    for i in range(model.n):
        P[:, i] = q * acceptance("metropolis", E[idx ^ (1 << i)] - E, beta)
    return P


def parallel_matrix_product_formula(model: IsingModel, q: float, beta: float) -> np.ndarray:
    """Column-stochastic one-sweep matrix straight from the product formula."""
    P = flip_probabilities(model, q, beta)
    dim = 1 << model.n
    W = np.empty((dim, dim))
    for x in range(dim):
        for y in range(dim):
            diff = x ^ y
            w = 1.0
            for i in range(model.n):
                w *= P[x, i] if diff >> i & 1 else 1.0 - P[x, i]
            W[y, x] = w
    return W


def parallel_matrix_enumerated(model: IsingModel, q: float, beta: float) -> np.ndarray:
    """One-sweep matrix by enumerating the sweep's propose/accept branches spin by spin."""
    n = model.n
    E = all_energies(model)
    dim = 1 << n
    W = np.zeros((dim, dim))
    for x in range(dim):
        # frozen acceptance: evaluated once against the sweep-start state x
        B = [float(acceptance("metropolis", E[x ^ (1 << i)] - E[x], beta)) for i in range(n)]
        for outcome in itertools.product(("skip", "accept", "reject"), repeat=n):
            prob, y = 1.0, x
            for i, o in enumerate(outcome):
                if o == "skip":
                    prob *= 1.0 - q
                elif o == "accept":
                    prob *= q * B[i]
                    y ^= 1 << i
                else:
                    prob *= q * (1.0 - B[i])
            W[y, x] += prob
    return W


def standard_mixture(model: IsingModel, q: float, beta: float) -> np.ndarray:
    """(1 - qn) I + qn W_std: the standard walk run for q*n steps, to first order."""
    n = model.n
    if q * n > 1:
        raise ValueError("mixture needs q * n <= 1")
    W = transition_matrix(WalkSpec(model, single_spin_moves(n), beta)).dense()
    return (1.0 - q * n) * np.eye(W.shape[0]) + q * n * W


def max_tv(A: np.ndarray, B: np.ndarray) -> float:
    """Largest total-variation distance between corresponding columns."""
    return float(0.5 * np.abs(A - B).sum(axis=0).max())


def detailed_balance_residual(W: np.ndarray) -> float:
    """Residual of detailed balance w.r.t. the matrix's own stationary vector."""
    vals, vecs = np.linalg.eig(W)
    pi = np.real(vecs[:, np.argmin(np.abs(vals - 1.0))])
    pi = pi / pi.sum()
    flux = W * pi[None, :]
    return float(np.abs(flux - flux.T).max())


# -- long runs ----------------------------------------------------------------

@numba.njit(cache=True)
def _standard_run(J, x, h, beta, steps, stride, seed):
    np.random.seed(seed)
    n = x.size
    energy = 0.0
    for i in range(n):
        energy += 0.5 * x[i] * h[i]
    out = np.empty(steps // stride + 1)
    out[0] = energy
    k = 1
    for t in range(1, steps + 1):
        i = np.random.randint(n)
        dE = -2.0 * x[i] * h[i]
        if dE <= 0.0 or np.random.random() < math.exp(-beta * dE):
            xi = x[i]
            for j in range(n):
                h[j] -= 2.0 * J[j, i] * xi
            x[i] = -xi
            energy += dE
        if t % stride == 0:
            out[k] = energy
            k += 1
    return out[:k]


@dataclass
class EnergyTrace:
    steps: np.ndarray
    energies: np.ndarray
    meta: dict = field(default_factory=dict)

    def above(self, baseline: float) -> np.ndarray:
        return self.energies - baseline

    @property
    def final(self) -> float:
        return float(self.energies[-1])


def energy_trace(model: IsingModel, kind: str, beta: float, budget: int, rng_seed: int,
                 sample_stride: int | None = None, q: float | None = None,
                 x0: np.ndarray | None = None, J: np.ndarray | None = None) -> EnergyTrace:
    """Energy against normalised step count for the standard or parallel walk.

    ``kind`` is ``"standard"`` (``budget`` single-spin Metropolis updates) or
    ``"parallel"`` (``budget // n`` sweeps, each counted as ``n`` steps).
    """
    if budget <= 0:
        raise ValueError("budget must be positive")
    n = model.n
    J = model.coupling_matrix() if J is None else J
    rng = np.random.default_rng(rng_seed)
    x = (1 - 2 * rng.integers(0, 2, n)).astype(np.int8) if x0 is None else np.array(x0, np.int8)
    stride = sample_stride or n
    meta = {"kind": kind, "beta": beta, "seed": int(rng_seed), "n": n, "budget": int(budget)}
    if kind == "standard":
        h = local_fields(J, x)
        xs = x.astype(np.float64)
        seed = int(rng.integers(0, 2**31 - 1))
        energies = _standard_run(J, xs, h, float(beta), int(budget), int(stride), seed)
        steps = np.arange(energies.size, dtype=np.float64) * stride
        return EnergyTrace(steps, energies, meta)
    if kind != "parallel":
        raise ValueError(f"unknown walk kind {kind!r}")
    if q is None:
        raise ValueError("parallel walk needs q")
    meta["q"] = q
    cfg = ParallelWalkConfig(q, beta, model)
    sweeps = budget // n
    every = max(1, stride // n)
    h = local_fields(J, x)
    steps, energies = [0.0], [spin_energy(J, x)]
    worst = 0.0
    for s in range(1, sweeps + 1):
        x = parallel_step(x, cfg, rng, J, h)
        if s % RESYNC_SWEEPS == 0:
            fresh = local_fields(J, x)
            worst = max(worst, float(np.abs(fresh - h).max()))
            h[:] = fresh
        if s % every == 0 or s == sweeps:
            steps.append(float(s * n))
            energies.append(0.5 * float(x.astype(np.float64) @ h))
    meta["field_drift"] = worst
    return EnergyTrace(np.array(steps), np.array(energies), meta)
