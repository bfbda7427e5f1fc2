"""Metropolis-Hastings / Glauber walks on the full 2**n configuration space."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from .ising import (
    IsingModel,
    MoveSet,
    all_energies,
    check_enumerable,
    delta_table,
    energy,
    energy_delta,
)

DENSE_SPECTRAL_MAX_N = 8
GAP_SECTORS = ("full", "flip_symmetric")


class NumericalFailure(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (best residual {residual:.3e})")
        self.residual = residual


class AcceptanceRule(str, enum.Enum):
    METROPOLIS = "metropolis"
    GLAUBER = "glauber"


def acceptance(rule, delta_e, beta: float):
    """Acceptance probability of a move raising the energy by ``delta_e``.

    Works elementwise on arrays and saturates instead of overflowing.
    """
    rule = AcceptanceRule(rule)
    if beta < 0:
        raise ValueError("beta must be non-negative")
    x = beta * np.asarray(delta_e, dtype=np.float64)
    if beta == 0:
        x = np.zeros_like(x)
    if rule is AcceptanceRule.METROPOLIS:
        out = np.exp(-np.maximum(x, 0.0))
    else:
        out = expit(-x)
    return float(out) if out.ndim == 0 else out


def padded_size(N: int) -> int:
    return 1 << (N - 1).bit_length()


@dataclass(frozen=True)
class WalkSpec:
    model: IsingModel
    moves: MoveSet
    beta: float
    rule: AcceptanceRule = AcceptanceRule.METROPOLIS
    padded: bool = False

    def __post_init__(self):
        if not (math.isfinite(self.beta) and self.beta >= 0):
            raise ValueError(f"beta must be finite and >= 0, got {self.beta}")
        object.__setattr__(self, "rule", AcceptanceRule(self.rule))
        self.moves.check_compatible(self.model)

    @property
    def N(self) -> int:
        return self.moves.N

    @property
    def m_pad(self) -> int:
        return padded_size(self.N) if self.padded else self.N

    def with_beta(self, beta: float) -> "WalkSpec":
        return WalkSpec(self.model, self.moves, beta, self.rule, self.padded)


class WalkTables:
    """Per-(model, moves) tables shared by every beta: energies, deltas, neighbour indices.

    Building these once is what makes long annealing scans affordable.
    """

    def __init__(self, model: IsingModel, moves: MoveSet):
        check_enumerable(model.n)
        self.model = model
        self.moves = moves
        self.energies = all_energies(model)
        self.deltas = delta_table(model, moves, self.energies)
        idx = np.arange(self.energies.size, dtype=np.int64)
        self.neighbors = idx[:, None] ^ moves.masks[None, :]

    @property
    def dim(self) -> int:
        return self.energies.size

    def accept(self, rule, beta: float) -> np.ndarray:
        return acceptance(rule, self.deltas, beta)

    def lazy_step(self, p: np.ndarray, accept: np.ndarray, m_pad: int) -> np.ndarray:
        """One application of W to ``p`` using an acceptance table."""
        flow = p[:, None] * accept / m_pad
        return p - flow.sum(axis=1) + flow[self.neighbors, np.arange(self.moves.N)].sum(axis=1)


_tables_cache: dict[tuple, WalkTables] = {}


def tables_for(model: IsingModel, moves: MoveSet) -> WalkTables:
    key = (id(model), id(moves))
    t = _tables_cache.get(key)
    if t is None or t.model is not model or t.moves is not moves:
        if len(_tables_cache) > 8:
            _tables_cache.clear()
        t = _tables_cache[key] = WalkTables(model, moves)
    return t


def boltzmann(model: IsingModel, beta: float, energies: np.ndarray | None = None) -> np.ndarray:
    E = all_energies(model) if energies is None else energies
    w = np.exp(-beta * (E - E.min()))
    return w / w.sum()


@dataclass(frozen=True)
class TransitionMatrix:
    """Column-stochastic W with ``W[y, x]`` the probability of x -> y."""

    matrix: sp.csc_matrix
    spec: WalkSpec = field(compare=False)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def __matmul__(self, p):
        return self.matrix @ p


def transition_matrix(spec: WalkSpec) -> TransitionMatrix:
    t = tables_for(spec.model, spec.moves)
    A = t.accept(spec.rule, spec.beta) / spec.m_pad
    dim, N = A.shape
    cols = np.repeat(np.arange(dim), N)
    rows = t.neighbors.ravel()
    diag = 1.0 - A.sum(axis=1)
    W = sp.csc_matrix(
        (np.concatenate([A.ravel(), diag]), (np.concatenate([rows, np.arange(dim)]),
                                              np.concatenate([cols, np.arange(dim)]))),
        shape=(dim, dim),
    )
    W.sum_duplicates()
    return TransitionMatrix(W, spec)


def check_detailed_balance(W: TransitionMatrix, pi: np.ndarray) -> float:
    M = W.matrix.tocoo()
    if M.shape[0] != len(pi):
        raise ValueError("dimension mismatch")
    flux = M.data * pi[M.col]
    back = np.asarray(W.matrix[M.col, M.row]).ravel() * pi[M.row]
    return float(np.max(np.abs(flux - back), initial=0.0))


def symmetrized(W: TransitionMatrix) -> sp.csr_matrix:
    """S = diag(pi^-1/2) W diag(pi^1/2) written as sqrt(W_xy W_yx).

    Equal to the similarity transform for a reversible walk, but free of the
    huge/tiny ratios of pi at large beta.
    """
    M = W.matrix.tocsr()
    return M.multiply(M.T).sqrt().tocsr()


@dataclass(frozen=True)
class SpectralReport:
    lambda1: float
    Delta: float
    delta: float
    method: str
    residual: float

    def to_dict(self) -> dict:
        return dict(lambda1=self.lambda1, Delta=self.Delta, delta=self.delta,
                    method=self.method, residual=self.residual)


def lanczos_second(S, top: np.ndarray, *, tol: float = 1e-9, maxiter: int | None = None,
                   rng_seed: int = 0, mirror: np.ndarray | None = None) -> tuple[float, float]:
    """Largest eigenvalue of symmetric ``S`` on the complement of unit vector ``top``.

    Lanczos with full reorthogonalisation (including against ``top``, which is
    how the known stationary eigenvector is deflated). With ``mirror`` (an
    index permutation commuting with S) the Krylov space is kept inside the
    subspace of vectors with v == v[mirror]. Returns (value, residual).
    """
    def sym(v):
        return v if mirror is None else 0.5 * (v + v[mirror])

    dim = top.size
    if dim == 1:
        raise ValueError("no complement in one dimension")
    if maxiter is None:
        maxiter = int(50 * math.sqrt(dim)) + 2000
    maxiter = min(maxiter, dim - 1 if mirror is None else dim // 2 - 1)
    if maxiter < 1:
        raise ValueError("no complement in the requested subspace")
    rng = np.random.default_rng(rng_seed)
    q = sym(rng.standard_normal(dim))
    q -= top * (top @ q)
    q /= np.linalg.norm(q)
    Q = np.empty((min(maxiter + 1, 128), dim))
    Q[0] = q
    alphas, betas = [], []
    best_val, best_res = float("nan"), float("inf")
    for k in range(maxiter):
        w = S @ Q[k]
        alpha = Q[k] @ w
        w -= alpha * Q[k]
        if k:
            w -= betas[-1] * Q[k - 1]
        # two passes of classical Gram-Schmidt keep the basis orthogonal to working precision
        for _ in range(2):
            w = sym(w)
            w -= Q[: k + 1].T @ (Q[: k + 1] @ w)
            w -= top * (top @ w)
        b = np.linalg.norm(w)
        alphas.append(alpha)
        if k % 5 == 4 or b < 1e-14 or k == maxiter - 1:
            T = np.diag(alphas) + np.diag(betas, 1) + np.diag(betas, -1)
            vals, vecs = np.linalg.eigh(T)
            best_val = float(vals[-1])
            best_res = float(abs(b * vecs[-1, -1]))
            if best_res <= tol or b < 1e-14:
                return best_val, best_res
        betas.append(b)
        if k + 1 == Q.shape[0]:
            Q = np.concatenate([Q, np.empty_like(Q)])
        Q[k + 1] = w / b
    if best_res <= tol:
        return best_val, best_res
    raise NumericalFailure("Lanczos did not converge", best_res)


def _report(lambda1: float, method: str, residual: float) -> SpectralReport:
    lam = min(max(lambda1, -1.0), 1.0)
    return SpectralReport(lam, 1.0 - lam, math.acos(lam), method, residual)


def spectral(spec: WalkSpec, method: str = "auto", tol: float = 1e-9,
             sector: str = "full") -> SpectralReport:
    """Second-largest eigenvalue of W and the derived classical/quantum gaps.

    ``sector="flip_symmetric"`` restricts to distributions invariant under the
    global spin flip. Valid only for models whose terms all have even order;
    a walk started from a flip-symmetric state never leaves that subspace.
    """
    if sector not in GAP_SECTORS:
        raise ValueError(f"sector must be one of {GAP_SECTORS}")
    if method == "auto":
        method = "dense" if spec.model.n <= DENSE_SPECTRAL_MAX_N else "iterative"
    if method not in ("dense", "iterative"):
        raise ValueError(f"unknown method {method!r}")
    mirror = None
    if sector == "flip_symmetric":
        if not spec.model.flip_symmetric:
            raise ValueError("flip_symmetric sector needs a model with even-order terms only")
        dim = 1 << spec.model.n
        mirror = np.arange(dim) ^ (dim - 1)
    W = transition_matrix(spec)
    S = symmetrized(W)
    if method == "dense":
        A = S.toarray()
        if mirror is not None:
            # orthonormal basis (e_x + e_xbar)/sqrt(2) of the symmetric subspace
            reps = np.flatnonzero(np.arange(A.shape[0]) < mirror)
            P = np.zeros((A.shape[0], reps.size))
            P[reps, np.arange(reps.size)] = P[mirror[reps], np.arange(reps.size)] = math.sqrt(0.5)
            A = P.T @ A @ P
        vals, vecs = np.linalg.eigh(A)
        if vals.size == 1:
            return _report(1.0, method, 0.0)
        lam = float(vals[-2])
        res = float(np.linalg.norm(A @ vecs[:, -2] - lam * vecs[:, -2]))
        return _report(lam, method, res)
    t = tables_for(spec.model, spec.moves)
    top = np.sqrt(boltzmann(spec.model, spec.beta, t.energies))
    lam, res = lanczos_second(S, top, tol=tol, mirror=mirror)
    return _report(lam, method, res)


def evolve(schedule: Sequence[WalkSpec], p0: np.ndarray, return_drift: bool = False):
    """Push a distribution through W_1, ..., W_t in order.

    Each step is renormalised; the accumulated |1 - sum| is the drift.
    """
    p = np.array(p0, dtype=np.float64)
    drift = 0.0
    base = None
    for spec in schedule:
        if base is None:
            base = (spec.model, spec.moves)
        elif (spec.model, spec.moves) != base:
            raise ValueError("all specs in a schedule must share model and moves")
        p = transition_matrix(spec) @ p
        s = p.sum()
        drift += abs(1.0 - s)
        p /= s
    return (p, drift) if return_drift else p


def linear_betas(beta_final: float, steps: int) -> np.ndarray:
    """beta_j = (j / L) * beta_final for j = 1..L."""
    return beta_final * np.arange(1, steps + 1) / steps


def anneal_distribution(tables: WalkTables, rule, betas: Sequence[float], p0: np.ndarray,
                        m_pad: int | None = None) -> np.ndarray:
    """Fast equivalent of ``evolve`` on precomputed tables."""
    m_pad = tables.moves.N if m_pad is None else m_pad
    p = np.array(p0, dtype=np.float64)
    for b in betas:
        p = tables.lazy_step(p, tables.accept(rule, float(b)), m_pad)
        p /= p.sum()
    return p


@dataclass
class Trajectory:
    final: int
    energies: np.ndarray
    states: np.ndarray
    resync_drift: float = 0.0


RESYNC_INTERVAL = 1 << 16


def sample_trajectory(schedule: Sequence[WalkSpec], x0: int, rng_seed: int) -> Trajectory:
    """One stochastic run of the walk; ``energies[t]``/``states[t]`` are after step t."""
    if not schedule:
        return Trajectory(int(x0), np.empty(0), np.empty(0, dtype=np.int64))
    model, moves = schedule[0].model, schedule[0].moves
    rng = np.random.default_rng(rng_seed)
    x = int(x0)
    e = energy(model, x)
    slots = rng.random(len(schedule))
    coins = rng.random(len(schedule))
    masks = [int(m) for m in moves.masks]
    out = np.empty(len(schedule))
    visited = np.empty(len(schedule), dtype=np.int64)
    worst = 0.0
    for t, spec in enumerate(schedule):
        if (spec.model is not model and spec.model != model) or \
                (spec.moves is not moves and spec.moves != moves):
            raise ValueError("all specs in a schedule must share model and moves")
        j = int(slots[t] * spec.m_pad)
        if j < moves.N:
            d = energy_delta(model, x, masks[j])
            if coins[t] < acceptance(spec.rule, d, spec.beta):
                x ^= masks[j]
                e += d
        if (t + 1) % RESYNC_INTERVAL == 0:
            exact = energy(model, x)
            worst = max(worst, abs(exact - e))
            if worst > 1e-6:
                raise NumericalFailure("incremental energy drifted", worst)
            e = exact
        out[t] = e
        visited[t] = x
    return Trajectory(x, out, visited, worst)
