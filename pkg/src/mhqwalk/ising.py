"""(k, d)-local Ising energy functions and spin-flip move sets.

Configurations of ``n`` spins are bit-packed into a Python ``int`` (or a numpy
integer array when working over the whole state space): bit ``s`` set means
spin ``s`` is ``-1``, clear means ``+1``. With that convention a move ``z``
is also a bitmask and applying it is ``x ^ z``, and a term product
``prod_{s in omega} x_s`` is ``(-1) ** popcount(x & mask)``.
"""
from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

# 2**26 doubles is 512 MiB; anything larger is not a desk-scale run.
MAX_ENUMERABLE_SPINS = 26

SpinConfig = int


def pack(spins: Sequence[int]) -> SpinConfig:
    """Pack a sequence of +1/-1 values into the bit representation."""
    x = 0
    for s, v in enumerate(spins):
        if v == -1:
            x |= 1 << s
        elif v != 1:
            raise ValueError(f"spin values must be +1 or -1, got {v!r} at {s}")
    return x


def unpack(x: SpinConfig, n: int) -> np.ndarray:
    """Return the +1/-1 vector of a packed configuration."""
    bits = (int(x) >> np.arange(n)) & 1
    return 1 - 2 * bits.astype(np.int8)


def mask_of(indices: Iterable[int]) -> int:
    m = 0
    for i in indices:
        m |= 1 << int(i)
    return m


def _as_config(x, n: int) -> int:
    if isinstance(x, (int, np.integer)):
        x = int(x)
        if not 0 <= x < (1 << n):
            raise ValueError(f"configuration {x} out of range for n={n}")
        return x
    arr = list(x)
    if len(arr) != n:
        raise ValueError(f"configuration has {len(arr)} spins, model has {n}")
    return pack(arr)


def check_enumerable(n: int) -> None:
    if n > MAX_ENUMERABLE_SPINS:
        raise MemoryError(f"2**{n} states exceed the enumeration guard (n <= {MAX_ENUMERABLE_SPINS})")


@dataclass(frozen=True)
class IsingModel:
    """Energy ``E(x) = sum_l J_l prod_{s in Omega_l} x_s``.

    ``terms`` may contain repeated supports; they are merged by summing the
    couplings. ``k`` and ``degree_bound`` are always recomputed from the terms.
    """

    n: int
    terms: tuple[tuple[float, tuple[int, ...]], ...]
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be positive")
        merged: dict[tuple[int, ...], float] = {}
        for j, omega in self.terms:
            support = tuple(sorted(set(int(s) for s in omega)))
            if not support:
                raise ValueError("term support must be non-empty")
            if len(support) != len(tuple(omega)):
                raise ValueError(f"repeated spin in term support {omega!r}")
            if support[0] < 0 or support[-1] >= self.n:
                raise ValueError(f"term support {omega!r} out of range for n={self.n}")
            merged[support] = merged.get(support, 0.0) + float(j)
        object.__setattr__(self, "terms", tuple((j, s) for s, j in merged.items()))

    @property
    def k(self) -> int:
        return max((len(s) for _, s in self.terms), default=0)

    @cached_property
    def membership(self) -> np.ndarray:
        counts = np.zeros(self.n, dtype=np.int64)
        for _, s in self.terms:
            counts[list(s)] += 1
        return counts

    @property
    def degree_bound(self) -> int:
        return int(self.membership.max()) if self.terms else 0

    @property
    def flip_symmetric(self) -> bool:
        """True when every term has even order, so E(x) equals E of the global flip of x."""
        return all(len(s) % 2 == 0 for _, s in self.terms)

    @cached_property
    def couplings(self) -> np.ndarray:
        return np.array([j for j, _ in self.terms], dtype=np.float64)

    @cached_property
    def masks(self) -> np.ndarray:
        return np.array([mask_of(s) for _, s in self.terms], dtype=np.int64)

    @cached_property
    def incident(self) -> tuple[tuple[int, ...], ...]:
        """Term indices touching each spin."""
        inc: list[list[int]] = [[] for _ in range(self.n)]
        for t, (_, s) in enumerate(self.terms):
            for i in s:
                inc[i].append(t)
        return tuple(tuple(v) for v in inc)

    def coupling_matrix(self) -> np.ndarray:
        """Dense symmetric J_ij for a pairwise model (zero diagonal)."""
        if self.k > 2 or any(len(s) == 1 for _, s in self.terms):
            raise ValueError("coupling_matrix needs a model with pair terms only")
        J = np.zeros((self.n, self.n))
        for j, (a, b) in self.terms:
            J[a, b] = J[b, a] = j
        return J

    def to_dict(self) -> dict:
        d = {"n": self.n, "terms": [{"j": j, "omega": list(s)} for j, s in self.terms]}
        d.update(self.meta)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "IsingModel":
        terms = tuple((float(t["j"]), tuple(t["omega"])) for t in d["terms"])
        meta = {k: v for k, v in d.items() if k not in ("n", "terms")}
        return cls(int(d["n"]), terms, meta)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "IsingModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class MoveSet:
    """Uniform proposal over a set of spin-flip moves (subsets of spins)."""

    moves: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        seen = set()
        clean = []
        for z in self.moves:
            z = tuple(sorted(int(i) for i in z))
            if not z:
                raise ValueError("empty (trivial) move is not allowed")
            if len(set(z)) != len(z):
                raise ValueError(f"move {z} repeats a spin")
            if z in seen:
                raise ValueError(f"duplicate move {z}")
            seen.add(z)
            clean.append(z)
        if not clean:
            raise ValueError("move set must be non-empty")
        object.__setattr__(self, "moves", tuple(clean))

    @property
    def N(self) -> int:
        return len(self.moves)

    @property
    def c(self) -> int:
        return max(len(z) for z in self.moves)

    @property
    def membership_bound(self) -> int:
        counts = defaultdict(int)
        for z in self.moves:
            for i in z:
                counts[i] += 1
        return max(counts.values())

    @cached_property
    def masks(self) -> np.ndarray:
        return np.array([mask_of(z) for z in self.moves], dtype=np.int64)

    def check_compatible(self, model: IsingModel) -> None:
        top = max(max(z) for z in self.moves)
        if top >= model.n:
            raise ValueError(f"move touches spin {top} but model has n={model.n}")


def single_spin_moves(n: int) -> MoveSet:
    return MoveSet(tuple((i,) for i in range(n)))


# -- generators ---------------------------------------------------------------

def build_chain(n: int) -> IsingModel:
    """Open ferromagnetic chain, J = -1 on every nearest-neighbour bond."""
    if n < 2:
        raise ValueError("chain needs n >= 2")
    terms = tuple((-1.0, (i, i + 1)) for i in range(n - 1))
    return IsingModel(n, terms, {"generator": "chain", "boundary": "open"})


def default_pair_count(n: int) -> int:
    """round(3.5 n), saturating at the complete graph for small n."""
    return min(int(round(3.5 * n)), n * (n - 1) // 2)


def build_random_sparse(n: int, pair_count: int | None = None, rng_seed: int = 0) -> IsingModel:
    """Gaussian couplings on ``pair_count`` distinct pairs drawn without replacement."""
    if pair_count is None:
        pair_count = default_pair_count(n)
    total = n * (n - 1) // 2
    if not 0 < pair_count <= total:
        raise ValueError(f"pair_count must be in (0, {total}], got {pair_count}")
    rng = np.random.default_rng(rng_seed)
    iu, ju = np.triu_indices(n, k=1)
    chosen = np.sort(rng.choice(total, size=pair_count, replace=False))
    js = rng.standard_normal(pair_count)
    terms = tuple((float(j), (int(iu[c]), int(ju[c]))) for j, c in zip(js, chosen))
    return IsingModel(n, terms, {"generator": "random_sparse", "seed": int(rng_seed),
                                 "pair_count": int(pair_count)})


def build_complete_binary(n: int, rng_seed: int = 0) -> IsingModel:
    """All pairs with couplings drawn uniformly from {+1, -1}."""
    if n < 2:
        raise ValueError("complete graph needs n >= 2")
    rng = np.random.default_rng(rng_seed)
    iu, ju = np.triu_indices(n, k=1)
    js = rng.choice(np.array([1.0, -1.0]), size=iu.size)
    terms = tuple((float(j), (int(a), int(b))) for j, a, b in zip(js, iu, ju))
    return IsingModel(n, terms, {"generator": "complete_binary", "seed": int(rng_seed)})


# -- evaluation ---------------------------------------------------------------

def _parity_sign(values: np.ndarray) -> np.ndarray:
    return 1 - 2 * (np.bitwise_count(values) & 1).astype(np.int64)


def energy(model: IsingModel, x) -> float:
    x = _as_config(x, model.n)
    total = 0.0
    for j, m in zip(model.couplings, model.masks):
        total += j if (int(m) & x).bit_count() % 2 == 0 else -j
    return float(total)


def energy_delta(model: IsingModel, x, z) -> float:
    """E(x.z) - E(x), summing only over terms that overlap the move."""
    x = _as_config(x, model.n)
    zmask = int(z) if isinstance(z, (int, np.integer)) else mask_of(z)
    touched = set()
    for i in range(model.n):
        if zmask >> i & 1:
            touched.update(model.incident[i])
    delta = 0.0
    for t in sorted(touched):
        m = int(model.masks[t])
        if (m & zmask).bit_count() % 2:
            before = model.couplings[t] if (m & x).bit_count() % 2 == 0 else -model.couplings[t]
            delta -= 2.0 * before
    return float(delta)


def neighborhood(model: IsingModel, z) -> frozenset[int]:
    zset = set(int(i) for i in z)
    out: set[int] = set()
    for _, s in model.terms:
        if zset.intersection(s):
            out.update(s)
    return frozenset(out)


def all_energies(model: IsingModel) -> np.ndarray:
    """Energy of every configuration, indexed by the packed integer."""
    check_enumerable(model.n)
    idx = np.arange(1 << model.n, dtype=np.int64)
    E = np.zeros(idx.size)
    for j, m in zip(model.couplings, model.masks):
        E += j * _parity_sign(idx & m)
    return E


def delta_table(model: IsingModel, moves: MoveSet, energies: np.ndarray | None = None) -> np.ndarray:
    """``D[x, j] = E(x ^ z_j) - E(x)`` for every configuration and move."""
    moves.check_compatible(model)
    E = all_energies(model) if energies is None else energies
    idx = np.arange(E.size, dtype=np.int64)
    flipped = idx[:, None] ^ moves.masks[None, :]
    return E[flipped] - E[:, None]


def ground_states(model: IsingModel, energies: np.ndarray | None = None, atol: float = 1e-9):
    """Brute-force minimum energy and the array of configurations achieving it."""
    E = all_energies(model) if energies is None else energies
    e0 = E.min()
    return float(e0), np.flatnonzero(E <= e0 + atol)
