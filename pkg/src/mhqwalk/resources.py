"""Gate-count bookkeeping for one walk step and the gate-speed break-even scenarios.

Costs are in units of third-level Clifford gates (Toffoli, sqrt-SWAP, T up to a
small factor). Cells that are only known up to a big-O are evaluated with
constant 1 and marked ``bound=True``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

COMPONENT_ORDER = ("V", "F", "R", "B")

# published (online, offline) break-even gate times in seconds, keyed by exponent
REFERENCE_GATE_TIMES = {
    0.75: (0.5e-12, 0.1e-9),
    0.5: (1e-9, 20e-6),
    0.42: (0.5e-6, 1e-3),
}

MONTH_S = 2.6e6


def _check_eps(epsilon: float) -> None:
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must be in (0, 1), got {epsilon}")


def _log2_ceil(N: int) -> int:
    return (N - 1).bit_length()


@dataclass(frozen=True)
class ComponentCost:
    depth_3L: float
    count_3L: float
    total_depth: float
    qubits: int
    formula: str
    bound: bool = False


@dataclass(frozen=True)
class CostReport:
    n: int
    N: int
    N_padded: int
    d: int
    epsilon: float
    components: dict = field(default_factory=dict)

    @property
    def total_depth(self) -> float:
        return sum(c.total_depth for c in self.components.values())

    @property
    def total_count(self) -> float:
        return sum(c.count_3L for c in self.components.values())

    @property
    def qubits(self) -> int:
        return max(c.qubits for c in self.components.values())

    def to_dict(self) -> dict:
        return {
            "n": self.n, "N": self.N, "N_padded": self.N_padded, "d": self.d,
            "epsilon": self.epsilon,
            "components": {k: asdict(v) for k, v in self.components.items()},
            "totals": {"total_depth": self.total_depth, "count_3L": self.total_count,
                       "qubits": self.qubits},
        }


def component_costs(n: int, N: int, d: int, epsilon: float) -> CostReport:
    """Per-component costs of one walk step, with the move register padded to 2**ceil(log2 N)."""
    if n < 1 or N < 1:
        raise ValueError("n and N must be >= 1")
    if d < 0:
        raise ValueError("d must be >= 0")
    _check_eps(epsilon)
    lg = _log2_ceil(N)
    M = 1 << lg
    log_eps = math.log2(1.0 / epsilon)
    rot = (2 ** d) * log_eps
    comps = {
        "V": ComponentCost(lg + 1, 2 * M, lg + 1, 2 * M, "log2 N + 1 | 2N"),
        "F": ComponentCost(1, M, lg + 1, 2 * M + n, "1 | N"),
        "R": ComponentCost(2 * lg, 4 * M, 2 * lg, 2 * M, "2 log2 N | 4N"),
        "B": ComponentCost(rot, M * rot, max(lg, 1) * rot, 2 * M + n + 2,
                           "2^d log2(1/eps) | N 2^d log2(1/eps)", bound=True),
    }
    return CostReport(n, N, M, d, epsilon, comps)


def rotation_depth(N: int, d: int) -> int:
    """Coin rotation layers per step before synthesis: ceil(log2 N) * 2**d."""
    return max(_log2_ceil(N), 1) * 2 ** d


def synthesis_count(epsilon: float) -> int:
    """T gates per synthesised single-qubit rotation at accuracy epsilon."""
    _check_eps(epsilon)
    # round before ceil so exact powers of two do not pick up float noise
    return math.ceil(round(4.0 * math.log2(1.0 / epsilon), 9))


@dataclass(frozen=True)
class ScenarioReport:
    alpha: float
    classical_rate: float
    duration_s: float
    classical_steps: float
    quantum_steps: float
    per_step_depth: float
    synthesis_factor: float
    gate_time_online: float
    gate_time_offline: float
    reference: tuple | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        if self.reference is not None:
            d["reference"] = {"online": self.reference[0], "offline": self.reference[1]}
            d["ratio_online"] = self.gate_time_online / self.reference[0]
            d["ratio_offline"] = self.gate_time_offline / self.reference[1]
        return d


def scenario(alpha: float, classical_rate: float = 1e12, duration_s: float = MONTH_S,
             per_step_depth: float = 1000, synthesis_factor: float = 200) -> ScenarioReport:
    """Logical gate time a quantum machine needs to match a classical run.

    The quantum machine gets ``classical_steps ** alpha`` walk steps in the same
    wall time; each step is ``per_step_depth`` rotations of ``synthesis_factor``
    gates when rotations are synthesised online. Teleporting pre-synthesised
    rotations removes the factor from the critical path.
    """
    for name, v in (("alpha", alpha), ("classical_rate", classical_rate), ("duration_s", duration_s),
                    ("per_step_depth", per_step_depth), ("synthesis_factor", synthesis_factor)):
        if not (math.isfinite(v) and v > 0):
            raise ValueError(f"{name} must be positive, got {v}")
    steps = classical_rate * duration_s
    q_steps = steps ** alpha
    online = duration_s / (q_steps * per_step_depth * synthesis_factor)
    ref = REFERENCE_GATE_TIMES.get(round(alpha, 2))
    return ScenarioReport(alpha, classical_rate, duration_s, steps, q_steps, per_step_depth,
                          synthesis_factor, online, online * synthesis_factor, ref)


def reference_table(**kwargs) -> list[ScenarioReport]:
    return [scenario(a, **kwargs) for a in REFERENCE_GATE_TIMES]
