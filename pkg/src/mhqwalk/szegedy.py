"""Exact simulation of the walk operator U = R V^T B^T F B V.

The state lives on System (x) x Move (m) x Coin (c). The unary move register
only ever occupies the all-zeros state (``m = 0``, the null slot) or a one-hot
state (``m = j`` for move ``j``), so it is stored as ``M_pad + 1`` slots and the
amplitudes form an array of shape ``(2**n, M_pad + 1, 2)``.
"""
from __future__ import annotations

import math

import numpy as np

from .walk import WalkSpec, WalkTables, boltzmann, tables_for, transition_matrix

COMPONENTS = ("V", "V_dag", "B", "B_dag", "F", "R")
COMPLETIONS = ("householder", "rotation_tree")
DENSE_X_MAX_N = 8
DENSE_U_MAX_N = 4


def householder_move_matrix(m_pad: int) -> np.ndarray:
    """Real involution sending the null slot to the uniform one-hot superposition."""
    u = np.full(m_pad + 1, 1.0 / math.sqrt(m_pad))
    u[0] = 0.0
    w = -u
    w[0] += 1.0
    w /= np.linalg.norm(w)
    return np.eye(m_pad + 1) - 2.0 * np.outer(w, w)


def rotation_tree_move_matrix(m_pad: int) -> np.ndarray:
    """Real orthogonal V built like a split tree of 45-degree Givens rotations.

    The null slot is first rotated onto slot 1, then each occupied slot ``i``
    is split with slot ``i + stride`` for halving strides. Mirrors the sqrt-SWAP
    tree with all gate phases dropped.
    """
    dim = m_pad + 1
    V = np.eye(dim)

    def givens(a, b, theta):
        G = np.eye(dim)
        c, s = math.cos(theta), math.sin(theta)
        G[a, a] = c
        G[b, a] = s
        G[a, b] = -s
        G[b, b] = c
        return G

    V = givens(0, 1, math.pi / 2) @ V
    stride = m_pad // 2
    occupied = [1]
    while stride >= 1:
        for i in list(occupied):
            V = givens(i, i + stride, math.pi / 4) @ V
            occupied.append(i + stride)
        stride //= 2
    return V


class WalkOperator:
    """Handle for the compact walk operator of one (padded) walk spec.

    Rotation amplitudes sqrt(A) / sqrt(1 - A) are tabulated per (x, move)
    up front because the same handle is applied many times.
    """

    def __init__(self, spec: WalkSpec, completion: str = "householder",
                 tables: WalkTables | None = None):
        if completion not in COMPLETIONS:
            raise ValueError(f"unknown V completion {completion!r}")
        self.spec = spec
        self.completion = completion
        self.tables = tables if tables is not None else tables_for(spec.model, spec.moves)
        A = self.tables.accept(spec.rule, spec.beta)
        self.sin = np.sqrt(A)
        self.cos = np.sqrt(1.0 - A)
        self.m_pad = spec.m_pad
        self.N = spec.N
        self.dim_x = self.tables.dim
        if completion == "householder":
            self.vmat = householder_move_matrix(self.m_pad)
        else:
            self.vmat = rotation_tree_move_matrix(self.m_pad)
        self.vmat_t = np.ascontiguousarray(self.vmat.T)
        self._cols = np.arange(self.N)

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.dim_x, self.m_pad + 1, 2)

    def with_beta(self, beta: float) -> "WalkOperator":
        return WalkOperator(self.spec.with_beta(beta), self.completion, self.tables)


def init_state(p_sys, handle: WalkOperator, atol: float = 1e-10) -> np.ndarray:
    """Coherent encoding sum_x sqrt(p_x) |x, null, 0>.

    ``p_sys`` is a distribution over all 2**n configurations or a single packed
    configuration (int).
    """
    psi = np.zeros(handle.shape, dtype=np.complex128)
    if isinstance(p_sys, (int, np.integer)):
        if not 0 <= int(p_sys) < handle.dim_x:
            raise ValueError("configuration out of range")
        psi[int(p_sys), 0, 0] = 1.0
        return psi
    p = np.asarray(p_sys, dtype=np.float64)
    if p.shape != (handle.dim_x,):
        raise ValueError(f"distribution has shape {p.shape}, expected ({handle.dim_x},)")
    if np.any(p < -atol) or abs(p.sum() - 1.0) > atol:
        raise ValueError("input distribution is not normalized")
    psi[:, 0, 0] = np.sqrt(np.clip(p, 0.0, None))
    return psi


def _rotate_coin(state: np.ndarray, h: WalkOperator, sign: float) -> None:
    block = state[:, 1:h.N + 1, :]
    c0 = block[..., 0].copy()
    c1 = block[..., 1]
    s = sign * h.sin
    block[..., 0] = h.cos * c0 - s * c1
    block[..., 1] = s * c0 + h.cos * c1


def apply_component(state: np.ndarray, which: str, handle: WalkOperator) -> np.ndarray:
    """Apply one circuit component in place and return the state."""
    h = handle
    if state.shape != h.shape:
        raise ValueError(f"state shape {state.shape} does not match handle {h.shape}")
    if which in ("V", "V_dag"):
        mat = h.vmat if which == "V" else h.vmat_t
        state[:] = np.einsum("mk,xkc->xmc", mat, state, optimize=True)
    elif which == "B":
        _rotate_coin(state, h, 1.0)
    elif which == "B_dag":
        _rotate_coin(state, h, -1.0)
    elif which == "F":
        sub = state[:, 1:h.N + 1, 1]
        sub[:] = sub[h.tables.neighbors, h._cols]
    elif which == "R":
        # 2*Pi_0 - I: the circuit's reflection up to a global sign, so that the
        # coherent stationary state is a +1 eigenvector
        state *= -1.0
        state[:, 0, 0] *= -1.0
    else:
        raise ValueError(f"unknown component {which!r}; expected one of {COMPONENTS}")
    return state


WALK_SEQUENCE = ("V", "B", "F", "B_dag", "V_dag", "R")


def apply_walk(state: np.ndarray, handle: WalkOperator) -> np.ndarray:
    for which in WALK_SEQUENCE:
        apply_component(state, which, handle)
    return state


def measure_system_marginal(state: np.ndarray) -> np.ndarray:
    p = (state.real ** 2 + state.imag ** 2).sum(axis=(1, 2))
    return p


def _compact_dim(handle: WalkOperator) -> int:
    return int(np.prod(handle.shape))


def extract_X(handle: WalkOperator) -> np.ndarray:
    """Projection of V^T B^T F B V onto the (null, coin 0) subspace, as a 2**n matrix."""
    if handle.spec.model.n > DENSE_X_MAX_N:
        raise MemoryError(f"extract_X is limited to n <= {DENSE_X_MAX_N}")
    X = np.empty((handle.dim_x, handle.dim_x))
    for x in range(handle.dim_x):
        psi = init_state(x, handle)
        for which in WALK_SEQUENCE[:-1]:
            apply_component(psi, which, handle)
        X[:, x] = psi[:, 0, 0].real
    return X


def walk_matrix(handle: WalkOperator) -> np.ndarray:
    """Dense matrix of the compact walk operator (column k = U e_k)."""
    dim = _compact_dim(handle)
    U = np.empty((dim, dim), dtype=np.complex128)
    for k in range(dim):
        psi = np.zeros(dim, dtype=np.complex128)
        psi[k] = 1.0
        U[:, k] = apply_walk(psi.reshape(handle.shape), handle).ravel()
    return U


def eigenphases_small(handle: WalkOperator) -> np.ndarray:
    """Sorted eigenphases in [0, pi] of the full compact operator."""
    if handle.spec.model.n > DENSE_U_MAX_N:
        raise MemoryError(f"eigenphases_small is limited to n <= {DENSE_U_MAX_N}")
    ev = np.linalg.eigvals(walk_matrix(handle))
    return np.sort(np.abs(np.angle(ev)))


def fixed_point_residual(handle: WalkOperator) -> float:
    pi = boltzmann(handle.spec.model, handle.spec.beta, handle.tables.energies)
    psi = init_state(pi, handle)
    ref = psi.copy()
    apply_walk(psi, handle)
    return float(np.linalg.norm(psi - ref))


def similarity_X(spec: WalkSpec) -> np.ndarray:
    """diag(pi^-1/2) W diag(pi^1/2) computed directly from the classical matrix."""
    W = transition_matrix(spec).dense()
    pi = boltzmann(spec.model, spec.beta)
    r = np.sqrt(pi)
    return W * r[None, :] / r[:, None]


def classical_spectrum(spec: WalkSpec) -> np.ndarray:
    """Eigenvalues of W, descending, with the stationary eigenvalue set to exactly 1.

    The remaining eigenvalues come from S projected off sqrt(pi); this keeps
    arccos(lambda_0) = 0 exact instead of ~1e-8 from rounding near 1.
    """
    from .walk import symmetrized

    S = symmetrized(transition_matrix(spec)).toarray()
    top = np.sqrt(boltzmann(spec.model, spec.beta))
    P = np.eye(top.size) - np.outer(top, top)
    vals = np.linalg.eigvalsh(P @ S @ P)
    # the projected matrix has a spurious 0 for the top direction
    k = int(np.argmin(np.abs(vals)))
    rest = np.delete(vals, k)
    # within the eigensolver's backward error of +-1 the value is +-1; arccos
    # would otherwise amplify 1e-16 of rounding into 1e-8 of phase
    tol = 64 * np.finfo(float).eps * max(1, top.size ** 0.5)
    rest[np.abs(rest - 1.0) < tol] = 1.0
    rest[np.abs(rest + 1.0) < tol] = -1.0
    return np.concatenate([[1.0], np.sort(rest)[::-1]])
