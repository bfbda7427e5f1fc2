import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import naive_boltzmann, naive_energy, product_formula_sweep
from mhqwalk.ising import build_chain, build_complete_binary, build_random_sparse, pack, unpack
from mhqwalk.parallel import (
    ParallelWalkConfig,
    detailed_balance_residual,
    energy_trace,
    flip_probabilities,
    frozen_step,
    local_fields,
    max_tv,
    parallel_matrix_enumerated,
    parallel_matrix_product_formula,
    parallel_step,
    sequential_step,
    spin_energy,
    standard_mixture,
)


def pm(x: int, n: int) -> np.ndarray:
    return unpack(x, n).astype(np.int8)


def test_config_validation():
    m = build_chain(3)
    with pytest.raises(ValueError):
        ParallelWalkConfig(1.5, 1.0, m)
    with pytest.raises(ValueError):
        ParallelWalkConfig(0.5, -1.0, m)


def test_spin_energy_matches_model():
    m = build_complete_binary(7, rng_seed=1)
    J = m.coupling_matrix()
    for x in (0, 5, 77, 127):
        assert spin_energy(J, pm(x, 7)) == pytest.approx(naive_energy(m, x), abs=1e-12)


def test_q_zero_identity_and_q_one_beta_zero_negates():
    m = build_complete_binary(10, rng_seed=2)
    rng = np.random.default_rng(0)
    x = pm(437, 10)
    assert np.array_equal(parallel_step(x, ParallelWalkConfig(0.0, 2.0, m), rng), x)
    assert np.array_equal(parallel_step(x, ParallelWalkConfig(1.0, 0.0, m), rng), -x)


def test_cached_fields_follow_the_state():
    m = build_complete_binary(40, rng_seed=3)
    J = m.coupling_matrix()
    rng = np.random.default_rng(1)
    cfg = ParallelWalkConfig(0.3, 0.5, m)
    x = pm(int(rng.integers(0, 1 << 40)), 40)
    h = local_fields(J, x)
    for _ in range(200):
        x = parallel_step(x, cfg, rng, J, h)
    assert np.abs(h - local_fields(J, x)).max() <= 1e-9


def test_enumeration_matches_product_formula_n3():
    m = build_random_sparse(3, rng_seed=4)
    for q in (0.1, 0.5, 1.0):
        for beta in (0.05, 0.3, 2.0):
            W_enum = parallel_matrix_enumerated(m, q, beta)
            assert np.abs(W_enum - product_formula_sweep(m, q, beta)).max() <= 1e-12
            assert np.abs(W_enum - parallel_matrix_product_formula(m, q, beta)).max() <= 1e-12
            assert np.abs(W_enum.sum(axis=0) - 1).max() <= 1e-12


def test_sampled_sweep_matches_exact_distribution():
    m = build_random_sparse(3, rng_seed=5)
    q, beta = 0.4, 0.7
    W = parallel_matrix_product_formula(m, q, beta)
    cfg = ParallelWalkConfig(q, beta, m)
    rng = np.random.default_rng(2)
    x0 = 3
    counts = np.zeros(8)
    for _ in range(40_000):
        y = parallel_step(pm(x0, 3), cfg, rng)
        counts[pack(list(y))] += 1
    assert 0.5 * np.abs(counts / counts.sum() - W[:, x0]).sum() <= 0.02


def test_mixture_tv_bound_n3():
    m = build_random_sparse(3, rng_seed=6)
    for q in (0.2, 0.1, 0.05, 0.025):
        tv = max_tv(parallel_matrix_product_formula(m, q, 1.0), standard_mixture(m, q, 1.0))
        assert tv <= 2 * 3 * q ** 2


def test_mixture_guard():
    with pytest.raises(ValueError):
        standard_mixture(build_chain(3), 0.5, 1.0)


def test_flip_probabilities_bounds():
    P = flip_probabilities(build_random_sparse(4, rng_seed=7), 0.3, 1.0)
    assert P.shape == (16, 4) and np.all((P >= 0) & (P <= 0.3 + 1e-15))


def test_not_reversible_diagnostic():
    m = build_random_sparse(4, rng_seed=8)
    assert detailed_balance_residual(parallel_matrix_product_formula(m, 0.5, 1.0)) > 1e-6


@given(st.integers(0, 2**32 - 1), st.floats(0.05, 1.0), st.floats(0.0, 3.0))
def test_frozen_vs_sequential_differ_only_on_interacting_pairs(seed, q, beta):
    rng = np.random.default_rng(seed)
    n = 6
    m = build_random_sparse(n, pair_count=6, rng_seed=int(rng.integers(1 << 30)))
    J = m.coupling_matrix()
    cfg = ParallelWalkConfig(q, beta, m)
    x = pm(int(rng.integers(0, 1 << n)), n)
    up, ua = rng.random(n), rng.random(n)
    y_f, f_f = frozen_step(x, cfg, up, ua, J)
    y_s, f_s = sequential_step(x, cfg, up, ua, J)
    if not np.array_equal(y_f, y_s):
        # some spin saw a coupled neighbour flipped earlier in the sweep
        flipped = np.flatnonzero(f_f | f_s)
        assert any(J[i, j] != 0 for i in flipped for j in flipped if i != j)


def test_energy_trace_deterministic_and_monotone_steps():
    m = build_complete_binary(60, rng_seed=9)
    a = energy_trace(m, "parallel", 1.0, 6000, rng_seed=3, q=0.25, sample_stride=300)
    b = energy_trace(m, "parallel", 1.0, 6000, rng_seed=3, q=0.25, sample_stride=300)
    assert np.array_equal(a.energies, b.energies)
    assert np.all(np.diff(a.steps) > 0) and a.steps[-1] == 6000
    s = energy_trace(m, "standard", 1.0, 6000, rng_seed=3, sample_stride=300)
    assert np.all(np.diff(s.steps) > 0) and s.steps[-1] == 6000
    assert np.array_equal(s.energies, energy_trace(m, "standard", 1.0, 6000, 3, sample_stride=300).energies)
    assert a.meta["q"] == 0.25 and a.meta["field_drift"] <= 1e-9


def test_energy_trace_flat_from_local_minimum():
    m = build_complete_binary(30, rng_seed=10)
    J = m.coupling_matrix()
    x = pm(0, 30)
    # greedy descent to a local minimum
    while True:
        dE = -2.0 * x * (J @ x)
        i = int(np.argmin(dE))
        if dE[i] >= 0:
            break
        x[i] = -x[i]
    t = energy_trace(m, "standard", 1e6, 5000, rng_seed=0, x0=x, sample_stride=100)
    assert np.all(t.energies == t.energies[0])


def test_standard_walk_matches_boltzmann_mean():
    m = build_complete_binary(10, rng_seed=11)
    pi = naive_boltzmann(m, 1.0)
    E = np.array([naive_energy(m, x) for x in range(1024)])
    exact = float(pi @ E)
    means = []
    for seed in range(20):
        t = energy_trace(m, "standard", 1.0, 200_000, rng_seed=seed, sample_stride=10)
        means.append(t.energies[1000:].mean())
    se = np.std(means, ddof=1) / np.sqrt(len(means))
    assert abs(np.mean(means) - exact) <= 3 * se


def test_energy_trace_errors():
    m = build_chain(4)
    with pytest.raises(ValueError):
        energy_trace(m, "standard", 1.0, 0, 0)
    with pytest.raises(ValueError):
        energy_trace(m, "parallel", 1.0, 10, 0)
    with pytest.raises(ValueError):
        energy_trace(m, "tempering", 1.0, 10, 0)


def test_trace_above_baseline():
    m = build_complete_binary(20, rng_seed=12)
    t = energy_trace(m, "standard", 3.0, 4000, 1, sample_stride=200)
    assert np.allclose(t.above(t.energies.min()), t.energies - t.energies.min())
    assert t.final == t.energies[-1]
