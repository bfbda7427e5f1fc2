import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from mhqwalk.resources import (
    COMPONENT_ORDER,
    MONTH_S,
    REFERENCE_GATE_TIMES,
    component_costs,
    reference_table,
    rotation_depth,
    scenario,
    synthesis_count,
)


def test_closed_form_cells_N16():
    r = component_costs(16, 16, 2, 1e-3)
    V, F, R = r.components["V"], r.components["F"], r.components["R"]
    assert (V.depth_3L, V.count_3L, V.qubits) == (5, 32, 32)
    assert (F.depth_3L, F.count_3L, F.total_depth, F.qubits) == (1, 16, 5, 48)
    assert (R.depth_3L, R.count_3L, R.qubits) == (8, 64, 32)
    assert not (V.bound or F.bound or R.bound) and r.components["B"].bound


def test_R_count_N1():
    r = component_costs(1, 1, 0, 0.5)
    assert r.components["R"].count_3L == 4
    assert r.components["V"].depth_3L == 1


def test_B_cells():
    B = component_costs(4, 4, 3, 2 ** -10).components["B"]
    assert B.depth_3L == 8 * 10 and B.count_3L == 4 * 80 and B.qubits == 2 * 4 + 4 + 2


def test_padding_rounds_up():
    a, b = component_costs(5, 5, 1, 0.1), component_costs(5, 8, 1, 0.1)
    assert a.N_padded == 8
    assert a.components == b.components


def test_report_dict_and_totals():
    r = component_costs(8, 8, 2, 1e-4)
    d = r.to_dict()
    assert set(d["components"]) == set(COMPONENT_ORDER)
    assert d["totals"]["count_3L"] == pytest.approx(sum(c["count_3L"] for c in d["components"].values()))
    assert r.qubits == 2 * 8 + 8 + 2


@pytest.mark.parametrize("args", [(0, 4, 1, 0.1), (4, 0, 1, 0.1), (4, 4, -1, 0.1), (4, 4, 1, 0.0), (4, 4, 1, 1.0)])
def test_component_costs_errors(args):
    with pytest.raises(ValueError):
        component_costs(*args)


def test_large_instance_rotation_depth():
    # 80^3 spins on a cubic lattice with six neighbours per spin
    assert 900 <= rotation_depth(80 ** 3, 6) <= 1300
    r = component_costs(80 ** 3, 80 ** 3, 6, 1e-16)
    assert max(r.components, key=lambda k: r.components[k].count_3L) == "B"


def test_synthesis_count_examples():
    assert 200 <= synthesis_count(1e-16) <= 220
    assert synthesis_count(0.5) == 4
    assert synthesis_count(2 ** -10) == 40
    for eps in (0.0, 1.0, -0.1):
        with pytest.raises(ValueError):
            synthesis_count(eps)


def test_scenario_defaults():
    s = scenario(0.5)
    assert s.classical_steps == pytest.approx(1e12 * MONTH_S)
    assert s.quantum_steps == pytest.approx(math.sqrt(s.classical_steps))
    assert s.gate_time_offline == pytest.approx(200 * s.gate_time_online)


def test_reference_table_within_factors():
    for s in reference_table():
        on, off = REFERENCE_GATE_TIMES[s.alpha]
        for got, ref in ((s.gate_time_online, on), (s.gate_time_offline, off)):
            assert 1 / 30 <= got / ref <= 30
    for alpha in (0.75, 0.42):
        s = scenario(alpha)
        assert 1 / 3 <= s.gate_time_online / REFERENCE_GATE_TIMES[alpha][0] <= 3


def test_scenario_errors():
    with pytest.raises(ValueError):
        scenario(0.0)
    with pytest.raises(ValueError):
        scenario(0.5, classical_rate=-1)
    with pytest.raises(ValueError):
        scenario(0.5, duration_s=float("nan"))


def test_scenario_dict_has_ratios():
    d = scenario(0.75).to_dict()
    assert d["ratio_online"] == pytest.approx(d["gate_time_online"] / 0.5e-12)
    assert "ratio_online" not in scenario(0.6).to_dict()


@given(st.floats(0.2, 0.95), st.floats(0.2, 0.95))
def test_gate_time_decreases_with_exponent(a, b):
    if a < b:
        assert scenario(a).gate_time_online > scenario(b).gate_time_online


@given(st.floats(0.3, 0.9), st.floats(1.0, 1e4))
def test_offline_is_online_times_factor(alpha, factor):
    s = scenario(alpha, synthesis_factor=factor)
    assert s.gate_time_offline == pytest.approx(s.gate_time_online * factor, rel=1e-12)
    assert s.gate_time_online > 0


@given(st.integers(1, 5000), st.integers(0, 8), st.floats(1e-12, 0.5))
def test_counts_non_negative_and_padding_invariant(N, d, eps):
    r = component_costs(3, N, d, eps)
    M = r.N_padded
    assert M >= N and M & (M - 1) == 0 and M < 2 * N + 1
    p = component_costs(3, M, d, eps)
    assert r.components == p.components
    for c in r.components.values():
        assert c.depth_3L >= 0 and c.count_3L >= 0 and c.qubits > 0
        if not c.bound:
            assert float(c.count_3L).is_integer() and float(c.depth_3L).is_integer()
