import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bbtransport.sched import (
    FlowSet,
    edf_expression,
    edf_test,
    fixed_priority_test,
    fp_workload,
    fp_workload_at,
    rate_monotonic_order,
    schedulability_test,
)
from bbtransport.sim import simulate_link
from bbtransport.units import lcm_all

from helpers import random_flowset

US = 10**6


def grid_oracle(fs: FlowSet, preemptive: bool) -> bool:
    """Verbatim condition checked at every half-integer t up to H + d_max.

    With integer parameters the expression is constant on each open unit
    interval, and past d_max it repeats every hyperperiod with slack
    H(1 - U), so this grid decides the for-all-t condition exactly.
    """
    C = fs.C
    if fs.utilization > 1:
        return False
    d_min = min(fs.deadlines)
    end = lcm_all(fs.periods) + max(fs.deadlines) + 1
    for j in range(1, 2 * end + 1):
        t = Fraction(j, 2)
        if not preemptive and t < d_min:
            continue
        n = sum(max(0, math.ceil((t - f.deadline) / f.period)) for f in fs.flows)
        total = C * n + (0 if preemptive else C)
        if total > t:
            return False
    return True


def naive_fp(fs, preemptive, blocking=None, cap=100):
    for m in range(1, len(fs) + 1):
        T, d = fs.periods[m - 1], fs.deadlines[m - 1]
        N = next((k for k in range(1, cap + 1) if fp_workload(fs, m, k, k * T, preemptive, blocking) <= 1), None)
        if N is None:
            return False, (m, None)
        for k in range(1, N + 1):
            if fp_workload(fs, m, k, (k - 1) * T + d, preemptive, blocking) > 1:
                return False, (m, k)
    return True, None


flowsets = st.integers(0, 2**32 - 1).map(lambda s: random_flowset(np.random.default_rng(s)))


# -- EDF ---------------------------------------------------------------------

def test_edf_single_flow_example_conflicts_with_stated_condition():
    # Listed as schedulable, but the condition over all t >= d_min fails just after t = 1:
    # at t = 3/2 the expression is (1 + 1) / (3/2) = 4/3. We follow the condition.
    fs = FlowSet.from_pairs([(2 * US, 1 * US)], 1 * US)
    assert edf_expression(fs, 1 * US, False) == 1
    assert edf_expression(fs, 2 * US, False) == 1
    assert edf_expression(fs, Fraction(3, 2) * US, False) == Fraction(4, 3)
    v = edf_test(fs, preemptive=False)
    assert not v.schedulable
    assert edf_expression(fs, v.witness, False) > 1
    assert grid_oracle(FlowSet.from_pairs([(2, 1)], 1), False) is False


def test_edf_two_identical_flows_witness():
    fs = FlowSet.from_pairs([(2 * US, 1 * US)] * 2, 1 * US)
    v = edf_test(fs, preemptive=False)
    assert not v.schedulable
    assert v.witness == 2 * US
    assert edf_expression(fs, 2 * US, False) == Fraction(3, 2)


def test_edf_trivial_preemptive():
    fs = FlowSet.from_pairs([(10, 10)], 1)
    assert edf_test(fs, preemptive=True).schedulable


def test_edf_demand_zero_at_own_deadline():
    # ceil+(0 / T) = 0: a flow contributes nothing at exactly t = d_i
    fs = FlowSet.from_pairs([(4, 3)], 1)
    assert edf_expression(fs, 3, True) == 0
    assert edf_expression(fs, Fraction(7, 2), True) == Fraction(2, 7)


def test_edf_horizon_beyond_busy_period():
    # the busy period L_B = 8 misses the violation at t = 11
    fs = FlowSet.from_pairs([(10, 1)], 4)
    v = edf_test(fs, preemptive=False)
    assert not v.schedulable
    assert edf_expression(fs, v.witness, False) > 1
    assert grid_oracle(fs, False) is False


def test_edf_overload():
    fs = FlowSet.from_pairs([(2, 2), (3, 3)], 2)
    v = edf_test(fs, preemptive=True)
    assert not v.schedulable and v.reason == "overload"


@settings(max_examples=300, deadline=None)
@given(fs=flowsets, preemptive=st.booleans())
def test_edf_matches_grid_oracle(fs, preemptive):
    v = edf_test(fs, preemptive=preemptive)
    assert v.schedulable == grid_oracle(fs, preemptive)
    if not v.schedulable and v.witness is not None:
        assert edf_expression(fs, v.witness, preemptive) > 1


@settings(max_examples=200, deadline=None)
@given(fs=flowsets, preemptive=st.booleans())
def test_edf_witness_reproduces(fs, preemptive):
    v = edf_test(fs, preemptive=preemptive)
    if not v.schedulable and v.reason != "overload":
        assert v.witness >= (0 if preemptive else min(fs.deadlines))
        assert edf_expression(fs, v.witness, preemptive) > 1


def test_edf_long_hyperperiod_uses_slope_bound():
    fs = FlowSet.from_pairs([(5_333_333, 5_333_333), (3_200_000, 3_200_000), (8_000_000, 8_000_000)], 800_000)
    v = edf_test(fs, preemptive=False, hyperperiod_cap=10**6)
    assert v.schedulable
    assert v.horizon_kind != "hyperperiod"


# -- fixed priority ----------------------------------------------------------

def reference_edge_flowset():
    periods = [3_200_000, 4_000_000, 5_333_333, 8_000_000]
    return FlowSet.from_pairs([(T, T - 1_246_667) for T in periods], 800_000)


def test_fp_reference_edge():
    fs = reference_edge_flowset()
    assert fixed_priority_test(fs, preemptive=False).schedulable
    assert simulate_link(fs, "fp", horizon=lcm_all(fs.periods) // 10).total_misses == 0


def test_fp_single_flow_examples():
    fs = FlowSet.from_pairs([(2 * US, 1 * US)], 1 * US)
    assert fp_workload(fs, 1, 1, 1 * US, preemptive=True) == 1
    assert fixed_priority_test(fs, preemptive=True).schedulable
    fs = FlowSet.from_pairs([(2 * US, US // 2)], 1 * US)
    v = fixed_priority_test(fs, preemptive=True)
    assert not v.schedulable and v.witness == (1, 1)


def test_fp_workload_candidates_cover_minimum():
    rng = np.random.default_rng(11)
    for _ in range(200):
        fs = random_flowset(rng)
        m = int(rng.integers(1, len(fs) + 1))
        k = int(rng.integers(1, 4))
        x = int(rng.integers(1, 30))
        for pre in (False, True):
            # time is integer picoseconds, so the minimum is over integer t
            dense = min(fp_workload_at(fs, m, k, t, pre) for t in range(1, x + 1))
            assert fp_workload(fs, m, k, x, pre) == dense


@settings(max_examples=200, deadline=None)
@given(fs=flowsets, preemptive=st.booleans(), blocking=st.sampled_from([None, 0, 1, 4]))
def test_fp_incremental_matches_direct(fs, preemptive, blocking):
    v = fixed_priority_test(fs, preemptive, blocking, job_cap=100)
    assert (v.schedulable, v.witness) == naive_fp(fs, preemptive, blocking)


def test_fp_overload_cap():
    fs = FlowSet.from_pairs([(4, 4), (4, 4)], 2)
    v = fixed_priority_test(fs, preemptive=False)
    assert not v.schedulable and v.reason == "overload" and v.witness == (2, None)


# -- properties --------------------------------------------------------------

def _relax(fs, i, dT, dd):
    pairs = [(f.period, f.deadline) for f in fs.flows]
    T, d = pairs[i]
    pairs[i] = (T + dT, d + dd)
    return FlowSet.from_pairs(pairs, fs.C)


@settings(max_examples=300, deadline=None)
@given(fs=flowsets, data=st.data())
def test_monotone_relaxation(fs, data):
    i = data.draw(st.integers(0, len(fs) - 1))
    dT = data.draw(st.integers(0, 12))
    dd = data.draw(st.integers(0, 12))
    relaxed = _relax(fs, i, dT, dd)
    for preemptive in (False, True):
        if edf_test(fs, preemptive).schedulable:
            assert edf_test(relaxed, preemptive).schedulable
        if fixed_priority_test(fs, preemptive).schedulable:
            assert fixed_priority_test(relaxed, preemptive).schedulable


@settings(max_examples=200, deadline=None)
@given(fs=flowsets, preemptive=st.booleans(), policy=st.sampled_from(["edf", "fp", "rm"]))
def test_sound_against_simulation(fs, preemptive, policy):
    if schedulability_test(fs, policy, preemptive).schedulable:
        assert simulate_link(fs, policy, preemptive=preemptive).total_misses == 0


@settings(max_examples=200, deadline=None)
@given(fs=flowsets)
def test_np_edf_necessity(fs):
    v = edf_test(fs, preemptive=False)
    if not v.schedulable:
        missed = simulate_link(fs, "edf").total_misses > 0
        assert missed or edf_expression(fs, v.witness, False) > 1


# -- rate monotonic ----------------------------------------------------------

def test_rate_monotonic_order():
    fs = FlowSet.from_pairs([(8_000_000, 1), (3_200_000, 2), (4_000_000, 3), (5_333_333, 4)], 1)
    assert rate_monotonic_order(fs).periods == [3_200_000, 4_000_000, 5_333_333, 8_000_000]
    again = rate_monotonic_order(rate_monotonic_order(fs))
    assert again == rate_monotonic_order(fs)
    tied = FlowSet.from_pairs([(5, 1), (5, 2), (3, 3)], 1)
    assert rate_monotonic_order(tied).deadlines == [3, 1, 2]


def test_flowset_validation():
    with pytest.raises(ValueError):
        FlowSet(())
    with pytest.raises(ValueError):
        FlowSet.from_pairs([(4, 0)], 1)
