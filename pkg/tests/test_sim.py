import warnings

import numpy as np
import pytest

from bbtransport import FatTreeTopology, RadioFlow, max_queuing_per_hop, run_simulation, simulate_link, sweep_scale
from bbtransport.presets import reference_flows, reference_topology
from bbtransport.sched import FlowSet
from bbtransport.sim import CSV_SCHEMA, SimulationOverload, resolve_phases, trace_to_csv

from helpers import US, random_flows, random_phases, random_tree


def test_two_flow_fifo_output_is_not_periodic():
    fs = FlowSet.from_pairs([(2 * US, 2 * US), (3 * US, 3 * US)], 1 * US)
    tr = simulate_link(fs, "fifo", horizon=24 * US, record=True)
    departs = sorted(row[3] for row in tr.packet_log if row[0] == 1)
    gaps = [b - a for a, b in zip(departs, departs[1:])]
    assert len(gaps) == 7
    assert gaps == [(2 if i % 2 == 0 else 4) * US for i in range(len(gaps))]
    assert tr.flows[1].max_delay == 2 * US and tr.flows[1].min_delay == 1 * US


def test_single_flow_empty_network_delay():
    t = reference_topology(3)
    fl = RadioFlow.from_rate(0, 10**9, t.B, 8 * US, edge=4)
    tr = run_simulation(t, [fl], horizon=1000 * US)
    expected = sum(t.ts + t.tx(j) + t.tp for j in range(1, t.h + 2))
    s = tr.flows[0]
    assert s.max_delay == s.min_delay == expected
    assert s.jitter == 0 and s.misses == 0


def test_source_link_adds_first_hop():
    t = reference_topology(3, src_link_cap=10**10)
    fl = RadioFlow.from_rate(0, 10**9, t.B, 8 * US, edge=0)
    tr = run_simulation(t, [fl], horizon=100 * US)
    assert tr.flows[0].max_delay == t.src_tx + sum(t.ts + t.tx(j) + t.tp for j in range(1, 4))


def test_conservation():
    t = reference_topology(3)
    flows = reference_flows(3)
    cut = run_simulation(t, flows, horizon=100 * US + 1234)
    for s in cut.flows:
        assert s.packets + s.in_flight == s.generated
    assert sum(s.in_flight for s in cut.flows) > 0
    drained = run_simulation(t, flows, horizon=100 * US + 1234, drain=True)
    for a, b in zip(cut.flows, drained.flows):
        assert b.in_flight == 0 and a.generated == b.generated


def test_determinism():
    t = reference_topology(3)
    flows = reference_flows(3)
    runs = [run_simulation(t, flows, phases="random", seed=11, horizon=200 * US, record=True) for _ in range(2)]
    assert runs[0] == runs[1]
    other = run_simulation(t, flows, phases="random", seed=12, horizon=200 * US, record=True)
    assert other.packet_log != runs[0].packet_log


def test_per_hop_queuing_bound():
    rng = np.random.default_rng(31)
    for i in range(40):
        t = random_tree(rng, background=(i % 4 == 0))
        flows = random_flows(rng, t)
        tr = run_simulation(t, flows, phases=random_phases(rng, flows), horizon=48 * US,
                            edge_policy="fifo", drain=True)
        for j in range(1, t.h + 1):
            assert tr.max_wait[j] <= max_queuing_per_hop(t, j)


def test_reference_queuing_reaches_bound():
    tr = run_simulation(reference_topology(3), reference_flows(3), horizon=100 * US)
    assert tr.max_wait[1] == 400_000 and tr.max_wait[2] == 80_000


def test_fifo_serves_in_arrival_order():
    t = reference_topology(3)
    tr = run_simulation(t, reference_flows(3), phases="random", seed=5, horizon=100 * US,
                        edge_policy="fifo", record=True)
    per_port = {}
    for row in tr.packet_log:
        for port, ingress, enq, start, done in row[4]:
            per_port.setdefault(port, []).append((start, enq, ingress))
    agg_ports = [p for p in per_port if p >= t.n_edges]
    assert agg_ports
    for p in agg_ports:
        deps = sorted(per_port[p])
        for (s1, e1, i1), (s2, e2, i2) in zip(deps, deps[1:]):
            assert (e1, i1) <= (e2, i2)
        # no two consecutive departures from one ingress while another ingress waits from earlier
        for (s1, e1, i1), (s2, e2, i2) in zip(deps, deps[1:]):
            if i1 == i2:
                assert not any(i != i2 and e < e2 and s > s2 for s, e, i in deps)


def test_edge_priority_policies():
    t = reference_topology(3)
    flows = reference_flows(3)
    rm = run_simulation(t, flows, horizon=200 * US, edge_policy="rm")
    fifo = run_simulation(t, flows, horizon=200 * US, edge_policy="fifo")
    fast = [i for i, fl in enumerate(flows) if fl.rate == 25 * 10**8]
    assert max(rm.flows[i].max_delay for i in fast) < max(fifo.flows[i].max_delay for i in fast)
    edf = run_simulation(t, flows, horizon=200 * US, edge_policy="edf")
    assert edf.total_misses == 0


def test_background_traffic():
    t = reference_topology(3, bg_packet_size=12_000)
    flows = reference_flows(3)
    tr = run_simulation(t, flows, horizon=100 * US, drain=True)
    base = run_simulation(reference_topology(3), flows, horizon=100 * US, drain=True)
    assert all(s.in_flight == 0 for s in tr.flows)
    assert tr.max_delay > base.max_delay
    for j in (1, 2):
        assert tr.max_wait[j] <= max_queuing_per_hop(t, j)
    off = run_simulation(t, flows, horizon=100 * US, drain=True, background=False)
    assert off.flows == base.flows
    with pytest.raises(ValueError):
        run_simulation(reference_topology(3), flows, horizon=US, background=True)


def test_short_horizon_warns():
    with pytest.warns(RuntimeWarning):
        tr = run_simulation(reference_topology(3), reference_flows(3), horizon=1 * US)
    assert tr.warnings


def test_overload_names_link():
    t = FatTreeTopology(q=2, h=1, link_caps=(10**9, 2 * 10**9), ts=0, tp=0, B=1000)
    flows = [RadioFlow.from_rate(i, 6 * 10**8, 1000, US, edge=0) for i in range(2)]
    with pytest.raises(SimulationOverload, match="edge 0"):
        run_simulation(t, flows, horizon=10**9, queue_cap=50)


def test_invalid_inputs():
    t = reference_topology(3)
    flows = reference_flows(3)
    with pytest.raises(ValueError):
        run_simulation(t, flows, edge_policy="lifo")
    with pytest.raises(ValueError):
        run_simulation(t, flows, horizon=0)
    with pytest.raises(ValueError):
        resolve_phases("sometimes", [1, 2], 0)
    with pytest.raises(ValueError):
        resolve_phases([0], [1, 2], 0)
    assert resolve_phases(None, [5, 7], 0) == [0, 0]
    ph = resolve_phases("random", [5, 7], 3)
    assert ph == resolve_phases("random", [5, 7], 3) and all(0 <= p < T for p, T in zip(ph, [5, 7]))


def test_preemptive_link():
    fs = FlowSet.from_pairs([(3, 3), (6, 6)], 2)
    pre = simulate_link(fs, "rm", preemptive=True)
    assert pre.flows[0].max_delay == 2 and pre.flows[1].max_delay == 6
    np_ = simulate_link(fs, "rm")
    assert np_.flows[0].max_delay == 3
    edf = simulate_link(fs, "edf", preemptive=True)
    assert edf.total_misses == 0
    with pytest.raises(ValueError):
        simulate_link(fs, "fifo", preemptive=True)


def test_non_preemptive_edf_tie_breaks_by_flow():
    fs = FlowSet.from_pairs([(4, 2), (4, 2)], 1)
    tr = simulate_link(fs, "edf", record=True)
    first = [row for row in tr.packet_log if row[1] == 0]
    assert sorted(first, key=lambda r: r[3])[0][0] == 0


def test_sweep_radio_counts():
    traces = sweep_scale([1, 2, 3, 4], horizon=20 * US)
    assert {q: len(tr.flows) for q, tr in traces.items()} == {1: 4, 2: 16, 3: 36, 4: 64}


def test_csv_export():
    t = reference_topology(3)
    flows = reference_flows(3)
    tr = run_simulation(t, flows, horizon=50 * US)
    text = trace_to_csv(tr, flows, {"seed": 0, "hash": "abc"})
    lines = text.splitlines()
    assert lines[0] == f"# schema={CSV_SCHEMA} seed=0 hash=abc"
    assert lines[1].startswith("flow_id,edge,rate_bps")
    assert len(lines) == 2 + 36
    assert lines[2].split(",")[2] == "1000000000"
    assert text == trace_to_csv(run_simulation(t, flows, horizon=50 * US), flows, {"seed": 0, "hash": "abc"})
