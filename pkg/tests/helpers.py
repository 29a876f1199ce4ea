"""Random instance generators shared by property and acceptance tests."""
from __future__ import annotations

from fractions import Fraction

import numpy as np

from bbtransport import FatTreeTopology, RadioFlow, validate_topology
from bbtransport.sched import FlowSet

US = 10**6  # ps

SMALL_PERIODS = (4, 6, 8, 12, 24)


def random_flowset(rng: np.random.Generator, max_n: int = 5) -> FlowSet:
    """Integer-grid flow set with hyperperiod dividing 24 and ``C`` in 1..3."""
    n = int(rng.integers(1, max_n + 1))
    C = int(rng.integers(1, 4))
    pairs = []
    for _ in range(n):
        T = int(rng.choice(SMALL_PERIODS))
        d = int(rng.integers(C, 2 * T + 1))
        pairs.append((T, d))
    return FlowSet.from_pairs(pairs, C)


def random_tree(rng: np.random.Generator, qs=(2, 3, 4), hs=(1, 2, 3), background=False) -> FatTreeTopology:
    """Random fat tree with 1 Gbps edge uplinks and 1000-bit packets (C_1 = 1 us)."""
    while True:
        q = int(rng.choice(qs))
        h = int(rng.choice(hs))
        caps = [Fraction(10**9)]
        for _ in range(h):
            caps.append(caps[-1] * q * Fraction(rng.choice([4, 5, 8])) / 4)
        topo = FatTreeTopology(
            q=q,
            h=h,
            link_caps=tuple(caps),
            ts=int(rng.choice([0, 50_000])),
            tp=int(rng.choice([0, 10_000, 100_000])),
            B=1000,
            bg_packet_size=int(rng.choice([400, 1000, 1500])) if background else None,
        )
        if not validate_topology(topo):
            return topo


def random_flows(rng: np.random.Generator, topo: FatTreeTopology, deadline_factor=None,
                 max_per_edge: int = 3) -> list[RadioFlow]:
    """1..max_per_edge radios on every edge, periods in {3,4,6,8,12} us, utilization below 1."""
    flows = []
    for k in range(topo.n_edges):
        while True:
            n = int(rng.integers(1, max_per_edge + 1))
            periods = [int(rng.choice([3, 4, 6, 8, 12])) for _ in range(n)]
            if sum(Fraction(1, T) for T in periods) < 1:
                break
        for T in periods:
            rate = Fraction(topo.B * 10**6, T)  # T us per packet
            if deadline_factor is None:
                factor = Fraction(int(rng.integers(4, 13)), 4)
            else:
                factor = Fraction(deadline_factor)
            D = int(factor * T * US)
            flows.append(RadioFlow.from_rate(len(flows), rate, topo.B, D, edge=k))
    return flows


def random_phases(rng: np.random.Generator, flows) -> list[int]:
    return [int(rng.integers(0, fl.period)) for fl in flows]


# criterion number -> (passed, one-line detail), filled by test_acceptance
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record(n: int, ok: bool, detail: str) -> None:
    ACCEPTANCE[n] = (bool(ok), detail)
