"""Reference evaluation scenario: three-level tree, four radios per edge switch."""
from __future__ import annotations

from fractions import Fraction

from .fattree import FatTreeTopology
from .traffic import RadioFlow, inter_arrival

REFERENCE_RATES_BPS = (10**9, 15 * 10**8, 2 * 10**9, 25 * 10**8)
REFERENCE_PACKET_BITS = 8000
REFERENCE_TS_PS = 50_000
REFERENCE_TP_PS = 10_000
REFERENCE_LINKS_BPS = (10 * 10**9, 40 * 10**9, 200 * 10**9)


def reference_topology(q: int = 3, **overrides) -> FatTreeTopology:
    kw = dict(
        q=q,
        h=2,
        link_caps=REFERENCE_LINKS_BPS,
        ts=REFERENCE_TS_PS,
        tp=REFERENCE_TP_PS,
        B=REFERENCE_PACKET_BITS,
    )
    kw.update(overrides)
    return FatTreeTopology(**kw)


def reference_flows(q: int = 3, per_edge_rates=None, deadline=None, B: int = REFERENCE_PACKET_BITS) -> list:
    """``q**2`` edges, each with one radio per rate; ``deadline`` defaults to the period."""
    rates = per_edge_rates or REFERENCE_RATES_BPS
    flows = []
    for k in range(q**2):
        for r in rates:
            D = deadline if deadline is not None else inter_arrival(B, r)
            flows.append(RadioFlow.from_rate(len(flows), Fraction(r), B, D, edge=k))
    return flows
