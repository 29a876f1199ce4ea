"""Symmetric q-ary fat aggregation trees and their end-to-end delay budget.

Level numbering: link level 1 is the edge-switch uplink, level ``j+1`` is the
uplink of an aggregation switch at height ``j``, and level ``h+1`` connects the
root to the destination. ``C_j`` is the packet transmission time on level ``j``.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Optional, Sequence

from .sched import FlowSet, SchedVerdict, edf_test, fixed_priority_test, rate_monotonic_order
from .traffic import RadioFlow, TrafficSpec
from .units import TimePs, as_fraction, ceil_fraction, tx_time

EDGE_POLICIES = ("edf", "fp", "rm")


@dataclass(frozen=True)
class FatTreeTopology:
    """A full q-ary aggregation tree of height ``h`` with ``q**h`` edge switches.

    ``link_caps[j-1]`` is the capacity (bits/s) of level-``j`` links, either a
    scalar or a per-link sequence (``q**(h-j+1)`` links on level ``j``).
    ``bg_packet_size`` enables one lower-priority background class per switch;
    ``src_link_cap`` models a real radio-to-edge link instead of a zero-delay one.
    """

    q: int
    h: int
    link_caps: tuple
    ts: TimePs
    tp: TimePs
    B: int
    bg_packet_size: Optional[int] = None
    src_link_cap: Optional[Fraction] = None
    preemptive: bool = False

    def __post_init__(self):
        if self.q < 1:
            raise ValueError("tree arity must be at least 1")
        if self.h < 1:
            raise ValueError("tree height must be at least 1")
        if len(self.link_caps) != self.h + 1:
            raise ValueError(f"need {self.h + 1} link levels, got {len(self.link_caps)}")
        caps = []
        for j, c in enumerate(self.link_caps, start=1):
            n = self.links_at(j)
            if isinstance(c, (list, tuple)):
                if len(c) != n:
                    raise ValueError(f"level {j} has {n} links, got {len(c)} capacities")
                level = tuple(as_fraction(x) for x in c)
            else:
                level = (as_fraction(c),) * n
            if any(x <= 0 for x in level):
                raise ValueError(f"non-positive capacity on level {j}")
            caps.append(level)
        object.__setattr__(self, "link_caps", tuple(caps))
        if self.ts < 0 or self.tp < 0:
            raise ValueError("switching and propagation delays must be non-negative")
        if self.B <= 0:
            raise ValueError("packet size must be positive")
        if self.src_link_cap is not None:
            object.__setattr__(self, "src_link_cap", as_fraction(self.src_link_cap))

    @property
    def n_edges(self) -> int:
        return self.q**self.h

    def links_at(self, level: int) -> int:
        return self.q ** (self.h - level + 1)

    def switches_at(self, height: int) -> int:
        """Switch count at ``height`` (0 = edge, ``h`` = root)."""
        return self.q ** (self.h - height)

    def capacity(self, level: int) -> Fraction:
        return self.link_caps[level - 1][0]

    def tx(self, level: int) -> TimePs:
        """Baseband transmission time ``C_level`` in ps."""
        return tx_time(self.B, self.capacity(level))

    def bg_tx(self, level: int) -> TimePs:
        if self.bg_packet_size is None:
            return 0
        return tx_time(self.bg_packet_size, self.capacity(level))

    @property
    def src_tx(self) -> TimePs:
        if self.src_link_cap is None:
            return 0
        return tx_time(self.B, self.src_link_cap)


@dataclass(frozen=True)
class Violation:
    requirement: str
    location: str
    message: str

    def __str__(self):
        return f"[{self.requirement}] {self.location}: {self.message}"


def validate_topology(
    t: FatTreeTopology, flows: Optional[Sequence[RadioFlow]] = None
) -> list[Violation]:
    """Design-requirement violations; empty when the tree is a symmetric, non-preemptive fat tree."""
    out = []
    for j in range(1, t.h + 2):
        caps = t.link_caps[j - 1]
        if len(set(caps)) > 1:
            out.append(
                Violation("Symmetric", f"level {j}", f"unequal link capacities {sorted(set(caps))}")
            )
    for j in range(1, t.h + 1):
        lo, hi = t.capacity(j), t.capacity(j + 1)
        if hi < t.q * lo:
            out.append(
                Violation(
                    "Fat-Tree",
                    f"level {j + 1}",
                    f"uplink {hi} bps below {t.q} x {lo} bps of incoming links",
                )
            )
        elif t.q * t.tx(j + 1) > t.tx(j):
            out.append(
                Violation(
                    "Fat-Tree",
                    f"level {j + 1}",
                    f"q*C_{j + 1} = {t.q * t.tx(j + 1)} ps exceeds C_{j} = {t.tx(j)} ps after rounding",
                )
            )
    if t.preemptive:
        out.append(Violation("Non-preemptive", "all switches", "preemptive scheduling configured"))
    if flows is not None:
        sizes = sorted({fl.B for fl in flows} | {t.B})
        if len(sizes) > 1:
            bad = sorted(fl.id for fl in flows if fl.B != t.B)
            out.append(
                Violation("Equal packet sizes", "flows", f"sizes {sizes} bits; flows {bad} differ from B={t.B}")
            )
        ids = [fl.id for fl in flows]
        if len(set(ids)) != len(ids):
            out.append(Violation("Edge assignment", "flows", "duplicate flow ids"))
        for fl in flows:
            if not 0 <= fl.edge < t.n_edges:
                out.append(
                    Violation("Edge assignment", f"flow {fl.id}", f"edge {fl.edge} outside 0..{t.n_edges - 1}")
                )
    return out


def edge_assignment(flows: Sequence[RadioFlow]) -> dict[int, list[RadioFlow]]:
    """Flows grouped by edge switch, preserving list order within each edge."""
    groups = defaultdict(list)
    for fl in flows:
        groups[fl.edge].append(fl)
    return dict(sorted(groups.items()))


def max_queuing_per_hop(t: FatTreeTopology, j: int) -> TimePs:
    """Worst FIFO waiting time at the height-``j`` aggregation switch."""
    if not 1 <= j <= t.h:
        raise ValueError(f"level {j} outside 1..{t.h}")
    return (t.q - 1) * t.tx(j + 1) + t.bg_tx(j + 1)


def geometric_factor(q: int, h: int) -> Fraction:
    """``(1 - q**-h) / (1 - q**-1)``, i.e. ``sum_{j<h} q**-j`` (equals ``h`` when q=1)."""
    return sum((Fraction(1, q**j) for j in range(h)), Fraction(0))


def _aggregation_exact(t: FatTreeTopology) -> Fraction:
    bg = sum(t.bg_tx(j + 1) for j in range(1, t.h + 1))
    return t.h * (t.ts + t.tp) + geometric_factor(t.q, t.h) * t.tx(1) + bg


def aggregation_delay_bound(t: FatTreeTopology) -> TimePs:
    """Worst delay from arrival at the first aggregation switch to the destination, rounded up."""
    bound = ceil_fraction(_aggregation_exact(t))
    if t.q >= 2 and t.bg_packet_size is None:
        assert bound <= t.h * (t.ts + t.tp) + 2 * t.tx(1)
    return bound


@dataclass(frozen=True)
class DelayBudget:
    """Aggregation bound and per-flow edge deadlines ``d' = D - terms``."""

    agg_bound: TimePs
    edge_deadlines: Mapping[int, int]
    terms: Mapping[str, object] = field(default_factory=dict)

    def infeasible(self) -> list[int]:
        return sorted(i for i, d in self.edge_deadlines.items() if d <= 0)


def delay_budget(t: FatTreeTopology, flows: Sequence[RadioFlow]) -> DelayBudget:
    sw_prop = (t.h + 1) * (t.ts + t.tp)
    agg_tx = geometric_factor(t.q, t.h) * t.tx(1)
    bg = sum(t.bg_tx(j + 1) for j in range(1, t.h + 1))
    # one upward rounding so d' is never optimistic
    reserved = ceil_fraction(agg_tx + bg) + sw_prop + t.src_tx
    terms = {
        "switching_propagation": sw_prop,
        "aggregation_transmission": agg_tx,
        "background_blocking": bg,
        "source_link": t.src_tx,
        "reserved": reserved,
    }
    return DelayBudget(
        agg_bound=aggregation_delay_bound(t),
        edge_deadlines={fl.id: fl.D - reserved for fl in flows},
        terms=terms,
    )


@dataclass(frozen=True)
class E2EResult:
    schedulable: bool
    per_edge: Mapping[int, SchedVerdict]
    budget: DelayBudget
    infeasible: tuple = ()

    def __bool__(self):
        return self.schedulable


def edge_flowset(t: FatTreeTopology, flows: Sequence[RadioFlow], budget: DelayBudget) -> FlowSet:
    C1 = t.tx(1)
    return FlowSet(
        tuple(TrafficSpec(fl.period, budget.edge_deadlines[fl.id], C1) for fl in flows)
    )


def e2e_schedulable(
    t: FatTreeTopology, flows: Sequence[RadioFlow], policy: str = "edf"
) -> E2EResult:
    """Check every edge switch locally against its reduced deadlines.

    ``policy`` is the non-preemptive edge scheduler: ``"edf"``, ``"fp"``
    (priority = list order) or ``"rm"`` (rate-monotonic).
    """
    if policy not in EDGE_POLICIES:
        raise ValueError(f"edge policy must be one of {EDGE_POLICIES}, got {policy!r}")
    budget = delay_budget(t, flows)
    bad = budget.infeasible()
    blocking = max(t.tx(1), t.bg_tx(1))
    verdicts = {}
    for k, group in edge_assignment(flows).items():
        if any(budget.edge_deadlines[fl.id] <= 0 for fl in group):
            verdicts[k] = SchedVerdict(False, reason="infeasible")
            continue
        fs = edge_flowset(t, group, budget)
        if policy == "edf":
            verdicts[k] = edf_test(fs, preemptive=False, blocking=blocking)
        elif policy == "rm":
            verdicts[k] = fixed_priority_test(rate_monotonic_order(fs), preemptive=False, blocking=blocking)
        else:
            verdicts[k] = fixed_priority_test(fs, preemptive=False, blocking=blocking)
    ok = not bad and all(v.schedulable for v in verdicts.values())
    return E2EResult(ok, verdicts, budget, tuple(bad))
