"""Single-link schedulability tests for periodic packet flows.

All flows on the link share one transmission time ``C``. Times are integer
picoseconds; test expressions are evaluated with exact rationals.

EDF demand condition, with ``ceil+(x) = max(0, ceil(x))``::

    (1/t) * (blocking + C * sum_i ceil+((t - d_i) / T_i)) <= 1

for every real ``t > 0`` (preemptive, ``blocking = 0``) or ``t >= d_min``
(non-preemptive, ``blocking = C``). The left side is constant in its
numerator on each interval ``(b, b']`` between consecutive deadline instants
``b = k*T_i + d_i`` and decreasing in ``t`` there, so the supremum over the
interval is the right-limit at ``b``. The test checks exactly those
right-limits, which makes it equivalent to the condition over all real ``t``.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

from .traffic import TrafficSpec
from .units import TimePs, ceil_fraction, lcm_all

DEFAULT_HYPERPERIOD_CAP_PS = 10 * 10**12  # 10 s
DEFAULT_JOB_CAP = 10_000
DEFAULT_POINT_CAP = 5_000_000


class OverloadError(RuntimeError):
    """A test horizon or job count cannot be bounded."""


@dataclass(frozen=True)
class FlowSet:
    """Flows sharing one link. For fixed-priority tests, index 0 is the highest priority."""

    flows: tuple[TrafficSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "flows", tuple(self.flows))
        if not self.flows:
            raise ValueError("a flow set needs at least one flow")
        cs = {f.tx_time for f in self.flows}
        if len(cs) != 1:
            raise ValueError(f"flows on one link must share a transmission time, got {sorted(cs)}")

    @classmethod
    def from_pairs(cls, pairs: Sequence[tuple[int, int]], C: int) -> "FlowSet":
        return cls(tuple(TrafficSpec(period=T, deadline=d, tx_time=C) for T, d in pairs))

    @property
    def C(self) -> TimePs:
        return self.flows[0].tx_time

    @property
    def periods(self) -> list[int]:
        return [f.period for f in self.flows]

    @property
    def deadlines(self) -> list[int]:
        return [f.deadline for f in self.flows]

    @property
    def utilization(self) -> Fraction:
        return sum((f.utilization for f in self.flows), Fraction(0))

    def __len__(self):
        return len(self.flows)


@dataclass(frozen=True)
class SchedVerdict:
    """Outcome of a schedulability test.

    ``witness`` is a time instant (``Fraction`` ps) for EDF and a 1-based
    ``(flow, job)`` pair for fixed priority. ``reason`` is ``"demand"`` or
    ``"overload"`` when unschedulable.
    """

    schedulable: bool
    witness: object = None
    reason: Optional[str] = None
    horizon: Optional[int] = None
    horizon_kind: Optional[str] = None
    detail: dict = field(default_factory=dict, compare=False)

    def __bool__(self):
        return self.schedulable


def _ceil_plus(x: Fraction) -> int:
    return max(0, ceil_fraction(x))


def edf_expression(fs: FlowSet, t, preemptive: bool, blocking: Optional[int] = None) -> Fraction:
    """Left side of the EDF demand condition at time ``t``, evaluated verbatim."""
    t = Fraction(t)
    if t <= 0:
        raise ValueError("t must be positive")
    C = fs.C
    if blocking is None:
        blocking = 0 if preemptive else C
    jobs = sum(_ceil_plus((t - f.deadline) / Fraction(f.period)) for f in fs.flows)
    return (blocking + C * jobs) / t


def _deadline_instants(fs: FlowSet, limit: int):
    """Sorted deadline instants ``k*T_i + d_i <= limit`` with multiplicity."""
    heap = [(f.deadline, f.period) for f in fs.flows if f.deadline <= limit]
    heapq.heapify(heap)
    while heap:
        b, T = heap[0]
        yield b
        if b + T <= limit:
            heapq.heapreplace(heap, (b + T, T))
        else:
            heapq.heappop(heap)


def _next_instant(fs: FlowSet, b: int) -> int:
    out = None
    for f in fs.flows:
        if f.deadline > b:
            nxt = f.deadline
        else:
            nxt = f.deadline + ((b - f.deadline) // f.period + 1) * f.period
        out = nxt if out is None else min(out, nxt)
    return out


def edf_horizon(
    fs: FlowSet,
    preemptive: bool,
    blocking: Optional[int] = None,
    hyperperiod_cap: int = DEFAULT_HYPERPERIOD_CAP_PS,
) -> tuple[Optional[int], str]:
    """Instant beyond which the EDF condition cannot fail, and how it was obtained.

    Returns ``(None, "unbounded")`` when utilization is exactly one and the
    hyperperiod exceeds the cap.
    """
    C = fs.C
    if blocking is None:
        blocking = 0 if preemptive else C
    U = fs.utilization
    d_max = max(fs.deadlines)
    if U > 1:
        # C*N(t) >= U*t - C*sum(d_i/T_i); past this point demand exceeds t
        slack = sum(Fraction(C * f.deadline, f.period) for f in fs.flows)
        return ceil_fraction(slack / (U - 1)) + max(fs.periods) + d_max, "overload"
    candidates = []
    H = lcm_all(fs.periods)
    if H <= hyperperiod_cap:
        candidates.append((H + d_max, "hyperperiod"))
    if U < 1:
        lin = blocking + sum(
            (C * max(Fraction(0), 1 - Fraction(f.deadline, f.period)) for f in fs.flows),
            Fraction(0),
        )
        candidates.append((ceil_fraction(lin / (1 - U)), "demand-slope"))
    if not candidates:
        return None, "unbounded"
    return min(candidates)


def edf_test(
    fs: FlowSet,
    preemptive: bool,
    blocking: Optional[int] = None,
    hyperperiod_cap: int = DEFAULT_HYPERPERIOD_CAP_PS,
    point_cap: int = DEFAULT_POINT_CAP,
) -> SchedVerdict:
    """Exact EDF test for synchronous periodic flows on one link.

    ``blocking`` overrides the non-preemptive blocking time (default ``C``);
    it is how a larger lower-priority packet inflates the test.
    """
    C = fs.C
    if blocking is None:
        blocking = 0 if preemptive else C
    L, kind = edf_horizon(fs, preemptive, blocking, hyperperiod_cap)
    if L is None:
        return SchedVerdict(False, reason="overload", horizon_kind=kind)
    count = 0
    points = 0
    it = _deadline_instants(fs, L)
    pending = next(it, None)
    while pending is not None:
        b = pending
        # all instants equal to b contribute to the right-limit at b
        while pending == b:
            count += 1
            pending = next(it, None)
        points += 1
        if points > point_cap:
            return SchedVerdict(False, reason="overload", horizon=L, horizon_kind=kind)
        demand = blocking + C * count
        if demand > b:
            nxt = pending if pending is not None else _next_instant(fs, b)
            t = b + Fraction(min(nxt - b, demand - b), 2)
            reason = "overload" if kind == "overload" else "demand"
            return SchedVerdict(
                False,
                witness=t,
                reason=reason,
                horizon=L,
                horizon_kind=kind,
                detail={"instant": b, "jobs": count, "value": edf_expression(fs, t, preemptive, blocking)},
            )
    return SchedVerdict(True, horizon=L, horizon_kind=kind)


def _fp_numerator(C: int, k: int, t: int, hp: Sequence[int], preemptive: bool, blocking: int) -> int:
    if preemptive:
        return C * (k + sum(-(-t // T) for T in hp))
    return C * k + blocking + C * sum(1 + (t - C) // T for T in hp)


def _fp_candidates(C: int, x: int, hp: Sequence[int], preemptive: bool) -> set[int]:
    pts = {x}
    for T in hp:
        if preemptive:
            pts.update(range(T, x + 1, T))
        else:
            # floor((t-C)/T) steps at C + j*T; the piece to the left ends at p - 1
            for p in range(C, x + 2, T):
                if 0 < p - 1 <= x:
                    pts.add(p - 1)
                if 0 < p <= x:
                    pts.add(p)
    return pts


class _PrefixMin:
    """Running minimum of ``num(t) - C*k - t`` over candidates, for increasing bounds.

    ``W_m(k, x) <= 1`` iff ``C*k + min(prefix(x), g(x)) <= 0``, so queries in
    increasing ``x`` cost amortized constant work per candidate.
    """

    def __init__(self, C: int, hp: Sequence[int], preemptive: bool, blocking: int):
        self.C, self.hp, self.pre, self.b = C, list(hp), preemptive, blocking
        self.heap = []
        for T in self.hp:
            if preemptive:
                heapq.heappush(self.heap, (T, T))
            else:
                heapq.heappush(self.heap, (C - 1, T))
        self.best = None

    def g(self, t: int) -> int:
        return _fp_numerator(self.C, 0, t, self.hp, self.pre, self.b) - t

    def upto(self, x: int):
        while self.heap and self.heap[0][0] <= x:
            t, T = heapq.heappop(self.heap)
            if t > 0:
                v = self.g(t)
                if self.best is None or v < self.best:
                    self.best = v
            if self.pre:
                heapq.heappush(self.heap, (t + T, T))
            elif (t - self.C + 1) % T == 0:
                heapq.heappush(self.heap, (t + 1, T))  # p - 1 then p
            else:
                heapq.heappush(self.heap, (t - 1 + T, T))
        gx = self.g(x)
        return gx if self.best is None else min(self.best, gx)


def fp_workload(
    fs: FlowSet, m: int, k: int, x: int, preemptive: bool, blocking: Optional[int] = None
) -> Fraction:
    """``W_m(k, x)``: minimum over ``0 < t <= x`` of normalized level-``m`` demand.

    ``m`` is 1-based priority rank (1 is highest).
    """
    if x <= 0:
        raise ValueError("x must be positive")
    C = fs.C
    if blocking is None:
        blocking = C
    hp = fs.periods[: m - 1]
    best = None
    for t in _fp_candidates(C, x, hp, preemptive):
        val = Fraction(_fp_numerator(C, k, t, hp, preemptive, blocking), t)
        if best is None or val < best:
            best = val
    return best


def fp_workload_at(
    fs: FlowSet, m: int, k: int, t, preemptive: bool, blocking: Optional[int] = None
) -> Fraction:
    """The expression minimized by :func:`fp_workload`, at one real instant ``t``."""
    t = Fraction(t)
    C = fs.C
    if blocking is None:
        blocking = C
    hp = fs.periods[: m - 1]
    if preemptive:
        num = C * (k + sum(ceil_fraction(t / T) for T in hp))
    else:
        num = C * k + blocking + C * sum(1 + math.floor((t - C) / T) for T in hp)
    return num / t


def fixed_priority_test(
    fs: FlowSet,
    preemptive: bool,
    blocking: Optional[int] = None,
    job_cap: int = DEFAULT_JOB_CAP,
) -> SchedVerdict:
    """Sufficient fixed-priority test; list order of ``fs`` is the priority order."""
    C = fs.C
    b = C if blocking is None else blocking
    jobs = {}
    U_m = Fraction(0)
    for m in range(1, len(fs) + 1):
        T_m = fs.flows[m - 1].period
        d_m = fs.flows[m - 1].deadline
        U_m += Fraction(C, T_m)
        # level-m busy period never closes; floor(a/T) + 1 >= (a+1)/T rules out W <= 1
        if (U_m > 1 and (preemptive or b >= C)) or (U_m == 1 and not preemptive and b >= C):
            return SchedVerdict(False, witness=(m, None), reason="overload")
        hp = fs.periods[: m - 1]
        N_m = None
        busy = _PrefixMin(C, hp, preemptive, b)
        for k in range(1, job_cap + 1):
            if C * k + busy.upto(k * T_m) <= 0:
                N_m = k
                break
        if N_m is None:
            return SchedVerdict(False, witness=(m, None), reason="overload")
        jobs[m] = N_m
        dl = _PrefixMin(C, hp, preemptive, b)
        for k in range(1, N_m + 1):
            x = (k - 1) * T_m + d_m
            if C * k + dl.upto(x) > 0:
                w = fp_workload(fs, m, k, x, preemptive, blocking)
                return SchedVerdict(
                    False, witness=(m, k), reason="demand", detail={"W": w, "jobs": jobs}
                )
    return SchedVerdict(True, detail={"jobs": jobs})


def rate_monotonic_permutation(periods: Sequence[int]) -> list[int]:
    """Indices ordered by ascending period; ties keep their input order."""
    return sorted(range(len(periods)), key=lambda i: periods[i])


def rate_monotonic_order(fs: FlowSet) -> FlowSet:
    perm = rate_monotonic_permutation(fs.periods)
    return FlowSet(tuple(fs.flows[i] for i in perm))


def schedulability_test(
    fs: FlowSet, policy: str, preemptive: bool = False, blocking: Optional[int] = None
) -> SchedVerdict:
    """Dispatch on ``policy``: ``"edf"``, ``"fp"`` (given order) or ``"rm"`` (rate-monotonic)."""
    if policy == "edf":
        return edf_test(fs, preemptive, blocking)
    if policy == "fp":
        return fixed_priority_test(fs, preemptive, blocking)
    if policy == "rm":
        return fixed_priority_test(rate_monotonic_order(fs), preemptive, blocking)
    raise ValueError(f"no schedulability test for policy {policy!r}")
