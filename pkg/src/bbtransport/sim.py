"""Packet-level discrete-event simulation of a fat aggregation tree.

Edge switches run a configurable non-preemptive scheduler and aggregation
switches run FIFO. Each hop applies switching delay, queuing, transmission and
propagation delay, in that order. All times are integer picoseconds and runs
are fully deterministic.

Same-instant ordering: arrivals (higher level first, then switch, ingress port
and flow), then transmission completions, then new transmissions.
"""
from __future__ import annotations

import csv
import heapq
import io
import logging
import warnings
from collections import deque
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .fattree import FatTreeTopology, edge_assignment
from .sched import FlowSet, rate_monotonic_permutation
from .traffic import RadioFlow
from .units import TimePs, lcm_all

log = logging.getLogger(__name__)

SIM_POLICIES = ("fifo", "fp", "rm", "edf")
DEFAULT_QUEUE_CAP = 200_000

_ARRIVE = 0
_DONE = 1


class SimulationOverload(RuntimeError):
    """A queue grew past the configured cap."""


@dataclass
class FlowStats:
    max_delay: Optional[int] = None
    min_delay: Optional[int] = None
    misses: int = 0
    packets: int = 0
    generated: int = 0
    max_agg_delay: int = 0
    max_edge_response: int = 0

    @property
    def jitter(self) -> Optional[int]:
        if self.max_delay is None:
            return None
        return self.max_delay - self.min_delay

    @property
    def in_flight(self) -> int:
        return self.generated - self.packets


@dataclass
class SimTrace:
    """Per-flow delivery statistics plus network-wide queuing maxima.

    ``max_wait[level]`` is the largest observed waiting time (queue entry to
    transmission start) at switches of that height, 0 being the edge.
    ``packet_log`` rows are ``(flow, seq, gen, deliver, hops)`` with ``hops`` a
    tuple of ``(port, ingress, enqueue, start, done)``; filled only on request.
    """

    flows: list
    horizon: int
    seed: Optional[int] = None
    max_wait: dict = field(default_factory=dict)
    events: int = 0
    packet_log: Optional[list] = None
    warnings: list = field(default_factory=list)

    @property
    def total_misses(self) -> int:
        return sum(s.misses for s in self.flows)

    @property
    def max_delay(self) -> int:
        return max((s.max_delay for s in self.flows if s.max_delay is not None), default=0)


class _Port:
    __slots__ = (
        "idx", "level", "switch", "kind", "tx", "bg_tx", "next", "ingress_up",
        "hop", "queue", "busy", "counter", "name",
    )

    def __init__(self, idx, level, switch, kind, tx, bg_tx, nxt, ingress_up, hop, name):
        self.idx = idx
        self.level = level
        self.switch = switch
        self.kind = kind
        self.tx = tx
        self.bg_tx = bg_tx
        self.next = nxt
        self.ingress_up = ingress_up
        self.hop = hop
        self.queue = deque() if kind == "fifo" else []
        self.busy = False
        self.counter = 0
        self.name = name


class _Packet:
    __slots__ = ("flow", "seq", "gen", "deadline", "agg_arrival", "edge_enq", "edge_done", "hops")

    def __init__(self, flow, seq, gen, deadline):
        self.flow = flow
        self.seq = seq
        self.gen = gen
        self.deadline = deadline
        self.agg_arrival = None
        self.edge_enq = None
        self.edge_done = None
        self.hops = None


class _Engine:
    """Event calendar over a forest of egress ports rooted at sink ports."""

    def __init__(self, ports, sources, horizon, drain, queue_cap, record, bg_ports):
        self.ports = ports
        # source: (first_port, ingress, period, phase, deadline_rel, arrival_offset, priority)
        self.sources = sources
        self.horizon = horizon
        self.drain = drain
        self.queue_cap = queue_cap
        self.record = record
        self.bg_ports = bg_ports
        self.stats = [FlowStats() for _ in sources]
        self.max_wait = {}
        self.log = [] if record else None

    def run(self):
        heap = []
        push = heapq.heappush
        pop = heapq.heappop
        counter = 0
        horizon = self.horizon
        sources = self.sources
        stats = self.stats
        ports = self.ports
        record = self.record
        max_wait = self.max_wait
        for p in ports:
            max_wait.setdefault(p.level, 0)

        def emit(i, seq):
            nonlocal counter
            port, ingress, T, phase, drel, offset, _ = sources[i]
            gen = phase + seq * T
            if gen >= horizon:
                return
            pkt = _Packet(i, seq, gen, gen + drel)
            if record:
                pkt.hops = []
            stats[i].generated += 1
            p = ports[port]
            counter += 1
            push(heap, (gen + offset, _ARRIVE, -p.level, p.switch, ingress, i, counter, port, pkt))

        for i in range(len(sources)):
            emit(i, 0)

        dirty = set()
        for p in self.bg_ports:
            dirty.add(p)
        events = 0
        now = 0
        stop = None if self.drain else horizon
        while heap or dirty:
            if dirty and (not heap or heap[0][0] > now):
                for pidx in sorted(dirty):
                    p = ports[pidx]
                    if p.busy:
                        continue
                    q = p.queue
                    if q:
                        if p.kind == "fifo":
                            enq, ingress, pkt = q.popleft()
                        else:
                            _, enq, ingress, pkt = heapq.heappop(q)
                        p.busy = True
                        w = now - enq
                        if w > max_wait[p.level]:
                            max_wait[p.level] = w
                        counter += 1
                        push(heap, (now + p.tx, _DONE, -p.level, p.switch, 0, 0, counter, pidx, (pkt, ingress, enq, now)))
                    elif p.bg_tx and now < horizon:
                        p.busy = True
                        counter += 1
                        push(heap, (now + p.bg_tx, _DONE, -p.level, p.switch, 0, 0, counter, pidx, None))
                dirty.clear()
                continue
            if not heap:
                break
            ev = heap[0]
            t = ev[0]
            if stop is not None and t > stop:
                break
            pop(heap)
            events += 1
            now = t
            kind = ev[1]
            pidx = ev[7]
            p = ports[pidx]
            if kind == _ARRIVE:
                pkt = ev[8]
                ingress = ev[4]
                if p.level == 0:
                    pkt.edge_enq = t
                    emit(pkt.flow, pkt.seq + 1)
                if p.kind == "fifo":
                    p.queue.append((t, ingress, pkt))
                else:
                    p.counter += 1
                    if p.kind == "edf":
                        key = (pkt.deadline, pkt.flow, p.counter)
                    else:
                        key = (sources[pkt.flow][6], p.counter)
                    heapq.heappush(p.queue, (key, t, ingress, pkt))
                if len(p.queue) > self.queue_cap:
                    raise SimulationOverload(f"queue at {p.name} exceeded {self.queue_cap} packets at t={t} ps")
                if not p.busy:
                    dirty.add(pidx)
            else:
                p.busy = False
                dirty.add(pidx)
                payload = ev[8]
                if payload is None:
                    continue
                pkt, ingress, enq, start = payload
                if record:
                    pkt.hops.append((pidx, ingress, enq, start, t))
                nxt = p.next
                tp, ts_next = p.hop
                if p.level == 0:
                    pkt.edge_done = t
                    if nxt is not None:
                        pkt.agg_arrival = t + tp
                if nxt is None:
                    self._deliver(pkt, t + tp)
                else:
                    q = ports[nxt]
                    counter += 1
                    push(heap, (t + tp + ts_next, _ARRIVE, -q.level, q.switch, p.ingress_up, pkt.flow, counter, nxt, pkt))
        self.events = events
        self.now = now

    def _deliver(self, pkt, at):
        s = self.stats[pkt.flow]
        d = at - pkt.gen
        s.packets += 1
        if s.max_delay is None or d > s.max_delay:
            s.max_delay = d
        if s.min_delay is None or d < s.min_delay:
            s.min_delay = d
        if at > pkt.deadline:
            s.misses += 1
        if pkt.agg_arrival is not None:
            a = at - pkt.agg_arrival
            if a > s.max_agg_delay:
                s.max_agg_delay = a
        if pkt.edge_done is not None:
            r = pkt.edge_done - pkt.edge_enq
            if r > s.max_edge_response:
                s.max_edge_response = r
        if self.log is not None:
            self.log.append((pkt.flow, pkt.seq, pkt.gen, at, tuple(pkt.hops)))


def _queue_kind(policy: str) -> str:
    return {"fifo": "fifo", "edf": "edf"}.get(policy, "fp")


def _priorities(policy: str, periods: Sequence[int]) -> list[int]:
    n = len(periods)
    if policy == "rm":
        perm = rate_monotonic_permutation(periods)
        prio = [0] * n
        for rank, i in enumerate(perm):
            prio[i] = rank
        return prio
    return list(range(n))


def resolve_phases(phases, flows_periods: Sequence[int], seed: Optional[int]) -> list[int]:
    """``None``/``"synchronous"`` -> zeros; ``"random"`` -> uniform in ``[0, T_i)`` from ``seed``."""
    if phases is None or (isinstance(phases, str) and phases == "synchronous"):
        return [0] * len(flows_periods)
    if isinstance(phases, str):
        if phases != "random":
            raise ValueError(f"unknown phase mode {phases!r}")
        rng = np.random.default_rng(seed)
        return [int(rng.integers(0, T)) for T in flows_periods]
    phases = [int(p) for p in phases]
    if len(phases) != len(flows_periods) or any(p < 0 for p in phases):
        raise ValueError("need one non-negative phase per flow")
    return phases


def run_simulation(
    topology: FatTreeTopology,
    flows: Sequence[RadioFlow],
    phases=None,
    horizon: TimePs = 10 * 10**9,
    edge_policy: str = "rm",
    background: Optional[bool] = None,
    seed: Optional[int] = None,
    drain: bool = False,
    record: bool = False,
    queue_cap: int = DEFAULT_QUEUE_CAP,
) -> SimTrace:
    """Simulate ``flows`` over ``topology`` for packets generated in ``[0, horizon)``.

    ``edge_policy`` is the edge scheduler (``fifo``, ``fp``, ``rm``, ``edf``);
    aggregation switches are always FIFO. With ``drain`` the run continues
    until every generated packet is delivered, otherwise it stops at
    ``horizon`` and undelivered packets count as in flight. ``background``
    defaults to on whenever the topology configures a background packet size.
    """
    if edge_policy not in SIM_POLICIES:
        raise ValueError(f"edge policy must be one of {SIM_POLICIES}")
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    if background is None:
        background = topology.bg_packet_size is not None
    elif background and topology.bg_packet_size is None:
        raise ValueError("background traffic needs topology.bg_packet_size")
    q, h = topology.q, topology.h
    periods = [fl.period for fl in flows]
    phase = resolve_phases(phases, periods, seed)
    prio = _priorities(edge_policy, periods)

    ports = []
    base = {}
    for height in range(h + 1):
        base[height] = len(ports)
        level = height + 1
        for s in range(topology.switches_at(height)):
            up = 0 if height == h else s % q
            kind = "fifo" if height > 0 else _queue_kind(edge_policy)
            name = f"edge {s}" if height == 0 else f"agg h{height} switch {s}"
            ports.append(
                _Port(len(ports), height, s, kind, topology.tx(level),
                      topology.bg_tx(level) if background else 0, None, up, None, name)
            )
    for p in ports:
        if p.level < h:
            p.next = base[p.level + 1] + p.switch // q
    # (propagation, switching delay at the next switch) applied after a transmission
    for p in ports:
        p.hop = (topology.tp, topology.ts if p.next is not None else 0)

    local_index = {}
    for k, group in edge_assignment(flows).items():
        for j, fl in enumerate(group):
            local_index[fl.id] = j
    offset = topology.src_tx + topology.ts
    sources = []
    for i, fl in enumerate(flows):
        if not 0 <= fl.edge < topology.n_edges:
            raise ValueError(f"flow {fl.id} on edge {fl.edge} outside the tree")
        sources.append((base[0] + fl.edge, local_index[fl.id], periods[i], phase[i], fl.D, offset, prio[i]))

    return _run(ports, sources, horizon, drain, queue_cap, record,
                [p.idx for p in ports if p.bg_tx], seed, periods)


def _run(ports, sources, horizon, drain, queue_cap, record, bg_ports, seed, periods):
    msgs = []
    if periods and horizon < max(periods):
        msg = f"horizon {horizon} ps is shorter than the longest period {max(periods)} ps"
        warnings.warn(msg, RuntimeWarning, stacklevel=3)
        msgs.append(msg)
    eng = _Engine(ports, sources, horizon, drain, queue_cap, record, bg_ports)
    eng.run()
    return SimTrace(
        flows=eng.stats,
        horizon=horizon,
        seed=seed,
        max_wait=dict(eng.max_wait),
        events=eng.events,
        packet_log=eng.log,
        warnings=msgs,
    )


def simulate_link(
    fs: FlowSet,
    policy: str,
    preemptive: bool = False,
    horizon: Optional[int] = None,
    phases=None,
    drain: bool = True,
    record: bool = False,
) -> SimTrace:
    """Simulate one link carrying ``fs`` under ``policy`` (``fifo``, ``fp``, ``rm``, ``edf``).

    Delay is completion minus release; a miss is completion after the absolute
    deadline. ``horizon`` defaults to the hyperperiod; with ``drain`` every
    released job runs to completion.
    """
    periods = fs.periods
    if horizon is None:
        horizon = lcm_all(periods)
    phase = resolve_phases(phases, periods, None)
    prio = _priorities(policy, periods)
    if preemptive:
        if policy == "fifo":
            raise ValueError("FIFO has no preemptive form")
        return _simulate_preemptive(fs, policy, prio, phase, horizon, drain)
    if policy not in SIM_POLICIES:
        raise ValueError(f"unknown policy {policy!r}")
    kind = _queue_kind(policy)
    port = _Port(0, 0, 0, kind, fs.C, 0, None, 0, (0, 0), "link")
    sources = [(0, i, T, phase[i], d, 0, prio[i]) for i, (T, d) in enumerate(zip(periods, fs.deadlines))]
    return _run([port], sources, horizon, drain, DEFAULT_QUEUE_CAP, record, [], None, periods)


def _simulate_preemptive(fs, policy, prio, phase, horizon, drain):
    C = fs.C
    periods = fs.periods
    deadlines = fs.deadlines
    n = len(periods)
    stats = [FlowStats() for _ in range(n)]
    releases = [(phase[i], i, 0) for i in range(n) if phase[i] < horizon]
    heapq.heapify(releases)
    ready = []  # (key, flow, seq, release, remaining)
    now = 0
    running = None
    events = 0

    def key(i, seq, rel):
        if policy == "edf":
            return (rel + deadlines[i], i, seq)
        return (prio[i], seq)

    while releases or ready or running:
        next_rel = releases[0][0] if releases else None
        if running is None and ready:
            running = heapq.heappop(ready)
        if running is None:
            now = next_rel
        else:
            k, i, seq, rel, rem = running
            finish = now + rem
            if next_rel is None or finish <= next_rel:
                now = finish
                events += 1
                s = stats[i]
                d = now - rel
                s.packets += 1
                s.max_delay = d if s.max_delay is None else max(s.max_delay, d)
                s.min_delay = d if s.min_delay is None else min(s.min_delay, d)
                s.max_edge_response = max(s.max_edge_response, d)
                if d > deadlines[i]:
                    s.misses += 1
                running = None
                continue
            running = (k, i, seq, rel, rem - (next_rel - now))
            now = next_rel
        if not drain and now > horizon:
            break
        while releases and releases[0][0] == now:
            t, i, seq = heapq.heappop(releases)
            stats[i].generated += 1
            heapq.heappush(ready, (key(i, seq, t), i, seq, t, C))
            nt = t + periods[i]
            if nt < horizon:
                heapq.heappush(releases, (nt, i, seq + 1))
            events += 1
        if running is not None and ready and ready[0][0] < running[0]:
            heapq.heappush(ready, running)
            running = heapq.heappop(ready)
    return SimTrace(flows=stats, horizon=horizon, events=events)


def sweep_scale(
    q_values: Sequence[int],
    per_edge_rates=None,
    horizon: TimePs = 10 * 10**9,
    edge_policy: str = "rm",
    phases=None,
    seed: Optional[int] = None,
) -> dict:
    """Simulate the reference three-level tree for each arity in ``q_values``.

    Each tree has ``q**2`` edge switches carrying the per-edge radio mix and a
    fixed 200 Gbps destination link. Returns ``{q: SimTrace}``.
    """
    from .presets import reference_flows, reference_topology

    out = {}
    for q in q_values:
        topo = reference_topology(q)
        flows = reference_flows(q, per_edge_rates)
        out[q] = run_simulation(topo, flows, phases=phases, horizon=horizon,
                                edge_policy=edge_policy, seed=seed)
    return out


CSV_SCHEMA = "bbtransport-flows/1"


def trace_to_csv(trace: SimTrace, flows: Sequence[RadioFlow], meta: Optional[dict] = None) -> str:
    """Per-flow CSV with a versioned comment header."""
    buf = io.StringIO()
    head = {"schema": CSV_SCHEMA}
    head.update(meta or {})
    buf.write("# " + " ".join(f"{k}={v}" for k, v in head.items()) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["flow_id", "edge", "rate_bps", "period_ps", "deadline_ps", "max_delay_ps",
                "min_delay_ps", "jitter_ps", "misses", "packets"])
    for fl, s in zip(flows, trace.flows):
        rate = fl.rate
        rate_s = str(rate.numerator) if rate.denominator == 1 else f"{float(rate):.6g}"
        w.writerow([fl.id, fl.edge, rate_s, fl.period, fl.D,
                    "" if s.max_delay is None else s.max_delay,
                    "" if s.min_delay is None else s.min_delay,
                    "" if s.jitter is None else s.jitter,
                    s.misses, s.packets])
    return buf.getvalue()
