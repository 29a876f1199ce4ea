"""YAML scenario files: topology, flows, simulation and optimization settings.

Every physical quantity carries a unit (``"10Gbps"``, ``"50ns"``, ``"1KB"``,
``"25MHz"``); bare numbers are rejected for them. Counts (``q``, ``h``, ``Q``)
and linear power ratios (``rho``, ``sigma2``) are plain numbers.

Example::

    topology:
      q: 3
      h: 2
      link_capacities: [10Gbps, 40Gbps, 200Gbps]
      switching_delay: 50ns
      propagation_delay: 10ns
      packet_size: 1KB
    flows:
      per_edge:
        - {rate: 1Gbps, deadline: period}
        - {rate: 2.5Gbps, deadline: period}
    simulation:
      horizon: 10ms
      phases: synchronous
      edge_policy: rm
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from typing import Optional

import yaml

from .fattree import FatTreeTopology
from .traffic import RadioFlow, inter_arrival
from .units import (
    UnitError,
    format_frequency,
    format_rate,
    format_size,
    format_time,
    parse_frequency,
    parse_rate,
    parse_size,
    parse_time,
)

PHASE_MODES = ("synchronous", "random")


class ScenarioError(ValueError):
    """A scenario field is missing, malformed or inconsistent."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass(frozen=True)
class SimulationConfig:
    horizon: int = 10 * 10**9
    phases: object = "synchronous"
    seed: int = 0
    repetitions: int = 1
    edge_policy: str = "rm"
    sweep_q: tuple = ()


@dataclass(frozen=True)
class OptimizationConfig:
    ladder: tuple = (2, 4, 8)
    antennas: int = 2
    rho: float = 1.0
    sigma2: float = 1.0
    realizations: int = 1000
    seed: int = 0
    policy: str = "edf"
    oracle: bool = False
    noise_scale: Optional[float] = None


@dataclass(frozen=True)
class Scenario:
    topology: FatTreeTopology
    flows: tuple
    simulation: SimulationConfig = field(default_factory=SimulationConfig)
    optimization: Optional[OptimizationConfig] = None
    per_edge: Optional[tuple] = None

    @property
    def hash(self) -> str:
        return scenario_hash(self)

    def flows_for_arity(self, q: int) -> list:
        """Replicate the per-edge template over a tree of arity ``q`` (same height)."""
        if self.per_edge is None:
            raise ScenarioError("flows.per_edge", "a q sweep needs a per-edge flow template")
        return _expand_per_edge(self.per_edge, q**self.topology.h, self.topology.B)


def _get(d, key, path, required=True, default=None):
    if not isinstance(d, dict):
        raise ScenarioError(path, "expected a mapping")
    if key not in d:
        if required:
            raise ScenarioError(f"{path}.{key}" if path else key, "missing field")
        return default
    return d[key]


def _unit(fn, value, path):
    try:
        return fn(value)
    except (UnitError, ValueError, ZeroDivisionError) as e:
        raise ScenarioError(path, str(e)) from None


def _int(value, path, minimum=None):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioError(path, f"expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ScenarioError(path, f"must be at least {minimum}")
    return value


def _number(value, path):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(path, f"expected a number, got {value!r}")
    return float(value)


def _parse_topology(d) -> FatTreeTopology:
    p = "topology"
    q = _int(_get(d, "q", p), f"{p}.q", 1)
    h = _int(_get(d, "h", p), f"{p}.h", 1)
    caps_raw = _get(d, "link_capacities", p)
    if not isinstance(caps_raw, list):
        raise ScenarioError(f"{p}.link_capacities", "expected a list")
    caps = []
    for j, c in enumerate(caps_raw):
        cp = f"{p}.link_capacities[{j}]"
        if isinstance(c, list):
            caps.append(tuple(_unit(parse_rate, x, f"{cp}[{i}]") for i, x in enumerate(c)))
        else:
            caps.append(_unit(parse_rate, c, cp))
    bg = _get(d, "background_packet_size", p, required=False)
    src = _get(d, "source_link", p, required=False)
    try:
        return FatTreeTopology(
            q=q,
            h=h,
            link_caps=tuple(caps),
            ts=_unit(parse_time, _get(d, "switching_delay", p), f"{p}.switching_delay"),
            tp=_unit(parse_time, _get(d, "propagation_delay", p), f"{p}.propagation_delay"),
            B=_unit(parse_size, _get(d, "packet_size", p), f"{p}.packet_size"),
            bg_packet_size=None if bg is None else _unit(parse_size, bg, f"{p}.background_packet_size"),
            src_link_cap=None if src is None else _unit(parse_rate, src, f"{p}.source_link"),
            preemptive=bool(_get(d, "preemptive", p, required=False, default=False)),
        )
    except ValueError as e:
        if isinstance(e, ScenarioError):
            raise
        raise ScenarioError(p, str(e)) from None


def _flow_from_entry(e, path, fid, edge, B_default):
    if not isinstance(e, dict):
        raise ScenarioError(path, "expected a mapping")
    B = _unit(parse_size, e["packet_size"], f"{path}.packet_size") if "packet_size" in e else B_default
    if "rate" in e:
        if "frequency" in e:
            raise ScenarioError(path, "give either rate or frequency, not both")
        rate = _unit(parse_rate, e["rate"], f"{path}.rate")
        Q = _int(e.get("Q", 8), f"{path}.Q", 1)
        f = rate / (2 * Q)
    else:
        f = _unit(parse_frequency, _get(e, "frequency", path), f"{path}.frequency")
        Q = _int(_get(e, "Q", path), f"{path}.Q", 1)
        rate = 2 * Q * f
    dl = _get(e, "deadline", path)
    if dl == "period":
        D = inter_arrival(B, rate)
    else:
        D = _unit(parse_time, dl, f"{path}.deadline")
    try:
        return RadioFlow(id=fid, f=f, Q=Q, B=B, D=D, edge=edge)
    except ValueError as err:
        raise ScenarioError(path, str(err)) from None


def _expand_per_edge(template, n_edges, B):
    flows = []
    for k in range(n_edges):
        for j, e in enumerate(template):
            flows.append(_flow_from_entry(e, f"flows.per_edge[{j}]", len(flows), k, B))
    return flows


def _parse_flows(d, topo: FatTreeTopology):
    if not isinstance(d, dict):
        raise ScenarioError("flows", "expected a mapping with per_edge and/or list")
    flows = []
    template = None
    if "per_edge" in d:
        template = d["per_edge"]
        if not isinstance(template, list) or not template:
            raise ScenarioError("flows.per_edge", "expected a non-empty list")
        template = tuple(template)
        flows.extend(_expand_per_edge(template, topo.n_edges, topo.B))
    if "template" in d:
        if template is not None:
            raise ScenarioError("flows.template", "conflicts with flows.per_edge")
        template = tuple(d["template"])
    for j, e in enumerate(d.get("list") or []):
        path = f"flows.list[{j}]"
        fid = _int(e.get("id", len(flows)), f"{path}.id", 0)
        edge = _int(_get(e, "edge", path), f"{path}.edge", 0)
        flows.append(_flow_from_entry(e, path, fid, edge, topo.B))
    if not flows:
        raise ScenarioError("flows", "no flows defined")
    return tuple(flows), template


def _parse_simulation(d) -> SimulationConfig:
    p = "simulation"
    if d is None:
        return SimulationConfig()
    kw = {}
    if "horizon" in d:
        kw["horizon"] = _unit(parse_time, d["horizon"], f"{p}.horizon")
    if "phases" in d:
        ph = d["phases"]
        if isinstance(ph, list):
            kw["phases"] = tuple(_unit(parse_time, x, f"{p}.phases[{i}]") for i, x in enumerate(ph))
        elif ph in PHASE_MODES:
            kw["phases"] = ph
        else:
            raise ScenarioError(f"{p}.phases", f"expected one of {PHASE_MODES} or a list of times")
    if "seed" in d:
        kw["seed"] = _int(d["seed"], f"{p}.seed", 0)
    if "repetitions" in d:
        kw["repetitions"] = _int(d["repetitions"], f"{p}.repetitions", 1)
    if "edge_policy" in d:
        if d["edge_policy"] not in ("fifo", "fp", "rm", "edf"):
            raise ScenarioError(f"{p}.edge_policy", f"unknown policy {d['edge_policy']!r}")
        kw["edge_policy"] = d["edge_policy"]
    if "sweep_q" in d:
        kw["sweep_q"] = tuple(_int(x, f"{p}.sweep_q[{i}]", 1) for i, x in enumerate(d["sweep_q"]))
    return SimulationConfig(**kw)


def _parse_optimization(d) -> Optional[OptimizationConfig]:
    if d is None:
        return None
    p = "optimization"
    kw = {}
    if "ladder" in d:
        kw["ladder"] = tuple(_int(x, f"{p}.ladder[{i}]", 1) for i, x in enumerate(d["ladder"]))
    for key in ("antennas", "realizations", "seed"):
        if key in d:
            kw[key] = _int(d[key], f"{p}.{key}", 0 if key == "seed" else 1)
    for key in ("rho", "sigma2", "noise_scale"):
        if key in d:
            kw[key] = _number(d[key], f"{p}.{key}")
    if "policy" in d:
        if d["policy"] not in ("edf", "fp", "rm"):
            raise ScenarioError(f"{p}.policy", f"unknown policy {d['policy']!r}")
        kw["policy"] = d["policy"]
    if "oracle" in d:
        kw["oracle"] = bool(d["oracle"])
    return OptimizationConfig(**kw)


def parse_scenario(data: dict) -> Scenario:
    if not isinstance(data, dict):
        raise ScenarioError("<root>", "expected a mapping")
    topo = _parse_topology(_get(data, "topology", ""))
    flows, template = _parse_flows(_get(data, "flows", ""), topo)
    return Scenario(
        topology=topo,
        flows=flows,
        simulation=_parse_simulation(data.get("simulation")),
        optimization=_parse_optimization(data.get("optimization")),
        per_edge=template,
    )


def load_scenario(path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        try:
            data = yaml.safe_load(fh)
        except yaml.YAMLError as e:
            raise ScenarioError(str(path), f"YAML syntax error: {e}") from None
    return parse_scenario(data)


def scenario_to_dict(sc: Scenario) -> dict:
    """Canonical form: explicit flow list, every quantity in base units."""
    t = sc.topology
    caps = []
    for level in t.link_caps:
        if len(set(level)) == 1:
            caps.append(format_rate(level[0]))
        else:
            caps.append([format_rate(x) for x in level])
    topo = {
        "q": t.q,
        "h": t.h,
        "link_capacities": caps,
        "switching_delay": format_time(t.ts),
        "propagation_delay": format_time(t.tp),
        "packet_size": format_size(t.B),
    }
    if t.bg_packet_size is not None:
        topo["background_packet_size"] = format_size(t.bg_packet_size)
    if t.src_link_cap is not None:
        topo["source_link"] = format_rate(t.src_link_cap)
    if t.preemptive:
        topo["preemptive"] = True
    flows = [
        {
            "id": fl.id,
            "edge": fl.edge,
            "frequency": format_frequency(fl.f),
            "Q": fl.Q,
            "deadline": format_time(fl.D),
            "packet_size": format_size(fl.B),
        }
        for fl in sc.flows
    ]
    s = sc.simulation
    sim = {
        "horizon": format_time(s.horizon),
        "phases": list(map(format_time, s.phases)) if isinstance(s.phases, tuple) else s.phases,
        "seed": s.seed,
        "repetitions": s.repetitions,
        "edge_policy": s.edge_policy,
    }
    if s.sweep_q:
        sim["sweep_q"] = list(s.sweep_q)
    out = {"topology": topo, "flows": {"list": flows}, "simulation": sim}
    if sc.per_edge is not None:
        # kept so q sweeps survive a round trip
        out["flows"]["template"] = [dict(e) for e in sc.per_edge]
    o = sc.optimization
    if o is not None:
        opt = {
            "ladder": list(o.ladder),
            "antennas": o.antennas,
            "rho": o.rho,
            "sigma2": o.sigma2,
            "realizations": o.realizations,
            "seed": o.seed,
            "policy": o.policy,
            "oracle": o.oracle,
        }
        if o.noise_scale is not None:
            opt["noise_scale"] = o.noise_scale
        out["optimization"] = opt
    return out


def dump_scenario(sc: Scenario) -> str:
    return yaml.safe_dump(scenario_to_dict(sc), sort_keys=True, default_flow_style=False)


def scenario_hash(sc: Scenario) -> str:
    return hashlib.sha256(dump_scenario(sc).encode()).hexdigest()[:16]


def with_overrides(sc: Scenario, seed=None, horizon=None) -> Scenario:
    sim = sc.simulation
    if seed is not None:
        sim = replace(sim, seed=seed)
    if horizon is not None:
        sim = replace(sim, horizon=horizon)
    opt = sc.optimization
    if seed is not None and opt is not None:
        opt = replace(opt, seed=seed)
    return replace(sc, simulation=sim, optimization=opt)
