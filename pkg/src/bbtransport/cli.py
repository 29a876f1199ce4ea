"""Command-line front end: ``bbtransport {validate,analyze,simulate,optimize} SCENARIO``.

Exit codes: 0 success, 1 unschedulable or infeasible (analyze), 2 parse or
validation error, 3 runtime error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .capacity import (
    ChannelEnsemble,
    QuantLadder,
    QuantNoiseModel,
    bfs_search,
    brute_force_oracle,
    DEFAULT_BRUTE_FORCE_CAP,
)
from .fattree import EDGE_POLICIES, aggregation_delay_bound, e2e_schedulable, validate_topology
from .scenario import ScenarioError, load_scenario, with_overrides
from .sim import SimulationOverload, run_simulation, trace_to_csv
from .units import UnitError, parse_time

log = logging.getLogger("bbtransport")

EXIT_OK, EXIT_UNSCHEDULABLE, EXIT_PARSE, EXIT_RUNTIME = 0, 1, 2, 3


def _meta(sc, seed):
    return {"scenario": sc.hash, "seed": seed, "version": __version__}


def _write(out: Path | None, name: str, text: str):
    if out is None:
        return None
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(text, encoding="utf-8")
    return str(path)


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=str) + "\n"


def _verdict_json(v):
    w = v.witness
    if w is not None and not isinstance(w, tuple):
        w = str(w)
    return {"schedulable": v.schedulable, "witness": w, "reason": v.reason, "horizon_kind": v.horizon_kind}


def cmd_validate(sc, args) -> int:
    violations = validate_topology(sc.topology, sc.flows)
    for v in violations:
        print(v)
    if not violations:
        print(f"topology ok: q={sc.topology.q} h={sc.topology.h} edges={sc.topology.n_edges} flows={len(sc.flows)}")
    return EXIT_PARSE if violations else EXIT_OK


def analyze_report(sc, policy: str) -> dict:
    topo = sc.topology
    violations = validate_topology(topo, sc.flows)
    res = e2e_schedulable(topo, sc.flows, policy)
    return {
        **_meta(sc, sc.simulation.seed),
        "policy": policy,
        "violations": [str(v) for v in violations],
        "aggregation_bound_ps": aggregation_delay_bound(topo),
        "budget_terms": {k: str(v) for k, v in res.budget.terms.items()},
        "flows": [
            {"id": fl.id, "edge": fl.edge, "period_ps": fl.period, "deadline_ps": fl.D,
             "edge_deadline_ps": res.budget.edge_deadlines[fl.id]}
            for fl in sc.flows
        ],
        "infeasible_flows": list(res.infeasible),
        "edges": {str(k): _verdict_json(v) for k, v in res.per_edge.items()},
        "schedulable": res.schedulable and not violations,
    }


def cmd_analyze(sc, args) -> int:
    policy = args.policy or (sc.simulation.edge_policy if sc.simulation.edge_policy in EDGE_POLICIES else "rm")
    rep = analyze_report(sc, policy)
    for v in rep["violations"]:
        print(f"violation: {v}")
    print(f"aggregation delay bound: {rep['aggregation_bound_ps']} ps")
    for f in rep["flows"]:
        print(f"flow {f['id']} edge {f['edge']}: T={f['period_ps']} ps D={f['deadline_ps']} ps d'={f['edge_deadline_ps']} ps")
    for fid in rep["infeasible_flows"]:
        print(f"infeasible: flow {fid} has no edge budget left (d' <= 0)")
    for k, v in rep["edges"].items():
        status = "schedulable" if v["schedulable"] else f"UNSCHEDULABLE ({v['reason']}, witness {v['witness']})"
        print(f"edge {k}: {status}")
    print("verdict:", "schedulable" if rep["schedulable"] else "not schedulable")
    _write(args.out, "analysis.json", _json(rep))
    if rep["violations"]:
        return EXIT_PARSE
    return EXIT_OK if rep["schedulable"] else EXIT_UNSCHEDULABLE


def _sim_job(job):
    topo, flows, phases, horizon, policy, seed = job
    return run_simulation(topo, flows, phases=phases, horizon=horizon, edge_policy=policy, seed=seed)


def _run_jobs(jobs, workers):
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(_sim_job, jobs))
    return [_sim_job(j) for j in jobs]


def cmd_simulate(sc, args) -> int:
    s = sc.simulation
    meta = _meta(sc, s.seed)
    summary = {**meta, "horizon_ps": s.horizon, "edge_policy": s.edge_policy}
    if s.sweep_q:
        from dataclasses import replace

        jobs, flowsets = [], []
        for q in s.sweep_q:
            topo = replace(sc.topology, q=q, link_caps=tuple(level[0] for level in sc.topology.link_caps))
            flows = sc.flows_for_arity(q)
            flowsets.append((q, topo, flows))
            jobs.append((topo, flows, s.phases if isinstance(s.phases, str) else None, s.horizon, s.edge_policy, s.seed))
        traces = _run_jobs(jobs, args.workers)
        sweep = {}
        for (q, topo, flows), tr in zip(flowsets, traces):
            path = _write(args.out, f"flows_q{q}.csv", trace_to_csv(tr, flows, {**meta, "q": q}))
            sweep[str(q)] = {"radios": len(flows), "max_delay_ps": tr.max_delay,
                             "aggregation_bound_ps": aggregation_delay_bound(topo),
                             "misses": tr.total_misses, "csv": path}
            print(f"q={q}: radios={len(flows)} max delay {tr.max_delay} ps, misses {tr.total_misses}")
        maxima = [v["max_delay_ps"] for v in sweep.values()]
        summary["sweep"] = sweep
        summary["max_delay_spread_ps"] = max(maxima) - min(maxima)
        print(f"max-delay spread across sweep: {summary['max_delay_spread_ps']} ps")
    else:
        jobs = []
        for r in range(s.repetitions):
            phases = s.phases if isinstance(s.phases, str) else list(s.phases)
            jobs.append((sc.topology, list(sc.flows), phases, s.horizon, s.edge_policy, s.seed + r))
        traces = _run_jobs(jobs, args.workers)
        reps = []
        for r, tr in enumerate(traces):
            path = _write(args.out, f"flows_rep{r}.csv", trace_to_csv(tr, sc.flows, {**meta, "seed": s.seed + r}))
            reps.append({"seed": s.seed + r, "max_delay_ps": tr.max_delay, "misses": tr.total_misses,
                         "max_wait_ps": {str(k): v for k, v in tr.max_wait.items()}, "csv": path})
            print(f"repetition {r}: max delay {tr.max_delay} ps, deadline misses {tr.total_misses}")
            for w in tr.warnings:
                print(f"warning: {w}")
        summary["repetitions"] = reps
        summary["aggregation_bound_ps"] = aggregation_delay_bound(sc.topology)
        if s.edge_policy in EDGE_POLICIES:
            res = e2e_schedulable(sc.topology, sc.flows, s.edge_policy)
            summary["analytical_schedulable"] = res.schedulable
        summary["flows"] = [
            {"id": fl.id, "period_ps": fl.period, "deadline_ps": fl.D,
             "max_delay_ps": max((t.flows[i].max_delay or 0) for t in traces),
             "max_aggregation_delay_ps": max(t.flows[i].max_agg_delay for t in traces)}
            for i, fl in enumerate(sc.flows)
        ]
    _write(args.out, "summary.json", _json(summary))
    return EXIT_OK


def cmd_optimize(sc, args) -> int:
    o = sc.optimization
    if o is None:
        raise ScenarioError("optimization", "missing section")
    ladder = QuantLadder(o.ladder)
    noise = QuantNoiseModel() if o.noise_scale is None else QuantNoiseModel(scale=o.noise_scale)
    radios = list(sc.flows)
    ch = ChannelEnsemble.rayleigh(len(radios), o.antennas, o.realizations, o.rho, o.sigma2, o.seed)
    res = bfs_search(sc.topology, radios, ladder, ch, noise, o.policy)
    rep = {**_meta(sc, o.seed), "policy": o.policy, "ladder": list(ladder.levels), **res.report()}
    if res.Q is not None:
        from .capacity import quantized_flows

        verdicts = e2e_schedulable(sc.topology, quantized_flows(res.Q, radios), o.policy)
        rep["edges"] = {str(k): _verdict_json(v) for k, v in verdicts.per_edge.items()}
    print(f"Q* = {list(res.Q) if res.Q else None}, C* = {res.capacity!r} b/s/Hz "
          f"({len(res.expanded)} expanded, {len(res.evaluated)} evaluated)")
    status = EXIT_OK
    if o.oracle:
        if len(ladder) ** len(radios) > DEFAULT_BRUTE_FORCE_CAP:
            print("oracle: skipped (lattice above cap)")
            rep["oracle"] = "skipped"
        else:
            bf = brute_force_oracle(sc.topology, radios, ladder, ch, noise, o.policy)
            match = bf.capacity == res.capacity
            rep["oracle"] = "match" if match else "mismatch"
            rep["oracle_capacity_bps_hz"] = bf.capacity
            print(f"oracle: {rep['oracle']}")
            if not match:
                status = EXIT_RUNTIME
    _write(args.out, "search.json", _json(rep))
    _write(args.out, "lattice.csv", res.lattice_csv())
    return status


COMMANDS = {
    "validate": cmd_validate,
    "analyze": cmd_analyze,
    "simulate": cmd_simulate,
    "optimize": cmd_optimize,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bbtransport", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("scenario", type=Path)
        sp.add_argument("--out", type=Path, default=None, help="directory for CSV/JSON outputs")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--horizon", default=None, help="simulation horizon with unit, e.g. 10ms")
        sp.add_argument("--policy", choices=EDGE_POLICIES, default=None)
        sp.add_argument("--workers", type=int, default=1)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    try:
        sc = load_scenario(args.scenario)
        horizon = parse_time(args.horizon) if args.horizon else None
        sc = with_overrides(sc, seed=args.seed, horizon=horizon)
    except (ScenarioError, UnitError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PARSE
    try:
        return COMMANDS[args.command](sc, args)
    except ScenarioError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PARSE
    except (SimulationOverload, RuntimeError, ValueError, FloatingPointError) as e:
        print(f"runtime error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
