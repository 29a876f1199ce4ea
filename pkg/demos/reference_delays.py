"""Reference tree: rate-monotonic edge scheduling meets every deadline, FIFO does not.

36 radios (four rates per edge switch, deadlines equal to periods) on a
3-ary tree of height 2. The analysis reserves a fixed budget for the
aggregation network, and the simulation confirms the verdict.
"""
import sys

from bbtransport import aggregation_delay_bound, delay_budget, e2e_schedulable, run_simulation
from bbtransport.presets import reference_flows, reference_topology

horizon = int(float(sys.argv[1]) * 10**9) if len(sys.argv) > 1 else 10**9  # ms -> ps, default 1 ms

topo = reference_topology(3)
flows = reference_flows(3)
print(f"edge switches: {topo.n_edges}, radios: {len(flows)}")
print(f"aggregation bound: {aggregation_delay_bound(topo)} ps, "
      f"reserved per flow: {delay_budget(topo, flows).terms['reserved']} ps")
for policy in ("rm", "edf", "fp"):
    print(f"edge test ({policy}):", "schedulable" if e2e_schedulable(topo, flows, policy) else "not schedulable")

print(f"\nsimulating {horizon / 10**9:g} ms from synchronous release")
print(f"{'rate':>8} {'period':>10} {'rm max':>10} {'fifo max':>10}")
runs = {p: run_simulation(topo, flows, horizon=horizon, edge_policy=p) for p in ("rm", "fifo")}
for i, fl in enumerate(flows[:4]):
    worst = {p: max(tr.flows[j].max_delay for j in range(i, len(flows), 4)) for p, tr in runs.items()}
    print(f"{float(fl.rate) / 1e9:>6.1f}G {fl.period:>10} {worst['rm']:>10} {worst['fifo']:>10}")
print("deadline misses: rm", runs["rm"].total_misses, "fifo", runs["fifo"].total_misses)
