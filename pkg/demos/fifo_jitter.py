"""Two periodic flows on one FIFO link: the output of the slower flow is not periodic.

Flow A sends every 2 us, flow B every 3 us, each packet takes 1 us on the
wire. Both start at t=0. FIFO serves them in arrival order, so B's packets
leave at gaps of 2 us and 4 us even though they arrive every 3 us.
"""
from bbtransport import simulate_link
from bbtransport.sched import FlowSet

US = 10**6

fs = FlowSet.from_pairs([(2 * US, 2 * US), (3 * US, 3 * US)], 1 * US)
trace = simulate_link(fs, "fifo", horizon=12 * US + 1, record=True)

for flow, name in ((0, "A (2 us)"), (1, "B (3 us)")):
    rows = sorted((r for r in trace.packet_log if r[0] == flow), key=lambda r: r[3])
    departs = [r[3] / US for r in rows]
    print(f"flow {name}: arrivals {[r[2] / US for r in rows]}")
    print(f"{'':>14} departures {departs}")

b = sorted(r[3] for r in trace.packet_log if r[0] == 1)
print("B departure gaps (us):", [(y - x) / US for x, y in zip(b, b[1:])])
print("B delay range (us):", trace.flows[1].min_delay / US, "to", trace.flows[1].max_delay / US)
