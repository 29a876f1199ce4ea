"""Max end-to-end delay as the tree widens from 16 to 64 radios.

The height stays at 2, so the aggregation bound even shrinks with q while
the worst FIFO wait per hop, (q-1) C_{j+1}, grows. Synchronous release
lines every FIFO queue up at once; the random-phase runs show how much of
the growth comes from that alignment.
"""
from bbtransport import aggregation_delay_bound, sweep_scale
from bbtransport.presets import reference_topology

HORIZON = 2 * 10**9  # 2 ms

sync = sweep_scale([2, 3, 4], horizon=HORIZON)
print(f"{'q':>2} {'radios':>6} {'bound':>9} {'sync max':>9} {'random max (5 seeds)':>22}")
for q, tr in sync.items():
    rand = [sweep_scale([q], horizon=HORIZON, phases="random", seed=s)[q].max_delay for s in range(5)]
    print(f"{q:>2} {len(tr.flows):>6} {aggregation_delay_bound(reference_topology(q)):>9} "
          f"{tr.max_delay:>9} {min(rand):>10}..{max(rand):<10}")
print("sync spread q=4 vs q=2:", sync[4].max_delay - sync[2].max_delay, "ps")
