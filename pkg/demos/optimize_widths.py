"""Pick ADC widths that maximize MIMO capacity while every edge stays schedulable.

Wider samples mean more capacity but shorter packet periods. The search
starts from the widest setting and steps single radios down the ladder
until the edge tests pass, then checks itself against exhaustive search.
"""
from pathlib import Path

from bbtransport import ChannelEnsemble, QuantLadder, QuantNoiseModel, bfs_search, brute_force_oracle
from bbtransport.capacity import ergodic_capacity
from bbtransport.scenario import load_scenario

sc = load_scenario(Path(__file__).resolve().parents[1] / "scenarios" / "optimize_small.yaml")
o = sc.optimization
ladder = QuantLadder(o.ladder)
noise = QuantNoiseModel()
radios = list(sc.flows)
ch = ChannelEnsemble.rayleigh(len(radios), o.antennas, o.realizations, o.rho, o.sigma2, o.seed)

top = (ladder.highest,) * len(radios)
print(f"widest widths {top}: capacity {ergodic_capacity(top, ch, noise):.4f} b/s/Hz (not schedulable)")
res = bfs_search(sc.topology, radios, ladder, ch, noise, o.policy)
print(f"expanded {len(res.expanded)} unschedulable vectors, scored {len(res.evaluated)} schedulable ones")
for Q in sorted(res.evaluated, key=res.capacities.get, reverse=True):
    print(f"  {Q}: {res.capacities[Q]:.4f}")
bf = brute_force_oracle(sc.topology, radios, ladder, ch, noise, o.policy)
print(f"best {res.Q} at {res.capacity:.6f}; exhaustive search over {len(ladder) ** len(radios)} vectors agrees:",
      bf.capacity == res.capacity)
