"""Real-time baseband transport over symmetric fat-tree networks."""
from .capacity import (
    ChannelEnsemble,
    QuantLadder,
    QuantNoiseModel,
    SearchResult,
    bfs_search,
    brute_force_oracle,
    enum_next,
    ergodic_capacity,
    schedulable_under_q,
)
from .fattree import (
    DelayBudget,
    FatTreeTopology,
    Violation,
    aggregation_delay_bound,
    delay_budget,
    e2e_schedulable,
    max_queuing_per_hop,
    validate_topology,
)
from .sched import (
    FlowSet,
    SchedVerdict,
    edf_expression,
    edf_test,
    fixed_priority_test,
    rate_monotonic_order,
)
from .sim import SimTrace, run_simulation, simulate_link, sweep_scale
from .traffic import RadioFlow, TrafficSpec, flow_rate, inter_arrival, transport_deadline

__version__ = "0.1.0"
