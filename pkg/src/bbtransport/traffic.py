"""Radio flows and the conversion of radio parameters into traffic specs."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .units import PS_PER_S, TimePs, as_fraction, round_half_up


def flow_rate(Q: int, f) -> Fraction:
    """Transport rate in bits/s of a radio sampling I and Q at ``f`` Hz with ``Q`` bits each."""
    if isinstance(Q, bool) or int(Q) != Q or Q < 1:
        raise ValueError(f"quantization width must be a positive integer, got {Q!r}")
    f = as_fraction(f)
    if f <= 0:
        raise ValueError(f"sampling frequency must be positive, got {f}")
    return 2 * int(Q) * f


def inter_arrival(B: int, R) -> TimePs:
    """Packet period in ps for payload ``B`` bits at rate ``R`` bits/s, rounded half-up."""
    R = as_fraction(R)
    if B <= 0 or R <= 0:
        raise ValueError("payload size and rate must be positive")
    return round_half_up(Fraction(B) * PS_PER_S / R)


def transport_deadline(t_prot: TimePs, t_proc: TimePs) -> TimePs:
    """Transport delay bound left after subtracting processing time from the protocol deadline."""
    if t_proc < 0:
        raise ValueError("processing time cannot be negative")
    if t_proc >= t_prot:
        raise ValueError(
            f"processing time {t_proc} ps leaves no transport budget within {t_prot} ps"
        )
    return t_prot - t_proc


@dataclass(frozen=True)
class TrafficSpec:
    period: TimePs
    deadline: TimePs
    tx_time: TimePs

    def __post_init__(self):
        if self.period <= 0 or self.tx_time <= 0:
            raise ValueError("period and tx_time must be positive")
        if self.deadline <= 0:
            raise ValueError("deadline must be positive")

    @property
    def utilization(self) -> Fraction:
        return Fraction(self.tx_time, self.period)


@dataclass(frozen=True)
class RadioFlow:
    """One radio: sampling frequency ``f`` (Hz), width ``Q`` (bits), payload ``B`` (bits).

    ``D`` is the end-to-end transport deadline in ps and ``edge`` the index of
    the edge switch the radio attaches to.
    """

    id: int
    f: Fraction
    Q: int
    B: int
    D: TimePs
    edge: int = 0

    def __post_init__(self):
        object.__setattr__(self, "f", as_fraction(self.f))
        flow_rate(self.Q, self.f)
        if self.B <= 0:
            raise ValueError("payload size must be positive")
        if self.D <= 0:
            raise ValueError("deadline must be positive")
        if self.edge < 0:
            raise ValueError("edge index must be non-negative")

    @classmethod
    def from_rate(cls, id, rate, B, D, edge=0, Q=8) -> "RadioFlow":
        """Build a flow from a target transport rate; ``f`` is back-solved for width ``Q``."""
        return cls(id=id, f=as_fraction(rate) / (2 * Q), Q=Q, B=B, D=D, edge=edge)

    @property
    def rate(self) -> Fraction:
        return flow_rate(self.Q, self.f)

    @property
    def period(self) -> TimePs:
        return inter_arrival(self.B, self.rate)

    def with_quantization(self, Q: int) -> "RadioFlow":
        return RadioFlow(self.id, self.f, Q, self.B, self.D, self.edge)

    def with_deadline(self, D: TimePs) -> "RadioFlow":
        return RadioFlow(self.id, self.f, self.Q, self.B, D, self.edge)
