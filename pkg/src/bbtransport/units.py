"""Integer-picosecond time base and unit-suffixed quantity parsing.

Every time quantity in the package is a plain ``int`` of picoseconds. Values
coming from seconds or from size/rate quotients are rounded half-up exactly
once, using rational arithmetic.
"""
from __future__ import annotations

import math
import re
from fractions import Fraction
from numbers import Rational, Real

PS_PER_S = 10**12

TimePs = int

_TIME_UNITS = {
    "ps": Fraction(1),
    "ns": Fraction(10**3),
    "us": Fraction(10**6),
    "µs": Fraction(10**6),
    "ms": Fraction(10**9),
    "s": Fraction(10**12),
}
_RATE_UNITS = {
    "bps": 1,
    "kbps": 10**3,
    "mbps": 10**6,
    "gbps": 10**9,
    "tbps": 10**12,
}
_FREQ_UNITS = {"hz": 1, "khz": 10**3, "mhz": 10**6, "ghz": 10**9}
# sizes in bits; KB is 1000 bytes
_SIZE_UNITS = {
    "b": 1,
    "bit": 1,
    "bits": 1,
    "B": 8,
    "KB": 8 * 10**3,
    "MB": 8 * 10**6,
    "Kb": 10**3,
    "Mb": 10**6,
}

_QTY = re.compile(
    r"^\s*([0-9]+(?:/[0-9]+|(?:\.[0-9]*)?(?:[eE][+-]?[0-9]+)?))\s*([A-Za-zµ]+)\s*$"
)


class UnitError(ValueError):
    """A quantity string is malformed or carries the wrong unit."""


def as_fraction(x) -> Fraction:
    """Exact rational view of an int, Fraction, decimal string or float."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise TypeError("boolean is not a quantity")
    if isinstance(x, (int, Rational)):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    if isinstance(x, Real):
        # repr round-trips, so 1.5e9 becomes exactly 1500000000
        return Fraction(repr(float(x)))
    raise TypeError(f"cannot interpret {x!r} as a number")


def round_half_up(x: Fraction) -> int:
    return math.floor(x + Fraction(1, 2))


def ceil_fraction(x: Fraction) -> int:
    return -((-x.numerator) // x.denominator)


def seconds_to_ps(seconds) -> TimePs:
    """Convert seconds to picoseconds, rounding half-up (lossy only below 1 ps)."""
    return round_half_up(as_fraction(seconds) * PS_PER_S)


def ps_to_seconds(t: TimePs) -> float:
    return t / PS_PER_S


def tx_time(size_bits: int, rate_bps) -> TimePs:
    """Transmission time of ``size_bits`` on a link of ``rate_bps``."""
    rate = as_fraction(rate_bps)
    if size_bits <= 0 or rate <= 0:
        raise ValueError("size and rate must be positive")
    return round_half_up(Fraction(size_bits) * PS_PER_S / rate)


def _split(text: str, what: str) -> tuple[Fraction, str]:
    if not isinstance(text, str):
        raise UnitError(f"{what} needs an explicit unit, got {text!r}")
    m = _QTY.match(text)
    if not m:
        raise UnitError(f"malformed {what} {text!r}")
    return Fraction(m.group(1)), m.group(2)


def parse_time(text: str) -> TimePs:
    value, unit = _split(text, "time")
    if unit not in _TIME_UNITS:
        raise UnitError(f"unknown time unit {unit!r} in {text!r}")
    return round_half_up(value * _TIME_UNITS[unit])


def parse_rate(text: str) -> Fraction:
    value, unit = _split(text, "rate")
    scale = _RATE_UNITS.get(unit.lower())
    if scale is None:
        raise UnitError(f"unknown rate unit {unit!r} in {text!r}")
    return value * scale


def parse_frequency(text: str) -> Fraction:
    value, unit = _split(text, "frequency")
    scale = _FREQ_UNITS.get(unit.lower())
    if scale is None:
        raise UnitError(f"unknown frequency unit {unit!r} in {text!r}")
    return value * scale


def parse_size(text: str) -> int:
    value, unit = _split(text, "size")
    if unit not in _SIZE_UNITS:
        raise UnitError(f"unknown size unit {unit!r} in {text!r}")
    bits = value * _SIZE_UNITS[unit]
    if bits.denominator != 1:
        raise UnitError(f"size {text!r} is not a whole number of bits")
    return int(bits)


def format_time(t: TimePs) -> str:
    return f"{int(t)}ps"


def format_rate(r) -> str:
    r = as_fraction(r)
    if r.denominator != 1:
        raise UnitError(f"rate {r} bps is not integral")
    return f"{r.numerator}bps"


def format_frequency(f) -> str:
    f = as_fraction(f)
    if f.denominator != 1:
        return f"{f.numerator}/{f.denominator}Hz"
    return f"{f.numerator}Hz"


def format_size(bits: int) -> str:
    return f"{int(bits)}b"


def lcm_all(values) -> int:
    out = 1
    for v in values:
        out = out * v // math.gcd(out, v)
    return out
