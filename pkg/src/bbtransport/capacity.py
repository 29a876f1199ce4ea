"""MIMO capacity under ADC quantization noise and the schedulability-constrained width search.

The received vector is modeled as ``y = H x + z + z_Q`` with ``E[x x^H] = rho I``,
thermal noise ``sigma2 I`` and independent per-radio quantization noise of power
``gamma(Q_i)``. Capacity per channel realization is
``log2 det(I + rho Sigma^-1 H H^H)`` with ``Sigma = sigma2 I + diag(gamma(Q))``.
"""
from __future__ import annotations

import csv
import io
import itertools
import math
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .fattree import FatTreeTopology, e2e_schedulable
from .traffic import RadioFlow

DEFAULT_NOISE_SCALE = math.pi * math.sqrt(3) / 2
DEFAULT_BRUTE_FORCE_CAP = 10**5


@dataclass(frozen=True)
class QuantLadder:
    levels: tuple

    def __post_init__(self):
        levels = tuple(int(x) for x in self.levels)
        if not levels:
            raise ValueError("ladder needs at least one level")
        if levels[0] < 1 or any(b <= a for a, b in zip(levels, levels[1:])):
            raise ValueError(f"ladder must be strictly increasing positive integers, got {levels}")
        object.__setattr__(self, "levels", levels)

    def __len__(self):
        return len(self.levels)

    def __contains__(self, Q):
        return Q in self.levels

    @property
    def lowest(self) -> int:
        return self.levels[0]

    @property
    def highest(self) -> int:
        return self.levels[-1]

    def below(self, Q: int) -> Optional[int]:
        i = self.levels.index(Q)
        return self.levels[i - 1] if i > 0 else None

    def above(self, Q: int) -> Optional[int]:
        i = self.levels.index(Q)
        return self.levels[i + 1] if i + 1 < len(self.levels) else None

    def validate(self, Q: Sequence[int], n: Optional[int] = None) -> tuple:
        Q = tuple(int(x) for x in Q)
        if n is not None and len(Q) != n:
            raise ValueError(f"quantization vector has {len(Q)} entries, expected {n}")
        bad = [x for x in Q if x not in self.levels]
        if bad:
            raise ValueError(f"widths {bad} are not on the ladder {self.levels}")
        return Q


@dataclass(frozen=True)
class QuantNoiseModel:
    """Quantization noise power ``scale * 2**(-2 Q)``, or ``func(Q)`` when given."""

    scale: float = DEFAULT_NOISE_SCALE
    func: Optional[Callable[[int], float]] = None

    def __call__(self, Q) -> float:
        if self.func is not None:
            return float(self.func(Q))
        return self.scale * 2.0 ** (-2 * Q)

    def check_decreasing(self, ladder: QuantLadder) -> bool:
        g = [self(x) for x in ladder.levels]
        return all(b < a for a, b in zip(g, g[1:]))


@dataclass(frozen=True)
class ChannelEnsemble:
    """Frozen list of ``n x m`` channel matrices shared by every capacity evaluation."""

    H: np.ndarray
    rho: float = 1.0
    sigma2: float = 1.0
    seed: Optional[int] = None

    def __post_init__(self):
        H = np.asarray(self.H, dtype=complex)
        if H.ndim == 2:
            H = H[None]
        if H.ndim != 3 or H.shape[0] == 0:
            raise ValueError("expected a non-empty stack of n x m matrices")
        if self.sigma2 <= 0:
            raise ValueError("thermal noise power must be positive")
        if self.rho < 0:
            raise ValueError("transmit power must be non-negative")
        H.setflags(write=False)
        object.__setattr__(self, "H", H)

    @classmethod
    def rayleigh(cls, n: int, m: int, count: int = 1000, rho: float = 1.0,
                 sigma2: float = 1.0, seed: int = 0) -> "ChannelEnsemble":
        """I.i.d. CN(0, 1) entries from a counter-based generator keyed by ``seed``."""
        rng = np.random.Generator(np.random.Philox(key=seed))
        a = rng.standard_normal((count, n, m))
        b = rng.standard_normal((count, n, m))
        return cls((a + 1j * b) / math.sqrt(2), rho=rho, sigma2=sigma2, seed=seed)

    @property
    def n(self) -> int:
        return self.H.shape[1]

    @property
    def m(self) -> int:
        return self.H.shape[2]

    def __len__(self):
        return self.H.shape[0]


def per_realization_capacity(Q: Sequence[int], ch: ChannelEnsemble, noise: QuantNoiseModel) -> np.ndarray:
    """``log2 det(I + rho Sigma^-1 H H^H)`` for every realization, in b/s/Hz."""
    if len(Q) != ch.n:
        raise ValueError(f"need {ch.n} widths, got {len(Q)}")
    inv_sqrt = 1.0 / np.sqrt(ch.sigma2 + np.array([noise(x) for x in Q], dtype=float))
    G = ch.H * inv_sqrt[None, :, None]
    # Hermitian positive definite, so Cholesky works
    A = np.eye(ch.n) + ch.rho * (G @ np.conj(np.swapaxes(G, 1, 2)))
    L = np.linalg.cholesky(A)
    diag = np.real(np.diagonal(L, axis1=1, axis2=2))
    return 2.0 * np.sum(np.log2(diag), axis=1)


def ergodic_capacity(Q: Sequence[int], ch: ChannelEnsemble, noise: QuantNoiseModel) -> float:
    vals = per_realization_capacity(Q, ch, noise)
    out = math.fsum(vals.tolist()) / len(vals)
    if not math.isfinite(out):
        raise FloatingPointError(f"non-finite capacity for Q={tuple(Q)}")
    return out


def enum_next(Q: Sequence[int], ladder: QuantLadder) -> list[tuple]:
    """Vectors one ladder step below ``Q`` in exactly one coordinate, in coordinate order."""
    Q = tuple(Q)
    out = []
    for i, x in enumerate(Q):
        lower = ladder.below(x)
        if lower is not None:
            out.append(Q[:i] + (lower,) + Q[i + 1:])
    return out


def quantized_flows(Q: Sequence[int], radios: Sequence[RadioFlow]) -> list[RadioFlow]:
    return [r.with_quantization(int(x)) for r, x in zip(radios, Q)]


def schedulable_under_q(Q: Sequence[int], topology: FatTreeTopology,
                        radios: Sequence[RadioFlow], policy: str = "edf") -> bool:
    """End-to-end schedulability with periods recomputed from widths ``Q``."""
    if len(Q) != len(radios):
        raise ValueError("one width per radio")
    return e2e_schedulable(topology, quantized_flows(Q, radios), policy).schedulable


@dataclass
class SearchResult:
    Q: Optional[tuple]
    capacity: float
    expanded: list = field(default_factory=list)
    evaluated: list = field(default_factory=list)
    capacities: dict = field(default_factory=dict)
    wall_time: float = 0.0
    method: str = "bfs"

    def report(self) -> dict:
        return {
            "method": self.method,
            "Q": list(self.Q) if self.Q is not None else None,
            "capacity_bps_hz": self.capacity,
            "nodes_expanded": len(self.expanded),
            "nodes_evaluated": len(self.evaluated),
            "wall_time_s": self.wall_time,
        }

    def lattice_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["Q", "schedulable", "capacity_bps_hz"])
        for Q in self.expanded:
            w.writerow(["-".join(map(str, Q)), 0, ""])
        for Q in self.evaluated:
            w.writerow(["-".join(map(str, Q)), 1, repr(self.capacities[Q])])
        return buf.getvalue()


def bfs_search(topology: FatTreeTopology, radios: Sequence[RadioFlow], ladder: QuantLadder,
               ch: ChannelEnsemble, noise: QuantNoiseModel, policy: str = "edf") -> SearchResult:
    """Breadth-first descent from the all-highest widths.

    Schedulable vectors are scored and not expanded; unschedulable ones are
    expanded one ladder step at a time. A visited set keeps each vector from
    being queued twice.
    """
    start = time.perf_counter()
    root = (ladder.highest,) * len(radios)
    queue = deque([root])
    seen = {root}
    res = SearchResult(None, 0.0)
    while queue:
        Q = queue.popleft()
        if schedulable_under_q(Q, topology, radios, policy):
            c = ergodic_capacity(Q, ch, noise)
            res.evaluated.append(Q)
            res.capacities[Q] = c
            if res.Q is None or c > res.capacity:
                res.Q, res.capacity = Q, c
        else:
            res.expanded.append(Q)
            for nxt in enum_next(Q, ladder):
                if nxt not in seen:
                    seen.add(nxt)
                    queue.append(nxt)
    res.wall_time = time.perf_counter() - start
    return res


def brute_force_oracle(topology: FatTreeTopology, radios: Sequence[RadioFlow], ladder: QuantLadder,
                       ch: ChannelEnsemble, noise: QuantNoiseModel, policy: str = "edf",
                       cap: int = DEFAULT_BRUTE_FORCE_CAP) -> SearchResult:
    """Exhaustive search over every width vector; raises when the lattice exceeds ``cap``."""
    size = len(ladder) ** len(radios)
    if size > cap:
        raise ValueError(f"lattice has {size} vectors, above the cap of {cap}")
    start = time.perf_counter()
    res = SearchResult(None, 0.0, method="brute-force")
    for Q in itertools.product(ladder.levels, repeat=len(radios)):
        if not schedulable_under_q(Q, topology, radios, policy):
            continue
        c = ergodic_capacity(Q, ch, noise)
        res.evaluated.append(Q)
        res.capacities[Q] = c
        if res.Q is None or c > res.capacity:
            res.Q, res.capacity = Q, c
    res.wall_time = time.perf_counter() - start
    return res
