"""Message delay models. All times are integer microseconds."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "DelayModel",
    "GEO_ONE_WAY_QUANTILES_MS",
    "LinkMatrixDelay",
    "QuantileTable",
    "SampledDelay",
    "UniformDelay",
    "ms",
    "per_sender_matrix",
    "sample_link_matrix",
]

# One-way delays in ms: halves of 150/230/400 ms round trips at the 50th, 70th
# and 90th percentiles, with assumed tails at both ends.
GEO_ONE_WAY_QUANTILES_MS: tuple[tuple[float, float], ...] = (
    (0.0, 20.0),
    (0.5, 75.0),
    (0.7, 115.0),
    (0.9, 200.0),
    (1.0, 300.0),
)


def ms(x: float) -> int:
    """Milliseconds to integer microseconds."""
    return int(round(x * 1000))


class DelayModel:
    """Delay from ``sender`` to ``recipient`` for a message sent at ``now``."""

    max_delay: int = 0

    def row(self, sender: int) -> Sequence[int] | None:
        """Fixed delays to every recipient, if the model has them."""
        return None

    def delay(self, sender: int, recipient: int, now: int) -> int:
        raise NotImplementedError

    def describe(self) -> dict:
        raise NotImplementedError


@dataclass
class UniformDelay(DelayModel):
    delta: int
    n: int

    def __post_init__(self) -> None:
        if self.delta < 0:
            raise ValueError("delay must be non-negative")
        self.max_delay = self.delta
        self._row = [self.delta] * self.n

    def row(self, sender: int) -> Sequence[int]:
        return self._row

    def delay(self, sender: int, recipient: int, now: int) -> int:
        return self.delta

    def describe(self) -> dict:
        return {"kind": "uniform", "delta_us": self.delta}


class LinkMatrixDelay(DelayModel):
    """Constant delay per ordered link ``matrix[sender][recipient]``."""

    def __init__(self, matrix: Sequence[Sequence[int]]) -> None:
        self.matrix = [list(map(int, r)) for r in matrix]
        n = len(self.matrix)
        if any(len(r) != n for r in self.matrix):
            raise ValueError("delay matrix must be square")
        if any(d < 0 for r in self.matrix for d in r):
            raise ValueError("delays must be non-negative")
        self.max_delay = max(max(r) for r in self.matrix)
        self.min_delay = min(min(r) for r in self.matrix)

    def row(self, sender: int) -> Sequence[int]:
        return self.matrix[sender]

    def delay(self, sender: int, recipient: int, now: int) -> int:
        return self.matrix[sender][recipient]

    def describe(self) -> dict:
        return {"kind": "per_link", "matrix_us": self.matrix}


@dataclass(frozen=True)
class QuantileTable:
    """Piecewise-linear inverse CDF through ``(probability, value)`` points."""

    points: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        ps = [p for p, _ in self.points]
        vs = [v for _, v in self.points]
        if len(ps) < 2 or ps[0] != 0.0 or ps[-1] != 1.0:
            raise ValueError("quantile table must start at 0 and end at 1")
        if any(b < a for a, b in zip(ps, ps[1:])) or any(b < a for a, b in zip(vs, vs[1:])):
            raise ValueError("quantile table must be non-decreasing")

    def sample(self, u: np.ndarray) -> np.ndarray:
        ps = np.array([p for p, _ in self.points])
        vs = np.array([v for _, v in self.points])
        return np.interp(u, ps, vs)

    @property
    def max_value(self) -> float:
        return self.points[-1][1]


def sample_link_matrix(
    n: int, table: QuantileTable, seed: int, *, symmetric: bool = True, scale: float = 1000.0
) -> list[list[int]]:
    """Draw one delay per link (in the table's unit times ``scale``)."""
    rng = np.random.default_rng(seed)
    u = rng.random((n, n))
    if symmetric:
        u = np.triu(u) + np.triu(u, 1).T
    m = np.rint(table.sample(u) * scale).astype(np.int64)
    return m.tolist()


def per_sender_matrix(delays: Sequence[int], n: int | None = None) -> list[list[int]]:
    """Matrix whose row ``i`` is constant ``delays[i]``.

    Every recipient hears a given sender after the same delay, so parties that
    start a phase together also finish it together.
    """
    n = len(delays) if n is None else n
    return [[int(d)] * n for d in delays]


class SampledDelay(DelayModel):
    """A fresh delay per message, drawn from a quantile table or a uniform range."""

    _BATCH = 1 << 14

    def __init__(self, table: QuantileTable, seed: int, *, scale: float = 1000.0) -> None:
        self.table = table
        self.seed = seed
        self.scale = scale
        self.max_delay = int(round(table.max_value * scale))
        self._rng = np.random.default_rng(seed)
        self._buf: list[int] = []

    def _refill(self) -> None:
        vals = np.rint(self.table.sample(self._rng.random(self._BATCH)) * self.scale)
        self._buf = vals.astype(np.int64).tolist()
        self._buf.reverse()

    def delay(self, sender: int, recipient: int, now: int) -> int:
        if not self._buf:
            self._refill()
        return self._buf.pop()

    def describe(self) -> dict:
        return {"kind": "sampled", "seed": self.seed, "quantiles": list(self.table.points)}
