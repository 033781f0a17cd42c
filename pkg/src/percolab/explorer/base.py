"""Common types for randomised exploration algorithms."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Iterable

import numpy as np


class AlgorithmError(RuntimeError):
    """The exploration did not terminate within its unit budget."""


class InvalidGeometry(ValueError):
    pass


@dataclass
class AlgorithmTrace:
    """Revealed units in order, the states seen, auxiliary draws and the output."""

    units: list[int]
    states: list[Any]
    aux: dict
    output: bool
    info: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.units)

    def revealed(self, n_units: int) -> np.ndarray:
        mask = np.zeros(n_units, dtype=bool)
        mask[np.asarray(self.units, dtype=np.int64)] = True
        return mask

    def dump_jsonl(self) -> str:
        """One JSON object per step: step, unit id, state summary."""
        lines = [json.dumps({"aux": self.aux, "output": bool(self.output)}, sort_keys=True)]
        for step, (u, s) in enumerate(zip(self.units, self.states)):
            lines.append(json.dumps({"step": step, "unit": int(u), "state": s}, sort_keys=True))
        return "\n".join(lines) + "\n"


class AlgorithmSpec:
    """Base class: an adapted procedure that reveals units and outputs 1_A.

    Subclasses set ``name``, ``unit_kind`` ("edge" or "box"), ``seeding``,
    ``growth``, ``n_units`` and implement :meth:`run`.
    """

    name = "algorithm"
    unit_kind = "edge"
    seeding = ""
    growth = ""
    n_units = 0

    def aux_distribution(self) -> list[tuple[Any, float]]:
        """Finite law of the auxiliary draw as (value, probability) pairs."""
        return [(None, 1.0)]

    def draw_aux(self, rng: np.random.Generator):
        vals = self.aux_distribution()
        if len(vals) == 1:
            return vals[0][0]
        return vals[int(rng.integers(len(vals)))][0]

    def run(self, sample, aux) -> tuple[np.ndarray, bool, dict]:  # pragma: no cover
        raise NotImplementedError

    def state_summary(self, sample, unit: int):  # pragma: no cover
        raise NotImplementedError

    def direct(self, sample) -> bool:  # pragma: no cover
        """Direct evaluation of the target event on the full sample."""
        raise NotImplementedError


def run_algorithm(spec: AlgorithmSpec, sample, rng: np.random.Generator | None = None,
                  aux=None) -> AlgorithmTrace:
    """Run ``spec`` on ``sample``; auxiliary randomness comes from ``rng``."""
    if aux is None:
        aux = spec.draw_aux(rng if rng is not None else np.random.default_rng(0))
    order, output, info = spec.run(sample, aux)
    order = np.asarray(order, dtype=np.int64)
    if order.size > spec.n_units:
        raise AlgorithmError("unit budget exceeded")
    if np.unique(order).size != order.size:
        raise AlgorithmError("a unit was revealed twice")
    states = [spec.state_summary(sample, int(u)) for u in order]
    return AlgorithmTrace(order.tolist(), states, {"value": _jsonable(aux)}, bool(output), info)


def _jsonable(x):
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    return x


@dataclass
class RevealmentTable:
    """Accumulated reveal counts; merge is commutative and associative."""

    counts: np.ndarray
    n: int
    sizes_sum: float = 0.0
    sizes_sq: float = 0.0

    @classmethod
    def empty(cls, n_units: int) -> "RevealmentTable":
        return cls(np.zeros(n_units, dtype=np.int64), 0)

    def add(self, revealed: np.ndarray) -> None:
        self.counts += revealed.astype(np.int64)
        k = int(revealed.sum())
        self.n += 1
        self.sizes_sum += k
        self.sizes_sq += k * k

    def merge(self, other: "RevealmentTable") -> "RevealmentTable":
        return RevealmentTable(self.counts + other.counts, self.n + other.n,
                               self.sizes_sum + other.sizes_sum, self.sizes_sq + other.sizes_sq)

    @property
    def rev(self) -> np.ndarray:
        return self.counts / max(self.n, 1)

    @property
    def stderr(self) -> np.ndarray:
        r = self.rev
        return np.sqrt(r * (1 - r) / max(self.n, 1))

    @property
    def mean_size(self) -> float:
        return self.sizes_sum / max(self.n, 1)

    @property
    def size_stderr(self) -> float:
        if self.n < 2:
            return 0.0
        m = self.mean_size
        var = (self.sizes_sq - self.n * m * m) / (self.n - 1)
        return float(np.sqrt(max(var, 0.0) / self.n))


def merge_tables(tables: Iterable[RevealmentTable]) -> RevealmentTable:
    tables = list(tables)
    out = tables[0]
    for t in tables[1:]:
        out = out.merge(t)
    return out
