"""Context-space geometry: the uniform grid used by CoS and the adaptive
binary-split tree used by DCZA.

Boundary convention (shared by both partitions): a cell covers the half-open
interval ``((l-1)/m, l/m]`` on every axis and the point 0 belongs to the first
cell, so the cells tile ``[0, 1]^d`` exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product
from typing import NamedTuple, Sequence

from .errors import ConfigurationError, InvariantViolation


def check_context(x: Sequence[float], d: int | None = None) -> tuple[float, ...]:
    x = tuple(float(v) for v in x)
    if not x:
        raise ConfigurationError("context must have at least one coordinate")
    if d is not None and len(x) != d:
        raise ConfigurationError(f"context has dimension {len(x)}, expected {d}")
    for v in x:
        if not 0.0 <= v <= 1.0:
            raise ConfigurationError(f"context coordinate {v} outside [0, 1]")
    return x


def axis_cell(v: float, m: int) -> int:
    """Zero-based cell of coordinate ``v`` on an axis cut into ``m`` slices."""
    if v <= 0.0:
        return 0
    c = math.ceil(v * m) - 1
    # guard against v*m rounding just above an integer
    if c > 0 and v <= c / m:
        c -= 1
    return min(c, m - 1)


@dataclass(frozen=True)
class UniformPartition:
    m_T: int
    d: int

    def __post_init__(self):
        if self.m_T < 1 or self.d < 1:
            raise ConfigurationError("uniform partition needs m_T >= 1 and d >= 1")

    @property
    def n_cells(self) -> int:
        return self.m_T ** self.d

    def locate(self, x: Sequence[float]) -> tuple[int, ...]:
        """One-based cell index per axis, as in ``P_l``."""
        if len(x) != self.d:
            raise ConfigurationError(f"context has dimension {len(x)}, expected {self.d}")
        return tuple(axis_cell(v, self.m_T) + 1 for v in x)

    def key(self, x: Sequence[float]) -> tuple[int, ...]:
        # hot path: no validation, zero-based
        m = self.m_T
        return tuple(axis_cell(v, m) for v in x)

    def contains(self, cell: Sequence[int], x: Sequence[float]) -> bool:
        return self.locate(x) == tuple(cell)


def locate_uniform(partition: UniformPartition, x: Sequence[float]) -> tuple[int, ...]:
    return partition.locate(x)


class CubeId(NamedTuple):
    level: int
    index: tuple[int, ...]

    @property
    def side(self) -> float:
        return 2.0 ** (-self.level)

    @property
    def d(self) -> int:
        return len(self.index)

    def bounds(self) -> list[tuple[float, float]]:
        s = self.side
        return [(i * s, (i + 1) * s) for i in self.index]


def root_cube(d: int) -> CubeId:
    return CubeId(0, (0,) * d)


def cube_index_at(level: int, x: Sequence[float]) -> tuple[int, ...]:
    """Index of the level-``level`` dyadic cube containing ``x``."""
    m = 1 << level
    return tuple(axis_cell(v, m) for v in x)


def cube_contains(c: CubeId, x: Sequence[float]) -> bool:
    if len(x) != len(c.index):
        raise ConfigurationError("cube and context dimensions differ")
    return cube_index_at(c.level, x) == c.index


def children(c: CubeId) -> list[CubeId]:
    offsets = product((0, 1), repeat=len(c.index))
    return [CubeId(c.level + 1, tuple(2 * i + o for i, o in zip(c.index, off))) for off in offsets]


def child_slot(c: CubeId, x: Sequence[float]) -> int:
    """Position of the child of ``c`` that contains ``x`` within ``children(c)``."""
    idx = cube_index_at(c.level + 1, x)
    slot = 0
    for i in idx:
        slot = (slot << 1) | (i & 1)
    return slot


def level_bound(t: int, A: float, p: float) -> int:
    """Largest level the split rule can reach after ``t`` arrivals."""
    return math.floor(math.log2(max(t / A, 1.0)) / p) + 1


@dataclass
class AdaptiveTree:
    d: int
    A: float = 1.0
    p: float = 4.0
    split_strict: bool = False
    active: dict = field(default_factory=dict)  # level -> {index: arrival count}
    arrivals: int = 0

    def __post_init__(self):
        if self.A <= 0 or self.p <= 0:
            raise ConfigurationError("A and p must be positive")
        if not self.active:
            self.active = {0: {(0,) * self.d: 0}}

    def threshold(self, level: int) -> float:
        return self.A * 2.0 ** (self.p * level)

    def cubes(self) -> list[CubeId]:
        return [CubeId(lv, idx) for lv, idxs in sorted(self.active.items()) for idx in sorted(idxs)]

    def count(self, c: CubeId) -> int:
        return self.active[c.level][c.index]

    def find(self, x: Sequence[float]) -> CubeId:
        for level, idxs in self.active.items():
            idx = cube_index_at(level, x)
            if idx in idxs:
                return CubeId(level, idx)
        raise InvariantViolation(f"no active cube contains {tuple(x)}")

    def observe_and_maybe_split(self, x: Sequence[float]) -> tuple[CubeId, list[CubeId]]:
        """Count one arrival at ``x``; split its cube once the count reaches ``A 2^{p l}``."""
        c = self.find(x)
        self.arrivals += 1
        idxs = self.active[c.level]
        n = idxs[c.index] + 1
        idxs[c.index] = n
        limit = self.threshold(c.level)
        if (n > limit) if self.split_strict else (n >= limit):
            del idxs[c.index]
            if not idxs:
                del self.active[c.level]
            kids = children(c)
            nxt = self.active.setdefault(c.level + 1, {})
            for k in kids:
                nxt[k.index] = 0
            return c, kids
        return c, []

    def max_active_level(self) -> int:
        return max(self.active)


def observe_and_maybe_split(tree: AdaptiveTree, x: Sequence[float]):
    return tree.observe_and_maybe_split(x)


def max_active_level(tree: AdaptiveTree) -> int:
    return tree.max_active_level()
