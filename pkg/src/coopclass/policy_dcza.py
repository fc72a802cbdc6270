"""DCZA: the CoS decision rule run on an adaptively refined tree of dyadic cubes."""

from __future__ import annotations

import math

from .context_space import AdaptiveTree, CubeId, child_slot, children, cube_index_at
from .control import EXPLOIT, EXPLORE, TRAIN, ControlParams
from .errors import InvariantViolation
from .policy_cos import Choice, CosPolicy, RegionStats, record_outcome


class DczaPolicy(CosPolicy):
    """Per-learner DCZA state.

    Besides the active partition, the learner keeps ``tracked``: every cube it
    ever activated (its own splits or creations requested by peers) with the
    number of labeled arrivals inside it since activation.  Peers' count
    queries are answered from this map.

    With ``child_memory`` each active cube also records per-child sample means
    so the children start with those statistics and exploitation averages them.
    """

    name = "dcza"

    def __init__(self, n_own: int, n_peers: int, control: ControlParams, d: int,
                 A: float = 1.0, p: float = 4.0, child_memory: bool = False, split_strict: bool = False):
        self.n_own = n_own
        self.n_arms = n_own + n_peers
        self.control = control
        self.d = d
        self.tree = AdaptiveTree(d, A, p, split_strict)
        self.child_memory = child_memory
        self.n_children = 2 ** d
        self.cells: dict[CubeId, RegionStats] = {}
        self.tracked: dict[int, dict[tuple, int]] = {}
        self._t = 0
        self._D = (0.0, 0.0, 0.0)
        self.split_log: list[tuple[int, int]] = []  # (arrivals so far, max level after split)
        self._activate(CubeId(0, (0,) * d))

    def _new_stats(self) -> RegionStats:
        s = RegionStats(self.n_arms)
        if self.child_memory:
            s.child_n = [[0] * self.n_arms for _ in range(self.n_children)]
            s.child_mean = [[0.0] * self.n_arms for _ in range(self.n_children)]
        return s

    def _activate(self, c: CubeId, seed: tuple[list[int], list[float]] | None = None) -> None:
        s = self._new_stats()
        if seed is not None:
            s.n[:] = seed[0]
            s.mean[:] = seed[1]
        self.cells[c] = s
        self.tracked.setdefault(c.level, {}).setdefault(c.index, 0)

    def region(self, x) -> CubeId:
        return self.tree.find(x)

    def select(self, x, t, query):
        key = self.tree.find(x)
        s = self.cells[key]
        arm, phase = self._branch(s, key, t, query)
        return Choice(arm, phase, key, s, child=child_slot(key, x) if self.child_memory else None)

    def serve(self, x, t):
        ch = super().serve(x, t)
        if self.child_memory:
            ch.child = child_slot(ch.region, x)
        return ch

    def stats(self, key):
        return self.cells[key]

    def exploit_values(self, stats: RegionStats, key) -> list[float]:
        if not self.child_memory:
            return stats.mean
        return [exploit_mean(stats, k, True) for k in range(self.n_arms)]

    def record(self, choice: Choice, reward: float) -> None:
        s = choice.stats
        record_outcome(s, choice.phase, choice.arm, reward)
        if self.child_memory and choice.phase is not TRAIN and choice.child is not None:
            cn, cm = s.child_n[choice.child], s.child_mean[choice.child]
            k = choice.arm
            cm[k] = (cn[k] * cm[k] + reward) / (cn[k] + 1)
            cn[k] += 1

    def count_labeled(self, x) -> None:
        for level, idxs in self.tracked.items():
            idx = cube_index_at(level, x)
            if idx in idxs:
                idxs[idx] += 1

    def peer_count(self, key: CubeId) -> int:
        """``N^k_C``; an unknown cube is created with zero count (and 0 is returned)."""
        idxs = self.tracked.setdefault(key.level, {})
        if key.index not in idxs:
            idxs[key.index] = 0
        return idxs[key.index]

    def has_cube(self, key: CubeId) -> bool:
        return key.index in self.tracked.get(key.level, ())

    def own_arrival(self, x) -> list[CubeId]:
        return after_slot_update(self, x)

    def best_own_report(self, x):
        s = self.cells[self.tree.find(x)]
        sampled = [s.mean[k] for k in range(self.n_own) if s.n[k] > 0]
        return max(sampled) if sampled else None


def exploit_mean(stats: RegionStats, arm: int, child_memory: bool) -> float:
    """Exploitation estimate of ``arm``: the cube mean, or with child memory the
    unweighted average of the child means that have at least one sample."""
    if not child_memory or stats.child_n is None:
        return stats.mean[arm] if stats.n[arm] > 0 else -math.inf
    vals = [stats.child_mean[c][arm] for c in range(len(stats.child_n)) if stats.child_n[c][arm] > 0]
    if vals:
        return sum(vals) / len(vals)
    return stats.mean[arm] if stats.n[arm] > 0 else -math.inf


def after_slot_update(policy: DczaPolicy, x) -> list[CubeId]:
    """Count the learner's own arrival and split its cube when the threshold is met."""
    parent, kids = policy.tree.observe_and_maybe_split(x)
    if not kids:
        return []
    old = policy.cells.pop(parent)
    for slot, c in enumerate(kids):
        seed = None
        if policy.child_memory and old.child_n is not None:
            seed = (list(old.child_n[slot]), list(old.child_mean[slot]))
        policy._activate(c, seed)
    lvl = policy.tree.max_active_level()
    policy.split_log.append((policy.tree.arrivals, lvl))
    if len(policy.cells) != sum(len(v) for v in policy.tree.active.values()):
        raise InvariantViolation("active cubes and statistics out of sync")
    return kids


__all__ = ["DczaPolicy", "exploit_mean", "after_slot_update", "children"]
