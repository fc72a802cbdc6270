"""The CoS policy (classify or send for classification) on a uniform grid."""

from __future__ import annotations

from typing import Callable

from .context_space import UniformPartition
from .control import EXPLOIT, EXPLORE, TRAIN, ControlParams, Phase
from .errors import InvariantViolation

# query(peer_arm_position, region_key) -> labeled arrival count of the peer there
PeerQuery = Callable[[int, object], int]


class RegionStats:
    """Counters of one learner in one cell (or cube).

    ``n[k]``    labeled explore/exploit selections of arm k (``N^i_{k,l}``)
    ``mean[k]`` sample-mean reward of arm k over those selections
    ``n1[k]``   training counter for peer arms (``N^i_{1,k,l}``)
    ``arrivals`` labeled arrivals here, including served requests (``N^i_l``)
    """

    __slots__ = ("n", "mean", "n1", "arrivals", "child_n", "child_mean")

    def __init__(self, n_arms: int):
        self.n = [0] * n_arms
        self.mean = [0.0] * n_arms
        self.n1 = [0] * n_arms
        self.arrivals = 0
        self.child_n = None
        self.child_mean = None


class Choice:
    __slots__ = ("arm", "phase", "region", "stats", "dim", "child")

    def __init__(self, arm, phase, region, stats, dim=None, child=None):
        self.arm = arm
        self.phase = phase
        self.region = region
        self.stats = stats
        self.dim = dim
        self.child = child

    def __repr__(self):
        return f"Choice(arm={self.arm}, phase={self.phase.value}, region={self.region!r}, dim={self.dim})"


def argmax_first(values) -> int:
    best, bi = values[0], 0
    for i in range(1, len(values)):
        if values[i] > best:
            best, bi = values[i], i
    return bi


def underexplored_set(stats: RegionStats, n_own: int, D: tuple[float, float, float]) -> list[tuple[int, str]]:
    """Members of ``S_{i,l}(t)`` in branch-priority order: own arms with ``N <= D1``,
    then peers with ``N1 <= D2`` (training), then peers with ``N <= D3`` (exploration)."""
    d1, d2, d3 = D
    out = [(k, "exploration") for k in range(n_own) if stats.n[k] <= d1]
    peers = range(n_own, len(stats.n))
    trained = [k for k in peers if stats.n1[k] <= d2]
    out += [(k, "training") for k in trained]
    out += [(k, "exploration") for k in peers if k not in trained and stats.n[k] <= d3]
    return out


def record_outcome(stats: RegionStats, phase: Phase, arm: int, reward: float) -> None:
    if not -1.0 <= reward <= 1.0:
        raise InvariantViolation(f"reward {reward} outside [-1, 1]")
    if phase is TRAIN:
        stats.n1[arm] += 1
        return
    n = stats.n[arm]
    stats.mean[arm] = (n * stats.mean[arm] + reward) / (n + 1)
    stats.n[arm] = n + 1


class CosPolicy:
    """Per-learner CoS state and decision rule.

    Arms are positions ``0..n_own-1`` (own functions) followed by the peers.
    """

    name = "cos"

    def __init__(self, n_own: int, n_peers: int, control: ControlParams, partition: UniformPartition):
        self.n_own = n_own
        self.n_arms = n_own + n_peers
        self.control = control
        self.partition = partition
        self.cells: dict[tuple, RegionStats] = {}
        self._t = 0
        self._D = (0.0, 0.0, 0.0)

    def D(self, t: int) -> tuple[float, float, float]:
        if t != self._t:
            self._t = t
            self._D = self.control.values(t)
        return self._D

    def region(self, x):
        return self.partition.key(x)

    def stats(self, key) -> RegionStats:
        s = self.cells.get(key)
        if s is None:
            s = self.cells[key] = RegionStats(self.n_arms)
        return s

    def exploit_values(self, stats: RegionStats, key) -> list[float]:
        return stats.mean

    def select(self, x, t: int, query: PeerQuery) -> Choice:
        key = self.region(x)
        s = self.stats(key)
        return Choice(*self._branch(s, key, t, query), key, s)

    def _branch(self, s: RegionStats, key, t: int, query: PeerQuery) -> tuple[int, Phase]:
        d1, d2, d3 = self.D(t)
        n = s.n
        for k in range(self.n_own):
            if n[k] <= d1:
                return k, EXPLORE
        n1 = s.n1
        for k in range(self.n_own, self.n_arms):
            if n1[k] <= d2:
                nk = query(k, key)
                n1[k] = 0 if nk == 0 else nk - n[k]
                if n1[k] <= d2:
                    return k, TRAIN
                break
        for k in range(self.n_own, self.n_arms):
            if n[k] <= d3:
                return k, EXPLORE
        return argmax_first(self.exploit_values(s, key)), EXPLOIT

    def serve(self, x, t: int) -> Choice:
        """Choose one of the own functions for a peer's request (own-function branch only)."""
        key = self.region(x)
        s = self.stats(key)
        d1 = self.D(t)[0]
        for k in range(self.n_own):
            if s.n[k] <= d1:
                return Choice(k, EXPLORE, key, s)
        vals = self.exploit_values(s, key)[: self.n_own]
        return Choice(argmax_first(vals), EXPLOIT, key, s)

    def record(self, choice: Choice, reward: float) -> None:
        record_outcome(choice.stats, choice.phase, choice.arm, reward)

    def count_labeled(self, x) -> None:
        self.stats(self.region(x)).arrivals += 1

    def peer_count(self, key) -> int:
        s = self.cells.get(key)
        return 0 if s is None else s.arrivals

    def own_arrival(self, x) -> list:
        return []

    def best_own_report(self, x):
        """Best own sample mean in the region of ``x``, or None when it was never sampled."""
        s = self.cells.get(self.region(x))
        if s is None:
            return None
        sampled = [s.mean[k] for k in range(self.n_own) if s.n[k] > 0]
        return max(sampled) if sampled else None
