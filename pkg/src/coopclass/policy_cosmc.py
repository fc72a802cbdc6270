"""CoS with multiple candidate contexts: one 1-D grid per context coordinate,
exploitation picks the best (arm, coordinate) pair."""

from __future__ import annotations

import random

from .context_space import axis_cell
from .control import EXPLOIT, EXPLORE, TRAIN, ControlParams
from .policy_cos import Choice, RegionStats, record_outcome


class CosMcPolicy:
    name = "cos_mc"

    def __init__(self, n_own: int, n_peers: int, control: ControlParams, m_T: int, d: int,
                 rng: random.Random | None = None, union_pick: str = "uniform"):
        self.n_own = n_own
        self.n_arms = n_own + n_peers
        self.control = control
        self.m_T = m_T
        self.d = d
        self.rng = rng or random.Random(0)
        if union_pick not in ("uniform", "priority"):
            raise ValueError("union_pick must be 'uniform' or 'priority'")
        self.union_pick = union_pick
        self.dims: list[dict[int, RegionStats]] = [{} for _ in range(d)]
        self._t = 0
        self._D = (0.0, 0.0, 0.0)

    def D(self, t):
        if t != self._t:
            self._t = t
            self._D = self.control.values(t)
        return self._D

    def region(self, x) -> tuple[int, ...]:
        return tuple(axis_cell(v, self.m_T) for v in x)

    def _stats(self, m: int, cell: int) -> RegionStats:
        s = self.dims[m].get(cell)
        if s is None:
            s = self.dims[m][cell] = RegionStats(self.n_arms)
        return s

    def _all(self, cells):
        return [self._stats(m, c) for m, c in enumerate(cells)]

    def candidates(self, cells, t, query, own_only=False) -> list[tuple[int, int, object]]:
        """Union of the per-coordinate under-explored sets as (dim, arm, phase)."""
        d1, d2, d3 = self.D(t)
        sts = self._all(cells)
        out = [(m, k, EXPLORE) for m, s in enumerate(sts) for k in range(self.n_own) if s.n[k] <= d1]
        if own_only:
            return out
        training = set()
        for m, s in enumerate(sts):
            for k in range(self.n_own, self.n_arms):
                if s.n1[k] <= d2:
                    nk = query(k, (m, cells[m]))
                    s.n1[k] = 0 if nk == 0 else nk - s.n[k]
                    if s.n1[k] <= d2:
                        out.append((m, k, TRAIN))
                        training.add((m, k))
        for m, s in enumerate(sts):
            for k in range(self.n_own, self.n_arms):
                if (m, k) not in training and s.n[k] <= d3:
                    out.append((m, k, EXPLORE))
        return out

    def _priority(self, cells, t, query, own_only=False):
        # CoS branch order scanned coordinate by coordinate; identical to CoS for d = 1
        d1, d2, d3 = self.D(t)
        sts = self._all(cells)
        for m, s in enumerate(sts):
            for k in range(self.n_own):
                if s.n[k] <= d1:
                    return m, k, EXPLORE
        if own_only:
            return None
        stale = next(((m, k) for m, s in enumerate(sts) for k in range(self.n_own, self.n_arms)
                      if s.n1[k] <= d2), None)
        if stale is not None:
            m, k = stale
            s = sts[m]
            nk = query(k, (m, cells[m]))
            s.n1[k] = 0 if nk == 0 else nk - s.n[k]
            if s.n1[k] <= d2:
                return m, k, TRAIN
        for m, s in enumerate(sts):
            for k in range(self.n_own, self.n_arms):
                if s.n[k] <= d3:
                    return m, k, EXPLORE
        return None

    def _exploit(self, cells, n_arms):
        best, bm, bk = None, 0, 0
        for m, c in enumerate(cells):
            s = self._stats(m, c)
            for k in range(n_arms):
                if best is None or s.mean[k] > best:
                    best, bm, bk = s.mean[k], m, k
        return bm, bk

    def _pick(self, cells, t, query, own_only):
        if self.union_pick == "priority":
            hit = self._priority(cells, t, query, own_only)
        else:
            cand = self.candidates(cells, t, query, own_only)
            hit = cand[self.rng.randrange(len(cand))] if cand else None
        if hit is None:
            m, k = self._exploit(cells, self.n_own if own_only else self.n_arms)
            return Choice(k, EXPLOIT, cells, None, dim=m)
        m, k, phase = hit
        return Choice(k, phase, cells, None, dim=m)

    def select(self, x, t, query) -> Choice:
        return self._pick(self.region(x), t, query, False)

    def serve(self, x, t) -> Choice:
        return self._pick(self.region(x), t, None, True)

    def record(self, choice: Choice, reward: float) -> None:
        cells = choice.region
        if choice.phase is TRAIN:
            record_outcome(self._stats(choice.dim, cells[choice.dim]), TRAIN, choice.arm, reward)
            return
        for m, c in enumerate(cells):
            record_outcome(self._stats(m, c), choice.phase, choice.arm, reward)

    def count_labeled(self, x) -> None:
        for m, c in enumerate(self.region(x)):
            self._stats(m, c).arrivals += 1

    def peer_count(self, key) -> int:
        m, c = key
        s = self.dims[m].get(c)
        return 0 if s is None else s.arrivals

    def own_arrival(self, x):
        return []

    def best_own_report(self, x):
        vals = [s.mean[k] for s in (self.dims[m].get(c) for m, c in enumerate(self.region(x))) if s
                for k in range(self.n_own) if s.n[k] > 0]
        return max(vals) if vals else None
