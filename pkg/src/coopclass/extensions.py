"""Delayed and missing labels, the ensemble layer, context-only replies,
unsupervised learners and the reward hook."""

from __future__ import annotations

import heapq
import random
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .errors import ConfigurationError, InvariantViolation


# -- delayed feedback -----------------------------------------------------------


@dataclass
class DelayBuffer:
    """Pending label deliveries; each record waits a uniform draw from ``{0..L_max}`` slots."""

    L_max: int = 0
    _heap: list = field(default_factory=list)
    _seq: int = 0
    delivered: int = 0
    max_wait: int = 0

    def __post_init__(self):
        if self.L_max < 0:
            raise ConfigurationError("L_max must be nonnegative")

    def enqueue(self, t: int, record, rng: random.Random | None = None, delay: int | None = None) -> int:
        if delay is None:
            delay = rng.randint(0, self.L_max) if self.L_max else 0
        if not 0 <= delay <= self.L_max:
            raise InvariantViolation(f"delay {delay} outside 0..{self.L_max}")
        self._seq += 1
        heapq.heappush(self._heap, (t + delay, self._seq, t, record))
        return t + delay

    def deliver(self, t: int) -> list:
        """Records due at or before slot ``t``, in enqueue order."""
        out = []
        h = self._heap
        while h and h[0][0] <= t:
            due, _, born, rec = heapq.heappop(h)
            wait = t - born
            if wait > self.L_max:
                raise InvariantViolation(f"record from slot {born} delivered after {wait} slots")
            self.max_wait = max(self.max_wait, wait)
            out.append(rec)
        self.delivered += len(out)
        return out

    def __len__(self):
        return len(self._heap)


def delay_enqueue(buffer: DelayBuffer, t: int, record, rng) -> int:
    return buffer.enqueue(t, record, rng)


def delay_deliver(buffer: DelayBuffer, t: int) -> list:
    return buffer.deliver(t)


# -- missing labels ---------------------------------------------------------------


@dataclass(frozen=True)
class LabelProcess:
    p_r: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.p_r <= 1.0:
            raise ConfigurationError(f"p_r={self.p_r} must lie in [0, 1]")

    def reveal(self, rng: random.Random) -> bool:
        if self.p_r >= 1.0:
            return True
        if self.p_r <= 0.0:
            return False
        return rng.random() < self.p_r


def reveal_label(proc: LabelProcess, rng) -> bool:
    return proc.reveal(rng)


# -- rewards ------------------------------------------------------------------------


@dataclass(frozen=True)
class RewardHook:
    """``g(correct, cost) = accuracy_weight * correct - cost_weight * cost``, checked to lie in [-1, 1]."""

    accuracy_weight: float = 1.0
    cost_weight: float = 1.0
    fn: Callable[[float, float], float] | None = None

    def __call__(self, correct: float, cost: float) -> float:
        if self.fn is not None:
            r = self.fn(correct, cost)
        else:
            r = self.accuracy_weight * correct - self.cost_weight * cost
        if not -1.0 <= r <= 1.0:
            raise InvariantViolation(f"reward {r} outside [-1, 1]")
        return r


DEFAULT_REWARD = RewardHook()


# -- ensemble layer ---------------------------------------------------------------


class EnsembleState:
    """Weights of the ensemble learner, either one global vector or one per cell.

    ``mode="sgd"``: ``w += (1/alpha_w) (y - s) yhat``, clamped at 0.
    ``mode="mult"``: wrong learners' weights are multiplied by ``beta``, then
    renormalized to sum 1.
    """

    def __init__(self, n_learners: int, mode: str = "sgd", per_cell: bool = False,
                 alpha_w: float = 100.0, beta: float = 0.5):
        if mode not in ("sgd", "mult"):
            raise ConfigurationError(f"unknown ensemble mode {mode!r}")
        self.M = n_learners
        self.mode = mode
        self.per_cell = per_cell
        self.alpha_w = alpha_w
        self.beta = beta
        self._w: dict = {}

    def weights(self, cell=None) -> list[float]:
        key = cell if self.per_cell else None
        w = self._w.get(key)
        if w is None:
            w = self._w[key] = [1.0 / self.M] * self.M
        return w

    def set_weights(self, w: Sequence[float], cell=None) -> None:
        self._w[cell if self.per_cell else None] = list(w)

    def predict(self, cell, preds: Sequence[int]) -> int:
        w = self.weights(cell)
        return 1 if sum(wi * p for wi, p in zip(w, preds)) >= 0.5 else 0

    def update(self, cell, preds: Sequence[int], label: int) -> list[float]:
        w = self.weights(cell)
        if self.mode == "sgd":
            s = sum(wi * p for wi, p in zip(w, preds))
            step = (label - s) / self.alpha_w
            new = [max(0.0, wi + step * p) for wi, p in zip(w, preds)]
        else:
            new = [wi * (self.beta if p != label else 1.0) for wi, p in zip(w, preds)]
            total = sum(new)
            new = [v / total for v in new] if total > 0 else [1.0 / self.M] * self.M
        self.set_weights(new, cell)
        return new


def ensemble_predict(state: EnsembleState, cell, preds) -> int:
    return state.predict(cell, preds)


def ensemble_update(state: EnsembleState, cell, preds, label) -> list[float]:
    return state.update(cell, preds, label)


# -- context-only replies -------------------------------------------------------------


class LabelHistogram:
    """Per-region counts of observed true labels."""

    def __init__(self):
        self.counts: dict = {}

    def add(self, region, label: int) -> None:
        c = self.counts.setdefault(region, [0, 0])
        c[label] += 1

    def get(self, region) -> tuple[int, int]:
        return tuple(self.counts.get(region, (0, 0)))


def context_only_reply(hist: LabelHistogram, region, default: int = 1) -> int:
    """Majority label seen in ``region``; empty history or a tie yields ``default``."""
    n0, n1 = hist.get(region)
    if n0 == n1:
        return default
    return 1 if n1 > n0 else 0


# -- unsupervised learners ---------------------------------------------------------------


def unsupervised_query(own_means: Sequence[float], peer_reports: Sequence[float | None]) -> int:
    """Arm position for a learner that never sees labels.

    Own arms come first with their (possibly never updated) sample means, then
    one entry per peer; peers reporting ``None`` (no data in that cell) are skipped.
    """
    best, arm = None, 0
    for k, v in enumerate(own_means):
        if best is None or v > best:
            best, arm = v, k
    for j, v in enumerate(peer_reports):
        if v is not None and (best is None or v > best):
            best, arm = v, len(own_means) + j
    return arm
