"""Arms of a learner: its own classification functions and its peers.

Two backends realize a classification function.  ``SyntheticArm`` knows its
accuracy map in closed form and samples correct/incorrect predictions from it;
the trainable classifiers below work on real feature vectors.
"""

from __future__ import annotations

import heapq
import math
import random
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ConfigurationError

OWN = "own"
PEER = "peer"

ACC_LO, ACC_HI = 0.05, 0.95
VAR_FLOOR = 1e-9


class ArmId(NamedTuple):
    kind: str  # OWN or PEER
    index: int

    def __str__(self):
        return f"{'f' if self.kind == OWN else 'L'}{self.index}"

    @classmethod
    def parse(cls, s: str) -> "ArmId":
        return cls(OWN if s[0] == "f" else PEER, int(s[1:]))


def arm_set(owner: int, n_functions: int, peers: Sequence[int]) -> list[ArmId]:
    """``K_i``: own functions first, then peers in increasing index."""
    arms = [ArmId(OWN, k) for k in range(n_functions)]
    for j in sorted(peers):
        if j == owner:
            raise ConfigurationError(f"learner {owner} cannot be its own peer")
        arms.append(ArmId(PEER, j))
    return arms


# -- synthetic accuracy backend ---------------------------------------------


@dataclass(frozen=True)
class SyntheticArm:
    """Accuracy ``clamp(0.5 + a sin(2 pi (w.x + phi + v t/T)), 0.05, 0.95)``.

    ``drift`` (v) adds a time-Lipschitz modulation in normalized time; it is 0
    for stationary worlds.  ``lo``/``hi`` may be widened to 0/1 in tests.
    """

    amplitude: float
    frequency: tuple[float, ...]
    phase: float = 0.0
    drift: float = 0.0
    lo: float = ACC_LO
    hi: float = ACC_HI

    def __post_init__(self):
        object.__setattr__(self, "frequency", tuple(float(w) for w in np.atleast_1d(self.frequency)))

    @property
    def lipschitz(self) -> float:
        return 2.0 * math.pi * abs(self.amplitude) * math.sqrt(sum(w * w for w in self.frequency))

    @property
    def drift_lipschitz(self) -> float:
        return 2.0 * math.pi * abs(self.amplitude) * abs(self.drift)

    def accuracy(self, x: Sequence[float], tau: float = 0.0) -> float:
        s = self.phase + self.drift * tau
        for w, v in zip(self.frequency, x):
            s += w * v
        a = 0.5 + self.amplitude * math.sin(2.0 * math.pi * s)
        return self.lo if a < self.lo else self.hi if a > self.hi else a


def synthetic_accuracy(arm: SyntheticArm, x: Sequence[float], tau: float = 0.0) -> float:
    if len(x) != len(arm.frequency):
        raise ConfigurationError("arm frequency and context dimensions differ")
    return arm.accuracy(x, tau)


def synthetic_predict(arm: SyntheticArm, x, true_label: int, rng: random.Random, tau: float = 0.0) -> int:
    """Return the true label with probability pi(x), else its complement (one draw)."""
    return true_label if rng.random() < arm.accuracy(x, tau) else 1 - true_label


# -- trainable classifiers ---------------------------------------------------


def _sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


class BaseClassifier:
    kind = "base"
    trainable = False
    dim: int | None = None

    def predict(self, features, rng: random.Random | None = None) -> int:
        raise NotImplementedError

    def update(self, features, label: int) -> "BaseClassifier":
        return self

    def fit(self, X, y) -> "BaseClassifier":
        return self

    def _check(self, features):
        if self.dim is not None and len(features) != self.dim:
            raise ConfigurationError(f"{self.kind}: expected {self.dim} features, got {len(features)}")


class ConstantZero(BaseClassifier):
    kind = "always0"

    def predict(self, features, rng=None):
        return 0


class ConstantOne(BaseClassifier):
    kind = "always1"

    def predict(self, features, rng=None):
        return 1


class RandomCoin(BaseClassifier):
    kind = "random"

    def predict(self, features, rng=None):
        if rng is None:
            raise ConfigurationError("RandomCoin needs a random generator")
        return 1 if rng.random() < 0.5 else 0


class GaussianNaiveBayes(BaseClassifier):
    """Per-class Gaussian likelihoods with running (Welford) moments."""

    kind = "naive_bayes"
    trainable = True

    def __init__(self, dim: int | None = None):
        self.dim = dim
        self.counts = np.zeros(2)
        self.means = None
        self.m2 = None
        if dim is not None:
            self._alloc(dim)

    def _alloc(self, dim):
        self.dim = dim
        self.means = np.zeros((2, dim))
        self.m2 = np.zeros((2, dim))

    @property
    def variances(self) -> np.ndarray:
        n = np.maximum(self.counts, 1.0)[:, None]
        return np.maximum(self.m2 / n, VAR_FLOOR)

    @property
    def priors(self) -> np.ndarray:
        total = self.counts.sum()
        return self.counts / total if total else np.full(2, 0.5)

    def update(self, features, label):
        f = np.asarray(features, dtype=float)
        if self.means is None:
            self._alloc(len(f))
        self._check(f)
        c = int(label)
        self.counts[c] += 1
        delta = f - self.means[c]
        self.means[c] += delta / self.counts[c]
        self.m2[c] += delta * (f - self.means[c])
        return self

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=int)
        self._alloc(X.shape[1])
        for c in (0, 1):
            rows = X[y == c]
            self.counts[c] = len(rows)
            if len(rows):
                self.means[c] = rows.mean(axis=0)
                self.m2[c] = ((rows - self.means[c]) ** 2).sum(axis=0)
        return self

    def log_scores(self, features) -> np.ndarray:
        f = np.asarray(features, dtype=float)
        self._check(f)
        var = self.variances
        with np.errstate(divide="ignore"):
            lp = np.log(self.priors)
        ll = -0.5 * (np.log(2 * np.pi * var) + (f - self.means) ** 2 / var).sum(axis=1)
        return lp + ll

    def predict(self, features, rng=None):
        if self.means is None or self.counts.sum() == 0:
            return 1
        s0, s1 = self.log_scores(features)
        # P(y=1|x) >= 0.5  <=>  s1 >= s0
        return 1 if s1 >= s0 else 0


class OnlineLogistic(BaseClassifier):
    kind = "logistic"
    trainable = True

    def __init__(self, dim: int | None = None, rate: float = 0.1, bias: bool = False):
        self.dim = dim
        self.rate = rate
        self.bias = bias
        self.w = None if dim is None else np.zeros(dim + int(bias))

    def _x(self, features):
        f = np.asarray(features, dtype=float)
        if self.w is None:
            self.dim = len(f)
            self.w = np.zeros(self.dim + int(self.bias))
        self._check(f)
        return np.append(f, 1.0) if self.bias else f

    def score(self, features) -> float:
        return _sigmoid(float(self._x(features) @ self.w))

    def predict(self, features, rng=None):
        return 1 if self.score(features) >= 0.5 else 0

    def update(self, features, label):
        x = self._x(features)
        self.w = self.w + self.rate * (label - _sigmoid(float(x @ self.w))) * x
        return self

    def fit(self, X, y, epochs: int = 1):
        for _ in range(epochs):
            for f, lab in zip(X, y):
                self.update(f, int(lab))
        return self


class DecisionStump(BaseClassifier):
    """Single-feature threshold rule; fitted once, frozen afterwards."""

    kind = "stump"

    def __init__(self, feature: int = 0, threshold: float = 0.0, polarity: int = 1):
        self.feature = feature
        self.threshold = threshold
        self.polarity = polarity

    def predict(self, features, rng=None):
        above = features[self.feature] > self.threshold
        return int(above) if self.polarity > 0 else int(not above)

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=int)
        self.dim = X.shape[1]
        best = (-1.0, 0, 0.0, 1)
        for j in range(X.shape[1]):
            for thr in np.unique(np.quantile(X[:, j], np.linspace(0, 1, 21))):
                acc = float(np.mean((X[:, j] > thr).astype(int) == y))
                for pol, a in ((1, acc), (-1, 1.0 - acc)):
                    if a > best[0]:
                        best = (a, j, float(thr), pol)
        _, self.feature, self.threshold, self.polarity = best
        return self


CLASSIFIERS = {
    c.kind: c for c in (ConstantZero, ConstantOne, RandomCoin, GaussianNaiveBayes, OnlineLogistic, DecisionStump)
}


def make_classifier(spec) -> BaseClassifier:
    if isinstance(spec, str):
        spec = {"kind": spec}
    spec = dict(spec)
    kind = spec.pop("kind")
    if kind not in CLASSIFIERS:
        raise ConfigurationError(f"unknown classifier kind {kind!r}")
    return CLASSIFIERS[kind](**spec)


def classifier_predict(c: BaseClassifier, features, rng=None) -> int:
    return c.predict(features, rng)


def classifier_update(c: BaseClassifier, features, label: int) -> BaseClassifier:
    return c.update(features, label)


# -- costs and topology --------------------------------------------------------


@dataclass
class LearnerTopology:
    n: int
    edges: list[tuple[int, int, float]] = field(default_factory=list)

    def __post_init__(self):
        for i, j, w in self.edges:
            if w < 0:
                raise ConfigurationError(f"negative edge weight {w} on ({i}, {j})")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ConfigurationError(f"edge ({i}, {j}) references an unknown learner")


def path_costs(topology: LearnerTopology) -> list[list[float]]:
    """All-pairs lowest-cost path sums (Dijkstra from every node).

    Unreachable pairs are ``math.inf``; sums above 1 are kept as they are.
    """
    adj: list[list[tuple[int, float]]] = [[] for _ in range(topology.n)]
    for i, j, w in topology.edges:
        adj[i].append((j, float(w)))
        adj[j].append((i, float(w)))
    out = []
    for s in range(topology.n):
        dist = [math.inf] * topology.n
        dist[s] = 0.0
        heap = [(0.0, s)]
        while heap:
            d, u = heapq.heappop(heap)
            if d > dist[u]:
                continue
            for v, w in adj[u]:
                if d + w < dist[v]:
                    dist[v] = d + w
                    heapq.heappush(heap, (dist[v], v))
        out.append(dist)
    return out
