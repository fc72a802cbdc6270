"""Context streams, synthetic worlds and CSV datasets."""

from __future__ import annotations

import csv
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .arms import SyntheticArm
from .errors import ConfigurationError

WORST_CORRELATION = "worst"
BEST_CORRELATION = "best"
INDEPENDENT = "independent"
ARRIVAL_KINDS = ("iid", "worst", "best", "time", "trace")


def worst_arrival_trace(T: int, d: int, rng: random.Random) -> list[tuple[float, ...]]:
    """``T`` points in ``[0,1]^d`` with pairwise distance at least ``T^{-1/d}``.

    Built as a randomly shifted grid of spacing ``T^{-1/d}`` from which ``T``
    nodes are drawn in random order.
    """
    if T <= 0:
        return []
    s = T ** (-1.0 / d)
    n = math.ceil(T ** (1.0 / d) - 1e-9)
    slack = max(0.0, 1.0 - (n - 1) * s)
    offsets = [rng.uniform(0.0, slack) for _ in range(d)]
    total = n ** d
    picks = rng.sample(range(total), T)
    out = []
    for p in picks:
        coords = []
        for a in range(d):
            p, r = divmod(p, n)
            coords.append(min(1.0, offsets[a] + r * s))
        out.append(tuple(coords))
    return out


def best_arrival_cube(T: int, p: float, d: int, rng: random.Random) -> tuple[int, tuple[int, ...]]:
    level = math.ceil(math.log2(max(T, 2)) / p) + 1
    m = 1 << level
    return level, tuple(rng.randrange(m) for _ in range(d))


@dataclass
class ArrivalProcess:
    kind: str = "iid"
    correlation: str = BEST_CORRELATION
    d: int = 1
    T: int = 1
    p: float = 4.0
    designated: int = 0
    trace: list | None = None

    def __post_init__(self):
        if self.kind not in ARRIVAL_KINDS:
            raise ConfigurationError(f"unknown arrival kind {self.kind!r}")
        if self.correlation not in (WORST_CORRELATION, BEST_CORRELATION, INDEPENDENT):
            raise ConfigurationError(f"unknown correlation {self.correlation!r}")
        if self.kind == "time" and self.d != 1:
            raise ConfigurationError("time context is one-dimensional")
        if self.kind == "trace" and not self.trace:
            raise ConfigurationError("trace arrivals need a non-empty trace")


class ContextStream:
    """Materialized per-learner context generator for one run."""

    def __init__(self, process: ArrivalProcess, n_learners: int, rngs: Sequence[random.Random]):
        self.proc = process
        self.M = n_learners
        self.rngs = rngs  # one per stream; index 0 is the shared stream
        self._traces: dict[int, list] = {}
        self._cubes: dict[int, tuple] = {}

    def _stream_id(self, i: int) -> int:
        return i if self.proc.correlation == INDEPENDENT else 0

    def _draw(self, sid: int, t: int) -> tuple[float, ...]:
        pr, rng = self.proc, self.rngs[sid]
        if pr.kind == "iid":
            return tuple(rng.random() for _ in range(pr.d))
        if pr.kind == "time":
            return (min(1.0, t / pr.T),)
        if pr.kind == "trace":
            return tuple(pr.trace[(t - 1) % len(pr.trace)])
        if pr.kind == "worst":
            tr = self._traces.get(sid)
            if tr is None:
                tr = self._traces[sid] = worst_arrival_trace(pr.T, pr.d, rng)
            return tr[(t - 1) % len(tr)]
        level, idx = self._cubes.get(sid) or self._cubes.setdefault(sid, best_arrival_cube(pr.T, pr.p, pr.d, rng))
        side = 2.0 ** -level
        # strictly inside (lower edge excluded) so the point stays in the cube
        return tuple((i + 1.0 - rng.random()) * side for i in idx)

    def contexts(self, t: int) -> list[tuple[float, ...] | None]:
        pr = self.proc
        if pr.correlation == WORST_CORRELATION:
            return [self._draw(0, t) if i == pr.designated else None for i in range(self.M)]
        if pr.correlation == BEST_CORRELATION:
            x = self._draw(0, t)
            return [x] * self.M
        return [self._draw(i, t) for i in range(self.M)]


def generate_contexts(stream: ContextStream, t: int):
    return stream.contexts(t)


# -- synthetic world --------------------------------------------------------------


@dataclass
class LabelPrior:
    """``eta(x) = P(y = 1 | x)``: constant, linear in one coordinate, or a step."""

    kind: str = "constant"
    value: float = 0.5
    coord: int = 0
    threshold: float = 0.5

    def eta(self, x: Sequence[float]) -> float:
        if self.kind == "constant":
            return self.value
        if self.kind == "linear":
            return x[self.coord]
        if self.kind == "step":
            return 1.0 if x[self.coord] > self.threshold else 0.0
        raise ConfigurationError(f"unknown label prior {self.kind!r}")


@dataclass
class SyntheticWorld:
    arms: list[list[SyntheticArm]]  # per learner, per own function
    prior: LabelPrior = field(default_factory=LabelPrior)
    T: int = 1

    def accuracy(self, i: int, k: int, x, t: int) -> float:
        return self.arms[i][k].accuracy(x, t / self.T if self.T else 0.0)

    def drift_envelope(self, i: int, k: int, t: int, t2: int, alpha: float = 1.0) -> float:
        return self.arms[i][k].drift_lipschitz * abs(t - t2) ** alpha / self.T ** alpha


def draw_label(world: SyntheticWorld, x, t: int, rng: random.Random) -> int:
    return 1 if rng.random() < world.prior.eta(x) else 0


# -- datasets ---------------------------------------------------------------------------

KDD_COLUMNS = [
    "duration", "protocol_type", "service", "flag", "src_bytes", "dst_bytes", "land",
    "wrong_fragment", "urgent", "hot", "num_failed_logins", "logged_in", "num_compromised",
    "root_shell", "su_attempted", "num_root", "num_file_creations", "num_shells",
    "num_access_files", "num_outbound_cmds", "is_host_login", "is_guest_login", "count",
    "srv_count", "serror_rate", "srv_serror_rate", "rerror_rate", "srv_rerror_rate",
    "same_srv_rate", "diff_srv_rate", "srv_diff_host_rate", "dst_host_count",
    "dst_host_srv_count", "dst_host_same_srv_rate", "dst_host_diff_srv_rate",
    "dst_host_same_src_port_rate", "dst_host_srv_diff_host_rate", "dst_host_serror_rate",
    "dst_host_srv_serror_rate", "dst_host_rerror_rate", "dst_host_srv_rerror_rate", "label",
]

KDD_SCHEMA = {
    "columns": KDD_COLUMNS,
    "header": False,
    "label_column": "label",
    "label_map": {"normal.": 0, "normal": 0},
    "label_default": 1,
    "categorical": {"protocol_type": "ordinal", "service": "ordinal", "flag": "ordinal"},
    "unknown_category": "other",
}


@dataclass
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    feature_names: list[str]
    provenance: str = ""

    def __len__(self):
        return len(self.labels)

    def __eq__(self, other):
        return (isinstance(other, Dataset) and self.feature_names == other.feature_names
                and np.array_equal(self.features, other.features) and np.array_equal(self.labels, other.labels))

    def column(self, name: str) -> np.ndarray:
        return self.features[:, self.feature_names.index(name)]


def _encode_label(raw: str, schema: dict, lineno: int) -> int:
    raw = raw.strip()
    lm = schema.get("label_map")
    if lm is None:
        try:
            v = int(float(raw))
        except ValueError:
            raise ConfigurationError(f"line {lineno}: non-numeric label {raw!r}") from None
        if v not in (0, 1):
            raise ConfigurationError(f"line {lineno}: label {v} is not binary")
        return v
    if raw in lm:
        return int(lm[raw])
    if "label_default" in schema:
        return int(schema["label_default"])
    raise ConfigurationError(f"line {lineno}: label {raw!r} not in label_map")


def load_csv(path, schema: dict | None = None) -> Dataset:
    """Parse a comma-separated file into a numeric :class:`Dataset`, keeping row order.

    ``schema`` keys: ``columns`` (names, when the file has no header),
    ``header`` (bool), ``label_column`` (name or index, default last),
    ``label_map``/``label_default``, ``categorical`` ({name: "ordinal"|"onehot"}),
    ``categories`` ({name: [known values]}), ``unknown_category`` ("error"|"other").
    """
    schema = dict(schema or {})
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    with path.open(newline="") as fh:
        rows = [(n, r) for n, r in enumerate(csv.reader(fh), start=1) if r and any(c.strip() for c in r)]
    names = schema.get("columns")
    if schema.get("header", names is None) and rows:
        names = [c.strip() for c in rows[0][1]]
        rows = rows[1:]
    if not rows:
        return Dataset(np.zeros((0, 0)), np.zeros(0, dtype=int), [], str(path))
    width = len(rows[0][1])
    if names is None:
        names = [f"f{j}" for j in range(width - 1)] + ["label"]
    if len(names) != width:
        raise ConfigurationError(f"schema has {len(names)} columns, file has {width}")
    lab = schema.get("label_column", width - 1)
    lab = names.index(lab) if isinstance(lab, str) else int(lab)
    cat = schema.get("categorical", {})
    known = {k: list(v) for k, v in schema.get("categories", {}).items()}
    policy = schema.get("unknown_category", "error")
    seen = {c: list(known.get(c, [])) for c in cat}

    raw_feats, labels = [], []
    for lineno, r in rows:
        if len(r) != width:
            raise ConfigurationError(f"line {lineno}: expected {width} fields, got {len(r)}")
        labels.append(_encode_label(r[lab], schema, lineno))
        vals = []
        for j, cell in enumerate(r):
            if j == lab:
                continue
            name, cell = names[j], cell.strip()
            if name in cat:
                cats = seen[name]
                if cell not in cats:
                    if name in known and policy == "error":
                        raise ConfigurationError(f"line {lineno}: unknown category {cell!r} in {name}")
                    if name in known:
                        cell = "__other__"
                        if cell not in cats:
                            cats.append(cell)
                    else:
                        cats.append(cell)
                vals.append(cell)
            else:
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise ConfigurationError(f"line {lineno}: bad number {cell!r} in column {name}") from None
        raw_feats.append(vals)

    feat_names, columns = [], []
    fcols = [names[j] for j in range(width) if j != lab]
    for j, name in enumerate(fcols):
        col = [row[j] for row in raw_feats]
        if name in cat and cat[name] == "onehot":
            for c in seen[name]:
                feat_names.append(f"{name}={c}")
                columns.append([1.0 if v == c else 0.0 for v in col])
        elif name in cat:
            index = {c: float(i) for i, c in enumerate(seen[name])}
            feat_names.append(name)
            columns.append([index[v] for v in col])
        else:
            feat_names.append(name)
            columns.append(col)
    X = np.array(columns, dtype=float).T.reshape(len(rows), len(feat_names))
    return Dataset(X, np.array(labels, dtype=int), feat_names, str(path))


def write_csv(ds: Dataset, path) -> None:
    """Numeric CSV with a header row and a trailing ``label`` column."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(list(ds.feature_names) + ["label"])
        for f, y in zip(ds.features, ds.labels):
            w.writerow([repr(float(v)) for v in f] + [int(y)])


# -- contexts from dataset rows ------------------------------------------------------------


class ContextExtractor:
    """Maps a dataset row to a 1-D context.

    ``mode``: ``"prev_label"`` (previous true label, 0.0 before the first),
    ``"time"`` (t/T) or ``{"feature": name, "scale": "log"|"minmax"}``; feature
    scaling is fitted on ``reference`` (log1p then min-max by default).
    """

    def __init__(self, mode, T: int = 1, reference: Dataset | None = None):
        self.T = T
        self.feature = None
        if isinstance(mode, dict):
            self.feature = mode["feature"]
            self.scale = mode.get("scale", "log")
            self.kind = "feature"
            if reference is None:
                raise ConfigurationError("feature context needs a reference dataset")
            col = self._transform(reference.column(self.feature))
            self.lo, self.hi = (float(col.min()), float(col.max())) if len(col) else (0.0, 0.0)
        elif mode in ("prev_label", "time"):
            self.kind = mode
        else:
            raise ConfigurationError(f"unknown context mode {mode!r}")

    def _transform(self, v):
        return np.log1p(np.maximum(v, 0.0)) if self.scale == "log" else np.asarray(v, dtype=float)

    def context(self, t: int, features=None, prev_label: int | None = None, names=None) -> tuple[float]:
        if self.kind == "time":
            return (min(1.0, t / self.T),)
        if self.kind == "prev_label":
            return (float(prev_label) if prev_label is not None else 0.0,)
        v = float(self._transform(np.array([features[names.index(self.feature)]]))[0])
        if self.hi <= self.lo:
            return (0.5,)
        return (min(1.0, max(0.0, (v - self.lo) / (self.hi - self.lo))),)


def context_from_row(extractor: ContextExtractor, t: int, features=None, prev_label=None, names=None):
    return extractor.context(t, features, prev_label, names)
