"""Perfect-information oracle, regret accounting and run reports."""

from __future__ import annotations

import csv
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

METRICS_HEADER = ["t", "learner", "phase", "arm", "correct", "cost", "exp_regret", "cum_exp_regret"]
SUMMARY_HEADER = [
    "learner", "slots", "errors", "error_pct", "training_pct", "exploration_pct", "exploitation_pct",
    "cum_exp_regret", "regret_slope", "pseudo_regret",
]
SELECTION_HEADER = ["learner", "arm", "exploit_selection_pct"]


def oracle_best_arm(own_acc: Sequence[float], own_cost: Sequence[float],
                    peer_accs: Sequence[Sequence[float]] = (), peer_cost: Sequence[float] = ()) -> tuple[int, float]:
    """Arm position maximizing accuracy minus cost.

    A peer is worth the accuracy of its best function.  Positions follow the
    arm order (own functions, then peers); ties go to the lowest position.
    """
    best, arm = -math.inf, 0
    for k, (a, c) in enumerate(zip(own_acc, own_cost)):
        v = a - c
        if v > best:
            best, arm = v, k
    base = len(own_acc)
    for j, (accs, c) in enumerate(zip(peer_accs, peer_cost)):
        v = max(accs) - c
        if v > best:
            best, arm = v, base + j
    return arm, best


@dataclass
class OracleMap:
    """Known-accuracy oracle for one learner of a synthetic world."""

    world: object
    learner: int
    own_cost: list[float]
    peers: list[int]
    peer_cost: list[float]

    def arm_values(self, x, t: int) -> list[float]:
        w, i = self.world, self.learner
        vals = [w.accuracy(i, k, x, t) - c for k, c in enumerate(self.own_cost)]
        for j, c in zip(self.peers, self.peer_cost):
            vals.append(max(w.accuracy(j, k, x, t) for k in range(len(w.arms[j]))) - c)
        return vals

    def best(self, x, t: int) -> tuple[int, float]:
        vals = self.arm_values(x, t)
        k = int(np.argmax(vals))
        return k, vals[k]


def regret_step(opt_value: float, chosen_value: float, correct: int, chosen_cost: float) -> tuple[float, float]:
    """(expected, realized) regret increments of one slot.

    ``chosen_value`` is the chosen arm's expected accuracy minus its cost.
    """
    return opt_value - chosen_value, opt_value - (correct - chosen_cost)


@dataclass
class LearnerTally:
    slots: int = 0
    errors: int = 0
    phases: Counter = field(default_factory=Counter)
    exploit_arms: Counter = field(default_factory=Counter)
    cum_regret: float = 0.0
    regret_series: list = field(default_factory=list)
    pseudo_regret: float | None = None


class RunMetrics:
    """Per-slot event rows and per-learner aggregates of one run."""

    def __init__(self, n_learners: int, keep_rows: bool = True):
        self.M = n_learners
        self.keep_rows = keep_rows
        self.rows: list[tuple] = []
        self.tally = [LearnerTally() for _ in range(n_learners)]
        self.extra: dict[str, dict] = {}

    def log(self, t: int, learner: int, phase: str, arm: str, correct: int, cost: float,
            exp_regret: float | None) -> None:
        tl = self.tally[learner]
        tl.slots += 1
        tl.errors += 1 - correct
        tl.phases[phase] += 1
        if phase == "exploitation":
            tl.exploit_arms[arm] += 1
        if exp_regret is not None:
            tl.cum_regret += exp_regret
            tl.regret_series.append(tl.cum_regret)
        if self.keep_rows:
            self.rows.append((t, learner, phase, arm, correct, cost, exp_regret,
                              tl.cum_regret if exp_regret is not None else None))

    def write_metrics(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(METRICS_HEADER)
            for t, i, ph, arm, ok, cost, er, cum in self.rows:
                w.writerow([t, i, ph, arm, ok, _fmt(cost), _fmt(er), _fmt(cum)])


def _fmt(v) -> str:
    if v is None:
        return ""
    return repr(round(float(v), 12))


def slope_fit(series: Sequence[float], burn_in: float = 0.1) -> float:
    """Least-squares slope of log cumulative regret against log t after the burn-in."""
    r = np.asarray(series, dtype=float)
    t = np.arange(1, len(r) + 1, dtype=float)
    start = int(len(r) * burn_in)
    r, t = r[start:], t[start:]
    keep = r > 0
    if keep.sum() < 10:
        raise ValueError("slope fit needs at least 10 positive points")
    slope, _ = np.polyfit(np.log(t[keep]), np.log(r[keep]), 1)
    return float(slope)


def finalize_report(metrics: RunMetrics) -> tuple[list[dict], list[dict]]:
    """Summary rows (one per learner, plus extra rows such as the ensemble) and
    per-arm exploitation selection percentages."""
    summary, selection = [], []
    for i, tl in enumerate(metrics.tally):
        n = tl.slots
        pct = (lambda c: 100.0 * c / n) if n else (lambda c: 0.0)
        slope = None
        if len(tl.regret_series) >= 10:
            try:
                slope = slope_fit(tl.regret_series)
            except ValueError:
                slope = None
        summary.append({
            "learner": str(i), "slots": n, "errors": tl.errors, "error_pct": pct(tl.errors),
            "training_pct": pct(tl.phases["training"]), "exploration_pct": pct(tl.phases["exploration"]),
            "exploitation_pct": pct(tl.phases["exploitation"]),
            "cum_exp_regret": tl.cum_regret if tl.regret_series else None,
            "regret_slope": slope, "pseudo_regret": tl.pseudo_regret,
        })
        # selection shares count exploitation slots only
        for arm, c in sorted(tl.exploit_arms.items()):
            selection.append({"learner": str(i), "arm": arm, "exploit_selection_pct": pct(c)})
    for name, row in metrics.extra.items():
        summary.append({**{k: None for k in SUMMARY_HEADER}, **row, "learner": name})
    return summary, selection


def write_rows(path, header: list[str], rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([_cell(r.get(h)) for h in header])


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(round(v, 9))
    return v


def read_rows(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def pseudo_regret(cell_arm_rewards: dict, realized: float) -> float:
    """Regret against the best fixed arm in hindsight per cell (real data, no known accuracies)."""
    best = sum(max(per_arm) for per_arm in cell_arm_rewards.values()) if cell_arm_rewards else 0.0
    return best - realized


def aggregate(summaries: list[list[dict]], keys=("error_pct", "training_pct", "exploration_pct",
                                                  "exploitation_pct", "cum_exp_regret", "regret_slope")) -> list[dict]:
    """Mean and standard deviation across runs, per learner."""
    by_learner = defaultdict(list)
    for rows in summaries:
        for r in rows:
            by_learner[r["learner"]].append(r)
    out = []
    for learner, rows in by_learner.items():
        agg = {"learner": learner, "runs": len(rows)}
        for k in keys:
            vals = [float(r[k]) for r in rows if r.get(k) not in (None, "")]
            if vals:
                agg[f"{k}_mean"] = float(np.mean(vals))
                agg[f"{k}_std"] = float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0
        out.append(agg)
    return out
