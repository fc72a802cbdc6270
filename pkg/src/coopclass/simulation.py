"""Slot-by-slot orchestration of cooperating learners.

Every slot runs, for each learner in index order: context arrival, arm
selection (peer requests are served synchronously inside the slot), label
reveal, and the label forwarded to the peer that classified the instance.
Updates are applied as soon as a label is delivered, except in batch mode
where they are held until the slot ends.
"""

from __future__ import annotations

import random
from collections import Counter, defaultdict
from dataclasses import dataclass, field

import numpy as np

from .arms import OWN, PEER, ArmId, BaseClassifier, SyntheticArm, arm_set, make_classifier
from .config import RunConfig
from .context_space import UniformPartition
from .control import EXPLOIT, EXPLORE, Phase
from .environment import (
    BEST_CORRELATION, WORST_CORRELATION, ArrivalProcess, ContextExtractor, ContextStream, LabelPrior,
    SyntheticWorld, KDD_SCHEMA, load_csv,
)
from .errors import ConfigurationError, InvariantViolation
from .extensions import (
    DelayBuffer, EnsembleState, LabelHistogram, LabelProcess, RewardHook, context_only_reply, unsupervised_query,
)
from .metrics import OracleMap, RunMetrics
from .policy_cos import Choice, CosPolicy
from .policy_cosmc import CosMcPolicy
from .policy_dcza import DczaPolicy

# substream roles; a stream is keyed by (role, learner) so adding learners leaves others untouched
ENV, PREDICT, LABEL, DELAY, POLICY, HINDSIGHT = range(6)


def substream(seed: int, role: int, index: int = 0) -> random.Random:
    ss = np.random.SeedSequence(int(seed), spawn_key=(role, index))
    return random.Random(int(ss.generate_state(2, np.uint64)[0]))


def make_synthetic_arm(spec: dict, d: int) -> SyntheticArm:
    freq = spec.get("frequency", [1.0] * d)
    if isinstance(freq, (int, float)):
        freq = [float(freq)] * d
    if len(freq) != d:
        raise ConfigurationError(f"synthetic arm frequency has {len(freq)} entries, context has {d}")
    a = float(spec.get("amplitude", 0.4))
    if not 0.0 < a <= 0.45:
        raise ConfigurationError(f"synthetic amplitude {a} outside (0, 0.45]")
    return SyntheticArm(a, tuple(freq), float(spec.get("phase", 0.0)), float(spec.get("drift", 0.0)))


@dataclass
class Pending:
    """Everything needed to apply one slot's feedback once its label is delivered."""

    learner: int
    choice: Choice | None
    cost: float
    pred: int
    y: int
    x: tuple
    features: object
    peer: int | None = None
    served: Choice | None = None
    served_pred: int | None = None


class Learner:
    def __init__(self, idx: int, arms: list[ArmId], costs: list[float], policy, backends: list,
                 label_proc: LabelProcess, seed: int, L_max: int, unsupervised: bool = False,
                 online_learning: bool = False):
        self.idx = idx
        self.arms = arms
        self.arm_names = [str(a) for a in arms]
        self.costs = costs
        self.policy = policy
        self.backends = backends
        self.n_own = sum(1 for a in arms if a.kind == OWN)
        self.peer_of = {k: a.index for k, a in enumerate(arms) if a.kind == PEER}
        self.label_proc = label_proc
        self.rng = substream(seed, PREDICT, idx)
        self.label_rng = substream(seed, LABEL, idx)
        self.delay_rng = substream(seed, DELAY, idx)
        self.buffer = DelayBuffer(L_max)
        self.hist = LabelHistogram()
        self.unsupervised = unsupervised
        self.trainable = [b for b in backends if isinstance(b, BaseClassifier) and b.trainable] if online_learning else []
        self.held_arrivals: list = []  # batch mode: own arrivals counted at slot end

    def predict(self, k: int, x, inst, tau: float) -> int:
        b = self.backends[k]
        if isinstance(b, SyntheticArm):
            return inst[0] if self.rng.random() < b.accuracy(x, tau) else 1 - inst[0]
        return b.predict(inst[1], self.rng)

    def absorb_label(self, x, features, y: int) -> None:
        """Bookkeeping for any labeled arrival handled by this learner."""
        self.policy.count_labeled(x)
        self.hist.add(self.policy.region(x), y)
        for c in self.trainable:
            c.update(features, y)


@dataclass
class RunResult:
    config: RunConfig
    seed: int
    metrics: RunMetrics
    learners: list
    events: list = field(default_factory=list)
    split_checks: list = field(default_factory=list)
    max_delay_wait: int = 0
    exploit_dims: list = field(default_factory=list)  # CoS-MC: per learner, exploitation slots per context dimension


class Simulation:
    def __init__(self, cfg: RunConfig, seed: int | None = None, keep_rows: bool = True, audit: bool = False):
        self.cfg = cfg
        self.seed = cfg.seeds[0] if seed is None else seed
        self.T = cfg.T
        self.M = cfg.M
        self.audit = audit
        self.events: list = []
        self.split_checks: list = []  # (learner, own arrivals, max active level) after each split
        self.exploit_dims = [Counter() for _ in range(cfg.M)]
        self.metrics = RunMetrics(self.M, keep_rows)
        self.hook = RewardHook(**cfg.reward) if cfg.reward else RewardHook()
        self.batch = cfg.batch
        self._deferred: list | None = [] if cfg.batch > 1 else None
        env = cfg.environment
        self.dataset_mode = env["kind"] == "dataset"
        self._build_learners()
        if self.dataset_mode:
            self._build_dataset()
        else:
            self._build_synthetic()
        self.ensemble = None
        if cfg.ensemble:
            e = cfg.ensemble
            self.ensemble = EnsembleState(self.M, e["mode"], bool(e["per_cell"]), float(e["alpha_w"]), float(e["beta"]))
            self.ens_partition = UniformPartition(cfg.m_T or 1, cfg.d)
            self.ens_errors = 0
            self.ens_slots = 0
            self.ens_exploit_slots = 0
            self.ens_exploit_errors = 0

    # -- construction ---------------------------------------------------------------

    def _make_policy(self, i: int, n_own: int, n_peers: int):
        cfg = self.cfg
        if cfg.policy == "cos":
            return CosPolicy(n_own, n_peers, cfg.control, UniformPartition(cfg.m_T, cfg.d))
        if cfg.policy == "dcza":
            return DczaPolicy(n_own, n_peers, cfg.control, cfg.d, cfg.A, cfg.p, cfg.child_memory, cfg.split_strict)
        return CosMcPolicy(n_own, n_peers, cfg.control, cfg.m_T, cfg.d, substream(self.seed, POLICY, i), cfg.union_pick)

    def _build_learners(self):
        cfg = self.cfg
        self.learners: list[Learner] = []
        for i, spec in enumerate(cfg.learners):
            peers = sorted(spec.peer_costs)
            arms = arm_set(i, len(spec.functions), peers)
            costs = list(spec.function_costs) + [
                cfg.context_only_cost if cfg.context_only and cfg.context_only_cost is not None else spec.peer_costs[j]
                for j in peers]
            backends = []
            for f in spec.functions:
                f = {"kind": f} if isinstance(f, str) else f
                if f.get("kind") == "synthetic":
                    backends.append(make_synthetic_arm(f, cfg.d))
                elif self.dataset_mode:
                    backends.append(make_classifier(f))
                else:
                    raise ConfigurationError(f"learners[{i}]: synthetic worlds need synthetic functions")
            policy = self._make_policy(i, len(spec.functions), len(peers))
            self.learners.append(Learner(i, arms, costs, policy, backends, LabelProcess(spec.p_r), self.seed,
                                         cfg.L_max, i in cfg.unsupervised, cfg.online_learning))

    def _build_synthetic(self):
        cfg, env = self.cfg, self.cfg.environment
        self.world = SyntheticWorld([l.backends for l in self.learners], LabelPrior(**env.get("label", {})), max(self.T, 1))
        proc = ArrivalProcess(env.get("arrival", "iid"), env.get("correlation", BEST_CORRELATION), cfg.d,
                              max(self.T * self.batch, 1), float(env.get("arrival_p", cfg.p)),
                              int(env.get("designated", 0)), env.get("trace"))
        self.stream = ContextStream(proc, self.M, [substream(self.seed, ENV, i) for i in range(self.M)])
        self.label_rngs = [substream(self.seed, ENV, 1000 + i) for i in range(self.M)]
        self.correlation = proc.correlation
        self.oracles = [OracleMap(self.world, i, l.costs[: l.n_own], [l.peer_of[k] for k in sorted(l.peer_of)],
                                  [l.costs[k] for k in sorted(l.peer_of)]) for i, l in enumerate(self.learners)]

    def _build_dataset(self):
        cfg, env = self.cfg, self.cfg.environment
        schema = env.get("schema", "kdd")
        if schema == "kdd":
            schema = KDD_SCHEMA
        elif isinstance(schema, str):
            import json
            from pathlib import Path
            schema = json.loads(Path(schema).read_text())
        path = env["path"]
        try:
            self.data = load_csv(path, schema)
        except FileNotFoundError:
            raise ConfigurationError(f"dataset file not found: {path}") from None
        n_train = int(env.get("train_rows", 5000))
        self.test_start = int(env.get("test_start", n_train))
        if self.test_start + self.T * self.batch > len(self.data):
            raise ConfigurationError(
                f"dataset has {len(self.data)} rows; need {self.test_start + self.T * self.batch}")
        X, y = self.data.features, self.data.labels
        for i, l in enumerate(self.learners):
            off = cfg.learners[i].train_offset
            for b in l.backends:
                if isinstance(b, BaseClassifier):
                    b.fit(X[off:off + n_train], y[off:off + n_train])
        ref = type(self.data)(X[self.test_start:self.test_start + self.T * self.batch],
                              y[self.test_start:self.test_start + self.T * self.batch], self.data.feature_names)
        self.extractor = ContextExtractor(env.get("context", "prev_label"), max(self.T * self.batch, 1), ref)
        self.correlation = env.get("correlation", BEST_CORRELATION)
        self.designated = int(env.get("designated", 0))
        self.prev_label = None
        self.oracles = None
        self.hindsight_rng = substream(self.seed, HINDSIGHT)
        self.hindsight = [defaultdict(lambda n=len(l.arms): [0.0] * n) for l in self.learners]
        self.realized = [0.0] * self.M

    # -- per-slot work ---------------------------------------------------------------

    def _instances(self, u: int):
        """Contexts and (label, features) per learner for sub-slot ``u`` (1-based)."""
        if self.dataset_mode:
            row = self.test_start + u - 1
            y = int(self.data.labels[row])
            f = self.data.features[row]
            x = self.extractor.context(u, f, self.prev_label, self.data.feature_names)
            self.prev_label = y
            if self.correlation == WORST_CORRELATION:
                return [(x, (y, f)) if i == self.designated else None for i in range(self.M)]
            return [(x, (y, f))] * self.M
        xs = self.stream.contexts(u)
        out = []
        shared = None
        for i, x in enumerate(xs):
            if x is None:
                out.append(None)
                continue
            if self.correlation == BEST_CORRELATION:
                if shared is None:
                    shared = (x, (1 if self.label_rngs[0].random() < self.world.prior.eta(x) else 0, None))
                out.append(shared)
            else:
                rng = self.label_rngs[i if self.correlation != WORST_CORRELATION else 0]
                out.append((x, (1 if rng.random() < self.world.prior.eta(x) else 0, None)))
        return out

    def _query(self, i: int):
        learners = self.learners
        peer_of = learners[i].peer_of

        def q(k, key):
            return learners[peer_of[k]].policy.peer_count(key)
        return q

    def run_slot(self, t: int) -> None:
        for b in range(self.batch):
            u = (t - 1) * self.batch + b + 1
            insts = self._instances(u)
            ens_preds = [] if self.ensemble is not None else None
            ens_exploit = True
            for i, L in enumerate(self.learners):
                if L.buffer.L_max:
                    for rec in L.buffer.deliver(t):
                        self._apply(rec)
                inst = insts[i]
                if inst is None:
                    continue
                x, data = inst
                pred, choice = self._step(L, i, t, x, data)
                if ens_preds is not None:
                    ens_preds.append(pred)
                    ens_exploit = ens_exploit and choice.phase is EXPLOIT
            if ens_preds is not None and len(ens_preds) == self.M:
                self._ensemble_slot(insts[0], ens_preds, ens_exploit)
        if self._deferred is not None:
            pend, self._deferred = self._deferred, []
            for rec in pend:
                self._apply(rec)
            for L in self.learners:
                for x in L.held_arrivals:
                    self._own_arrival(L, x)
                L.held_arrivals = []

    def _step(self, L: Learner, i: int, t: int, x, data):
        y, features = data
        tau = t / self.T if self.T else 0.0
        if L.unsupervised:
            pol = L.policy
            reports = [self.learners[L.peer_of[k]].policy.best_own_report(x) for k in sorted(L.peer_of)]
            key = pol.region(x)
            if isinstance(pol, CosMcPolicy):
                own = [max(pol._stats(m, c).mean[k] for m, c in enumerate(key)) for k in range(L.n_own)]
                s = None
            else:
                s = pol.stats(key)
                own = s.mean[: L.n_own]
            choice = Choice(unsupervised_query(own, reports), EXPLOIT, key, s)
        else:
            choice = L.policy.select(x, t, self._query(i))
        k = choice.arm
        served = served_pred = None
        peer = L.peer_of.get(k)
        if peer is None:
            pred = L.predict(k, x, data, tau)
        else:
            P = self.learners[peer]
            if self.cfg.context_only:
                pred = context_only_reply(P.hist, P.policy.region(x), self.cfg.context_only_default)
            else:
                served = P.policy.serve(x, t)
                served_pred = pred = P.predict(served.arm, x, data, tau)
                if self.audit:
                    self.events.append((peer, served.region, served.arm, served.phase, True))
        correct = 1 if pred == y else 0
        cost = L.costs[k]
        exp_regret = None
        if self.oracles is not None:
            vals = self.oracles[i].arm_values(x, t)
            exp_regret = max(vals) - vals[k]
        elif self.dataset_mode:
            self._hindsight(L, i, x, data, tau, correct, cost)
        self.metrics.log(t, i, choice.phase.value, L.arm_names[k], correct, cost, exp_regret)
        if choice.dim is not None and choice.phase is EXPLOIT:
            self.exploit_dims[i][choice.dim] += 1
        if self.audit:
            self.events.append((i, choice.region, k, choice.phase, False))

        if L.label_proc.reveal(L.label_rng):
            rec = Pending(i, None if L.unsupervised else choice, cost, pred, y, x, features, peer, served, served_pred)
            if self._deferred is not None:
                self._deferred.append(rec)
            elif L.buffer.L_max:
                L.buffer.enqueue(t, rec, L.delay_rng)
                for r in L.buffer.deliver(t):
                    self._apply(r)
            else:
                self._apply(rec)
        if self._deferred is not None:
            L.held_arrivals.append(x)
        else:
            self._own_arrival(L, x)
        return pred, choice

    def _own_arrival(self, L: Learner, x) -> None:
        new = L.policy.own_arrival(x)
        if new and isinstance(L.policy, DczaPolicy):
            tree = L.policy.tree
            self.split_checks.append((L.idx, tree.arrivals, tree.max_active_level()))

    def _apply(self, rec: Pending) -> None:
        L = self.learners[rec.learner]
        hook = self.hook
        if rec.choice is not None:
            L.policy.record(rec.choice, hook(1 if rec.pred == rec.y else 0, rec.cost))
        L.absorb_label(rec.x, rec.features, rec.y)
        if rec.peer is not None:
            P = self.learners[rec.peer]
            if rec.served is not None:
                P.policy.record(rec.served, hook(1 if rec.served_pred == rec.y else 0, P.costs[rec.served.arm]))
            P.absorb_label(rec.x, rec.features, rec.y)

    def _hindsight(self, L: Learner, i: int, x, data, tau, correct, cost) -> None:
        y = data[0]
        row = self.hindsight[i][L.policy.region(x)]
        rng = self.hindsight_rng
        for k, a in enumerate(L.arms):
            if a.kind == OWN:
                b = L.backends[k]
                ok = (b.predict(data[1], rng) == y) if isinstance(b, BaseClassifier) else correct
            else:
                P = self.learners[a.index]
                ok = max((b.predict(data[1], rng) == y) if isinstance(b, BaseClassifier) else 0 for b in P.backends)
            row[k] += float(ok) - L.costs[k]
        self.realized[i] += correct - cost

    def _ensemble_slot(self, inst, preds, all_exploit) -> None:
        x, (y, _) = inst
        cell = self.ens_partition.key(x)
        yhat = self.ensemble.predict(cell, preds)
        self.ensemble.update(cell, preds, y)
        self.ens_slots += 1
        self.ens_errors += int(yhat != y)
        if all_exploit:
            self.ens_exploit_slots += 1
            self.ens_exploit_errors += int(yhat != y)

    # -- driver ----------------------------------------------------------------------

    def run(self) -> RunResult:
        for t in range(1, self.T + 1):
            self.run_slot(t)
        m = self.metrics
        if self.dataset_mode:
            from .metrics import pseudo_regret
            for i in range(self.M):
                m.tally[i].pseudo_regret = pseudo_regret(self.hindsight[i], self.realized[i])
        if self.ensemble is not None:
            n = max(self.ens_slots, 1)
            m.extra["ensemble"] = {
                "slots": self.ens_slots, "errors": self.ens_errors, "error_pct": 100.0 * self.ens_errors / n,
                "exploitation_pct": 100.0 * self.ens_exploit_slots / n,
            }
            m.extra["ensemble_exploit"] = {
                "slots": self.ens_exploit_slots, "errors": self.ens_exploit_errors,
                "error_pct": 100.0 * self.ens_exploit_errors / max(self.ens_exploit_slots, 1),
            }
        return RunResult(self.cfg, self.seed, m, self.learners, self.events, self.split_checks,
                         max(L.buffer.max_wait for L in self.learners), self.exploit_dims)


def run(cfg: RunConfig, seed: int | None = None, keep_rows: bool = True, audit: bool = False) -> RunResult:
    return Simulation(cfg, seed, keep_rows, audit).run()
