"""Run configuration: JSON loading, presets and validation."""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .arms import LearnerTopology, path_costs
from .control import PRESETS, ControlParams, dcza_parameters, slicing_parameter, theorem_exponent
from .errors import ConfigurationError

POLICIES = ("cos", "dcza", "cos_mc")


@dataclass
class LearnerSpec:
    functions: list
    function_costs: list[float]
    peer_costs: dict[int, float]
    p_r: float = 1.0
    train_offset: int = 0


@dataclass
class RunConfig:
    raw: dict
    T: int
    seeds: list[int]
    d: int
    alpha: float
    policy: str
    control: ControlParams
    m_T: int | None
    A: float
    p: float
    child_memory: bool
    split_strict: bool
    union_pick: str
    learners: list[LearnerSpec]
    environment: dict
    L_max: int = 0
    ensemble: dict | None = None
    context_only: bool = False
    context_only_cost: float | None = None
    context_only_default: int = 1
    batch: int = 1
    unsupervised: list[int] = field(default_factory=list)
    reward: dict = field(default_factory=dict)
    out: str | None = None
    online_learning: bool = False  # trainable classifiers keep learning from revealed labels

    @property
    def M(self) -> int:
        return len(self.learners)

    @property
    def synthetic(self) -> bool:
        return self.environment.get("kind", "synthetic") == "synthetic"

    def resolved(self) -> dict:
        """Echo of every resolved parameter, for the run manifest."""
        c = self.control
        return {
            "T": self.T, "seeds": self.seeds, "d": self.d, "alpha": self.alpha, "policy": self.policy,
            "control": {"z": c.z, "F_max": c.F_max, "z1": c.z1, "z2": c.z2, "z3": c.z3,
                        "c1": c.c1, "c2": c.c2 if c.c2 is not None else c.F_max, "c3": c.c3},
            "m_T": self.m_T, "A": self.A, "p": self.p, "child_memory": self.child_memory,
            "split_strict": self.split_strict, "union_pick": self.union_pick,
            "learners": [{"functions": l.functions, "function_costs": l.function_costs,
                          "peer_costs": {str(k): v for k, v in l.peer_costs.items()},
                          "p_r": l.p_r, "train_offset": l.train_offset} for l in self.learners],
            "environment": self.environment, "L_max": self.L_max, "ensemble": self.ensemble,
            "context_only": self.context_only, "context_only_cost": self.context_only_cost,
            "batch": self.batch, "unsupervised": self.unsupervised, "reward": self.reward,
            "online_learning": self.online_learning,
        }


def _num(d: dict, key: str, default, where: str):
    v = d.get(key, default)
    if v is None:
        return None
    try:
        return float(v)
    except (TypeError, ValueError):
        raise ConfigurationError(f"{where}.{key}: expected a number, got {v!r}") from None


def _check_cost(v: float, where: str) -> float:
    if not 0.0 <= v <= 1.0:
        raise ConfigurationError(f"{where}: cost {v} outside [0, 1]")
    return v


def parse_seeds(spec) -> list[int]:
    """``7``, ``[1, 2]``, ``"1..10"`` or ``"1,4,9"``."""
    if spec is None:
        return [0]
    if isinstance(spec, int):
        return [spec]
    if isinstance(spec, list):
        return [int(s) for s in spec]
    s = str(spec)
    if ".." in s:
        a, b = s.split("..")
        return list(range(int(a), int(b) + 1))
    return [int(v) for v in s.split(",") if v.strip()]


def load_config(source) -> RunConfig:
    if isinstance(source, (str, Path)):
        path = Path(source)
        if not path.exists():
            raise ConfigurationError(f"config file not found: {path}")
        try:
            raw = json.loads(path.read_text())
        except json.JSONDecodeError as e:
            raise ConfigurationError(f"{path}: invalid JSON ({e})") from None
        base = path.parent
    else:
        raw = copy.deepcopy(source)
        base = Path(".")
    return build_config(raw, base)


def build_config(raw: dict, base: Path = Path(".")) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigurationError("config must be a JSON object")
    T = int(raw.get("T", 1000))
    if T < 0:
        raise ConfigurationError("T must be nonnegative")
    alpha = _num(raw, "alpha", 1.0, "config")
    if alpha <= 0:
        raise ConfigurationError("alpha must be positive")

    env = dict(raw.get("environment", {"kind": "synthetic"}))
    env.setdefault("kind", "synthetic")
    if env["kind"] == "dataset":
        if "path" not in env:
            raise ConfigurationError("environment.path is required for dataset runs")
        p = Path(env["path"])
        env["path"] = str(p if p.is_absolute() else base / p)
        d = 1
    elif env["kind"] == "synthetic":
        d = int(env.get("d", 1))
    else:
        raise ConfigurationError(f"environment.kind must be 'synthetic' or 'dataset', got {env['kind']!r}")
    if d < 1:
        raise ConfigurationError("environment.d must be >= 1")

    pol = raw.get("policy", "cos")
    pol = {"name": pol} if isinstance(pol, str) else dict(pol)
    for k in ("z", "m_T", "A", "p", "child_memory", "F_max", "overrides", "preset"):
        if k in raw and k not in pol:
            pol[k] = raw[k]
    part = raw.get("partition")
    if part:
        if part.get("kind") == "adaptive":
            pol.setdefault("name", "dcza")
            pol.setdefault("A", part.get("A", 1.0))
            pol.setdefault("p", part.get("p", 4.0))
        elif part.get("kind") == "uniform":
            pol.setdefault("m_T", part.get("m_T"))
    name = pol.get("name", "cos")
    if name not in POLICIES:
        raise ConfigurationError(f"policy must be one of {POLICIES}, got {name!r}")
    time_ctx = bool(pol.get("time_context", False))

    learners_raw = raw.get("learners")
    if not learners_raw:
        raise ConfigurationError("learners: at least one learner is required")
    M = len(learners_raw)
    F_max = int(pol.get("F_max", max(len(l.get("functions", [])) for l in learners_raw)))

    preset = pol.get("preset")
    if preset is not None and preset not in PRESETS:
        raise ConfigurationError(f"unknown preset {preset!r}")
    pre = PRESETS.get(preset, {})
    A = float(pol.get("A", pre.get("A", 1.0)))
    if name == "dcza":
        p_default, z_default = dcza_parameters(alpha, d)
        p = float(pol.get("p", pre.get("p", p_default)))
        if preset == "Z1":
            z_default = pre["z"]
        elif preset == "Z2" or "p" in pol:
            z_default = 2.0 * alpha / p
    elif name == "cos_mc":
        p = float(pol.get("p", 4.0))
        z_default = pre.get("z", 2.0 * alpha / (3.0 * alpha + 2.0))
    else:
        p = float(pol.get("p", 4.0))
        z_default = pre.get("z", theorem_exponent(alpha, d, time_ctx))
    z = float(pol.get("z", z_default))
    if not 0.0 < z < 1.0:
        raise ConfigurationError(f"policy.z={z} must lie in (0, 1)")
    if A <= 0 or p <= 0:
        raise ConfigurationError("policy.A and policy.p must be positive")
    ov = pol.get("overrides", {}) or {}
    control = ControlParams(
        z=z, F_max=F_max,
        z1=ov.get("D1_exp"), z2=ov.get("D2_exp"), z3=ov.get("D3_exp"),
        c1=float(ov.get("D1_scale", 1.0)), c2=ov.get("D2_scale"), c3=float(ov.get("D3_scale", 1.0)),
    )

    m_T = None
    if name in ("cos", "cos_mc"):
        if pol.get("m_T") is not None:
            m_T = int(math.ceil(float(pol["m_T"])))
        elif "m_T_exponent" in pre:
            m_T = slicing_parameter(max(T, 1), exponent=pre["m_T_exponent"])
        elif name == "cos_mc":
            m_T = slicing_parameter(max(T, 1), alpha, 2)
        else:
            m_T = slicing_parameter(max(T, 1), alpha, d, time_ctx)
        if m_T < 1:
            raise ConfigurationError("m_T must be >= 1")

    topo = raw.get("topology")
    topo_costs = None
    if topo:
        edges = [(int(a), int(b), float(w)) for a, b, w in topo.get("edges", [])]
        topo_costs = path_costs(LearnerTopology(M, edges))

    default_pr = _num(raw, "p_r", 1.0, "config")
    unsup = [int(i) for i in raw.get("unsupervised", [])]
    learners = []
    for i, lr in enumerate(learners_raw):
        where = f"learners[{i}]"
        funcs = lr.get("functions")
        if not funcs:
            raise ConfigurationError(f"{where}.functions: at least one function is required")
        costs = lr.get("costs", {})
        if isinstance(costs, list):
            costs = {"functions": costs}
        fc = costs.get("functions", [0.0] * len(funcs))
        if len(fc) != len(funcs):
            raise ConfigurationError(f"{where}.costs.functions: expected {len(funcs)} entries")
        fc = [_check_cost(float(c), f"{where}.costs.functions") for c in fc]
        peers: dict[int, float] = {}
        if topo_costs is not None:
            for j in range(M):
                if j != i and math.isfinite(topo_costs[i][j]):
                    peers[j] = topo_costs[i][j]
        else:
            pc = costs.get("peers", {})
            if isinstance(pc, (int, float)):
                pc = {j: pc for j in range(M) if j != i}
            default_peer = costs.get("peer_default", 0.0)  # null: no link unless listed
            for j in range(M):
                if j == i:
                    continue
                v = pc.get(str(j), pc.get(j, default_peer))
                if v is None:
                    continue
                peers[j] = _check_cost(float(v), f"{where}.costs.peers[{j}]")
        if raw.get("ensemble"):
            peers = {}
        pr = float(lr.get("p_r", default_pr))
        if i in unsup:
            pr = 0.0
        if not 0.0 <= pr <= 1.0:
            raise ConfigurationError(f"{where}.p_r={pr} must lie in [0, 1]")
        learners.append(LearnerSpec(funcs, fc, peers, pr, int(lr.get("train_offset", 0))))

    delay = raw.get("delay") or {}
    L_max = int(delay.get("L_max", 0))
    if L_max < 0:
        raise ConfigurationError("delay.L_max must be nonnegative")
    batch = int(raw.get("batch", 1))
    if batch < 1:
        raise ConfigurationError("batch must be >= 1")
    if batch > 1 and L_max > 0:
        raise ConfigurationError("batch mode and delayed labels cannot be combined")
    ens = raw.get("ensemble")
    if ens:
        ens = {"mode": "sgd", "per_cell": False, "alpha_w": 100.0, "beta": 0.5, **ens}
        if name != "cos":
            raise ConfigurationError("the ensemble layer runs on top of CoS")
        if env.get("correlation", "best") != "best":
            raise ConfigurationError("the ensemble layer needs best-case correlation (shared instances)")
    if env["kind"] == "dataset" and env.get("correlation", "best") == "independent":
        raise ConfigurationError("dataset streams support 'best' or 'worst' correlation only")
    if name == "cos_mc" and env["kind"] == "dataset":
        raise ConfigurationError("cos_mc needs a multi-dimensional synthetic context")
    co_cost = raw.get("context_only_cost")
    if co_cost is not None:
        _check_cost(float(co_cost), "context_only_cost")

    return RunConfig(
        raw=raw, T=T, seeds=parse_seeds(raw.get("seeds", raw.get("seed", 0))), d=d, alpha=alpha,
        policy=name, control=control, m_T=m_T, A=A, p=p,
        child_memory=bool(pol.get("child_memory", False)), split_strict=bool(pol.get("split_strict", False)),
        union_pick=pol.get("union_pick", "uniform"), learners=learners, environment=env, L_max=L_max,
        ensemble=ens or None, context_only=bool(raw.get("context_only", False)),
        context_only_cost=None if co_cost is None else float(co_cost),
        context_only_default=int(raw.get("context_only_default", 1)), batch=batch, unsupervised=unsup,
        reward=dict(raw.get("reward", {})), out=raw.get("out"),
        online_learning=bool(raw.get("online_learning", False)),
    )
