"""Command-line entry point: ``run``, ``sweep``, ``oracle`` and ``report``."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from itertools import product
from pathlib import Path

from .config import RunConfig, load_config, parse_seeds
from .errors import ConfigurationError, InvariantViolation
from .metrics import (
    METRICS_HEADER, SELECTION_HEADER, SUMMARY_HEADER, aggregate, finalize_report, read_rows, write_rows,
)
from .simulation import Simulation


def write_run(cfg: RunConfig, seed: int, out: Path) -> list[dict]:
    out.mkdir(parents=True, exist_ok=True)
    result = Simulation(cfg, seed).run()
    result.metrics.write_metrics(out / "metrics.csv")
    summary, selection = finalize_report(result.metrics)
    write_rows(out / "summary.csv", SUMMARY_HEADER, summary)
    write_rows(out / "selection.csv", SELECTION_HEADER, selection)
    manifest = {"seed": seed, "resolved": cfg.resolved(), "outputs": ["metrics.csv", "summary.csv", "selection.csv"]}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return summary


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    seed = args.seed if args.seed is not None else cfg.seeds[0]
    out = Path(args.out or cfg.out or "out")
    summary = write_run(cfg, seed, out)
    for row in summary:
        print(f"learner {row['learner']}: error {row['error_pct']:.2f}%  training {_pct(row['training_pct'])}  "
              f"exploration {_pct(row['exploration_pct'])}  regret {_num(row['cum_exp_regret'])}")
    print(f"wrote {out}")
    return 0


def _pct(v):
    return "-" if v is None else f"{v:.2f}%"


def _num(v):
    return "-" if v is None else f"{v:.2f}"


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    seeds = parse_seeds(args.seeds) if args.seeds else cfg.seeds
    out = Path(args.out or cfg.out or "sweep")
    per_seed = []
    rows = []
    for s in seeds:
        summary = write_run(cfg, s, out / f"seed_{s}")
        per_seed.append(summary)
        rows += [{"seed": s, **r} for r in summary]
    agg = aggregate(per_seed)
    header = ["seed"] + SUMMARY_HEADER
    write_rows(out / "sweep_runs.csv", header, rows)
    agg_header = ["learner", "runs"] + sorted({k for a in agg for k in a} - {"learner", "runs"})
    write_rows(out / "sweep_summary.csv", agg_header, agg)
    for a in agg:
        print(f"learner {a['learner']}: runs {a['runs']}  error {a.get('error_pct_mean', 0):.2f}"
              f" +/- {a.get('error_pct_std', 0):.2f}%")
    print(f"wrote {out}")
    return 0


def oracle_grid(cfg: RunConfig, n: int, learner: int = 0, t: int = 0) -> list[dict]:
    if not cfg.synthetic:
        raise ConfigurationError("the oracle needs a synthetic environment with known accuracies")
    sim = Simulation(cfg.__class__(**{**cfg.__dict__, "T": max(cfg.T, 1)}), cfg.seeds[0], keep_rows=False)
    orc = sim.oracles[learner]
    names = sim.learners[learner].arm_names
    axis = [j / (n - 1) for j in range(n)] if n > 1 else [0.5]
    rows = []
    for x in product(axis, repeat=cfg.d):
        k, v = orc.best(x, t)
        rows.append({"x": " ".join(f"{c:.6g}" for c in x), "best_arm": names[k], "net_value": v})
    return rows


def cmd_oracle(args) -> int:
    cfg = load_config(args.config)
    rows = oracle_grid(cfg, args.grid, args.learner, args.t)
    if args.out:
        write_rows(Path(args.out), ["x", "best_arm", "net_value"], rows)
        print(f"wrote {args.out}")
    else:
        w = csv.writer(sys.stdout)
        w.writerow(["x", "best_arm", "net_value"])
        for r in rows:
            w.writerow([r["x"], r["best_arm"], repr(round(r["net_value"], 12))])
    return 0


def cmd_report(args) -> int:
    root = Path(args.dir)
    files = sorted(root.rglob("summary.csv"))
    if not files:
        raise ConfigurationError(f"no summary.csv found under {root}")
    merged = []
    for f in files:
        for r in read_rows(f):
            merged.append({"source": str(f.parent.relative_to(root)) or ".", **r})
    out = Path(args.out) if args.out else root / "report.csv"
    write_rows(out, ["source"] + SUMMARY_HEADER, merged)
    for r in merged:
        print(f"{r['source']:>20}  learner {r['learner']:>8}  error {r['error_pct']}%")
    print(f"wrote {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="coopclass", description="Cooperative contextual-bandit stream classification")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("run", help="run one seed")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run several seeds and aggregate")
    p.add_argument("--config", required=True)
    p.add_argument("--seeds", help="e.g. 1..10 or 1,2,3")
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("oracle", help="dump the best-arm map on a grid")
    p.add_argument("--config", required=True)
    p.add_argument("--grid", type=int, default=1000)
    p.add_argument("--learner", type=int, default=0)
    p.add_argument("--t", type=int, default=0, help="slot for drifting worlds")
    p.add_argument("--out")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("report", help="merge summary.csv files under a directory")
    p.add_argument("dir")
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except InvariantViolation as e:
        print(f"aborted: invariant violation: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
