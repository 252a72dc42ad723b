"""Command-line entry point: ``simulate``, ``sweep`` and ``forecast-eval``.

Exit codes: 0 success, 2 configuration error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np
import yaml

from greenedge.config import ScenarioConfig, dump_config, load_config, normalize_policy
from greenedge.errors import ConfigError, GreenEdgeError, TraceParseError, TraceValidationError
from greenedge.forecast import ForecasterSpec, evaluate, fit
from greenedge.orchestrator import run_simulation
from greenedge.traces import (
    load_trace_csv,
    synthesize_energy_profile,
    synthesize_load_profile,
)

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3
SWEEP_VARIABLES = ("eta", "cluster_size", "gamma_max")
SWEEP_COLUMNS = (
    "row_type",
    "variable",
    "value",
    "replication",
    "seed",
    "mean_savings_percent",
    "std_savings_percent",
)


@dataclass(frozen=True)
class SweepSpec:
    variable: str
    values: tuple
    replications: int = 1

    def __post_init__(self):
        if self.variable not in SWEEP_VARIABLES:
            raise ConfigError(f"must be one of {SWEEP_VARIABLES}", field="variable")
        if not self.values:
            raise ConfigError("must not be empty", field="values")
        if self.replications < 1:
            raise ConfigError("must be >= 1", field="replications")


def replication_seed(master: int, replication: int) -> int:
    return int(np.random.SeedSequence([master, replication]).generate_state(1)[0] % (2**31))


def apply_sweep_value(cfg: ScenarioConfig, variable: str, value) -> ScenarioConfig:
    if variable == "cluster_size":
        size = int(value)
        if size < 1:
            raise ConfigError("cluster size must be >= 1", field="values")
        return cfg.replace(n_clusters=max(1, min(cfg.n_bs, math.ceil(cfg.n_bs / size))))
    return cfg.replace(**{variable: float(value)})


def _run_one(cfg: ScenarioConfig) -> float:
    return run_simulation(cfg).mean_savings_percent


def sweep(cfg: ScenarioConfig, spec: SweepSpec, jobs: int = 1) -> List[dict]:
    """One row per (value, replication) followed by one summary row per value."""
    jobs_list = []
    for value in spec.values:
        for r in range(spec.replications):
            seed = replication_seed(cfg.seed, r)
            jobs_list.append((value, r, seed, apply_sweep_value(cfg, spec.variable, value).replace(seed=seed)))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_one, [j[3] for j in jobs_list]))
    else:
        results = [_run_one(j[3]) for j in jobs_list]

    rows = []
    for (value, r, seed, _), res in zip(jobs_list, results):
        rows.append(dict(row_type="run", variable=spec.variable, value=value, replication=r,
                         seed=seed, mean_savings_percent=res, std_savings_percent=""))
    for value in spec.values:
        vals = [row["mean_savings_percent"] for row in rows if row["value"] == value]
        std = float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0
        rows.append(dict(row_type="summary", variable=spec.variable, value=value, replication="",
                         seed="", mean_savings_percent=float(np.mean(vals)), std_savings_percent=std))
    return rows


def forecast_table(cfg: ScenarioConfig) -> List[dict]:
    """Normalized RMSE per trace, forecaster kind and step, on the held-out split."""
    total = cfg.history_slots + cfg.slots
    traces = []
    if cfg.load_csv or cfg.energy_csv:
        for n in range(cfg.n_bs):
            if cfg.load_csv:
                traces.append((f"load_bs{n}", load_trace_csv(cfg.load_csv.format(bs=n), "load", n, cfg.l_max).values))
            if cfg.energy_csv:
                traces.append((f"energy_bs{n}", load_trace_csv(cfg.energy_csv.format(bs=n), "energy", n).values))
    else:
        for p in (1, 2, 3, 4):
            traces.append((f"load_{p}", synthesize_load_profile(p, cfg.seed, total, cfg.l_max).values))
        for p in (1, 2, 3):
            traces.append((f"energy_{p}", synthesize_energy_profile(p, cfg.seed, total, cfg.beta_max).values))

    rows = []
    for name, values in traces:
        for kind in ("seasonal_persistence", "recurrent", "last_value"):
            spec = ForecasterSpec(kind=kind, horizon=cfg.horizon)
            f = fit(spec, values, seed=cfg.seed)
            start = int(round(spec.train_fraction * len(values)))
            row = {"trace": name, "kind": kind}
            for k in range(1, cfg.horizon + 1):
                row[f"rmse_k{k}"] = evaluate(f, k, start)
            rows.append(row)
    return rows


def _write_rows(rows, columns, fh):
    w = csv.DictWriter(fh, fieldnames=list(columns), lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow(row)


def _config_from_args(args) -> ScenarioConfig:
    if args.config is not None and not Path(args.config).is_file():
        raise ConfigError(f"config file not found: {args.config}", field="config")
    cfg = load_config(args.config)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if getattr(args, "policy", None) is not None:
        changes["policy"] = normalize_policy(args.policy)
    return cfg.replace(**changes) if changes else cfg


def cmd_simulate(args) -> int:
    cfg = _config_from_args(args)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = run_simulation(cfg)
    report.write_csv(out / "metrics.csv")
    report.write_summary(out / "summary.json")
    with open(out / "savings.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["slot", "savings_percent"])
        for t, s in enumerate(report.savings):
            w.writerow([t, s])
    (out / "config.yaml").write_text(dump_config(cfg), encoding="utf-8")
    print(f"mean_savings_percent={report.mean_savings_percent:.4f}")
    return EXIT_OK


def _parse_values(text: str) -> tuple:
    vals = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        try:
            vals.append(float(tok))
        except ValueError:
            raise ConfigError(f"not a number: {tok!r}", field="values") from None
    return tuple(vals)


def cmd_sweep(args) -> int:
    cfg = _config_from_args(args)
    if args.spec:
        data = yaml.safe_load(Path(args.spec).read_text(encoding="utf-8")) or {}
        unknown = set(data) - {"variable", "values", "replications"}
        if unknown:
            raise ConfigError("unknown sweep key", field=sorted(unknown)[0])
        spec = SweepSpec(data.get("variable", ""), tuple(data.get("values") or ()), int(data.get("replications", 1)))
    else:
        spec = SweepSpec(args.variable or "", _parse_values(args.values or ""), args.replications)
    rows = sweep(cfg, spec, jobs=args.jobs)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / f"sweep_{spec.variable}.csv", "w", newline="", encoding="utf-8") as fh:
        _write_rows(rows, SWEEP_COLUMNS, fh)
    for row in rows:
        if row["row_type"] == "summary":
            print(f"{spec.variable}={row['value']}: {row['mean_savings_percent']:.3f} +- {row['std_savings_percent']:.3f}")
    return EXIT_OK


def cmd_forecast_eval(args) -> int:
    cfg = _config_from_args(args)
    rows = forecast_table(cfg)
    columns = ["trace", "kind"] + [f"rmse_k{k}" for k in range(1, cfg.horizon + 1)]
    _write_rows(rows, columns, sys.stdout)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="greenedge", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="YAML scenario file (defaults when omitted)")
        p.add_argument("--seed", type=int, help="override the master seed")

    p = sub.add_parser("simulate", help="run one scenario")
    common(p)
    p.add_argument("--out-dir", default="results")
    p.add_argument("--policy", choices=["enaam", "deta-r", "deta_r", "none"])
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="mean savings over a parameter range")
    common(p)
    p.add_argument("--out-dir", default="results")
    p.add_argument("--policy", choices=["enaam", "deta-r", "deta_r", "none"])
    p.add_argument("--spec", help="YAML with variable, values, replications")
    p.add_argument("--variable", choices=SWEEP_VARIABLES)
    p.add_argument("--values", help="comma-separated values")
    p.add_argument("--replications", type=int, default=1)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("forecast-eval", help="RMSE table of the built-in forecasters")
    common(p)
    p.set_defaults(func=cmd_forecast_eval)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, TraceParseError, TraceValidationError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (GreenEdgeError, ValueError, OSError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
