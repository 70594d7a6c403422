"""Command-line surface: model estimation, allocation, evaluation, parameter
sweeps, and the oracle verification suite.

Exit codes: 0 success, 2 invalid input, 3 instance too large, 4 verification
failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass
from pathlib import Path

from . import aca as aca_mod
from . import verification, walks
from .allocation import (
    Allocation,
    EvalReport,
    failure_probability_exact,
    failure_probability_mc,
    load_allocation,
    save_allocation,
)
from .errors import InstanceTooLargeError
from .model import (
    Catalog,
    HelperSet,
    MobilityModel,
    RequestModel,
    build_zipf_mandelbrot,
    estimate_from_trace,
    load_model,
    read_trace_csv,
    save_model,
    synthetic_mobility,
    uniform_request_model,
)
from .oca import BnbOptions, build_mip, solve_branch_and_bound

ALGORITHMS = ("hua", "aca", "oca")

EXIT_OK = 0
EXIT_INVALID_INPUT = 2
EXIT_TOO_LARGE = 3
EXIT_VERIFY_FAILED = 4


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: instance dimensions, request model, mobility source,
    algorithms, evaluation method and an optional sweep axis."""

    n: int
    d: int
    slot_duration_s: float
    num_files: int
    file_size_bytes: int
    slot_budget_bytes: tuple
    cache_capacity_bytes: tuple
    zipf_shape: float
    zipf_shift: float
    mobility: dict
    algorithms: tuple
    eval_method: str
    eval_samples: int
    eval_seed: int
    sweep_axis: str | None
    sweep_values: tuple

    @staticmethod
    def from_dict(obj: dict) -> "ExperimentConfig":
        try:
            n = int(obj["n"])
            d = int(obj["d"])
            catalog = obj["catalog"]
            num_files = int(catalog["num_files"])
            file_size = int(catalog["file_size_bytes"])
            helpers = obj["helpers"]
            budgets = _per_helper(helpers["slot_budget_bytes"], n)
            caps = _per_helper(helpers.get("cache_capacity_bytes", 0), n)
            requests = obj.get("requests", {})
            shape = float(requests.get("zipf_shape", 1.0))
            shift = float(requests.get("zipf_shift", 0.0))
            mobility = dict(obj["mobility"])
            algorithms = tuple(obj.get("algorithms", ["aca"]))
            evaluation = obj.get("evaluation", {"method": "exact"})
            method = evaluation.get("method", "exact")
            sweep = obj.get("sweep")
        except KeyError as exc:
            raise ValueError(f"config is missing required key {exc}") from exc
        if n < 1 or d < 1:
            raise ValueError("n and d must be >= 1")
        for a in algorithms:
            if a not in ALGORITHMS:
                raise ValueError(f"unknown algorithm {a!r}")
        if method not in ("exact", "mc"):
            raise ValueError(f"unknown evaluation method {method!r}")
        axis = None
        values: tuple = ()
        if sweep is not None:
            axis = sweep.get("axis")
            if axis not in ("cache_fraction", "zipf_shape"):
                raise ValueError(f"unknown sweep axis {axis!r}")
            values = tuple(float(v) for v in sweep["values"])
            if axis == "cache_fraction" and any(not 0.0 < v <= 1.0 for v in values):
                raise ValueError("cache_fraction values must lie in (0, 1]")
        return ExperimentConfig(
            n=n,
            d=d,
            slot_duration_s=float(obj.get("slot_duration_s", 100.0)),
            num_files=num_files,
            file_size_bytes=file_size,
            slot_budget_bytes=budgets,
            cache_capacity_bytes=caps,
            zipf_shape=shape,
            zipf_shift=shift,
            mobility=mobility,
            algorithms=algorithms,
            eval_method=method,
            eval_samples=int(evaluation.get("samples", 100_000)),
            eval_seed=int(evaluation.get("seed", 0)),
            sweep_axis=axis,
            sweep_values=values,
        )

    @staticmethod
    def load(path) -> "ExperimentConfig":
        return ExperimentConfig.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def catalog(self) -> Catalog:
        return Catalog([self.file_size_bytes] * self.num_files)

    def helpers(self, cache_fraction: float | None = None) -> HelperSet:
        caps = self.cache_capacity_bytes
        if cache_fraction is not None:
            total = self.file_size_bytes * self.num_files
            caps = (int(round(cache_fraction * total)),) * self.n
        return HelperSet(caps, self.slot_budget_bytes)

    def request_model(self, zipf_shape: float | None = None) -> RequestModel:
        shape = self.zipf_shape if zipf_shape is None else zipf_shape
        popularity = build_zipf_mandelbrot(self.num_files, shape, self.zipf_shift)
        return uniform_request_model(popularity, self.n)

    def mobility_model(self) -> MobilityModel:
        src = self.mobility
        if "model_json" in src:
            model, _slot = load_model(src["model_json"])
        elif "trace_csv" in src:
            trace = read_trace_csv(src["trace_csv"])
            model = estimate_from_trace(trace, self.slot_duration_s, self.n)
        elif "synthetic" in src:
            params = dict(src["synthetic"])
            model = synthetic_mobility(
                self.n,
                locality=float(params.get("locality", 0.5)),
                grid_cols=params.get("grid_cols"),
                cluster_size=params.get("cluster_size"),
                jitter=float(params.get("jitter", 0.0)),
                seed=int(params.get("seed", 0)),
            )
        else:
            raise ValueError("mobility must give model_json, trace_csv or synthetic")
        if model.n != self.n:
            raise ValueError(f"mobility model has n={model.n}, config says n={self.n}")
        return model


def _per_helper(value, n: int) -> tuple:
    if isinstance(value, (list, tuple)):
        if len(value) != n:
            raise ValueError(f"expected {n} per-helper values, got {len(value)}")
        return tuple(int(v) for v in value)
    return (int(value),) * n


def _allocate(
    config: ExperimentConfig,
    algorithm: str,
    model: MobilityModel,
    requests: RequestModel,
    helpers: HelperSet,
    catalog: Catalog,
) -> tuple[Allocation, dict]:
    """Run one algorithm; returns the allocation and artifact extras."""
    if algorithm == "hua":
        return aca_mod.hua_allocate(helpers, catalog, requests), {}
    if algorithm == "aca":
        values = walks.contact_value_table(model, requests, config.d)
        return aca_mod.aca_allocate(helpers, catalog, values, config.d), {}
    if algorithm == "oca":
        try:
            mip = build_mip(model, requests, helpers, catalog, config.d)
        except InstanceTooLargeError as exc:
            raise InstanceTooLargeError(f"{exc}; the aca algorithm handles this scale") from exc
        alloc, objective, report = solve_branch_and_bound(mip, BnbOptions())
        return alloc, {
            "certified_objective": objective,
            "gap": report.gap,
            "lower_bound": report.lower_bound,
            "nodes": report.nodes,
            "solver_status": report.status,
        }
    raise ValueError(f"unknown algorithm {algorithm!r}")


def _evaluate(
    config: ExperimentConfig,
    alloc: Allocation,
    model: MobilityModel,
    requests: RequestModel,
    helpers: HelperSet,
    catalog: Catalog,
) -> EvalReport:
    if config.eval_method == "exact":
        return failure_probability_exact(alloc, model, requests, helpers, catalog, config.d)
    return failure_probability_mc(
        alloc, model, requests, helpers, catalog, config.d,
        config.eval_samples, config.eval_seed,
    )


def cmd_estimate(trace_path, slot_duration: float, n: int, out) -> dict:
    trace = read_trace_csv(trace_path)
    model = estimate_from_trace(trace, slot_duration, n)
    save_model(model, slot_duration, out)
    return {"n": model.n, "out": str(out)}


def cmd_allocate(config: ExperimentConfig, algorithm: str, out) -> dict:
    model = config.mobility_model()
    requests = config.request_model()
    helpers = config.helpers()
    catalog = config.catalog()
    alloc, extra = _allocate(config, algorithm, model, requests, helpers, catalog)
    report = _evaluate(config, alloc, model, requests, helpers, catalog)
    objective = extra.get("certified_objective", report.p_fail)
    save_allocation(out, alloc, algorithm, float(objective), extra)
    return {"algorithm": algorithm, "objective_estimate": float(objective), "out": str(out)}


def cmd_evaluate(config: ExperimentConfig, allocation_path, out=None,
                 model_path=None) -> EvalReport:
    if model_path is not None:
        model, _slot = load_model(model_path)
        if model.n != config.n:
            raise ValueError(f"model has n={model.n}, config says n={config.n}")
    else:
        model = config.mobility_model()
    alloc = load_allocation(allocation_path)
    requests = config.request_model()
    helpers = config.helpers()
    catalog = config.catalog()
    report = _evaluate(config, alloc, model, requests, helpers, catalog)
    if out is not None:
        payload = {
            "p_fail": report.p_fail,
            "method": report.method,
            "samples": report.samples,
            "ci_halfwidth_99": report.ci_halfwidth_99,
        }
        Path(out).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                             encoding="utf-8")
    return report


SWEEP_COLUMNS = ["axis_name", "axis_value", "algorithm", "p_fail", "ci_halfwidth", "method"]


def cmd_sweep(config: ExperimentConfig, out) -> list[dict]:
    """One row per sweep point per algorithm, in sweep order."""
    if config.sweep_axis is None:
        raise ValueError("config has no sweep section")
    model = config.mobility_model()
    catalog = config.catalog()
    rows = []
    for value in config.sweep_values:
        if config.sweep_axis == "cache_fraction":
            helpers = config.helpers(cache_fraction=value)
            requests = config.request_model()
        else:
            helpers = config.helpers()
            requests = config.request_model(zipf_shape=value)
        for algorithm in config.algorithms:
            alloc, _extra = _allocate(config, algorithm, model, requests, helpers, catalog)
            report = _evaluate(config, alloc, model, requests, helpers, catalog)
            rows.append({
                "axis_name": config.sweep_axis,
                "axis_value": value,
                "algorithm": algorithm,
                "p_fail": report.p_fail,
                "ci_halfwidth": report.ci_halfwidth_99,
                "method": report.method,
            })
    with open(out, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=SWEEP_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow(
                {k: repr(float(v)) if isinstance(v, float) else v for k, v in row.items()}
            )
    return rows


def cmd_verify(seed: int, trials: int) -> verification.VerificationReport:
    return verification.run_verification(seed=seed, trials=trials)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mobicache",
        description="Coded cache allocation for mobile users over helper stations",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="estimate a mobility model from a trace CSV")
    p.add_argument("--trace", required=True)
    p.add_argument("--slot-duration", type=float, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("allocate", help="compute a storage allocation")
    p.add_argument("--config", required=True)
    p.add_argument("--algorithm", required=True, choices=ALGORITHMS)
    p.add_argument("--out", required=True)

    p = sub.add_parser("evaluate", help="evaluate an allocation artifact")
    p.add_argument("--config", required=True)
    p.add_argument("--allocation", required=True)
    p.add_argument("--model", default=None, help="model JSON overriding the config mobility")
    p.add_argument("--out", default=None)

    p = sub.add_parser("sweep", help="sweep a parameter axis and write a CSV report")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("verify", help="run the oracle verification suite")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=20)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "estimate":
            result = cmd_estimate(args.trace, args.slot_duration, args.n, args.out)
            print(f"wrote model for n={result['n']} to {result['out']}")
        elif args.command == "allocate":
            config = ExperimentConfig.load(args.config)
            result = cmd_allocate(config, args.algorithm, args.out)
            print(
                f"{result['algorithm']}: objective_estimate="
                f"{result['objective_estimate']!r} -> {result['out']}"
            )
        elif args.command == "evaluate":
            config = ExperimentConfig.load(args.config)
            report = cmd_evaluate(config, args.allocation, args.out, args.model)
            print(
                f"p_fail={report.p_fail!r} method={report.method} "
                f"samples={report.samples} ci_halfwidth_99={report.ci_halfwidth_99!r}"
            )
        elif args.command == "sweep":
            config = ExperimentConfig.load(args.config)
            rows = cmd_sweep(config, args.out)
            print(f"wrote {len(rows)} rows to {args.out}")
        elif args.command == "verify":
            report = cmd_verify(args.seed, args.trials)
            print(report.format())
            if not report.ok:
                return EXIT_VERIFY_FAILED
    except InstanceTooLargeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TOO_LARGE
    except (ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
