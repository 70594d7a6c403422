"""Storage allocations, the per-contact download schedule, feasibility checks,
and the exact / Monte Carlo failure-probability evaluators."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import Catalog, HelperSet, MobilityModel, RequestModel
from .walks import DEFAULT_ENUMERATION_CAP, _iter_walks, check_enumeration_cap

# An allocation summing to exactly 1.0 along a walk must count as success
# despite floating-point error; the strict < 1 test gets this much slack.
SUCCESS_SLACK = 1e-9

# LP outputs carry solver-level noise; capacity checks tolerate this many bytes.
CAPACITY_TOL = 1e-6

# Bounds on x tolerate accumulated rounding from the solvers.
X_BOUND_TOL = 1e-9

# Two-sided 99% normal quantile, for Monte Carlo confidence intervals.
Z_99 = 2.5758293035489004


@dataclass(frozen=True, eq=False)
class Allocation:
    """x[h, i] is the fraction of file i's size stored (encoded) at helper h.

    The constructor only fixes the shape; box and capacity constraints are
    the business of check_feasible, so that infeasible candidates can still be
    represented and reported on.
    """

    x: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if x.ndim != 2 or x.size == 0:
            raise ValueError("allocation must be a non-empty n x num_files matrix")
        if not np.all(np.isfinite(x)):
            raise ValueError("allocation fractions must be finite")
        object.__setattr__(self, "x", x)

    @property
    def n(self) -> int:
        return int(self.x.shape[0])

    @property
    def num_files(self) -> int:
        return int(self.x.shape[1])


@dataclass(frozen=True, eq=False)
class DownloadSchedule:
    """u[h, i, k-1] is the fraction of file i downloadable from helper h on the
    k-th contact: capped by the slot budget, and never re-downloading data."""

    u: np.ndarray  # shape (n, num_files, d)

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float)
        if u.ndim != 3:
            raise ValueError("schedule must have shape (n, num_files, d)")
        object.__setattr__(self, "u", u)

    @property
    def d(self) -> int:
        return int(self.u.shape[2])

    def cumulative(self) -> np.ndarray:
        """cum[h, i, K] = total fraction after K contacts, K = 0..d."""
        n, num_files, d = self.u.shape
        cum = np.zeros((n, num_files, d + 1))
        cum[:, :, 1:] = np.cumsum(self.u, axis=2)
        return cum


@dataclass(frozen=True)
class FeasibilityReport:
    feasible: bool
    slack: np.ndarray  # per-helper spare capacity in bytes
    violations: tuple


@dataclass(frozen=True)
class EvalReport:
    p_fail: float
    method: str  # "exact" | "monte-carlo"
    samples: int = 0
    ci_halfwidth_99: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "p_fail", float(self.p_fail))
        object.__setattr__(self, "ci_halfwidth_99", float(self.ci_halfwidth_99))
        if not 0.0 <= self.p_fail <= 1.0:
            raise ValueError("p_fail must lie in [0, 1]")
        if self.ci_halfwidth_99 < 0.0:
            raise ValueError("confidence halfwidth must be non-negative")


def download_schedule(
    alloc: Allocation, helpers: HelperSet, catalog: Catalog, d: int
) -> DownloadSchedule:
    """Per-contact download fractions: the first contact fetches up to the slot
    budget, later contacts fetch only what is still missing."""
    if d < 1:
        raise ValueError("d must be >= 1")
    _check_dimensions(alloc, helpers, catalog)
    cap = helpers.slot_budgets[:, None] / catalog.file_sizes[None, :]  # b_h / |O_i|
    u = np.zeros((alloc.n, alloc.num_files, d))
    remaining = np.maximum(alloc.x, 0.0)
    for k in range(d):
        step = np.minimum(remaining, cap)
        u[:, :, k] = step
        remaining -= step
    return DownloadSchedule(u)


def _check_dimensions(alloc: Allocation, helpers: HelperSet, catalog: Catalog) -> None:
    if alloc.n != helpers.n or alloc.num_files != catalog.num_files:
        raise ValueError(
            f"allocation is {alloc.n}x{alloc.num_files} but instance has "
            f"{helpers.n} helpers and {catalog.num_files} files"
        )


def check_feasible(
    alloc: Allocation, helpers: HelperSet, catalog: Catalog
) -> FeasibilityReport:
    """Cache-capacity and box-constraint verdict with per-helper byte slack."""
    _check_dimensions(alloc, helpers, catalog)
    used = alloc.x @ catalog.file_sizes.astype(float)
    slack = helpers.cache_capacities.astype(float) - used
    violations = []
    for h in np.nonzero(slack < -CAPACITY_TOL)[0]:
        violations.append(
            f"helper {h}: {used[h]:.6f} bytes stored exceeds capacity {helpers.cache_capacities[h]}"
        )
    if np.any(alloc.x > 1.0 + X_BOUND_TOL) or np.any(alloc.x < -X_BOUND_TOL):
        violations.append("allocation fractions outside [0, 1]")
    return FeasibilityReport(not violations, slack, tuple(violations))


def failure_probability_exact(
    alloc: Allocation,
    model: MobilityModel,
    requests: RequestModel,
    helpers: HelperSet,
    catalog: Catalog,
    d: int,
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> EvalReport:
    """Exact failure probability by exhaustive walk enumeration.

    A request fails when the fractions downloadable over the walk's contacts
    sum to less than 1 (minus a tiny slack so exact hits count as success).
    """
    _check_dimensions(alloc, helpers, catalog)
    if requests.n != model.n or requests.n != helpers.n:
        raise ValueError("model, requests and helpers disagree on n")
    check_enumeration_cap(model.n, d, cap)
    cum = download_schedule(alloc, helpers, catalog, d).cumulative()
    p_fail = 0.0
    for steps, prob in _iter_walks(model, d):
        downloaded = np.zeros(alloc.num_files)
        for h, count in Counter(steps).items():
            downloaded += cum[h, :, count]
        failed = downloaded < 1.0 - SUCCESS_SLACK
        p_fail += prob * float(requests.per_helper[steps[0]] @ failed)
    return EvalReport(p_fail=min(max(p_fail, 0.0), 1.0), method="exact")


def failure_probability_mc(
    alloc: Allocation,
    model: MobilityModel,
    requests: RequestModel,
    helpers: HelperSet,
    catalog: Catalog,
    d: int,
    samples: int,
    seed: int,
) -> EvalReport:
    """Monte Carlo estimate of the failure probability.

    Stream-splitting rule: a single PCG64(seed) generator draws one
    (samples, d+1) uniform matrix up front; sample s consumes row s, columns
    0..d-1 driving the walk via inverse-CDF lookups and column d picking the
    requested file. Fixed seeds therefore give bit-identical reports.
    """
    _check_dimensions(alloc, helpers, catalog)
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    uniforms = rng.random((samples, d + 1))
    cum_init = np.cumsum(model.init)
    cum_trans = np.cumsum(model.trans, axis=1)
    cum_requests = np.cumsum(requests.per_helper, axis=1)

    # the final CDF entry can fall a hair below 1.0; clip the lookups
    positions = np.empty((samples, d), dtype=np.int64)
    positions[:, 0] = np.minimum(
        np.searchsorted(cum_init, uniforms[:, 0], side="right"), model.n - 1
    )
    for t in range(1, d):
        rows = cum_trans[positions[:, t - 1]]
        positions[:, t] = np.minimum((uniforms[:, t, None] > rows).sum(axis=1), model.n - 1)
    rows = cum_requests[positions[:, 0]]
    files = np.minimum((uniforms[:, d, None] > rows).sum(axis=1), requests.num_files - 1)

    counts = np.zeros((samples, model.n), dtype=np.int64)
    np.add.at(counts, (np.arange(samples)[:, None], positions), 1)
    cum = download_schedule(alloc, helpers, catalog, d).cumulative()
    downloaded = np.zeros(samples)
    for h in range(model.n):
        downloaded += cum[h, files, counts[:, h]]
    failures = downloaded < 1.0 - SUCCESS_SLACK
    p_hat = float(failures.mean())
    half = Z_99 * float(np.sqrt(p_hat * (1.0 - p_hat) / samples))
    return EvalReport(
        p_fail=p_hat, method="monte-carlo", samples=samples, ci_halfwidth_99=half
    )


# --- allocation artifact ------------------------------------------------------


def allocation_to_json(alloc: Allocation, algorithm: str, objective_estimate: float,
                       extra: dict | None = None) -> dict:
    obj = {
        "n": alloc.n,
        "num_files": alloc.num_files,
        "x": alloc.x.tolist(),
        "algorithm": algorithm,
        "objective_estimate": objective_estimate,
    }
    if extra:
        obj.update(extra)
    return obj


def allocation_from_json(obj: dict) -> Allocation:
    alloc = Allocation(np.asarray(obj["x"], dtype=float))
    if alloc.n != int(obj["n"]) or alloc.num_files != int(obj["num_files"]):
        raise ValueError("allocation JSON dimensions disagree with the x matrix")
    return alloc


def save_allocation(path, alloc: Allocation, algorithm: str, objective_estimate: float,
                    extra: dict | None = None) -> None:
    Path(path).write_text(
        json.dumps(allocation_to_json(alloc, algorithm, objective_estimate, extra),
                   indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )


def load_allocation(path) -> Allocation:
    return allocation_from_json(json.loads(Path(path).read_text(encoding="utf-8")))
