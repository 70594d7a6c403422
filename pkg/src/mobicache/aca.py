"""Large-scale approximation path: the expected-weight objective, its
per-helper decomposition into restricted fractional knapsacks solved greedily,
and the uncoded most-popular baseline."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .allocation import Allocation, DownloadSchedule
from .lp import LpProblem, solve_lp
from .model import Catalog, HelperSet, RequestModel
from .walks import ContactValueTable


@dataclass(frozen=True)
class Material:
    """One knapsack material per (file, contact-count) pair."""

    file: int
    k: int            # 1-based contact count
    value: float
    weight: int       # bytes, the file size
    fraction_cap: float  # at most this fraction of the material fits


@dataclass(frozen=True, eq=False)
class KnapsackInstance:
    """The storage subproblem of a single helper.

    Place fractions of materials into ``capacity`` bytes; a material may be
    placed up to ``fraction_cap``, and the fractions of one file's materials
    may not exceed 1 combined.
    """

    capacity: int
    materials: tuple

    def __post_init__(self):
        mats = tuple(self.materials)
        for m in mats:
            if m.value < 0 or m.weight <= 0 or not 0 < m.fraction_cap <= 1:
                raise ValueError(f"malformed material {m}")
        object.__setattr__(self, "materials", mats)


def expected_weight(schedule: DownloadSchedule, values: ContactValueTable) -> float:
    """Expected fraction of a requested file downloaded within the deadline:
    sum of contact-count values times the schedule's per-contact fractions.
    (The positive constant the stationary-chain form carries is dropped; it
    never moves the argmax.)"""
    if schedule.u.shape != values.values.shape:
        raise ValueError("schedule and value table dimensions disagree")
    return float(np.sum(values.values * schedule.u))


def helper_knapsack(
    h: int, helpers: HelperSet, catalog: Catalog, values: ContactValueTable
) -> KnapsackInstance:
    """Build helper ``h``'s restricted fractional knapsack.

    Zero-value materials are omitted: placing them cannot improve the
    objective, and skipping them keeps unreachable helpers' caches empty.
    """
    d = values.d
    budget = int(helpers.slot_budgets[h])
    mats = []
    for i in range(catalog.num_files):
        size = int(catalog.file_sizes[i])
        cap = min(budget / size, 1.0)
        for k in range(1, d + 1):
            v = float(values.values[h, i, k - 1])
            if v > 0.0:
                mats.append(Material(i, k, v, size, cap))
    return KnapsackInstance(int(helpers.cache_capacities[h]), tuple(mats))


def greedy_fill(instance: KnapsackInstance, num_files: int) -> tuple[np.ndarray, float]:
    """Greedy optimum of the restricted fractional knapsack.

    Materials are taken in decreasing value per byte (ties: lower contact
    count, then lower file index) and inserted as far as the fraction cap, the
    per-file cumulative cap of 1, and the remaining byte capacity allow.
    Returns (per-file placed fractions, objective value).
    """
    order = sorted(
        instance.materials, key=lambda m: (-m.value / m.weight, m.k, m.file)
    )
    placed = np.zeros(num_files)
    bytes_left = float(instance.capacity)
    objective = 0.0
    for m in order:
        if bytes_left <= 0.0:
            break
        fraction = min(m.fraction_cap, 1.0 - placed[m.file], bytes_left / m.weight)
        if fraction <= 0.0:
            continue
        placed[m.file] += fraction
        bytes_left -= fraction * m.weight
        objective += fraction * m.value
    return placed, objective


def knapsack_lp_oracle(instance: KnapsackInstance) -> float:
    """The same subproblem as an explicit LP; used to certify the greedy."""
    mats = instance.materials
    if not mats:
        return 0.0
    q = len(mats)
    c = -np.array([m.value for m in mats])
    files = sorted({m.file for m in mats})
    rows = []
    rhs = []
    senses = []
    for f in files:
        row = np.array([1.0 if m.file == f else 0.0 for m in mats])
        rows.append(row)
        rhs.append(1.0)
        senses.append("<=")
    rows.append(np.array([float(m.weight) for m in mats]))
    rhs.append(float(instance.capacity))
    senses.append("<=")
    bounds = np.array([[0.0, m.fraction_cap] for m in mats])
    sol = solve_lp(LpProblem(c, np.vstack(rows), np.array(rhs), tuple(senses), bounds))
    if sol.status != "optimal":
        raise RuntimeError(f"knapsack LP unexpectedly {sol.status}")
    return -sol.objective_value


def aca_allocate(
    helpers: HelperSet, catalog: Catalog, values: ContactValueTable, d: int
) -> Allocation:
    """Greedy coded allocation: each helper solves its knapsack independently."""
    if values.d != d:
        raise ValueError("value table was built for a different deadline")
    if values.n != helpers.n or values.num_files != catalog.num_files:
        raise ValueError("value table dimensions disagree with the instance")
    x = np.zeros((helpers.n, catalog.num_files))
    for h in range(helpers.n):
        placed, _ = greedy_fill(helper_knapsack(h, helpers, catalog, values), catalog.num_files)
        x[h] = placed
    return Allocation(x)


def hua_allocate(helpers: HelperSet, catalog: Catalog, requests: RequestModel) -> Allocation:
    """Uncoded baseline: each helper stores its locally most popular files
    whole, stopping at the first one that no longer fits."""
    if requests.n != helpers.n or requests.num_files != catalog.num_files:
        raise ValueError("request model dimensions disagree with the instance")
    x = np.zeros((helpers.n, catalog.num_files))
    for h in range(helpers.n):
        order = sorted(range(catalog.num_files), key=lambda i: (-requests.per_helper[h, i], i))
        remaining = int(helpers.cache_capacities[h])
        for i in order:
            if catalog.file_sizes[i] > remaining:
                break
            x[h, i] = 1.0
            remaining -= int(catalog.file_sizes[i])
    return Allocation(x)
