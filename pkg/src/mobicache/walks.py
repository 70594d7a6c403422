"""Random-walk mathematics: walk probabilities, exhaustive enumeration,
first-passage recursions, and the contact-count value table that drives the
greedy allocator, with a brute-force oracle for the latter."""

from __future__ import annotations

import weakref
from collections import Counter
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .errors import InstanceTooLargeError
from .model import MobilityModel, RequestModel

# Exhaustive enumeration refuses instances with more than this many walks;
# callers are pointed at the Monte Carlo path instead.
DEFAULT_ENUMERATION_CAP = 10_000_000


@dataclass(frozen=True)
class Walk:
    """A d-step trajectory over helpers; helpers may repeat."""

    steps: tuple

    def __post_init__(self):
        steps = tuple(int(s) for s in self.steps)
        if len(steps) < 1:
            raise ValueError("a walk has at least one step")
        if any(s < 0 for s in steps):
            raise ValueError("helper indices must be non-negative")
        object.__setattr__(self, "steps", steps)

    def __len__(self) -> int:
        return len(self.steps)

    def counts(self) -> Counter:
        """Multiset view: helper -> number of contacts."""
        return Counter(self.steps)


def _steps_of(walk) -> tuple:
    return walk.steps if isinstance(walk, Walk) else tuple(int(s) for s in walk)


def walk_probability(model: MobilityModel, walk: Walk | Sequence[int]) -> float:
    """Probability of a walk: P_init of the first helper times the chain of
    transition probabilities."""
    steps = _steps_of(walk)
    if any(s >= model.n for s in steps):
        raise ValueError("walk step out of range for this model")
    p = float(model.init[steps[0]])
    for a, b in zip(steps, steps[1:]):
        p *= float(model.trans[a, b])
    return p


def check_enumeration_cap(n: int, d: int, cap: int = DEFAULT_ENUMERATION_CAP) -> None:
    if n**d > cap:
        raise InstanceTooLargeError(
            f"{n}^{d} walks exceed the enumeration cap of {cap}; "
            "use the Monte Carlo evaluator instead"
        )


def _iter_walks(model: MobilityModel, d: int) -> Iterator[tuple[tuple, float]]:
    """Yield (steps, probability) for every positive-probability walk, in
    lexicographic order. No cap check; internal use."""
    n = model.n
    init = model.init
    trans = model.trans
    stack: list[tuple[tuple, float]] = []

    def descend(prefix: tuple, prob: float):
        if len(prefix) == d:
            yield prefix, prob
            return
        row = init if not prefix else trans[prefix[-1]]
        for h in range(n):
            p = prob * float(row[h])
            if p > 0.0:
                yield from descend(prefix + (h,), p)

    yield from descend((), 1.0)


def enumerate_walks(
    model: MobilityModel, d: int, cap: int = DEFAULT_ENUMERATION_CAP
) -> Iterator[tuple[Walk, float]]:
    """Every walk with non-zero probability exactly once, lexicographically."""
    if d < 1:
        raise ValueError("d must be >= 1")
    check_enumeration_cap(model.n, d, cap)
    for steps, prob in _iter_walks(model, d):
        yield Walk(steps), prob


# --- first passage -----------------------------------------------------------

# per-model cache: (i, j) -> [r values indexed by l, taboo occupancy, last l]
_fp_caches: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()


def first_passage(model: MobilityModel, i: int, j: int, l: int) -> float:
    """Probability of contacting helper ``j`` for the first time ``l`` slots
    after a slot spent at helper ``i``.

    Computed by propagating the j-avoiding occupancy distribution (the
    restricted form of the Chapman-Kolmogorov recursion, which keeps the walk
    away from ``j`` until the final step); results are memoized per model.
    """
    if l < 1:
        raise ValueError("l must be >= 1")
    if not (0 <= i < model.n and 0 <= j < model.n):
        raise ValueError("helper index out of range")
    cache = _fp_caches.setdefault(model, {})
    entry = cache.get((i, j))
    if entry is None:
        r = [0.0, float(model.trans[i, j])]
        taboo = model.trans[i].copy()
        taboo[j] = 0.0
        entry = cache[(i, j)] = [r, taboo]
    r, taboo = entry
    while len(r) <= l:
        r.append(float(taboo @ model.trans[:, j]))
        taboo = taboo @ model.trans
        taboo[j] = 0.0
        entry[1] = taboo
    return r[l]


def _first_passage_vector(model: MobilityModel, i: int, j: int, lmax: int) -> np.ndarray:
    """r_{i,j}(l) for l = 0..lmax (index 0 unused, kept 0)."""
    out = np.zeros(lmax + 1)
    for l in range(1, lmax + 1):
        out[l] = first_passage(model, i, j, l)
    return out


# --- contact-count values ----------------------------------------------------


@dataclass(frozen=True, eq=False)
class ContactValueTable:
    """values[h, i, k-1] is proportional to the probability that a request
    raised somewhere is for file ``i`` and the walk contacts helper ``h`` at
    least ``k`` times before the deadline (the common positive prefactor of
    the stationary-chain formulation is dropped; it never affects an argmax).
    """

    values: np.ndarray  # shape (n, num_files, d)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 3:
            raise ValueError("contact value table must have shape (n, num_files, d)")
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def num_files(self) -> int:
        return self.values.shape[1]

    @property
    def d(self) -> int:
        return self.values.shape[2]

    def value(self, h: int, i: int, k: int) -> float:
        """Value for the k-th contact (k is 1-based); 0 beyond the deadline."""
        if k < 1:
            raise ValueError("contact count k is 1-based")
        if k > self.d:
            return 0.0
        return float(self.values[h, i, k - 1])


def _composition_sums(r_hh: np.ndarray, parts_max: int, budget: int) -> np.ndarray:
    """comp[m, B] = sum over compositions of at most B into m parts (each >= 1)
    of the product of r_hh over the parts; comp[0, B] = 1."""
    comp = np.zeros((parts_max + 1, budget + 1))
    comp[0, :] = 1.0
    for m in range(1, parts_max + 1):
        for b in range(1, budget + 1):
            acc = 0.0
            for l in range(1, b + 1):
                acc += r_hh[l] * comp[m - 1, b - l]
            comp[m, b] = acc
    return comp


def contact_value_table(
    model: MobilityModel, requests: RequestModel, d: int
) -> ContactValueTable:
    """Closed-form contact-count values via first-passage compositions.

    The k-th contact of helper ``h`` happens within the deadline iff a walk
    either starts at ``h`` and returns k-1 times, or starts elsewhere, hits
    ``h`` once and returns k-1 times, all within d-1 further slots; each gap
    is an independent first-passage time.
    """
    if d < 1:
        raise ValueError("d must be >= 1")
    n, num_files = model.n, requests.num_files
    if requests.n != n:
        raise ValueError("request model and mobility model disagree on n")
    values = np.zeros((n, num_files, d))
    budget = d - 1
    for h in range(n):
        r_hh = _first_passage_vector(model, h, h, budget)
        comp = _composition_sums(r_hh, d - 1, budget)
        # walks starting at h need k-1 returns within the remaining budget
        same_start = np.array([comp[k - 1, budget] for k in range(1, d + 1)])
        values[h] += np.outer(model.init[h] * requests.per_helper[h], same_start)
        for hp in range(n):
            if hp == h or model.init[hp] == 0.0:
                continue
            r_cross = _first_passage_vector(model, hp, h, budget)
            cross = np.zeros(d)
            for k in range(1, d + 1):
                acc = 0.0
                for l1 in range(1, budget + 1):
                    acc += r_cross[l1] * comp[k - 1, budget - l1]
                cross[k - 1] = acc
            values[h] += np.outer(model.init[hp] * requests.per_helper[hp], cross)
    return ContactValueTable(values)


def contact_value_oracle(
    model: MobilityModel,
    requests: RequestModel,
    d: int,
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> ContactValueTable:
    """Brute-force validator: the same table by exhaustive walk enumeration."""
    if d < 1:
        raise ValueError("d must be >= 1")
    n, num_files = model.n, requests.num_files
    if requests.n != n:
        raise ValueError("request model and mobility model disagree on n")
    check_enumeration_cap(n, d, cap)
    values = np.zeros((n, num_files, d))
    for steps, prob in _iter_walks(model, d):
        weights = prob * requests.per_helper[steps[0]]
        for h, count in Counter(steps).items():
            values[h, :, :count] += weights[:, None]
    return ContactValueTable(values)
