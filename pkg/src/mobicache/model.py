"""Domain types (helpers, catalog, mobility chain, request distributions) and
their constructors from configuration, Zipf-Mandelbrot parameters, or contact
traces."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

# Probability vectors/rows whose sums deviate from 1 by less than this are
# renormalized; larger deviations are rejected.
PROB_TOL = 1e-9


def _as_probability_vector(v, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-D vector")
    if np.any(v < 0):
        raise ValueError(f"{name} has negative entries")
    s = v.sum()
    if abs(s - 1.0) > PROB_TOL:
        raise ValueError(f"{name} sums to {s!r}, expected 1 within {PROB_TOL}")
    return v / s


def _as_stochastic_matrix(m, name: str) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
        raise ValueError(f"{name} must be a square matrix")
    if np.any(m < 0):
        raise ValueError(f"{name} has negative entries")
    sums = m.sum(axis=1)
    if np.any(np.abs(sums - 1.0) > PROB_TOL):
        bad = int(np.argmax(np.abs(sums - 1.0)))
        raise ValueError(f"{name} row {bad} sums to {sums[bad]!r}, expected 1 within {PROB_TOL}")
    return m / sums[:, None]


@dataclass(frozen=True, eq=False)
class Catalog:
    """Static collection of content files, sizes in bytes."""

    file_sizes: np.ndarray

    def __post_init__(self):
        sizes = np.asarray(self.file_sizes, dtype=np.int64)
        if sizes.ndim != 1 or sizes.size == 0:
            raise ValueError("catalog needs at least one file")
        if np.any(sizes <= 0):
            raise ValueError("file sizes must be positive")
        object.__setattr__(self, "file_sizes", sizes)

    @property
    def num_files(self) -> int:
        return int(self.file_sizes.size)

    @property
    def total_bytes(self) -> int:
        return int(self.file_sizes.sum())


@dataclass(frozen=True, eq=False)
class HelperSet:
    """Per-helper cache capacities and per-slot download budgets, in bytes."""

    cache_capacities: np.ndarray
    slot_budgets: np.ndarray

    def __post_init__(self):
        caps = np.asarray(self.cache_capacities, dtype=np.int64)
        budgets = np.asarray(self.slot_budgets, dtype=np.int64)
        if caps.ndim != 1 or caps.size == 0 or budgets.shape != caps.shape:
            raise ValueError("capacities and slot budgets must be equal-length non-empty vectors")
        if np.any(caps < 0):
            raise ValueError("cache capacities must be non-negative")
        if np.any(budgets <= 0):
            raise ValueError("slot budgets must be positive")
        object.__setattr__(self, "cache_capacities", caps)
        object.__setattr__(self, "slot_budgets", budgets)

    @property
    def n(self) -> int:
        return int(self.cache_capacities.size)


@dataclass(frozen=True, eq=False)
class MobilityModel:
    """Time-homogeneous discrete-time Markov chain over the helpers.

    ``init[h]`` is the probability a walk starts at helper ``h``; ``trans`` is
    the row-stochastic transition matrix between consecutive time slots.
    """

    init: np.ndarray
    trans: np.ndarray

    def __post_init__(self):
        init = _as_probability_vector(self.init, "initial distribution")
        trans = _as_stochastic_matrix(self.trans, "transition matrix")
        if trans.shape[0] != init.size:
            raise ValueError("initial distribution and transition matrix disagree on n")
        object.__setattr__(self, "init", init)
        object.__setattr__(self, "trans", trans)

    @property
    def n(self) -> int:
        return int(self.init.size)


@dataclass(frozen=True, eq=False)
class RequestModel:
    """Row ``h`` is the file request distribution around helper ``h``."""

    per_helper: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.per_helper, dtype=float)
        if m.ndim != 2 or m.size == 0:
            raise ValueError("request model must be a non-empty n x num_files matrix")
        if np.any(m < 0):
            raise ValueError("request probabilities must be non-negative")
        sums = m.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > PROB_TOL):
            bad = int(np.argmax(np.abs(sums - 1.0)))
            raise ValueError(f"request row {bad} sums to {sums[bad]!r}, expected 1 within {PROB_TOL}")
        object.__setattr__(self, "per_helper", m / sums[:, None])

    @property
    def n(self) -> int:
        return int(self.per_helper.shape[0])

    @property
    def num_files(self) -> int:
        return int(self.per_helper.shape[1])


@dataclass(frozen=True)
class TraceRecord:
    user_id: str
    timestamp: float
    helper_id: int


@dataclass(frozen=True, eq=False)
class TraceLog:
    """Contact events, sorted per user by timestamp. Helper ids are 0-based."""

    records: tuple = field(default_factory=tuple)

    def __post_init__(self):
        recs = tuple(self.records)
        for r in recs:
            if r.helper_id < 0:
                raise ValueError(f"negative helper id in trace: {r.helper_id}")
        # stable sort keeps input order for simultaneous events of one user
        by_user: dict[str, list[TraceRecord]] = {}
        for r in recs:
            by_user.setdefault(r.user_id, []).append(r)
        for events in by_user.values():
            events.sort(key=lambda r: r.timestamp)
        object.__setattr__(self, "records", recs)
        object.__setattr__(self, "_by_user", by_user)

    def per_user(self) -> dict[str, list[TraceRecord]]:
        return {u: list(evts) for u, evts in self._by_user.items()}

    def __len__(self) -> int:
        return len(self.records)


def build_zipf_mandelbrot(num_files: int, shape: float, shift: float = 0.0) -> np.ndarray:
    """Popularity vector with entry ``i`` (1-based rank) proportional to
    ``1/(i+shift)**shape``, normalized to sum 1."""
    if num_files < 1:
        raise ValueError("num_files must be >= 1")
    if shape <= 0:
        raise ValueError("Zipf-Mandelbrot shape must be positive")
    if shift < 0:
        raise ValueError("Zipf-Mandelbrot shift must be non-negative")
    ranks = np.arange(1, num_files + 1, dtype=float)
    weights = (ranks + shift) ** -shape
    return weights / weights.sum()


def uniform_request_model(popularity, n: int) -> RequestModel:
    """Request model with the same popularity distribution around every helper."""
    popularity = _as_probability_vector(popularity, "popularity")
    if n < 1:
        raise ValueError("n must be >= 1")
    return RequestModel(np.tile(popularity, (n, 1)))


def estimate_from_trace(trace: TraceLog, slot_duration: float, n: int) -> MobilityModel:
    """Estimate a MobilityModel from a contact trace.

    A contact event belongs to slot ``floor(timestamp / slot_duration)``.
    Per user: the first record's helper counts toward the initial
    distribution; each subsequent record at a *different* helper counts one
    transition from the current helper; every slot in between with no record
    counts one self-transition (the user is assumed to stay connected).
    Records re-confirming the current helper add no transition but extend the
    known horizon. Helpers with no outgoing counts get a self-loop row.
    """
    if slot_duration <= 0:
        raise ValueError("slot_duration must be positive")
    if n < 1:
        raise ValueError("n must be >= 1")
    if len(trace) == 0:
        raise ValueError("empty trace")
    init_counts = np.zeros(n)
    counts = np.zeros((n, n))
    for events in trace.per_user().values():
        first = events[0]
        if first.helper_id >= n:
            raise ValueError(f"helper id {first.helper_id} out of range for n={n}")
        init_counts[first.helper_id] += 1
        current = first.helper_id
        prev_slot = int(first.timestamp // slot_duration)
        for rec in events[1:]:
            if rec.helper_id >= n:
                raise ValueError(f"helper id {rec.helper_id} out of range for n={n}")
            slot = int(rec.timestamp // slot_duration)
            for _ in range(prev_slot + 1, slot):
                counts[current, current] += 1
            if rec.helper_id != current:
                counts[current, rec.helper_id] += 1
                current = rec.helper_id
            prev_slot = slot
    init = init_counts / init_counts.sum()
    row_sums = counts.sum(axis=1)
    trans = np.eye(n)
    visited = row_sums > 0
    trans[visited] = counts[visited] / row_sums[visited, None]
    return MobilityModel(init, trans)


def synthetic_mobility(
    n: int,
    locality: float = 0.5,
    grid_cols: int | None = None,
    cluster_size: int | None = None,
    jitter: float = 0.0,
    seed: int = 0,
) -> MobilityModel:
    """Synthetic stand-in for trace-derived mobility; initial distribution is
    uniform.

    Helpers sit on a grid of ``grid_cols`` columns (row-major); a ``locality``
    fraction of each row's transition mass stays on the self-loop and the rest
    splits equally among the 4-neighborhood. With ``cluster_size`` set, the
    helpers are instead partitioned into independent clusters of that size
    (consecutive indices) and the non-self mass splits among cluster partners:
    users then never leave their cluster, the strong-locality limit.
    ``jitter`` blends each row toward a seeded Dirichlet draw over the same
    support, breaking the grid's perfect symmetry when wanted.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0.0 <= locality <= 1.0:
        raise ValueError("locality must lie in [0, 1]")
    if not 0.0 <= jitter <= 1.0:
        raise ValueError("jitter must lie in [0, 1]")
    supports: list[list[int]] = []
    if cluster_size is not None:
        if cluster_size < 1 or n % cluster_size != 0:
            raise ValueError("cluster_size must divide n")
        for h in range(n):
            base = (h // cluster_size) * cluster_size
            supports.append([base + j for j in range(cluster_size) if base + j != h])
    else:
        cols = grid_cols if grid_cols is not None else max(1, int(np.floor(np.sqrt(n))))
        rows = -(-n // cols)
        for h in range(n):
            r, c = divmod(h, cols)
            nbrs = []
            for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                rr, cc = r + dr, c + dc
                hh = rr * cols + cc
                if 0 <= rr < rows and 0 <= cc < cols and hh < n:
                    nbrs.append(hh)
            supports.append(nbrs)
    trans = np.zeros((n, n))
    rng = np.random.default_rng(seed)
    for h, nbrs in enumerate(supports):
        if not nbrs:
            trans[h, h] = 1.0
            continue
        trans[h, h] = locality
        for p in nbrs:
            trans[h, p] = (1.0 - locality) / len(nbrs)
        if jitter > 0.0:
            support = [h] + nbrs
            noise = rng.dirichlet(np.ones(len(support)))
            for idx, p in enumerate(support):
                trans[h, p] = (1.0 - jitter) * trans[h, p] + jitter * noise[idx]
    return MobilityModel(np.full(n, 1.0 / n), trans)


def generate_trace(
    model: MobilityModel,
    num_users: int,
    d: int,
    slot_duration: float,
    seed: int,
) -> TraceLog:
    """Sample ``num_users`` walks of ``d`` slots and emit a contact trace.

    A user logs a record on its first contact and on every helper change;
    slots where it stays put produce no record. A closing record at the same
    helper one slot past the walk end marks the walk horizon, so estimation
    can account for trailing stay-put slots.
    """
    if num_users < 1 or d < 1:
        raise ValueError("num_users and d must be >= 1")
    rng = np.random.default_rng(seed)
    cum_init = np.cumsum(model.init)
    cum_trans = np.cumsum(model.trans, axis=1)
    records = []
    last = model.n - 1  # guards against CDF tails that round just below 1.0
    uniforms = rng.random((num_users, d))
    for u in range(num_users):
        current = min(int(np.searchsorted(cum_init, uniforms[u, 0], side="right")), last)
        records.append(TraceRecord(f"u{u}", 0.0, current))
        for t in range(1, d):
            nxt = min(int(np.searchsorted(cum_trans[current], uniforms[u, t], side="right")), last)
            if nxt != current:
                records.append(TraceRecord(f"u{u}", t * slot_duration, nxt))
                current = nxt
        records.append(TraceRecord(f"u{u}", d * slot_duration, current))
    return TraceLog(tuple(records))


# --- file formats -----------------------------------------------------------

TRACE_CSV_HEADER = ["user_id", "timestamp_s", "helper_id"]


def read_trace_csv(path) -> TraceLog:
    """Read a trace CSV with header ``user_id,timestamp_s,helper_id``."""
    records = []
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: empty trace file")
        if [h.strip() for h in header] != TRACE_CSV_HEADER:
            raise ValueError(f"{path}: expected header {','.join(TRACE_CSV_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise ValueError(f"{path}:{lineno}: expected 3 columns")
            try:
                records.append(TraceRecord(row[0], float(row[1]), int(row[2])))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc
    return TraceLog(tuple(records))


def write_trace_csv(trace: TraceLog, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(TRACE_CSV_HEADER)
        for r in trace.records:
            writer.writerow([r.user_id, repr(float(r.timestamp)), r.helper_id])


def model_to_json(model: MobilityModel, slot_duration: float) -> dict:
    return {
        "n": model.n,
        "init": model.init.tolist(),
        "trans": model.trans.tolist(),
        "slot_duration_s": slot_duration,
    }


def model_from_json(obj: dict) -> tuple[MobilityModel, float]:
    model = MobilityModel(np.asarray(obj["init"]), np.asarray(obj["trans"]))
    if model.n != int(obj["n"]):
        raise ValueError("model JSON field n disagrees with array shapes")
    return model, float(obj["slot_duration_s"])


def save_model(model: MobilityModel, slot_duration: float, path) -> None:
    Path(path).write_text(
        json.dumps(model_to_json(model, slot_duration), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )


def load_model(path) -> tuple[MobilityModel, float]:
    return model_from_json(json.loads(Path(path).read_text(encoding="utf-8")))
