"""Exact coded allocation: the mixed-integer program over enumerated walks,
solved by branch and bound on LP relaxations.

Two lossless presolves keep desk-scale instances fast: download-success
indicators whose walk provably cannot reach a full file are fixed to zero, and
the constraint graph is split into independent blocks (helpers that never
co-occur in a positive-probability walk never couple)."""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np

from .aca import aca_allocate
from .allocation import SUCCESS_SLACK, Allocation
from .lp import LpProblem, solve_lp
from .model import Catalog, HelperSet, MobilityModel, RequestModel
from .walks import DEFAULT_ENUMERATION_CAP, Walk, contact_value_table, enumerate_walks


@dataclass(frozen=True, eq=False)
class MipProblem:
    """Standard-form MIP plus the bookkeeping to map columns back to the model.

    Column layout: all x[h, i], then all u[h, i, k], then one success
    indicator T per (file, walk) pair with positive objective weight.
    """

    lp: LpProblem
    binary_vars: tuple
    x_col: dict
    u_col: dict
    t_col: dict
    t_row: dict                # t column -> index of its coupling row
    walk_index: tuple
    walk_probs: np.ndarray
    t_weights: dict            # t column -> objective weight P(v) * P_{i/V1}
    objective_constant: float  # failure probability = constant + lp objective
    model: MobilityModel
    requests: RequestModel
    helpers: HelperSet
    catalog: Catalog
    d: int


@dataclass(frozen=True)
class BnbOptions:
    integrality_tol: float = 1e-6
    objective_gap_tol: float = 1e-9
    node_limit: int = 100_000
    warm_start: Allocation | None = None

    def __post_init__(self):
        if self.integrality_tol <= 0 or self.objective_gap_tol <= 0:
            raise ValueError("tolerances must be positive")


@dataclass(frozen=True)
class GapReport:
    objective: float
    lower_bound: float      # best bound at termination
    gap: float
    relaxation_bound: float  # root LP bound before any branching
    nodes: int
    status: str             # "optimal" | "node_limit"


def build_mip(
    model: MobilityModel,
    requests: RequestModel,
    helpers: HelperSet,
    catalog: Catalog,
    d: int,
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> MipProblem:
    """Formulate the exact allocation problem over all positive-probability
    walks. Indicator terms with zero objective weight are dropped."""
    n, num_files = model.n, catalog.num_files
    if requests.n != n or helpers.n != n or requests.num_files != num_files:
        raise ValueError("instance dimensions disagree")
    walks: list[Walk] = []
    probs: list[float] = []
    for walk, prob in enumerate_walks(model, d, cap):
        walks.append(walk)
        probs.append(prob)

    x_col = {(h, i): h * num_files + i for h in range(n) for i in range(num_files)}
    nx = len(x_col)
    u_col = {}
    for h in range(n):
        for i in range(num_files):
            for k in range(1, d + 1):
                u_col[(h, i, k)] = nx + len(u_col)
    nu = len(u_col)
    t_col = {}
    t_weights = {}
    constant = 0.0
    for widx, (walk, prob) in enumerate(zip(walks, probs)):
        first = walk.steps[0]
        for i in range(num_files):
            w = prob * float(requests.per_helper[first, i])
            if w > 0.0:
                col = nx + nu + len(t_col)
                t_col[(i, widx)] = col
                t_weights[col] = w
                constant += w

    total = nx + nu + len(t_col)
    cost = np.zeros(total)
    bounds = np.zeros((total, 2))
    bounds[:nx, 1] = 1.0
    for (h, i, _k), col in u_col.items():
        bounds[col, 1] = helpers.slot_budgets[h] / catalog.file_sizes[i]
    for col, w in t_weights.items():
        bounds[col, 1] = 1.0
        cost[col] = -w

    rows = []
    rhs = []
    for h in range(n):  # cache capacity
        row = np.zeros(total)
        for i in range(num_files):
            row[x_col[(h, i)]] = float(catalog.file_sizes[i])
        rows.append(row)
        rhs.append(float(helpers.cache_capacities[h]))
    for h in range(n):  # downloads never exceed the stored fraction
        for i in range(num_files):
            row = np.zeros(total)
            for k in range(1, d + 1):
                row[u_col[(h, i, k)]] = 1.0
            row[x_col[(h, i)]] = -1.0
            rows.append(row)
            rhs.append(0.0)
    t_row = {}
    for (i, widx), col in t_col.items():  # success needs a full file's worth
        row = np.zeros(total)
        row[col] = 1.0
        for h, count in walks[widx].counts().items():
            for k in range(1, count + 1):
                row[u_col[(h, i, k)]] -= 1.0
        t_row[col] = len(rows)
        rows.append(row)
        rhs.append(0.0)

    lp = LpProblem(
        cost, np.vstack(rows), np.asarray(rhs), ("<=",) * len(rows), bounds
    )
    return MipProblem(
        lp=lp,
        binary_vars=tuple(sorted(t_col.values())),
        x_col=x_col,
        u_col=u_col,
        t_col=t_col,
        t_row=t_row,
        walk_index=tuple(walks),
        walk_probs=np.asarray(probs),
        t_weights=t_weights,
        objective_constant=constant,
        model=model,
        requests=requests,
        helpers=helpers,
        catalog=catalog,
        d=d,
    )


def _max_download(mip: MipProblem, i: int, widx: int) -> float:
    """Upper bound on the fraction of file i fetchable along a walk, from the
    box and capacity constraints alone."""
    size = float(mip.catalog.file_sizes[i])
    total = 0.0
    for h, count in mip.walk_index[widx].counts().items():
        x_cap = min(1.0, float(mip.helpers.cache_capacities[h]) / size)
        total += min(x_cap, count * float(mip.helpers.slot_budgets[h]) / size)
    return total


def _downloaded(mip: MipProblem, x: np.ndarray, i: int, widx: int) -> float:
    """Fraction of file i fetched along a walk under allocation x (the
    telescoped schedule: min of stored fraction and contacts times budget)."""
    size = float(mip.catalog.file_sizes[i])
    total = 0.0
    for h, count in mip.walk_index[widx].counts().items():
        total += min(float(x[h, i]), count * float(mip.helpers.slot_budgets[h]) / size)
    return total


@dataclass
class _Component:
    cols: list            # global column indices, sorted
    rows: list            # global row indices, sorted
    t_locals: list        # local indices of free T columns
    pairs: list           # (weight, local t col, file, walk index)
    offset: float         # sum of weights of the component's T columns
    lp: LpProblem = None
    col_pos: dict = field(default_factory=dict)


def _split_components(mip: MipProblem, fixed_zero: set) -> list[_Component]:
    """Connected components of the constraint graph, ignoring rows made
    vacuous by indicators fixed to zero."""
    total = mip.lp.num_vars
    parent = list(range(total))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    A = mip.lp.constraint_matrix
    row_cols = []
    skip_rows = {mip.t_row[c] for c in fixed_zero}
    for r in range(A.shape[0]):
        cols = [c for c in np.nonzero(A[r])[0] if c not in fixed_zero]
        row_cols.append(cols)
        if r in skip_rows:
            continue
        for c in cols[1:]:
            union(cols[0], c)

    groups: dict[int, _Component] = {}
    for c in range(total):
        if c in fixed_zero:
            continue
        root = find(c)
        comp = groups.get(root)
        if comp is None:
            comp = groups[root] = _Component([], [], [], [], 0.0)
        comp.cols.append(c)
    col_to_comp = {}
    for comp in groups.values():
        comp.cols.sort()
        for c in comp.cols:
            col_to_comp[c] = comp
    for r in range(A.shape[0]):
        if r in skip_rows or not row_cols[r]:
            continue
        col_to_comp[row_cols[r][0]].rows.append(r)

    out = sorted(groups.values(), key=lambda comp: comp.cols[0])
    for comp in out:
        comp.col_pos = {c: idx for idx, c in enumerate(comp.cols)}
        sub_A = A[np.ix_(comp.rows, comp.cols)]
        comp.lp = LpProblem(
            mip.lp.objective[comp.cols],
            sub_A,
            mip.lp.rhs[comp.rows],
            ("<=",) * len(comp.rows),
            mip.lp.bounds[comp.cols],
        )
        for (i, widx), col in mip.t_col.items():
            if col in comp.col_pos:
                w = mip.t_weights[col]
                comp.t_locals.append(comp.col_pos[col])
                comp.pairs.append((w, comp.col_pos[col], i, widx))
                comp.offset += w
    return out


def _component_incumbent_value(mip: MipProblem, comp: _Component, x: np.ndarray) -> float:
    """Failure mass of the component's (file, walk) pairs under allocation x."""
    value = 0.0
    for w, _local, i, widx in comp.pairs:
        if _downloaded(mip, x, i, widx) < 1.0 - SUCCESS_SLACK:
            value += w
    return value


def _extract_x(mip: MipProblem, comp: _Component, values: np.ndarray, x: np.ndarray) -> None:
    for (h, i), col in mip.x_col.items():
        pos = comp.col_pos.get(col)
        if pos is not None:
            x[h, i] = min(max(values[pos], 0.0), 1.0)


def _solve_component(
    mip: MipProblem, comp: _Component, warm_x: np.ndarray, opts: BnbOptions
) -> tuple[np.ndarray, float, float, float, int, str]:
    """Branch and bound over one independent block.

    Returns (x matrix contribution, incumbent mass, lower bound, root bound,
    nodes solved, status). The lower bound is the smallest bound among
    subtrees that were cut off rather than explored, so the reported gap is an
    honest optimality certificate."""
    inc_x = np.zeros_like(warm_x)
    _extract_x_from_matrix(mip, comp, warm_x, inc_x)
    inc_value = _component_incumbent_value(mip, comp, inc_x)

    if not comp.t_locals:
        return np.zeros_like(warm_x), 0.0, 0.0, 0.0, 0, "optimal"

    weight_of = {loc: w for w, loc, _i, _w in comp.pairs}

    root_sol = solve_lp(comp.lp)
    if root_sol.status != "optimal":
        raise RuntimeError(f"component relaxation unexpectedly {root_sol.status}")
    root_bound = comp.offset + root_sol.objective_value

    heap: list = []
    counter = 0
    nodes = 1
    heapq.heappush(heap, (root_bound, counter, {}, root_sol))
    status = "optimal"
    floor = np.inf  # min bound among subtrees cut off without exploration

    while heap:
        bound, _tie, fixed, sol = heapq.heappop(heap)
        if bound >= inc_value - opts.objective_gap_tol:
            floor = min(floor, bound)  # rest of the heap is no better
            break
        if nodes + 2 > opts.node_limit:
            status = "node_limit"
            floor = min(floor, bound)
            break
        frac = [
            (local, sol.values[local])
            for local in comp.t_locals
            if opts.integrality_tol < sol.values[local] < 1.0 - opts.integrality_tol
        ]
        if not frac:
            cand = np.zeros_like(warm_x)
            _extract_x(mip, comp, sol.values, cand)
            cand_value = _component_incumbent_value(mip, comp, cand)
            if cand_value < inc_value - opts.objective_gap_tol:
                inc_value = cand_value
                inc_x = cand
            continue
        branch_local = max(
            frac,
            key=lambda lv: (weight_of[lv[0]] * min(lv[1], 1.0 - lv[1]), -lv[0]),
        )[0]
        for value in (0.0, 1.0):
            child_fixed = dict(fixed)
            child_fixed[branch_local] = value
            child_bounds = comp.lp.bounds.copy()
            for loc, v in child_fixed.items():
                child_bounds[loc] = (v, v)
            child_lp = LpProblem(
                comp.lp.objective,
                comp.lp.constraint_matrix,
                comp.lp.rhs,
                comp.lp.senses,
                child_bounds,
            )
            child_sol = solve_lp(child_lp)
            nodes += 1
            if child_sol.status != "optimal":
                continue  # infeasible branch: nothing cut off
            child_bound = comp.offset + child_sol.objective_value
            if child_bound >= inc_value - opts.objective_gap_tol:
                floor = min(floor, child_bound)
                continue
            counter += 1
            heapq.heappush(heap, (child_bound, counter, child_fixed, child_sol))

    if status == "node_limit" and heap:
        floor = min(floor, min(b for b, *_ in heap))
    lower_bound = min(inc_value, floor)
    return inc_x, inc_value, lower_bound, root_bound, nodes, status


def _extract_x_from_matrix(mip: MipProblem, comp: _Component, src: np.ndarray, dst: np.ndarray) -> None:
    for (h, i), col in mip.x_col.items():
        if col in comp.col_pos:
            dst[h, i] = src[h, i]


def solve_branch_and_bound(
    mip: MipProblem, opts: BnbOptions | None = None
) -> tuple[Allocation, float, GapReport]:
    """Certified optimum of the allocation MIP.

    Best-bound-first search; branching picks the fractional indicator with the
    largest objective weight times fractionality (ties: lowest column). The
    initial incumbent comes from the greedy coded allocation unless a warm
    start is supplied. Deterministic throughout.
    """
    opts = opts or BnbOptions()
    if opts.warm_start is not None:
        warm = opts.warm_start
    else:
        values = contact_value_table(mip.model, mip.requests, mip.d)
        warm = aca_allocate(mip.helpers, mip.catalog, values, mip.d)
    if warm.x.shape != (mip.helpers.n, mip.catalog.num_files):
        raise ValueError("warm start dimensions disagree with the instance")

    fixed_zero = {
        col
        for (i, widx), col in mip.t_col.items()
        if _max_download(mip, i, widx) < 1.0 - SUCCESS_SLACK
    }
    fixed_mass = sum(mip.t_weights[c] for c in fixed_zero)

    components = _split_components(mip, fixed_zero)
    x_full = np.zeros((mip.helpers.n, mip.catalog.num_files))
    objective = fixed_mass
    lower = fixed_mass
    relaxation = fixed_mass
    nodes = 0
    status = "optimal"
    for comp in components:
        cx, cval, clow, croot, cnodes, cstat = _solve_component(mip, comp, warm.x, opts)
        _extract_x_from_matrix(mip, comp, cx, x_full)
        objective += cval
        lower += clow
        relaxation += croot
        nodes += cnodes
        if cstat != "optimal":
            status = "node_limit"

    report = GapReport(
        objective=float(objective),
        lower_bound=float(lower),
        gap=float(max(0.0, objective - lower)),
        relaxation_bound=float(relaxation),
        nodes=nodes,
        status=status,
    )
    return Allocation(x_full), float(objective), report
