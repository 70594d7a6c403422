"""Dense linear-programming core: two-phase primal simplex with Bland's
anti-cycling rule and implicit variable upper bounds.

Solves  min c @ x  s.t.  A x {<=,=,>=} b,  lower <= x <= upper.
Deliberately dense and single-threaded: the optimization instances in this
package are small, and correctness plus determinism beat speed here.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InternalConsistencyError

PIVOT_TOL = 1e-9
FEAS_TOL = 1e-7

_AT_LOWER, _AT_UPPER, _BASIC = 0, 1, 2

SENSES = ("<=", "=", ">=")


@dataclass(frozen=True, eq=False)
class LpProblem:
    objective: np.ndarray          # (q,) cost vector, minimized
    constraint_matrix: np.ndarray  # (m, q)
    rhs: np.ndarray                # (m,)
    senses: tuple                  # per-row "<=", "=", ">="
    bounds: np.ndarray             # (q, 2); lower finite, upper may be np.inf

    def __post_init__(self):
        c = np.asarray(self.objective, dtype=float)
        a = np.asarray(self.constraint_matrix, dtype=float).reshape(len(self.rhs), c.size)
        b = np.asarray(self.rhs, dtype=float)
        senses = tuple(self.senses)
        bounds = np.asarray(self.bounds, dtype=float).reshape(c.size, 2)
        if len(senses) != b.size:
            raise ValueError("one sense per constraint row required")
        for s in senses:
            if s not in SENSES:
                raise ValueError(f"unknown sense {s!r}")
        if np.any(~np.isfinite(bounds[:, 0])):
            raise ValueError("lower bounds must be finite")
        if np.any(bounds[:, 0] > bounds[:, 1]):
            raise ValueError("lower bound exceeds upper bound")
        object.__setattr__(self, "objective", c)
        object.__setattr__(self, "constraint_matrix", a)
        object.__setattr__(self, "rhs", b)
        object.__setattr__(self, "senses", senses)
        object.__setattr__(self, "bounds", bounds)

    @property
    def num_vars(self) -> int:
        return int(self.objective.size)

    @property
    def num_rows(self) -> int:
        return int(self.rhs.size)


@dataclass(frozen=True)
class LpSolution:
    status: str  # "optimal" | "infeasible" | "unbounded"
    values: np.ndarray = field(default_factory=lambda: np.zeros(0))
    objective_value: float = float("nan")


class _Tableau:
    """Mutable simplex state over the equality form [A | slacks | artificials]."""

    def __init__(self, T, xB, basis, vstat, ub, allowed):
        self.T = T            # (m, ncols) current B^inv A
        self.xB = xB          # (m,) basic variable values
        self.basis = basis    # (m,) column index basic in each row
        self.vstat = vstat    # (ncols,) _AT_LOWER / _AT_UPPER / _BASIC
        self.ub = ub          # (ncols,) upper bounds in shifted space
        self.allowed = allowed  # (ncols,) eligible to enter the basis

    def run(self, z, max_iter):
        """Bland-rule simplex loop on reduced costs ``z`` (mutated in place).
        Returns "optimal" or "unbounded"."""
        T, xB, basis, vstat, ub = self.T, self.xB, self.basis, self.vstat, self.ub
        m = T.shape[0]
        for _ in range(max_iter):
            enterable = self.allowed & (
                ((vstat == _AT_LOWER) & (z < -PIVOT_TOL) & (ub > 0))
                | ((vstat == _AT_UPPER) & (z > PIVOT_TOL))
            )
            if not enterable.any():
                return "optimal"
            e = int(np.argmax(enterable))  # lowest eligible index (Bland)
            from_lower = vstat[e] == _AT_LOWER
            w = -T[:, e] if from_lower else T[:, e].copy()

            # ratio test: how far can the entering variable move off its bound
            t_limit = ub[e]  # moving all the way flips to the opposite bound
            leave_row = -1
            leave_to_upper = False
            for r in range(m):
                if w[r] < -PIVOT_TOL:
                    limit = max(xB[r], 0.0) / -w[r]
                    hits_upper = False
                elif w[r] > PIVOT_TOL and np.isfinite(ub[basis[r]]):
                    limit = max(ub[basis[r]] - xB[r], 0.0) / w[r]
                    hits_upper = True
                else:
                    continue
                if limit < t_limit - 1e-12 or (
                    limit < t_limit + 1e-12
                    and leave_row >= 0
                    and basis[r] < basis[leave_row]
                ):
                    t_limit = limit
                    leave_row = r
                    leave_to_upper = hits_upper
            if not np.isfinite(t_limit):
                return "unbounded"

            if leave_row < 0:
                # bound flip: the entering variable traverses to its other bound
                xB += w * t_limit
                vstat[e] = _AT_UPPER if from_lower else _AT_LOWER
                continue

            xB += w * t_limit
            enter_value = t_limit if from_lower else ub[e] - t_limit
            lv = basis[leave_row]
            vstat[lv] = _AT_UPPER if leave_to_upper else _AT_LOWER
            basis[leave_row] = e
            vstat[e] = _BASIC
            xB[leave_row] = enter_value
            self._pivot(leave_row, e, z)
        raise InternalConsistencyError("simplex iteration limit exceeded")

    def _pivot(self, row, col, z):
        T = self.T
        T[row] /= T[row, col]
        factors = T[:, col].copy()
        factors[row] = 0.0
        T -= np.outer(factors, T[row])
        z -= z[col] * T[row]

    def drive_out_artificials(self, num_real):
        """After phase 1, remove artificial columns from the basis.

        The basic artificial on such a row is (numerically) zero, so the swap
        barely perturbs the point; rows with no nonzero real coefficient are
        linearly dependent and get dropped.
        """
        drop = []
        dummy = np.zeros(self.T.shape[1])
        for r in range(self.T.shape[0]):
            if self.basis[r] < num_real:
                continue
            candidates = np.nonzero(
                (np.abs(self.T[r, :num_real]) > PIVOT_TOL)
                & (self.vstat[:num_real] != _BASIC)
            )[0]
            if candidates.size == 0:
                drop.append(r)
                continue
            e = int(candidates[0])
            art = self.basis[r]
            delta = self.xB[r] / self.T[r, e]
            base = 0.0 if self.vstat[e] == _AT_LOWER else self.ub[e]
            self.xB -= self.T[:, e] * delta
            self.xB[r] = base + delta
            self.basis[r] = e
            self.vstat[e] = _BASIC
            self.vstat[art] = _AT_LOWER
            self._pivot(r, e, dummy)
        if drop:
            keep = np.ones(self.T.shape[0], dtype=bool)
            keep[drop] = False
            self.T = self.T[keep]
            self.xB = self.xB[keep]
            self.basis = self.basis[keep]


def solve_lp(problem: LpProblem, max_iter: int = 200_000) -> LpSolution:
    """Vertex-optimal solution via two-phase primal simplex.

    Deterministic for a fixed instance: Bland's rule everywhere, ties broken
    by lowest column / basis index.
    """
    q, m = problem.num_vars, problem.num_rows
    c = problem.objective
    lower = problem.bounds[:, 0]
    upper = problem.bounds[:, 1]

    if q == 0:
        ok = all(
            (s == "<=" and b >= -FEAS_TOL)
            or (s == ">=" and b <= FEAS_TOL)
            or (s == "=" and abs(b) <= FEAS_TOL)
            for s, b in zip(problem.senses, problem.rhs)
        )
        return LpSolution("optimal" if ok else "infeasible", np.zeros(0), 0.0)

    # shift to y = x - lower, append one slack per inequality row
    slack_rows = [r for r, s in enumerate(problem.senses) if s != "="]
    nslack = len(slack_rows)
    ncols = q + nslack
    A = np.zeros((m, ncols))
    A[:, :q] = problem.constraint_matrix
    for idx, r in enumerate(slack_rows):
        A[r, q + idx] = 1.0 if problem.senses[r] == "<=" else -1.0
    b = problem.rhs - problem.constraint_matrix @ lower
    ub = np.concatenate([upper - lower, np.full(nslack, np.inf)])

    neg = b < 0
    A[neg] *= -1.0
    b = np.where(neg, -b, b)

    # initial basis: slacks whose post-negation coefficient is +1, else artificials
    basis = np.full(m, -1, dtype=np.int64)
    for idx, r in enumerate(slack_rows):
        if A[r, q + idx] > 0:
            basis[r] = q + idx
    art_rows = [r for r in range(m) if basis[r] < 0]
    nart = len(art_rows)
    if nart:
        art_block = np.zeros((m, nart))
        for k, r in enumerate(art_rows):
            art_block[r, k] = 1.0
            basis[r] = ncols + k
        A = np.hstack([A, art_block])
        ub = np.concatenate([ub, np.full(nart, np.inf)])
    total = ncols + nart

    vstat = np.full(total, _AT_LOWER, dtype=np.int8)
    vstat[basis] = _BASIC
    allowed = np.ones(total, dtype=bool)
    tab = _Tableau(A.copy(), b.copy(), basis, vstat, ub, allowed)

    if nart:
        c1 = np.zeros(total)
        c1[ncols:] = 1.0
        z1 = c1 - c1[tab.basis] @ tab.T
        status = tab.run(z1, max_iter)
        if status != "optimal":
            raise InternalConsistencyError("phase 1 cannot be unbounded")
        phase1_value = float(np.sum(tab.xB[np.asarray(tab.basis) >= ncols]))
        if phase1_value > FEAS_TOL:
            return LpSolution("infeasible")
        tab.drive_out_artificials(ncols)
        tab.allowed = np.zeros(total, dtype=bool)
        tab.allowed[:ncols] = True

    c_full = np.zeros(total)
    c_full[:q] = c
    z = c_full - c_full[tab.basis] @ tab.T
    status = tab.run(z, max_iter)
    if status == "unbounded":
        return LpSolution("unbounded")

    y = np.where(tab.vstat[:ncols] == _AT_UPPER, np.where(np.isfinite(ub[:ncols]), ub[:ncols], 0.0), 0.0)
    y[tab.basis[tab.basis < ncols]] = tab.xB[tab.basis < ncols]
    x = lower + y[:q]
    x = np.clip(x, lower, np.where(np.isfinite(upper), upper, x))
    _verify_solution(problem, x)
    return LpSolution("optimal", x, float(c @ x))


def _verify_solution(problem: LpProblem, x: np.ndarray) -> None:
    lhs = problem.constraint_matrix @ x
    for r, s in enumerate(problem.senses):
        scale = max(1.0, abs(problem.rhs[r]))
        resid = lhs[r] - problem.rhs[r]
        bad = (
            (s == "<=" and resid > FEAS_TOL * scale)
            or (s == ">=" and resid < -FEAS_TOL * scale)
            or (s == "=" and abs(resid) > FEAS_TOL * scale)
        )
        if bad:
            raise InternalConsistencyError(
                f"simplex returned a point violating row {r} ({s}) by {resid!r}"
            )
