"""Explicit construction of the hierarchical auxiliary Markov chain whose walk
weights encode downloadable file fractions. Desk-scale only: it serves as an
independent oracle for the expected-weight objective, the stationary
distribution shortcut, and the shape of the tail bound; the production greedy
path never touches it."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .allocation import DownloadSchedule
from .errors import InstanceTooLargeError, InternalConsistencyError
from .model import MobilityModel, RequestModel

DEFAULT_STATE_CAP = 100_000

_STATIONARY_TOL = 1e-10


def full_state_count(n: int, num_files: int, d: int) -> int:
    """State count of the unpruned chain: a root plus, per file, a full n-ary
    tree of depth d."""
    return 1 + num_files * sum(n**level for level in range(1, d + 1))


@dataclass(frozen=True, eq=False)
class AuxChain:
    """Root state 0 plus one depth-d helper tree per file.

    A state at level l in file group g, reached along helper path
    (c_1, ..., c_l), represents a user requesting file g and contacting helper
    c_l at slot l. Level-d states return to the root; the root keeps 1 - alpha
    on its self-loop. States unreachable with positive probability from the
    root are pruned at construction.
    """

    alpha: float
    d: int
    n: int
    num_files: int
    group: np.ndarray        # (S,) file group per state; -1 for the root
    level: np.ndarray        # (S,) hierarchy level; 0 for the root
    parent: np.ndarray       # (S,) parent state id; -1 for the root
    last_helper: np.ndarray  # (S,) helper of the latest contact; -1 for the root
    phi: np.ndarray          # (S,) initial distribution, supported on level 1
    weights: np.ndarray      # (S,) downloadable fraction at each state
    edges: tuple             # ((src, dst, prob), ...) positive-probability kernel
    unpruned_state_count: int

    @property
    def num_states(self) -> int:
        return int(self.group.size)

    def path(self, state: int) -> tuple:
        """Helper path from level 1 down to ``state``."""
        out = []
        s = state
        while s != 0:
            out.append(int(self.last_helper[s]))
            s = int(self.parent[s])
        return tuple(reversed(out))

    def kernel_matrix(self) -> np.ndarray:
        """Dense transition matrix; intended for small oracle chains only."""
        E = np.zeros((self.num_states, self.num_states))
        for src, dst, p in self.edges:
            E[src, dst] += p
        return E

    def debug_dump(self) -> str:
        """Human-readable adjacency listing (not a stable format)."""
        lines = []
        for s in range(self.num_states):
            if s == 0:
                head = "state 0 root"
            else:
                head = (
                    f"state {s} group={self.group[s]} level={self.level[s]} "
                    f"path={self.path(s)} phi={self.phi[s]:.6g} w={self.weights[s]:.6g}"
                )
            outs = [f"->{dst}:{p:.6g}" for src, dst, p in self.edges if src == s]
            lines.append(head + (" " + " ".join(outs) if outs else ""))
        return "\n".join(lines)


def build_aux_chain(
    model: MobilityModel,
    requests: RequestModel,
    d: int,
    alpha: float,
    schedule: DownloadSchedule,
    cap: int = DEFAULT_STATE_CAP,
) -> AuxChain:
    """Construct the chain for a given download schedule.

    The weight of a state is the schedule entry for its helper's k-th contact,
    where k - 1 counts the ancestors on the state's root path at the same
    helper (contact counts are structural, not matched by weight value).
    alpha may be 1.0, the degenerate no-self-loop boundary used by tests.
    """
    if d < 1:
        raise ValueError("d must be >= 1")
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    n, num_files = model.n, requests.num_files
    if requests.n != n:
        raise ValueError("request model and mobility model disagree on n")
    if schedule.u.shape != (n, num_files, d):
        raise ValueError("schedule dimensions disagree with the instance")
    unpruned = full_state_count(n, num_files, d)
    if unpruned > cap:
        raise InstanceTooLargeError(
            f"auxiliary chain would have {unpruned} states, above the cap of {cap}"
        )

    group = [-1]
    level = [0]
    parent = [-1]
    last_helper = [-1]
    phi = [0.0]
    weights = [0.0]
    edges: list[tuple[int, int, float]] = []

    if alpha < 1.0:
        edges.append((0, 0, 1.0 - alpha))

    frontier: list[int] = []
    for g in range(num_files):
        for c in range(n):
            p1 = float(requests.per_helper[c, g] * model.init[c])
            if p1 <= 0.0:
                continue  # unreachable from the root: pruned
            sid = len(group)
            group.append(g)
            level.append(1)
            parent.append(0)
            last_helper.append(c)
            phi.append(p1)
            weights.append(float(schedule.u[c, g, 0]))
            edges.append((0, sid, alpha * p1))
            frontier.append(sid)

    for lvl in range(2, d + 1):
        next_frontier: list[int] = []
        for v in frontier:
            c_prev = last_helper[v]
            for e in range(n):
                p = float(model.trans[c_prev, e])
                if p <= 0.0:
                    continue
                k_minus_1 = _count_on_path(parent, last_helper, v, e)
                sid = len(group)
                group.append(group[v])
                level.append(lvl)
                parent.append(v)
                last_helper.append(e)
                phi.append(0.0)
                weights.append(float(schedule.u[e, group[v], k_minus_1]))
                edges.append((v, sid, p))
                next_frontier.append(sid)
        frontier = next_frontier

    # after the loop the frontier holds exactly the level-d states
    for v in frontier:
        edges.append((v, 0, 1.0))

    return AuxChain(
        alpha=alpha,
        d=d,
        n=n,
        num_files=num_files,
        group=np.asarray(group, dtype=np.int64),
        level=np.asarray(level, dtype=np.int64),
        parent=np.asarray(parent, dtype=np.int64),
        last_helper=np.asarray(last_helper, dtype=np.int64),
        phi=np.asarray(phi, dtype=float),
        weights=np.asarray(weights, dtype=float),
        edges=tuple(edges),
        unpruned_state_count=unpruned,
    )


def _count_on_path(parent, last_helper, v, e) -> int:
    """Number of contacts with helper ``e`` on the root path ending at ``v``."""
    count = 0
    s = v
    while s > 0:
        if last_helper[s] == e:
            count += 1
        s = parent[s]
    return count


def stationary_distribution(chain: AuxChain) -> np.ndarray:
    """Stationary distribution via root-path products, verified against the
    balance equations before returning."""
    mass = np.zeros(chain.num_states)
    mass[0] = 1.0
    edge_prob = {}
    for src, dst, p in chain.edges:
        if dst != 0 and src == chain.parent[dst]:
            edge_prob[dst] = p
    for s in range(1, chain.num_states):
        mass[s] = mass[chain.parent[s]] * edge_prob[s]
    pi = mass / mass.sum()
    flow = np.zeros_like(pi)
    for src, dst, p in chain.edges:
        flow[dst] += pi[src] * p
    residual = float(np.max(np.abs(flow - pi)))
    if residual > _STATIONARY_TOL:
        raise InternalConsistencyError(
            f"path-product distribution violates piE = pi by {residual!r}"
        )
    return pi


def expected_weight_via_chain(chain: AuxChain, d: int) -> float:
    """Expected total weight of a d-step walk started from the chain's initial
    distribution: an independent check of the closed-form expected weight."""
    if d != chain.d:
        raise ValueError("chain was built for a different deadline")
    reach = np.zeros(chain.num_states)
    total = 0.0
    order = np.argsort(chain.level[1:], kind="stable") + 1  # parents before children
    edge_prob = {dst: p for src, dst, p in chain.edges if dst != 0 and src == chain.parent[dst]}
    for s in order:
        if chain.level[s] == 1:
            reach[s] = chain.phi[s]
        else:
            reach[s] = reach[chain.parent[s]] * edge_prob[s]
        total += reach[s] * chain.weights[s]
    return float(total)


def bound_value(
    mu: float, d: int, c: float, mixing_time: float, phi_norm: float
) -> float:
    """Tail-bound value for a walk with expected per-step weight ``mu``.

    Only the monotonicity of this expression matters anywhere (smaller bound
    iff larger mu); the constants are caller-supplied and never calibrated.
    """
    if c <= 0 or mixing_time <= 0 or phi_norm <= 0:
        raise ValueError("c, mixing_time and phi_norm must be positive")
    if mu * d < 1.0:
        raise ValueError("bound requires mu * d >= 1")
    exponent = -(mu * d + 1.0 / (mu * d) - 2.0) / (72.0 * mixing_time)
    return c * phi_norm * math.exp(exponent)
