"""p-median solvers over a candidate-by-target cost matrix.

Open exactly ``m`` candidates (rows) and charge each target (column) its
cheapest open candidate. ``+inf`` entries are forbidden assignments.

Two engines:

* :func:`branch_and_bound` - depth-first search bounded by the Lagrangian
  relaxation of the assignment constraints (subgradient ascent, warm-started
  from the parent) with reduced-cost variable fixing. Proves optimality.
* :func:`swap_local_search` - greedy seed followed by best-improvement
  single swaps until none improves.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .exceptions import ConfigError, InfeasibleError
from .structure import flp_set_cost

__all__ = [
    "FlpInstance",
    "FlpSolution",
    "greedy_seed",
    "swap_local_search",
    "branch_and_bound",
    "solve_pmedian",
    "ilp_constraint_matrix",
]

EXACT_MAX_NODES = 60

_OPEN, _FREE, _CLOSED = 1, 0, -1


@dataclass(frozen=True, eq=False)
class FlpInstance:
    cost: np.ndarray
    m: int

    def __post_init__(self):
        cost = np.asarray(self.cost, dtype=float)
        if cost.ndim != 2:
            raise ConfigError(f"cost must be 2-D, got shape {cost.shape}")
        if np.isnan(cost).any() or (cost == -np.inf).any():
            raise ConfigError("cost entries must be finite or +inf")
        if not 1 <= self.m <= cost.shape[0]:
            raise ConfigError(f"need 1 <= m <= n, got m={self.m}, n={cost.shape[0]}")
        object.__setattr__(self, "cost", cost)

    @property
    def n(self) -> int:
        return self.cost.shape[0]

    @property
    def p(self) -> int:
        return self.cost.shape[1]

    def check_feasible(self) -> None:
        dead = np.nonzero(~np.isfinite(self.cost).any(axis=0))[0]
        if dead.size:
            raise InfeasibleError(f"target column {int(dead[0])} is unreachable from every candidate")

    def objective(self, opened) -> float:
        return flp_set_cost(self.cost, opened)


@dataclass
class FlpSolution:
    opened: tuple
    objective: float
    optimal: bool
    engine: str
    stats: dict = field(default_factory=dict)


def _score(vals):
    """Lexicographic key rows: (uncovered targets, finite cost sum)."""
    bad = ~np.isfinite(vals)
    return bad.sum(axis=-1), np.where(bad, 0.0, vals).sum(axis=-1)


def greedy_seed(cost, m) -> tuple:
    """Open candidates one at a time, each time the one lowering the cost most."""
    cost = np.asarray(cost, dtype=float)
    n, p = cost.shape
    cur = np.full(p, np.inf)
    chosen = np.zeros(n, dtype=bool)
    for _ in range(m):
        n_bad, fin = _score(np.minimum(cur[None, :], cost))
        n_bad = np.where(chosen, np.iinfo(np.int64).max, n_bad)
        order = np.lexsort((np.arange(n), fin, n_bad))
        j = int(order[0])
        chosen[j] = True
        cur = np.minimum(cur, cost[j])
    return tuple(int(v) for v in np.nonzero(chosen)[0])


def _best_two(cost, opened):
    sub = cost[opened]
    if len(opened) == 1:
        return np.zeros(cost.shape[1], dtype=int), sub[0], np.full(cost.shape[1], np.inf)
    order = np.argsort(sub, axis=0, kind="stable")
    cols = np.arange(cost.shape[1])
    return order[0], sub[order[0], cols], sub[order[1], cols]


def swap_local_search(cost, m, init=None, max_sweeps=10_000) -> tuple:
    """Best-improvement 1-swap descent from ``init`` (greedy seed by default).

    Returns ``(opened, sweeps)``; ``opened`` admits no improving single swap.
    """
    cost = np.asarray(cost, dtype=float)
    n = cost.shape[0]
    opened = list(greedy_seed(cost, m) if init is None else sorted(init))
    if len(opened) != m:
        raise ConfigError(f"initial set has {len(opened)} nodes, expected {m}")
    sweeps = 0
    while sweeps < max_sweeps:
        sweeps += 1
        is_open = np.zeros(n, dtype=bool)
        is_open[opened] = True
        cur_bad, cur_fin = _score(cost[opened].min(axis=0))
        tol = 1e-12 * (1.0 + abs(cur_fin))
        best = (cur_bad, cur_fin - tol)
        move = None
        arg1, v1, v2 = _best_two(cost, opened)
        for pos, r in enumerate(opened):
            base = np.where(arg1 == pos, v2, v1)
            n_bad, fin = _score(np.minimum(base[None, :], cost))
            n_bad = np.where(is_open, np.iinfo(np.int64).max, n_bad)
            c = int(np.lexsort((np.arange(n), fin, n_bad))[0])
            if (n_bad[c], fin[c]) < best:
                best = (n_bad[c], fin[c])
                move = (pos, c)
        if move is None:
            break
        opened[move[0]] = move[1]
        opened.sort()
    return tuple(opened), sweeps


def _lagrangian(cost, status, m, lam, upper, iters):
    """Subgradient ascent on the Lagrangian dual restricted to a search node.

    Returns ``(bound, lam, rho, chosen, candidates)`` where ``chosen`` is the
    relaxation's opened set at the best multipliers; every iterate's opened set
    is reported through ``candidates`` for incumbent updates.
    """
    open_idx = np.nonzero(status == _OPEN)[0]
    free_idx = np.nonzero(status == _FREE)[0]
    r = m - open_idx.size
    allowed = np.concatenate([open_idx, free_idx])
    sub = cost[allowed]
    n_open = open_idx.size
    best = (-math.inf, lam, None, None)
    seen = []
    mu = 2.0
    stall = 0
    for _ in range(iters):
        red = np.minimum(0.0, sub - lam[None, :])
        rho = red.sum(axis=1)
        pick = n_open + np.argsort(rho[n_open:], kind="stable")[:r]
        rows = np.concatenate([np.arange(n_open), pick])
        bound = lam.sum() + rho[rows].sum()
        seen.append(tuple(sorted(int(v) for v in allowed[rows])))
        if bound > best[0] + 1e-12 * (1.0 + abs(bound)):
            best = (bound, lam.copy(), rho, rows)
            stall = 0
        else:
            stall += 1
            if stall >= 8:
                mu *= 0.5
                stall = 0
        g = 1.0 - (red[rows] < 0).sum(axis=0)
        norm = float(g @ g)
        if norm == 0.0 or bound >= upper[0] - _gap_tol(upper[0]) or mu < 1e-6:
            break
        target = upper[0] if math.isfinite(upper[0]) else bound + 1.0 + 0.1 * abs(bound)
        lam = lam + mu * max(target - bound, 1e-9 * (1.0 + abs(bound))) / norm * g
    bound, lam_best, rho, rows = best
    rho_full = np.full(cost.shape[0], np.nan)
    rho_full[allowed] = rho
    chosen = np.zeros(cost.shape[0], dtype=bool)
    chosen[allowed[rows]] = True
    return bound, lam_best, rho_full, chosen, seen


def _gap_tol(value) -> float:
    return 1e-10 * max(1.0, abs(value)) if math.isfinite(value) else 0.0


def branch_and_bound(cost, m, incumbent=None, max_nodes=200_000, root_iters=250, node_iters=40):
    """Exact p-median by Lagrangian branch and bound.

    Parameters
    ----------
    cost : (n, p) array
        Assignment costs, ``+inf`` marking forbidden pairs.
    m : int
        Number of candidates to open.
    incumbent : tuple, optional
        A known feasible opened set used as the initial upper bound.
    max_nodes : int
        Search budget; exceeding it returns the incumbent with ``optimal=False``.
    """
    inst = FlpInstance(cost, m)
    inst.check_feasible()
    cost = inst.cost
    n, p = cost.shape
    if incumbent is None:
        incumbent, _ = swap_local_search(cost, m)
    incumbent = tuple(sorted(incumbent))
    upper = [inst.objective(incumbent)]
    best_set = [incumbent]
    evaluated = {}

    def consider(opened):
        if opened in evaluated:
            return
        val = inst.objective(opened)
        evaluated[opened] = val
        if val < upper[0]:
            upper[0] = val
            best_set[0] = opened

    finite = np.where(np.isfinite(cost), cost, np.nan)
    lam0 = np.nanmin(finite, axis=0)
    root = np.zeros(n, dtype=np.int8)
    stack = [(root, lam0, True)]
    nodes = 0
    optimal = True
    while stack:
        status, lam, is_root = stack.pop()
        nodes += 1
        if nodes > max_nodes:
            optimal = False
            break
        open_idx = np.nonzero(status == _OPEN)[0]
        free_idx = np.nonzero(status == _FREE)[0]
        r = m - open_idx.size
        if r < 0 or r > free_idx.size:
            continue
        if r == 0 or r == free_idx.size:
            leaf = open_idx if r == 0 else np.concatenate([open_idx, free_idx])
            consider(tuple(sorted(int(v) for v in leaf)))
            continue
        allowed = np.concatenate([open_idx, free_idx])
        if not np.isfinite(cost[allowed]).any(axis=0).all():
            continue
        iters = root_iters if is_root else node_iters
        bound, lam, rho, chosen, seen = _lagrangian(cost, status, m, lam, upper, iters)
        for opened in seen:
            consider(opened)
        if bound >= upper[0] - _gap_tol(upper[0]):
            continue

        # reduced-cost fixing against the incumbent
        status = status.copy()
        free_chosen = np.nonzero(chosen & (status == _FREE))[0]
        free_other = np.nonzero(~chosen & (status == _FREE))[0]
        limit = upper[0] - _gap_tol(upper[0])
        if free_chosen.size and free_other.size:
            rho_last = rho[free_chosen].max()
            rho_next = rho[free_other].min()
            status[free_other[bound - rho_last + rho[free_other] >= limit]] = _CLOSED
            status[free_chosen[bound - rho[free_chosen] + rho_next >= limit]] = _OPEN
        free_chosen = np.nonzero(chosen & (status == _FREE))[0]
        if free_chosen.size == 0:
            # fixing settled every chosen node; re-examine the reduced node
            stack.append((status, lam, False))
            continue
        sub = cost[free_chosen] - lam[None, :]
        load = (sub < 0).sum(axis=1)
        j = int(free_chosen[np.lexsort((rho[free_chosen], -load))[0]])
        excl = status.copy()
        excl[j] = _CLOSED
        incl = status.copy()
        incl[j] = _OPEN
        stack.append((excl, lam, False))
        stack.append((incl, lam, False))
    return FlpSolution(best_set[0], upper[0], optimal, "branch_and_bound", {"nodes": nodes})


def solve_pmedian(cost, m, engine="auto", exact_max_nodes=EXACT_MAX_NODES, **kwargs) -> FlpSolution:
    """Solve a p-median instance with the requested engine.

    ``engine="auto"`` runs branch and bound when the candidate count is at
    most ``exact_max_nodes`` and local search otherwise.
    """
    inst = FlpInstance(cost, m)
    inst.check_feasible()
    if engine not in ("auto", "exact", "local"):
        raise ConfigError(f"unknown FLP engine {engine!r}")
    if engine == "auto":
        engine = "exact" if inst.n <= exact_max_nodes else "local"
    seed = greedy_seed(inst.cost, m)
    opened, sweeps = swap_local_search(inst.cost, m, init=seed)
    stats = {
        "seed_objective": inst.objective(seed),
        "local_objective": inst.objective(opened),
        "sweeps": sweeps,
    }
    if engine == "local":
        return FlpSolution(opened, inst.objective(opened), False, "local_search", stats)
    sol = branch_and_bound(inst.cost, m, incumbent=opened, **kwargs)
    sol.stats.update(stats)
    return sol


def ilp_constraint_matrix(n, p) -> sparse.csr_matrix:
    """Constraint matrix of the p-median ILP over variables ``[Y (n), Z (n*p, row-major)]``.

    Rows: one cardinality row, ``p`` assignment rows and ``n*p`` linking rows
    ``Z_jk - Y_j <= 0``.
    """
    if n < 1 or p < 0:
        raise ConfigError(f"need n >= 1 and p >= 0, got n={n}, p={p}")
    rows, cols, vals = [], [], []
    rows += [0] * n
    cols += list(range(n))
    vals += [1.0] * n
    for k in range(p):
        for j in range(n):
            rows.append(1 + k)
            cols.append(n + j * p + k)
            vals.append(1.0)
    link = 1 + p
    for j in range(n):
        for k in range(p):
            rows += [link, link]
            cols += [n + j * p + k, j]
            vals += [1.0, -1.0]
            link += 1
    return sparse.csr_matrix((vals, (rows, cols)), shape=(1 + p + n * p, n + n * p))
