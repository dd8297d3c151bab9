"""Driver node selection methods.

* :func:`greedy_select` - greedy minimisation of the Gramian volume cost, using
  the numerical rank until the output Gramian has full rank.
* :func:`flp_select` - p-median over the structural pairwise cost.
* :func:`lpgm_select` - projected gradient descent on the expected energy with
  a probabilistic sparsity projection.
* :func:`hill_climb` - random swaps towards a prescribed facility-location cost.
"""
from __future__ import annotations

import logging
import math
import time
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import linalg

from .exceptions import ConfigError
from .flp import EXACT_MAX_NODES, solve_pmedian
from .gramian import (
    GramianSet,
    batch_log_det,
    batch_numerical_rank,
    driver_contributions,
    expected_energy,
    gramian_finite,
    numerical_rank,
    output_expectation,
    vol_cost,
)
from .graph import Graph, as_nodeset, state_matrix
from .structure import StructureMatrices, flp_set_cost, structure_matrices

__all__ = [
    "SelectionProblem",
    "SelectionResult",
    "evaluate_costs",
    "greedy_select",
    "flp_select",
    "probabilistic_projection",
    "lpgm_energy",
    "lpgm_gradient",
    "lpgm_select",
    "HillClimbResult",
    "hill_climb",
    "METHODS",
]

logger = logging.getLogger(__name__)

METHODS = ("greedy", "flp", "lpgm", "hill")


@dataclass
class SelectionProblem:
    """Graph, targets, driver budget ``m`` and horizon ``t_f`` (``inf`` allowed)."""

    graph: Graph
    targets: tuple
    m: int
    horizon: float = math.inf
    seed: int = 0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.targets = as_nodeset(self.targets, self.graph.n)
        if not self.targets:
            raise ConfigError("target set must be nonempty")
        if not 1 <= self.m <= self.graph.n:
            raise ConfigError(f"need 1 <= m <= n, got m={self.m}, n={self.graph.n}")
        self.horizon = float(self.horizon)
        if not self.horizon > 0:
            raise ConfigError(f"horizon must be positive, got {self.horizon}")

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def p(self) -> int:
        return len(self.targets)

    @cached_property
    def A(self) -> np.ndarray:
        return state_matrix(self.graph)

    @cached_property
    def gramians(self) -> GramianSet:
        return driver_contributions(self.A, self.targets, None, self.horizon)

    @cached_property
    def structure(self) -> StructureMatrices:
        return structure_matrices(self.graph, self.targets)


@dataclass
class SelectionResult:
    drivers: tuple
    method: str
    vol_cost: float
    expected_energy: float
    flp_cost: float
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "drivers": list(self.drivers),
            "vol_cost": self.vol_cost,
            "expected_energy": self.expected_energy,
            "flp_cost": self.flp_cost,
            "diagnostics": self.diagnostics,
        }


def evaluate_costs(problem: SelectionProblem, drivers) -> dict:
    """All three surrogate costs of a driver set."""
    drivers = as_nodeset(drivers, problem.n)
    return {
        "vol_cost": vol_cost(problem.gramians, drivers),
        "expected_energy": expected_energy(problem.gramians, drivers),
        "flp_cost": flp_set_cost(problem.structure, drivers),
    }


def _result(problem, drivers, method, diagnostics) -> SelectionResult:
    drivers = as_nodeset(drivers, problem.n)
    if len(drivers) != problem.m:
        raise AssertionError(f"{method} returned {len(drivers)} drivers, expected {problem.m}")
    return SelectionResult(drivers, method, diagnostics=diagnostics, **evaluate_costs(problem, drivers))


def greedy_select(problem: SelectionProblem, rank_tol=None) -> SelectionResult:
    """Greedy driver selection on the output Gramian.

    Each step adds the candidate minimising ``-rank`` of the updated output
    Gramian while the incumbent is rank deficient, and ``-log det`` once the
    incumbent reaches full numerical rank. Ties go to the lowest node index.
    """
    t0 = time.perf_counter()
    gs = problem.gramians
    p = problem.p
    W = np.zeros((p, p))
    chosen = []
    available = np.ones(len(gs.candidates), dtype=bool)
    rank_phase = True
    rank_phase_length = problem.m
    for it in range(problem.m):
        idx = np.nonzero(available)[0]
        stack = W[None] + gs.contributions[idx]
        if rank_phase:
            scores = -batch_numerical_rank(stack, rank_tol).astype(float)
        else:
            scores = -batch_log_det(stack, rank_tol)
        # argmin returns the first minimiser, i.e. the lowest node index
        finite = np.where(np.isnan(scores), np.inf, scores)
        pos = int(idx[np.argmin(finite)])
        chosen.append(gs.candidates[pos])
        available[pos] = False
        W = W + gs.contributions[pos]
        if rank_phase and numerical_rank(W, rank_tol) == p:
            rank_phase = False
            rank_phase_length = it + 1
    diagnostics = {
        "iterations": problem.m,
        "rank_phase_length": rank_phase_length,
        "output_controllable": not rank_phase,
        "pick_order": [int(v) for v in chosen],
        "wall_time": time.perf_counter() - t0,
    }
    if rank_phase:
        logger.warning("greedy selection never reached full numerical rank %d", p)
    return _result(problem, chosen, "greedy", diagnostics)


def flp_select(problem: SelectionProblem, engine="auto", exact_max_nodes=EXACT_MAX_NODES,
               max_nodes=200_000) -> SelectionResult:
    """Facility-location selection on the structural pairwise cost."""
    t0 = time.perf_counter()
    sol = solve_pmedian(
        problem.structure.cost, problem.m, engine=engine,
        exact_max_nodes=exact_max_nodes, max_nodes=max_nodes,
    )
    diagnostics = {
        "engine": sol.engine,
        "optimal": sol.optimal,
        "objective": sol.objective,
        "wall_time": time.perf_counter() - t0,
        **sol.stats,
    }
    return _result(problem, sol.opened, "flp", diagnostics)


def probabilistic_projection(B, m, m0, seed=None):
    """Sample an ``m``-node support from the row scores of a dense input matrix.

    Row scores are the row L1 norms. The ``m + m0`` highest-scoring rows form
    the candidate pool and ``m`` of them are drawn without replacement with
    probability proportional to their score. Returns ``(support, B_L0)`` where
    ``B_L0`` has one nonzero per selected row, in distinct columns, with value
    ``m * r_j / sum(r_selected)``.
    """
    B = np.asarray(B, dtype=float)
    n = B.shape[0]
    if not 1 <= m <= n:
        raise ConfigError(f"need 1 <= m <= n, got m={m}, n={n}")
    if m0 < 0 or m + m0 > n:
        raise ConfigError(f"need 0 <= m0 <= n - m, got m0={m0}")
    rng = np.random.default_rng(seed)
    scores = np.abs(B).sum(axis=1)
    pool = [int(j) for j in np.argsort(-scores, kind="stable")[: m + m0]]
    selected = []
    positive = [j for j in pool if scores[j] > 0]
    if len(positive) < m:
        warnings.warn(
            f"only {len(positive)} positive row scores for m={m}; filling by score order",
            RuntimeWarning,
            stacklevel=2,
        )
    while len(selected) < m and positive:
        w = scores[positive]
        pick = int(rng.choice(len(positive), p=w / w.sum()))
        selected.append(positive.pop(pick))
    for j in pool:
        if len(selected) == m:
            break
        if j not in selected:
            selected.append(j)
    B_L0 = np.zeros((n, m))
    total = scores[selected].sum()
    for k, j in enumerate(selected):
        B_L0[j, k] = m * scores[j] / total if total > 0 else 1.0
    return tuple(sorted(selected)), B_L0


def _output_block(problem):
    C = list(problem.targets)
    return C, output_expectation(problem.A, C, problem.horizon)


def lpgm_energy(A, B, targets, t_f, CXC=None) -> float:
    """Expected energy of a dense input matrix ``B`` (``inf`` if the output Gramian is singular)."""
    C = list(targets)
    if CXC is None:
        CXC = output_expectation(A, C, t_f)
    W = gramian_finite(A, B @ B.T, t_f)
    try:
        factor = linalg.cho_factor(W[np.ix_(C, C)], lower=True)
    except linalg.LinAlgError:
        return math.inf
    return float(np.trace(linalg.cho_solve(factor, CXC)))


def lpgm_gradient(A, B, targets, t_f, CXC=None):
    """Energy and its gradient ``-2 Y B`` with respect to ``B``.

    ``Y`` is the horizon-``t_f`` Gramian of ``(A^T, R)`` with
    ``R = C^T Wbar^{-1} C X_f C^T Wbar^{-1} C``.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    C = list(targets)
    if CXC is None:
        CXC = output_expectation(A, C, t_f)
    W = gramian_finite(A, B @ B.T, t_f)
    try:
        factor = linalg.cho_factor(W[np.ix_(C, C)], lower=True)
    except linalg.LinAlgError:
        return math.inf, None
    S = linalg.cho_solve(factor, CXC)
    energy = float(np.trace(S))
    R_cc = linalg.cho_solve(factor, S.T)
    R = np.zeros((n, n))
    R[np.ix_(C, C)] = 0.5 * (R_cc + R_cc.T)
    Y = gramian_finite(A.T, R, t_f)
    return energy, -2.0 * Y @ B


def _initial_B(n, m, rng, noise=1e-3):
    B = rng.uniform(0.0, noise, size=(n, m))
    rows = rng.choice(n, size=m, replace=False)
    B[rows, np.arange(m)] += 1.0
    return B


def lpgm_select(problem: SelectionProblem, eta=1e-2, n_iter=200, m0=None, B0=None,
                max_halvings=50) -> SelectionResult:
    """Projected gradient descent with probabilistic projection.

    Each iteration projects ``B`` to an ``m``-sparse ``B_L0``, evaluates the
    expected energy and its gradient at ``B_L0``, and steps from ``B_L0`` when
    it improved on the best energy so far (from ``B`` otherwise). The step
    length starts at ``eta`` and halves until the unprojected energy does not
    increase. The best projected support is returned.
    """
    if math.isinf(problem.horizon):
        raise ConfigError("LPGM needs a finite horizon")
    t0 = time.perf_counter()
    n, m = problem.n, problem.m
    m0 = m if m0 is None else int(m0)
    m0 = min(m0, n - m)
    rng = np.random.default_rng(problem.seed)
    A = problem.A
    C, CXC = _output_block(problem)
    B = _initial_B(n, m, rng) if B0 is None else np.array(B0, dtype=float)
    if B.shape != (n, m):
        raise ConfigError(f"B0 must have shape {(n, m)}, got {B.shape}")

    best_energy, best_support, best_iter = math.inf, None, -1
    energies, steps = [], []
    for k in range(n_iter):
        support, B_L0 = probabilistic_projection(B, m, m0, rng)
        energy, grad = lpgm_gradient(A, B_L0, C, problem.horizon, CXC)
        energies.append(energy)
        if grad is None:
            steps.append(0.0)
            continue
        if energy < best_energy:
            best_energy, best_support, best_iter = energy, support, k
            base, base_energy = B_L0, energy
        else:
            base = B
            base_energy = lpgm_energy(A, B, C, problem.horizon, CXC)
        step = eta
        for _ in range(max_halvings):
            trial = base - step * grad
            e = lpgm_energy(A, trial, C, problem.horizon, CXC)
            if math.isfinite(e) and e <= base_energy:
                break
            step *= 0.5
        B = base - step * grad
        steps.append(step)

    if best_support is None:
        # every projected iterate was singular; fall back to the last support
        best_support = support
    diagnostics = {
        "iterations": n_iter,
        "best_iterate": best_iter,
        "best_energy": best_energy,
        "eta": eta,
        "m0": m0,
        "energies": energies,
        "step_sizes": steps,
        "wall_time": time.perf_counter() - t0,
    }
    return _result(problem, best_support, "lpgm", diagnostics)


@dataclass
class HillClimbResult:
    """Outcome of :func:`hill_climb`; ``closest`` is the last accepted set."""

    drivers: tuple | None
    cost: float
    iterations: int
    closest: tuple = ()

    @property
    def found(self) -> bool:
        return self.drivers is not None


def hill_climb(cost, m, target_cost, epsilon, max_iter=10_000, seed=None) -> HillClimbResult:
    """Random-swap search for an ``m``-set whose facility-location cost is within ``epsilon`` of ``target_cost``.

    A swap is kept only if it moves the cost strictly closer to the target.
    ``drivers`` is ``None`` when ``max_iter`` iterations pass without success.
    """
    if isinstance(cost, SelectionProblem):
        cost = cost.structure.cost
    elif isinstance(cost, StructureMatrices):
        cost = cost.cost
    cost = np.asarray(cost, dtype=float)
    n = cost.shape[0]
    if not 1 <= m <= n:
        raise ConfigError(f"need 1 <= m <= n, got m={m}, n={n}")
    if not epsilon > 0 or max_iter < 1:
        raise ConfigError("need epsilon > 0 and max_iter >= 1")
    rng = np.random.default_rng(seed)
    current = rng.choice(n, size=m, replace=False)
    inside = np.zeros(n, dtype=bool)
    inside[current] = True
    cur_cost = float(np.sum(cost[current].min(axis=0)))
    if abs(cur_cost - target_cost) <= epsilon:
        found = _sorted_tuple(current)
        return HillClimbResult(found, cur_cost, 0, found)
    if m == n:
        return HillClimbResult(None, cur_cost, max_iter, _sorted_tuple(current))
    k = 1
    while k < max_iter:
        a = int(rng.integers(m))
        outside = np.nonzero(~inside)[0]
        b = int(outside[rng.integers(outside.size)])
        trial = current.copy()
        trial[a] = b
        c = float(np.sum(cost[trial].min(axis=0)))
        if abs(c - target_cost) <= epsilon:
            found = _sorted_tuple(trial)
            return HillClimbResult(found, c, k, found)
        if abs(target_cost - c) < abs(target_cost - cur_cost):
            inside[current[a]] = False
            inside[b] = True
            current, cur_cost = trial, c
        k += 1
    return HillClimbResult(None, cur_cost, k, _sorted_tuple(current))


def _sorted_tuple(nodes) -> tuple:
    return tuple(sorted(int(v) for v in nodes))
