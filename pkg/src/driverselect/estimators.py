"""scikit-learn style wrappers around the selection methods.

Every selector is a :class:`~sklearn.feature_selection.SelectorMixin`: ``fit``
takes a :class:`~driverselect.graph.Graph` (or a uniform-weight state matrix)
plus the target nodes, and afterwards ``transform`` keeps the driver columns of
node-state snapshots ``X`` of shape ``(n_samples, n_nodes)``.

>>> from driverselect import gen_graph, FLPSelector
>>> g = gen_graph("erdos_renyi", 30, {"k_av": 4}, seed=1)
>>> sel = FLPSelector(n_drivers=3).fit(g, targets=[0, 1, 2, 3, 4])
>>> len(sel.drivers_)
3
"""
from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.feature_selection import SelectorMixin
from sklearn.utils import check_random_state
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import ConfigError
from .flp import EXACT_MAX_NODES
from .graph import Graph
from .selectors import (
    SelectionProblem,
    _result,
    evaluate_costs,
    flp_select,
    greedy_select,
    hill_climb,
    lpgm_select,
)

__all__ = [
    "GreedySelector",
    "FLPSelector",
    "LPGMSelector",
    "HillClimbSelector",
    "check_graph",
]


def check_graph(graph) -> Graph:
    """Accept a :class:`Graph` or a square state matrix with uniform weights."""
    if isinstance(graph, Graph):
        return graph
    A = check_array(graph, ensure_2d=True, dtype=float, ensure_min_samples=1)
    return Graph.from_state_matrix(A)


class _DriverSelector(SelectorMixin, BaseEstimator):
    """Shared fit plumbing; subclasses implement ``_select(problem)``."""

    def fit(self, graph, targets=None):
        """Select drivers for ``graph`` steering ``targets`` (all nodes if omitted)."""
        g = check_graph(graph)
        if targets is None:
            targets = range(g.n)
        if int(self.n_drivers) != self.n_drivers or not 1 <= self.n_drivers <= g.n:
            raise ConfigError(f"n_drivers must be an integer in [1, {g.n}], got {self.n_drivers}")
        seed = check_random_state(getattr(self, "random_state", None)).randint(2**31 - 1)
        problem = SelectionProblem(g, targets, int(self.n_drivers), self._horizon(), seed)
        result = self._select(problem)
        self.problem_ = problem
        self.result_ = result
        self.drivers_ = np.asarray(result.drivers, dtype=int)
        self.n_features_in_ = g.n
        return self

    def _horizon(self):
        return float(getattr(self, "horizon", math.inf))

    def _get_support_mask(self):
        check_is_fitted(self, "drivers_")
        mask = np.zeros(self.n_features_in_, dtype=bool)
        mask[self.drivers_] = True
        return mask

    def input_matrix(self) -> np.ndarray:
        """0/1 input matrix with one versor column per selected driver."""
        check_is_fitted(self, "drivers_")
        B = np.zeros((self.n_features_in_, len(self.drivers_)))
        B[self.drivers_, np.arange(len(self.drivers_))] = 1.0
        return B

    def costs(self, drivers=None) -> dict:
        """All surrogate costs of a driver set (see :func:`~driverselect.selectors.evaluate_costs`)."""
        check_is_fitted(self, "drivers_")
        return evaluate_costs(self.problem_, self.drivers_ if drivers is None else drivers)

    def score(self, graph=None, targets=None):
        """Negative volume cost of the selected drivers (higher is better)."""
        check_is_fitted(self, "drivers_")
        return -self.result_.vol_cost


class GreedySelector(_DriverSelector):
    """Greedy rank-then-log-det minimisation of the output Gramian volume."""

    def __init__(self, n_drivers=1, horizon=math.inf, rank_tol=None):
        self.n_drivers = n_drivers
        self.horizon = horizon
        self.rank_tol = rank_tol

    def _select(self, problem):
        return greedy_select(problem, rank_tol=self.rank_tol)


class FLPSelector(_DriverSelector):
    """Facility-location (p-median) selection on the structural pairwise cost.

    ``horizon`` only affects the Gramian-based costs reported in ``result_``.
    """

    def __init__(self, n_drivers=1, engine="auto", exact_max_nodes=EXACT_MAX_NODES,
                 max_nodes=200_000, horizon=math.inf):
        self.n_drivers = n_drivers
        self.engine = engine
        self.exact_max_nodes = exact_max_nodes
        self.max_nodes = max_nodes
        self.horizon = horizon

    def _select(self, problem):
        return flp_select(problem, engine=self.engine, exact_max_nodes=self.exact_max_nodes,
                          max_nodes=self.max_nodes)


class LPGMSelector(_DriverSelector):
    """Projected gradient descent on the expected control energy."""

    def __init__(self, n_drivers=1, horizon=1.0, step_size=1e-2, n_iter=200, slack=None,
                 random_state=None):
        self.n_drivers = n_drivers
        self.horizon = horizon
        self.step_size = step_size
        self.n_iter = n_iter
        self.slack = slack
        self.random_state = random_state

    def _select(self, problem):
        return lpgm_select(problem, eta=self.step_size, n_iter=self.n_iter, m0=self.slack)


class HillClimbSelector(_DriverSelector):
    """Random-swap search for a driver set at a prescribed facility-location cost.

    After ``fit``, ``found_`` tells whether the target was reached; if not,
    ``drivers_`` holds the closest set visited.
    """

    def __init__(self, n_drivers=1, target_cost=0.0, epsilon=1.0, max_iter=10_000,
                 random_state=None, horizon=math.inf):
        self.n_drivers = n_drivers
        self.target_cost = target_cost
        self.epsilon = epsilon
        self.max_iter = max_iter
        self.random_state = random_state
        self.horizon = horizon

    def _select(self, problem):
        run = hill_climb(problem, problem.m, self.target_cost, self.epsilon,
                         self.max_iter, problem.seed)
        self.found_ = run.found
        self.iterations_ = run.iterations
        drivers = run.drivers
        if drivers is None:
            drivers = run.closest
        return _result(problem, drivers, "hill",
                       {"found": run.found, "iterations": run.iterations, "flp_cost": run.cost})
