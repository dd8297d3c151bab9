import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import optimize, sparse

from driverselect import ConfigError, InfeasibleError
from driverselect.flp import (
    FlpInstance,
    branch_and_bound,
    greedy_seed,
    ilp_constraint_matrix,
    solve_pmedian,
    swap_local_search,
)
from driverselect.structure import flp_set_cost


def _exhaustive(cost, m):
    best, arg = math.inf, None
    for S in itertools.combinations(range(cost.shape[0]), m):
        v = flp_set_cost(cost, S)
        if v < best:
            best, arg = v, S
    return best, arg


def _milp(cost, m):
    """Solve the assignment ILP with scipy's HiGHS interface (finite costs only)."""
    n, p = cost.shape
    A = ilp_constraint_matrix(n, p)
    c = np.concatenate([np.zeros(n), cost.reshape(-1)])
    lb = np.concatenate([[m], np.ones(p), np.full(n * p, -np.inf)])
    ub = np.concatenate([[m], np.ones(p), np.zeros(n * p)])
    res = optimize.milp(c, constraints=optimize.LinearConstraint(A, lb, ub),
                        integrality=np.ones(n + n * p), bounds=optimize.Bounds(0, 1))
    assert res.success
    return res.fun


def test_m_equals_n_is_column_minimum(rng):
    cost = rng.normal(size=(6, 4))
    sol = solve_pmedian(cost, 6)
    assert sol.opened == tuple(range(6))
    assert sol.objective == pytest.approx(cost.min(axis=0).sum())


def test_small_hand_example():
    cost = np.array([[1, 2, 3], [2, 1, 4], [5, 5, 5], [3, 3, 1]], dtype=float)
    for engine in ("exact", "local"):
        sol = solve_pmedian(cost, 1, engine=engine)
        assert sol.opened == (0,)
        assert sol.objective == 6


def test_exact_matches_exhaustive_n12(rng):
    for _ in range(10):
        cost = rng.exponential(size=(12, 5))
        sol = solve_pmedian(cost, 3, engine="exact")
        best, _ = _exhaustive(cost, 3)
        assert sol.optimal
        assert sol.objective == pytest.approx(best, rel=1e-12)


def test_exact_matches_scipy_milp(rng):
    for _ in range(5):
        cost = rng.uniform(0, 10, size=(15, 6))
        sol = branch_and_bound(cost, 4)
        assert sol.objective == pytest.approx(_milp(cost, 4), rel=1e-9)


def test_infinite_entries_are_forbidden(rng):
    cost = rng.uniform(1, 5, size=(8, 4))
    cost[:, 2] = np.inf
    cost[5, 2] = 1.0
    sol = solve_pmedian(cost, 2)
    assert 5 in sol.opened
    assert math.isfinite(sol.objective)
    best, _ = _exhaustive(cost, 2)
    assert sol.objective == pytest.approx(best)


def test_infeasible_names_target():
    cost = np.array([[1.0, np.inf], [2.0, np.inf]])
    with pytest.raises(InfeasibleError, match="target column 1"):
        solve_pmedian(cost, 1)


def test_instance_validation():
    with pytest.raises(ConfigError):
        FlpInstance(np.ones((3, 2)), 0)
    with pytest.raises(ConfigError):
        FlpInstance(np.ones((3, 2)), 4)
    with pytest.raises(ConfigError):
        FlpInstance(np.array([[np.nan]]), 1)
    with pytest.raises(ConfigError):
        solve_pmedian(np.ones((3, 2)), 1, engine="cplex")


def test_local_search_is_one_swap_optimal_and_improves_seed(rng):
    for _ in range(20):
        cost = rng.exponential(size=(20, 8))
        m = int(rng.integers(1, 6))
        seed = greedy_seed(cost, m)
        opened, _ = swap_local_search(cost, m, init=seed)
        value = flp_set_cost(cost, opened)
        assert value <= flp_set_cost(cost, seed) + 1e-12
        for out in opened:
            for inn in set(range(20)) - set(opened):
                trial = (set(opened) - {out}) | {inn}
                assert flp_set_cost(cost, trial) >= value - 1e-9


def test_auto_engine_threshold(rng):
    small = solve_pmedian(rng.exponential(size=(30, 5)), 3)
    large = solve_pmedian(rng.exponential(size=(70, 5)), 3)
    assert small.engine == "branch_and_bound" and small.optimal
    assert large.engine == "local_search" and not large.optimal
    forced = solve_pmedian(rng.exponential(size=(70, 5)), 3, exact_max_nodes=100)
    assert forced.engine == "branch_and_bound"


def test_ilp_constraint_matrix_examples():
    A = ilp_constraint_matrix(2, 1)
    assert A.nnz == 8
    dense = A.toarray()
    # rows: cardinality, assignment, two linking rows Z_j0 - Y_j
    np.testing.assert_array_equal(dense, [[1, 1, 0, 0], [0, 0, 1, 1], [-1, 0, 1, 0], [0, -1, 0, 1]])
    assert ilp_constraint_matrix(50, 20).nnz == 3050
    assert ilp_constraint_matrix(7, 0).nnz == 7
    assert sparse.issparse(A)


@given(st.integers(2, 9), st.integers(1, 4), st.integers(0, 10_000))
def test_exact_equals_exhaustive_property(n, p, seed):
    rng = np.random.default_rng(seed)
    cost = rng.exponential(size=(n, p))
    cost[rng.random((n, p)) < 0.2] = np.inf
    if not np.isfinite(cost).any(axis=0).all():
        return
    m = int(rng.integers(1, min(n, 4) + 1))
    best, _ = _exhaustive(cost, m)
    sol = solve_pmedian(cost, m, engine="exact")
    assert sol.objective == pytest.approx(best, rel=1e-12) or sol.objective == best
