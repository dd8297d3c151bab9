import math

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from driverselect import (
    ConfigError,
    FLPSelector,
    GreedySelector,
    HillClimbSelector,
    LPGMSelector,
    SelectionProblem,
    flp_select,
    flp_set_cost,
    gen_graph,
    greedy_select,
    state_matrix,
)
from driverselect.estimators import check_graph


@pytest.fixture
def graph():
    return gen_graph("erdos_renyi", 20, {"k_av": 4}, seed=3)


TARGETS = [0, 2, 4, 6, 8, 10]


@pytest.mark.parametrize("cls", [GreedySelector, FLPSelector, LPGMSelector, HillClimbSelector])
def test_get_params_and_clone(cls):
    est = cls(n_drivers=3)
    params = est.get_params()
    assert params["n_drivers"] == 3
    copy = clone(est)
    assert copy.get_params() == params
    assert copy is not est


def test_set_params_round_trip():
    est = FLPSelector().set_params(n_drivers=4, engine="local")
    assert est.n_drivers == 4 and est.engine == "local"


def test_flp_selector_matches_function(graph):
    sel = FLPSelector(n_drivers=3).fit(graph, targets=TARGETS)
    direct = flp_select(SelectionProblem(graph, TARGETS, 3))
    assert tuple(sel.drivers_) == direct.drivers


def test_greedy_selector_matches_function(graph):
    sel = GreedySelector(n_drivers=3).fit(graph, targets=TARGETS)
    direct = greedy_select(SelectionProblem(graph, TARGETS, 3))
    assert tuple(sel.drivers_) == direct.drivers
    assert sel.score() == pytest.approx(-direct.vol_cost)


def test_support_mask_and_transform(graph):
    sel = FLPSelector(n_drivers=3).fit(graph, targets=TARGETS)
    mask = sel.get_support()
    assert mask.shape == (20,) and mask.sum() == 3
    assert np.array_equal(np.flatnonzero(mask), np.sort(sel.drivers_))
    X = np.arange(40.0).reshape(2, 20)
    Xt = sel.transform(X)
    assert Xt.shape == (2, 3)
    assert np.array_equal(Xt, X[:, np.sort(sel.drivers_)])


def test_input_matrix_columns_are_versors(graph):
    sel = FLPSelector(n_drivers=3).fit(graph, targets=TARGETS)
    B = sel.input_matrix()
    assert B.shape == (20, 3)
    assert np.array_equal(B.sum(axis=0), np.ones(3))
    assert set(np.nonzero(B)[0]) == set(sel.drivers_)


def test_costs_report_all_three(graph):
    sel = LPGMSelector(n_drivers=3, random_state=0).fit(graph, targets=TARGETS)
    costs = sel.costs()
    assert set(costs) == {"vol_cost", "expected_energy", "flp_cost"}
    assert all(math.isfinite(v) for v in costs.values())


def test_lpgm_random_state_is_deterministic(graph):
    a = LPGMSelector(n_drivers=3, random_state=7).fit(graph, targets=TARGETS)
    b = LPGMSelector(n_drivers=3, random_state=7).fit(graph, targets=TARGETS)
    assert np.array_equal(a.drivers_, b.drivers_)


def test_unfitted_raises():
    with pytest.raises(NotFittedError):
        FLPSelector().get_support()


@pytest.mark.parametrize("m", [0, 21, 2.5])
def test_bad_n_drivers(graph, m):
    with pytest.raises(ConfigError):
        FLPSelector(n_drivers=m).fit(graph, targets=TARGETS)


def test_fit_accepts_state_matrix(graph):
    A = state_matrix(graph)
    g2 = check_graph(A)
    assert g2.edges == graph.edges
    assert g2.nu == pytest.approx(graph.nu)
    a = FLPSelector(n_drivers=3).fit(A, targets=TARGETS)
    b = FLPSelector(n_drivers=3).fit(graph, targets=TARGETS)
    assert np.array_equal(a.drivers_, b.drivers_)


def test_check_graph_rejects_nonuniform_matrix():
    with pytest.raises(ConfigError):
        check_graph(np.array([[-1.0, 0.5], [2.0, -1.0]]))


def test_default_targets_are_all_nodes(graph):
    sel = FLPSelector(n_drivers=2).fit(graph)
    assert sel.problem_.targets == tuple(range(20))


def test_hill_climb_selector_reaches_reachable_target(graph):
    prob = SelectionProblem(graph, TARGETS, 3)
    target = flp_set_cost(prob.structure, [1, 5, 9])
    sel = HillClimbSelector(n_drivers=3, target_cost=target, epsilon=0.05 * abs(target),
                            random_state=0).fit(graph, targets=TARGETS)
    assert sel.found_
    assert abs(sel.result_.flp_cost - target) <= 0.05 * abs(target)


def test_hill_climb_selector_reports_closest_on_failure(graph):
    sel = HillClimbSelector(n_drivers=3, target_cost=-1e6, epsilon=1e-9, max_iter=50,
                            random_state=0).fit(graph, targets=TARGETS)
    assert not sel.found_
    assert len(sel.drivers_) == 3
    assert sel.iterations_ <= 50
