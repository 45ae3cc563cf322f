import random

import pytest
from hypothesis import given, settings, strategies as st

from oracles import knapsack_brute
from sta.busline import (
    MS_PER_HOUR,
    build_lines,
    covered_time,
    knapsack,
    select_lines,
    tvot,
)
from sta.engine import run_dynamics
from sta.fixtures import grid_instance
from sta.game import RoadNetwork


def chain(k, d=1000):
    return RoadNetwork.from_edges(k + 1, [(i, i + 1, d) for i in range(k)])


def test_single_path_gives_one_full_line():
    net = chain(3)
    lines = build_lines([(0, 1, 2)], net)
    assert len(lines) == 1
    line = lines[0]
    assert line.edges == (0, 1, 2) and line.tau == 3000
    assert line.coverage_ms == 3000
    assert line.vehicle_time_h(0.1, 60) == pytest.approx(6 * 3000 / MS_PER_HOUR)


def test_capacity_splits_identical_travelers():
    net = chain(2)
    lines = build_lines([(0, 1), (0, 1)], net, capacity=1)
    assert len(lines) == 2
    assert all(max(l.riders_per_edge()) <= 1 for l in lines)
    assert sorted(a.traveler for l in lines for a in l.assignments) == [0, 1]


def star_network():
    # trunk 0-1-2-3 (edges 0..2); spokes 3->4+i (edges 3..7), feeders 9+i->0 (edges 8..12)
    edges = [(0, 1, 1000), (1, 2, 1000), (2, 3, 1000)]
    edges += [(3, 4 + i, 500) for i in range(5)]
    edges += [(9 + i, 0, 500) for i in range(5)]
    return RoadNetwork.from_edges(14, edges)


def test_shared_trunk_carries_everyone():
    net = star_network()
    paths = [(8 + i, 0, 1, 2, 3 + i) for i in range(5)]
    lines = build_lines(paths, net)
    first = lines[0]
    # the seed is the heaviest edge, so the first line runs along the trunk
    assert set(first.edges) >= {0, 1, 2}
    assert {a.traveler for a in first.assignments} == set(range(5))
    trunk = [first.edges.index(e) for e in (0, 1, 2)]
    assert all(first.riders_per_edge()[i] == 5 for i in trunk)


def test_coverage_never_exceeds_travel_time():
    inst = grid_instance(8, 8, 150, "clustered", seed=3, r=0.0)
    res = run_dynamics(inst.network, inst.demand, inst.model)
    lines = build_lines(res.profile, inst.network, capacity=10)
    for line in lines:
        assert max(line.riders_per_edge()) <= 10
        assert len(set(line.edges)) == len(line.edges)
        for a in line.assignments:
            run = line.edges[a.start:a.stop + 1]
            path = res.profile[a.traveler]
            assert any(tuple(path[i:i + len(run)]) == run for i in range(len(path)))
            assert a.ridden_ms == inst.network.travel_time(run)
    plan = select_lines(lines, budget_h=1e9)
    cov = covered_time(plan, len(res.profile))
    for p, c in zip(res.profile, cov):
        assert c <= inst.network.travel_time(p) + 1e-9


def test_knapsack_small_example():
    chosen = knapsack([2, 3, 4], [3, 4, 6], 5)
    assert chosen == [0, 1]
    assert knapsack([2, 3, 4], [3, 4, 6], 0) == []


@settings(max_examples=80, deadline=None)
@given(st.lists(st.tuples(st.integers(1, 15), st.floats(0, 100)), min_size=0, max_size=9), st.integers(0, 40))
def test_knapsack_matches_brute_force(items, capacity):
    weights = [w for w, _ in items]
    values = [v for _, v in items]
    chosen = knapsack(weights, values, capacity)
    assert sum(weights[i] for i in chosen) <= capacity
    assert sum(values[i] for i in chosen) == pytest.approx(knapsack_brute(weights, values, capacity))


@pytest.fixture(scope="module")
def grid_plan_inputs():
    inst = grid_instance(10, 10, 300, "clustered", seed=9, r=0.0)
    res = run_dynamics(inst.network, inst.demand, inst.model)
    return inst.network, res.profile, build_lines(res.profile, inst.network)


def test_zero_budget_leaves_all_driving(grid_plan_inputs):
    net, paths, lines = grid_plan_inputs
    plan = select_lines(lines, 0.0)
    assert plan.selected == () and plan.bus_time_h == 0
    assert tvot(plan, paths, net) == sum(net.travel_time(p) for p in paths) / MS_PER_HOUR


@pytest.mark.parametrize("budget", [0.0, 0.05, 0.2, 1.0, 5.0])
def test_tvot_identity(grid_plan_inputs, budget):
    net, paths, lines = grid_plan_inputs
    plan = select_lines(lines, budget)
    baseline = sum(net.travel_time(p) for p in paths) / MS_PER_HOUR
    assert tvot(plan, paths, net) == pytest.approx(plan.bus_time_h + baseline - plan.coverage_h, rel=1e-12)
    assert plan.bus_time_h <= budget + 1e-9


def test_coverage_monotone_in_budget(grid_plan_inputs):
    _, _, lines = grid_plan_inputs
    budgets = [0.0, 0.01, 0.05, 0.1, 0.3, 1.0, 3.0, 10.0]
    cov = [select_lines(lines, b).coverage_h for b in budgets]
    assert all(a <= b + 1e-12 for a, b in zip(cov, cov[1:]))


def test_select_lines_rejects_negative_budget(grid_plan_inputs):
    with pytest.raises(ValueError):
        select_lines(grid_plan_inputs[2], -1)


def test_build_lines_deterministic():
    rng = random.Random(0)
    inst = grid_instance(6, 6, 80, "uniform", seed=rng.randint(0, 99), r=0.0)
    res = run_dynamics(inst.network, inst.demand, inst.model)
    assert build_lines(res.profile, inst.network) == build_lines(res.profile, inst.network)
