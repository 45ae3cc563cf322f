"""End-to-end acceptance checks, one test group per criterion.

Run ``pytest tests/test_acceptance.py`` (or ``python3 tests/test_acceptance.py``);
the terminal summary ends with one PASS/FAIL line per criterion.
"""

import csv
import math
import random
import time

import pytest

from oracles import (
    bellman_ford,
    blind_metric,
    equilibrium_violations,
    knapsack_brute,
    naive_delta,
    naive_loads,
    naive_potential,
    truth_table_sat,
)
from sta import io
from sta.busline import MS_PER_HOUR, build_lines, select_lines, tvot
from sta.cli import main
from sta.engine import Dynamics, DynamicsConfig, Variant, is_equilibrium, run_dynamics
from sta.fixtures import fig2_instance, fig3_instance, grid_instance, grid_network, random_step_tables, \
    random_synergistic_instance
from sta.game import DemandSet, RoadNetwork, SelfishShare
from sta.metrics import average_sharing, average_stretch
from sta.optima import SatInstance, brute_force_optimum, poa_witness, reduce_sat, social_cost, \
    symmetric_images, valid_sat_instances
from sta.routing import NoPathError, cch_customize, cch_preprocess, distances_from

criterion = pytest.mark.criterion
SUITE_SEEDS = range(200)
MAX_ROUNDS = 1000


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def edge_potential(model, e, load):
    return sum(model.cost(e, l) for l in range(load + 1))


# --- 1, 2: counterexample cycles -------------------------------------------

@criterion(1, "two-agent fixture: period-2 cycle under simultaneous aware play")
def test_fig2_cycle(capsys):
    start = time.perf_counter()
    code = main(["dynamics", "--fixture", "fig2", "--variant", "sim-aware", "--epsilon", "0.5"])
    inst = fig2_instance(0.5)
    res = run_dynamics(inst.network, inst.demand, inst.model, DynamicsConfig(Variant.SIMULTANEOUS_AWARE))
    elapsed = time.perf_counter() - start
    assert code == 2
    assert "cycle: period 2" in capsys.readouterr().out
    assert (res.outcome.status, res.outcome.period) == ("cycle", 2)
    costs = [tuple(r.agent_costs) for r in res.trace]
    assert costs == [(1.0, 1.0), (1.5, 1.5), (1.0, 1.0)]
    assert elapsed < 1.0


@criterion(2, "group fixture: period-4 cycle under group-simultaneous aware play")
def test_fig3_cycle(capsys):
    start = time.perf_counter()
    code = main(["dynamics", "--fixture", "fig3", "--variant", "group"])
    inst = fig3_instance()
    res = run_dynamics(inst.network, inst.demand, inst.model, DynamicsConfig(Variant.GROUP_SIMULTANEOUS))
    elapsed = time.perf_counter() - start
    assert code == 2
    assert "cycle: period 4" in capsys.readouterr().out
    assert (res.outcome.status, res.outcome.period) == ("cycle", 4)
    blue = [r.agent_costs[0] for r in res.trace]
    red = [r.agent_costs[2] for r in res.trace]
    orange = [r.agent_costs[3] for r in res.trace]
    assert blue == [20, 19, 21, 20, 20]
    assert red == orange == [15, 11, 10, 16, 15]
    assert [r.agent_costs[1] for r in res.trace] == blue
    assert elapsed < 1.0


# --- 3, 4: random synergistic suite ----------------------------------------

def _replay_blind_simultaneous(model, profile, new):
    before, after = naive_loads(profile, len(model)), naive_loads(new, len(model))
    drop = naive_potential(before, model) - naive_potential(after, model)
    return drop, naive_delta(before, after, model)


def _replay_sequential(model, profile, new, loads):
    """Apply switches one agent at a time in id order; returns per-step (phi drop, delta, cost gain)."""
    steps = []
    for old_path, new_path in zip(profile, new):
        if old_path == new_path:
            continue
        touched = set(old_path) | set(new_path)
        before = {e: loads[e] for e in touched}
        old_cost = sum(model.cost(e, loads[e]) for e in old_path)
        for e in old_path:
            loads[e] -= 1
        for e in new_path:
            loads[e] += 1
        new_cost = sum(model.cost(e, loads[e]) for e in new_path)
        drop = sum(edge_potential(model, e, before[e]) - edge_potential(model, e, loads[e]) for e in touched)
        delta = sum(model.cost(e, before[e]) * (before[e] - loads[e]) for e in touched)
        steps.append((drop, delta, old_cost - new_cost))
    return steps


def _run_suite_instance(seed, variant):
    inst = random_synergistic_instance(seed)
    net, demand, model = inst.network, inst.demand, inst.model
    dyn = Dynamics(net, demand, model, DynamicsConfig(variant, check_invariants=False))
    profile, _ = dyn.initial_profile()
    for rnd in range(1, MAX_ROUNDS + 1):
        new, report = dyn.run_round(profile, rnd)
        loads = naive_loads(profile, net.m)
        phi_before = naive_potential(loads, model)
        if new == profile:
            assert report.switches == 0
            return inst, profile, rnd
        if variant is Variant.SIMULTANEOUS_BLIND:
            drop, delta = _replay_blind_simultaneous(model, profile, new)
            assert drop > 0, f"seed {seed} round {rnd}: potential did not decrease"
            assert drop >= delta > 0, f"seed {seed} round {rnd}: drop {drop} < delta {delta}"
            assert report.delta == delta
        else:
            steps = _replay_sequential(model, profile, new, loads)
            for drop, delta, gain in steps:
                if variant.blind:
                    assert drop >= delta > 0, f"seed {seed} round {rnd}: step drop {drop} < delta {delta}"
                else:
                    # aware moves are exact potential moves
                    assert drop == gain > 0, f"seed {seed} round {rnd}: drop {drop} != gain {gain}"
            assert naive_potential(loads, model) == phi_before - sum(s[0] for s in steps)
            assert report.phi_before - report.phi_after == sum(s[0] for s in steps)
        profile = new
    pytest.fail(f"seed {seed}: no convergence within {MAX_ROUNDS} rounds")


def _suite(variant, mode):
    worst_rounds = 0
    for seed in SUITE_SEEDS:
        inst, profile, rounds = _run_suite_instance(seed, variant)
        worst_rounds = max(worst_rounds, rounds)
        ok, witness = is_equilibrium(inst.network, inst.demand, profile, inst.model, mode)
        assert ok, f"seed {seed}: agent {witness} can still improve"
        # independent cross-check with the Bellman-Ford oracle on smaller instances
        if len(inst.demand) <= 40 or seed % 20 == 0:
            assert equilibrium_violations(inst.network, inst.demand, profile, inst.model, mode) == []
    print(f"{variant.name}: {len(SUITE_SEEDS)} instances, at most {worst_rounds} rounds")


@criterion(3, "random synergistic suite: blind dynamics decrease the potential and converge")
@pytest.mark.slow
@pytest.mark.parametrize("variant", [Variant.SIMULTANEOUS_BLIND, Variant.SEQUENTIAL_BLIND])
def test_blind_suite(variant):
    _suite(variant, "blind")


@criterion(4, "random synergistic suite: sequential aware dynamics converge to equilibria")
@pytest.mark.slow
def test_aware_suite():
    _suite(Variant.SEQUENTIAL_AWARE, "aware")


def test_suite_instances_are_within_bounds():
    for seed in SUITE_SEEDS:
        inst = random_synergistic_instance(seed)
        assert inst.network.n <= 256 and len(inst.demand) <= 200
        assert inst.model.synergistic


# --- 5: avoidant contrast ---------------------------------------------------

def _avoidant_candidate(seed):
    rng = random.Random(seed)
    n = rng.randint(3, 5)
    edges = [(u, v, 1) for u in range(n) for v in range(n) if u != v and rng.random() < 0.5]
    if not edges:
        return None
    net = RoadNetwork.from_edges(n, edges)
    pairs = []
    for _ in range(2):
        s, t = rng.sample(range(n), 2)
        if distances_from(net, net.d, s)[t] == math.inf:
            return None
        pairs.append((s, t))
    model = random_step_tables(net.m, rng, increasing=True, max_cost=9, max_steps=2)
    return net, DemandSet.from_pairs(pairs), model


def _check_blind_sequential_step(net, demand, model, profile, new):
    """Every switch in the round is a strict blind best response at the loads it saw."""
    current = list(profile)
    for a in demand.agents:
        loads = naive_loads(current, net.m)
        metric = blind_metric(loads, model)
        own = sum(metric[e] for e in current[a.id])
        best = bellman_ford(net, metric, a.origin)[a.destination]
        if new[a.id] != current[a.id]:
            assert sum(metric[e] for e in new[a.id]) == best < own
            current[a.id] = new[a.id]
        else:
            assert own <= best
    return tuple(current)


@criterion(5, "avoidant contrast: a non-decreasing cost instance cycles under sequential blind play")
def test_avoidant_cycle():
    found = []
    for seed in range(200):
        cand = _avoidant_candidate(seed)
        if cand is None:
            continue
        net, demand, model = cand
        res = run_dynamics(net, demand, model, DynamicsConfig(Variant.SEQUENTIAL_BLIND, max_rounds=50))
        if res.outcome.status == "cycle":
            found.append((seed, cand, res))
    assert found
    seed, (net, demand, model), res = found[0]
    # avoidant: every step table is non-decreasing
    assert all(all(b >= a for a, b in zip(model.costs[e], model.costs[e][1:])) for e in range(net.m))
    assert not model.synergistic
    profiles = [r.profile for r in res.trace]
    for before, after in zip(profiles, profiles[1:]):
        assert _check_blind_sequential_step(net, demand, model, before, after) == after
    assert profiles[-1] in profiles[:-1] and profiles[-1] != profiles[-2]
    print(f"avoidant cycles found at seeds {[s for s, _, _ in found]}; period {res.outcome.period} at seed {seed}")


# --- 6: routing equivalence -------------------------------------------------

def _routing_cases():
    rng = random.Random(2024)
    nets = [grid_network(w, h, rng) for w, h in ((4, 4), (10, 10), (16, 16), (24, 20))]
    nets += [fig2_instance().network, fig3_instance().network]
    for _ in range(3):
        n = 30
        edges = [(u, v, rng.randint(0, 50)) for u in range(n) for v in range(n) if u != v and rng.random() < 0.08]
        nets.append(RoadNetwork.from_edges(n, edges))
    for net in nets:
        integer = [rng.choice([0, rng.randint(0, 1000)]) for _ in range(net.m)]
        real = [rng.random() * 1000 for _ in range(net.m)]
        loads = [rng.randint(0, 40) for _ in range(net.m)]
        shared = SelfishShare(rng.choice([0.0, 0.1, 0.5]), net.d).metric(loads)
        yield net, list(net.d), True
        yield net, integer, True
        yield net, real, False
        yield net, shared, False


@criterion(6, "routing: CCH query costs equal Dijkstra costs over 10,000 queries")
def test_cch_equals_dijkstra():
    rng = random.Random(6)
    cases = list(_routing_cases())
    per_case = math.ceil(10_000 / len(cases))
    total = violations = 0
    for net, metric, integer in cases:
        searcher = cch_customize(cch_preprocess(net), metric).searcher()
        done = 0
        while done < per_case:
            s = rng.randrange(net.n)
            ref = distances_from(net, metric, s)
            for _ in range(min(25, per_case - done)):
                t = rng.randrange(net.n - 1)
                t += t >= s
                done += 1
                total += 1
                if ref[t] == math.inf:
                    with pytest.raises(NoPathError):
                        searcher.query(s, t)
                    continue
                path, cost = searcher.query(s, t)
                if integer:
                    ok = cost == ref[t] == sum(metric[e] for e in path)
                else:
                    ok = math.isclose(cost, ref[t], rel_tol=1e-9, abs_tol=1e-12)
                violations += not ok
    assert total >= 10_000
    assert violations == 0
    print(f"{total} queries, {violations} violations")


# --- 7: r = 1 baseline -------------------------------------------------------

@criterion(7, "r = 1 baseline: at most two rounds and stretch exactly 1")
@pytest.mark.parametrize("seed", range(8))
def test_r_one_is_free_flow(seed):
    if seed < 4:
        inst = grid_instance(4 + 4 * seed, 3 + 3 * seed, 50 + 100 * seed, ("uniform", "clustered")[seed % 2], seed=seed)
        net, demand = inst.network, inst.demand
    else:
        inst = random_synergistic_instance(seed)
        net, demand = inst.network, inst.demand
    res = run_dynamics(net, demand, SelfishShare(1.0, net.d))
    assert res.outcome.status == "converged" and res.outcome.rounds <= 2
    assert average_stretch(res.profile, net) == 1.0


# --- 8, 9: 32x32 grid --------------------------------------------------------

GRID_RS = (1.0, 0.1, 0.01, 0.0)


@pytest.fixture(scope="module")
def grid_runs(tmp_path_factory):
    base = tmp_path_factory.mktemp("grid32")
    files = io.export_instance(grid_instance(32, 32, 5000, "clustered", seed=7), base / "in")
    start = time.perf_counter()
    code = main(["assign", "--graph", str(files["graph"]), "--demand", str(files["demand"]),
                 "--r", "0", "--variant", "sim-blind", "--max-rounds", "50", "--out", str(base / "out")])
    elapsed = time.perf_counter() - start
    net = io.load_network(files["graph"])
    demand = io.load_demand(files["demand"], net)
    profiles = {0.0: io.load_paths(base / "out" / "paths.csv")}
    for r in GRID_RS[:-1]:
        profiles[r] = run_dynamics(net, demand, SelfishShare(r, net.d)).profile
    return {"code": code, "elapsed": elapsed, "out": base / "out", "network": net, "profiles": profiles}


@criterion(8, "32x32 grid, 5,000 clustered pairs, r = 0: converges within 50 rounds in under 30 s")
@pytest.mark.slow
def test_grid_convergence(grid_runs):
    out = grid_runs["out"]
    trace = read_csv(out / "trace.csv")
    outcome = read_csv(out / "outcome.csv")[0]
    assert grid_runs["code"] == 0 and outcome["status"] == "converged"
    rounds = int(outcome["rounds"])
    assert rounds <= 50
    # the initial routing is round 0 of the trace and counts as the first round
    assert [int(r["round"]) for r in trace] == list(range(rounds))
    assert int(trace[-1]["switches"]) == 0
    assert grid_runs["elapsed"] < 30.0
    print(f"converged in {rounds} rounds, {grid_runs['elapsed']:.1f} s")


@criterion(9, "sharing trend: more sharing and longer detours as r decreases")
@pytest.mark.slow
def test_sharing_trend(grid_runs):
    net, profiles = grid_runs["network"], grid_runs["profiles"]
    stretch = [average_stretch(profiles[r], net) for r in GRID_RS]
    sharing = [average_sharing(profiles[r], net) for r in GRID_RS]
    print("r, stretch, sharing:", list(zip(GRID_RS, stretch, sharing)))
    assert sharing[-1] > sharing[0]
    assert all(a <= b for a, b in zip(stretch, stretch[1:]))


# --- 10: bus lines -----------------------------------------------------------

@criterion(10, "bus lines: TVOT identity, zero budget, exact knapsack, capacity")
@pytest.mark.slow
def test_busline_identities(grid_runs):
    net = grid_runs["network"]
    paths = grid_runs["profiles"][0.0]
    baseline = sum(net.travel_time(p) for p in paths) / MS_PER_HOUR
    for capacity in (80, 20):
        lines = build_lines(paths, net, capacity)
        for line in lines:
            riders = [0] * len(line.edges)
            for a in line.assignments:
                run = line.edges[a.start:a.stop + 1]
                path = paths[a.traveler]
                assert any(tuple(path[i:i + len(run)]) == run for i in range(len(path)))
                for i in range(a.start, a.stop + 1):
                    riders[i] += 1
            assert max(riders) <= capacity
        for budget in (0.0, 0.1, 1.0, 5.0, 20.0, 1e6):
            plan = select_lines(lines, budget)
            assert abs(tvot(plan, paths, net) - (plan.bus_time_h + baseline - plan.coverage_h)) <= 1e-9
            assert plan.bus_time_h <= budget + 1e-9
        zero = select_lines(lines, 0.0)
        assert tvot(zero, paths, net) == sum(net.travel_time(p) for p in paths) / MS_PER_HOUR

    lines = build_lines(paths, net)
    for lo in range(0, min(len(lines), 90), 15):
        group = lines[lo:lo + 15]
        weights = [math.ceil(L.vehicle_time_h(0.1, 60) * 3600 - 1e-9) for L in group]
        values = [L.coverage_ms for L in group]
        for budget in (0.01, 0.05, sum(weights) / 7200):
            plan = select_lines(group, budget)
            best = knapsack_brute(weights, values, math.floor(budget * 3600 + 1e-9))
            assert sum(values[i] for i in plan.selected) == pytest.approx(best, rel=1e-12)


# --- 11: SAT reduction -------------------------------------------------------

def _sorted_clauses(clauses):
    return tuple(sorted(tuple(sorted(c)) for c in clauses))


@criterion(11, "SAT reduction: optimum is 3n exactly for satisfiable formulas with n <= 3")
@pytest.mark.slow
def test_sat_reduction_exhaustive():
    start = time.perf_counter()
    checked = 0
    for n in (1, 2, 3):
        reps = list(valid_sat_instances(n, up_to_symmetry=True))
        # every valid instance is a relabeling or polarity flip of some representative
        covered = set()
        for rep in reps:
            covered.update(_sorted_clauses(img) for img in symmetric_images(rep))
        everything = {_sorted_clauses(s.clauses) for s in valid_sat_instances(n)}
        assert everything <= covered
        for rep in reps:
            _, total = brute_force_optimum(*reduce_sat(rep))
            if truth_table_sat(n, rep.clauses):
                assert total == 3 * n, rep
            else:
                assert total > 3 * n, rep
            checked += 1
        print(f"n={n}: {len(everything)} instances in {len(reps)} classes")
    # the optimum does not depend on which member of a class is reduced
    rng = random.Random(11)
    sample = rng.sample(list(valid_sat_instances(3, up_to_symmetry=True)), 20)
    for rep in sample:
        image = rng.choice(list(symmetric_images(rep)))
        assert brute_force_optimum(*reduce_sat(SatInstance(3, image)))[1] == brute_force_optimum(*reduce_sat(rep))[1]
    elapsed = time.perf_counter() - start
    print(f"{checked} class representatives checked in {elapsed:.1f} s")
    assert elapsed < 60.0


# --- 12: price of anarchy ----------------------------------------------------

@criterion(12, "price-of-anarchy witness: ratio 100 for k = 5")
def test_poa_witness():
    w = poa_witness(5, 0.1, 0.001)
    bad = w.all_on(w.cheap_edge)
    assert is_equilibrium(w.network, w.demand, bad, w.model, "aware") == (True, None)
    opt_profile, opt = brute_force_optimum(*w)
    assert opt_profile == w.all_on(w.shared_edge)
    assert opt == 0.005
    assert social_cost(bad, w.network, w.model) / opt == 100.0


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-s"]))
