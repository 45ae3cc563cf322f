"""Slow, obviously-correct reference implementations used only by the tests."""

from __future__ import annotations

import itertools
import math

INF = math.inf


def naive_loads(profile, m):
    loads = [0] * m
    for p in profile:
        for e in p:
            loads[e] += 1
    return loads


def naive_potential(loads, model):
    """Sum over edges of cost(e, l) for l = 0..load, term by term."""
    return sum(model.cost(e, l) for e, load in enumerate(loads) for l in range(load + 1))


def naive_delta(before, after, model):
    return sum(model.cost(e, b) * (b - a) for e, (b, a) in enumerate(zip(before, after)))


def bellman_ford(network, costs, s):
    dist = [INF] * network.n
    dist[s] = 0
    for _ in range(network.n):
        changed = False
        for e in range(network.m):
            u, v = network.tail[e], network.head[e]
            if dist[u] + costs[e] < dist[v]:
                dist[v] = dist[u] + costs[e]
                changed = True
        if not changed:
            break
    return dist


def blind_metric(loads, model):
    return [model.cost(e, l) for e, l in enumerate(loads)]


def aware_metric(loads, model, own_path):
    own = set(own_path)
    return [model.cost(e, l if e in own else l + 1) for e, l in enumerate(loads)]


def equilibrium_violations(network, demand, profile, model, mode, rtol=1e-9):
    """Agents holding a strictly cheaper deviation under ``mode`` ("blind" or "aware")."""
    loads = naive_loads(profile, network.m)
    bad = []
    cache = {}
    for a in demand.agents:
        path = profile[a.id]
        if mode == "blind":
            key = a.origin
            if key not in cache:
                cache[key] = (blind_metric(loads, model), bellman_ford(network, blind_metric(loads, model), a.origin))
            metric, dist = cache[key]
        else:
            metric = aware_metric(loads, model, path)
            dist = bellman_ford(network, metric, a.origin)
        own = sum(metric[e] for e in path)
        best = dist[a.destination]
        if best < own - rtol * max(1.0, abs(own)):
            bad.append(a.id)
    return bad


def all_simple_paths(network, s, t):
    out = []

    def walk(u, seen, acc):
        if u == t:
            out.append(tuple(acc))
            return
        for e in network.out_edges[u]:
            v = network.head[e]
            if v not in seen:
                walk(v, seen | {v}, acc + [e])

    walk(s, {s}, [])
    return out


def exhaustive_optimum(network, demand, model):
    options = [all_simple_paths(network, a.origin, a.destination) for a in demand.agents]
    best = INF
    for profile in itertools.product(*options):
        loads = naive_loads(profile, network.m)
        total = sum(model.cost(e, loads[e]) for p in profile for e in p)
        best = min(best, total)
    return best


def knapsack_brute(weights, values, capacity):
    best = 0.0
    n = len(weights)
    for mask in range(1 << n):
        w = sum(weights[i] for i in range(n) if mask >> i & 1)
        if w <= capacity:
            best = max(best, sum(values[i] for i in range(n) if mask >> i & 1))
    return best


def truth_table_sat(n, clauses):
    for bits in itertools.product((False, True), repeat=n):
        if all(any(bits[abs(l) - 1] == (l > 0) for l in c) for c in clauses):
            return True
    return False
