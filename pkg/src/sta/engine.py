"""Best-response dynamics for synergistic traffic assignment.

All variants start from the zero-load profile (every agent on its cheapest
path as if alone) and then repeat rounds until no agent switches, a profile
repeats, or the round limit is hit. Agents switch only on strict improvement.
"""

from __future__ import annotations

import hashlib
import logging
import math
import os
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple, Sequence

import numpy as np

from .game import (
    Agent,
    CostModel,
    DemandSet,
    Path,
    Profile,
    RoadNetwork,
    anticipated_decrease,
    compute_loads,
    path_cost,
    potential,
)
from .routing import CCHIndex, cch_customize, cch_preprocess, dijkstra

log = logging.getLogger(__name__)

# switching needs a gain beyond float noise; integer and fixture costs differ by far more
IMPROVE_RTOL = 1e-9


class Variant(str, Enum):
    SEQUENTIAL_AWARE = "sequential_aware"
    SIMULTANEOUS_AWARE = "simultaneous_aware"
    SEQUENTIAL_BLIND = "sequential_blind"
    SIMULTANEOUS_BLIND = "simultaneous_blind"
    GROUP_SIMULTANEOUS = "group_simultaneous_group_aware"
    GROUP_SEQUENTIAL = "group_sequential_group_aware"

    @property
    def blind(self) -> bool:
        return self in (Variant.SEQUENTIAL_BLIND, Variant.SIMULTANEOUS_BLIND)

    @property
    def grouped(self) -> bool:
        return self in (Variant.GROUP_SIMULTANEOUS, Variant.GROUP_SEQUENTIAL)

    @classmethod
    def parse(cls, name: str) -> "Variant":
        name = VARIANT_ALIASES.get(name, name)
        return cls(name)


VARIANT_ALIASES = {
    "seq-aware": Variant.SEQUENTIAL_AWARE.value,
    "sim-aware": Variant.SIMULTANEOUS_AWARE.value,
    "seq-blind": Variant.SEQUENTIAL_BLIND.value,
    "sim-blind": Variant.SIMULTANEOUS_BLIND.value,
    "group": Variant.GROUP_SIMULTANEOUS.value,
    "group-seq": Variant.GROUP_SEQUENTIAL.value,
}


class InvariantViolation(AssertionError):
    pass


@dataclass(frozen=True)
class DynamicsConfig:
    variant: Variant = Variant.SIMULTANEOUS_BLIND
    max_rounds: int = 1000
    record_trace: bool = True
    check_invariants: bool = True
    backend: str = "auto"  # auto | cch | dijkstra; affects simultaneous_blind only
    threads: int | None = None  # query workers; None reads STA_THREADS

    def __post_init__(self) -> None:
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be >= 1")
        if self.backend not in ("auto", "cch", "dijkstra"):
            raise ValueError(f"unknown backend {self.backend!r}")
        object.__setattr__(self, "variant", Variant.parse(self.variant))


@dataclass(frozen=True)
class Outcome:
    status: str  # converged | cycle | round_limit
    rounds: int
    period: int | None = None
    first_repeat_round: int | None = None

    @property
    def exit_code(self) -> int:
        return {"converged": 0, "cycle": 2, "round_limit": 3}[self.status]


@dataclass
class RoundReport:
    round: int
    phi_before: float
    phi_after: float
    delta: float
    switches: int
    load_hash: str
    loads_changed: bool
    agent_costs: list[float] | None = None  # kept for small instances only
    profile: Profile | None = None  # likewise
    customize_ms: float = 0.0
    query_ms: float = 0.0


@dataclass
class DynamicsResult:
    outcome: Outcome
    profile: Profile
    loads: list[int]
    trace: list[RoundReport] = field(default_factory=list)


class Response(NamedTuple):
    path: Path
    cost: float
    current_cost: float

    @property
    def switched(self) -> bool:
        return improves(self.cost, self.current_cost)


def improves(new: float, current: float) -> bool:
    if current == math.inf:
        return new < math.inf
    return new < current - IMPROVE_RTOL * max(1.0, abs(current))


def load_hash(loads: Sequence[int]) -> str:
    return hashlib.blake2b(np.asarray(loads, dtype=np.int64).tobytes(), digest_size=8).hexdigest()


def _thread_count(config: DynamicsConfig) -> int:
    n = config.threads
    if n is None:
        n = int(os.environ.get("STA_THREADS", "0") or 0)
    # 0 = auto; the query loop holds the GIL, so auto means one worker
    return max(1, n)


def _mode_metric(model: CostModel, loads: Sequence[int], mode: str,
                 current: Sequence[Sequence[int]]) -> list[float]:
    if mode == "blind":
        return model.metric(loads)
    group = len(current)
    metric = model.metric(loads, offset=group)
    used = Counter(e for p in current for e in p)
    for e, k in used.items():
        metric[e] = model.cost(e, loads[e] - k + group)
    return metric


def best_response(network: RoadNetwork, agent: Agent, profile: Sequence[Path], loads: Sequence[int],
                  model: CostModel, mode: str = "blind", group: Sequence[int] | None = None) -> Response:
    """Cheapest path for ``agent`` (or for its whole ``group``) under ``mode``.

    Returns the current path when it already attains the minimum.
    """
    members = list(group) if group is not None else [agent.id]
    current = [profile[i] for i in members]
    if mode == "aware" and len(members) != 1:
        raise ValueError("aware mode evaluates a single agent; use group_aware")
    metric = _mode_metric(model, loads, "blind" if mode == "blind" else "aware", current)
    path, cost = dijkstra(network, metric, agent.origin, agent.destination)
    own = profile[agent.id]
    cur_cost = sum(metric[e] for e in own) if own else math.inf
    cost = sum(metric[e] for e in path)
    if path == own or not improves(cost, cur_cost):
        return Response(own, cur_cost, cur_cost)
    return Response(path, cost, cur_cost)


def is_equilibrium(network: RoadNetwork, demand: DemandSet, profile: Sequence[Path], model: CostModel,
                   mode: str = "blind") -> tuple[bool, int | None]:
    """True iff no agent has a strictly cheaper response; else the first deviator."""
    if mode not in ("blind", "aware"):
        raise ValueError(f"unknown mode {mode!r}")
    loads = compute_loads(profile, network)
    for a in demand.agents:
        if best_response(network, a, profile, loads, model, mode).switched:
            return False, a.id
    return True, None


class Dynamics:
    """One dynamics run: holds the instance, the routing index and the current state."""

    def __init__(self, network: RoadNetwork, demand: DemandSet, model: CostModel,
                 config: DynamicsConfig | None = None, index: CCHIndex | None = None):
        self.network = network
        self.demand = demand
        self.model = model
        self.config = config or DynamicsConfig()
        model.check_network(network)
        model.check_nonnegative(network, max(1, len(demand)))
        demand.validate_for(network)
        self._index = index
        self._pairs: dict[tuple[int, int], list[int]] = {}
        for a in demand.agents:
            self._pairs.setdefault((a.origin, a.destination), []).append(a.id)

    @property
    def index(self) -> CCHIndex:
        if self._index is None:
            self._index = cch_preprocess(self.network)
        return self._index

    @property
    def _use_cch(self) -> bool:
        return self.config.backend != "dijkstra"

    # -- routing ----------------------------------------------------------

    def _route_pairs(self, metric: list[float]) -> tuple[dict[tuple[int, int], Path], float, float]:
        """Shortest path for every distinct O-D pair under one shared metric."""
        pairs = list(self._pairs)
        index = self.index if self._use_cch else None
        t0 = time.perf_counter()
        if index is None:
            routes = {p: dijkstra(self.network, metric, *p, check=False)[0] for p in pairs}
            return routes, 0.0, (time.perf_counter() - t0) * 1e3
        customized = cch_customize(index, metric)
        t1 = time.perf_counter()
        workers = _thread_count(self.config)
        if workers == 1:
            searcher = customized.searcher()
            routes = {p: searcher.query(*p)[0] for p in pairs}
        else:
            chunks = [pairs[i::workers] for i in range(workers)]

            def work(chunk):
                searcher = customized.searcher()
                return [(p, searcher.query(*p)[0]) for p in chunk]

            with ThreadPoolExecutor(workers) as pool:
                found = dict(kv for part in pool.map(work, chunks) for kv in part)
            routes = {p: found[p] for p in pairs}
        t2 = time.perf_counter()
        return routes, (t1 - t0) * 1e3, (t2 - t1) * 1e3

    # -- rounds -----------------------------------------------------------

    def initial_profile(self) -> tuple[Profile, RoundReport]:
        zero = [0] * self.network.m
        metric = self.model.metric(zero)
        routes, cms, qms = self._route_pairs(metric)
        profile = tuple(routes[(a.origin, a.destination)] for a in self.demand.agents)
        loads = compute_loads(profile, self.network)
        report = self._report(0, zero, loads, profile, 0.0, len(profile), cms, qms)
        return profile, report

    def run_round(self, profile: Profile, round_no: int = 1) -> tuple[Profile, RoundReport]:
        variant = self.config.variant
        loads = compute_loads(profile, self.network)
        if variant is Variant.SIMULTANEOUS_BLIND:
            new, delta, switches, cms, qms = self._simultaneous_blind(profile, loads)
        elif variant in (Variant.SEQUENTIAL_BLIND, Variant.SEQUENTIAL_AWARE):
            new, delta, switches, cms, qms = self._sequential(profile, loads, variant.blind)
        elif variant is Variant.SIMULTANEOUS_AWARE:
            new, delta, switches, cms, qms = self._grouped(profile, loads, [(a.id,) for a in self.demand.agents],
                                                          simultaneous=True)
        else:
            new, delta, switches, cms, qms = self._grouped(profile, loads, self.demand.groups,
                                                          simultaneous=variant is Variant.GROUP_SIMULTANEOUS)
        new_loads = compute_loads(new, self.network)
        report = self._report(round_no, loads, new_loads, new, delta, switches, cms, qms)
        if self.config.check_invariants:
            self._check_round(report, loads, new_loads)
        return new, report

    def _simultaneous_blind(self, profile: Profile, loads: list[int]):
        metric = self.model.metric(loads)
        routes, cms, qms = self._route_pairs(metric)
        new = list(profile)
        delta = 0.0
        switches = 0
        for a in self.demand.agents:
            cand = routes[(a.origin, a.destination)]
            cur = profile[a.id]
            if cand == cur:
                continue
            cur_cost = sum(metric[e] for e in cur)
            new_cost = sum(metric[e] for e in cand)
            if improves(new_cost, cur_cost):
                new[a.id] = cand
                delta += cur_cost - new_cost
                switches += 1
        return tuple(new), delta, switches, cms, qms

    def _sequential(self, profile: Profile, loads: list[int], blind: bool):
        model, net = self.model, self.network
        loads = list(loads)
        new = list(profile)
        blind_metric = model.metric(loads)
        joined = None if blind else model.metric(loads, offset=1)
        delta = 0.0
        switches = 0
        t0 = time.perf_counter()
        for a in self.demand.agents:
            cur = new[a.id]
            if blind:
                metric = blind_metric
            else:
                metric = joined.copy()
                for e in cur:
                    metric[e] = blind_metric[e]
            cand, _ = dijkstra(net, metric, a.origin, a.destination, check=False)
            if cand == cur:
                continue
            cur_cost = sum(metric[e] for e in cur)
            new_cost = sum(metric[e] for e in cand)
            if not improves(new_cost, cur_cost):
                continue
            new[a.id] = cand
            delta += cur_cost - new_cost
            switches += 1
            for e in cur:
                loads[e] -= 1
            for e in cand:
                loads[e] += 1
            for e in set(cur).symmetric_difference(cand):
                blind_metric[e] = model.cost(e, loads[e])
                if joined is not None:
                    joined[e] = model.cost(e, loads[e] + 1)
        return tuple(new), delta, switches, 0.0, (time.perf_counter() - t0) * 1e3

    def _grouped(self, profile: Profile, loads: list[int], groups: Sequence[Sequence[int]], simultaneous: bool):
        """Group-aware responses; singleton groups give plain impact-aware responses."""
        model, net = self.model, self.network
        base = list(loads)
        live = list(loads)
        new = list(profile)
        delta = 0.0
        switches = 0
        t0 = time.perf_counter()
        for members in groups:
            view = base if simultaneous else live
            state = profile if simultaneous else new
            current = [state[i] for i in members]
            metric = _mode_metric(model, view, "group_aware", current)
            lead = self.demand.agents[members[0]]
            cand, _ = dijkstra(net, metric, lead.origin, lead.destination, check=False)
            cur = current[0]
            if all(p == cand for p in current):
                continue
            cur_cost = sum(metric[e] for e in cur)
            new_cost = sum(metric[e] for e in cand)
            if not improves(new_cost, cur_cost):
                continue
            for i, p in zip(members, current):
                if p == cand:
                    continue
                new[i] = cand
                switches += 1
                delta += cur_cost - new_cost
                for e in p:
                    live[e] -= 1
                for e in cand:
                    live[e] += 1
        return tuple(new), delta, switches, 0.0, (time.perf_counter() - t0) * 1e3

    # -- bookkeeping ------------------------------------------------------

    def _report(self, round_no, before, after, profile, delta, switches, cms, qms) -> RoundReport:
        costs = small = None
        if len(profile) <= 16:
            costs = [path_cost(p, after, self.model) for p in profile]
            small = profile
        return RoundReport(
            round=round_no,
            phi_before=potential(before, self.model),
            phi_after=potential(after, self.model),
            delta=delta,
            switches=switches,
            load_hash=load_hash(after),
            loads_changed=list(before) != list(after),
            agent_costs=costs,
            profile=small,
            customize_ms=cms,
            query_ms=qms,
        )

    def _check_round(self, report: RoundReport, before: list[int], after: list[int]) -> None:
        variant = self.config.variant
        if not self.model.synergistic:
            return
        if variant.blind or variant is Variant.SEQUENTIAL_AWARE:
            if (report.switches == 0) == report.loads_changed:
                raise InvariantViolation(
                    f"round {report.round}: {report.switches} switches but loads_changed={report.loads_changed}"
                )
        if not variant.blind or report.switches == 0:
            return
        drop = report.phi_before - report.phi_after
        tol = IMPROVE_RTOL * max(1.0, abs(report.phi_before))
        if not report.delta > 0:
            raise InvariantViolation(f"round {report.round}: switching round with delta {report.delta}")
        if drop < report.delta - tol:
            raise InvariantViolation(
                f"round {report.round}: potential drop {drop} below anticipated decrease {report.delta}"
            )
        if variant is Variant.SIMULTANEOUS_BLIND:
            by_edge, _ = anticipated_decrease(before, after, self.model)
            if abs(by_edge - report.delta) > tol:
                raise InvariantViolation(
                    f"round {report.round}: per-edge decrease {by_edge} != per-agent decrease {report.delta}"
                )

    def run(self) -> DynamicsResult:
        profile, report = self.initial_profile()
        trace = [report] if self.config.record_trace else []
        seen: dict[int, list[int]] = {hash(profile): [0]}
        states = [profile]
        rounds = 1
        while rounds < self.config.max_rounds:
            profile, report = self.run_round(profile, rounds)
            if self.config.record_trace:
                trace.append(report)
            rounds += 1
            if report.switches == 0:
                return self._result(Outcome("converged", rounds), profile, trace)
            key = hash(profile)
            for r0 in seen.get(key, ()):
                if states[r0] == profile:
                    r = rounds - 1
                    outcome = Outcome("cycle", rounds, period=r - r0, first_repeat_round=r)
                    return self._result(outcome, profile, trace)
            seen.setdefault(key, []).append(len(states))
            states.append(profile)
        return self._result(Outcome("round_limit", rounds), profile, trace)

    def _result(self, outcome: Outcome, profile: Profile, trace: list[RoundReport]) -> DynamicsResult:
        log.info("dynamics %s: %s after %d rounds", self.config.variant.value, outcome.status, outcome.rounds)
        return DynamicsResult(outcome, profile, compute_loads(profile, self.network), trace)


def run_round(network: RoadNetwork, demand: DemandSet, profile: Profile, model: CostModel,
              config: DynamicsConfig) -> tuple[Profile, RoundReport]:
    return Dynamics(network, demand, model, config).run_round(tuple(map(tuple, profile)))


def run_dynamics(network: RoadNetwork, demand: DemandSet, model: CostModel,
                 config: DynamicsConfig | None = None, index: CCHIndex | None = None) -> DynamicsResult:
    return Dynamics(network, demand, model, config, index).run()
