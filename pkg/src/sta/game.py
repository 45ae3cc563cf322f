"""Congestion-game data model for synergistic traffic assignment.

Networks, demand, strategy profiles, cost models and the potential-function
bookkeeping used by the best-response engine.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

Path = tuple[int, ...]
Profile = tuple[Path, ...]


class ValidationError(ValueError):
    """Raised when an input violates a structural invariant."""


@dataclass(frozen=True)
class RoadNetwork:
    """Directed multigraph with free-flow travel times ``d`` (milliseconds).

    Edge ids are the positions in ``tail``/``head``/``d``. Parallel edges are
    distinct resources.
    """

    n: int
    tail: tuple[int, ...]
    head: tuple[int, ...]
    d: tuple[float, ...]
    out_edges: tuple[tuple[int, ...], ...] = field(init=False, repr=False, compare=False)
    in_edges: tuple[tuple[int, ...], ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        m = len(self.tail)
        if len(self.head) != m or len(self.d) != m:
            raise ValidationError("tail, head and d must have equal length")
        if self.n < 0:
            raise ValidationError("vertex count must be non-negative")
        out: list[list[int]] = [[] for _ in range(self.n)]
        inc: list[list[int]] = [[] for _ in range(self.n)]
        for e in range(m):
            u, v, w = self.tail[e], self.head[e], self.d[e]
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise ValidationError(f"edge {e}: endpoint out of range [0, {self.n})")
            if not (w >= 0 and math.isfinite(w)):
                raise ValidationError(f"edge {e}: travel time must be finite and >= 0, got {w}")
            out[u].append(e)
            inc[v].append(e)
        object.__setattr__(self, "out_edges", tuple(map(tuple, out)))
        object.__setattr__(self, "in_edges", tuple(map(tuple, inc)))

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int, float]]) -> "RoadNetwork":
        edges = list(edges)
        return cls(
            n=n,
            tail=tuple(u for u, _, _ in edges),
            head=tuple(v for _, v, _ in edges),
            d=tuple(w for _, _, w in edges),
        )

    @property
    def m(self) -> int:
        return len(self.tail)

    def travel_time(self, path: Iterable[int]) -> float:
        return sum(self.d[e] for e in path)


class Agent(NamedTuple):
    id: int
    origin: int
    destination: int


@dataclass(frozen=True)
class DemandSet:
    agents: tuple[Agent, ...]

    def __post_init__(self) -> None:
        for i, a in enumerate(self.agents):
            if a.id != i:
                raise ValidationError(f"agent ids must be dense and ordered; position {i} has id {a.id}")
            if a.origin == a.destination:
                raise ValidationError(f"agent {a.id}: origin equals destination ({a.origin})")

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[int, int]]) -> "DemandSet":
        return cls(tuple(Agent(i, s, t) for i, (s, t) in enumerate(pairs)))

    def __len__(self) -> int:
        return len(self.agents)

    @property
    def groups(self) -> tuple[tuple[int, ...], ...]:
        """Agents partitioned by O-D pair, ordered by smallest member id."""
        by_pair: dict[tuple[int, int], list[int]] = {}
        for a in self.agents:
            by_pair.setdefault((a.origin, a.destination), []).append(a.id)
        return tuple(tuple(g) for g in by_pair.values())

    def validate_for(self, network: RoadNetwork) -> None:
        """Check vertex ranges and that every destination is reachable."""
        reach: dict[int, set[int]] = {}
        for a in self.agents:
            for v in (a.origin, a.destination):
                if not 0 <= v < network.n:
                    raise ValidationError(f"agent {a.id}: vertex {v} not in network")
            if a.origin not in reach:
                reach[a.origin] = _reachable(network, a.origin)
            if a.destination not in reach[a.origin]:
                raise ValidationError(
                    f"agent {a.id}: destination {a.destination} unreachable from {a.origin}"
                )


def _reachable(network: RoadNetwork, s: int) -> set[int]:
    seen = {s}
    stack = [s]
    while stack:
        u = stack.pop()
        for e in network.out_edges[u]:
            v = network.head[e]
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return seen


def validate_path(path: Sequence[int], network: RoadNetwork, origin: int, destination: int) -> None:
    """Raise ValidationError unless ``path`` is a simple origin-destination path."""
    if not path:
        raise ValidationError("empty path")
    bad = [e for e in path if not 0 <= e < network.m]
    if bad:
        raise ValidationError(f"unknown edge id {bad[0]}")
    if network.tail[path[0]] != origin:
        raise ValidationError(f"path starts at {network.tail[path[0]]}, expected {origin}")
    if network.head[path[-1]] != destination:
        raise ValidationError(f"path ends at {network.head[path[-1]]}, expected {destination}")
    seen = {origin}
    for prev, e in zip(path, path[1:]):
        if network.head[prev] != network.tail[e]:
            raise ValidationError(f"edges {prev} and {e} are not contiguous")
    for e in path:
        v = network.head[e]
        if v in seen:
            raise ValidationError(f"path revisits vertex {v}")
        seen.add(v)


def validate_profile(profile: Sequence[Sequence[int]], network: RoadNetwork, demand: DemandSet) -> None:
    if len(profile) != len(demand):
        raise ValidationError(f"profile has {len(profile)} paths for {len(demand)} agents")
    for a, path in zip(demand.agents, profile):
        try:
            validate_path(path, network, a.origin, a.destination)
        except ValidationError as exc:
            raise ValidationError(f"agent {a.id}: {exc}") from None


# -- cost models -----------------------------------------------------------


class CostModel:
    """Per-edge cost as a function of load.

    Subclasses implement ``cost``; ``metric`` and ``edge_potential`` have
    generic fallbacks.
    """

    synergistic: bool = True

    def cost(self, e: int, load: int) -> float:
        raise NotImplementedError

    def metric(self, loads: Sequence[int], offset: int = 0) -> list[float]:
        """Costs of every edge at ``loads[e] + offset``."""
        return [self.cost(e, ell + offset) for e, ell in enumerate(loads)]

    def edge_potential(self, e: int, load: int) -> float:
        """Sum of ``cost(e, l)`` for l = 0..load."""
        return sum(self.cost(e, ell) for ell in range(load + 1))

    def check_network(self, network: RoadNetwork) -> None:
        pass

    def check_nonnegative(self, network: RoadNetwork, max_load: int) -> None:
        """Routing needs non-negative costs; synergistic costs are smallest at high load."""
        for e in range(network.m):
            if self.cost(e, max_load) < 0 or self.cost(e, 0) < 0:
                raise ValidationError(f"edge {e}: negative cost is not supported by routing")


class StepTable(CostModel):
    """Right-continuous step functions given as sorted ``(threshold, cost)`` breakpoints.

    ``tables[e]`` must start at threshold 0. The cost for load l is the cost of
    the largest threshold <= l. Increasing tables are rejected unless
    ``allow_increasing`` is set, which exists only to build avoidant contrast
    instances in tests.
    """

    def __init__(self, tables: Sequence[Sequence[tuple[int, float]]], *, allow_increasing: bool = False):
        self.thresholds: list[tuple[int, ...]] = []
        self.costs: list[tuple[float, ...]] = []
        increasing = False
        for e, table in enumerate(tables):
            if not table:
                raise ValidationError(f"edge {e}: empty step table")
            ths = tuple(int(t) for t, _ in table)
            cs = tuple(c for _, c in table)
            if ths[0] != 0:
                raise ValidationError(f"edge {e}: first threshold must be 0")
            if any(b <= a for a, b in zip(ths, ths[1:])):
                raise ValidationError(f"edge {e}: thresholds must be strictly increasing")
            if any(not math.isfinite(c) for c in cs):
                raise ValidationError(f"edge {e}: non-finite cost")
            if any(b > a for a, b in zip(cs, cs[1:])):
                if not allow_increasing:
                    raise ValidationError(f"edge {e}: cost increases with load (not synergistic)")
                increasing = True
            self.thresholds.append(ths)
            self.costs.append(cs)
        self.synergistic = not increasing
        self._constant = [len(t) == 1 for t in self.thresholds]

    @classmethod
    def constant(cls, costs: Sequence[float]) -> "StepTable":
        return cls([[(0, c)] for c in costs])

    def __len__(self) -> int:
        return len(self.thresholds)

    def __eq__(self, other) -> bool:
        if not isinstance(other, StepTable):
            return NotImplemented
        return self.thresholds == other.thresholds and self.costs == other.costs

    __hash__ = None

    def table(self, e: int) -> list[tuple[int, float]]:
        return list(zip(self.thresholds[e], self.costs[e]))

    def cost(self, e: int, load: int) -> float:
        if self._constant[e]:
            return self.costs[e][0]
        return self.costs[e][bisect_right(self.thresholds[e], load) - 1]

    def edge_potential(self, e: int, load: int) -> float:
        ths, cs = self.thresholds[e], self.costs[e]
        total = 0
        for k, start in enumerate(ths):
            if start > load:
                break
            end = ths[k + 1] - 1 if k + 1 < len(ths) else load
            total += cs[k] * (min(end, load) - start + 1)
        return total

    def check_network(self, network: RoadNetwork) -> None:
        if len(self) != network.m:
            raise ValidationError(f"step table covers {len(self)} edges, network has {network.m}")

    def check_nonnegative(self, network: RoadNetwork, max_load: int) -> None:
        for e, cs in enumerate(self.costs):
            if min(cs) < 0:
                raise ValidationError(f"edge {e}: negative cost is not supported by routing")


class SelfishShare(CostModel):
    """``r * d + (1 - r) * d / (load + 1)`` with the network's free-flow times."""

    def __init__(self, r: float, d: Sequence[float]):
        if not 0.0 <= r <= 1.0:
            raise ValidationError(f"selfishness r must lie in [0, 1], got {r}")
        self.r = float(r)
        self.d = tuple(d)
        self._d = np.asarray(self.d, dtype=float)
        self._harmonic = [0.0]

    def cost(self, e: int, load: int) -> float:
        d = self.d[e]
        return self.r * d + (1.0 - self.r) * d / (load + 1)

    def metric(self, loads: Sequence[int], offset: int = 0) -> list[float]:
        ell = np.asarray(loads, dtype=float) + offset
        return (self.r * self._d + (1.0 - self.r) * self._d / (ell + 1.0)).tolist()

    def _harmonic_upto(self, n: int) -> float:
        h = self._harmonic
        while len(h) <= n:
            h.append(h[-1] + 1.0 / len(h))
        return h[n]

    def edge_potential(self, e: int, load: int) -> float:
        d = self.d[e]
        return self.r * d * (load + 1) + (1.0 - self.r) * d * self._harmonic_upto(load + 1)

    def check_network(self, network: RoadNetwork) -> None:
        if len(self.d) != network.m:
            raise ValidationError(f"cost model covers {len(self.d)} edges, network has {network.m}")

    def check_nonnegative(self, network: RoadNetwork, max_load: int) -> None:
        pass  # d >= 0 is a network invariant


# -- evaluation ------------------------------------------------------------


def compute_loads(profile: Sequence[Sequence[int]], network: RoadNetwork,
                  demand: DemandSet | None = None) -> list[int]:
    """Number of agents using each edge. Validates paths when ``demand`` is given."""
    if demand is not None:
        validate_profile(profile, network, demand)
    loads = [0] * network.m
    for path in profile:
        for e in path:
            loads[e] += 1
    return loads


def edge_cost(e: int, load: int, model: CostModel) -> float:
    if load < 0:
        raise ValueError("load must be non-negative")
    return model.cost(e, load)


def path_cost(path: Sequence[int], loads: Sequence[int], model: CostModel, mode: str = "blind",
              current: Sequence[Sequence[int]] | Sequence[int] = (), group_size: int = 1) -> float:
    """Cost of ``path`` as seen by an agent (or group) under ``mode``.

    ``blind``: sum of c_e(l_e).
    ``aware``: ``current`` is the agent's own path; the agent's load moves
    from ``current`` onto ``path``.
    ``group_aware``: ``current`` holds the current paths of the ``group_size``
    members; all of them move onto ``path``.
    """
    if mode == "blind":
        return sum(model.cost(e, loads[e]) for e in path)
    if mode == "aware":
        own = set(current)  # type: ignore[arg-type]
        return sum(model.cost(e, loads[e] - (e in own) + 1) for e in path)
    if mode == "group_aware":
        if group_size < 1:
            raise ValueError("group_size must be >= 1")
        members = list(current)
        if len(members) != group_size:
            raise ValueError(f"expected {group_size} current paths, got {len(members)}")
        used = Counter(e for p in members for e in p)  # type: ignore[union-attr]
        return sum(model.cost(e, loads[e] - used[e] + group_size) for e in path)
    raise ValueError(f"unknown mode {mode!r}")


def agent_costs(profile: Sequence[Sequence[int]], loads: Sequence[int], model: CostModel) -> list[float]:
    return [path_cost(p, loads, model) for p in profile]


def potential(loads: Sequence[int], model: CostModel) -> float:
    """Rosenthal potential, including the load-0 term of every edge."""
    return sum(model.edge_potential(e, ell) for e, ell in enumerate(loads))


def potential_difference(before: Sequence[int], after: Sequence[int], model: CostModel) -> float:
    """phi(before) - phi(after), summed only over edges whose load changed."""
    total = 0
    for e, (a, b) in enumerate(zip(before, after)):
        if a > b:
            total += sum(model.cost(e, ell) for ell in range(b + 1, a + 1))
        elif b > a:
            total -= sum(model.cost(e, ell) for ell in range(a + 1, b + 1))
    return total


def anticipated_decrease(before: Sequence[int], after: Sequence[int],
                         model: CostModel) -> tuple[float, dict[int, float]]:
    """Per-edge anticipated decrease c_e(l_e) * (l_e - l'_e) at pre-change costs."""
    per_edge = {}
    for e, (a, b) in enumerate(zip(before, after)):
        if a != b:
            per_edge[e] = model.cost(e, a) * (a - b)
    return sum(per_edge.values()), per_edge
