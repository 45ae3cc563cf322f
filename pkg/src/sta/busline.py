"""Greedy trunk-line construction on traveler paths, budgeted line selection, TVOT.

Times on the network are milliseconds; line operation parameters follow the
usual transit units (frequency per minute, window in minutes, budget in hours).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .game import RoadNetwork

MS_PER_HOUR = 3_600_000.0

DEFAULT_CAPACITY = 80
DEFAULT_FREQ_PER_MIN = 0.1
DEFAULT_WINDOW_MIN = 60.0


class Assignment(NamedTuple):
    traveler: int
    start: int  # first line position ridden
    stop: int  # last line position ridden (inclusive)
    ridden_ms: float


@dataclass(frozen=True)
class BusLine:
    edges: tuple[int, ...]
    tau: float  # end-to-end travel time, ms
    assignments: tuple[Assignment, ...] = ()

    def riders_per_edge(self) -> list[int]:
        occ = [0] * len(self.edges)
        for a in self.assignments:
            for i in range(a.start, a.stop + 1):
                occ[i] += 1
        return occ

    @property
    def coverage_ms(self) -> float:
        return sum(a.ridden_ms for a in self.assignments)

    def vehicle_time_h(self, freq_per_min: float, window_min: float) -> float:
        return window_min * freq_per_min * self.tau / MS_PER_HOUR


@dataclass(frozen=True)
class LinePlan:
    candidates: tuple[BusLine, ...]
    selected: tuple[int, ...]
    budget_h: float
    freq_per_min: float
    window_min: float
    coverage_h: float
    bus_time_h: float = field(init=False)

    def __post_init__(self) -> None:
        bus = sum(self.candidates[i].vehicle_time_h(self.freq_per_min, self.window_min) for i in self.selected)
        object.__setattr__(self, "bus_time_h", bus)

    @property
    def lines(self) -> tuple[BusLine, ...]:
        return tuple(self.candidates[i] for i in self.selected)


def _line_through(seed: int, counts: list[int], network: RoadNetwork) -> list[int]:
    line = [seed]
    visited = {network.tail[seed], network.head[seed]}
    while True:
        best = -1
        for e in network.out_edges[network.head[line[-1]]]:
            if counts[e] > 0 and network.head[e] not in visited:
                if best < 0 or counts[e] > counts[best] or (counts[e] == counts[best] and e < best):
                    best = e
        if best < 0:
            break
        line.append(best)
        visited.add(network.head[best])
    front: list[int] = []
    first = network.tail[seed]
    while True:
        best = -1
        for e in network.in_edges[first]:
            if counts[e] > 0 and network.tail[e] not in visited:
                if best < 0 or counts[e] > counts[best] or (counts[e] == counts[best] and e < best):
                    best = e
        if best < 0:
            break
        front.append(best)
        first = network.tail[best]
        visited.add(first)
    front.reverse()
    return front + line


def _best_run(piece: tuple[int, ...], pos: dict[int, int], d: Sequence[float]):
    """Heaviest maximal run of ``piece`` that is a contiguous stretch of the line."""
    best = None
    j = 0
    while j < len(piece):
        if piece[j] not in pos:
            j += 1
            continue
        k = j
        while k + 1 < len(piece) and pos.get(piece[k + 1]) == pos[piece[k]] + 1:
            k += 1
        weight = sum(d[e] for e in piece[j:k + 1])
        if best is None or weight > best[0]:
            best = (weight, j, k)
        j = k + 1
    return best


def build_lines(paths: Sequence[Sequence[int]], network: RoadNetwork,
                capacity: int = DEFAULT_CAPACITY) -> list[BusLine]:
    """Greedily cover the traveler paths with simple-path lines.

    Each line is seeded at the most used edge and extended at both ends along
    the most used continuation. Overlapping travelers are admitted by
    decreasing overlap while every line edge stays within ``capacity``; their
    ridden segment is cut out of the path and the remainders go back into the
    pool. Runs until no path edge is left uncovered.
    """
    if capacity < 1:
        raise ValueError("capacity must be >= 1")
    d = network.d
    pieces: list[tuple[int, tuple[int, ...]] | None] = []
    by_edge: list[set[int]] = [set() for _ in range(network.m)]
    counts = [0] * network.m

    def add(traveler: int, edges: tuple[int, ...]) -> None:
        pid = len(pieces)
        pieces.append((traveler, edges))
        for e in edges:
            by_edge[e].add(pid)
            counts[e] += 1

    def drop(pid: int) -> None:
        _, edges = pieces[pid]
        for e in edges:
            by_edge[e].discard(pid)
            counts[e] -= 1
        pieces[pid] = None

    for i, p in enumerate(paths):
        if p:
            add(i, tuple(p))
    remaining = sum(counts)
    lines = []
    while remaining > 0:
        seed = max(range(network.m), key=lambda e: (counts[e], -e))
        line = _line_through(seed, counts, network)
        pos = {e: i for i, e in enumerate(line)}
        touching = sorted(set().union(*(by_edge[e] for e in line)))
        offers = []
        for pid in touching:
            traveler, piece = pieces[pid]
            weight, j, k = _best_run(piece, pos, d)
            offers.append((-weight, pid, traveler, j, k))
        offers.sort()
        occ = [0] * len(line)
        admitted = []
        for _, pid, traveler, j, k in offers:
            piece = pieces[pid][1]
            a, b = pos[piece[j]], pos[piece[k]]
            if any(occ[i] >= capacity for i in range(a, b + 1)):
                continue
            for i in range(a, b + 1):
                occ[i] += 1
            admitted.append(Assignment(traveler, a, b, sum(d[e] for e in piece[j:k + 1])))
            drop(pid)
            remaining -= k - j + 1
            for rest in (piece[:j], piece[k + 1:]):
                if rest:
                    add(traveler, rest)
        tau = sum(d[e] for e in line)
        lines.append(BusLine(tuple(line), tau, tuple(admitted)))
    return lines


def knapsack(weights: Sequence[int], values: Sequence[float], capacity: int) -> list[int]:
    """Exact 0/1 knapsack over integer weights; returns chosen item indices (ascending)."""
    if capacity < 0:
        raise ValueError("capacity must be >= 0")
    n = len(weights)
    if any(w < 0 for w in weights):
        raise ValueError("weights must be non-negative")
    best = np.zeros(capacity + 1)
    take = np.zeros((n, capacity + 1), dtype=bool)
    for i, (w, v) in enumerate(zip(weights, values)):
        if w > capacity:
            continue
        cand = np.full(capacity + 1, -np.inf)
        cand[w:] = best[: capacity + 1 - w] + v
        better = cand > best
        take[i] = better
        best = np.where(better, cand, best)
    chosen = []
    c = capacity
    for i in range(n - 1, -1, -1):
        if take[i, c]:
            chosen.append(i)
            c -= weights[i]
    return sorted(chosen)


def _cells(hours: float) -> int:
    """Budget hours as whole seconds, tolerant of float noise in the conversion."""
    return math.ceil(hours * 3600 - 1e-9)


def select_lines(candidates: Sequence[BusLine], budget_h: float,
                 freq_per_min: float = DEFAULT_FREQ_PER_MIN,
                 window_min: float = DEFAULT_WINDOW_MIN) -> LinePlan:
    """Pick lines maximizing covered travel time within the bus-time budget."""
    if budget_h < 0:
        raise ValueError("budget must be >= 0")
    weights = [_cells(line.vehicle_time_h(freq_per_min, window_min)) for line in candidates]
    values = [line.coverage_ms for line in candidates]
    capacity = math.floor(budget_h * 3600 + 1e-9)
    if sum(weights) <= capacity:
        chosen = list(range(len(candidates)))
    else:
        chosen = knapsack(weights, values, capacity)
    coverage = sum(values[i] for i in chosen) / MS_PER_HOUR
    return LinePlan(tuple(candidates), tuple(chosen), budget_h, freq_per_min, window_min, coverage)


def covered_time(plan: LinePlan, n_travelers: int) -> list[float]:
    """Per-traveler ridden time (ms) on the selected lines."""
    covered = [0.0] * n_travelers
    for line in plan.lines:
        for a in line.assignments:
            covered[a.traveler] += a.ridden_ms
    return covered


def tvot(plan: LinePlan, paths: Sequence[Sequence[int]], network: RoadNetwork) -> float:
    """Total vehicle operation time in hours: bus time plus unshared feeder time."""
    covered = covered_time(plan, len(paths))
    feeder = sum(network.travel_time(p) - c for p, c in zip(paths, covered))
    return plan.bus_time_h + feeder / MS_PER_HOUR
