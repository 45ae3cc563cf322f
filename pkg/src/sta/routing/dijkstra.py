from __future__ import annotations

import heapq
import math
from typing import Sequence

from ..game import RoadNetwork


class NoPathError(LookupError):
    def __init__(self, s: int, t: int):
        super().__init__(f"no path from {s} to {t}")
        self.s = s
        self.t = t


def check_costs(costs: Sequence[float]) -> None:
    for e, c in enumerate(costs):
        if not (c >= 0 and math.isfinite(c)):
            raise ValueError(f"edge {e}: cost must be finite and non-negative, got {c}")


def dijkstra(network: RoadNetwork, costs: Sequence[float], s: int, t: int,
             *, check: bool = True) -> tuple[tuple[int, ...], float]:
    """Minimum-cost s-t path as an edge-id tuple.

    Ties between equal tentative distances go to the predecessor edge with the
    smaller id, so the result depends only on the cost vector.
    """
    if check:
        check_costs(costs)
    inf = math.inf
    dist = [inf] * network.n
    pred = [-1] * network.n
    done = [False] * network.n
    dist[s] = 0
    heap = [(0, s)]
    out_edges, head = network.out_edges, network.head
    while heap:
        du, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        if u == t:
            break
        for e in out_edges[u]:
            v = head[e]
            if done[v]:
                continue
            nd = du + costs[e]
            dv = dist[v]
            if nd < dv:
                dist[v] = nd
                pred[v] = e
                heapq.heappush(heap, (nd, v))
            elif nd == dv and e < pred[v]:
                pred[v] = e
    if not done[t] or s == t:
        if s == t:
            raise ValueError("origin equals destination")
        raise NoPathError(s, t)
    path = []
    v = t
    tail = network.tail
    while v != s:
        e = pred[v]
        path.append(e)
        v = tail[e]
    path.reverse()
    return tuple(path), dist[t]


def distances_from(network: RoadNetwork, costs: Sequence[float], s: int) -> list[float]:
    """One-to-all distances (inf where unreachable)."""
    dist = [math.inf] * network.n
    dist[s] = 0
    heap = [(0, s)]
    out_edges, head = network.out_edges, network.head
    while heap:
        du, u = heapq.heappop(heap)
        if du > dist[u]:
            continue
        for e in out_edges[u]:
            v = head[e]
            nd = du + costs[e]
            if nd < dist[v]:
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    return dist
