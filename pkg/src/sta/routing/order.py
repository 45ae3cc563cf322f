"""Nested-dissection vertex orders from BFS-layer separators."""

from __future__ import annotations

from collections import deque
from typing import Sequence

_LEAF_SIZE = 6


def _bfs_layers(start: int, members: set[int], adj: Sequence[set[int]]) -> list[list[int]]:
    layers = [[start]]
    seen = {start}
    while True:
        nxt = []
        for u in layers[-1]:
            for v in sorted(adj[u]):
                if v in members and v not in seen:
                    seen.add(v)
                    nxt.append(v)
        if not nxt:
            return layers
        layers.append(nxt)


def _components(vertices: list[int], adj: Sequence[set[int]]) -> list[list[int]]:
    members = set(vertices)
    seen: set[int] = set()
    comps = []
    for s in vertices:
        if s in seen:
            continue
        seen.add(s)
        comp = [s]
        queue = deque([s])
        while queue:
            u = queue.popleft()
            for v in adj[u]:
                if v in members and v not in seen:
                    seen.add(v)
                    comp.append(v)
                    queue.append(v)
        comps.append(sorted(comp))
    return comps


def _dissect(vertices: list[int], adj: Sequence[set[int]]) -> list[int]:
    if len(vertices) <= _LEAF_SIZE:
        members = set(vertices)
        return sorted(vertices, key=lambda v: (len(adj[v] & members), v))
    comps = _components(vertices, adj)
    if len(comps) > 1:
        return [v for comp in comps for v in _dissect(comp, adj)]
    members = set(vertices)
    # pseudo-peripheral start: far end of a BFS from the smallest vertex
    far = _bfs_layers(vertices[0], members, adj)[-1][0]
    layers = _bfs_layers(far, members, adj)
    half = len(vertices) / 2
    count = 0
    cut = len(layers) - 1
    for i, layer in enumerate(layers):
        count += len(layer)
        if count >= half:
            cut = i
            break
    if cut == len(layers) - 1 and cut > 0:
        cut -= 1
    left = [v for layer in layers[:cut] for v in layer]
    right = [v for layer in layers[cut + 1:] for v in layer]
    right_set = set(right)
    separator = []
    for v in layers[cut]:
        # a layer vertex without neighbours on the far side belongs to the near side
        if adj[v] & right_set:
            separator.append(v)
        else:
            left.append(v)
    if not separator:
        separator, left = left[-1:], left[:-1]
    return _dissect(sorted(left), adj) + _dissect(sorted(right), adj) + sorted(separator)


def nested_dissection_order(n: int, adj: Sequence[set[int]]) -> list[int]:
    """Elimination order (first entry is contracted first) for an undirected graph."""
    return _dissect(list(range(n)), adj)
