"""Customizable contraction hierarchy: preprocessing, customization, queries.

The metric-independent index is a chordal supergraph of the undirected
skeleton, built from a nested-dissection order. Customization runs the basic
(lower-triangle) pass followed by perfect customization, both vectorised per
vertex over the upper-neighbour clique. Queries walk the elimination tree.

Arc weights live in one flat array of "slots": ``2*a`` is the direction
low-rank -> high-rank of arc ``a``, ``2*a + 1`` the opposite direction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..game import RoadNetwork
from .dijkstra import NoPathError
from .order import nested_dissection_order


def _erase_loops(path: list[int], network: RoadNetwork) -> tuple[int, ...]:
    """Drop closed sub-walks (only zero-cost cycles can appear in shortest walks)."""
    if not path:
        return ()
    out: list[int] = []
    pos = {network.tail[path[0]]: 0}
    for e in path:
        v = network.head[e]
        if v in pos:
            cut = pos[v]
            for dropped in out[cut:]:
                del pos[network.head[dropped]]
            del out[cut:]
        else:
            out.append(e)
            pos[v] = len(out)
    return tuple(out)


@dataclass(frozen=True, eq=False)
class CCHIndex:
    """Metric-independent part: order, chordal supergraph, elimination tree."""

    network: RoadNetwork
    order: tuple[int, ...]
    rank: tuple[int, ...]
    parent: tuple[int, ...]
    low: tuple[int, ...]
    high: tuple[int, ...]
    upper: tuple[tuple[tuple[int, int], ...], ...]  # per vertex: (upper neighbour, arc) by rank
    edge_slot: tuple[int, ...]
    arc_of: dict[tuple[int, int], int] = field(repr=False)
    _up_arcs: list[np.ndarray] = field(repr=False)
    _pair_slots: list[np.ndarray] = field(repr=False)
    _offdiag: list[tuple[np.ndarray, np.ndarray, np.ndarray]] = field(repr=False)

    @property
    def num_arcs(self) -> int:
        return len(self.low)

    @property
    def num_shortcuts(self) -> int:
        originals = {s >> 1 for s in self.edge_slot if s >= 0}
        return self.num_arcs - len(originals)

    def slot(self, u: int, v: int) -> int:
        """Weight slot of the supergraph direction u -> v."""
        if self.rank[u] < self.rank[v]:
            return 2 * self.arc_of[(u, v)]
        return 2 * self.arc_of[(v, u)] + 1

    def ancestors(self, v: int) -> list[int]:
        chain = []
        while v != -1:
            chain.append(v)
            v = self.parent[v]
        return chain


def cch_preprocess(network: RoadNetwork, order: Sequence[int] | None = None) -> CCHIndex:
    n = network.n
    adj: list[set[int]] = [set() for _ in range(n)]
    for u, v in zip(network.tail, network.head):
        if u != v:
            adj[u].add(v)
            adj[v].add(u)
    if order is None:
        order = nested_dissection_order(n, adj)
    order = tuple(order)
    if sorted(order) != list(range(n)):
        raise ValueError("order must be a permutation of the vertices")
    rank = [0] * n
    for i, v in enumerate(order):
        rank[v] = i

    nbrs = [set(a) for a in adj]
    upper_vertices: list[list[int]] = [[] for _ in range(n)]
    parent = [-1] * n
    for v in order:
        up = sorted((u for u in nbrs[v] if rank[u] > rank[v]), key=rank.__getitem__)
        upper_vertices[v] = up
        if up:
            p = up[0]
            parent[v] = p
            nbrs[p].update(up[1:])

    low: list[int] = []
    high: list[int] = []
    arc_of: dict[tuple[int, int], int] = {}
    for v in order:
        for u in upper_vertices[v]:
            arc_of[(v, u)] = len(low)
            low.append(v)
            high.append(u)
    dummy = 2 * len(low)  # slot index of a permanently infinite weight

    def slot(u: int, v: int) -> int:
        if rank[u] < rank[v]:
            return 2 * arc_of[(u, v)]
        return 2 * arc_of[(v, u)] + 1

    upper = []
    up_arcs = []
    pair_slots = []
    offdiag = []
    for v in range(n):
        ups = upper_vertices[v]
        arcs = [arc_of[(v, u)] for u in ups]
        upper.append(tuple(zip(ups, arcs)))
        up_arcs.append(np.asarray(arcs, dtype=np.int64))
        k = len(ups)
        mat = np.full((k, k), dummy, dtype=np.int64)
        for j, x in enumerate(ups):
            for i, y in enumerate(ups):
                if i != j:
                    mat[j, i] = slot(x, y)
        pair_slots.append(mat)
        jj, kk = np.nonzero(~np.eye(k, dtype=bool))
        offdiag.append((jj, kk, mat[jj, kk]))

    edge_slot = []
    for u, v in zip(network.tail, network.head):
        edge_slot.append(-1 if u == v else slot(u, v))

    return CCHIndex(
        network=network,
        order=order,
        rank=tuple(rank),
        parent=tuple(parent),
        low=tuple(low),
        high=tuple(high),
        upper=tuple(upper),
        edge_slot=tuple(edge_slot),
        arc_of=arc_of,
        _up_arcs=up_arcs,
        _pair_slots=pair_slots,
        _offdiag=offdiag,
    )


class CustomizedCCH:
    """Index plus metric-dependent arc labels.

    ``up[a]``/``down[a]`` are the perfect labels (true distances) of arc ``a``
    in the directions low->high and high->low.
    """

    def __init__(self, index: CCHIndex, costs: Sequence[float]):
        net = index.network
        if len(costs) != net.m:
            raise ValueError(f"expected {net.m} edge costs, got {len(costs)}")
        num_slots = 2 * index.num_arcs
        w = np.full(num_slots + 1, math.inf)
        orig = [-1] * num_slots
        for e, c in enumerate(costs):
            if not (c >= 0 and math.isfinite(c)):
                raise ValueError(f"edge {e}: cost must be finite and non-negative, got {c}")
            s = index.edge_slot[e]
            if s < 0:
                continue
            if c < w[s] or (c == w[s] and e < orig[s]):
                w[s] = c
                orig[s] = e
        bmid = np.full(num_slots + 1, -1, dtype=np.int64)

        for v in index.order:
            arcs = index._up_arcs[v]
            if len(arcs) < 2:
                continue
            jj, kk, targets = index._offdiag[v]
            cand = w[2 * arcs + 1][jj] + w[2 * arcs][kk]
            better = cand < w[targets]
            if better.any():
                hit = targets[better]
                w[hit] = cand[better]
                bmid[hit] = v

        basic = w
        perfect = w.copy()
        pmid = np.full(num_slots + 1, -1, dtype=np.int64)
        for v in reversed(index.order):
            arcs = index._up_arcs[v]
            if len(arcs) < 2:
                continue
            ups = np.asarray([u for u, _ in index.upper[v]], dtype=np.int64)
            between = perfect[index._pair_slots[v]]
            # v -> u_j -> u_k
            via = basic[2 * arcs][:, None] + between
            best = via.argmin(axis=0)
            cand = via[best, np.arange(len(arcs))]
            up_slots = 2 * arcs
            better = cand < perfect[up_slots]
            if better.any():
                perfect[up_slots[better]] = cand[better]
                pmid[up_slots[better]] = ups[best[better]]
            # u_k -> u_j -> v
            via = between + basic[2 * arcs + 1][None, :]
            best = via.argmin(axis=1)
            cand = via[np.arange(len(arcs)), best]
            down_slots = up_slots + 1
            better = cand < perfect[down_slots]
            if better.any():
                perfect[down_slots[better]] = cand[better]
                pmid[down_slots[better]] = ups[best[better]]

        self.index = index
        self.basic = basic[:num_slots].tolist()
        self.labels = perfect[:num_slots].tolist()
        self._bmid = bmid[:num_slots].tolist()
        self._pmid = pmid[:num_slots].tolist()
        self._orig = orig

    @property
    def up(self) -> list[float]:
        return self.labels[0::2]

    @property
    def down(self) -> list[float]:
        return self.labels[1::2]

    def endpoints(self, slot: int) -> tuple[int, int]:
        a = slot >> 1
        lo, hi = self.index.low[a], self.index.high[a]
        return (lo, hi) if slot % 2 == 0 else (hi, lo)

    def unpack(self, slot: int) -> list[int]:
        """Original edge ids of the path behind a perfect label."""
        index = self.index
        out: list[int] = []
        stack = [(slot, True)]
        while stack:
            s, perfect = stack.pop()
            if perfect:
                z = self._pmid[s]
                if z == -1:
                    stack.append((s, False))
                    continue
                x, y = self.endpoints(s)
                # first leg is a basic label, second a perfect one (see customization)
                if s % 2 == 0:
                    stack.append((index.slot(z, y), True))
                    stack.append((index.slot(x, z), False))
                else:
                    stack.append((index.slot(z, y), False))
                    stack.append((index.slot(x, z), True))
            else:
                v = self._bmid[s]
                if v == -1:
                    e = self._orig[s]
                    if e < 0:
                        raise RuntimeError(f"slot {s} has no original edge")
                    out.append(e)
                    continue
                x, y = self.endpoints(s)
                stack.append((index.slot(v, y), False))
                stack.append((index.slot(x, v), False))
        return out

    def searcher(self) -> "CCHSearcher":
        return CCHSearcher(self)

    def query(self, s: int, t: int) -> tuple[tuple[int, ...], float]:
        return CCHSearcher(self).query(s, t)


class CCHSearcher:
    """Elimination-tree queries with private per-source/target sweep caches."""

    def __init__(self, customized: CustomizedCCH):
        self.c = customized
        self._fwd: dict[int, tuple[dict[int, float], dict[int, tuple[int, int]]]] = {}
        self._bwd: dict[int, tuple[dict[int, float], dict[int, tuple[int, int]]]] = {}
        self._unpacked: dict[int, list[int]] = {}

    def _sweep(self, root: int, offset: int) -> tuple[dict[int, float], dict[int, tuple[int, int]]]:
        index = self.c.index
        labels = self.c.labels
        upper, parent = index.upper, index.parent
        inf = math.inf
        dist = {root: 0}
        pred: dict[int, tuple[int, int]] = {}
        v = root
        while v != -1:
            dv = dist.get(v)
            if dv is not None:
                for u, a in upper[v]:
                    s = 2 * a + offset
                    nd = dv + labels[s]
                    if nd < dist.get(u, inf):
                        dist[u] = nd
                        pred[u] = (v, s)
            v = parent[v]
        return dist, pred

    def forward(self, s: int):
        hit = self._fwd.get(s)
        if hit is None:
            hit = self._fwd[s] = self._sweep(s, 0)
        return hit

    def backward(self, t: int):
        hit = self._bwd.get(t)
        if hit is None:
            hit = self._bwd[t] = self._sweep(t, 1)
        return hit

    def distance(self, s: int, t: int) -> tuple[float, int]:
        fdist, _ = self.forward(s)
        bdist, _ = self.backward(t)
        best, meet = math.inf, -1
        v = s
        parent = self.c.index.parent
        while v != -1:
            df = fdist.get(v)
            if df is not None:
                db = bdist.get(v)
                if db is not None and df + db < best:
                    best, meet = df + db, v
            v = parent[v]
        return best, meet

    def _edges(self, slot: int) -> list[int]:
        hit = self._unpacked.get(slot)
        if hit is None:
            hit = self._unpacked[slot] = self.c.unpack(slot)
        return hit

    def query(self, s: int, t: int) -> tuple[tuple[int, ...], float]:
        if s == t:
            raise ValueError("origin equals destination")
        best, meet = self.distance(s, t)
        if meet < 0 or best == math.inf:
            raise NoPathError(s, t)
        _, fpred = self.forward(s)
        _, bpred = self.backward(t)
        up_slots = []
        v = meet
        while v != s:
            v, slot = fpred[v]
            up_slots.append(slot)
        walk: list[int] = []
        for slot in reversed(up_slots):
            walk.extend(self._edges(slot))
        v = meet
        while v != t:
            v, slot = bpred[v]
            walk.extend(self._edges(slot))
        return _erase_loops(walk, self.c.index.network), best


def cch_customize(index: CCHIndex, costs: Sequence[float]) -> CustomizedCCH:
    return CustomizedCCH(index, costs)


def cch_query(customized: CustomizedCCH, s: int, t: int) -> tuple[tuple[int, ...], float]:
    return customized.query(s, t)
