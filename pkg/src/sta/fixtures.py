"""Counterexample instances and synthetic generators."""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .game import CostModel, DemandSet, RoadNetwork, SelfishShare, StepTable


@dataclass(frozen=True)
class FixtureInstance:
    network: RoadNetwork
    demand: DemandSet
    model: CostModel
    # configuration label -> (profile, per-agent costs)
    configurations: dict[str, tuple[tuple[tuple[int, ...], ...], tuple[float, ...]]] = field(default_factory=dict)
    expected_cycle: tuple[str, ...] = ()
    vertex_names: tuple[str, ...] = ()
    edge_names: tuple[str, ...] = ()

    def edge(self, name: str) -> int:
        return self.edge_names.index(name)

    def vertex(self, name: str) -> int:
        return self.vertex_names.index(name)

    def path(self, *names: str) -> tuple[int, ...]:
        return tuple(self.edge(n) for n in names)


def _build(vertices: list[str], edges: list[tuple[str, str, str, list[tuple[int, float]]]]):
    vid = {v: i for i, v in enumerate(vertices)}
    tables = [t for *_, t in edges]
    # free-flow time of a fixture edge is its load-1 cost
    d = [StepTable(tables).cost(e, 1) for e in range(len(edges))]
    network = RoadNetwork(
        n=len(vertices),
        tail=tuple(vid[u] for _, u, _, _ in edges),
        head=tuple(vid[v] for _, _, v, _ in edges),
        d=tuple(d),
    )
    return network, StepTable(tables), vid


def fig2_instance(epsilon: float = 0.5) -> FixtureInstance:
    """Two crossing agents whose simultaneous impact-aware responses swap past each other."""
    if not 0 < epsilon < 1:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    vertices = ["s1", "s2", "u1", "v1", "u2", "v2", "t1", "t2"]
    bold = [(0, 1.0), (2, 0.0)]
    edges = [
        ("s1u1", "s1", "u1", [(0, 0.0)]),
        ("s2u2", "s2", "u2", [(0, 0.0)]),
        ("s1u2", "s1", "u2", [(0, epsilon)]),
        ("s2u1", "s2", "u1", [(0, epsilon)]),
        ("top", "u1", "v1", bold),
        ("bottom", "u2", "v2", bold),
        ("v1t1", "v1", "t1", [(0, 0.0)]),
        ("v2t1", "v2", "t1", [(0, 0.0)]),
        ("v1t2", "v1", "t2", [(0, 0.0)]),
        ("v2t2", "v2", "t2", [(0, 0.0)]),
    ]
    network, model, vid = _build(vertices, edges)
    names = tuple(name for name, *_ in edges)
    demand = DemandSet.from_pairs([(vid["s1"], vid["t1"]), (vid["s2"], vid["t2"])])
    e = names.index
    blue_top = (e("s1u1"), e("top"), e("v1t1"))
    blue_bottom = (e("s1u2"), e("bottom"), e("v2t1"))
    red_top = (e("s2u1"), e("top"), e("v1t2"))
    red_bottom = (e("s2u2"), e("bottom"), e("v2t2"))
    configurations = {
        "A": ((blue_top, red_bottom), (1.0, 1.0)),
        "B": ((blue_bottom, red_top), (1.0 + epsilon, 1.0 + epsilon)),
    }
    return FixtureInstance(network, demand, model, configurations, ("A", "B"), tuple(vertices), names)


def fig3_instance() -> FixtureInstance:
    """Group of two blue agents plus red and orange; group-aware responses cycle A-B-C-D."""
    vertices = ["h0", "h1", "h2", "h3", "h4", "s3", "t3", "s4", "t4"]
    edges = [
        ("bold1", "h0", "h1", [(0, 5.0), (3, 1.0)]),
        ("bold2", "h1", "h2", [(0, 5.0), (3, 1.0)]),
        ("mid", "h2", "h3", [(0, 10.0)]),
        ("bold3", "h3", "h4", [(0, 7.0), (3, 1.0)]),
        ("top", "h0", "h4", [(0, 20.0)]),
        ("red_up_early", "s3", "h0", [(0, 0.0)]),
        ("red_down_early", "h1", "t3", [(0, 10.0)]),
        ("red_up_late", "s3", "h3", [(0, 9.0)]),
        ("red_down_late", "h4", "t3", [(0, 0.0)]),
        ("orange_up_early", "s4", "h1", [(0, 0.0)]),
        ("orange_down_early", "h2", "t4", [(0, 10.0)]),
        ("orange_up_late", "s4", "h3", [(0, 9.0)]),
        ("orange_down_late", "h4", "t4", [(0, 0.0)]),
    ]
    network, model, vid = _build(vertices, edges)
    names = tuple(name for name, *_ in edges)
    demand = DemandSet.from_pairs([
        (vid["h0"], vid["h4"]),
        (vid["h0"], vid["h4"]),
        (vid["s3"], vid["t3"]),
        (vid["s4"], vid["t4"]),
    ])
    e = names.index
    top = (e("top"),)
    horizontal = (e("bold1"), e("bold2"), e("mid"), e("bold3"))
    red_early = (e("red_up_early"), e("bold1"), e("red_down_early"))
    red_late = (e("red_up_late"), e("bold3"), e("red_down_late"))
    orange_early = (e("orange_up_early"), e("bold2"), e("orange_down_early"))
    orange_late = (e("orange_up_late"), e("bold3"), e("orange_down_late"))
    configurations = {
        "A": ((top, top, red_early, orange_early), (20.0, 20.0, 15.0, 15.0)),
        "B": ((horizontal, horizontal, red_early, orange_early), (19.0, 19.0, 11.0, 11.0)),
        "C": ((horizontal, horizontal, red_late, orange_late), (21.0, 21.0, 10.0, 10.0)),
        "D": ((top, top, red_late, orange_late), (20.0, 20.0, 16.0, 16.0)),
    }
    return FixtureInstance(network, demand, model, configurations, ("A", "B", "C", "D"), tuple(vertices), names)


def grid_network(width: int, height: int, rng: random.Random, d_range: tuple[int, int] = (100, 1000)) -> RoadNetwork:
    """4-neighbour grid with both directions per adjacency, integer d in ``d_range``."""
    if width < 1 or height < 1:
        raise ValueError("grid dimensions must be positive")
    edges = []
    for y in range(height):
        for x in range(width):
            v = y * width + x
            if x + 1 < width:
                edges.append((v, v + 1, rng.randint(*d_range)))
                edges.append((v + 1, v, rng.randint(*d_range)))
            if y + 1 < height:
                edges.append((v, v + width, rng.randint(*d_range)))
                edges.append((v + width, v, rng.randint(*d_range)))
    return RoadNetwork.from_edges(width * height, edges)


def _clustered_pairs(width: int, height: int, k: int, rng: random.Random) -> list[tuple[int, int]]:
    n_hubs = max(2, min(8, (width * height) // 16))
    hubs = [(rng.randrange(width), rng.randrange(height)) for _ in range(n_hubs)]
    spread = max(1.0, min(width, height) / 8)

    def near(hub):
        x = min(width - 1, max(0, round(rng.gauss(hub[0], spread))))
        y = min(height - 1, max(0, round(rng.gauss(hub[1], spread))))
        return y * width + x

    pairs = []
    while len(pairs) < k:
        a, b = rng.sample(range(n_hubs), 2)
        s, t = near(hubs[a]), near(hubs[b])
        if s != t:
            pairs.append((s, t))
    return pairs


def demand_pairs(width: int, height: int, k: int, pattern: str, rng: random.Random) -> list[tuple[int, int]]:
    n = width * height
    if n < 2:
        raise ValueError("need at least two vertices for O-D pairs")
    if pattern == "uniform":
        return [tuple(rng.sample(range(n), 2)) for _ in range(k)]
    if pattern == "clustered":
        return _clustered_pairs(width, height, k, rng)
    raise ValueError(f"unknown demand pattern {pattern!r}")


def grid_instance(width: int, height: int, agents: int, demand_pattern: str = "uniform",
                  seed: int = 0, r: float = 0.0) -> FixtureInstance:
    """Random grid with SelfishShare(r) costs; deterministic under ``seed``."""
    if width < 2 or height < 2:
        raise ValueError("width and height must be >= 2")
    if agents < 1:
        raise ValueError("need at least one agent")
    rng = random.Random(seed)
    network = grid_network(width, height, rng)
    demand = DemandSet.from_pairs(demand_pairs(width, height, agents, demand_pattern, rng))
    return FixtureInstance(network, demand, SelfishShare(r, network.d))


def random_step_tables(m: int, rng: random.Random, *, increasing: bool = False,
                       max_cost: int = 20, max_steps: int = 3) -> StepTable:
    """Integer step tables; non-increasing unless ``increasing`` (avoidant contrast only)."""
    tables = []
    for _ in range(m):
        steps = rng.randint(0, max_steps)
        ths = sorted(rng.sample(range(1, 8), steps))
        costs = sorted((rng.randint(0, max_cost) for _ in range(steps + 1)), reverse=not increasing)
        tables.append(list(zip([0] + ths, costs)))
    return StepTable(tables, allow_increasing=increasing)


def random_synergistic_instance(seed: int, max_side: int = 16, max_agents: int = 200) -> FixtureInstance:
    """Grid with random integer step-table costs and uniform or clustered demand."""
    rng = random.Random(seed)
    width = rng.randint(2, max_side)
    height = rng.randint(2, max_side)
    network = grid_network(width, height, rng)
    k = rng.randint(1, max_agents)
    pattern = rng.choice(["uniform", "clustered"])
    demand = DemandSet.from_pairs(demand_pairs(width, height, k, pattern, rng))
    return FixtureInstance(network, demand, random_step_tables(network.m, rng))
