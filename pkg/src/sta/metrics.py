"""Stretch and sharing statistics of assignment flows."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

from .game import RoadNetwork, compute_loads
from .routing import distances_from

DEFAULT_X_GRID = tuple(i / 100 for i in range(101))
_X_TOL = 1e-12


class UndefinedMetricError(ValueError):
    pass


@dataclass(frozen=True)
class FlowMetrics:
    average_stretch: float
    average_sharing: float
    normalized_average_sharing: float | None
    stretch: tuple[float, ...]
    sharing: tuple[float, ...]


def free_flow_distances(profile: Sequence[Sequence[int]], network: RoadNetwork) -> list[float]:
    """dist(s_i, t_i) on free-flow times, one Dijkstra per distinct origin."""
    by_origin: dict[int, list[float]] = {}
    out = []
    for path in profile:
        s, t = network.tail[path[0]], network.head[path[-1]]
        if s not in by_origin:
            by_origin[s] = distances_from(network, network.d, s)
        out.append(by_origin[s][t])
    return out


def agent_stretch(profile: Sequence[Sequence[int]], network: RoadNetwork) -> list[float | None]:
    """D(p_i) / dist(s_i, t_i); None where the shortest distance is zero."""
    dists = free_flow_distances(profile, network)
    return [network.travel_time(p) / dist if dist > 0 else None for p, dist in zip(profile, dists)]


def average_stretch(profile: Sequence[Sequence[int]], network: RoadNetwork) -> float:
    return _mean_stretch(agent_stretch(profile, network))


def _mean_stretch(values: list[float | None]) -> float:
    kept = [v for v in values if v is not None]
    if len(kept) < len(values):
        warnings.warn(f"{len(values) - len(kept)} agents with zero shortest distance excluded from stretch")
    if not kept:
        raise UndefinedMetricError("stretch undefined: every agent has zero shortest distance")
    return sum(kept) / len(kept)


def agent_sharing(profile: Sequence[Sequence[int]], network: RoadNetwork,
                  loads: Sequence[int] | None = None) -> list[float]:
    """Travel-time-weighted number of co-riders for each agent."""
    if loads is None:
        loads = compute_loads(profile, network)
    d = network.d
    out = []
    for i, path in enumerate(profile):
        total = network.travel_time(path)
        if total <= 0:
            raise UndefinedMetricError(f"agent {i}: sharing undefined for zero travel time")
        out.append(sum(d[e] * (loads[e] - 1) for e in path) / total)
    return out


def average_sharing(profile: Sequence[Sequence[int]], network: RoadNetwork) -> float:
    if not profile:
        return 0.0
    values = agent_sharing(profile, network)
    return sum(values) / len(values)


def normalized_average_sharing(profile, baseline, network: RoadNetwork) -> float:
    """Average sharing relative to a baseline flow (normally the r = 1 flow)."""
    base = average_sharing(baseline, network)
    if base <= 0:
        raise UndefinedMetricError("baseline flow has no sharing")
    return average_sharing(profile, network) / base


def shared_fractions(profile: Sequence[Sequence[int]], network: RoadNetwork, threshold: int,
                     loads: Sequence[int] | None = None) -> list[float]:
    """Per agent, the d-weighted fraction of the path with at least ``threshold`` other riders."""
    if loads is None:
        loads = compute_loads(profile, network)
    d = network.d
    out = []
    for path in profile:
        total = network.travel_time(path)
        shared = sum(d[e] for e in path if loads[e] >= threshold + 1)
        out.append(shared / total if total > 0 else 0.0)
    return out


def sharing_fraction_curve(profile: Sequence[Sequence[int]], network: RoadNetwork, threshold: int,
                           x_grid: Sequence[float] = DEFAULT_X_GRID) -> list[tuple[float, float]]:
    """Fraction of agents sharing at least x of their travel time with >= ``threshold`` others."""
    if threshold < 1:
        raise ValueError("threshold must be a positive integer")
    if any(not 0 <= x <= 1 for x in x_grid):
        raise ValueError("x_grid values must lie in [0, 1]")
    fractions = shared_fractions(profile, network, threshold)
    k = len(fractions)
    curve = []
    for x in x_grid:
        hits = sum(1 for f in fractions if f >= x - _X_TOL)
        curve.append((x, hits / k if k else 0.0))
    return curve


def flow_metrics(profile: Sequence[Sequence[int]], network: RoadNetwork,
                 baseline: Sequence[Sequence[int]] | None = None) -> FlowMetrics:
    stretch = agent_stretch(profile, network)
    sharing = agent_sharing(profile, network)
    avg_sharing = sum(sharing) / len(sharing) if sharing else 0.0
    normalized = None
    if baseline is not None:
        base = average_sharing(baseline, network)
        normalized = avg_sharing / base if base > 0 else None
    return FlowMetrics(
        average_stretch=_mean_stretch(stretch),
        average_sharing=avg_sharing,
        normalized_average_sharing=normalized,
        stretch=tuple(s if s is not None else float("nan") for s in stretch),
        sharing=tuple(sharing),
    )
