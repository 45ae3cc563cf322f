"""CSV readers and writers for networks, demand, cost tables, paths and run output.

Every file is UTF-8 with a mandatory header row and ``\\n`` line endings.
"""

from __future__ import annotations

import csv
import math
import os
from collections import defaultdict
from pathlib import Path as FsPath
from typing import Iterable, Sequence

from .game import DemandSet, RoadNetwork, StepTable, ValidationError

NETWORK_HEADER = ["edge_id", "tail", "head", "d_ms"]
DEMAND_HEADER = ["origin", "destination", "count"]
STEP_HEADER = ["edge_id", "threshold", "cost"]
PATHS_HEADER = ["agent_id", "edges"]
LOADS_HEADER = ["edge_id", "load"]
TRACE_HEADER = ["round", "phi", "delta", "switches", "query_ms", "customize_ms"]


class FormatError(ValidationError):
    def __init__(self, path, line: int | None, message: str):
        where = f"{path}:{line}" if line is not None else str(path)
        super().__init__(f"{where}: {message}")
        self.path = path
        self.line = line


def _number(text: str) -> int | float:
    try:
        return int(text)
    except ValueError:
        return float(text)


def _format_number(x: float) -> str:
    if isinstance(x, int):
        return str(x)
    return repr(float(x))


def _rows(path, header: list[str]) -> Iterable[tuple[int, list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        first = next(reader, None)
        if first is None:
            raise FormatError(path, 1, "empty file, expected header " + ",".join(header))
        if [c.strip() for c in first] != header:
            raise FormatError(path, 1, f"expected header {','.join(header)}, got {','.join(first)}")
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise FormatError(path, reader.line_num, f"expected {len(header)} fields, got {len(row)}")
            yield reader.line_num, [c.strip() for c in row]


def _writer(path):
    fh = open(path, "w", newline="", encoding="utf-8")
    return fh, csv.writer(fh, lineterminator="\n")


def load_network(path) -> RoadNetwork:
    """Read ``edge_id,tail,head,d_ms``; vertex count is one past the largest vertex id."""
    edges: dict[int, tuple[int, int, float]] = {}
    for line, (eid, tail, head, d) in _rows(path, NETWORK_HEADER):
        try:
            e, u, v, w = int(eid), int(tail), int(head), _number(d)
        except ValueError:
            raise FormatError(path, line, "malformed row") from None
        if e in edges:
            raise FormatError(path, line, f"duplicate edge_id {e}")
        if u < 0 or v < 0:
            raise FormatError(path, line, "vertex ids must be non-negative")
        if not (w >= 0 and math.isfinite(w)):
            raise FormatError(path, line, f"d_ms must be finite and >= 0, got {d}")
        edges[e] = (u, v, w)
    missing = sorted(set(range(len(edges))) - set(edges))
    if missing:
        raise FormatError(path, None, f"edge ids must be 0..{len(edges) - 1}; missing {missing[:5]}")
    ordered = [edges[e] for e in range(len(edges))]
    n = 1 + max((max(u, v) for u, v, _ in ordered), default=-1)
    return RoadNetwork.from_edges(n, ordered)


def save_network(network: RoadNetwork, path) -> None:
    fh, w = _writer(path)
    with fh:
        w.writerow(NETWORK_HEADER)
        for e in range(network.m):
            w.writerow([e, network.tail[e], network.head[e], _format_number(network.d[e])])


def load_demand(path, network: RoadNetwork | None = None) -> DemandSet:
    """Read ``origin,destination,count``; rows expand to consecutive agent ids."""
    pairs: list[tuple[int, int]] = []
    for line, (o, dst, count) in _rows(path, DEMAND_HEADER):
        try:
            s, t, c = int(o), int(dst), int(count)
        except ValueError:
            raise FormatError(path, line, "malformed row") from None
        if s == t:
            raise FormatError(path, line, f"origin equals destination ({s})")
        if c < 0:
            raise FormatError(path, line, "count must be >= 0")
        if network is not None and not (0 <= s < network.n and 0 <= t < network.n):
            raise FormatError(path, line, f"vertex outside network of {network.n} vertices")
        pairs.extend([(s, t)] * c)
    demand = DemandSet.from_pairs(pairs)
    if network is not None:
        demand.validate_for(network)
    return demand


def save_demand(demand: DemandSet, path) -> None:
    """Consecutive agents with the same O-D pair collapse into one row."""
    rows: list[list[int]] = []
    for a in demand.agents:
        if rows and rows[-1][0] == a.origin and rows[-1][1] == a.destination:
            rows[-1][2] += 1
        else:
            rows.append([a.origin, a.destination, 1])
    fh, w = _writer(path)
    with fh:
        w.writerow(DEMAND_HEADER)
        w.writerows(rows)


def load_step_tables(path, m: int) -> StepTable:
    """Read ``edge_id,threshold,cost`` rows; every edge needs a threshold-0 entry."""
    tables: dict[int, list[tuple[int, float]]] = defaultdict(list)
    for line, (eid, th, cost) in _rows(path, STEP_HEADER):
        try:
            e, t, c = int(eid), int(th), _number(cost)
        except ValueError:
            raise FormatError(path, line, "malformed row") from None
        if not 0 <= e < m:
            raise FormatError(path, line, f"edge_id {e} outside 0..{m - 1}")
        tables[e].append((t, c))
    missing = [e for e in range(m) if e not in tables]
    if missing:
        raise FormatError(path, None, f"no cost rows for edges {missing[:5]}")
    try:
        return StepTable([sorted(tables[e]) for e in range(m)])
    except ValidationError as exc:
        raise FormatError(path, None, str(exc)) from None


def save_step_tables(model: StepTable, path) -> None:
    fh, w = _writer(path)
    with fh:
        w.writerow(STEP_HEADER)
        for e in range(len(model)):
            for th, c in model.table(e):
                w.writerow([e, th, _format_number(c)])


def load_paths(path) -> tuple[tuple[int, ...], ...]:
    found: dict[int, tuple[int, ...]] = {}
    for line, (aid, edges) in _rows(path, PATHS_HEADER):
        try:
            i = int(aid)
            found[i] = tuple(int(x) for x in edges.split())
        except ValueError:
            raise FormatError(path, line, "malformed row") from None
    if sorted(found) != list(range(len(found))):
        raise FormatError(path, None, "agent ids must be 0..k-1")
    return tuple(found[i] for i in range(len(found)))


def save_paths(profile: Sequence[Sequence[int]], path) -> None:
    fh, w = _writer(path)
    with fh:
        w.writerow(PATHS_HEADER)
        for i, p in enumerate(profile):
            w.writerow([i, " ".join(map(str, p))])


def save_loads(loads: Sequence[int], path) -> None:
    fh, w = _writer(path)
    with fh:
        w.writerow(LOADS_HEADER)
        w.writerows(enumerate(loads))


def save_trace(trace, path) -> None:
    """One row per round; ``phi`` is the potential after the round."""
    fh, w = _writer(path)
    with fh:
        w.writerow(TRACE_HEADER)
        for r in trace:
            w.writerow([r.round, _format_number(r.phi_after), _format_number(r.delta), r.switches,
                        f"{r.query_ms:.3f}", f"{r.customize_ms:.3f}"])


def save_table(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    fh, w = _writer(path)
    with fh:
        w.writerow(header)
        for row in rows:
            w.writerow([_format_number(x) if isinstance(x, float) else x for x in row])


def export_instance(instance, directory) -> dict[str, FsPath]:
    """Write network, demand and (for step-table models) costs into ``directory``."""
    out = FsPath(directory)
    os.makedirs(out, exist_ok=True)
    files = {"graph": out / "network.csv", "demand": out / "demand.csv"}
    save_network(instance.network, files["graph"])
    save_demand(instance.demand, files["demand"])
    if isinstance(instance.model, StepTable):
        files["costs"] = out / "costs.csv"
        save_step_tables(instance.model, files["costs"])
    return files
