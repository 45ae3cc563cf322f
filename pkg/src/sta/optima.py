"""System optima by enumeration, the SAT hardness gadget, and a price-of-anarchy witness."""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .game import (CostModel, DemandSet, Profile, RoadNetwork, StepTable, ValidationError,
                   agent_costs, compute_loads)

MAX_PROFILES = 10 ** 7
_CHUNK = 1 << 15


class EnumerationLimitError(RuntimeError):
    def __init__(self, count: int):
        super().__init__(f"{count} profiles exceed the enumeration limit of {MAX_PROFILES}")
        self.count = count


@dataclass(frozen=True)
class SatInstance:
    """CNF over variables 1..n; literals are signed ints."""

    n: int
    clauses: tuple[tuple[int, ...], ...]

    def occurrences(self) -> dict[int, list[int]]:
        occ: dict[int, list[int]] = {lit: [] for v in range(1, self.n + 1) for lit in (v, -v)}
        for ci, clause in enumerate(self.clauses):
            for lit in clause:
                if lit == 0 or abs(lit) > self.n:
                    raise ValidationError(f"clause {ci}: literal {lit} outside variables 1..{self.n}")
                occ[lit].append(ci)
        return occ

    def validate(self) -> None:
        """Every literal must occur in exactly two different clauses."""
        for lit, where in self.occurrences().items():
            if len(where) != 2 or where[0] == where[1]:
                raise ValidationError(
                    f"literal {lit} occurs in clauses {where}; need exactly two different clauses")

    @property
    def is_valid(self) -> bool:
        try:
            self.validate()
        except ValidationError:
            return False
        return True

    def evaluate(self, assignment: Sequence[bool]) -> bool:
        """``assignment[v - 1]`` is the value of variable v."""
        return all(any(assignment[abs(l) - 1] == (l > 0) for l in clause) for clause in self.clauses)


def satisfying_assignment(sat: SatInstance) -> tuple[bool, ...] | None:
    for bits in itertools.product((False, True), repeat=sat.n):
        if sat.evaluate(bits):
            return bits
    return None


def satisfiable(sat: SatInstance) -> bool:
    return satisfying_assignment(sat) is not None


def parse_dimacs(text: str) -> SatInstance:
    """Parse ``p cnf n m`` followed by 0-terminated clauses; ``c`` lines are comments."""
    n = m = None
    clauses: list[tuple[int, ...]] = []
    current: list[int] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("c") or line.startswith("%"):
            continue
        if line.startswith("p"):
            parts = line.split()
            if len(parts) != 4 or parts[1] != "cnf":
                raise ValidationError(f"line {lineno}: malformed header {line!r}")
            try:
                n, m = int(parts[2]), int(parts[3])
            except ValueError:
                raise ValidationError(f"line {lineno}: malformed header {line!r}") from None
            continue
        if n is None:
            raise ValidationError(f"line {lineno}: clause before 'p cnf' header")
        for tok in line.split():
            try:
                lit = int(tok)
            except ValueError:
                raise ValidationError(f"line {lineno}: bad literal {tok!r}") from None
            if lit == 0:
                clauses.append(tuple(current))
                current = []
            else:
                current.append(lit)
    if n is None:
        raise ValidationError("missing 'p cnf' header")
    if current:
        clauses.append(tuple(current))
    if len(clauses) != m:
        raise ValidationError(f"header declares {m} clauses, found {len(clauses)}")
    return SatInstance(n, tuple(clauses))


def format_dimacs(sat: SatInstance) -> str:
    lines = [f"p cnf {sat.n} {len(sat.clauses)}"]
    lines += [" ".join(map(str, clause)) + " 0" for clause in sat.clauses]
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class ReducedInstance:
    network: RoadNetwork
    demand: DemandSet
    model: StepTable
    clause_edges: tuple[int, ...]
    literal_paths: dict[int, tuple[int, ...]]  # literal -> variable-agent path over its penalty edges

    def __iter__(self):
        return iter((self.network, self.demand, self.model))


def _literal_order(sat: SatInstance, occ: dict[int, list[int]]) -> dict[int, tuple[int, int]]:
    order = {}
    for v in range(1, sat.n + 1):
        pos, neg = sorted(occ[v]), sorted(occ[-v])
        shared = set(pos) & set(neg)
        if len(shared) == 1:
            # the common clause must sit in the same slot of both literal paths
            c = shared.pop()
            pos = [c] + [x for x in pos if x != c]
            neg = [c] + [x for x in neg if x != c]
        order[v], order[-v] = tuple(pos), tuple(neg)
        for c in set(pos) & set(neg):
            if pos.index(c) != neg.index(c):
                raise AssertionError(f"variable {v}: clause {c} shared in swapped position")
    return order


class _Builder:
    def __init__(self) -> None:
        self.n = 0
        self.edges: list[tuple[int, int]] = []
        self.tables: list[list[tuple[int, float]]] = []

    def vertex(self) -> int:
        self.n += 1
        return self.n - 1

    def edge(self, u: int, v: int, table: list[tuple[int, float]]) -> int:
        self.edges.append((u, v))
        self.tables.append(table)
        return len(self.edges) - 1

    def finish(self, pairs, clause_edges, literal_paths) -> ReducedInstance:
        model = StepTable(self.tables)
        d = tuple(model.cost(e, 1) for e in range(len(self.edges)))
        network = RoadNetwork(self.n, tuple(u for u, _ in self.edges), tuple(v for _, v in self.edges), d)
        return ReducedInstance(network, DemandSet.from_pairs(pairs), model, tuple(clause_edges), literal_paths)


def reduce_sat(sat: SatInstance, gadget: str = "occurrence") -> ReducedInstance:
    """Build the traffic instance whose optimum is 3n exactly when ``sat`` is satisfiable.

    ``gadget="occurrence"`` gives every (clause, literal) occurrence its own
    penalty edge: the clause agent picks one occurrence of its clause, and a
    literal path either rides that edge or skips it on a free bypass. Literal
    paths share no vertex, so a variable agent has no route other than its
    two literal paths.

    ``gadget="shared"`` wires both literal paths of every variable through a
    single penalty edge per clause. Paths of different variables then meet at
    clause edges and can be spliced into cost-3 shortcuts that cover one
    clause of each polarity, so the optimum can reach 3n on unsatisfiable
    formulas; it is kept for comparison.
    """
    if gadget not in ("occurrence", "shared"):
        raise ValueError(f"unknown gadget {gadget!r}")
    sat.validate()
    occ = sat.occurrences()
    big = 3.0 * sat.n
    penalty = [(0, big), (2, 0.0)]
    b = _Builder()
    pairs: list[tuple[int, int]] = []
    clause_edges: list[int] = []
    literal_paths: dict[int, tuple[int, ...]] = {}

    if gadget == "shared":
        order = _literal_order(sat, occ)
        ends = []
        for _ in sat.clauses:
            u, v = b.vertex(), b.vertex()
            clause_edges.append(b.edge(u, v, penalty))
            ends.append((u, v))
            pairs.append((u, v))
        for var in range(1, sat.n + 1):
            s, t = b.vertex(), b.vertex()
            pairs.append((s, t))
            for lit in (var, -var):
                first, second = order[lit]
                literal_paths[lit] = (
                    b.edge(s, ends[first][0], [(0, 1.0)]),
                    clause_edges[first],
                    b.edge(ends[first][1], ends[second][0], [(0, 1.0)]),
                    clause_edges[second],
                    b.edge(ends[second][1], t, [(0, 1.0)]),
                )
        return b.finish(pairs, clause_edges, literal_paths)

    terminals = []
    for _ in sat.clauses:
        o, dst = b.vertex(), b.vertex()
        terminals.append((o, dst))
        pairs.append((o, dst))
    # occurrence (clause, literal) -> (entry, exit, entry->mid edge, penalty edge)
    gadgets: dict[tuple[int, int], tuple[int, int, int, int]] = {}
    for ci, clause in enumerate(sat.clauses):
        o, dst = terminals[ci]
        for lit in clause:
            entry, mid, exit_ = b.vertex(), b.vertex(), b.vertex()
            inner = b.edge(entry, mid, [(0, 0.0)])
            k = b.edge(mid, exit_, penalty)
            b.edge(entry, exit_, [(0, 0.0)])
            b.edge(o, mid, [(0, 0.0)])
            b.edge(exit_, dst, [(0, 0.0)])
            gadgets[ci, lit] = (entry, exit_, inner, k)
            clause_edges.append(k)
    for var in range(1, sat.n + 1):
        s, t = b.vertex(), b.vertex()
        pairs.append((s, t))
        for lit in (var, -var):
            first, second = sorted(occ[lit])
            e1, x1, i1, k1 = gadgets[first, lit]
            e2, x2, i2, k2 = gadgets[second, lit]
            c1 = b.edge(s, e1, [(0, 1.0)])
            c2 = b.edge(x1, e2, [(0, 1.0)])
            c3 = b.edge(x2, t, [(0, 1.0)])
            literal_paths[lit] = (c1, i1, k1, c2, i2, k2, c3)
    return b.finish(pairs, clause_edges, literal_paths)


def enumerate_simple_paths(network: RoadNetwork, s: int, t: int, cap: int | None = None) -> list[tuple[int, ...]]:
    """All simple s-t paths in lexicographic edge-id order, at most ``cap`` of them."""
    found: list[tuple[int, ...]] = []
    stack: list[int] = []
    on_path = {s}

    def walk(u: int) -> bool:
        if u == t:
            found.append(tuple(stack))
            return cap is not None and len(found) >= cap
        for e in sorted(network.out_edges[u]):
            v = network.head[e]
            if v in on_path:
                continue
            on_path.add(v)
            stack.append(e)
            done = walk(v)
            stack.pop()
            on_path.discard(v)
            if done:
                return True
        return False

    if s != t:
        walk(s)
    return found


def _cost_table(model: CostModel, m: int, k: int) -> np.ndarray:
    return np.array([[model.cost(e, load) for load in range(k + 1)] for e in range(m)])


def brute_force_optimum(network: RoadNetwork, demand: DemandSet, model: CostModel,
                        path_cap: int = 64) -> tuple[Profile, float]:
    """Minimum total cost over every profile of simple paths.

    Ties go to the lexicographically smallest profile. Refuses with
    ``EnumerationLimitError`` when the product of per-agent path counts is
    above ``MAX_PROFILES``.
    """
    options = []
    for agent in demand.agents:
        paths = enumerate_simple_paths(network, agent.origin, agent.destination, path_cap)
        if not paths:
            raise ValidationError(f"agent {agent.id}: no path from {agent.origin} to {agent.destination}")
        options.append(paths)
    count = math.prod(len(p) for p in options)
    if count > MAX_PROFILES:
        warnings.warn(f"refusing to enumerate {count} profiles")
        raise EnumerationLimitError(count)
    k, m = len(options), network.m
    # single-option agents only shift the base load; enumerate the rest
    free = [a for a in range(k) if len(options[a]) > 1]
    base = np.zeros(m, dtype=np.int64)
    for a in range(k):
        if len(options[a]) == 1:
            base[list(options[a][0])] += 1
    cols = sorted({e for a in free for p in options[a] for e in p})
    col_of = {e: i for i, e in enumerate(cols)}
    table = _cost_table(model, m, k)[cols]
    weighted = table * np.arange(k + 1)  # load * cost(load)
    dtype = np.int16 if k < 2 ** 15 else np.int64
    incidence = []
    for a in free:
        inc = np.zeros((len(options[a]), len(cols)), dtype=dtype)
        for j, p in enumerate(options[a]):
            inc[j, [col_of[e] for e in p]] = 1
        incidence.append(inc)
    sizes = [len(options[a]) for a in free]
    rows = np.arange(len(cols))
    best_total, best_index = math.inf, 0
    for lo in range(0, count if free else 0, _CHUNK):
        flat = np.arange(lo, min(count, lo + _CHUNK))
        idx = np.unravel_index(flat, sizes)
        loads = np.broadcast_to(base[cols].astype(dtype), (len(flat), len(cols))).copy()
        for inc, pick in zip(incidence, idx):
            loads += inc[pick]
        totals = weighted[rows, loads].sum(axis=1)
        j = int(np.argmin(totals))
        if totals[j] < best_total:
            best_total, best_index = float(totals[j]), lo + j
    picks = dict(zip(free, np.unravel_index(best_index, sizes))) if free else {}
    profile = tuple(options[a][int(picks.get(a, 0))] for a in range(k))
    loads = compute_loads(profile, network)
    return profile, math.fsum(agent_costs(profile, loads, model))


def social_cost(profile: Sequence[Sequence[int]], network: RoadNetwork, model: CostModel) -> float:
    return math.fsum(agent_costs(profile, compute_loads(profile, network), model))


@dataclass(frozen=True)
class PoaWitness:
    network: RoadNetwork
    demand: DemandSet
    model: StepTable
    cheap_edge: int  # constant epsilon
    shared_edge: int  # 1 alone, delta once k agents share it

    def __iter__(self):
        return iter((self.network, self.demand, self.model))

    def all_on(self, e: int) -> Profile:
        return tuple((e,) for _ in self.demand.agents)


def poa_witness(k: int, epsilon: float, delta: float) -> PoaWitness:
    """k agents on two parallel edges; the all-cheap-edge equilibrium costs epsilon/delta times the optimum."""
    if k < 2:
        # a lone agent already gets delta on the shared edge
        raise ValueError("need at least two agents")
    if not 0 < delta < epsilon < 1:
        raise ValueError(f"need 0 < delta < epsilon < 1, got delta={delta}, epsilon={epsilon}")
    model = StepTable([[(0, epsilon)], [(0, 1.0), (k, delta)]])
    network = RoadNetwork(2, (0, 0), (1, 1), (epsilon, model.cost(1, 1)))
    demand = DemandSet.from_pairs([(0, 1)] * k)
    return PoaWitness(network, demand, model, 0, 1)


def enumerate_equilibria(network: RoadNetwork, demand: DemandSet, model: CostModel, mode: str = "aware",
                         path_cap: int = 64) -> Iterator[Profile]:
    """Every pure equilibrium among simple-path profiles (small instances only)."""
    from .engine import is_equilibrium

    options = [enumerate_simple_paths(network, a.origin, a.destination, path_cap) for a in demand.agents]
    count = math.prod(len(p) for p in options)
    if count > MAX_PROFILES:
        raise EnumerationLimitError(count)
    for profile in itertools.product(*options):
        if is_equilibrium(network, demand, profile, model, mode)[0]:
            yield profile


def _canonical(clauses, rank) -> tuple[tuple[int, ...], ...]:
    return tuple(sorted(tuple(sorted(rank[lit] for lit in c)) for c in clauses))


def symmetric_images(sat: SatInstance) -> Iterator[tuple[tuple[int, ...], ...]]:
    """The clause lists of ``sat`` under every variable relabeling and polarity flip."""
    for perm in itertools.permutations(range(1, sat.n + 1)):
        for flips in itertools.product((1, -1), repeat=sat.n):
            image = {}
            for v in range(1, sat.n + 1):
                image[v] = perm[v - 1] * flips[v - 1]
                image[-v] = -image[v]
            yield tuple(tuple(image[lit] for lit in c) for c in sat.clauses)


def valid_sat_instances(n: int, up_to_symmetry: bool = False) -> Iterator[SatInstance]:
    """Every valid instance on n variables, one per multiset of clauses.

    With ``up_to_symmetry`` only the lexicographically smallest member of each
    class under variable relabeling and polarity flips is produced.
    """
    lits = [lit for v in range(1, n + 1) for lit in (v, -v)]
    rank = {lit: i for i, lit in enumerate(lits)}
    remaining = {lit: 2 for lit in lits}

    def grow(clauses: list[tuple[int, ...]], last: tuple[int, ...] | None):
        first = next((lit for lit in lits if remaining[lit]), None)
        if first is None:
            sat = SatInstance(n, tuple(clauses))
            if up_to_symmetry:
                own = _canonical(sat.clauses, rank)
                if any(_canonical(img, rank) < own for img in symmetric_images(sat)):
                    return
            yield sat
            return
        others = [lit for lit in lits if remaining[lit] and lit != first]
        for size in range(len(others) + 1):
            for extra in itertools.combinations(others, size):
                clause = (first,) + extra
                key = tuple(rank[lit] for lit in clause)
                if last is not None and key < last:
                    continue
                for lit in clause:
                    remaining[lit] -= 1
                yield from grow(clauses + [clause], key)
                for lit in clause:
                    remaining[lit] += 1

    yield from grow([], None)
