"""Directed networks, trips, simple-path enumeration and the incremental
construction vocabulary: template graphs, trip spanning trees, trip path
graphs and graph unions.

Nodes are non-negative integers. An ordered node pair carries at most one
edge, and an edge's cost model and capacity belong to the template graph;
subgraphs reference them and unions refuse operands that disagree, which
keeps the union operation well-defined when operands overlap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence, Tuple

from .costs import CostModel
from .errors import PathLimitExceeded, TemplateConsistencyError

DEFAULT_PATH_LIMIT = 10_000


@dataclass(frozen=True)
class Edge:
    """A directed edge with its cost model and capacity (may be inf)."""

    tail: int
    head: int
    cost: CostModel
    capacity: float = math.inf

    def __post_init__(self):
        if self.tail < 0 or self.head < 0:
            raise ValueError(f"node ids must be non-negative: ({self.tail}, {self.head})")
        if self.tail == self.head:
            raise ValueError(f"self-loop at node {self.tail}")
        if not self.capacity > 0:
            raise ValueError(f"capacity must be positive, got {self.capacity}")

    @property
    def pair(self) -> Tuple[int, int]:
        return (self.tail, self.head)


class Network:
    """An immutable directed graph.

    Every edge endpoint must be a declared node and duplicate ordered
    pairs are rejected.
    """

    __slots__ = ("nodes", "_edges", "_succ")

    def __init__(self, nodes: Iterable[int], edges: Iterable[Edge]):
        node_set = frozenset(int(n) for n in nodes)
        if any(n < 0 for n in node_set):
            raise ValueError("node ids must be non-negative")
        edge_map = {}
        for e in edges:
            if e.tail not in node_set or e.head not in node_set:
                raise ValueError(f"edge ({e.tail}, {e.head}) has an undeclared endpoint")
            if e.pair in edge_map:
                raise ValueError(f"duplicate edge ({e.tail}, {e.head})")
            edge_map[e.pair] = e
        succ = {}
        for (i, j) in edge_map:
            succ.setdefault(i, []).append(j)
        object.__setattr__(self, "nodes", node_set)
        object.__setattr__(self, "_edges", edge_map)
        object.__setattr__(self, "_succ", {i: tuple(sorted(js)) for i, js in succ.items()})

    def __setattr__(self, name, value):
        raise AttributeError("Network is immutable")

    @property
    def edges(self) -> Tuple[Edge, ...]:
        return tuple(self._edges[p] for p in sorted(self._edges))

    @property
    def edge_pairs(self) -> Tuple[Tuple[int, int], ...]:
        return tuple(sorted(self._edges))

    def edge(self, tail: int, head: int) -> Edge:
        return self._edges[(tail, head)]

    def has_edge(self, tail: int, head: int) -> bool:
        return (tail, head) in self._edges

    def successors(self, node: int) -> Tuple[int, ...]:
        return self._succ.get(node, ())

    def __contains__(self, node: int) -> bool:
        return node in self.nodes

    def __eq__(self, other):
        return (
            isinstance(other, Network)
            and self.nodes == other.nodes
            and self._edges == other._edges
        )

    def __hash__(self):
        return hash((self.nodes, tuple(sorted(self._edges.items()))))

    def __repr__(self):
        return f"Network({len(self.nodes)} nodes, {len(self._edges)} edges)"


@dataclass(frozen=True)
class Trip:
    """An origin-destination demand (vehicles per unit time)."""

    source: int
    sink: int
    demand: float

    def __post_init__(self):
        if self.source == self.sink:
            raise ValueError(f"trip source equals sink ({self.source})")
        if not self.demand > 0:
            raise ValueError(f"trip demand must be positive, got {self.demand}")


@dataclass(frozen=True)
class Path:
    """A simple directed path, stored as its node sequence."""

    trip_index: int
    nodes: Tuple[int, ...]

    @property
    def edge_pairs(self) -> Tuple[Tuple[int, int], ...]:
        return tuple(zip(self.nodes, self.nodes[1:]))

    def key(self) -> str:
        """Canonical string form, e.g. ``"0-5-6-2-3"``."""
        return "-".join(str(n) for n in self.nodes)

    def __len__(self):
        return len(self.nodes) - 1


@dataclass(frozen=True)
class PathSet:
    """Per-trip tuples of enumerated paths, ordered lexicographically."""

    per_trip: Tuple[Tuple[Path, ...], ...]

    def for_trip(self, trip_index: int) -> Tuple[Path, ...]:
        return self.per_trip[trip_index]

    def all_paths(self) -> Tuple[Path, ...]:
        return tuple(p for group in self.per_trip for p in group)

    def __len__(self):
        return sum(len(g) for g in self.per_trip)


@dataclass(frozen=True)
class TemplateGraph:
    """A network designated as the universe of allowed construction."""

    network: Network


@dataclass(frozen=True)
class TripSpanningTree:
    """A validated initial feasible graph; see validate_trip_spanning_tree."""

    network: Network
    trips: Tuple[Trip, ...]
    trip_paths: Tuple[Path, ...]  # the unique path of each trip


@dataclass(frozen=True)
class TripPathGraph:
    """A validated single-path addition for one trip."""

    network: Network
    trip: Trip
    trip_index: int = 0
    candidate_index: int = 0
    path: Path = None  # type: ignore[assignment]


@dataclass(frozen=True)
class Violation:
    property_id: int
    message: str


@dataclass(frozen=True)
class ViolationList:
    violations: Tuple[Violation, ...]

    def __bool__(self):
        return bool(self.violations)

    def messages(self) -> Tuple[str, ...]:
        return tuple(v.message for v in self.violations)


def build_grid_template(rows: int, cols: int, default_cost: CostModel,
                        default_capacity: float = math.inf) -> TemplateGraph:
    """A rows x cols lattice with a directed edge each way between neighbours.

    Node ids are assigned row-major: node (r, c) is r*cols + c.
    """
    if rows < 1 or cols < 1:
        raise ValueError("grid dimensions must be >= 1")
    nodes = range(rows * cols)
    edges = []
    for r in range(rows):
        for c in range(cols):
            a = r * cols + c
            if c + 1 < cols:
                b = a + 1
                edges.append(Edge(a, b, default_cost, default_capacity))
                edges.append(Edge(b, a, default_cost, default_capacity))
            if r + 1 < rows:
                b = a + cols
                edges.append(Edge(a, b, default_cost, default_capacity))
                edges.append(Edge(b, a, default_cost, default_capacity))
    return TemplateGraph(Network(nodes, edges))


def subgraph_issues(candidate: Network, template: Network) -> Tuple[str, ...]:
    """Reasons why ``candidate`` is not a subgraph of ``template`` (empty = ok)."""
    issues = []
    missing_nodes = sorted(candidate.nodes - template.nodes)
    if missing_nodes:
        issues.append(f"nodes {missing_nodes} not in template")
    for e in candidate.edges:
        if not template.has_edge(e.tail, e.head):
            issues.append(f"edge {e.pair} not in template")
        elif template.edge(e.tail, e.head) != e:
            issues.append(f"edge {e.pair} redefines template cost or capacity")
    return tuple(issues)


def graph_union(base: Network, additions: Sequence[Network]) -> Network:
    """Set union of node and edge sets; operands must agree on shared edges."""
    nodes = set(base.nodes)
    edge_map = {e.pair: e for e in base.edges}
    for net in additions:
        nodes |= net.nodes
        for e in net.edges:
            seen = edge_map.get(e.pair)
            if seen is None:
                edge_map[e.pair] = e
            elif seen != e:
                raise TemplateConsistencyError(
                    f"operands disagree on edge {e.pair}: {seen} vs {e}"
                )
    return Network(nodes, edge_map.values())


def enumerate_paths(net: Network, trip: Trip, limit: int = DEFAULT_PATH_LIMIT,
                    trip_index: int = 0) -> PathSet:
    """All simple source-to-sink paths of one trip.

    Paths are emitted in lexicographic order of their node sequences, which
    makes every downstream solver and report reproducible. Exceeding
    ``limit`` raises PathLimitExceeded rather than truncating.
    """
    paths = _enumerate(net, trip, limit)
    group = tuple(Path(trip_index, nodes) for nodes in paths)
    per_trip = tuple(() for _ in range(trip_index)) + (group,)
    return PathSet(per_trip)


def enumerate_trip_paths(net: Network, trips: Sequence[Trip],
                         limit: int = DEFAULT_PATH_LIMIT) -> PathSet:
    """Per-trip path enumeration for a whole trip set."""
    groups = []
    for m, trip in enumerate(trips):
        nodes_seqs = _enumerate(net, trip, limit)
        groups.append(tuple(Path(m, nodes) for nodes in nodes_seqs))
    return PathSet(tuple(groups))


def _enumerate(net: Network, trip: Trip, limit: int):
    if trip.source not in net.nodes or trip.sink not in net.nodes:
        return ()
    out = []
    seq = [trip.source]
    on_path = {trip.source}

    def dfs(node):
        if node == trip.sink:
            if len(out) >= limit:
                raise PathLimitExceeded(limit, trip)
            out.append(tuple(seq))
            return
        for nxt in net.successors(node):  # sorted, hence lexicographic output
            if nxt in on_path:
                continue
            seq.append(nxt)
            on_path.add(nxt)
            dfs(nxt)
            on_path.discard(nxt)
            seq.pop()

    dfs(trip.source)
    return tuple(out)


def added_paths(base: Network, addition: Network, trip: Trip,
                limit: int = DEFAULT_PATH_LIMIT, trip_index: int = 0) -> PathSet:
    """Paths for ``trip`` present in base+addition but not in base alone."""
    union = graph_union(base, [addition])
    all_paths = enumerate_paths(union, trip, limit, trip_index).for_trip(trip_index)
    old = {p.nodes for p in enumerate_paths(base, trip, limit, trip_index).for_trip(trip_index)}
    group = tuple(p for p in all_paths if p.nodes not in old)
    per_trip = tuple(() for _ in range(trip_index)) + (group,)
    return PathSet(per_trip)


def validate_trip_spanning_tree(candidate: Network, trips: Sequence[Trip],
                                limit: int = DEFAULT_PATH_LIMIT):
    """Check the four defining properties of an initial feasible graph.

    1. Every trip's source and sink are nodes of the graph.
    2. Exactly one source-to-sink path exists per trip.
    3. Every node lies on some trip's path.
    4. Per-edge capacity covers the sum of demands routed through it
       (each trip's full demand rides its unique path).

    Returns a TripSpanningTree when all hold, otherwise a ViolationList
    naming each failure. Path enumeration overflow propagates as
    PathLimitExceeded.
    """
    trips = tuple(trips)
    violations = []
    trip_paths = []
    for m, trip in enumerate(trips):
        missing = [n for n in (trip.source, trip.sink) if n not in candidate.nodes]
        if missing:
            violations.append(Violation(
                1, f"trip {m}: endpoint(s) {missing} not in the graph"))
            trip_paths.append(None)
            continue
        found = enumerate_paths(candidate, trip, limit, m).for_trip(m)
        if len(found) != 1:
            violations.append(Violation(
                2, f"trip {m}: expected exactly one path, found {len(found)}"))
            trip_paths.append(None)
        else:
            trip_paths.append(found[0])

    covered = set()
    for p in trip_paths:
        if p is not None:
            covered.update(p.nodes)
    stray = sorted(candidate.nodes - covered)
    if stray and not violations:
        violations.append(Violation(3, f"nodes {stray} lie on no trip's path"))

    if not violations:
        load = {}
        for trip, p in zip(trips, trip_paths):
            for pair in p.edge_pairs:
                load[pair] = load.get(pair, 0.0) + trip.demand
        for pair in sorted(load):
            cap = candidate.edge(*pair).capacity
            if load[pair] > cap:
                violations.append(Violation(
                    4, f"edge {pair}: routed demand {load[pair]} exceeds capacity {cap}"))

    if violations:
        return ViolationList(tuple(violations))
    return TripSpanningTree(candidate, trips, tuple(trip_paths))


def validate_trip_path_graph(candidate: Network, trip: Trip, trip_index: int = 0,
                             candidate_index: int = 0,
                             limit: int = DEFAULT_PATH_LIMIT):
    """Check that ``candidate`` is a single simple path joining the trip's ends.

    1. Source and sink are nodes of the graph.
    2. Exactly one source-to-sink path exists.
    3. Every node of the graph belongs to that path.
    """
    violations = []
    missing = [n for n in (trip.source, trip.sink) if n not in candidate.nodes]
    if missing:
        violations.append(Violation(1, f"endpoint(s) {missing} not in the graph"))
        return ViolationList(tuple(violations))
    found = enumerate_paths(candidate, trip, limit, trip_index).for_trip(trip_index)
    if len(found) != 1:
        violations.append(Violation(
            2, f"expected exactly one path, found {len(found)}"))
    path = found[0] if len(found) == 1 else None
    if path is not None:
        stray = sorted(candidate.nodes - set(path.nodes))
        if stray:
            violations.append(Violation(3, f"nodes {stray} are off the path"))
        # edges not on the path would create extra paths or dangling nodes;
        # with properties 2-3 satisfied only path edges can remain, except
        # possibly anti-parallel duplicates, which property 2 already rules
        # out for length > 1.
        extra = [e.pair for e in candidate.edges if e.pair not in set(path.edge_pairs)]
        if extra and not violations:
            violations.append(Violation(2, f"edges {extra} are off the path"))
    if violations:
        return ViolationList(tuple(violations))
    return TripPathGraph(candidate, trip, trip_index, candidate_index, path)
