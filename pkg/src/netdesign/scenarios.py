"""Built-in fixtures and instance generation.

Each scenario materialises a fixed catalogue network edge-for-edge; node
numbering notes sit next to each edge list so the fixtures stay
auditable. Scenarios expose a plain instance (for ``solve``) and, where
the fixture is posed as a design problem, a candidate set (for
``lambda``/``check``/``design``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

from .costs import Affine, Constant, Greenshields
from .design import DOUBLE_PRIME, GENERAL, PRIME, CandidateSet
from .errors import BadParams, PathLimitExceeded, UnknownScenario
from .network import (
    Edge,
    Network,
    TemplateGraph,
    Trip,
    TripPathGraph,
    TripSpanningTree,
    ViolationList,
    graph_union,
    validate_trip_path_graph,
    validate_trip_spanning_tree,
)
from .routing import Instance

SCENARIO_NAMES = ("braess", "pigou", "fig3", "fig4", "counterexample", "parallel")


@dataclass(frozen=True)
class Scenario:
    name: str
    params: Tuple[Tuple[str, object], ...]
    instance: Optional[Instance]
    candidate_set: Optional[CandidateSet]
    candidate_labels: Tuple[str, ...]
    description: str

    def params_dict(self) -> dict:
        return dict(self.params)


def _network(nodes, edge_defs) -> Network:
    return Network(nodes, [Edge(i, j, cost, cap) for i, j, cost, cap in edge_defs])


def _tree(network: Network, trips) -> TripSpanningTree:
    validated = validate_trip_spanning_tree(network, trips)
    if isinstance(validated, ViolationList):
        raise AssertionError(f"fixture spanning tree invalid: {validated.messages()}")
    return validated


def _path_graph(network: Network, trip, trip_index, candidate_index) -> TripPathGraph:
    validated = validate_trip_path_graph(network, trip, trip_index, candidate_index)
    if isinstance(validated, ViolationList):
        raise AssertionError(f"fixture path graph invalid: {validated.messages()}")
    return validated


def _restrict(params: Optional[dict], allowed: dict, scenario: str) -> dict:
    given = dict(params or {})
    unknown = set(given) - set(allowed)
    if unknown:
        raise BadParams(f"unknown parameter(s) {sorted(unknown)} for scenario {scenario}")
    merged = dict(allowed)
    merged.update(given)
    return merged


# -- Braess ------------------------------------------------------------------
# Nodes: 0 = s, 1 = v, 2 = w, 3 = t. Times: s->v and w->t are 10x,
# s->w and v->t are 50+x, and the optional shortcut v->w is 10+x.
# One trip of demand 6 from s to t.

_BRAESS_EDGES = (
    (0, 1, Affine(0.0, 10.0), math.inf),
    (0, 2, Affine(50.0, 1.0), math.inf),
    (1, 3, Affine(50.0, 1.0), math.inf),
    (2, 3, Affine(0.0, 10.0), math.inf),
)
_BRAESS_SHORTCUT = (1, 2, Affine(10.0, 1.0), math.inf)


def _braess(params) -> Scenario:
    p = _restrict(params, {"with_edge": True}, "braess")
    if not isinstance(p["with_edge"], bool):
        raise BadParams("with_edge must be a boolean")
    trip = Trip(0, 3, 6.0)
    edges = _BRAESS_EDGES + ((_BRAESS_SHORTCUT,) if p["with_edge"] else ())
    instance = Instance(_network(range(4), edges), (trip,))

    # Posed as a design problem: the spanning tree is the path s-v-t, the
    # additions are the path s-w-t and then s-v-w-t over the shortcut.
    template = TemplateGraph(_network(range(4), _BRAESS_EDGES + (_BRAESS_SHORTCUT,)))
    tem = template.network
    tree_net = Network({0, 1, 3}, [tem.edge(0, 1), tem.edge(1, 3)])
    swt = Network({0, 2, 3}, [tem.edge(0, 2), tem.edge(2, 3)])
    svwt = Network({0, 1, 2, 3}, [tem.edge(0, 1), tem.edge(1, 2), tem.edge(2, 3)])
    cs = CandidateSet(
        template=template,
        spanning_tree=_tree(tree_net, (trip,)),
        candidates=(
            _path_graph(swt, trip, 0, 0),
            _path_graph(svwt, trip, 0, 1),
        ),
        declared_class=GENERAL,
    )
    return Scenario(
        name="braess",
        params=tuple(sorted(p.items())),
        instance=instance,
        candidate_set=cs,
        candidate_labels=("s-w-t", "s-v-w-t"),
        description="four-node paradox network, demand 6, optional shortcut edge",
    )


# -- Pigou -------------------------------------------------------------------
# Two parallel routes from s to t with a unit demand: one of constant time
# 1 and one of time x. Each route is split in two edges through its own
# midpoint (1 above, 2 below) because an ordered node pair carries at most
# one edge; the split halves add up to the original route times.


def _pigou(params) -> Scenario:
    _restrict(params, {}, "pigou")
    trip = Trip(0, 3, 1.0)
    net = _network(range(4), (
        (0, 1, Constant(0.5), math.inf),
        (1, 3, Constant(0.5), math.inf),
        (0, 2, Affine(0.0, 0.5), math.inf),
        (2, 3, Affine(0.0, 0.5), math.inf),
    ))
    return Scenario(
        name="pigou",
        params=(),
        instance=Instance(net, (trip,)),
        candidate_set=None,
        candidate_labels=(),
        description="two parallel routes (times 1 and x), unit demand",
    )


# -- Graph-union illustration ------------------------------------------------
# Layout (ids are fixed so edge lists are auditable): 9 = s1, 4 = t1,
# 6 = s2, 14 = t2; 10 sits right of 9, 2 above 10, 3 right of 2, 11 below
# 3, 14 below 11. The middle vertical pair 2<->10 is bidirectional.

_FIG3_TREE = ((9, 10), (2, 3), (3, 4), (6, 2), (2, 10), (10, 2), (11, 14), (10, 11))
_FIG3_CANDIDATE = ((9, 10), (10, 11), (11, 3), (3, 4))


def _fig3(params) -> Scenario:
    _restrict(params, {}, "fig3")
    trips = (Trip(9, 4, 1.0), Trip(6, 14, 1.0))
    all_pairs = sorted(set(_FIG3_TREE) | set(_FIG3_CANDIDATE))
    nodes = {n for p in all_pairs for n in p}
    template = TemplateGraph(_network(
        nodes, [(i, j, Constant(1.0), 10.0) for i, j in all_pairs]))
    tem = template.network
    tree_net = Network({n for p in _FIG3_TREE for n in p},
                       [tem.edge(i, j) for i, j in _FIG3_TREE])
    cand_net = Network({n for p in _FIG3_CANDIDATE for n in p},
                       [tem.edge(i, j) for i, j in _FIG3_CANDIDATE])
    cs = CandidateSet(
        template=template,
        spanning_tree=_tree(tree_net, trips),
        candidates=(_path_graph(cand_net, trips[0], 0, 0),),
        declared_class=GENERAL,
    )
    union = cs.subset_network([0])
    return Scenario(
        name="fig3",
        params=(),
        instance=Instance(union, trips),
        candidate_set=cs,
        candidate_labels=("detour-9-10-11-3-4",),
        description="two-trip union example; the addition contributes one new edge",
    )


# -- Path-addition illustration ----------------------------------------------
# Nodes: 1 = s1, 2 = v, 3 = t1, 4 = w, 5 = r, 6 = g, 7 = h. The tree is
# the straight path 1-2-3; the addition walks 1-4-5-2-6-7-3 and induces
# two extra composite routes, for four total.

_FIG4_TREE = ((1, 2), (2, 3))
_FIG4_CANDIDATE = ((1, 4), (4, 5), (5, 2), (2, 6), (6, 7), (7, 3))


def _fig4(params) -> Scenario:
    _restrict(params, {}, "fig4")
    trip = Trip(1, 3, 1.0)
    all_pairs = sorted(set(_FIG4_TREE) | set(_FIG4_CANDIDATE))
    nodes = {n for p in all_pairs for n in p}
    template = TemplateGraph(_network(
        nodes, [(i, j, Constant(1.0), 10.0) for i, j in all_pairs]))
    tem = template.network
    tree_net = Network({1, 2, 3}, [tem.edge(i, j) for i, j in _FIG4_TREE])
    cand_net = Network(nodes, [tem.edge(i, j) for i, j in _FIG4_CANDIDATE])
    cs = CandidateSet(
        template=template,
        spanning_tree=_tree(tree_net, (trip,)),
        candidates=(_path_graph(cand_net, trip, 0, 0),),
        declared_class=GENERAL,
    )
    union = cs.subset_network([0])
    return Scenario(
        name="fig4",
        params=(),
        instance=Instance(union, (trip,)),
        candidate_set=cs,
        candidate_labels=("loop-1-4-5-2-6-7-3",),
        description="single-trip addition inducing two composite routes",
    )


# -- Supermodularity counterexample ------------------------------------------
# Fourteen nodes on a fixed layout: 1 = s, 4 = t; 1-2-3-4 is the straight
# middle row (the spanning tree); 5-8 sit above row 1-4; 9-12 sit below;
# 13 below 10 and 14 below 11. The "orange" addition climbs over the
# top-left and dives through the bottom, the "blue" addition dives
# bottom-left and climbs over the top-right; together they compose a
# short bottom corridor 1-9-10-11-12-4, which is why adding one of them
# helps more after the other is already in place.

_CX_TREE = ((1, 2), (2, 3), (3, 4))
_CX_ORANGE = ((1, 5), (5, 6), (6, 2), (2, 10), (10, 13), (13, 14), (14, 11),
              (11, 12), (12, 4))
_CX_BLUE = ((1, 9), (9, 10), (10, 11), (11, 3), (3, 7), (7, 8), (8, 4))


def _counterexample(params) -> Scenario:
    p = _restrict(params, {"costing": "mc"}, "counterexample")
    costing = p["costing"]
    if costing not in ("mc", "greenshields"):
        raise BadParams(f"costing must be 'mc' or 'greenshields', got {costing!r}")
    if costing == "mc":
        trip = Trip(1, 4, 1.0)
        def cost_of(pair):
            return Constant(3.0) if pair in _CX_TREE else Constant(1.0)
    else:
        trip = Trip(1, 4, 5.0)
        def cost_of(pair):
            return Greenshields(1.0, 1.0, 10.0)
    all_pairs = sorted(set(_CX_TREE) | set(_CX_ORANGE) | set(_CX_BLUE))
    nodes = {n for pr in all_pairs for n in pr}
    template = TemplateGraph(_network(
        nodes, [(i, j, cost_of((i, j)), 10.0) for i, j in all_pairs]))
    tem = template.network

    def member(pairs):
        return Network({n for pr in pairs for n in pr},
                       [tem.edge(i, j) for i, j in pairs])

    cs = CandidateSet(
        template=template,
        spanning_tree=_tree(member(_CX_TREE), (trip,)),
        candidates=(
            _path_graph(member(_CX_ORANGE), trip, 0, 0),
            _path_graph(member(_CX_BLUE), trip, 0, 1),
        ),
        declared_class=PRIME,
    )
    return Scenario(
        name="counterexample",
        params=tuple(sorted(p.items())),
        instance=Instance(cs.subset_network([0, 1]), (trip,)),
        candidate_set=cs,
        candidate_labels=("orange", "blue"),
        description="14-node network where adding one path helps more on a superset",
    )


# -- Identical parallel paths --------------------------------------------------
# n parallel routes from 0 to 1, each through its own midpoint (2, 3, ...)
# as two hyperbolic edges of length l/2, so every route behaves as one
# edge of length l. The first route is the spanning tree, the remaining
# n-1 are the candidates.


def _parallel(params) -> Scenario:
    p = _restrict(params, {"n": 3, "l": 1.0, "v_max": 1.0, "u": 10.0, "d": 5.0},
                  "parallel")
    n = p["n"]
    if not isinstance(n, int) or n < 1:
        raise BadParams(f"n must be a positive integer, got {n!r}")
    l, v_max, u, d = (float(p[k]) for k in ("l", "v_max", "u", "d"))
    if min(l, v_max, u, d) <= 0:
        raise BadParams("l, v_max, u and d must be positive")
    if d >= u:
        raise BadParams(f"demand {d} must stay below the per-path capacity {u}")
    trip = Trip(0, 1, d)
    half = Greenshields(l / 2.0, v_max, u)
    edge_defs = []
    route_pairs = []
    for i in range(n):
        mid = 2 + i
        route_pairs.append(((0, mid), (mid, 1)))
        edge_defs += [(0, mid, half, u), (mid, 1, half, u)]
    template = TemplateGraph(_network(range(2 + n), edge_defs))
    tem = template.network

    def member(pairs):
        return Network({n for pr in pairs for n in pr},
                       [tem.edge(i, j) for i, j in pairs])

    candidates = tuple(
        _path_graph(member(route_pairs[i]), trip, 0, i - 1) for i in range(1, n))
    cs = CandidateSet(
        template=template,
        spanning_tree=_tree(member(route_pairs[0]), (trip,)),
        candidates=candidates,
        declared_class=DOUBLE_PRIME,
    )
    return Scenario(
        name="parallel",
        params=tuple(sorted(p.items())),
        instance=Instance(cs.subset_network(range(n - 1)), (trip,)),
        candidate_set=cs,
        candidate_labels=tuple(f"p{i}" for i in range(1, n)),
        description="identical parallel hyperbolic routes; uniform split is optimal",
    )


_BUILDERS = {
    "braess": _braess,
    "pigou": _pigou,
    "fig3": _fig3,
    "fig4": _fig4,
    "counterexample": _counterexample,
    "parallel": _parallel,
}


# ---------------------------------------------------------------------------
# seeded instance generation for the property suites


def _random_simple_path(rng, net: Network, source: int, sink: int):
    """Uniform-ish random simple path via randomised depth-first search."""
    path = [source]
    seen = {source}

    def walk(node) -> bool:
        if node == sink:
            return True
        succ = [v for v in net.successors(node) if v not in seen]
        rng.shuffle(succ)
        for v in succ:
            path.append(v)
            seen.add(v)
            if walk(v):
                return True
            seen.discard(v)
            path.pop()
        return False

    if not walk(source):
        raise AssertionError("grid templates are strongly connected")
    return tuple(path)


def _path_member(template: Network, nodes) -> Network:
    pairs = list(zip(nodes, nodes[1:]))
    return Network(set(nodes), [template.edge(i, j) for i, j in pairs])


def random_candidate_set(seed: int, costing: str = "constant", rows: int = 4,
                         cols: int = 4, max_candidates: int = 5,
                         max_union_paths: int = 2000) -> CandidateSet:
    """A seeded random design problem on a grid template.

    One trip between two random distinct grid nodes; the spanning tree is a
    random simple path and the candidates are further random paths for the
    same trip. The same seed yields the same topology for either costing.
    Candidate draws whose union would enumerate more than
    ``max_union_paths`` simple paths are rejected and redrawn, keeping the
    exhaustive checkers tractable.
    """
    import random as _random

    from .network import build_grid_template, enumerate_paths

    if costing not in ("constant", "greenshields"):
        raise BadParams(f"costing must be 'constant' or 'greenshields', got {costing!r}")
    rng_topo = _random.Random(f"{seed}-topology")
    rng_cost = _random.Random(f"{seed}-cost")

    demand = float(rng_topo.randint(1, 3))
    shape = build_grid_template(rows, cols, Constant(1.0), 100.0)
    pairs = shape.network.edge_pairs
    if costing == "constant":
        models = {p: Constant(float(rng_cost.randint(1, 9))) for p in pairs}
        capacity = 100.0
    else:
        u = 4.0 * demand
        models = {p: Greenshields(round(rng_cost.uniform(0.5, 2.0), 3), 1.0, u)
                  for p in pairs}
        capacity = 4.0 * demand
    template = TemplateGraph(Network(
        shape.network.nodes,
        [Edge(i, j, models[(i, j)], capacity) for i, j in pairs]))

    nodes = sorted(template.network.nodes)
    source = rng_topo.choice(nodes)
    sink = rng_topo.choice([n for n in nodes if n != source])
    trip = Trip(source, sink, demand)

    tree_nodes = _random_simple_path(rng_topo, template.network, source, sink)
    tree = _tree(_path_member(template.network, tree_nodes), (trip,))

    n_candidates = rng_topo.randint(1, max_candidates)
    chosen = []
    seen = {tree_nodes}
    attempts = 0
    while len(chosen) < n_candidates and attempts < 200:
        attempts += 1
        cand_nodes = _random_simple_path(rng_topo, template.network, source, sink)
        if cand_nodes in seen:
            continue
        trial = chosen + [cand_nodes]
        union = graph_union(tree.network,
                            [_path_member(template.network, c) for c in trial])
        try:
            enumerate_paths(union, trip, max_union_paths)
        except PathLimitExceeded:
            continue
        seen.add(cand_nodes)
        chosen.append(cand_nodes)
    candidates = tuple(
        _path_graph(_path_member(template.network, c), trip, 0, i)
        for i, c in enumerate(chosen))
    return CandidateSet(template=template, spanning_tree=tree,
                        candidates=candidates, declared_class=GENERAL)


@dataclass(frozen=True)
class ParallelFamily:
    """A seeded parallel family plus the data its closed form needs."""

    candidate_set: CandidateSet
    flavour: str
    d: float
    spanning_cost: Optional[float] = None            # constant flavour
    candidate_costs: Tuple[float, ...] = ()
    l: Optional[float] = None                        # greenshields flavour
    v_max: Optional[float] = None
    u: Optional[float] = None


def random_parallel_family(seed: int, flavour: str = "constant",
                           max_candidates: int = 6) -> ParallelFamily:
    """Parallel single-trip candidate sets where supermodularity must hold.

    The constant flavour draws distinct path costs with per-edge capacities
    at least the demand; the hyperbolic flavour draws one shared (l, v_max,
    u, d) with d < u, so every route (tree included) is identical.
    """
    import random as _random

    if flavour not in ("constant", "greenshields"):
        raise BadParams(f"flavour must be 'constant' or 'greenshields', got {flavour!r}")
    rng = _random.Random(f"{seed}-parallel-{flavour}")
    n = rng.randint(1, max_candidates)
    if flavour == "constant":
        d = float(rng.randint(1, 3))
        spanning_cost = round(rng.uniform(5.0, 15.0), 3)
        candidate_costs = tuple(round(rng.uniform(1.0, 12.0), 3) for _ in range(n))
        capacities = [round(rng.uniform(d, d + 10.0), 3) for _ in range(n + 1)]

        def route(i):
            cost = spanning_cost if i == 0 else candidate_costs[i - 1]
            return Constant(cost / 2.0), max(capacities[i], d)

    else:
        d = round(rng.uniform(1.0, 5.0), 3)
        l = round(rng.uniform(0.5, 3.0), 3)
        v_max = round(rng.uniform(0.5, 2.0), 3)
        u = round(rng.uniform(1.2 * d, 3.0 * d), 3)
        half = Greenshields(l / 2.0, v_max, u)

        def route(i):
            return half, u

    trip = Trip(0, 1, d)
    edge_defs = []
    route_pairs = []
    for i in range(n + 1):
        mid = 2 + i
        model, cap = route(i)
        route_pairs.append(((0, mid), (mid, 1)))
        edge_defs += [(0, mid, model, cap), (mid, 1, model, cap)]
    template = TemplateGraph(_network(range(n + 3), edge_defs))
    tem = template.network
    tree = _tree(_path_member(tem, (0, 2, 1)), (trip,))
    candidates = tuple(
        _path_graph(_path_member(tem, (0, 2 + i, 1)), trip, 0, i - 1)
        for i in range(1, n + 1))
    cs = CandidateSet(template=template, spanning_tree=tree,
                      candidates=candidates, declared_class=DOUBLE_PRIME)
    if flavour == "constant":
        return ParallelFamily(candidate_set=cs, flavour=flavour, d=d,
                              spanning_cost=spanning_cost,
                              candidate_costs=candidate_costs)
    return ParallelFamily(candidate_set=cs, flavour=flavour, d=d,
                          l=l, v_max=v_max, u=u)


def materialize(name: str, params: Optional[dict] = None) -> Scenario:
    """Build a named fixture; BadParams/UnknownScenario on misuse."""
    if name not in _BUILDERS:
        raise UnknownScenario(f"unknown scenario {name!r}; known: {', '.join(SCENARIO_NAMES)}")
    return _BUILDERS[name](params)


def scenario_descriptions() -> Tuple[Tuple[str, str], ...]:
    return tuple((name, _BUILDERS[name](None).description) for name in SCENARIO_NAMES)
