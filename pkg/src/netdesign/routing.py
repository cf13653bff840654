"""Routing solvers for a network instance.

Three problems share one path-based machinery: the capacitated
constant-cost program (``mc``) solved exactly as a linear program, and the
congestion-priced system-optimal (``so``) and user-equilibrium (``ue``)
flows computed by Frank-Wolfe with exact line search. Every accepted
solution carries an optimality certificate recomputed from first
principles: equalized marginal costs across used paths for so, equal
used-path travel times for ue, and dual feasibility plus complementary
slackness for mc.

Solvers are deterministic: identical inputs and configuration produce
bit-identical results. Shortest-path and direction-finding ties are broken
toward the lexicographically smallest node sequence.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Dict, Mapping, Optional, Sequence, Tuple

import numpy as np

from .costs import (
    Affine,
    BPR,
    Constant,
    Greenshields,
    Marginalized,
    evaluate,
    is_constant,
    marginal_model,
    max_flow_bound,
)
from .errors import (
    BadParams,
    CapacitySaturation,
    Infeasible,
    NotConverged,
    Unreachable,
)
from .network import (
    DEFAULT_PATH_LIMIT,
    Network,
    Path,
    Trip,
    enumerate_trip_paths,
)
from .simplex import solve_lp

MC = "mc"
SO = "so"
UE = "ue"
ROUTINGS = (MC, SO, UE)

# A path counts as used when it carries more than this fraction of its
# trip's demand; certificates and support detection share the threshold.
USED_FLOW_FRACTION = 1e-6

_CERT_KIND = {
    MC: "mc-dual-feasible",
    SO: "so-marginal-equalized",
    UE: "ue-wardrop",
}


@dataclass(frozen=True)
class Instance:
    """A network, its trips, and (implicitly, on the edges) the cost models."""

    network: Network
    trips: Tuple[Trip, ...]

    def __post_init__(self):
        object.__setattr__(self, "trips", tuple(self.trips))
        for m, trip in enumerate(self.trips):
            if trip.source not in self.network.nodes or trip.sink not in self.network.nodes:
                raise ValueError(f"trip {m} endpoints missing from the network")


@dataclass(frozen=True)
class SolverConfig:
    relative_gap_tol: float = 1e-8
    max_iterations: int = 100_000
    line_search_tol: float = 1e-12
    capacity_margin: float = 1e-9
    path_limit: int = DEFAULT_PATH_LIMIT
    polish: bool = True  # terminal active-set refinement of the FW iterate

    def __post_init__(self):
        if not (self.relative_gap_tol > 0 and self.max_iterations > 0
                and self.line_search_tol > 0 and self.capacity_margin > 0
                and self.path_limit > 0):
            raise ValueError("solver configuration values must be positive")


@dataclass(frozen=True)
class FlowAssignment:
    """Nonnegative path flows plus the edge flows they induce."""

    paths: Tuple[Path, ...]
    flows: Tuple[float, ...]
    edge_flows: Tuple[Tuple[Tuple[int, int], float], ...]  # sorted by edge pair
    trip_totals: Tuple[float, ...]

    def edge_flow_map(self) -> Dict[Tuple[int, int], float]:
        return dict(self.edge_flows)

    def path_flow_map(self) -> Dict[str, float]:
        return {p.key(): f for p, f in zip(self.paths, self.flows)}


@dataclass(frozen=True)
class OptimalityCertificate:
    kind: str
    max_violation: float
    per_trip_spread: Tuple[float, ...]
    tolerance: float
    satisfied: bool


@dataclass(frozen=True)
class MCDuals:
    trip_potentials: Tuple[float, ...]
    edge_prices: Tuple[Tuple[Tuple[int, int], float], ...]  # >= 0, capacity rows


@dataclass(frozen=True)
class SolveResult:
    routing: str
    assignment: FlowAssignment
    total_cost: float
    per_trip_cost: Tuple[float, ...]        # ue: the common cost; mc/so: min used-path cost
    per_trip_used_range: Tuple[Tuple[float, float], ...]
    iterations: int
    relative_gap: float
    certificate: OptimalityCertificate
    duals: Optional[MCDuals] = None


def _num(x: float) -> float:
    # normalises -0.0 so serialised reports are stable
    return 0.0 if x == 0.0 else float(x)


class _PathSpace:
    """Enumerated paths of an instance plus their edge incidence."""

    def __init__(self, instance: Instance, limit: int):
        self.instance = instance
        net = instance.network
        self.path_set = enumerate_trip_paths(net, instance.trips, limit)
        self.paths = self.path_set.all_paths()
        self.trip_slices = []
        start = 0
        for m, group in enumerate(self.path_set.per_trip):
            if not group:
                raise Unreachable(instance.trips[m])
            self.trip_slices.append((start, start + len(group)))
            start += len(group)
        self.edge_pairs = net.edge_pairs
        self.edge_index = {pair: k for k, pair in enumerate(self.edge_pairs)}
        self.incidence = np.zeros((len(self.paths), len(self.edge_pairs)))
        for pi, p in enumerate(self.paths):
            for pair in p.edge_pairs:
                self.incidence[pi, self.edge_index[pair]] = 1.0
        self.demands = np.array([t.demand for t in instance.trips])
        self.models = [net.edge(*pair).cost for pair in self.edge_pairs]
        self.capacities = np.array([net.edge(*pair).capacity for pair in self.edge_pairs])
        self.calc = _EdgeCalculator(self.models)

    def edge_flows(self, x: np.ndarray) -> np.ndarray:
        return self.incidence.T @ x

    def assignment(self, x: np.ndarray) -> FlowAssignment:
        xe = self.edge_flows(x)
        trip_totals = tuple(
            _num(float(np.sum(x[a:b]))) for a, b in self.trip_slices)
        return FlowAssignment(
            paths=self.paths,
            flows=tuple(_num(v) for v in x),
            edge_flows=tuple((pair, _num(float(xe[k])))
                             for k, pair in enumerate(self.edge_pairs)),
            trip_totals=trip_totals,
        )


class _EdgeCalculator:
    """Vectorised value/derivative/integral evaluation over all edges.

    Edges are grouped by model family once; per-call work is a handful of
    numpy expressions, which keeps line searches cheap.
    """

    def __init__(self, models: Sequence):
        n = len(models)
        self.n = n
        self.kind = np.zeros(n, dtype=np.int8)  # 0 const, 1 affine, 2 greenshields, 3 bpr
        self.marg = np.zeros(n, dtype=bool)
        self.p1 = np.zeros(n)
        self.p2 = np.zeros(n)
        self.p3 = np.zeros(n)
        self.p4 = np.zeros(n)
        self.bound = np.full(n, math.inf)
        for k, model in enumerate(models):
            base = model
            if isinstance(model, Marginalized):
                self.marg[k] = True
                base = model.base
            self.bound[k] = max_flow_bound(base)
            if isinstance(base, Constant):
                self.kind[k] = 0
                self.p1[k] = base.c
            elif isinstance(base, Affine):
                self.kind[k] = 1
                self.p1[k] = base.a
                self.p2[k] = base.b
            elif isinstance(base, Greenshields):
                self.kind[k] = 2
                self.p1[k] = base.l
                self.p2[k] = base.v_max
                self.p3[k] = base.u
            elif isinstance(base, BPR):
                self.kind[k] = 3
                self.p1[k] = base.c0
                self.p2[k] = base.u
                self.p3[k] = base.alpha
                self.p4[k] = base.beta
            else:
                raise TypeError(f"unsupported cost model {model!r}")
        self.all_constant = bool(np.all(self.kind == 0) and not np.any(self.marg))

    def _base(self, x, order):
        """Level (order=0), slope (1), curvature (2) or third derivative (3)."""
        out = np.zeros(self.n)
        k = self.kind
        c = k == 0
        a = k == 1
        g = k == 2
        b = k == 3
        if order == 0:
            out[c] = self.p1[c]
            out[a] = self.p1[a] + self.p2[a] * x[a]
            out[g] = self.p1[g] / (self.p2[g] * (1.0 - x[g] / self.p3[g]))
            if np.any(b):
                out[b] = self.p1[b] * (1.0 + self.p3[b] * (x[b] / self.p2[b]) ** self.p4[b])
        elif order == 1:
            out[a] = self.p2[a]
            out[g] = self.p1[g] / (self.p2[g] * self.p3[g]) / (1.0 - x[g] / self.p3[g]) ** 2
            if np.any(b):
                beta = self.p4[b]
                xs = x[b]
                with np.errstate(divide="ignore", invalid="ignore"):
                    val = self.p1[b] * self.p3[b] * beta * xs ** (beta - 1.0) / self.p2[b] ** beta
                val = np.where(xs == 0.0,
                               np.where(beta == 1.0, self.p1[b] * self.p3[b] / self.p2[b], 0.0),
                               val)
                out[b] = val
        elif order == 2:
            out[g] = (2.0 * self.p1[g] / (self.p2[g] * self.p3[g] ** 2)
                      / (1.0 - x[g] / self.p3[g]) ** 3)
            if np.any(b):
                beta = self.p4[b]
                coeff = self.p1[b] * self.p3[b] * beta * (beta - 1.0)
                xs = x[b]
                with np.errstate(divide="ignore", invalid="ignore"):
                    val = coeff * xs ** (beta - 2.0) / self.p2[b] ** beta
                val = np.where(coeff == 0.0, 0.0,
                               np.where(xs == 0.0,
                                        np.where(beta == 2.0, coeff / self.p2[b] ** 2, 0.0),
                                        val))
                out[b] = val
        elif order == 3:
            out[g] = (6.0 * self.p1[g] / (self.p2[g] * self.p3[g] ** 3)
                      / (1.0 - x[g] / self.p3[g]) ** 4)
            if np.any(b):
                beta = self.p4[b]
                coeff = self.p1[b] * self.p3[b] * beta * (beta - 1.0) * (beta - 2.0)
                xs = x[b]
                with np.errstate(divide="ignore", invalid="ignore"):
                    val = coeff * xs ** (beta - 3.0) / self.p2[b] ** beta
                val = np.where((coeff == 0.0) | (xs == 0.0), 0.0, val)
                out[b] = val
        return out

    def value(self, x):
        """Effective edge travel time (marginal of the base where wrapped)."""
        v = self._base(x, 0)
        if np.any(self.marg):
            m = self.marg
            v = np.where(m, v + x * self._base(x, 1), v)
        return v

    def deriv(self, x):
        d = self._base(x, 1)
        if np.any(self.marg):
            m = self.marg
            d = np.where(m, 2.0 * self._base(x, 1) + x * self._base(x, 2), d)
        return d

    def second(self, x):
        s = self._base(x, 2)
        if np.any(self.marg):
            m = self.marg
            s = np.where(m, 3.0 * self._base(x, 2) + x * self._base(x, 3), s)
        return s

    def integral(self, x):
        out = np.zeros(self.n)
        k = self.kind
        c = (k == 0) & ~self.marg
        a = (k == 1) & ~self.marg
        g = (k == 2) & ~self.marg
        b = (k == 3) & ~self.marg
        out[c] = self.p1[c] * x[c]
        out[a] = self.p1[a] * x[a] + 0.5 * self.p2[a] * x[a] ** 2
        out[g] = -(self.p1[g] * self.p3[g] / self.p2[g]) * np.log(1.0 - x[g] / self.p3[g])
        if np.any(b):
            beta = self.p4[b]
            out[b] = self.p1[b] * (x[b] + self.p3[b] * x[b] ** (beta + 1.0)
                                   / ((beta + 1.0) * self.p2[b] ** beta))
        if np.any(self.marg):
            m = self.marg
            out = np.where(m, x * self._base(x, 0), out)
        return out


def _gradient(calc: _EdgeCalculator, xe: np.ndarray, kind: str) -> np.ndarray:
    if kind == UE:
        return calc.value(xe)
    return calc.value(xe) + xe * calc.deriv(xe)  # marginal: d(x c(x))/dx


def _objective(calc: _EdgeCalculator, xe: np.ndarray, kind: str) -> float:
    if kind == UE:
        return float(np.sum(calc.integral(xe)))
    return float(np.sum(xe * calc.value(xe)))


def _curvature(calc: _EdgeCalculator, xe: np.ndarray, kind: str) -> np.ndarray:
    """Second derivative of the objective integrand wrt edge flow."""
    if kind == UE:
        return calc.deriv(xe)
    return 2.0 * calc.deriv(xe) + xe * calc.second(xe)


def total_cost_under(network: Network, edge_flows: Mapping[Tuple[int, int], float]) -> float:
    """System travel time sum(x_e * c_e(x_e)) for the given edge flows."""
    total = 0.0
    for pair, flow in sorted(edge_flows.items()):
        if flow > 0.0:
            total += flow * evaluate(network.edge(*pair).cost, flow)
    return total


# ---------------------------------------------------------------------------
# all-or-nothing assignment


def shortest_path_nodes(net: Network, edge_costs: Mapping[Tuple[int, int], float],
                        source: int, sink: int) -> Optional[Tuple[int, ...]]:
    """Lexicographically smallest minimum-cost simple path, or None.

    Label-setting in both directions marks the edges lying on some shortest
    path; walking that subgraph greedily toward the lowest node id yields a
    deterministic representative among ties.
    """
    dist_from = _dijkstra(net, edge_costs, source, forward=True)
    total = dist_from.get(sink)
    if total is None:
        return None
    dist_to = _dijkstra(net, edge_costs, sink, forward=False)
    tol = 1e-12 * (1.0 + abs(total))
    nodes = [source]
    current = source
    remaining = total
    while current != sink:
        if len(nodes) > len(net.nodes):
            return None  # zero-cost tie cycle; cannot happen with positive costs
        chosen = None
        for nxt in net.successors(current):
            cost = edge_costs[(current, nxt)]
            through = cost + dist_to.get(nxt, math.inf)
            if abs(through - remaining) <= tol:
                chosen = nxt  # successors are sorted: first hit is smallest id
                break
        if chosen is None:
            return None  # numerically inconsistent labels; caller treats as unreachable
        nodes.append(chosen)
        remaining -= edge_costs[(current, chosen)]
        current = chosen
    return tuple(nodes)


def _dijkstra(net: Network, edge_costs, root: int, forward: bool):
    """Distances from (or to) root; expansion order breaks ties on node id."""
    if forward:
        neighbours = lambda u: ((v, edge_costs[(u, v)]) for v in net.successors(u))
    else:
        incoming = {}
        for (i, j) in net.edge_pairs:
            incoming.setdefault(j, []).append(i)
        neighbours = lambda u: ((v, edge_costs[(v, u)]) for v in sorted(incoming.get(u, ())))
    dist = {root: 0.0}
    done = set()
    heap = [(0.0, root)]
    while heap:
        d, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        for v, w in neighbours(u):
            if w < 0:
                raise ValueError(f"negative edge cost {w}")
            nd = d + w
            if nd < dist.get(v, math.inf):
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    return dist


def all_or_nothing(instance: Instance,
                   edge_costs: Mapping[Tuple[int, int], float]) -> FlowAssignment:
    """Each trip's whole demand on its cheapest path under frozen costs."""
    paths = []
    flows = []
    edge_flow = {pair: 0.0 for pair in instance.network.edge_pairs}
    for m, trip in enumerate(instance.trips):
        nodes = shortest_path_nodes(instance.network, edge_costs, trip.source, trip.sink)
        if nodes is None:
            raise Unreachable(trip)
        path = Path(m, nodes)
        paths.append(path)
        flows.append(trip.demand)
        for pair in path.edge_pairs:
            edge_flow[pair] += trip.demand
    return FlowAssignment(
        paths=tuple(paths),
        flows=tuple(flows),
        edge_flows=tuple((pair, _num(edge_flow[pair])) for pair in sorted(edge_flow)),
        trip_totals=tuple(t.demand for t in instance.trips),
    )


# ---------------------------------------------------------------------------
# Frank-Wolfe with exact line search and terminal support polish


def _initial_point(space: _PathSpace, cfg: SolverConfig, kind: str, seed_paths: str):
    calc = space.calc
    zero = np.zeros(len(space.edge_pairs))
    g0 = _gradient(calc, zero, kind)
    cost0 = space.incidence @ g0
    x = np.zeros(len(space.paths))
    for m, (a, b) in enumerate(space.trip_slices):
        if seed_paths == "spread":
            order = np.argsort(cost0[a:b], kind="stable")[:8]
            share = space.demands[m] / len(order)
            for j in order:
                x[a + j] = share
        else:
            x[a + int(np.argmin(cost0[a:b]))] = space.demands[m]
    xe = space.edge_flows(x)
    if np.any(xe >= calc.bound):
        if seed_paths == "aon":
            return _initial_point(space, cfg, kind, "spread")
        raise CapacitySaturation(
            "no interior starting flow: demand saturates a congestion-priced edge")
    return x


def _line_search(space, x, dvec, kind, cfg):
    """Exact minimisation of the objective along x + t*(s - x), t in [0, t_max]."""
    calc = space.calc
    xe = space.edge_flows(x)
    de = space.incidence.T @ dvec
    t_max = 1.0
    rising = de > 0
    if np.any(rising & np.isfinite(calc.bound)):
        margin = calc.bound * (1.0 - cfg.capacity_margin)
        caps = (margin[rising] - xe[rising]) / de[rising]
        t_max = min(1.0, float(np.min(caps[np.isfinite(caps)], initial=1.0)))
        t_max = max(t_max, 0.0)

    def dphi(t):
        return float(de @ _gradient(calc, xe + t * de, kind))

    if dphi(0.0) >= 0.0:
        return None  # no descent: caller falls back to the open-loop step
    if dphi(t_max) <= 0.0:
        return t_max
    lo, hi = 0.0, t_max
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        slope = dphi(mid)
        if slope == 0.0:
            return mid
        if slope > 0.0:
            hi = mid
        else:
            lo = mid
        if hi - lo <= cfg.line_search_tol:
            break
    return 0.5 * (lo + hi)


def _direction_and_gap(space, x, grad_paths):
    s = np.zeros_like(x)
    gap = 0.0
    for m, (a, b) in enumerate(space.trip_slices):
        j = int(np.argmin(grad_paths[a:b]))  # first minimum = lexicographic tie-break
        s[a + j] = space.demands[m]
        gap += float(x[a:b] @ grad_paths[a:b]) - space.demands[m] * float(grad_paths[a + j])
    return s, gap


def _polish(space, x, kind, cfg):
    """Active-set refinement: equalise used-path gradients exactly.

    Newton steps on the stationarity-plus-conservation system restricted to
    the currently used paths. Entirely safeguarded: the caller only accepts
    the refined point when it does not worsen the objective and shrinks the
    optimality gap, so a failed refinement is merely ignored.
    """
    calc = space.calc
    if calc.all_constant:
        return None
    n = len(space.paths)
    support = []
    for m, (a, b) in enumerate(space.trip_slices):
        thresh = 1e-8 * space.demands[m]
        chosen = [a + j for j in range(b - a) if x[a + j] > thresh]
        if not chosen:
            chosen = [a + int(np.argmax(x[a:b]))]
        support.append(chosen)

    max_rounds = 2 * len(space.paths) + 4  # each round drops or adds a path
    for _round in range(max_rounds):
        flat = [j for group in support for j in group]
        trip_of = np.concatenate([
            np.full(len(group), m) for m, group in enumerate(support)])
        k = len(flat)
        m_trips = len(space.trip_slices)
        a_sub = space.incidence[flat]
        xs = np.maximum(x[flat], 0.0)
        # keep conservation exact before iterating
        for m in range(m_trips):
            mask = trip_of == m
            tot = xs[mask].sum()
            if tot > 0:
                xs[mask] *= space.demands[m] / tot
        lam = np.zeros(m_trips)
        ok = False
        forced_drops = []
        for _newton in range(40):
            xe = a_sub.T @ xs
            if np.any(xe >= calc.bound):
                return None
            g = a_sub @ _gradient(calc, xe, kind)
            for m in range(m_trips):
                mask = trip_of == m
                lam[m] = float(np.mean(g[mask]))
            r_g = g - lam[trip_of]
            r_c = np.array([
                xs[trip_of == m].sum() - space.demands[m] for m in range(m_trips)])
            scale = 1.0 + float(np.max(np.abs(lam), initial=0.0))
            if max(np.max(np.abs(r_g), initial=0.0),
                   np.max(np.abs(r_c), initial=0.0)) <= 1e-12 * scale:
                ok = True
                break
            w = _curvature(calc, xe, kind)
            h = (a_sub * w) @ a_sub.T
            kkt = np.zeros((k + m_trips, k + m_trips))
            kkt[:k, :k] = h
            for idx in range(k):
                kkt[idx, k + trip_of[idx]] = -1.0
                kkt[k + trip_of[idx], idx] = 1.0
            rhs = -np.concatenate([r_g, r_c])
            try:
                delta = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
            except np.linalg.LinAlgError:
                return None
            dx = delta[:k]
            # damp: stay nonnegative and strictly inside cost-model domains
            alpha = 1.0
            neg = dx < 0
            if np.any(neg):
                alpha = min(alpha, float(np.min(xs[neg] / -dx[neg])))
            de = a_sub.T @ dx
            up = de > 0
            finite = up & np.isfinite(calc.bound)
            if np.any(finite):
                room = (calc.bound[finite] * (1.0 - cfg.capacity_margin) - xe[finite])
                alpha = min(alpha, 0.999999 * float(np.min(room / de[finite])))
            if alpha <= 1e-14:
                # a support member pinned at zero blocks the step: the
                # equalised solution wants it negative, so retire it
                forced_drops = [flat[i] for i in range(k)
                                if xs[i] <= 1e-12 * space.demands[trip_of[i]] and dx[i] < 0.0]
                break
            xs = xs + alpha * dx
            xs = np.maximum(xs, 0.0)
        zero_drops = [flat[i] for i in range(k)
                      if xs[i] <= 1e-14 * space.demands[trip_of[i]]]
        drops = sorted(set(forced_drops) | (set(zero_drops) if ok else set()))
        if not ok and not drops:
            return None
        if drops:
            new_support = []
            for m, group in enumerate(support):
                kept = [j for j in group if j not in drops]
                if not kept:
                    return None
                new_support.append(kept)
            support = new_support
            continue
        candidate = np.zeros(n)
        for i, j in enumerate(flat):
            candidate[j] = xs[i]
        # bring in any strictly better unused path and re-equalise
        xe = space.edge_flows(candidate)
        gp = space.incidence @ _gradient(calc, xe, kind)
        grew = False
        for m, (a, b) in enumerate(space.trip_slices):
            best = int(np.argmin(gp[a:b])) + a
            if best not in support[m] and gp[best] < lam[m] - 1e-10 * (1.0 + abs(lam[m])):
                support[m] = sorted(support[m] + [best])
                grew = True
        if grew:
            x = candidate
            continue
        return candidate
    return None


def _frank_wolfe(instance: Instance, cfg: SolverConfig, kind: str,
                 seed_paths: str = "aon", trace: Optional[list] = None):
    space = _PathSpace(instance, cfg.path_limit)
    calc = space.calc
    x = _initial_point(space, cfg, kind, seed_paths)
    best_lb = -math.inf
    rel_gap = math.inf
    next_polish = 2
    iterations = 0
    converged = False
    for it in range(1, cfg.max_iterations + 1):
        iterations = it
        xe = space.edge_flows(x)
        grad_paths = space.incidence @ _gradient(calc, xe, kind)
        f = _objective(calc, xe, kind)
        if trace is not None:
            trace.append(f)
        s, gap = _direction_and_gap(space, x, grad_paths)
        best_lb = max(best_lb, f - gap)
        rel_gap = (f - best_lb) / abs(f) if f != 0.0 else 0.0
        if rel_gap <= cfg.relative_gap_tol:
            converged = True
            break
        if cfg.polish and it >= next_polish:
            accepted = False
            refined = _polish(space, x, kind, cfg)
            if refined is not None:
                fe = space.edge_flows(refined)
                f2 = _objective(calc, fe, kind)
                g2 = space.incidence @ _gradient(calc, fe, kind)
                _, gap2 = _direction_and_gap(space, refined, g2)
                # strict gap halving keeps repeated refinements terminating
                if f2 <= f + 1e-11 * (1.0 + abs(f)) and gap2 <= 0.5 * gap:
                    x = refined
                    accepted = True
                    best_lb = max(best_lb, f2 - gap2)
                    rel_gap = (f2 - best_lb) / abs(f2) if f2 != 0.0 else 0.0
                    if rel_gap <= cfg.relative_gap_tol:
                        converged = True
                        break
            if accepted:
                continue
            next_polish = it + 25
        dvec = s - x
        t = _line_search(space, x, dvec, kind, cfg)
        if t is None:
            t = min(2.0 / (it + 2.0), 1.0)
            trial = x + t * dvec
            if _objective(calc, space.edge_flows(trial), kind) > f:
                break  # numerically at the floor; accept the current point
            x = trial
        elif t <= 0.0:
            break
        else:
            x = x + t * dvec
        np.clip(x, 0.0, None, out=x)
    if not converged and rel_gap > cfg.relative_gap_tol:
        raise NotConverged(iterations, rel_gap)
    return space, x, iterations, rel_gap


def _finish_flow_result(space: _PathSpace, x: np.ndarray, kind: str,
                        iterations: int, rel_gap: float) -> SolveResult:
    calc = space.calc
    xe = space.edge_flows(x)
    total = float(np.sum(xe * calc.value(xe)))
    assignment = space.assignment(x)
    certificate = _flow_certificate(space, x, kind)
    path_costs = space.incidence @ calc.value(xe)
    per_trip_cost = []
    per_trip_range = []
    for m, (a, b) in enumerate(space.trip_slices):
        used = np.flatnonzero(x[a:b] > USED_FLOW_FRACTION * space.demands[m]) + a
        costs_used = path_costs[used]
        per_trip_range.append((_num(float(np.min(costs_used))),
                               _num(float(np.max(costs_used)))))
        if kind == UE:
            per_trip_cost.append(_num(float(np.min(path_costs[a:b]))))
        else:
            per_trip_cost.append(_num(float(np.min(costs_used))))
    return SolveResult(
        routing=kind,
        assignment=assignment,
        total_cost=_num(total),
        per_trip_cost=tuple(per_trip_cost),
        per_trip_used_range=tuple(per_trip_range),
        iterations=iterations,
        relative_gap=_num(rel_gap),
        certificate=certificate,
    )


def _flow_certificate(space: _PathSpace, x: np.ndarray, kind: str) -> OptimalityCertificate:
    calc = space.calc
    xe = space.edge_flows(x)
    values = space.incidence @ _gradient(calc, xe, kind) if kind == SO \
        else space.incidence @ calc.value(xe)
    worst = 0.0
    spreads = []
    tol = 0.0
    for m, (a, b) in enumerate(space.trip_slices):
        used = np.flatnonzero(x[a:b] > USED_FLOW_FRACTION * space.demands[m]) + a
        v_used_max = float(np.max(values[used]))
        v_min = float(np.min(values[a:b]))
        spread = max(0.0, v_used_max - v_min)
        spreads.append(_num(spread))
        trip_tol = 1e-6 * (1.0 + abs(v_min))
        tol = max(tol, trip_tol)
        worst = max(worst, spread - trip_tol)
    max_violation = max(0.0, *(s for s in spreads)) if spreads else 0.0
    return OptimalityCertificate(
        kind=_CERT_KIND[kind],
        max_violation=_num(max_violation),
        per_trip_spread=tuple(spreads),
        tolerance=_num(tol),
        satisfied=worst <= 0.0,
    )


def solve_so(instance: Instance, cfg: SolverConfig = SolverConfig()) -> SolveResult:
    """Minimise total system travel time sum(x_e * c_e(x_e))."""
    space, x, iterations, rel_gap = _frank_wolfe(instance, cfg, SO)
    return _finish_flow_result(space, x, SO, iterations, rel_gap)


def solve_ue(instance: Instance, cfg: SolverConfig = SolverConfig(),
             _seed_paths: str = "aon") -> SolveResult:
    """Equilibrium flows: minimise the summed edge cost integrals.

    ``_seed_paths`` is a testing hook ("aon" or "spread") selecting the
    starting assignment; equilibria from either seed agree on total cost.
    """
    space, x, iterations, rel_gap = _frank_wolfe(instance, cfg, UE, _seed_paths)
    return _finish_flow_result(space, x, UE, iterations, rel_gap)


# ---------------------------------------------------------------------------
# constant-cost capacitated program


def solve_mc(instance: Instance, limit: int = DEFAULT_PATH_LIMIT) -> SolveResult:
    """Exact minimum-cost routing with hard edge capacities.

    Requires constant edge costs; solved as a path-formulation linear
    program over the full simple-path enumeration.
    """
    net = instance.network
    for pair in net.edge_pairs:
        if not is_constant(net.edge(*pair).cost):
            raise BadParams("mc routing requires constant edge costs")
    try:
        space = _PathSpace(instance, limit)
    except Unreachable as exc:
        raise Infeasible(str(exc)) from exc
    path_costs = space.incidence @ space.calc.value(np.zeros(len(space.edge_pairs)))
    n_paths = len(space.paths)
    a_eq = np.zeros((len(instance.trips), n_paths))
    for m, (a, b) in enumerate(space.trip_slices):
        a_eq[m, a:b] = 1.0
    cap_rows = [k for k, cap in enumerate(space.capacities) if math.isfinite(cap)]
    a_ub = space.incidence.T[cap_rows] if cap_rows else None
    b_ub = space.capacities[cap_rows] if cap_rows else None
    lp = solve_lp(path_costs, a_eq, space.demands, a_ub, b_ub)
    x = np.maximum(lp.x, 0.0)
    duals = MCDuals(
        trip_potentials=tuple(_num(v) for v in lp.duals_eq),
        edge_prices=tuple(
            (space.edge_pairs[k], _num(max(0.0, -lp.duals_ub[i])))
            for i, k in enumerate(cap_rows)),
    )
    assignment = space.assignment(x)
    certificate = _mc_certificate(space, x, path_costs, duals)
    per_trip_cost = []
    per_trip_range = []
    for m, (a, b) in enumerate(space.trip_slices):
        used = np.flatnonzero(x[a:b] > USED_FLOW_FRACTION * space.demands[m]) + a
        used_costs = path_costs[used]
        per_trip_cost.append(_num(float(np.min(used_costs))))
        per_trip_range.append((_num(float(np.min(used_costs))),
                               _num(float(np.max(used_costs)))))
    return SolveResult(
        routing=MC,
        assignment=assignment,
        total_cost=_num(float(path_costs @ x)),
        per_trip_cost=tuple(per_trip_cost),
        per_trip_used_range=tuple(per_trip_range),
        iterations=lp.iterations,
        relative_gap=0.0,
        certificate=certificate,
        duals=duals,
    )


def _mc_certificate(space: _PathSpace, x: np.ndarray, path_costs: np.ndarray,
                    duals: MCDuals) -> OptimalityCertificate:
    price = dict(duals.edge_prices)
    worst = 0.0
    spreads = []
    for m, (a, b) in enumerate(space.trip_slices):
        pi = duals.trip_potentials[m]
        trip_worst = 0.0
        for j in range(a, b):
            reduced = path_costs[j] - pi + sum(
                price.get(pair, 0.0) for pair in space.paths[j].edge_pairs)
            trip_worst = max(trip_worst, -reduced)  # dual feasibility
            if x[j] > USED_FLOW_FRACTION * space.demands[m]:
                trip_worst = max(trip_worst, abs(reduced))  # complementary slackness
        spreads.append(_num(trip_worst))
        worst = max(worst, trip_worst)
    # capacity complementary slackness
    xe = space.edge_flows(x)
    for k, pair in enumerate(space.edge_pairs):
        mu = price.get(pair, 0.0)
        if mu > 0.0:
            worst = max(worst, mu * max(0.0, space.capacities[k] - xe[k]))
    scale = 1.0 + float(abs(path_costs @ x))
    tol = 1e-7 * scale
    return OptimalityCertificate(
        kind=_CERT_KIND[MC],
        max_violation=_num(worst),
        per_trip_spread=tuple(spreads),
        tolerance=_num(tol),
        satisfied=worst <= tol,
    )


# ---------------------------------------------------------------------------
# certificates, bridge, price of anarchy


def verify_certificate(instance: Instance, result: SolveResult,
                       kind: Optional[str] = None,
                       limit: int = DEFAULT_PATH_LIMIT) -> OptimalityCertificate:
    """Recompute a result's optimality certificate from its assignment.

    Never raises on a suboptimal assignment; the certificate simply reports
    the violation it finds.
    """
    kind = kind or result.routing
    space = _PathSpace(instance, limit)
    index = {p.nodes: i for i, p in enumerate(space.paths)}
    x = np.zeros(len(space.paths))
    for p, f in zip(result.assignment.paths, result.assignment.flows):
        x[index[p.nodes]] = f
    if kind == MC:
        path_costs = space.incidence @ space.calc.value(np.zeros(len(space.edge_pairs)))
        duals = result.duals or MCDuals(
            trip_potentials=tuple(0.0 for _ in instance.trips), edge_prices=())
        return _mc_certificate(space, x, path_costs, duals)
    return _flow_certificate(space, x, kind)


@dataclass(frozen=True)
class BridgeComparison:
    """System-optimal flows versus equilibrium flows on marginal costs."""

    so_result: SolveResult
    marginal_ue_result: SolveResult
    so_total: float
    marginal_ue_total: float  # evaluated under the original cost models

    @property
    def difference(self) -> float:
        return abs(self.so_total - self.marginal_ue_total)


def so_ue_bridge(instance: Instance, cfg: SolverConfig = SolverConfig()) -> BridgeComparison:
    """Solve so directly and as an equilibrium on marginal-cost models.

    Both flow patterns are priced under the original cost models; the two
    totals agree whenever both solves reached their tolerance.
    """
    so_result = solve_so(instance, cfg)
    net = instance.network
    marg_net = Network(
        net.nodes,
        [type(e)(e.tail, e.head, marginal_model(e.cost), e.capacity) for e in net.edges],
    )
    marg_instance = Instance(marg_net, instance.trips)
    ue_star = solve_ue(marg_instance, cfg)
    ue_star_total = total_cost_under(net, ue_star.assignment.edge_flow_map())
    return BridgeComparison(
        so_result=so_result,
        marginal_ue_result=ue_star,
        so_total=so_result.total_cost,
        marginal_ue_total=_num(ue_star_total),
    )


def price_of_anarchy(instance: Instance, cfg: SolverConfig = SolverConfig()) -> float:
    """Ratio of equilibrium to system-optimal total travel time (>= 1)."""
    ue = solve_ue(instance, cfg)
    so = solve_so(instance, cfg)
    return ue.total_cost / so.total_cost
