import dataclasses
import math

import pytest

from netdesign.costs import Constant, Greenshields
from netdesign.errors import (
    BadParams,
    CapacitySaturation,
    Infeasible,
    NotConverged,
    PathLimitExceeded,
    Unreachable,
)
from netdesign.network import Edge, Network, Trip
from netdesign.routing import (
    FlowAssignment,
    Instance,
    SolverConfig,
    all_or_nothing,
    price_of_anarchy,
    shortest_path_nodes,
    so_ue_bridge,
    solve_mc,
    solve_so,
    solve_ue,
    total_cost_under,
    verify_certificate,
    _frank_wolfe,
)
from oracles import assert_assignment_feasible, mc_grid_oracle

C1 = Constant(1.0)


def net_of(defs):
    nodes = {n for i, j, *_ in defs for n in (i, j)}
    return Network(nodes, [Edge(i, j, cost, cap) for i, j, cost, cap in defs])


# -- classic fixtures -----------------------------------------------------------


def test_braess_ue_without_edge(braess_without):
    r = solve_ue(braess_without.instance)
    assert r.total_cost == pytest.approx(498.0, abs=1e-6)
    assert r.per_trip_cost[0] == pytest.approx(83.0, abs=1e-6)
    assert_assignment_feasible(braess_without.instance, r)


def test_braess_ue_with_edge(braess_with):
    r = solve_ue(braess_with.instance)
    assert r.total_cost == pytest.approx(552.0, abs=1e-6)
    assert r.per_trip_cost[0] == pytest.approx(92.0, abs=1e-6)
    flows = r.assignment.path_flow_map()
    assert flows["0-1-2-3"] == pytest.approx(2.0, abs=1e-6)
    assert flows["0-1-3"] == pytest.approx(2.0, abs=1e-6)
    assert flows["0-2-3"] == pytest.approx(2.0, abs=1e-6)


def test_braess_so_ignores_shortcut(braess_with, braess_without):
    with_edge = solve_so(braess_with.instance)
    without = solve_so(braess_without.instance)
    assert with_edge.total_cost == pytest.approx(498.0, abs=1e-6)
    assert without.total_cost == pytest.approx(498.0, abs=1e-6)


def test_pigou_values(pigou):
    ue = solve_ue(pigou.instance)
    assert ue.assignment.path_flow_map() == {"0-1-3": 0.0, "0-2-3": 1.0}
    assert ue.total_cost == pytest.approx(1.0)
    so = solve_so(pigou.instance)
    flows = so.assignment.path_flow_map()
    assert flows["0-1-3"] == pytest.approx(0.5, abs=1e-9)
    assert flows["0-2-3"] == pytest.approx(0.5, abs=1e-9)
    assert so.total_cost == pytest.approx(0.75, abs=1e-12)


# -- mc -------------------------------------------------------------------------


def test_mc_counterexample_ladder(counterexample_mc):
    cs = counterexample_mc.candidate_set
    expected = {(): 9.0, (0,): 9.0, (1,): 7.0, (0, 1): 5.0}
    for subset, value in expected.items():
        instance = Instance(cs.subset_network(subset), cs.trips)
        r = solve_mc(instance)
        assert r.total_cost == pytest.approx(value, abs=1e-9)
        assert r.certificate.satisfied
        assert_assignment_feasible(instance, r, check_capacity=True)


def test_mc_single_edge():
    instance = Instance(net_of([(0, 1, Constant(4.0), 3.0)]), (Trip(0, 1, 2.0),))
    r = solve_mc(instance)
    assert r.total_cost == pytest.approx(8.0)


def test_mc_capacity_forces_split():
    # cheap route capped below demand; remainder takes the expensive one
    instance = Instance(net_of([
        (0, 1, Constant(1.0), 1.0), (1, 3, Constant(1.0), 1.0),
        (0, 2, Constant(3.0), 10.0), (2, 3, Constant(3.0), 10.0),
    ]), (Trip(0, 3, 2.0),))
    r = solve_mc(instance)
    assert r.total_cost == pytest.approx(1.0 * 2 + 1.0 * 6)
    flows = r.assignment.path_flow_map()
    assert flows["0-1-3"] == pytest.approx(1.0)
    assert flows["0-2-3"] == pytest.approx(1.0)


def test_mc_infeasible():
    instance = Instance(net_of([(0, 1, Constant(1.0), 1.0)]), (Trip(0, 1, 2.0),))
    with pytest.raises(Infeasible):
        solve_mc(instance)


def test_mc_rejects_flow_dependent_costs(pigou):
    with pytest.raises(BadParams):
        solve_mc(pigou.instance)


def test_mc_unreachable_is_infeasible():
    net = Network({0, 1, 2}, [Edge(0, 1, C1, 5.0)])
    with pytest.raises(Infeasible):
        solve_mc(Instance(net, (Trip(0, 2, 1.0),)))


def test_mc_matches_grid_oracle_corpus():
    corpus = [
        Instance(net_of([(0, 1, Constant(4.0), 3.0)]), (Trip(0, 1, 2.0),)),
        Instance(net_of([
            (0, 1, Constant(1.0), 1.0), (1, 3, Constant(1.0), 1.0),
            (0, 2, Constant(3.0), 10.0), (2, 3, Constant(3.0), 10.0),
        ]), (Trip(0, 3, 2.0),)),
        # three parallel routes, middle capacity binding at 0.5
        Instance(net_of([
            (0, 2, Constant(1.0), 0.5), (2, 1, Constant(1.0), 0.5),
            (0, 3, Constant(2.0), 5.0), (3, 1, Constant(2.0), 5.0),
            (0, 4, Constant(4.0), 5.0), (4, 1, Constant(4.0), 5.0),
        ]), (Trip(0, 1, 2.0),)),
        # two trips sharing one capacitated middle edge
        Instance(net_of([
            (0, 2, Constant(1.0), 10.0), (2, 3, Constant(1.0), 1.0),
            (3, 1, Constant(1.0), 10.0), (0, 3, Constant(5.0), 10.0),
            (2, 1, Constant(5.0), 10.0),
            (4, 2, Constant(1.0), 10.0), (3, 5, Constant(1.0), 10.0),
            (4, 5, Constant(9.0), 10.0),
        ]), (Trip(0, 1, 1.0), Trip(4, 5, 1.0))),
    ]
    for instance in corpus:
        r = solve_mc(instance)
        oracle, step_bound = mc_grid_oracle(instance)
        assert r.total_cost <= oracle + 1e-9
        assert oracle - r.total_cost <= step_bound + 1e-9


# -- all-or-nothing --------------------------------------------------------------


def test_aon_counterexample_frozen_costs(counterexample_gs):
    instance = counterexample_gs.instance
    frozen = {}
    tree_pairs = {(1, 2), (2, 3), (3, 4)}
    for pair in instance.network.edge_pairs:
        frozen[pair] = 3.0 if pair in tree_pairs else 1.0
    aon = all_or_nothing(instance, frozen)
    assert aon.paths[0].key() == "1-9-10-11-12-4"
    assert aon.flows[0] == 5.0


def test_aon_single_path():
    instance = Instance(net_of([(0, 1, C1, 5.0), (1, 2, C1, 5.0)]), (Trip(0, 2, 3.0),))
    aon = all_or_nothing(instance, {(0, 1): 1.0, (1, 2): 1.0})
    assert aon.paths[0].nodes == (0, 1, 2)
    assert aon.trip_totals == (3.0,)


def test_aon_tie_break_lexicographic():
    # two equal-cost routes; the smaller middle node wins
    instance = Instance(net_of([
        (0, 1, C1, 5.0), (1, 3, C1, 5.0),
        (0, 2, C1, 5.0), (2, 3, C1, 5.0),
    ]), (Trip(0, 3, 1.0),))
    costs = {pair: 1.0 for pair in instance.network.edge_pairs}
    aon = all_or_nothing(instance, costs)
    assert aon.paths[0].nodes == (0, 1, 3)


def test_aon_unreachable():
    net = Network({0, 1, 2}, [Edge(0, 1, C1, 5.0)])
    with pytest.raises(Unreachable):
        all_or_nothing(Instance(net, (Trip(0, 2, 1.0),)), {(0, 1): 1.0})


def test_shortest_path_prefers_cheaper():
    net = net_of([(0, 1, C1, 5.0), (1, 3, C1, 5.0), (0, 2, C1, 5.0), (2, 3, C1, 5.0)])
    nodes = shortest_path_nodes(net, {(0, 1): 5.0, (1, 3): 5.0,
                                      (0, 2): 1.0, (2, 3): 1.0}, 0, 3)
    assert nodes == (0, 2, 3)


# -- certificates -----------------------------------------------------------------


def test_pigou_ue_certificate(pigou):
    r = solve_ue(pigou.instance)
    cert = verify_certificate(pigou.instance, r)
    assert cert.kind == "ue-wardrop"
    assert cert.satisfied
    assert cert.per_trip_spread[0] == pytest.approx(0.0, abs=1e-12)


def test_braess_ue_certificate_all_paths_92(braess_with):
    r = solve_ue(braess_with.instance)
    xe = r.assignment.edge_flow_map()
    for path in r.assignment.paths:
        cost = sum(
            braess_with.instance.network.edge(*pair).cost.a
            + braess_with.instance.network.edge(*pair).cost.b * xe[pair]
            for pair in path.edge_pairs)
        assert cost == pytest.approx(92.0, abs=1e-4)


def test_perturbed_assignment_reports_violation(braess_with):
    r = solve_ue(braess_with.instance)
    order = {p.key(): i for i, p in enumerate(r.assignment.paths)}
    flows = list(r.assignment.flows)
    flows[order["0-1-3"]] += 0.1
    flows[order["0-2-3"]] -= 0.1
    edge_flow = {pair: 0.0 for pair in braess_with.instance.network.edge_pairs}
    for p, f in zip(r.assignment.paths, flows):
        for pair in p.edge_pairs:
            edge_flow[pair] += f
    perturbed = dataclasses.replace(
        r,
        assignment=FlowAssignment(
            paths=r.assignment.paths,
            flows=tuple(flows),
            edge_flows=tuple(sorted(edge_flow.items())),
            trip_totals=r.assignment.trip_totals,
        ),
    )
    cert = verify_certificate(braess_with.instance, perturbed)
    assert not cert.satisfied
    assert cert.max_violation > 1e-3


def test_so_certificate_on_counterexample(counterexample_gs):
    r = solve_so(counterexample_gs.instance)
    cert = verify_certificate(counterexample_gs.instance, r)
    assert cert.kind == "so-marginal-equalized"
    assert cert.satisfied


# -- bridge and price of anarchy ---------------------------------------------------


def test_bridge_pigou(pigou):
    bridge = so_ue_bridge(pigou.instance)
    assert bridge.so_total == pytest.approx(0.75, abs=1e-9)
    assert bridge.marginal_ue_total == pytest.approx(0.75, abs=1e-6)
    assert bridge.difference <= 1e-6


def test_bridge_counterexample(counterexample_gs):
    bridge = so_ue_bridge(counterexample_gs.instance)
    assert bridge.difference <= 1e-4 * (1.0 + bridge.so_total)


def test_multi_trip_shared_congestion():
    # two trips crossing through one congested middle corridor
    g = Greenshields(1.0, 1.0, 20.0)
    defs = [
        (0, 4, g, 20.0), (4, 5, g, 20.0), (5, 1, g, 20.0),   # trip 0 via corridor
        (0, 6, g, 20.0), (6, 1, g, 20.0),                     # trip 0 bypass
        (2, 4, g, 20.0), (5, 3, g, 20.0),                     # trip 1 via corridor
        (2, 7, g, 20.0), (7, 3, g, 20.0),                     # trip 1 bypass
    ]
    instance = Instance(net_of(defs), (Trip(0, 1, 6.0), Trip(2, 3, 8.0)))
    for solver in (solve_so, solve_ue):
        r = solver(instance)
        assert_assignment_feasible(instance, r)
        cert = verify_certificate(instance, r)
        assert cert.satisfied, cert
        assert len(cert.per_trip_spread) == 2
    ue = solve_ue(instance)
    recomposed = sum(t.demand * c for t, c in zip(instance.trips, ue.per_trip_cost))
    assert ue.total_cost == pytest.approx(recomposed, rel=1e-8)
    bridge = so_ue_bridge(instance)
    assert bridge.difference <= 1e-4 * (1.0 + bridge.so_total)


def test_extreme_demand_scales():
    for demand in (1e-3, 1.0, 1e3):
        u = 4.0 * demand
        g = Greenshields(1.0, 1.0, u)
        defs = [
            (0, 1, g, u), (1, 3, g, u),
            (0, 2, g, u), (2, 3, g, u),
        ]
        instance = Instance(net_of(defs), (Trip(0, 3, demand),))
        r = solve_ue(instance)
        assert verify_certificate(instance, r).satisfied
        # symmetric routes split evenly
        flows = r.assignment.path_flow_map()
        assert flows["0-1-3"] == pytest.approx(demand / 2, rel=1e-9)


def test_bpr_instance_full_stack():
    from netdesign.costs import BPR

    half = BPR(1.5, 8.0, 0.6, 4.0)
    slow = BPR(3.0, 8.0, 0.3, 2.0)
    defs = [
        (0, 1, half, math.inf), (1, 3, half, math.inf),
        (0, 2, slow, math.inf), (2, 3, slow, math.inf),
    ]
    instance = Instance(net_of(defs), (Trip(0, 3, 6.0),))
    so = solve_so(instance)
    ue = solve_ue(instance)
    assert verify_certificate(instance, so).satisfied
    assert verify_certificate(instance, ue).satisfied
    assert so.total_cost <= ue.total_cost + 1e-9
    bridge = so_ue_bridge(instance)
    assert bridge.difference <= 1e-4 * (1.0 + bridge.so_total)


def test_constant_costs_collapse_to_mc():
    # ample capacity: mc, so and ue all route everything over the cheap path
    defs = [
        (0, 1, Constant(1.0), 50.0), (1, 3, Constant(1.0), 50.0),
        (0, 2, Constant(3.0), 50.0), (2, 3, Constant(3.0), 50.0),
    ]
    instance = Instance(net_of(defs), (Trip(0, 3, 2.0),))
    mc = solve_mc(instance)
    so = solve_so(instance)
    ue = solve_ue(instance)
    assert mc.total_cost == pytest.approx(4.0)
    assert so.total_cost == pytest.approx(4.0)
    assert ue.total_cost == pytest.approx(4.0)
    bridge = so_ue_bridge(instance)  # marginal costs degenerate to the costs
    assert bridge.marginal_ue_total == pytest.approx(mc.total_cost)


def test_price_of_anarchy_values(pigou, braess_with):
    assert price_of_anarchy(pigou.instance) == pytest.approx(4.0 / 3.0, abs=1e-6)
    assert price_of_anarchy(braess_with.instance) == pytest.approx(552.0 / 498.0, abs=1e-6)
    single = Instance(net_of([(0, 1, Greenshields(1.0, 1.0, 10.0), 10.0)]),
                      (Trip(0, 1, 5.0),))
    assert price_of_anarchy(single) == pytest.approx(1.0, abs=1e-9)


# -- equilibrium structure ----------------------------------------------------------


def test_ue_total_equals_demand_times_common_cost(counterexample_gs, braess_with):
    for scenario in (counterexample_gs, braess_with):
        r = solve_ue(scenario.instance)
        recomposed = sum(
            t.demand * c for t, c in zip(scenario.instance.trips, r.per_trip_cost))
        assert r.total_cost == pytest.approx(recomposed, rel=1e-8)


def test_ue_value_unique_across_seeds(counterexample_gs, braess_with):
    for scenario in (counterexample_gs, braess_with):
        a = solve_ue(scenario.instance, _seed_paths="aon")
        b = solve_ue(scenario.instance, _seed_paths="spread")
        assert a.total_cost == pytest.approx(b.total_cost, rel=1e-6)


def test_total_cost_matches_recomputation(counterexample_gs):
    r = solve_so(counterexample_gs.instance)
    recomputed = total_cost_under(
        counterexample_gs.instance.network, r.assignment.edge_flow_map())
    assert r.total_cost == pytest.approx(recomputed, rel=1e-10)


def test_frank_wolfe_objective_monotone(counterexample_gs):
    cfg = SolverConfig(polish=False, relative_gap_tol=1e-6)
    trace = []
    _frank_wolfe(counterexample_gs.instance, cfg, "so", trace=trace)
    assert len(trace) >= 2
    for a, b in zip(trace, trace[1:]):
        assert b <= a + 1e-9 * (1.0 + abs(a))


def test_so_under_capacity_margin_stays_interior(counterexample_gs):
    r = solve_so(counterexample_gs.instance)
    for (pair, flow) in r.assignment.edge_flows:
        cap = counterexample_gs.instance.network.edge(*pair).capacity
        assert flow < cap


# -- failure modes --------------------------------------------------------------------


def test_not_converged():
    scenario_cfg = SolverConfig(max_iterations=1, polish=False, relative_gap_tol=1e-12)
    defs = [
        (0, 1, Greenshields(1.0, 1.0, 10.0), 10.0), (1, 3, Greenshields(1.0, 1.0, 10.0), 10.0),
        (0, 2, Greenshields(2.0, 1.0, 10.0), 10.0), (2, 3, Greenshields(2.0, 1.0, 10.0), 10.0),
    ]
    instance = Instance(net_of(defs), (Trip(0, 3, 5.0),))
    with pytest.raises(NotConverged):
        solve_so(instance, scenario_cfg)


def test_capacity_saturation():
    defs = [(0, 1, Greenshields(1.0, 1.0, 1.0), 1.0), (1, 2, Greenshields(1.0, 1.0, 1.0), 1.0)]
    instance = Instance(net_of(defs), (Trip(0, 2, 2.0),))
    with pytest.raises(CapacitySaturation):
        solve_ue(instance)


def test_path_limit_propagates():
    from netdesign.network import build_grid_template

    net = build_grid_template(3, 3, Greenshields(1.0, 1.0, 100.0), 100.0).network
    instance = Instance(net, (Trip(0, 8, 1.0),))
    with pytest.raises(PathLimitExceeded):
        solve_ue(instance, SolverConfig(path_limit=3))


def test_ue_unreachable():
    net = Network({0, 1, 2}, [Edge(0, 1, Greenshields(1.0, 1.0, 10.0), 10.0)])
    with pytest.raises(Unreachable):
        solve_ue(Instance(net, (Trip(0, 2, 1.0),)))


def test_solver_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(relative_gap_tol=0.0)
    with pytest.raises(ValueError):
        SolverConfig(max_iterations=0)
    with pytest.raises(ValueError):
        SolverConfig(path_limit=-5)


def test_instance_validates_endpoints():
    net = net_of([(0, 1, C1, 5.0)])
    with pytest.raises(ValueError):
        Instance(net, (Trip(0, 9, 1.0),))
