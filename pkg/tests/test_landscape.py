import numpy as np
import pytest

from branchquant.landscape import (
    compute_landscape,
    cost_identity_check,
    distance_lower_bound_violations,
    holder_estimate,
    holder_exponent,
    marginal_cost,
)
from branchquant.measures import DiscreteMeasure, dirac
from branchquant.network import (
    KIND_SINK,
    KIND_SOURCE,
    Topology,
    TransportNetwork,
    edge_flows,
)
from branchquant.solver import SolverConfig, solve_bot

from conftest import random_instance


def chain_network(alpha=0.9):
    kinds = (KIND_SOURCE, KIND_SINK, KIND_SINK, KIND_SINK)
    topo = Topology(kinds, ((0, 1), (1, 2), (2, 3)))
    pos = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [3.0, 0.0]])
    flows = edge_flows(topo, {1: 1 / 3, 2: 1 / 3, 3: 1 / 3})
    return TransportNetwork(topo, pos, flows, alpha)


def test_chain_landscape_hand_values():
    a = 0.9
    net = chain_network(a)
    field = compute_landscape(net)
    z1 = 1.0 ** (a - 1)
    z2 = z1 + (2 / 3) ** (a - 1)
    z3 = z2 + (1 / 3) ** (a - 1)
    assert field.z(0) == 0.0
    assert field.z(1) == pytest.approx(z1, rel=1e-12)
    assert field.z(2) == pytest.approx(z2, rel=1e-12)
    assert field.z(3) == pytest.approx(z3, rel=1e-12)


def test_cost_identity_on_chain():
    net = chain_network(0.8)
    field = compute_landscape(net)
    assert cost_identity_check(net, field) <= 1e-12


def test_cost_identity_on_solved_networks():
    for i in range(5):
        src, snk = random_instance(6000 + i, n_sinks=4)
        net = solve_bot(src, snk, 0.75, SolverConfig(multistarts=2))
        field = compute_landscape(net)
        assert cost_identity_check(net, field) <= 1e-9 * net.cost


def test_distance_lower_bound():
    # z is built from flow^(alpha-1) >= 1 factors for subunit flows, so it
    # dominates the straight-line distance to the source
    for i in range(5):
        src, snk = random_instance(7000 + i, n_sinks=5)
        net = solve_bot(src, snk, 0.8, SolverConfig(multistarts=2))
        field = compute_landscape(net)
        assert distance_lower_bound_violations(net, field) == 0


def test_landscape_multi_component():
    topo = Topology(
        (KIND_SOURCE, KIND_SINK, KIND_SOURCE, KIND_SINK),
        ((0, 1), (2, 3)),
    )
    pos = np.array([[0.0, 0.0], [1.0, 0.0], [5.0, 0.0], [7.0, 0.0]])
    flows = edge_flows(topo, {1: 0.5, 3: 0.5})
    net = TransportNetwork(topo, pos, flows, 0.9)
    field = compute_landscape(net)
    assert field.component_of[1] == 0
    assert field.component_of[3] == 2
    assert field.z(3) == pytest.approx(0.5 ** (-0.1) * 2.0, rel=1e-12)


def test_marginal_cost_formula():
    net = chain_network(0.8)
    field = compute_landscape(net)
    m = 0.3
    point = [1.0, 0.7]
    got = marginal_cost(field, 1, point, m)
    expected = 0.8 * field.z(1) * m + m**0.8 * 0.7
    assert got == pytest.approx(expected, rel=1e-12)


def test_marginal_cost_bounds_actual_increase():
    # attaching a small extra sink never costs more than the surrogate
    a = 0.8
    src = dirac([0.0, 0.0])
    snk = DiscreteMeasure([[1.0, 0.0], [2.0, 0.0]], [0.5, 0.5])
    net = solve_bot(src, snk, a, SolverConfig(multistarts=2))
    field = compute_landscape(net)
    m = 0.05
    extra = np.array([2.0, 0.5])
    snk2 = DiscreteMeasure([[1.0, 0.0], [2.0, 0.0], [2.0, 0.5]],
                           [0.5, 0.5, m])
    net2 = solve_bot(dirac([0.0, 0.0], 1.0 + m), snk2, a,
                     SolverConfig(multistarts=2))
    surrogate = min(
        marginal_cost(field, u, extra, m)
        for u in range(net.topology.n_nodes)
    )
    assert net2.cost <= net.cost + surrogate + 1e-9


def test_holder_exponent_values():
    assert holder_exponent(1.0, 2) == pytest.approx(1.0)
    assert holder_exponent(0.85, 2) == pytest.approx(0.7)
    assert holder_exponent(0.5, 1) == pytest.approx(0.5)


def test_holder_estimate_linear_field():
    pts = np.linspace(0.0, 1.0, 11).reshape(-1, 1)
    z = pts[:, 0].copy()
    c, pairs = holder_estimate(pts, z, beta=1.0)
    assert c == pytest.approx(1.0, rel=1e-12)
    assert pairs == 55


def test_holder_estimate_edge_cases():
    assert holder_estimate(np.zeros((1, 2)), [0.0], 0.7) == (0.0, 0)
    with pytest.raises(ValueError, match="beta"):
        holder_estimate(np.zeros((3, 2)), [0.0, 1.0, 2.0], 1.5)


def test_holder_estimate_sampled_pairs_deterministic():
    rng = np.random.default_rng(0)
    pts = rng.uniform(0, 1, (300, 2))
    z = rng.uniform(0, 1, 300)
    a = holder_estimate(pts, z, 0.7, pair_cap=1000, seed=4)
    b = holder_estimate(pts, z, 0.7, pair_cap=1000, seed=4)
    assert a == b
