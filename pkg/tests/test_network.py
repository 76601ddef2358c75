import json

import numpy as np
import pytest

from branchquant.network import (
    KIND_SINK,
    KIND_SOURCE,
    KIND_STEINER,
    Topology,
    TransportNetwork,
    alpha_mass,
    edge_flows,
    network_from_tree,
)


def chain_network(alpha=0.9):
    """Source at 0 feeding sinks at x = 1, 2, 3 with mass 1/3 each."""
    kinds = (KIND_SOURCE, KIND_SINK, KIND_SINK, KIND_SINK)
    edges = ((0, 1), (1, 2), (2, 3))
    topo = Topology(kinds, edges)
    pos = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [3.0, 0.0]])
    flows = edge_flows(topo, {1: 1 / 3, 2: 1 / 3, 3: 1 / 3})
    return TransportNetwork(topo, pos, flows, alpha)


def test_topology_roles():
    topo = Topology(
        (KIND_SOURCE, KIND_SINK, KIND_SINK, KIND_STEINER),
        ((0, 3), (3, 1), (3, 2)),
    )
    assert topo.sources == (0,)
    assert topo.sinks == (1, 2)
    assert topo.steiner_nodes == (3,)
    assert topo.steiner_degrees_ok()


def test_topology_rejects_cycle():
    with pytest.raises(ValueError, match="not a forest"):
        Topology((KIND_SOURCE, KIND_SINK, KIND_SINK),
                 ((0, 1), (1, 2), (2, 0)))


def test_topology_rejects_two_sources_in_component():
    with pytest.raises(ValueError, match="more than one source"):
        Topology((KIND_SOURCE, KIND_SOURCE, KIND_SINK), ((0, 1), (1, 2)))


def test_topology_rejects_unreachable_node():
    with pytest.raises(ValueError, match="reachable"):
        Topology((KIND_SOURCE, KIND_SINK, KIND_SINK), ((0, 1),))


def test_topology_rejects_bad_edge_and_kind():
    with pytest.raises(ValueError, match="bad edge"):
        Topology((KIND_SOURCE, KIND_SINK), ((0, 5),))
    with pytest.raises(ValueError, match="unknown node kind"):
        Topology(("source", "leaf"), ((0, 1),))


def test_topology_forest_two_components():
    topo = Topology(
        (KIND_SOURCE, KIND_SINK, KIND_SOURCE, KIND_SINK),
        ((0, 1), (2, 3)),
    )
    assert topo.root_map == {0: 0, 1: 0, 2: 2, 3: 2}


def test_edge_flows_chain():
    topo = Topology(
        (KIND_SOURCE, KIND_SINK, KIND_SINK, KIND_SINK),
        ((0, 1), (1, 2), (2, 3)),
    )
    flows = edge_flows(topo, {1: 1 / 3, 2: 1 / 3, 3: 1 / 3})
    assert flows[(0, 1)] == pytest.approx(1.0)
    assert flows[(1, 2)] == pytest.approx(2 / 3)
    assert flows[(2, 3)] == pytest.approx(1 / 3)


def test_edge_flows_star_through_steiner():
    topo = Topology(
        (KIND_SOURCE, KIND_SINK, KIND_SINK, KIND_STEINER),
        ((0, 3), (3, 1), (3, 2)),
    )
    flows = edge_flows(topo, {1: 0.25, 2: 0.75})
    assert flows[(0, 3)] == pytest.approx(1.0)
    assert flows[(3, 1)] == pytest.approx(0.25)
    assert flows[(3, 2)] == pytest.approx(0.75)


def test_edge_flows_rejects_nonpositive_mass():
    topo = Topology((KIND_SOURCE, KIND_SINK), ((0, 1),))
    with pytest.raises(ValueError, match="invalid flow"):
        edge_flows(topo, {1: 0.0})


def test_alpha_mass_chain_hand_value():
    net = chain_network(alpha=0.9)
    expected = 1.0 + (2 / 3) ** 0.9 + (1 / 3) ** 0.9
    assert net.cost == pytest.approx(expected, rel=1e-12)
    assert alpha_mass(net) == pytest.approx(expected, rel=1e-12)


def test_alpha_mass_ignores_zero_length_edges():
    topo = Topology((KIND_SOURCE, KIND_SINK), ((0, 1),))
    pos = np.array([[1.0, 1.0], [1.0, 1.0]])
    net = TransportNetwork(topo, pos, {(0, 1): 1.0}, 0.8)
    assert net.cost == 0.0


def test_alpha_mass_concavity_rewards_shared_trunk():
    # moving one unit along a shared trunk is cheaper than separately
    a = 0.7
    shared = (1.0) ** a * 1.0
    separate = 2 * (0.5) ** a * 1.0
    assert shared < separate


def test_sink_mass_recovery_and_validate():
    net = chain_network()
    masses = net.sink_masses()
    assert masses[1] == pytest.approx(1 / 3)
    assert masses[3] == pytest.approx(1 / 3)
    assert net.validate()


def test_validate_rejects_corrupted_flows():
    # raising a downstream flow above the upstream one implies a negative
    # mass at the intermediate sink
    net = chain_network()
    bad = dict(net.flows)
    bad[(1, 2)] = 1.1
    broken = TransportNetwork(net.topology, net.positions, bad, net.alpha)
    with pytest.raises(ValueError, match="invalid flow"):
        broken.validate()


def test_alpha_out_of_range():
    topo = Topology((KIND_SOURCE, KIND_SINK), ((0, 1),))
    pos = np.array([[0.0, 0.0], [1.0, 0.0]])
    for a in (0.0, -0.2, 1.5):
        with pytest.raises(ValueError, match="alpha"):
            TransportNetwork(topo, pos, {(0, 1): 1.0}, a)


def test_json_roundtrip_byte_identical():
    net = chain_network()
    text = net.dumps()
    net2 = TransportNetwork.from_json(json.loads(text))
    assert net2.dumps() == text
    assert net2.cost == pytest.approx(net.cost, rel=1e-12)


def test_spatial_homogeneity():
    net = chain_network(alpha=0.8)
    lam = 2.0
    scaled = TransportNetwork(
        net.topology, net.positions * lam, net.flows, net.alpha
    )
    assert scaled.cost == pytest.approx(lam * net.cost, rel=1e-12)


def test_mass_homogeneity():
    net = chain_network(alpha=0.8)
    m = 3.0
    scaled_flows = {e: f * m for e, f in net.flows.items()}
    scaled = TransportNetwork(net.topology, net.positions, scaled_flows, net.alpha)
    assert scaled.cost == pytest.approx(m**0.8 * net.cost, rel=1e-12)


def test_network_from_tree():
    kinds = (KIND_SOURCE, KIND_SINK, KIND_SINK)
    pos = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]])
    net = network_from_tree(kinds, pos, [-1, 0, 1], {1: 0.4, 2: 0.6}, 0.9)
    assert net.flows[(0, 1)] == pytest.approx(1.0)
    assert net.flows[(1, 2)] == pytest.approx(0.6)
    assert net.validate()
