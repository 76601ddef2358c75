"""Geometric transport networks: rooted forests with per-edge flow.

A topology is a forest over nodes tagged source / sink / steiner, with one
source per connected component. Flows are never decision variables: each
edge carries the total sink mass strictly below it in the rooted forest.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

KIND_SOURCE = "source"
KIND_SINK = "sink"
KIND_STEINER = "steiner"

FLOW_RTOL = 1e-10


@dataclass(frozen=True)
class Topology:
    """Combinatorial skeleton: node kinds plus an undirected edge set."""

    kinds: tuple
    edges: tuple

    def __post_init__(self):
        kinds = tuple(self.kinds)
        edges = tuple((int(u), int(v)) for u, v in self.edges)
        for k in kinds:
            if k not in (KIND_SOURCE, KIND_SINK, KIND_STEINER):
                raise ValueError("unknown node kind %r" % k)
        n = len(kinds)
        for u, v in edges:
            if not (0 <= u < n and 0 <= v < n) or u == v:
                raise ValueError("bad edge (%d, %d)" % (u, v))
        object.__setattr__(self, "kinds", kinds)
        object.__setattr__(self, "edges", edges)
        self._root()  # validates forest + one source per component

    @property
    def n_nodes(self):
        return len(self.kinds)

    @property
    def sources(self):
        return tuple(i for i, k in enumerate(self.kinds) if k == KIND_SOURCE)

    @property
    def sinks(self):
        return tuple(i for i, k in enumerate(self.kinds) if k == KIND_SINK)

    @property
    def steiner_nodes(self):
        return tuple(i for i, k in enumerate(self.kinds) if k == KIND_STEINER)

    def adjacency(self):
        adj = [[] for _ in range(self.n_nodes)]
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        return adj

    def _root(self):
        """Parents, BFS order and component roots; raises unless the edge set
        is a forest with exactly one source per component."""
        n = self.n_nodes
        adj = self.adjacency()
        if len(self.edges) != len(set(frozenset(e) for e in self.edges)):
            raise ValueError("not a forest")
        parent = np.full(n, -1, dtype=int)
        root_of = np.full(n, -1, dtype=int)
        order = []
        seen = np.zeros(n, dtype=bool)
        for s in self.sources:
            if seen[s]:
                raise ValueError("component has more than one source")
            stack = [s]
            seen[s] = True
            root_of[s] = s
            while stack:
                u = stack.pop()
                order.append(u)
                for v in adj[u]:
                    if v == parent[u]:
                        continue
                    if seen[v]:
                        raise ValueError("not a forest")
                    if self.kinds[v] == KIND_SOURCE:
                        raise ValueError("component has more than one source")
                    seen[v] = True
                    parent[v] = u
                    root_of[v] = s
                    stack.append(v)
        if not np.all(seen):
            raise ValueError("node not reachable from any source")
        if n != len(self.edges) + len(self.sources):
            raise ValueError("not a forest")
        return parent, np.array(order, dtype=int), root_of

    def rooted(self):
        return self._root()

    @property
    def root_map(self):
        _, _, root_of = self._root()
        return {int(i): int(root_of[i]) for i in range(self.n_nodes)}

    def steiner_degrees_ok(self):
        deg = np.zeros(self.n_nodes, dtype=int)
        for u, v in self.edges:
            deg[u] += 1
            deg[v] += 1
        return all(deg[i] >= 3 for i in self.steiner_nodes)


def edge_flows(topology, sink_masses):
    """Flow on each edge = total sink mass in the subtree below it.

    sink_masses maps sink node id -> positive mass. Returns a dict keyed by
    the edges exactly as listed in the topology.
    """
    parent, order, _ = topology.rooted()
    sub = np.zeros(topology.n_nodes)
    for i in topology.sinks:
        m = float(sink_masses[i])
        if m <= 0:
            raise ValueError("invalid flow")
        sub[i] = m
    for u in order[::-1]:
        p = parent[u]
        if p >= 0:
            sub[p] += sub[u]
    flows = {}
    for u, v in topology.edges:
        child = v if parent[v] == u else u
        flows[(u, v)] = float(sub[child])
    return flows


@dataclass(frozen=True)
class TransportNetwork:
    """Topology + node positions + per-edge flows + cached alpha-mass."""

    topology: Topology
    positions: np.ndarray  # (n_nodes, d)
    flows: dict  # edge tuple -> positive flow
    alpha: float
    cost: float = None
    converged: bool = True

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        if pos.ndim != 2 or len(pos) != self.topology.n_nodes:
            raise ValueError("positions/topology mismatch")
        # finite trees are feasible for any concave exponent; the
        # supercritical bound alpha > 1 - 1/d is enforced where continuum
        # semantics matter (quantizer sweeps, CLI configs)
        if not (0.0 < self.alpha <= 1.0):
            raise ValueError("alpha must lie in (0, 1]")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "flows", dict(self.flows))
        if self.cost is None:
            object.__setattr__(self, "cost", alpha_mass(self))

    @property
    def dimension(self):
        return self.positions.shape[1]

    def edge_lengths(self):
        return {
            (u, v): float(np.linalg.norm(self.positions[u] - self.positions[v]))
            for u, v in self.topology.edges
        }

    def sink_masses(self):
        """Per-sink masses recovered from leaf-side flows."""
        parent, order, _ = self.topology.rooted()
        inflow = np.zeros(self.topology.n_nodes)
        outflow = np.zeros(self.topology.n_nodes)
        for (u, v), f in self.flows.items():
            child = v if parent[v] == u else u
            par = u if child == v else v
            inflow[child] += f
            outflow[par] += f
        out = {}
        for i in self.topology.sinks:
            out[i] = float(inflow[i] - outflow[i])
        return out

    def validate(self, rtol=FLOW_RTOL):
        """Assert Kirchhoff balance and the subtree-flow identity."""
        for e, f in self.flows.items():
            if f <= 0:
                raise ValueError("invalid flow")
        masses = self.sink_masses()
        for i, m in masses.items():
            if m <= 0:
                raise ValueError("invalid flow")
        ref = edge_flows(self.topology, masses)
        scale = max(abs(f) for f in self.flows.values())
        for e in self.topology.edges:
            if abs(ref[e] - self.flows[e]) > rtol * scale:
                raise ValueError("flow violates subtree identity on edge %s" % (e,))
        return True

    def to_json(self):
        kinds = self.topology.kinds
        masses = self.sink_masses()
        nodes = []
        for i in range(self.topology.n_nodes):
            node = {
                "id": int(i),
                "kind": kinds[i],
                "x": [float(c) for c in self.positions[i]],
            }
            if kinds[i] == KIND_SINK:
                node["mass"] = float(masses[i])
            nodes.append(node)
        lengths = self.edge_lengths()
        edges = [
            {
                "u": int(u),
                "v": int(v),
                "flow": float(self.flows[(u, v)]),
                "length": lengths[(u, v)],
            }
            for u, v in self.topology.edges
        ]
        return {
            "alpha": float(self.alpha),
            "nodes": nodes,
            "edges": edges,
            "cost": float(self.cost),
        }

    def dumps(self):
        return json.dumps(self.to_json(), sort_keys=True)

    @classmethod
    def from_json(cls, doc):
        kinds = tuple(n["kind"] for n in doc["nodes"])
        pos = np.array([n["x"] for n in doc["nodes"]], dtype=float)
        edges = tuple((int(e["u"]), int(e["v"])) for e in doc["edges"])
        flows = {(int(e["u"]), int(e["v"])): float(e["flow"]) for e in doc["edges"]}
        topo = Topology(kinds, edges)
        return cls(topo, pos, flows, float(doc["alpha"]), cost=float(doc["cost"]))


def alpha_mass(network):
    """Sum over edges of flow^alpha * Euclidean length."""
    total = 0.0
    pos = network.positions
    a = network.alpha
    for (u, v), f in network.flows.items():
        if f <= 0:
            raise ValueError("invalid flow")
        length = float(np.linalg.norm(pos[u] - pos[v]))
        if length > 0.0:
            total += f**a * length
    return total


def network_from_tree(kinds, positions, parent, sink_masses, alpha, converged=True):
    """Build a TransportNetwork from parent pointers (parent[root] = -1)."""
    edges = tuple(
        (int(parent[i]), int(i)) for i in range(len(kinds)) if parent[i] >= 0
    )
    topo = Topology(tuple(kinds), edges)
    flows = edge_flows(topo, sink_masses)
    return TransportNetwork(topo, np.asarray(positions, dtype=float), flows, alpha,
                            converged=converged)
