"""Fixed-topology geometric optimization of branched networks.

Steiner node positions minimize the convex functional
    F(p) = sum_e flow_e^alpha * |p_u - p_v|
via iteratively reweighted averaging (Weiszfeld-type) on the smoothed
surrogate sum_e w_e * sqrt(|p_u - p_v|^2 + eps^2), with eps halved whenever
the relative improvement stalls. The reported cost is always unsmoothed.
"""

from __future__ import annotations

import numpy as np

from .network import (
    KIND_SINK,
    KIND_SOURCE,
    KIND_STEINER,
    Topology,
    TransportNetwork,
    edge_flows,
)


def weiszfeld_positions(positions, edges, weights, free_mask,
                        eps0, eps_floor, tol, max_iters):
    """Run the smoothed Weiszfeld iteration; returns (positions, converged)."""
    pos = np.array(positions, dtype=float)
    if not np.any(free_mask):
        return pos, True
    eu = np.array([e[0] for e in edges], dtype=int)
    ev = np.array([e[1] for e in edges], dtype=int)
    w = np.asarray(weights, dtype=float)
    free = np.asarray(free_mask, dtype=bool)
    eps = float(eps0)
    prev = _smoothed_cost(pos, eu, ev, w, eps)
    converged = False
    for _ in range(int(max_iters)):
        diff = pos[eu] - pos[ev]
        smooth = np.sqrt((diff * diff).sum(axis=1) + eps * eps)
        coef = w / smooth
        num = np.zeros_like(pos)
        den = np.zeros(len(pos))
        np.add.at(num, eu, coef[:, None] * pos[ev])
        np.add.at(num, ev, coef[:, None] * pos[eu])
        np.add.at(den, eu, coef)
        np.add.at(den, ev, coef)
        pos[free] = num[free] / den[free, None]
        cur = _smoothed_cost(pos, eu, ev, w, eps)
        if prev - cur <= tol * max(abs(prev), 1e-300):
            if eps <= eps_floor:
                converged = True
                break
            eps = max(eps / 2.0, eps_floor)
            cur = _smoothed_cost(pos, eu, ev, w, eps)
        prev = cur
    return pos, converged


def _smoothed_cost(pos, eu, ev, w, eps):
    diff = pos[eu] - pos[ev]
    return float((w * np.sqrt((diff * diff).sum(axis=1) + eps * eps)).sum())


def optimize_geometry(topology, fixed_positions, sink_masses, alpha, config,
                      initial_positions=None):
    """Optimize Steiner positions for a fixed topology; terminals stay put.

    fixed_positions maps terminal node id -> coordinate vector. Steiner nodes
    start at their component's terminal centroid unless initial_positions is
    given. Short edges are contracted afterwards and degree-2 Steiner nodes
    removed; Steiner node ids may be renumbered, terminal ids are preserved.
    """
    n = topology.n_nodes
    terminals = [i for i, k in enumerate(topology.kinds) if k != KIND_STEINER]
    d = len(np.atleast_1d(next(iter(fixed_positions.values()))))
    pos = np.zeros((n, d))
    for i in terminals:
        pos[i] = np.asarray(fixed_positions[i], dtype=float)
    if initial_positions is not None:
        pos = np.array(initial_positions, dtype=float)
        for i in terminals:
            pos[i] = np.asarray(fixed_positions[i], dtype=float)
    else:
        _, _, root_of = topology.rooted()
        for i in topology.steiner_nodes:
            comp = [t for t in terminals if root_of[t] == root_of[i]]
            pos[i] = np.mean([pos[t] for t in comp], axis=0)

    flows = edge_flows(topology, sink_masses)
    edges = list(topology.edges)
    weights = [flows[e] ** alpha for e in edges]
    free = np.array([k == KIND_STEINER for k in topology.kinds])

    scale = _instance_scale(pos, terminals)
    eps0 = config.epsilon_smoothing * scale
    eps_floor = getattr(config, "epsilon_floor_ratio", 1e-6) * eps0
    pos, converged = weiszfeld_positions(
        pos, edges, weights, free, eps0, eps_floor,
        config.geometry_tol, config.max_geometry_iters,
    )
    topo2, pos2 = contract_short_edges(
        topology, pos, config.collapse_threshold * scale
    )
    flows2 = edge_flows(topo2, sink_masses_remapped(topology, topo2, sink_masses))
    net = TransportNetwork(topo2, pos2, flows2, alpha, converged=converged)
    return net


def _instance_scale(pos, terminals):
    pts = pos[terminals]
    span = pts.max(axis=0) - pts.min(axis=0)
    return max(float(np.linalg.norm(span)), 1e-300)


def sink_masses_remapped(old_topo, new_topo, sink_masses):
    # contract_short_edges keeps terminals first and in order
    old_terms = [i for i, k in enumerate(old_topo.kinds) if k != KIND_STEINER]
    new_terms = [i for i, k in enumerate(new_topo.kinds) if k != KIND_STEINER]
    remap = dict(zip(old_terms, new_terms))
    return {
        remap[i]: sink_masses[i]
        for i in old_topo.sinks
    }


def contract_short_edges(topology, positions, threshold):
    """Merge Steiner endpoints of near-zero edges into their neighbor and
    remove Steiner nodes of degree <= 2. Terminal ids keep their order."""
    n = topology.n_nodes
    kinds = list(topology.kinds)
    adj = {i: set() for i in range(n)}
    for u, v in topology.edges:
        adj[u].add(v)
        adj[v].add(u)
    pos = {i: np.array(positions[i], dtype=float) for i in range(n)}
    alive = set(range(n))

    def merge(s, t):
        # absorb steiner node s into t
        for nb in list(adj[s]):
            adj[nb].discard(s)
            if nb != t:
                adj[nb].add(t)
                adj[t].add(nb)
        adj[t].discard(s)
        del adj[s]
        del pos[s]
        alive.discard(s)

    changed = True
    while changed:
        changed = False
        for s in sorted(alive):
            if kinds[s] != KIND_STEINER:
                continue
            deg = len(adj[s])
            if deg <= 1:
                # dangling steiner node: drop it
                merge(s, next(iter(adj[s]))) if deg == 1 else alive.discard(s)
                changed = True
                break
            if deg == 2:
                a, b = sorted(adj[s])
                adj[a].discard(s)
                adj[b].discard(s)
                adj[a].add(b)
                adj[b].add(a)
                del adj[s]
                del pos[s]
                alive.discard(s)
                changed = True
                break
            short = [
                t for t in sorted(adj[s])
                if np.linalg.norm(pos[s] - pos[t]) < threshold
            ]
            if short:
                merge(s, short[0])
                changed = True
                break

    keep = sorted(alive, key=lambda i: (kinds[i] == KIND_STEINER, i))
    remap = {old: new for new, old in enumerate(keep)}
    new_kinds = tuple(kinds[i] for i in keep)
    new_edges = set()
    for u in keep:
        for v in adj[u]:
            e = (remap[u], remap[v]) if remap[u] < remap[v] else (remap[v], remap[u])
            new_edges.add(e)
    new_pos = np.array([pos[i] for i in keep])
    return Topology(new_kinds, tuple(sorted(new_edges))), new_pos
