"""Landscape function on transport networks.

The landscape value of a node is the integral of flow^(alpha - 1) along the
path from its component source: z(node) = sum over root-path edges of
flow^(alpha - 1) * length. It acts as the branched analogue of a Kantorovich
potential; the alpha-mass equals the z-weighted sink mass.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import KIND_SINK, alpha_mass


@dataclass(frozen=True)
class LandscapeField:
    per_node_z: dict  # node id -> z
    per_sink_z: dict  # sink id -> z
    alpha: float
    component_of: dict  # node id -> source id
    positions: np.ndarray  # node positions of the underlying network

    def z(self, node):
        return self.per_node_z[node]


def compute_landscape(network):
    """Single downward pass accumulating flow^(alpha-1) * length."""
    topo = network.topology
    parent, order, root_of = topo.rooted()
    a = network.alpha
    z = np.zeros(topo.n_nodes)
    pos = network.positions
    for u in order:
        p = parent[u]
        if p < 0:
            continue
        e = (p, u) if (p, u) in network.flows else (u, p)
        f = network.flows[e]
        if f <= 0:
            raise ValueError("invalid flow")
        length = float(np.linalg.norm(pos[u] - pos[p]))
        z[u] = z[p] + f ** (a - 1.0) * length
    per_node = {int(i): float(z[i]) for i in range(topo.n_nodes)}
    per_sink = {int(i): float(z[i]) for i in topo.sinks}
    comp = {int(i): int(root_of[i]) for i in range(topo.n_nodes)}
    return LandscapeField(per_node, per_sink, a, comp, pos)


def cost_identity_check(network, field):
    """|alpha_mass - sum over sinks of z * mass|; tiny by construction."""
    masses = network.sink_masses()
    weighted = sum(field.per_sink_z[i] * masses[i] for i in masses)
    return abs(alpha_mass(network) - weighted)


def marginal_cost(field, attach_node, point, mass):
    """Upper-variation surrogate for attaching extra mass at a network node:
    alpha * z(attach) * mass + mass^alpha * |point - attach|."""
    a = field.alpha
    dist = float(np.linalg.norm(
        np.asarray(point, dtype=float) - field.positions[attach_node]
    ))
    return a * field.per_node_z[attach_node] * mass + mass ** a * dist


def distance_lower_bound_violations(network, field, slack=1e-12):
    """Count sinks with z(x) < |x - source(x)| - slack (should be zero)."""
    count = 0
    pos = network.positions
    for i in network.topology.sinks:
        s = field.component_of[i]
        if field.per_sink_z[i] < float(np.linalg.norm(pos[i] - pos[s])) - slack:
            count += 1
    return count


def holder_estimate(sink_points, sink_z, beta, pair_cap=200_000, seed=0):
    """Empirical Hoelder constant: max |z(x) - z(y)| / |x - y|^beta over
    sampled sink pairs. Returns (C_emp, pair_count)."""
    pts = np.atleast_2d(np.asarray(sink_points, dtype=float))
    z = np.asarray(sink_z, dtype=float).reshape(-1)
    n = len(z)
    if not (0.0 < beta <= 1.0):
        raise ValueError("beta must lie in (0, 1]")
    if n < 2:
        return 0.0, 0
    total_pairs = n * (n - 1) // 2
    if total_pairs <= pair_cap:
        ii, jj = np.triu_indices(n, k=1)
    else:
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x401D]))
        ii = rng.integers(0, n, size=pair_cap)
        jj = rng.integers(0, n, size=pair_cap)
        keep = ii != jj
        ii, jj = ii[keep], jj[keep]
    dist = np.linalg.norm(pts[ii] - pts[jj], axis=1)
    keep = dist > 0
    if not np.any(keep):
        return 0.0, 0
    ratios = np.abs(z[ii[keep]] - z[jj[keep]]) / dist[keep] ** beta
    return float(ratios.max()), int(keep.sum())


def holder_exponent(alpha, d):
    """The natural scaling power 1 + d * alpha - d."""
    return 1.0 + d * alpha - d
