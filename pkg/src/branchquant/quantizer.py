"""N-point branched quantization.

A quantizer is a set of sites with masses and a basin assignment of the
target's atoms; each basin carries its own single-source transport network.
mass_optimal fixes the sites and optimizes the basin partition via a
landscape first-variation sweep; improve_sites relocates sites inside their
basins; solve_quantization alternates the two under a multistart outer loop.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np
from scipy.spatial import cKDTree

from .landscape import compute_landscape, marginal_cost
from .measures import DiscreteMeasure
from .network import KIND_SINK, KIND_SOURCE, Topology, TransportNetwork, edge_flows
from .solver import SolverConfig, solve_single_source

MASS_ATOL = 1e-9


@dataclass(frozen=True)
class Quantizer:
    sites: np.ndarray  # (k, d)
    masses: np.ndarray  # (k,)
    assignment: np.ndarray  # nu atom index -> site index
    networks: tuple  # per-site TransportNetwork
    basin_members: tuple  # per-site sorted tuple of nu atom indices
    total_cost: float
    alpha: float
    nu: DiscreteMeasure
    config: SolverConfig

    @property
    def n_sites(self):
        return len(self.masses)

    def validate(self):
        if abs(self.masses.sum() - self.nu.total_mass) > MASS_ATOL:
            raise ValueError("site masses do not sum to target mass")
        seen = np.zeros(self.nu.n_atoms, dtype=int)
        for i, members in enumerate(self.basin_members):
            for j in members:
                seen[j] += 1
            m = float(self.nu.masses[list(members)].sum())
            if abs(m - self.masses[i]) > MASS_ATOL:
                raise ValueError("basin mass mismatch at site %d" % i)
        if not np.all(seen == 1):
            raise ValueError("basins do not partition the sinks")
        total = sum(net.cost for net in self.networks)
        if abs(total - self.total_cost) > max(1e-9, 1e-9 * abs(total)):
            raise ValueError("cached cost mismatch")
        return True

    def fields(self):
        return tuple(compute_landscape(net) for net in self.networks)

    def sink_z(self):
        """z value per nu atom, from its own basin's landscape."""
        z = np.zeros(self.nu.n_atoms)
        for members, field in zip(self.basin_members, self.fields()):
            for local, j in enumerate(members):
                z[j] = field.per_sink_z[local + 1]
        return z

    def basin_diameters(self):
        out = []
        for i, members in enumerate(self.basin_members):
            pts = self.nu.points[list(members)]
            if len(pts) == 1:
                out.append(0.0)
            else:
                from scipy.spatial.distance import pdist

                out.append(float(pdist(pts).max()))
        return np.array(out)

    def to_json(self):
        diam = self.basin_diameters()
        return {
            "alpha": float(self.alpha),
            "N": int(self.n_sites),
            "sites": [
                {"x": [float(c) for c in s], "mass": float(m)}
                for s, m in zip(self.sites, self.masses)
            ],
            "assignment": [int(a) for a in self.assignment],
            "cost": float(self.total_cost),
            "per_basin": [
                {
                    "cost": float(net.cost),
                    "diameter": float(diam[i]),
                    "mass": float(self.masses[i]),
                }
                for i, net in enumerate(self.networks)
            ],
        }

    def dumps(self):
        return json.dumps(self.to_json(), sort_keys=True)


def _dedupe_sites(sites):
    seen = {}
    for s in np.atleast_2d(np.asarray(sites, dtype=float)):
        key = tuple(s)
        if key not in seen:
            seen[key] = s
    return np.array(list(seen.values()))


def _basin_config(config):
    # basin solves run hundreds of times per quantization; keep the
    # exhaustive refinement to genuinely tiny basins
    return replace(config, multistarts=config.basin_multistarts,
                   refine_node_cap=min(config.refine_node_cap, 6))


def _solve_basin(site, members, nu, alpha, config):
    """Canonical basin solve; deterministic in (inputs, config)."""
    pts = nu.points[list(members)]
    ms = nu.masses[list(members)]
    return solve_single_source(site, pts, ms, alpha, _basin_config(config))


def _assemble(sites, assignment, nu, alpha, config, networks=None):
    k = len(sites)
    members = tuple(
        tuple(int(j) for j in np.flatnonzero(assignment == i)) for i in range(k)
    )
    if networks is None:
        networks = [
            _solve_basin(sites[i], members[i], nu, alpha, config)
            for i in range(k)
        ]
    masses = np.array([
        float(nu.masses[list(members[i])].sum()) if members[i] else 0.0
        for i in range(k)
    ])
    total = float(sum(net.cost for net in networks))
    return Quantizer(
        sites=np.array(sites, dtype=float),
        masses=masses,
        assignment=np.array(assignment, dtype=int),
        networks=tuple(networks),
        basin_members=members,
        total_cost=total,
        alpha=float(alpha),
        nu=nu,
        config=config,
    )


def _drop_empty(sites, assignment):
    k = len(sites)
    used = sorted(set(int(a) for a in assignment))
    remap = {old: new for new, old in enumerate(used)}
    new_sites = np.array([sites[i] for i in used])
    new_assignment = np.array([remap[int(a)] for a in assignment], dtype=int)
    return new_sites, new_assignment


def mass_optimal(sites, nu, alpha, config=None):
    """Optimize basin masses/partition for fixed sites by alternating
    nearest-site initialization, per-basin solves and landscape
    first-variation reassignment sweeps."""
    config = config or SolverConfig()
    if nu.n_atoms == 0:
        raise ValueError("empty instance")
    sites = _dedupe_sites(sites)
    dists = np.linalg.norm(
        nu.points[:, None, :] - sites[None, :, :], axis=2
    )
    assignment = np.argmin(dists, axis=1)
    sites, assignment = _drop_empty(sites, assignment)
    q = _assemble(sites, assignment, nu, alpha, config)

    for _ in range(config.reassign_rounds):
        moved = _reassign_batch(q, config)
        if moved is None:
            break
        q = moved
    return q


def _reassign_batch(q, config):
    """One first-variation sweep; returns the improved quantizer or None."""
    k = q.n_sites
    if k < 2:
        return None
    fields = q.fields()
    trees = [cKDTree(net.positions) for net in q.networks]
    site_kdt = cKDTree(q.sites)
    n_cand = min(3, k - 1)
    a = q.alpha
    proposals = {}
    for j in range(q.nu.n_atoms):
        i = int(q.assignment[j])
        if len(q.basin_members[i]) <= 1:
            continue  # never empty a basin inside the sweep
        x = q.nu.points[j]
        m = float(q.nu.masses[j])
        local = q.basin_members[i].index(j)
        z_here = fields[i].per_sink_z[local + 1]
        current = a * z_here * m
        best_gain, best_to = 0.0, None
        _, near = site_kdt.query(x, k=min(n_cand + 1, k))
        for cand in np.atleast_1d(near):
            cand = int(cand)
            if cand == i:
                continue
            kk = min(5, q.networks[cand].topology.n_nodes)
            _, attach = trees[cand].query(x, k=kk)
            sur = min(
                marginal_cost(fields[cand], int(anode), x, m)
                for anode in np.atleast_1d(attach)
            )
            gain = current - sur
            if gain > best_gain * (1 + 1e-12):
                best_gain, best_to = gain, cand
        if best_to is not None and best_gain > 1e-12 * max(q.total_cost, 1e-300):
            proposals[j] = best_to
    if not proposals:
        return None
    new_assignment = q.assignment.copy()
    for j, to in sorted(proposals.items()):
        new_assignment[j] = to
    affected = set(int(q.assignment[j]) for j in proposals) | set(proposals.values())
    networks = list(q.networks)
    sites = q.sites
    members_new = [
        tuple(int(t) for t in np.flatnonzero(new_assignment == i))
        for i in range(q.n_sites)
    ]
    for i in affected:
        if members_new[i]:
            networks[i] = _solve_basin(sites[i], members_new[i], q.nu, q.alpha,
                                       config)
    if any(not members_new[i] for i in range(q.n_sites)):
        keep = [i for i in range(q.n_sites) if members_new[i]]
        sites2, assignment2 = _drop_empty(sites, new_assignment)
        networks = [networks[i] for i in keep]
        cand = _assemble(sites2, assignment2, q.nu, q.alpha, config,
                         networks=networks)
    else:
        cand = _assemble(sites, new_assignment, q.nu, q.alpha, config,
                         networks=networks)
    if cand.total_cost < q.total_cost * (1 - 1e-12):
        return cand
    return None


def _first_branch_point(network):
    """First node below the root with >= 2 children, else the root itself."""
    topo = network.topology
    parent, order, _ = topo.rooted()
    children = [[] for _ in range(topo.n_nodes)]
    for u in order:
        if parent[u] >= 0:
            children[parent[u]].append(u)
    u = order[0]
    while len(children[u]) == 1:
        u = children[u][0]
        if len(children[u]) >= 2:
            return network.positions[u]
    if len(children[u]) >= 2 and u != order[0]:
        return network.positions[u]
    return network.positions[order[0]]


def _weighted_median(pts, ms):
    """Weiszfeld iteration for the mass-weighted geometric median."""
    x = (pts * ms[:, None]).sum(axis=0) / ms.sum()
    for _ in range(200):
        d = np.maximum(np.linalg.norm(pts - x, axis=1), 1e-12)
        w = ms / d
        x_new = (w[:, None] * pts).sum(axis=0) / w.sum()
        if np.linalg.norm(x_new - x) < 1e-12:
            return x_new
        x = x_new
    return x


def improve_sites(q, config=None, round_idx=0):
    """Relocate each site among candidates (current, basin centroid, basin
    weighted median, first branch point, seeded perturbations); per-basin
    costs never increase."""
    config = config or q.config
    eval_config = replace(config, multistarts=1, topology_moves=4,
                          refine_node_cap=min(config.refine_node_cap, 6))
    new_sites = q.sites.copy()
    networks = list(q.networks)
    for i in range(q.n_sites):
        members = q.basin_members[i]
        pts = q.nu.points[list(members)]
        ms = q.nu.masses[list(members)]
        if len(members) == 1:
            cand_best = pts[0]
        else:
            rng = np.random.default_rng(np.random.SeedSequence(
                [int(config.seed), 0x517E, int(round_idx), int(i)]
            ))
            centroid = (pts * ms[:, None]).sum(axis=0) / ms.sum()
            diam = float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))
            cands = [q.sites[i], centroid, _weighted_median(pts, ms),
                     _first_branch_point(q.networks[i])]
            for _ in range(config.site_perturbations):
                cands.append(
                    q.sites[i] + (diam / 4.0) * rng.standard_normal(len(pts[0]))
                )
            # the current site's canonical cost is already cached; only the
            # alternative candidates need fresh evaluation solves
            costs = [q.networks[i].cost]
            for c in cands[1:]:
                net = solve_single_source(c, pts, ms, q.alpha, eval_config)
                costs.append(net.cost)
            best_idx = 0
            for j in range(1, len(cands)):
                if costs[j] < costs[best_idx] * (1 - 1e-12):
                    best_idx = j
            cand_best = cands[best_idx]
        if np.array_equal(cand_best, q.sites[i]):
            continue
        net = _solve_basin(cand_best, members, q.nu, q.alpha, config)
        if net.cost < networks[i].cost * (1 - 1e-12) or len(members) == 1:
            new_sites[i] = cand_best
            networks[i] = net
    assignment = q.assignment.copy()
    sites2 = _dedupe_sites(new_sites)
    if len(sites2) < len(new_sites):
        # coincident sites after relocation: restart from scratch assignment
        return mass_optimal(sites2, q.nu, q.alpha, config)
    return _assemble(new_sites, assignment, q.nu, q.alpha, config,
                     networks=networks)


def _seed_sites(nu, N, rng):
    """Mass-weighted k-means++ style seeding."""
    pts, ms = nu.points, nu.masses
    probs = ms / ms.sum()
    first = int(rng.choice(len(ms), p=probs))
    chosen = [first]
    d2 = np.linalg.norm(pts - pts[first], axis=1) ** 2
    while len(chosen) < N:
        w = ms * d2
        if w.sum() <= 0:
            break
        nxt = int(rng.choice(len(ms), p=w / w.sum()))
        chosen.append(nxt)
        d2 = np.minimum(d2, np.linalg.norm(pts - pts[nxt], axis=1) ** 2)
    return pts[chosen]


def _zero_cost_quantizer(nu, alpha, config):
    sites = nu.points.copy()
    assignment = np.arange(nu.n_atoms)
    networks = []
    for i in range(nu.n_atoms):
        topo = Topology((KIND_SOURCE, KIND_SINK), ((0, 1),))
        flows = edge_flows(topo, {1: float(nu.masses[i])})
        networks.append(TransportNetwork(
            topo, np.vstack([nu.points[i], nu.points[i]]), flows, alpha
        ))
    return _assemble(sites, assignment, nu, alpha, config, networks=networks)


def _respawn_if_short(q, N, config):
    """Re-add dropped sites at the highest-landscape sinks."""
    tries = 0
    while q.n_sites < min(N, q.nu.n_atoms) and tries < 3:
        z = q.sink_z()
        # pick the max-z sink not already a site
        order = np.argsort(-z, kind="stable")
        new_site = None
        site_keys = set(tuple(s) for s in q.sites)
        for j in order:
            key = tuple(q.nu.points[int(j)])
            if key not in site_keys:
                new_site = q.nu.points[int(j)]
                break
        if new_site is None:
            break
        sites = np.vstack([q.sites, new_site])
        q = mass_optimal(sites, q.nu, q.alpha, config)
        tries += 1
    return q


def solve_quantization(nu, N, alpha, config=None, warm_start=None):
    """Multistart alternating solver for the N-point quantization problem."""
    config = config or SolverConfig()
    if N < 1:
        raise ValueError("N must be >= 1")
    if nu.n_atoms == 0:
        raise ValueError("empty instance")
    if N >= nu.n_atoms:
        return _zero_cost_quantizer(nu, alpha, config)

    def _run(sites0):
        q = mass_optimal(sites0, nu, alpha, config)
        q = _respawn_if_short(q, N, config)
        for r in range(config.quant_rounds):
            prev = q.total_cost
            q = improve_sites(q, config, round_idx=r)
            # re-partition after the sites moved, else the assignment lags
            # the relocated sites (at alpha=1 it must converge to Voronoi)
            for _ in range(config.reassign_rounds):
                moved = _reassign_batch(q, config)
                if moved is None:
                    break
                q = moved
            q = _respawn_if_short(q, N, config)
            if prev - q.total_cost < config.quant_tol * max(prev, 1e-300):
                break
        return q

    best = None
    for start in range(config.multistarts):
        rng = np.random.default_rng(np.random.SeedSequence(
            [int(config.seed), 0x9047, int(N), start]
        ))
        q = _run(_seed_sites(nu, N, rng))
        if best is None or q.total_cost < best.total_cost:
            best = q
    if warm_start is not None:
        z = warm_start.sink_z()
        new_site = warm_start.nu.points[int(np.argmax(z))]
        q = _run(np.vstack([warm_start.sites, new_site]))
        if q.total_cost < best.total_cost:
            best = q
        if warm_start.total_cost < best.total_cost:
            best = warm_start
    return best


def partition_equivalence_check(q):
    """Residual between the cached total cost and fresh per-basin re-solves;
    also asserts the basins partition the sinks."""
    q.validate()
    total = 0.0
    for i in range(q.n_sites):
        net = _solve_basin(q.sites[i], q.basin_members[i], q.nu, q.alpha,
                           q.config)
        total += net.cost
    return abs(q.total_cost - total)
