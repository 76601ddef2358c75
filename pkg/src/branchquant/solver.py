"""Branched transport solvers.

solve_bot builds a feasible transport forest between discrete measures and
improves it by local search (multistart greedy insertion, subtree
re-parenting, Steiner splits) with Weiszfeld geometry passes in between.
brute_force_bot enumerates every forest topology with up to (#terminals - 2)
Steiner nodes for tiny instances and is used as the test oracle.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from scipy.spatial import cKDTree

from .geometry import contract_short_edges, weiszfeld_positions
from .measures import DiscreteMeasure
from .network import (
    KIND_SINK,
    KIND_SOURCE,
    KIND_STEINER,
    Topology,
    TransportNetwork,
    edge_flows,
    network_from_tree,
)

ORACLE_TERMINAL_CAP = 5


@dataclass(frozen=True)
class SolverConfig:
    epsilon_smoothing: float = 1e-3
    geometry_tol: float = 1e-10
    max_geometry_iters: int = 600
    topology_moves: int = 20
    multistarts: int = 8
    seed: int = 0
    collapse_threshold: float = 1e-7
    epsilon_floor_ratio: float = 1e-6
    reparent_candidates: int = 8
    reparent_node_cap: int = 5000
    steiner_sink_cap: int = 48
    # largest live-node count eligible for the exhaustive small-instance
    # refinement; inner loops (basin solves) lower it to bound runtime
    refine_node_cap: int = 14
    # quantizer knobs
    basin_multistarts: int = 2
    reassign_rounds: int = 3
    site_perturbations: int = 3
    quant_rounds: int = 6
    quant_tol: float = 1e-3

    def __post_init__(self):
        for name in ("epsilon_smoothing", "geometry_tol", "max_geometry_iters",
                     "collapse_threshold", "epsilon_floor_ratio"):
            if getattr(self, name) <= 0:
                raise ValueError("%s must be positive" % name)
        if self.multistarts < 1:
            raise ValueError("multistarts must be >= 1")


LIGHT_CONFIG = SolverConfig(multistarts=2, topology_moves=6)


def optimize_geometry(topology, fixed_positions, sink_masses, alpha, config,
                      initial_positions=None):
    from .geometry import optimize_geometry as _og

    return _og(topology, fixed_positions, sink_masses, alpha, config,
               initial_positions=initial_positions)


# ---------------------------------------------------------------------------
# mutable rooted tree used by the local search (single source at node 0)


class _Tree:
    __slots__ = ("pos", "kind", "parent", "children", "sink_mass", "alpha",
                 "flow")

    def __init__(self, pos, kind, parent, sink_mass, alpha):
        self.pos = [np.array(p, dtype=float) for p in pos]
        self.kind = list(kind)
        self.parent = list(parent)
        self.sink_mass = list(sink_mass)
        self.alpha = float(alpha)
        self._rebuild_children()
        self.flow = [0.0] * len(self.pos)
        self.recompute_flows()

    def copy(self):
        t = _Tree.__new__(_Tree)
        t.pos = [p.copy() for p in self.pos]
        t.kind = list(self.kind)
        t.parent = list(self.parent)
        t.children = [list(c) for c in self.children]
        t.sink_mass = list(self.sink_mass)
        t.alpha = self.alpha
        t.flow = list(self.flow)
        return t

    def _rebuild_children(self):
        self.children = [[] for _ in self.pos]
        for i, p in enumerate(self.parent):
            if p >= 0:
                self.children[p].append(i)

    def postorder(self):
        out, stack = [], [0]
        while stack:
            u = stack.pop()
            out.append(u)
            stack.extend(self.children[u])
        return out[::-1]

    def recompute_flows(self):
        sub = list(self.sink_mass)
        for u in self.postorder():
            p = self.parent[u]
            if p >= 0:
                sub[p] += sub[u]
        self.flow = sub

    def _dist(self, u, v):
        a, b = self.pos[u], self.pos[v]
        s = 0.0
        for i in range(len(a)):
            t = a[i] - b[i]
            s += t * t
        return s ** 0.5

    def edge_len(self, u):
        return self._dist(u, self.parent[u])

    def cost(self):
        a = self.alpha
        total = 0.0
        for u in range(1, len(self.pos)):
            if self.parent[u] >= 0 and self.flow[u] > 0:
                total += self.flow[u] ** a * self.edge_len(u)
        return total

    def in_subtree(self, u, v):
        """True if v lies in the subtree rooted at u."""
        while v >= 0:
            if v == u:
                return True
            v = self.parent[v]
        return False

    def path_to_root(self, u):
        out = []
        while u > 0:
            out.append(u)
            u = self.parent[u]
        return out

    def reparent_delta(self, u, v, elen=None):
        """Cost change of moving the subtree at u under new parent v.
        elen optionally memoizes edge lengths across calls; callers must
        drop a node's entry when its parent changes."""
        p = self.parent[u]
        if v == p or v == u:
            return None
        parent, flow = self.parent, self.flow
        path_v = []
        x = v
        while x > 0:
            if x == u:
                return None  # v lies in the subtree being moved
            path_v.append(x)
            x = parent[x]
        if elen is None:
            elen = {}
        a = self.alpha
        m = self.flow[u]
        lu = elen.get(u)
        if lu is None:
            lu = self.edge_len(u)
            elen[u] = lu
        delta = m ** a * (self._dist(u, v) - lu)
        path_p = self.path_to_root(p) if p > 0 else []
        # both paths end at the root; only the parts below the common
        # ancestor change flow
        i, j = len(path_p) - 1, len(path_v) - 1
        while i >= 0 and j >= 0 and path_p[i] == path_v[j]:
            i -= 1
            j -= 1
        for x in path_p[:i + 1]:
            f = flow[x]
            lx = elen.get(x)
            if lx is None:
                lx = self.edge_len(x)
                elen[x] = lx
            delta += ((f - m if f > m else 0.0) ** a - f ** a) * lx
        for x in path_v[:j + 1]:
            f = flow[x]
            lx = elen.get(x)
            if lx is None:
                lx = self.edge_len(x)
                elen[x] = lx
            delta += ((f + m) ** a - f ** a) * lx
        return delta

    def apply_reparent(self, u, v):
        p = self.parent[u]
        self.children[p].remove(u)
        self.parent[u] = v
        self.children[v].append(u)
        m = self.flow[u]
        x = p
        while x >= 0:
            self.flow[x] -= m
            x = self.parent[x]
        x = v
        while x >= 0:
            self.flow[x] += m
            x = self.parent[x]
        self.prune_dead_steiner()

    def prune_dead_steiner(self):
        # steiner leaves and steiner chains with no sink mass below
        changed = True
        while changed:
            changed = False
            for u in range(1, len(self.pos)):
                if (self.kind[u] == KIND_STEINER and self.parent[u] >= 0
                        and not self.children[u]):
                    self.children[self.parent[u]].remove(u)
                    self.parent[u] = -2  # detached marker
                    changed = True

    def add_steiner(self, position, parent):
        self.pos.append(np.array(position, dtype=float))
        self.kind.append(KIND_STEINER)
        self.parent.append(parent)
        self.children.append([])
        self.sink_mass.append(0.0)
        self.flow.append(0.0)
        idx = len(self.pos) - 1
        self.children[parent].append(idx)
        return idx

    def live_nodes(self):
        return [u for u in range(len(self.pos)) if self.parent[u] != -2]

    def optimize_positions(self, config, scale, tol=None, max_iters=None,
                           eps0=None, eps_floor=None):
        live = self.live_nodes()
        free_ids = [u for u in live if self.kind[u] == KIND_STEINER]
        if not free_ids:
            return
        idx = {u: i for i, u in enumerate(live)}
        pos = np.array([self.pos[u] for u in live])
        edges = []
        weights = []
        a = self.alpha
        for u in live:
            p = self.parent[u]
            if p >= 0:
                edges.append((idx[p], idx[u]))
                weights.append(max(self.flow[u], 0.0) ** a)
        free = np.zeros(len(live), dtype=bool)
        for u in free_ids:
            free[idx[u]] = True
        e0 = config.epsilon_smoothing * scale if eps0 is None else eps0
        ef = e0 * config.epsilon_floor_ratio if eps_floor is None else eps_floor
        pos, _ = weiszfeld_positions(
            pos, edges, weights, free,
            e0, ef,
            config.geometry_tol if tol is None else tol,
            config.max_geometry_iters if max_iters is None else max_iters,
        )
        for u in free_ids:
            self.pos[u] = pos[idx[u]]

    def to_network(self, config, scale):
        live = self.live_nodes()
        # terminals keep their relative order; steiner renumbered after
        terms = [u for u in live if self.kind[u] != KIND_STEINER]
        steins = [u for u in live if self.kind[u] == KIND_STEINER]
        order = terms + steins
        idx = {u: i for i, u in enumerate(order)}
        kinds = tuple(self.kind[u] for u in order)
        pos = np.array([self.pos[u] for u in order])
        edges = tuple(
            (idx[self.parent[u]], idx[u]) for u in order if self.parent[u] >= 0
        )
        topo = Topology(kinds, edges)
        topo2, pos2 = contract_short_edges(
            topo, pos, config.collapse_threshold * scale
        )
        masses = {}
        ti = 0
        for u in order:
            if self.kind[u] != KIND_STEINER:
                if self.kind[u] == KIND_SINK:
                    masses[ti] = self.sink_mass[u]
                ti += 1
        flows = edge_flows(topo2, masses)
        return TransportNetwork(topo2, pos2, flows, self.alpha)


# ---------------------------------------------------------------------------
# single-source heuristic


def _greedy_tree(root_pos, sink_points, sink_masses, alpha, order):
    n = len(sink_points)
    d = len(root_pos)
    pos = np.zeros((n + 1, d))
    pos[0] = root_pos
    kind = [KIND_SOURCE] + [KIND_SINK] * n
    parent = [-1] * (n + 1)
    sm = [0.0] + [float(m) for m in sink_masses]
    attached = np.zeros(n + 1, dtype=int)
    attached[0] = 0
    count = 1
    for j in order:
        node = j + 1
        pos[node] = sink_points[j]
        dists = np.linalg.norm(pos[attached[:count]] - sink_points[j], axis=1)
        parent[node] = int(attached[int(np.argmin(dists))])
        attached[count] = node
        count += 1
    return _Tree(pos, kind, parent, sm, alpha)


EXHAUSTIVE_NODE_CAP = 14
FINE_STAGE_NODE_CAP = 10


def _local_search(tree, config, scale, rng):
    n_live = len(tree.live_nodes())
    if n_live <= min(EXHAUSTIVE_NODE_CAP, config.refine_node_cap):
        _exhaustive_descent(tree, config, scale)
        return
    do_reparent = n_live <= config.reparent_node_cap
    n_sinks = sum(1 for k in tree.kind if k == KIND_SINK)
    do_split = n_sinks <= config.steiner_sink_cap
    tol = 1e-13 * max(tree.cost(), 1e-300)
    for _ in range(config.topology_moves):
        improved = False
        tree.optimize_positions(config, scale)
        tree.recompute_flows()
        if do_reparent and _reparent_sweep(tree, config, tol):
            improved = True
        if do_split and _split_sweep(tree, config, scale, tol):
            improved = True
        if not improved:
            break
    tree.optimize_positions(config, scale)
    tree.recompute_flows()


def _coarse_polish(tree, config, scale):
    tree.recompute_flows()
    tree.optimize_positions(config, scale, tol=1e-8, max_iters=200,
                            eps0=1e-2 * scale, eps_floor=1e-5 * scale)
    tree.recompute_flows()


def _fine_polish(tree, config, scale):
    tree.recompute_flows()
    tree.optimize_positions(config, scale, tol=1e-11, max_iters=800,
                            eps0=1e-3 * scale, eps_floor=1e-7 * scale)
    tree.recompute_flows()


def _exhaustive_descent(tree, config, scale, polish=_coarse_polish,
                        max_rounds=60, rel_tol=1e-11, captures=False):
    """Steepest descent over all reparent, split and (optionally)
    edge-insertion moves, each trialed with a geometry re-optimization.
    Tiny instances only."""
    polish(tree, config, scale)
    for _ in range(max_rounds):
        base = tree.cost()
        tol = rel_tol * max(base, 1e-300)
        best = None
        for trial in _move_trials(tree, config, scale, polish, captures):
            c = trial.cost()
            if c < base - tol and (best is None or c < best.cost()):
                best = trial
        if best is None:
            break
        _adopt(tree, best)
    tree.optimize_positions(config, scale)
    tree.recompute_flows()


def _adopt(tree, other):
    tree.pos = other.pos
    tree.kind = other.kind
    tree.parent = other.parent
    tree.children = other.children
    tree.sink_mass = other.sink_mass
    tree.flow = other.flow


def _move_trials(tree, config, scale, polish=_coarse_polish, captures=False):
    live = tree.live_nodes()
    for u in live:
        if u == 0:
            continue
        for v in live:
            if v == u or v == tree.parent[u] or tree.in_subtree(u, v):
                continue
            t2 = tree.copy()
            t2.apply_reparent(u, v)
            polish(t2, config, scale)
            yield t2
    for v in live:
        kids = [c for c in tree.children[v] if tree.parent[c] != -2]
        if len(kids) < 2:
            continue
        for ci, cj in itertools.combinations(sorted(kids), 2):
            t2 = tree.copy()
            s = t2.add_steiner((t2.pos[v] + t2.pos[ci] + t2.pos[cj]) / 3.0, v)
            t2.children[v].remove(ci)
            t2.children[v].remove(cj)
            t2.parent[ci] = s
            t2.parent[cj] = s
            t2.children[s] = [ci, cj]
            polish(t2, config, scale)
            yield t2
    if not captures:  # trial families below only run in the fine stage
        return
    # insert a steiner on the edge above u and pull a second subtree w onto
    # it; this adds a steiner node in one move even when the intermediate
    # single-move states are uphill, so plain descent cannot reach them
    for u in live:
        if u == 0:
            continue
        p = tree.parent[u]
        for w in live:
            if w in (0, u, p) or tree.parent[w] == p or tree.in_subtree(w, p):
                continue
            t2 = tree.copy()
            s = t2.add_steiner((t2.pos[p] + t2.pos[u] + t2.pos[w]) / 3.0, p)
            t2.children[p].remove(u)
            t2.parent[u] = s
            t2.children[s] = [u]
            t2.recompute_flows()
            t2.apply_reparent(w, s)
            t2.recompute_flows()
            polish(t2, config, scale)
            yield t2


def _reparent_sweep(tree, config, tol):
    live = tree.live_nodes()
    pos = np.array([tree.pos[u] for u in live])
    k = min(config.reparent_candidates + 1, len(live))
    kdt = cKDTree(pos)
    _, nbr_all = kdt.query(pos, k=k)
    nbr_all = np.asarray(nbr_all).reshape(len(live), -1)
    elen = {}
    improved = False
    for row, u in enumerate(live):
        if u == 0 or tree.parent[u] == -2:
            continue
        best_delta, best_v = -tol, None
        # the source is always a candidate: routing straight to the root
        # undoes greedy-attachment detours (and is exact at alpha = 1)
        for v in itertools.chain((live[int(j)] for j in nbr_all[row]), (0,)):
            if v == u or tree.parent[v] == -2:
                continue
            delta = tree.reparent_delta(u, v, elen)
            if delta is not None and delta < best_delta:
                best_delta, best_v = delta, v
        if best_v is not None:
            tree.apply_reparent(u, best_v)
            elen.pop(u, None)
            improved = True
    if improved:
        tree.recompute_flows()
    return improved


def _pair_split_gain(tree, v, ci, cj, scale):
    """Cost saved by routing children ci, cj of v through a fresh steiner
    point, with every other node frozen. A lower bound on the gain of the
    full trial (global repositioning can only help), used to screen pairs."""
    a = tree.alpha
    anchors = np.array([tree.pos[v], tree.pos[ci], tree.pos[cj]], dtype=float)
    w = np.array([(tree.flow[ci] + tree.flow[cj]) ** a,
                  tree.flow[ci] ** a, tree.flow[cj] ** a])
    before = (w[1:] * np.linalg.norm(anchors[1:] - anchors[0], axis=1)).sum()
    s = anchors.mean(axis=0)
    eps = 1e-9 * scale
    for _ in range(60):
        d = np.sqrt(((anchors - s) ** 2).sum(axis=1) + eps * eps)
        coef = w / d
        s_new = coef @ anchors / coef.sum()
        if np.linalg.norm(s_new - s) <= 1e-10 * scale:
            s = s_new
            break
        s = s_new
    after = (w * np.linalg.norm(anchors - s, axis=1)).sum()
    return before - after


def _split_sweep(tree, config, scale, tol):
    improved = False
    for v in list(tree.live_nodes()):
        if tree.parent[v] == -2:
            continue
        kids = [c for c in tree.children[v] if tree.parent[c] != -2]
        if len(kids) < 2:
            continue
        if len(kids) > 6:
            # restrict to the 6 children closest to v
            kids = sorted(
                kids, key=lambda c: float(np.linalg.norm(tree.pos[c] - tree.pos[v]))
            )[:6]
        base_cost = tree.cost()
        for ci, cj in itertools.combinations(sorted(kids), 2):
            if tree.parent[ci] != v or tree.parent[cj] != v:
                continue
            # frozen-tree screen: a split that cannot pay for itself with
            # the rest of the tree fixed is not worth a full trial
            if _pair_split_gain(tree, v, ci, cj, scale) <= tol:
                continue
            snapshot = tree.copy()
            s = tree.add_steiner(
                (tree.pos[v] + tree.pos[ci] + tree.pos[cj]) / 3.0, v
            )
            tree.children[v].remove(ci)
            tree.children[v].remove(cj)
            tree.parent[ci] = s
            tree.parent[cj] = s
            tree.children[s] = [ci, cj]
            tree.recompute_flows()
            tree.optimize_positions(config, scale)
            tree.recompute_flows()
            new_cost = tree.cost()
            if new_cost < base_cost - tol:
                base_cost = new_cost
                improved = True
            else:
                # revert
                tree.pos = snapshot.pos
                tree.kind = snapshot.kind
                tree.parent = snapshot.parent
                tree.children = snapshot.children
                tree.sink_mass = snapshot.sink_mass
                tree.flow = snapshot.flow
    return improved


def _instance_scale(root_pos, sink_points):
    pts = np.vstack([np.atleast_2d(root_pos), sink_points])
    span = pts.max(axis=0) - pts.min(axis=0)
    return max(float(np.linalg.norm(span)), 1e-300)


def solve_single_source(root_pos, sink_points, sink_masses, alpha, config):
    """Heuristic single-source solve. Node 0 is the source; node i+1 is the
    i-th sink in input order (preserved in the returned network)."""
    root_pos = np.asarray(root_pos, dtype=float)
    sink_points = np.atleast_2d(np.asarray(sink_points, dtype=float))
    sink_masses = np.asarray(sink_masses, dtype=float).reshape(-1)
    n = len(sink_points)
    if n == 0:
        raise ValueError("empty instance")
    scale = _instance_scale(root_pos, sink_points)
    dist0 = np.linalg.norm(sink_points - root_pos, axis=1)
    base_order = np.argsort(dist0, kind="stable")
    best = None
    for start in range(config.multistarts):
        rng = np.random.default_rng(
            np.random.SeedSequence([int(config.seed), 0xB07, start])
        )
        order = base_order if start == 0 else rng.permutation(n)
        tree = _greedy_tree(root_pos, sink_points, sink_masses, alpha, order)
        _local_search(tree, config, scale, rng)
        cost = tree.cost()
        key = (cost, tuple(tree.parent))
        if best is None or key < best[0]:
            best = (key, tree)
    tree = best[1]
    if len(tree.live_nodes()) <= min(FINE_STAGE_NODE_CAP,
                                     config.refine_node_cap):
        # escape steiner-count local optima on the winning start with the
        # richer move set at higher geometric precision
        _exhaustive_descent(tree, config, scale, polish=_fine_polish,
                            max_rounds=10, rel_tol=5e-12, captures=True)
    if n + 1 <= 16:
        # polish small instances to oracle precision
        tree.optimize_positions(
            config, scale, tol=1e-14, max_iters=5000,
            eps0=1e-3 * scale, eps_floor=1e-9 * scale,
        )
        tree.recompute_flows()
    return tree.to_network(config, scale)


# ---------------------------------------------------------------------------
# multi-source wrapper


def _greedy_split(sources, sinks):
    """Assign sink mass to sources (nearest source with remaining capacity),
    splitting sink atoms when needed. Exact mass balance by construction."""
    cap = sources.masses.astype(float).copy()
    alloc = [[] for _ in range(len(cap))]  # per source: (sink index, mass)
    order = np.argsort(
        np.min(
            np.linalg.norm(
                sinks.points[:, None, :] - sources.points[None, :, :], axis=2
            ),
            axis=1,
        ),
        kind="stable",
    )
    for j in order:
        remaining = float(sinks.masses[j])
        dists = np.linalg.norm(sources.points - sinks.points[j], axis=1)
        for i in np.argsort(dists, kind="stable"):
            if remaining <= 0:
                break
            if cap[i] <= 0:
                continue
            take = min(cap[i], remaining)
            # absorb fp crumbs so marginals match exactly
            if abs(remaining - take) < 1e-12 * sinks.total_mass:
                take = remaining
            alloc[int(i)].append((int(j), take))
            cap[i] -= take
            remaining -= take
        if remaining > 1e-9 * sinks.total_mass:
            raise ValueError("unbalanced")
    return alloc


def solve_bot(sources, sinks, alpha, config=None):
    """Heuristic upper bound for the irrigation distance between discrete
    measures. Returns a feasible TransportNetwork."""
    config = config or SolverConfig()
    if sources.n_atoms == 0 or sinks.n_atoms == 0:
        raise ValueError("empty instance")
    if abs(sources.total_mass - sinks.total_mass) > 1e-9:
        raise ValueError("unbalanced")
    if not (0.0 < alpha <= 1.0):
        raise ValueError("alpha must lie in (0, 1]")
    if sources.n_atoms == 1:
        return solve_single_source(
            sources.points[0], sinks.points, sinks.masses, alpha, config
        )
    alloc = _greedy_split(sources, sinks)
    nets = []
    for i in range(sources.n_atoms):
        if not alloc[i]:
            continue
        pts = np.array([sinks.points[j] for j, _ in alloc[i]])
        ms = np.array([m for _, m in alloc[i]])
        nets.append(
            (i, solve_single_source(sources.points[i], pts, ms, alpha, config))
        )
    return _combine_components(sources, nets, alpha)


def _combine_components(sources, nets, alpha):
    kinds, pos, parent, masses = [], [], [], {}
    for src_idx, net in nets:
        offset = len(kinds)
        p, _, _ = net.topology.rooted()
        sink_ms = net.sink_masses()
        for i in range(net.topology.n_nodes):
            kinds.append(net.topology.kinds[i])
            pos.append(net.positions[i])
            parent.append(p[i] + offset if p[i] >= 0 else -1)
            if net.topology.kinds[i] == KIND_SINK:
                masses[offset + i] = sink_ms[i]
    return network_from_tree(kinds, np.array(pos), parent, masses, alpha)


# ---------------------------------------------------------------------------
# brute-force oracle


@lru_cache(maxsize=None)
def _topology_catalog(n_terminals):
    """Edge lists of all trees on terminals 0..n-1 plus k Steiner nodes
    (k <= n - 2, Steiner degree >= 3), deduplicated under Steiner relabeling."""
    out = []
    n = n_terminals
    if n == 1:
        return ((0, ()),)
    if n == 2:
        return ((2, ((0, 1),)),)
    for k in range(0, n - 1):
        total = n + k
        seen = set()
        for pruefer in itertools.product(range(total), repeat=total - 2):
            counts = [0] * total
            for x in pruefer:
                counts[x] += 1
            if any(counts[n + s] < 2 for s in range(k)):
                continue
            edges = _pruefer_decode(pruefer, total)
            key = _steiner_canonical(edges, n, k)
            if key in seen:
                continue
            seen.add(key)
            out.append((total, edges))
    return tuple(out)


def _pruefer_decode(pruefer, n):
    degree = [1] * n
    for x in pruefer:
        degree[x] += 1
    edges = []
    ptr = 0
    leaf = -1
    degree2 = list(degree)
    import heapq

    leaves = [i for i in range(n) if degree2[i] == 1]
    heapq.heapify(leaves)
    for x in pruefer:
        leaf = heapq.heappop(leaves)
        edges.append((min(leaf, x), max(leaf, x)))
        degree2[x] -= 1
        if degree2[x] == 1:
            heapq.heappush(leaves, x)
    u = heapq.heappop(leaves)
    v = heapq.heappop(leaves)
    edges.append((min(u, v), max(u, v)))
    return tuple(edges)


def _steiner_canonical(edges, n_terminals, k):
    if k <= 1:
        return frozenset(edges)
    best = None
    ids = list(range(n_terminals, n_terminals + k))
    for perm in itertools.permutations(ids):
        remap = dict(zip(ids, perm))
        mapped = frozenset(
            tuple(sorted((remap.get(u, u), remap.get(v, v)))) for u, v in edges
        )
        key = tuple(sorted(mapped))
        if best is None or key < best:
            best = key
    return best


def _batched_weiszfeld(pos, eu, ev, w, free, schedule):
    """Jacobi Weiszfeld on a batch of same-shape topologies.

    pos: (B, n, d); eu, ev: (B, m); w: (B, m); free: (n,) bool.
    schedule: list of (eps, iterations)."""
    B, n, d = pos.shape
    bidx = np.arange(B)[:, None]
    for eps, iters in schedule:
        for _ in range(iters):
            pu = pos[bidx, eu]
            pv = pos[bidx, ev]
            diff = pu - pv
            smooth = np.sqrt((diff * diff).sum(axis=2) + eps * eps)
            coef = w / smooth
            num = np.zeros_like(pos)
            den = np.zeros((B, n))
            np.add.at(num, (bidx, eu), coef[..., None] * pv)
            np.add.at(num, (bidx, ev), coef[..., None] * pu)
            np.add.at(den, (bidx, eu), coef)
            np.add.at(den, (bidx, ev), coef)
            upd = num[:, free, :] / np.maximum(den[:, free, None], 1e-300)
            pos[:, free, :] = upd
    return pos


def _oracle_single_source(root_pos, sink_points, sink_masses, alpha, config):
    n_t = 1 + len(sink_points)
    term_pos = np.vstack([np.atleast_2d(root_pos), sink_points])
    d = term_pos.shape[1]
    scale = _instance_scale(root_pos, np.atleast_2d(sink_points))
    catalog = _topology_catalog(n_t)
    kinds_by_total = {}
    groups = {}
    for total, edges in catalog:
        groups.setdefault(total, []).append(edges)

    candidates = []
    for total, edge_lists in sorted(groups.items()):
        k = total - n_t
        kinds = (KIND_SOURCE,) + (KIND_SINK,) * (n_t - 1) + (KIND_STEINER,) * k
        masses = {i + 1: float(sink_masses[i]) for i in range(n_t - 1)}
        weights, valid = [], []
        for edges in edge_lists:
            topo = Topology(kinds, edges)
            flows = edge_flows(topo, masses)
            weights.append([flows[e] ** alpha for e in edges])
            valid.append(edges)
        B = len(valid)
        m = total - 1
        pos = np.zeros((B, total, d))
        pos[:, :n_t, :] = term_pos
        pos[:, n_t:, :] = term_pos.mean(axis=0)
        if k > 0:
            eu = np.array([[e[0] for e in edges] for edges in valid])
            ev = np.array([[e[1] for e in edges] for edges in valid])
            w = np.array(weights)
            free = np.zeros(total, dtype=bool)
            free[n_t:] = True
            # perturb steiner starts deterministically to break symmetry
            rng = np.random.default_rng(12345)
            pos[:, n_t:, :] += 0.05 * scale * rng.standard_normal(
                (B, k, d)
            )
            schedule = [
                (1e-2 * scale, 40), (1e-3 * scale, 40),
                (1e-4 * scale, 40), (1e-6 * scale, 60),
            ]
            pos = _batched_weiszfeld(pos, eu, ev, w, free, schedule)
        for b in range(B):
            p = pos[b]
            c = 0.0
            for (u, v), we in zip(valid[b], weights[b]):
                c += we * float(np.linalg.norm(p[u] - p[v]))
            candidates.append((c, total, valid[b], p, weights[b]))

    candidates.sort(key=lambda t: t[0])
    best = None
    for c, total, edges, pos0, weights in candidates[:8]:
        k = total - n_t
        kinds = (KIND_SOURCE,) + (KIND_SINK,) * (n_t - 1) + (KIND_STEINER,) * k
        free = np.zeros(total, dtype=bool)
        free[n_t:] = True
        pos, _ = weiszfeld_positions(
            pos0, edges, weights, free,
            1e-3 * scale, 1e-9 * scale, 1e-14, 20000,
        )
        topo = Topology(kinds, edges)
        masses = {i + 1: float(sink_masses[i]) for i in range(n_t - 1)}
        topo2, pos2 = contract_short_edges(
            topo, pos, config.collapse_threshold * scale
        )
        from .geometry import sink_masses_remapped

        flows2 = edge_flows(topo2, sink_masses_remapped(topo, topo2, masses))
        net = TransportNetwork(topo2, pos2, flows2, alpha)
        if best is None or net.cost < best.cost:
            best = net
    return best


def brute_force_bot(sources, sinks, alpha, config=None):
    """Exact-up-to-geometry oracle for tiny instances (<= 5 terminals)."""
    config = config or SolverConfig()
    if sources.n_atoms + sinks.n_atoms > ORACLE_TERMINAL_CAP:
        raise ValueError("oracle cap")
    if abs(sources.total_mass - sinks.total_mass) > 1e-9:
        raise ValueError("unbalanced")
    if sources.n_atoms == 1:
        return _oracle_single_source(
            sources.points[0], sinks.points, sinks.masses, alpha, config
        )
    # multiple sources: enumerate sink-to-source partitions with exact mass
    # feasibility, solve each component by single-source enumeration
    n_src, n_snk = sources.n_atoms, sinks.n_atoms
    best = None
    for assign in itertools.product(range(n_src), repeat=n_snk):
        comp_mass = np.zeros(n_src)
        for j, i in enumerate(assign):
            comp_mass[i] += sinks.masses[j]
        if np.max(np.abs(comp_mass - sources.masses)) > 1e-9:
            continue
        nets = []
        ok = True
        for i in range(n_src):
            members = [j for j in range(n_snk) if assign[j] == i]
            if not members:
                if sources.masses[i] > 1e-9:
                    ok = False
                    break
                continue
            nets.append((i, _oracle_single_source(
                sources.points[i],
                sinks.points[members],
                sinks.masses[members],
                alpha, config,
            )))
        if not ok or not nets:
            continue
        net = _combine_components(sources, nets, alpha)
        if best is None or net.cost < best.cost:
            best = net
    if best is None:
        raise ValueError("infeasible without sink splitting")
    return best


def solve_bot_measures(source_points, source_masses, sink_points, sink_masses,
                       alpha, config=None):
    """Convenience wrapper taking raw arrays."""
    mu = DiscreteMeasure(source_points, source_masses)
    nu = DiscreteMeasure(sink_points, sink_masses)
    return solve_bot(mu, nu, alpha, config)
