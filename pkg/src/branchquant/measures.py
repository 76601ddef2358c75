"""Discrete measures: construction, grid discretization, Ahlfors constants, exact W1.

All measures are finite weighted point clouds in dimension 1..3. Coincident
atoms (exact coordinate equality) are merged at construction time.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.optimize import linprog
from scipy.spatial import cKDTree

MAX_DIMENSION = 3
DEFAULT_ATOM_CAP = 200_000
DEFAULT_W1_CAP = 6_000  # combined atom count for the exact solver

MASS_RTOL = 1e-12


def _as_points(points, dimension=None):
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    if pts.ndim != 2:
        raise ValueError("points must be a (n, d) array")
    d = pts.shape[1]
    if dimension is not None and d != dimension:
        raise ValueError("dimension mismatch")
    if not (1 <= d <= MAX_DIMENSION):
        raise ValueError("dimension must be in 1..%d" % MAX_DIMENSION)
    if not np.all(np.isfinite(pts)):
        raise ValueError("non-finite coordinate")
    return pts


@dataclass(frozen=True)
class DiscreteMeasure:
    """Finite weighted point cloud. Immutable after construction."""

    points: np.ndarray  # (n, d)
    masses: np.ndarray  # (n,)

    def __post_init__(self):
        pts = _as_points(self.points)
        ms = np.asarray(self.masses, dtype=float).reshape(-1)
        if len(ms) != len(pts):
            raise ValueError("points/masses length mismatch")
        if len(ms) == 0:
            raise ValueError("empty measure")
        if np.any(ms <= 0) or not np.all(np.isfinite(ms)):
            raise ValueError("masses must be positive and finite")
        pts, ms = _merge_coincident(pts, ms)
        pts.setflags(write=False)
        ms.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "masses", ms)

    @property
    def dimension(self):
        return self.points.shape[1]

    @property
    def n_atoms(self):
        return len(self.masses)

    @property
    def total_mass(self):
        return float(self.masses.sum())

    def diameter(self):
        if self.n_atoms == 1:
            return 0.0
        lo = self.points.min(axis=0)
        hi = self.points.max(axis=0)
        # bounding-box diagonal upper bound is enough for radii/thresholds,
        # but we want the true diameter for reports; n is desk-scale.
        if self.n_atoms <= 2048:
            from scipy.spatial.distance import pdist

            return float(pdist(self.points).max())
        return float(np.linalg.norm(hi - lo))

    def scaled(self, space=1.0, mass=1.0):
        return DiscreteMeasure(self.points * float(space), self.masses * float(mass))

    def to_json(self):
        return {
            "dimension": int(self.dimension),
            "atoms": [
                {"x": [float(c) for c in p], "m": float(m)}
                for p, m in zip(self.points, self.masses)
            ],
        }

    @classmethod
    def from_json(cls, doc):
        if not isinstance(doc, dict) or "atoms" not in doc:
            raise ValueError("measure JSON: missing field 'atoms'")
        atoms = doc["atoms"]
        if not atoms:
            raise ValueError("measure JSON: empty 'atoms'")
        d = int(doc.get("dimension", len(atoms[0].get("x", []))))
        pts, ms = [], []
        for i, a in enumerate(atoms):
            if "x" not in a or "m" not in a:
                raise ValueError("measure JSON: atom %d missing 'x' or 'm'" % i)
            if len(a["x"]) != d:
                raise ValueError("measure JSON: atom %d has wrong dimension" % i)
            pts.append([float(c) for c in a["x"]])
            ms.append(float(a["m"]))
        return cls(np.array(pts), np.array(ms))

    def dumps(self):
        return json.dumps(self.to_json(), sort_keys=True)

    @classmethod
    def loads(cls, text):
        return cls.from_json(json.loads(text))


def _merge_coincident(pts, ms):
    seen = {}
    for i in range(len(pts)):
        key = tuple(pts[i])
        if key in seen:
            seen[key] += ms[i]
        else:
            seen[key] = ms[i]
    if len(seen) == len(pts):
        return pts.copy(), ms.copy()
    out_p = np.array([list(k) for k in seen.keys()])
    out_m = np.array(list(seen.values()))
    return out_p, out_m


def dirac(point, mass=1.0):
    return DiscreteMeasure(np.atleast_2d(np.asarray(point, dtype=float)), [mass])


# ---------------------------------------------------------------------------
# densities and grid discretization


@dataclass(frozen=True)
class DensitySpec:
    """Density on a box: uniform, linear ramp along an axis, radial distance
    from a center, or piecewise-constant on named sub-boxes."""

    kind: str = "uniform"
    axis: int = 0
    offset: float = 0.0
    slope: float = 1.0
    center: tuple = ()
    pieces: tuple = ()  # ((name, lo, hi, value), ...)

    def __call__(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.kind == "uniform":
            vals = np.ones(len(pts))
        elif self.kind == "ramp":
            vals = self.offset + self.slope * pts[:, self.axis]
        elif self.kind == "radial":
            c = np.asarray(self.center, dtype=float)
            vals = self.offset + self.slope * np.linalg.norm(pts - c, axis=1)
        elif self.kind == "piecewise":
            vals = np.zeros(len(pts))
            for name, lo, hi, value in self.pieces:
                lo = np.asarray(lo, dtype=float)
                hi = np.asarray(hi, dtype=float)
                inside = np.all((pts >= lo) & (pts <= hi), axis=1)
                vals = np.where(inside, float(value), vals)
        else:
            raise ValueError("unknown density kind %r" % self.kind)
        if np.any(vals < 0):
            raise ValueError("negative density value")
        return vals

    def to_json(self):
        return {
            "kind": self.kind,
            "axis": self.axis,
            "offset": self.offset,
            "slope": self.slope,
            "center": list(self.center),
            "pieces": [[n, list(lo), list(hi), v] for n, lo, hi, v in self.pieces],
        }

    @classmethod
    def from_json(cls, doc):
        return cls(
            kind=doc.get("kind", "uniform"),
            axis=int(doc.get("axis", 0)),
            offset=float(doc.get("offset", 0.0)),
            slope=float(doc.get("slope", 1.0)),
            center=tuple(doc.get("center", ())),
            pieces=tuple(
                (p[0], tuple(p[1]), tuple(p[2]), float(p[3]))
                for p in doc.get("pieces", ())
            ),
        )


@dataclass(frozen=True)
class GridSpec:
    """Axis-aligned box plus a density and a per-axis resolution."""

    lo: tuple
    hi: tuple
    density: DensitySpec = field(default_factory=DensitySpec)
    resolution: int = 16

    def cell_centers(self):
        lo = np.asarray(self.lo, dtype=float)
        hi = np.asarray(self.hi, dtype=float)
        d = len(lo)
        if not (1 <= d <= MAX_DIMENSION):
            raise ValueError("dimension must be in 1..%d" % MAX_DIMENSION)
        r = int(self.resolution)
        axes = [lo[k] + (hi[k] - lo[k]) * (np.arange(r) + 0.5) / r for k in range(d)]
        grids = np.meshgrid(*axes, indexing="ij")
        centers = np.stack([g.ravel() for g in grids], axis=1)
        cell_volume = float(np.prod((hi - lo) / r))
        return centers, cell_volume

    def build(self, atom_cap=DEFAULT_ATOM_CAP):
        return grid_discretize(
            (self.lo, self.hi), self.density, self.resolution, atom_cap=atom_cap
        )

    def power_target(self, exponent):
        """Normalized measure with cell masses (density ** exponent) * volume."""
        centers, vol = self.cell_centers()
        vals = self.density(centers) ** float(exponent) * vol
        total = vals.sum()
        if total <= 0:
            raise ValueError("degenerate density")
        keep = vals > 0
        return DiscreteMeasure(centers[keep], vals[keep] / total)

    def to_json(self):
        return {
            "lo": list(self.lo),
            "hi": list(self.hi),
            "density": self.density.to_json(),
            "resolution": int(self.resolution),
        }

    @classmethod
    def from_json(cls, doc):
        return cls(
            lo=tuple(doc["lo"]),
            hi=tuple(doc["hi"]),
            density=DensitySpec.from_json(doc.get("density", {})),
            resolution=int(doc.get("resolution", 16)),
        )


def grid_discretize(box, density, resolution, atom_cap=DEFAULT_ATOM_CAP):
    """One atom per cell center, mass = density(center) * cell volume,
    normalized to total mass 1. Deterministic."""
    lo, hi = (np.asarray(b, dtype=float) for b in box)
    if int(resolution) < 2:
        raise ValueError("resolution must be >= 2")
    spec = GridSpec(tuple(lo), tuple(hi), density, int(resolution))
    if int(resolution) ** len(lo) > atom_cap:
        raise ValueError("discretization budget exceeded")
    centers, vol = spec.cell_centers()
    vals = density(centers) * vol
    total = vals.sum()
    if total <= 0:
        raise ValueError("degenerate density")
    keep = vals > 0
    return DiscreteMeasure(centers[keep], vals[keep] / total)


# ---------------------------------------------------------------------------
# Ahlfors regularity estimation


@dataclass(frozen=True)
class AhlforsEstimate:
    c_A: float
    C_A: float
    radii_sampled: tuple
    support_diameter: float

    def __post_init__(self):
        if not self.radii_sampled:
            raise ValueError("no radii sampled")
        if self.c_A > self.C_A:
            raise ValueError("c_A > C_A")


def cell_scale(measure):
    """Median nearest-neighbor spacing of the atoms."""
    tree = cKDTree(measure.points)
    dists, _ = tree.query(measure.points, k=2)
    return float(np.median(dists[:, 1]))


def ahlfors_constants(measure, radius_count=8, sample_count=64, seed=0):
    """Estimate c_A, C_A with nu(B_r(x)) / r^d over sampled atoms and
    geometrically spaced radii in [2 * cell scale, diameter]."""
    if measure.n_atoms < 2:
        raise ValueError("need at least 2 atoms")
    d = measure.dimension
    diam = measure.diameter()
    r_min = 2.0 * cell_scale(measure)
    r_max = diam
    if r_min >= r_max:
        r_min = 0.5 * r_max
    radii = np.geomspace(r_min, r_max, int(radius_count))
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0xA51F]))
    n = measure.n_atoms
    if n <= sample_count:
        idx = np.arange(n)
    else:
        idx = np.sort(rng.choice(n, size=int(sample_count), replace=False))
    tree = cKDTree(measure.points)
    lo, hi = np.inf, -np.inf
    for i in idx:
        x = measure.points[i]
        dists = np.linalg.norm(measure.points - x, axis=1)
        for r in radii:
            ratio = measure.masses[dists <= r].sum() / r**d
            lo = min(lo, ratio)
            hi = max(hi, ratio)
    del tree
    return AhlforsEstimate(float(lo), float(hi), tuple(float(r) for r in radii), diam)


# ---------------------------------------------------------------------------
# exact W1 (transportation LP, HiGHS dual simplex -> vertex-exact cost)


def w1_distance(mu, nu, atom_cap=DEFAULT_W1_CAP):
    """Exact optimal-transport cost between mu and nu with Euclidean ground
    cost. Raises on mass mismatch or oversize instances."""
    if mu.dimension != nu.dimension:
        raise ValueError("dimension mismatch")
    if abs(mu.total_mass - nu.total_mass) > 1e-9:
        raise ValueError("unbalanced")
    if mu.n_atoms + nu.n_atoms > atom_cap:
        raise ValueError("instance too large for exact W1")
    cost = np.linalg.norm(
        mu.points[:, None, :] - nu.points[None, :, :], axis=2
    )
    n, m = mu.n_atoms, nu.n_atoms
    if n == 1:
        return float(np.dot(cost[0], nu.masses))
    if m == 1:
        return float(np.dot(cost[:, 0], mu.masses))
    # transportation LP: rows = supplies + demands (one dropped, redundant)
    rows, cols, vals = [], [], []
    for i in range(n):
        rows.extend([i] * m)
        cols.extend(range(i * m, (i + 1) * m))
        vals.extend([1.0] * m)
    for j in range(m - 1):
        rows.extend([n + j] * n)
        cols.extend(range(j, n * m, m))
        vals.extend([1.0] * n)
    a_eq = sparse.csr_matrix(
        (vals, (rows, cols)), shape=(n + m - 1, n * m)
    )
    b_eq = np.concatenate([mu.masses, nu.masses[:-1]])
    res = linprog(cost.ravel(), A_eq=a_eq, b_eq=b_eq, method="highs-ds")
    if not res.success:
        raise RuntimeError("W1 LP failed: %s" % res.message)
    return max(float(res.fun), 0.0)
