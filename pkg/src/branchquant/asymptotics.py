"""N-sweeps and empirical scaling / uniformity / density law checks.

All "constant independent of N" statements are measured as bounded ratios
over desk-scale sweeps; nothing is compared against closed-form constants.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import pdist

from .landscape import holder_exponent
from .measures import DiscreteMeasure, w1_distance
from .quantizer import solve_quantization


@dataclass(frozen=True)
class ScalingReport:
    alpha: float
    d: int
    points: tuple  # ((N, cost), ...)
    fitted_slope: float
    fitted_intercept: float
    c_estimate: float
    r_squared: float

    def csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["N", "cost"])
        for n, c in self.points:
            w.writerow([n, repr(c)])
        w.writerow([])
        w.writerow(["slope", repr(self.fitted_slope)])
        w.writerow(["intercept", repr(self.fitted_intercept)])
        w.writerow(["c_estimate", repr(self.c_estimate)])
        w.writerow(["r_squared", repr(self.r_squared)])
        return buf.getvalue()


@dataclass(frozen=True)
class DeloneReport:
    rows: tuple  # (N, omega, delta, omega * N^(1/d), delta * N^(1/d))
    diameter: float

    def csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["N", "omega", "delta", "omega_scaled", "delta_scaled"])
        for row in self.rows:
            w.writerow([row[0]] + [repr(x) for x in row[1:]])
        return buf.getvalue()


@dataclass(frozen=True)
class DensityReport:
    exponent: float
    rows: tuple  # (N, w1 distance to the limit density)

    def csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["N", "w1_to_limit_density"])
        for n, dist in self.rows:
            w.writerow([n, repr(dist)])
        return buf.getvalue()


def sweep(nu, alpha, n_list, config, callback=None):
    """solve_quantization for each N, warm-starting from the previous one."""
    n_list = list(n_list)
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ValueError("N_list must be strictly increasing")
    out = []
    prev = None
    for n in n_list:
        q = solve_quantization(nu, n, alpha, config, warm_start=prev)
        out.append(q)
        prev = q
        if callback is not None:
            callback(n, q)
    return out


def scaling_fit(quantizers, n_list=None):
    """OLS on (log N, log cost); c_estimate = exp(intercept)."""
    if n_list is None:
        n_list = [q.n_sites for q in quantizers]
    pts = [(int(n), float(q.total_cost)) for n, q in zip(n_list, quantizers)]
    return scaling_fit_points(pts, alpha=quantizers[0].alpha,
                              d=quantizers[0].nu.dimension)


def scaling_fit_points(points, alpha=float("nan"), d=0):
    points = sorted((int(n), float(c)) for n, c in points)
    if len(points) < 3:
        raise ValueError("insufficient data")
    if len(set(n for n, _ in points)) != len(points):
        raise ValueError("N values must be distinct")
    logn = np.log([n for n, _ in points])
    logc = np.log([c for _, c in points])
    slope, intercept = np.polyfit(logn, logc, 1)
    pred = slope * logn + intercept
    ss_res = float(((logc - pred) ** 2).sum())
    ss_tot = float(((logc - logc.mean()) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return ScalingReport(
        alpha=float(alpha),
        d=int(d),
        points=tuple(points),
        fitted_slope=float(slope),
        fitted_intercept=float(intercept),
        c_estimate=float(np.exp(intercept)),
        r_squared=r2,
    )


def delone_constants(quantizer, support=None):
    """Covering radius over the sink cloud and site separation distance."""
    support = support or quantizer.nu
    sites = quantizer.sites
    kdt = cKDTree(sites)
    dmin, _ = kdt.query(support.points, k=1)
    omega = float(dmin.max())
    if len(sites) < 2:
        delta = float("inf")
    else:
        delta = float(pdist(sites).min())
    return omega, delta


def delone_report(quantizers, support=None):
    rows = []
    diam = (support or quantizers[0].nu).diameter()
    for q in quantizers:
        d = q.nu.dimension
        n = q.n_sites
        omega, delta = delone_constants(q, support)
        rows.append((n, omega, delta, omega * n ** (1.0 / d),
                     delta * n ** (1.0 / d) if np.isfinite(delta) else float("inf")))
    return DeloneReport(tuple(rows), diam)


def basin_stats(quantizer):
    """Per-basin rows (mass, diameter, mass/diam^d, cost, cost * N^(a+1/d))."""
    d = quantizer.nu.dimension
    n = quantizer.n_sites
    scale = n ** (quantizer.alpha + 1.0 / d)
    diam = quantizer.basin_diameters()
    rows = []
    for i, net in enumerate(quantizer.networks):
        mass = float(quantizer.masses[i])
        dd = float(diam[i])
        density = mass / dd**d if dd > 0 else float("inf")
        rows.append((mass, dd, density, float(net.cost), float(net.cost) * scale))
    return rows


def inner_outer_ball_check(quantizer):
    """Per-site (r_in * N^(1/d), r_out * N^(1/d), interior flag)."""
    nu = quantizer.nu
    d = nu.dimension
    n = quantizer.n_sites
    s = n ** (1.0 / d)
    lo = nu.points.min(axis=0)
    hi = nu.points.max(axis=0)
    rows = []
    for i in range(n):
        members = list(quantizer.basin_members[i])
        own = np.linalg.norm(nu.points[members] - quantizer.sites[i], axis=1)
        r_out = float(own.max())
        others = [j for j in range(nu.n_atoms) if quantizer.assignment[j] != i]
        if others:
            r_in = float(np.linalg.norm(
                nu.points[others] - quantizer.sites[i], axis=1
            ).min())
        else:
            r_in = float("inf")
        boundary_dist = float(min(
            (quantizer.sites[i] - lo).min(), (hi - quantizer.sites[i]).min()
        ))
        interior = boundary_dist > r_out
        rows.append((r_in * s if np.isfinite(r_in) else float("inf"),
                     r_out * s, interior))
    return rows


def site_cloud(quantizer):
    """Uniform measure on the quantizer's sites (equal weights)."""
    k = quantizer.n_sites
    return DiscreteMeasure(quantizer.sites, np.full(k, 1.0 / k))


def density_compare(quantizers, grid_spec, alpha, w1_cap=200_000):
    """W1 between the uniform site cloud and the Zador limit density
    nu^(alpha / (alpha + 1/d)), discretized on the same grid."""
    d = len(grid_spec.lo)
    exponent = alpha / (alpha + 1.0 / d)
    target = grid_spec.power_target(exponent)
    rows = []
    for q in quantizers:
        mu = site_cloud(q)
        rows.append((q.n_sites, w1_distance(mu, target, atom_cap=w1_cap)))
    return DensityReport(exponent, tuple(rows))


def energy_equidistribution(quantizer, regions):
    """Per-region N^(beta/d) * sum of z * mass over sinks in the region."""
    nu = quantizer.nu
    d = nu.dimension
    beta = holder_exponent(quantizer.alpha, d)
    scale = quantizer.n_sites ** (beta / d)
    z = quantizer.sink_z()
    out = []
    for lo, hi in regions:
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        inside = np.all((nu.points >= lo) & (nu.points <= hi), axis=1)
        out.append(float(scale * (z[inside] * nu.masses[inside]).sum()))
    return out
