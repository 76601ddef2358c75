import numpy as np
import pytest

from branchquant.measures import DensitySpec, DiscreteMeasure, grid_discretize
from branchquant.quantizer import (
    improve_sites,
    mass_optimal,
    partition_equivalence_check,
    solve_quantization,
)
from branchquant.solver import SolverConfig, solve_single_source

LIGHT = SolverConfig(multistarts=2, basin_multistarts=1, reassign_rounds=2,
                     quant_rounds=3, site_perturbations=2, seed=0)


def small_grid(res=6, kind="uniform"):
    return grid_discretize(((0, 0), (1, 1)), DensitySpec(kind), res)


def test_zero_cost_when_sites_cover_atoms():
    nu = small_grid(3)
    q = solve_quantization(nu, nu.n_atoms, 0.85, LIGHT)
    assert q.total_cost == pytest.approx(0.0, abs=1e-12)
    assert q.n_sites == nu.n_atoms
    q.validate()


def test_single_site_matches_direct_solve():
    nu = small_grid(4)
    q = solve_quantization(nu, 1, 0.85, LIGHT)
    assert q.n_sites == 1
    direct = solve_single_source(
        q.sites[0], nu.points, nu.masses, 0.85,
        SolverConfig(multistarts=LIGHT.basin_multistarts, seed=0),
    )
    assert q.total_cost == pytest.approx(direct.cost, rel=1e-9)
    q.validate()


def test_mass_optimal_partitions_and_validates():
    nu = small_grid(5)
    sites = np.array([[0.25, 0.25], [0.75, 0.75]])
    q = mass_optimal(sites, nu, 0.85, LIGHT)
    q.validate()
    assert q.n_sites == 2
    assert q.masses.sum() == pytest.approx(1.0, abs=1e-12)
    assert sorted(j for mem in q.basin_members for j in mem) == list(
        range(nu.n_atoms)
    )


def test_mass_optimal_dedupes_sites():
    nu = small_grid(4)
    sites = np.array([[0.5, 0.5], [0.5, 0.5], [0.1, 0.1]])
    q = mass_optimal(sites, nu, 0.85, LIGHT)
    assert q.n_sites == 2


def test_mass_optimal_never_worse_than_nearest_site_start():
    nu = small_grid(5)
    sites = np.array([[0.2, 0.5], [0.8, 0.5]])
    from branchquant.quantizer import _assemble

    dists = np.linalg.norm(nu.points[:, None, :] - sites[None, :, :], axis=2)
    baseline = _assemble(sites, np.argmin(dists, axis=1), nu, 0.85, LIGHT)
    q = mass_optimal(sites, nu, 0.85, LIGHT)
    assert q.total_cost <= baseline.total_cost + 1e-12


def test_improve_sites_does_not_increase_cost():
    nu = small_grid(5)
    q = mass_optimal(np.array([[0.3, 0.3], [0.7, 0.7]]), nu, 0.85, LIGHT)
    q2 = improve_sites(q, LIGHT)
    assert q2.total_cost <= q.total_cost + 1e-12
    q2.validate()


def test_partition_equivalence_check_zero_residual():
    nu = small_grid(5)
    q = solve_quantization(nu, 3, 0.85, LIGHT)
    assert partition_equivalence_check(q) <= 1e-9


def test_costs_decrease_with_more_sites():
    nu = small_grid(6)
    costs = []
    prev = None
    for n in (1, 2, 4):
        q = solve_quantization(nu, n, 0.85, LIGHT, warm_start=prev)
        costs.append(q.total_cost)
        prev = q
    assert costs[1] <= costs[0] + 1e-9
    assert costs[2] <= costs[1] + 1e-9


def test_determinism():
    nu = small_grid(5)
    a = solve_quantization(nu, 3, 0.85, LIGHT)
    b = solve_quantization(nu, 3, 0.85, LIGHT)
    assert a.dumps() == b.dumps()


def test_two_cluster_measure_splits_naturally():
    pts = np.vstack([
        np.array([[0.0, 0.0], [0.1, 0.0], [0.0, 0.1]]),
        np.array([[5.0, 5.0], [5.1, 5.0], [5.0, 5.1]]),
    ])
    nu = DiscreteMeasure(pts, np.full(6, 1 / 6))
    q = solve_quantization(nu, 2, 0.85, LIGHT)
    labels = {tuple(sorted(m)) for m in q.basin_members}
    assert labels == {(0, 1, 2), (3, 4, 5)}
    assert q.masses[0] == pytest.approx(0.5, abs=1e-12)


def test_json_dump_schema():
    nu = small_grid(4)
    q = solve_quantization(nu, 2, 0.85, LIGHT)
    doc = q.to_json()
    assert doc["N"] == q.n_sites
    assert len(doc["sites"]) == q.n_sites
    assert len(doc["assignment"]) == nu.n_atoms
    assert len(doc["per_basin"]) == q.n_sites
    assert doc["cost"] == pytest.approx(q.total_cost)


def test_errors():
    nu = small_grid(4)
    with pytest.raises(ValueError, match="N must be >= 1"):
        solve_quantization(nu, 0, 0.85, LIGHT)


def test_single_atom_target():
    nu = DiscreteMeasure([[0.3, 0.4]], [1.0])
    q = solve_quantization(nu, 1, 0.85, LIGHT)
    assert q.total_cost == pytest.approx(0.0, abs=1e-12)
    assert np.allclose(q.sites[0], [0.3, 0.4])
