import numpy as np
import pytest

from branchquant import asymptotics
from branchquant.asymptotics import (
    basin_stats,
    delone_constants,
    delone_report,
    density_compare,
    energy_equidistribution,
    inner_outer_ball_check,
    scaling_fit,
    scaling_fit_points,
    site_cloud,
    sweep,
)
from branchquant.landscape import holder_exponent
from branchquant.measures import DensitySpec, GridSpec, grid_discretize
from branchquant.quantizer import solve_quantization
from branchquant.solver import SolverConfig

LIGHT = SolverConfig(multistarts=2, basin_multistarts=1, reassign_rounds=2,
                     quant_rounds=3, site_perturbations=2, seed=0)


@pytest.fixture(scope="module")
def small_sweep():
    nu = grid_discretize(((0, 0), (1, 1)), DensitySpec(), 6)
    n_list = [1, 2, 4]
    return nu, n_list, sweep(nu, 0.85, n_list, LIGHT)


def test_planted_power_law_recovered():
    pts = [(n, float(n) ** -0.35) for n in (2, 4, 8, 16, 32)]
    rep = scaling_fit_points(pts, alpha=0.85, d=2)
    assert rep.fitted_slope == pytest.approx(-0.35, abs=1e-12)
    assert rep.r_squared == pytest.approx(1.0, abs=1e-12)
    assert rep.c_estimate == pytest.approx(1.0, rel=1e-9)


def test_scaling_fit_errors():
    with pytest.raises(ValueError, match="insufficient data"):
        scaling_fit_points([(1, 1.0), (2, 0.5)])
    with pytest.raises(ValueError, match="distinct"):
        scaling_fit_points([(2, 1.0), (2, 0.5), (4, 0.2)])


def test_sweep_costs_nonincreasing(small_sweep):
    nu, n_list, qs = small_sweep
    costs = [q.total_cost for q in qs]
    assert all(b <= a + 1e-9 for a, b in zip(costs, costs[1:]))


def test_sweep_rejects_nonincreasing_nlist():
    nu = grid_discretize(((0, 0), (1, 1)), DensitySpec(), 4)
    with pytest.raises(ValueError, match="strictly increasing"):
        sweep(nu, 0.85, [4, 2], LIGHT)


def test_sweep_single_entry():
    nu = grid_discretize(((0, 0), (1, 1)), DensitySpec(), 4)
    qs = sweep(nu, 0.85, [1], LIGHT)
    assert len(qs) == 1
    assert qs[0].n_sites == 1


def test_scaling_fit_from_sweep(small_sweep):
    nu, n_list, qs = small_sweep
    rep = scaling_fit(qs, n_list)
    assert rep.fitted_slope < 0
    assert rep.d == 2
    assert "slope" in rep.csv()


def test_delone_single_center_site():
    nu = grid_discretize(((0, 0), (1, 1)), DensitySpec(), 16)
    q = solve_quantization(nu, 1, 0.85, LIGHT)
    omega, delta = delone_constants(q)
    # covering radius is about the half-diagonal, shrunk by half a cell
    corner = nu.points.max(axis=0)
    assert omega <= np.sqrt(2) / 2
    assert omega >= np.linalg.norm(corner - [0.5, 0.5]) - 0.1
    assert delta == float("inf")


def test_delone_lattice_separation():
    nu = grid_discretize(((0, 0), (1, 1)), DensitySpec(), 4)
    # sites exactly on a k x k sublattice of cell centers
    q = solve_quantization(nu, nu.n_atoms, 0.85, LIGHT)  # sites = all atoms
    omega, delta = delone_constants(q)
    assert omega == pytest.approx(0.0, abs=1e-12)
    assert delta == pytest.approx(1 / 4, rel=1e-9)


def test_delone_report_rows(small_sweep):
    nu, n_list, qs = small_sweep
    rep = delone_report(qs)
    assert [r[0] for r in rep.rows] == n_list
    assert rep.rows[0][2] == float("inf")  # N=1 separation sentinel
    assert all(r[1] >= 0 for r in rep.rows)
    assert "omega_scaled" in rep.csv()


def test_basin_stats_single_basin():
    nu = grid_discretize(((0, 0), (1, 1)), DensitySpec(), 5)
    q = solve_quantization(nu, 1, 0.85, LIGHT)
    rows = basin_stats(q)
    assert len(rows) == 1
    mass, diam, density, cost, scaled = rows[0]
    assert mass == pytest.approx(1.0, abs=1e-12)
    assert diam == pytest.approx(nu.diameter(), rel=1e-9)
    assert cost == pytest.approx(q.total_cost, rel=1e-12)
    assert scaled == pytest.approx(cost, rel=1e-12)  # N = 1


def test_inner_outer_ball_single_site():
    nu = grid_discretize(((0, 0), (1, 1)), DensitySpec(), 5)
    q = solve_quantization(nu, 1, 0.85, LIGHT)
    rows = inner_outer_ball_check(q)
    assert len(rows) == 1
    r_in, r_out, interior = rows[0]
    assert r_in == float("inf")
    assert r_out > 0


def test_inner_outer_two_clusters():
    from branchquant.measures import DiscreteMeasure

    pts = np.array([[0.0, 0.0], [0.2, 0.0], [5.0, 0.0], [5.2, 0.0]])
    nu = DiscreteMeasure(pts, np.full(4, 0.25))
    q = solve_quantization(nu, 2, 0.85, LIGHT)
    rows = inner_outer_ball_check(q)
    s = 2 ** (1 / 2)
    for r_in, r_out, interior in rows:
        assert r_in >= (5.0 - 0.4) * s - 1e-9  # across the cluster gap
        assert r_out <= 0.2 * s + 1e-9


def test_site_cloud_uniform_weights(small_sweep):
    nu, n_list, qs = small_sweep
    mu = site_cloud(qs[-1])
    assert mu.n_atoms == qs[-1].n_sites
    assert np.allclose(mu.masses, 1.0 / qs[-1].n_sites)


def test_density_compare_baseline(small_sweep):
    nu, n_list, qs = small_sweep
    spec = GridSpec((0.0, 0.0), (1.0, 1.0), DensitySpec(), 6)
    rep = density_compare(qs, spec, 0.85)
    assert rep.exponent == pytest.approx(0.85 / 1.35, rel=1e-12)
    assert [r[0] for r in rep.rows] == [q.n_sites for q in qs]
    assert all(r[1] >= 0 for r in rep.rows)
    # more sites track the uniform limit density better
    assert rep.rows[-1][1] < rep.rows[0][1]


def test_energy_equidistribution_identity(small_sweep):
    nu, n_list, qs = small_sweep
    q = qs[-1]
    beta = holder_exponent(q.alpha, 2)
    whole = energy_equidistribution(q, [((0.0, 0.0), (1.0, 1.0))])[0]
    assert whole == pytest.approx(
        q.n_sites ** (beta / 2) * q.total_cost, rel=1e-9
    )


def test_energy_equidistribution_empty_region(small_sweep):
    nu, n_list, qs = small_sweep
    vals = energy_equidistribution(qs[-1], [((2.0, 2.0), (3.0, 3.0))])
    assert vals == [0.0]


def test_energy_halves_sum_to_whole(small_sweep):
    nu, n_list, qs = small_sweep
    q = qs[-1]
    left, right, whole = energy_equidistribution(
        q,
        [((0.0, 0.0), (0.5, 1.0)), ((0.5, 0.0), (1.0, 1.0)),
         ((0.0, 0.0), (1.0, 1.0))],
    )
    # the grid has no atom exactly on the split line, so halves partition
    assert left + right == pytest.approx(whole, rel=1e-12)
