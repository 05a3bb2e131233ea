import math

import numpy as np
import pytest

from plasma_peaks.ansatz import calibrate_T, nonlinearity
from plasma_peaks.domain import DomainModel, ScalarField
from plasma_peaks.errors import ResolutionError
from plasma_peaks.greens import GreensTable
from plasma_peaks.routh import minimize_hamiltonian
from plasma_peaks.solver import (_smoothed, connected_components, extract_free_boundary, newton,
                                 plasma_eigenvalue, residual, solve_pde, vacuum_mask)
from plasma_peaks.specfun import first_zero_j0

S = first_zero_j0()
GAMMA, EPS = 0.5, 0.04


@pytest.fixture(scope="module")
def tbl():
    return GreensTable(DomainModel.disk(grid_n=257))


@pytest.fixture(scope="module")
def Zmin(tbl):
    return minimize_hamiltonian(tbl, GAMMA)[0]


@pytest.fixture(scope="module")
def res(tbl, Zmin):
    return solve_pde(tbl, Zmin, GAMMA, EPS)


def test_converged(res, tbl):
    A = tbl.grid.neg_laplacian()
    r = residual(A, res.u.interior(), GAMMA, EPS)
    assert np.max(np.abs(r)) <= 1e-10
    assert res.residual_norm <= 1e-10
    assert np.all(res.u.values[~tbl.grid.inside] == 0.0)
    assert not np.any(res.plasma_pos & res.plasma_neg)


def test_newton_tail_superlinear(res):
    hist = res.residual_history
    assert hist[-1] <= 0.5 * hist[-2]


def test_structure(res):
    assert connected_components(res.plasma_pos) == 1
    assert connected_components(res.plasma_neg) == 1
    assert connected_components(vacuum_mask(res.u, GAMMA)) == 1
    assert [p.closed for p in res.free_boundary_pos] == [True]
    assert [p.closed for p in res.free_boundary_neg] == [True]


def test_plasma_sets_near_peaks(res, tbl):
    X, Y = tbl.grid.coords()
    for mask, z in ((res.plasma_pos, res.Z_fit.z1), (res.plasma_neg, res.Z_fit.z2)):
        assert np.all(np.hypot(X[mask] - z[0], Y[mask] - z[1]) < 2 * S * EPS)


def test_free_boundary_area_in_bands(res):
    T, _ = calibrate_T(res.fitted_ansatz)
    rc = S * EPS
    lo, hi = math.pi * (rc * (1 - T * EPS)) ** 2, math.pi * (rc * (1 + EPS ** 0.5)) ** 2
    for curves in (res.free_boundary_pos, res.free_boundary_neg):
        assert lo < curves[0].area < hi


def test_correction_small(res):
    assert res.correction_norm <= res.seed_correction_norm
    assert res.correction_norm <= 2 * EPS / abs(math.log(EPS))


def test_eigenvalue_identity(res):
    assert EPS ** 2 * plasma_eigenvalue(res.u, 1.0, 1.0) == pytest.approx(1.0, abs=0.05)
    assert EPS ** 2 * plasma_eigenvalue(res.u, -GAMMA, -1.0) == pytest.approx(1.0, abs=0.05)


def test_eigenvalue_of_disk_set(tbl):
    grid = tbl.grid
    X, Y = grid.coords()
    eps = 0.05
    u = ScalarField(grid, np.where(grid.inside & (np.hypot(X, Y) < S * eps), 2.0, 0.0))
    # staircase approximation of B_{sε}; λ1 = 1/ε² up to the O(h) boundary error
    assert eps ** 2 * plasma_eigenvalue(u, 1.0, 1.0) == pytest.approx(1.0, abs=0.08)


def test_eigenvalue_needs_resolved_region(tbl):
    u = np.zeros(tbl.grid.inside.shape)
    u[128, 128] = 2.0
    with pytest.raises(ResolutionError):
        plasma_eigenvalue(ScalarField(tbl.grid, u), 1.0, 1.0)


def test_zero_seed_goes_to_trivial_branch(tbl):
    A = tbl.grid.neg_laplacian()
    u, *_ = newton(A, np.zeros(tbl.grid.n_interior), GAMMA, EPS)
    assert np.max(np.abs(u)) == 0.0


def test_resolution_guard(tbl, Zmin):
    with pytest.raises(ResolutionError):
        solve_pde(tbl, Zmin, GAMMA, 0.01)


def test_empty_sets(tbl):
    zero = ScalarField(tbl.grid, np.zeros(tbl.grid.inside.shape))
    assert extract_free_boundary(zero, 1.0) == []
    assert connected_components(np.zeros((5, 5), dtype=bool)) == 0


def test_smoothing_tends_to_nonlinearity():
    u = np.linspace(-3, 3, 601)
    for mu in (1e-2, 1e-4):
        f, _ = _smoothed(u, GAMMA, mu)
        assert np.max(np.abs(f - nonlinearity(u, GAMMA))) <= mu


@pytest.mark.slow
def test_gamma_one_antisymmetry(tbl):
    Z = minimize_hamiltonian(tbl, 1.0)[0]
    a = solve_pde(tbl, Z, 1.0, EPS)
    b = solve_pde(tbl, Z.swapped(), 1.0, EPS)
    assert np.max(np.abs(a.u.values + b.u.values)) <= 1e-8


@pytest.mark.slow
def test_mesh_refinement(res, Zmin):
    fine = GreensTable(DomainModel.disk(grid_n=513))
    r = solve_pde(fine, Zmin, GAMMA, EPS)
    assert abs(r.correction_norm - res.correction_norm) <= 0.2 * r.correction_norm
