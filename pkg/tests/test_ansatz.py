import math

import mpmath
import numpy as np
import pytest

from plasma_peaks.ansatz import (ansatz_energy, build_ansatz, calibrate_T, discrete_energy,
                                 error_term, expansion_constants, locate_peaks,
                                 reduced_energy, reduced_energy_expansion, solve_amplitudes,
                                 verify_level_sets)
from plasma_peaks.domain import DomainModel, ScalarField
from plasma_peaks.errors import EpsilonTooLargeError, PlasmaPeaksError
from plasma_peaks.greens import GreensTable
from plasma_peaks.routh import PeakConfig, minimize_hamiltonian
from plasma_peaks.specfun import bessel_constants

S = 2.404825557695773


@pytest.fixture(scope="module")
def tbl():
    return GreensTable(DomainModel.disk(grid_n=257))


@pytest.fixture(scope="module")
def Zmin(tbl):
    return minimize_hamiltonian(tbl, 0.5)[0]


@pytest.fixture(scope="module")
def ans(tbl, Zmin):
    return build_ansatz(tbl, Zmin, 0.5, 0.08)


def test_amplitudes_disk_elimination(tbl):
    Z = PeakConfig((0.0, 0.0), (0.6, 0.0))
    A = solve_amplitudes(tbl, Z, 0.5, 0.01)
    L = math.log(2.2 / (S * 0.01))
    assert A.log_factor == pytest.approx(L, rel=1e-14)
    assert L == pytest.approx(4.516150, abs=1e-6)
    h1, h2, G = math.log(2.2), math.log(2.2) - math.log(0.64), math.log(1 / 0.6)
    M = np.array([[1 - h1 / L, -G / L], [-G / L, 1 - h2 / L]])
    a = np.linalg.solve(M, [1.0, 0.5])
    assert (A.a1, A.a2) == pytest.approx(tuple(a), rel=1e-12)
    assert A.asymptotic_regime


def test_amplitudes_tend_to_levels(tbl, Zmin):
    errs = []
    for eps in (1e-2, 1e-4, 1e-8):
        A = solve_amplitudes(tbl, Zmin, 0.5, eps)
        errs.append(abs(A.a1 - 1) + abs(A.a2 - 0.5))
    assert errs[0] > errs[1] > errs[2]


def test_amplitudes_epsilon_too_large(tbl):
    with pytest.raises(EpsilonTooLargeError):
        solve_amplitudes(tbl, PeakConfig((0.0, 0.0), (0.6, 0.0)), 0.5, 0.5)


def test_peak_values(ans):
    k = ans.k
    A = ans.amps
    W1, W2 = ans.evaluate(np.array([ans.Z.z1, ans.Z.z2]))
    assert W1 == pytest.approx(1 + A.a1 * k, abs=1e-12)
    assert W2 == pytest.approx(-0.5 - A.a2 * k, abs=1e-12)


def test_boundary_zero_and_positivity(ans):
    p, _ = ans.tbl.domain.boundary_point(np.linspace(0, 1, 32, endpoint=False))
    assert np.max(np.abs(ans.evaluate(p))) <= 1e-12
    c1, _ = ans.cells
    from plasma_peaks.ansatz import project_bubble
    assert project_bubble(ans.tbl, c1).values.min() >= 0.0


def test_projection_continuous_across_core(ans):
    z = np.array(ans.Z.z1)
    rc = ans.core_radius
    e = np.array([0.6, 0.8])
    inside, outside = ans.evaluate(np.array([z + rc * (1 - 1e-12) * e, z + rc * (1 + 1e-12) * e]))
    assert inside == pytest.approx(outside, abs=1e-10)


def test_closed_form_identity(ans):
    assert ans.closed_form_discrepancy() <= 1e-10


def test_level_sets(ans):
    rep = verify_level_sets(ans)
    assert rep["passed"]
    assert rep["radii_within_bands"]
    T, _ = calibrate_T(ans)
    assert rep["T"] == T


def test_error_term_vanishes_away_from_peaks(ans):
    ell = error_term(ans.W, ans.gamma, ans.epsilon)
    grid = ans.tbl.grid
    X, Y = grid.coords()
    far = grid.regular_mask()
    for z in (ans.Z.z1, ans.Z.z2):
        far &= np.hypot(X - z[0], Y - z[1]) > 2 * ans.core_radius
    # W is harmonic there; what remains is the O(h²) truncation of the stencil
    assert np.max(np.abs(ell.values[far])) <= grid.h ** 2


def test_discrete_energy_small_field(tbl):
    grid = tbl.grid
    assert discrete_energy(ScalarField(grid, np.zeros(grid.inside.shape)), 0.5, 0.05) == 0.0
    X, Y = grid.coords()
    u = ScalarField(grid, np.where(grid.inside, 0.1 * (1 - X ** 2 - Y ** 2), 0.0))
    # only the Dirichlet part survives; ∫|∇u|² = 0.01 * 2π ∫ 4 r³ dr = 0.02π
    assert discrete_energy(u, 0.5, 0.05) == pytest.approx(0.5 * 0.05 ** 2 * 0.02 * math.pi,
                                                           rel=2e-2)


def test_expansion_constants():
    s = float(mpmath.besseljzero(0, 1))
    int_phi = float(mpmath.quad(lambda r: 2 * mpmath.pi * r * mpmath.besselj(0, r), [0, s]))
    int_phi2 = float(mpmath.quad(lambda r: 2 * mpmath.pi * r * mpmath.besselj(0, r) ** 2, [0, s]))
    A1, A2, A3 = expansion_constants(1.0, 0.5)
    assert A1 == pytest.approx(0.5 * int_phi, rel=1e-12)
    assert A1 == pytest.approx(3.9221501558, abs=1e-9)
    assert A3 == pytest.approx(0.625 * int_phi2, rel=1e-12)
    assert expansion_constants(0.5, 1.0) == (A1, A2, A3)
    c = bessel_constants()
    assert c.mass_phi1_sq == pytest.approx(4.8966443270, abs=1e-9)


def test_energy_matches_expansion(tbl, Zmin):
    # the k-linear expansion leaves a remainder of a few percent at most;
    # the k² term adds an O(ε² k²) remainder of its own
    for eps in (0.08, 0.04):
        a = build_ansatz(tbl, Zmin, 0.5, eps)
        iw = ansatz_energy(a)
        linear = reduced_energy_expansion(tbl, Zmin, 0.5, eps, include_k2_term=False)
        full = reduced_energy_expansion(tbl, Zmin, 0.5, eps)
        assert abs(iw - linear) <= 0.05 * abs(iw)
        assert abs(iw - full) > abs(iw - linear)


def test_reduced_energy_equals_two_term_expansion(tbl, Zmin):
    for eps in (0.08, 0.01):
        assert reduced_energy(tbl, Zmin, 0.5, eps) == pytest.approx(
            reduced_energy_expansion(tbl, Zmin, 0.5, eps, include_k2_term=False), rel=1e-12)


def test_locate_peaks_stays_on_axis(tbl, Zmin):
    shifts = []
    for eps in (0.04, 1e-3, 1e-5):
        Z = locate_peaks(tbl, Zmin, 0.5, eps)
        assert abs(Z.z1[1]) <= 1e-12 and abs(Z.z2[1]) <= 1e-12
        assert reduced_energy(tbl, Z, 0.5, eps) <= reduced_energy(tbl, Zmin, 0.5, eps)
        shifts.append(math.dist(Z.z1, Zmin.z1) * abs(math.log(eps)))
    # the located peaks approach the H_γ minimiser like 1/|ln ε|
    assert max(shifts) / min(shifts) < 1.5


def test_locate_peaks_swap_equivariant_gamma_one(tbl):
    Z = minimize_hamiltonian(tbl, 1.0)[0]
    a = locate_peaks(tbl, Z, 1.0, 0.04)
    b = locate_peaks(tbl, Z.swapped(), 1.0, 0.04)
    assert a.swapped() == b


def test_core_touching_boundary(tbl):
    with pytest.raises(PlasmaPeaksError):
        build_ansatz(tbl, PeakConfig((0.0, 0.0), (0.9, 0.0)), 0.5, 0.08)
