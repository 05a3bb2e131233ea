import math

import numpy as np
import pytest

from plasma_peaks.cellfn import (CellParams, bubble, bubble_center_gradient, bubble_radial,
                                 cell_U, k_epsilon)
from plasma_peaks.errors import GeometryError, ParameterError, SingularityError
from plasma_peaks.specfun import bessel_constants

C = bessel_constants()
S = C.s


def params(eps=0.05, a=1.0, z=(0.0, 0.0), R=2.2):
    return CellParams(eps, a, z, R)


def test_cell_U_values():
    assert cell_U(np.array([0.0, 0.0])) == 1.0
    assert abs(cell_U(np.array([S, 0.0]))) <= 1e-12
    # log branch at |x| = s e: -s J1(s), mpmath value
    assert abs(cell_U(np.array([0.0, S * math.e])) + 1.24845916969550665) <= 1e-12


def test_cell_U_c1_across_s():
    d = 1e-6
    inner = (cell_U(np.array([S - d, 0.0])) - cell_U(np.array([S - 2 * d, 0.0]))) / d
    outer = (cell_U(np.array([S + 2 * d, 0.0])) - cell_U(np.array([S + d, 0.0]))) / d
    assert abs(inner - outer) <= 1e-5


def test_k_epsilon_value():
    # 1/(s*phi1'(s)*ln(s*0.05/2.2)), mpmath: 0.27556471886995
    assert abs(k_epsilon(params()) - 0.275564718869949) <= 1e-12


def test_k_epsilon_monotone_and_limit():
    ks = [k_epsilon(params(eps=e)) for e in (0.1, 0.05, 0.025, 0.0125)]
    assert all(b < a for a, b in zip(ks, ks[1:]))
    limit = 1.0 / (S * abs(C.phi1_prime_at_s))
    scaled = [k_epsilon(params(eps=e)) * abs(math.log(e)) for e in 10.0 ** -np.arange(2, 7)]
    errs = [abs(v - limit) for v in scaled]
    assert all(b < a for a, b in zip(errs, errs[1:]))
    assert errs[-1] / limit < 0.1


@pytest.mark.parametrize("bad", [dict(eps=0.0), dict(a=-1.0), dict(R=0.1)])
def test_invariants(bad):
    with pytest.raises(ParameterError):
        params(**bad)


def test_bubble_special_values():
    p = params(a=0.7, z=(0.1, -0.2))
    k = k_epsilon(p)
    z = np.array(p.center_z)
    assert abs(bubble(p, z) - 0.7 * (1 + k)) <= 1e-14
    assert abs(bubble(p, z + [p.big_R, 0.0])) <= 1e-14
    rc = p.core_radius
    r = np.array([rc])
    assert abs(bubble_radial(p, r)[0] - 0.7) <= 1e-13
    outer_val = 0.7 / p.log_factor * math.log(p.big_R / rc)
    assert abs(outer_val - 0.7) <= 1e-13


def test_bubble_outside_R():
    p = params()
    with pytest.raises(GeometryError):
        bubble(p, np.array([2.3, 0.0]))


def test_bubble_scaling_exact():
    x = np.random.default_rng(1).uniform(-1, 1, size=(200, 2))
    np.testing.assert_array_equal(bubble(params(a=2.0), x), 2.0 * bubble(params(a=1.0), x))


def test_bubble_c1_at_core_radius():
    p = params()
    rc = p.core_radius
    k = k_epsilon(p)
    # analytic one-sided radial derivatives
    inner = p.amplitude_a * k * C.phi1_prime_at_s / p.epsilon
    outer = -p.amplitude_a / (p.log_factor * rc)
    assert abs(inner - outer) <= 1e-10 * abs(outer)


def test_bubble_pde_residual():
    p = params(eps=0.1)
    away_max, band_max = [], []
    for h in (0.02, 0.01, 0.005):
        n = int(round(1.2 / h))
        g = np.arange(-n, n + 1) * h
        X, Y = np.meshgrid(g, g)
        U = bubble(p, np.stack([X, Y], axis=-1))
        lap = (U[1:-1, 2:] + U[1:-1, :-2] + U[2:, 1:-1] + U[:-2, 1:-1] - 4 * U[1:-1, 1:-1]) / h ** 2
        res = p.epsilon ** 2 * lap + np.maximum(U[1:-1, 1:-1] - p.amplitude_a, 0)
        r = np.hypot(X, Y)[1:-1, 1:-1]
        away = np.abs(r - p.core_radius) > 2 * h
        away_max.append(np.abs(res[away]).max() / h ** 2)
        band_max.append(np.abs(res[~away]).max() / h)
    # second order off the free boundary, first order in the band around it
    assert max(away_max) <= 3.0 and max(away_max) / min(away_max) <= 1.05
    assert max(band_max) <= 0.5


def test_gradient_at_center_and_singularity():
    p = params(z=(0.3, 0.2))
    g = bubble_center_gradient(p, np.array([0.3, 0.2]))
    assert np.array_equal(g, np.zeros(2))


def test_gradient_outer_branch_singularity(monkeypatch):
    # x = z reaches the outer branch only through a degenerate core radius
    p = params()
    monkeypatch.setattr(CellParams, "core_radius", property(lambda self: 0.0))
    with pytest.raises(SingularityError):
        bubble_center_gradient(p, np.array([0.0, 0.0]))


@pytest.mark.parametrize("radius_factor", [0.5, 2.0])
def test_gradient_finite_difference(radius_factor):
    p = params(eps=0.05, a=0.8, z=(0.1, 0.05))
    x = np.array(p.center_z) + radius_factor * p.core_radius * np.array([0.6, 0.8])
    d = 1e-6
    fd = np.empty(2)
    for i in range(2):
        zp, zm = list(p.center_z), list(p.center_z)
        zp[i] += d
        zm[i] -= d
        fd[i] = (bubble(CellParams(p.epsilon, p.amplitude_a, zp, p.big_R), x)
                 - bubble(CellParams(p.epsilon, p.amplitude_a, zm, p.big_R), x)) / (2 * d)
    np.testing.assert_allclose(bubble_center_gradient(p, x), fd, rtol=1e-7, atol=1e-8)


def test_gradient_branches_match_at_core_radius():
    p = params()
    rc = p.core_radius
    x_in = np.array([rc * (1 - 1e-12), 0.0])
    x_out = np.array([rc * (1 + 1e-12), 0.0])
    np.testing.assert_allclose(bubble_center_gradient(p, x_in), bubble_center_gradient(p, x_out),
                               rtol=1e-9)
