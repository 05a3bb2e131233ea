import math

import numpy as np
import pytest

from plasma_peaks.domain import DomainModel
from plasma_peaks.errors import GeometryError, ParameterError
from plasma_peaks.greens import GreensTable
from plasma_peaks.routh import hamiltonian
from plasma_peaks.sweep import (gamma_sweep, reference_bound, separation_ok,
                                verify_boundary_expansion)

H = 1 / 128


@pytest.fixture(scope="module")
def tbl():
    return GreensTable(DomainModel.disk(grid_n=257))


@pytest.fixture(scope="module")
def records(tbl):
    return gamma_sweep(tbl, [0.5, 0.3, 0.2, 0.1, 0.05])


def test_sweep_trends(records):
    assert not any(r.error for r in records)
    d_c = [r.dist_to_center for r in records]
    assert all(b <= a + 2 * H for a, b in zip(d_c, d_c[1:]))
    assert d_c[-1] <= 0.05
    assert records[-1].dist_to_boundary <= 0.1


def test_records_consistent(tbl, records):
    for r in records:
        assert r.value == pytest.approx(hamiltonian(tbl, r.config, 1.0, r.gamma), abs=1e-12)
        assert math.hypot(*r.boundary_projection) == pytest.approx(1.0, abs=1e-9)
        assert r.nu_derivative_at_projection < 0
    assert [r.fresh_multistart for r in records] == [True, False, False, True, False]


def test_attracting_extremizer_recorded(records):
    last = records[-1]
    assert last.attracting in ("max", "max_abs", "max+max_abs")
    # on the disk z1 sits on the axis opposite z2, so the least negative
    # normal derivative is at the projection of z2
    assert math.dist(last.extremizers["max"]["point"], last.boundary_projection) <= 4 * H


def test_reference_bound(tbl, records):
    M, ref = reference_bound(tbl)
    assert ref.z1 == pytest.approx((0.0, 0.0), abs=1e-9)
    assert ref.z2 == pytest.approx((0.5, 0.0), abs=1e-9)
    assert M == pytest.approx(math.log(2.2) + 2 * math.log(2) + math.log(2.2) - math.log(0.75),
                              rel=1e-12)
    assert all(r.value <= M for r in records)
    assert separation_ok(records, tbl)
    assert all(tbl.domain.distance_to_boundary(np.array(r.z1_gamma)) > 0.5 for r in records)


def test_gamma_one_record(tbl):
    (r,) = gamma_sweep(tbl, [1.0])
    assert hamiltonian(tbl, r.config.swapped(), 1.0, 1.0) == pytest.approx(r.value, abs=1e-10)


def test_bad_gammas(tbl):
    with pytest.raises(ParameterError):
        gamma_sweep(tbl, [0.3, 0.5])
    with pytest.raises(ParameterError):
        gamma_sweep(tbl, [1.5])


def test_boundary_expansion_disk(tbl):
    rep = verify_boundary_expansion(tbl, (0.0, 0.0), (1.0, 0.0), [0.1, 0.05, 0.02, 0.01])
    assert rep["max_exact_error"] <= 1e-12
    # Gbar(0, x)/d = -ln(1 - d)/d → 1
    assert rep["normal_derivative"] == pytest.approx(-1.0)
    errs = rep["ratio_errors"]
    assert errs == sorted(errs, reverse=True) and errs[-1] <= 0.01
    # h + ln 2d → ln R for this normalisation
    assert rep["drift_intercept"] == pytest.approx(rep["log_R"], abs=5e-3)


def test_boundary_expansion_depth_range(tbl):
    with pytest.raises(GeometryError):
        verify_boundary_expansion(tbl, (0.0, 0.0), (1.0, 0.0), [0.5])
