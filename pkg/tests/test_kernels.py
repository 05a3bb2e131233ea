"""The numba and pure-numpy kernel paths must agree."""

import numpy as np
import pytest

from plasma_peaks import _kernels

needs_numba = pytest.mark.skipif(not _kernels.HAVE_NUMBA, reason="numba not installed")


@pytest.fixture
def both():
    """Run a callable under each backend and restore the original choice."""
    original = "numba" if _kernels.using_numba() else "numpy"

    def run(fn):
        out = {}
        for name in ("numpy", "numba"):
            _kernels.set_backend(name)
            out[name] = fn()
        return out["numpy"], out["numba"]

    yield run
    _kernels.set_backend(original)


def field(n=97):
    y, x = np.mgrid[-1:1:n * 1j, -1:1:n * 1j]
    return (2 * np.exp(-30 * ((x + 0.4) ** 2 + y ** 2)) - 2 * np.exp(-30 * ((x - 0.4) ** 2 + y ** 2))
            + 1.5 * np.exp(-60 * (x ** 2 + (y - 0.6) ** 2)))


@needs_numba
@pytest.mark.parametrize("order", [0, 1])
def test_bessel_series(both, order):
    x = np.linspace(0, 12, 1001)
    a, b = both(lambda: _kernels.bessel_series(x, order))
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-15)


@needs_numba
def test_label_components(both):
    mask = field() > 1.0
    (la, na), (lb, nb) = both(lambda: _kernels.label_components(mask))
    assert na == nb == 2
    # same partition, labels may be numbered differently
    pairs = set(zip(la[mask].tolist(), lb[mask].tolist()))
    assert len(pairs) == na


def test_label_components_counts():
    mask = np.zeros((10, 10), dtype=bool)
    mask[1:3, 1:3] = True
    mask[6:9, 6] = True
    mask[5, 0] = True
    mask[4, 1] = True  # diagonal neighbour of (5, 0): separate under 4-connectivity
    assert _kernels.label_components(mask)[1] == 4


@needs_numba
@pytest.mark.parametrize("level", [1.0, -0.5])
def test_march_segments(both, level):
    f = field()
    (sa, ia), (sb, ib) = both(lambda: _kernels.march_segments(f, level))
    assert len(sa) == len(sb) > 0
    order_a = np.lexsort(ia.T)
    order_b = np.lexsort(ib.T)
    np.testing.assert_array_equal(ia[order_a], ib[order_b])
    np.testing.assert_allclose(sa[order_a], sb[order_b], atol=1e-14)


def test_march_segment_endpoints_on_level():
    f = field()
    seg, _ = _kernels.march_segments(f, 1.0)
    for r, c in (seg[:, 0:2].T, seg[:, 2:4].T):
        # bilinear interpolation along a grid edge is linear
        r0, c0 = np.floor(r).astype(int), np.floor(c).astype(int)
        fr, fc = r - r0, c - c0
        val = np.where(fr > 0, f[r0, c0] * (1 - fr) + f[np.minimum(r0 + 1, f.shape[0] - 1), c0] * fr,
                       f[r0, c0] * (1 - fc) + f[r0, np.minimum(c0 + 1, f.shape[1] - 1)] * fc)
        np.testing.assert_allclose(val, 1.0, atol=1e-12)


@needs_numba
def test_bilinear(both):
    f = field()
    rng = np.random.default_rng(3)
    p = rng.uniform(-0.99, 0.99, size=(500, 2))
    h = 2.0 / 96
    a, b = both(lambda: _kernels.bilinear(f, -1.0, -1.0, h, p[:, 0], p[:, 1]))
    np.testing.assert_allclose(a, b, atol=1e-15)


def test_bilinear_exact_for_bilinear_functions():
    n = 33
    h = 1.0 / (n - 1)
    y, x = np.mgrid[0:1:n * 1j, 0:1:n * 1j]
    f = 2 + 3 * x - y + 0.5 * x * y
    p = np.random.default_rng(0).uniform(0, 1, size=(200, 2))
    got = _kernels.bilinear(f, 0.0, 0.0, h, p[:, 0], p[:, 1])
    np.testing.assert_allclose(got, 2 + 3 * p[:, 0] - p[:, 1] + 0.5 * p[:, 0] * p[:, 1], atol=1e-13)


def test_backend_switch_rejects_unknown():
    with pytest.raises(ValueError):
        _kernels.set_backend("fortran")
