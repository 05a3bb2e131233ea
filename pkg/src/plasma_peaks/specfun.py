"""Bessel functions J0, J1 and the first Dirichlet eigenfunction of B_s(0).

``s`` is the first positive zero of J0, so that the first Dirichlet eigenvalue
of -Δ on the disk of radius ``s`` equals 1 and the eigenfunction normalised by
``phi1(0) = 1`` is ``J0(|x|)``.
"""

from dataclasses import dataclass
from functools import lru_cache
import math

import numpy as np

from . import _kernels
from .errors import DomainArgumentError

MAX_ARG = 50.0
SERIES_SWITCH = 12.0


def _asymptotic(x, order):
    # Hankel expansion, truncated at its smallest term; half of the first
    # omitted term is added, which roughly halves the truncation error
    mu = 4.0 * order * order
    pq = [0.0, 0.0]
    term = 1.0
    k = 0
    while True:
        pq[k % 2] += term if k % 4 < 2 else -term
        k += 1
        nxt = term * (mu - (2 * k - 1) ** 2) / (k * 8.0 * x)
        if abs(nxt) < 1e-18:
            break
        if abs(nxt) >= abs(term):
            pq[k % 2] += 0.5 * nxt if k % 4 < 2 else -0.5 * nxt
            break
        term = nxt
    p, q = pq
    chi = x - (0.5 * order + 0.25) * math.pi
    return math.sqrt(2.0 / (math.pi * x)) * (p * math.cos(chi) - q * math.sin(chi))


def _bessel(x, order):
    arr = np.asarray(x, dtype=np.float64)
    ax = np.abs(arr)
    if np.any(ax > MAX_ARG) or not np.all(np.isfinite(arr)):
        raise DomainArgumentError(f"Bessel argument outside |x| <= {MAX_ARG}")
    out = np.empty(arr.shape)
    small = ax <= SERIES_SWITCH
    if small.any():
        out[small] = _kernels.bessel_series(ax[small], order)
    if (~small).any():
        out[~small] = [_asymptotic(v, order) for v in ax[~small]]
    if order == 1:
        out = np.where(arr < 0, -out, out)
    if np.ndim(x) == 0:
        return float(out)
    return out


def bessel_j0(x):
    """J0(x) for |x| <= 50 (scalar or array)."""
    return _bessel(x, 0)


def bessel_j1(x):
    """J1(x) for |x| <= 50 (scalar or array)."""
    return _bessel(x, 1)


@lru_cache(maxsize=None)
def first_zero_j0():
    """First positive zero of J0, by Newton's method from 2.4."""
    s = 2.4
    for _ in range(50):
        step = bessel_j0(s) / bessel_j1(s)  # J0' = -J1
        s += step
        if abs(step) < 1e-16:
            break
    return s


def phi1(r):
    """Radial profile of the first eigenfunction on B_s(0), phi1(0) = 1."""
    r_arr = np.asarray(r, dtype=np.float64)
    s = first_zero_j0()
    if np.any(r_arr < 0) or np.any(r_arr > s * (1 + 1e-14)):
        raise DomainArgumentError("phi1 is defined on 0 <= r <= s")
    return bessel_j0(r)


def phi1_prime(r):
    return -bessel_j1(r)


@dataclass(frozen=True)
class BesselConstants:
    s: float
    phi1_prime_at_s: float
    mass_phi1: float
    mass_phi1_sq: float


@lru_cache(maxsize=None)
def bessel_constants():
    """Constants of the unit-eigenvalue ball, with closed-form masses.

    ∫_{B_s} phi1 = 2π s J1(s) and ∫_{B_s} phi1² = π s² J1(s)².
    """
    s = first_zero_j0()
    j1s = bessel_j1(s)
    return BesselConstants(
        s=s,
        phi1_prime_at_s=-j1s,
        mass_phi1=2.0 * math.pi * s * j1s,
        mass_phi1_sq=math.pi * s * s * j1s * j1s,
    )
