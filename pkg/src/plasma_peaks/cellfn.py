"""Whole-plane cell function U and the rescaled bubbles U_{ε,a,z}.

Points are arrays with a trailing axis of length 2.
"""

from dataclasses import dataclass
import math

import numpy as np

from .errors import GeometryError, ParameterError, SingularityError
from .specfun import bessel_constants, bessel_j0, bessel_j1


@dataclass(frozen=True)
class CellParams:
    """Parameters (ε, a, z, R) of one bubble."""

    epsilon: float
    amplitude_a: float
    center_z: tuple
    big_R: float

    def __post_init__(self):
        s = bessel_constants().s
        if not self.epsilon > 0:
            raise ParameterError("epsilon must be positive")
        if not self.amplitude_a > 0:
            raise ParameterError("amplitude must be positive")
        if not self.big_R > s * self.epsilon:
            raise ParameterError("big_R must exceed s*epsilon")
        object.__setattr__(self, "center_z", (float(self.center_z[0]), float(self.center_z[1])))

    @property
    def core_radius(self):
        return bessel_constants().s * self.epsilon

    @property
    def log_factor(self):
        """L = ln(R / (s ε))."""
        return math.log(self.big_R / self.core_radius)


def _radius(x, z=(0.0, 0.0)):
    x = np.asarray(x, dtype=np.float64)
    return np.hypot(x[..., 0] - z[0], x[..., 1] - z[1])


def cell_U(x):
    """Basic cell function: phi1(|x|) inside B_s, s|phi1'(s)| ln(s/|x|) outside."""
    c = bessel_constants()
    r = _radius(x)
    inside = r < c.s
    out = np.empty(r.shape)
    out[inside] = bessel_j0(r[inside])
    with np.errstate(divide="ignore"):
        out[~inside] = c.s * abs(c.phi1_prime_at_s) * np.log(c.s / r[~inside])
    return out if out.ndim else float(out)


def k_epsilon(p):
    """k_ε = 1 / (s phi1'(s) ln(sε/R)), positive for R > sε."""
    c = bessel_constants()
    return 1.0 / (c.s * c.phi1_prime_at_s * math.log(c.s * p.epsilon / p.big_R))


def bubble_radial(p, r):
    """U_{ε,a} as a function of the distance r to the centre (r <= R)."""
    r = np.asarray(r, dtype=np.float64)
    a = p.amplitude_a
    rc = p.core_radius
    inner = r <= rc
    out = np.empty(r.shape)
    out[inner] = a * (1.0 + k_epsilon(p) * bessel_j0(r[inner] / p.epsilon))
    out[~inner] = a / p.log_factor * np.log(p.big_R / r[~inner])
    return out


def bubble(p, x):
    """U_{ε,a,z}(x); requires |x - z| <= R."""
    r = _radius(x, p.center_z)
    if np.any(r > p.big_R * (1 + 1e-14)):
        raise GeometryError("bubble evaluated outside B_R(z)")
    out = bubble_radial(p, r)
    return out if out.ndim else float(out)


def bubble_center_gradient(p, x):
    """∂U_{ε,a,z}(x)/∂z at frozen amplitude, shape ``x.shape``."""
    x = np.asarray(x, dtype=np.float64)
    zx = np.asarray(p.center_z) - x  # z - x
    r = np.hypot(zx[..., 0], zx[..., 1])
    rc = p.core_radius
    k = k_epsilon(p)
    a = p.amplitude_a
    inner = r < rc
    if np.any(~inner & (r == 0)):
        raise SingularityError("outer-branch gradient at x = z")
    coef = np.empty(r.shape)
    # phi1'(t)/t is smooth with limit -1/2 at t = 0; the unit vector times r vanishes there
    with np.errstate(invalid="ignore", divide="ignore"):
        coef[inner] = np.where(r[inner] > 0,
                               -k * a / p.epsilon * bessel_j1(r[inner] / p.epsilon) / r[inner],
                               0.0)
        coef[~inner] = -a / (p.log_factor * r[~inner] ** 2)
    return coef[..., None] * zx
