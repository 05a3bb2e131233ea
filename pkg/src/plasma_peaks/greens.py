"""Green's function with the 2π normalisation, its regular part and the Robin function.

    -Δ_x Gbar(x, z) = 2π δ_z in Ω,  Gbar = 0 on ∂Ω,
    Gbar(x, z) = ln(R/|x - z|) - g(x, z),   h(z) = g(z, z).

Two backends share one interface.  ``closed-form-disk`` uses the image
charge and is exact; ``grid-solve`` solves for g on the domain grid and
interpolates bilinearly.
"""

import math

import numpy as np
from scipy.optimize import minimize

from .domain import DomainModel, ScalarField, golden_section_min
from .errors import ConfigurationError, DegenerateDomainError, GeometryError, SingularityError

CLOSED_FORM = "closed-form-disk"
GRID_SOLVE = "grid-solve"


def _pts(x):
    return np.asarray(x, dtype=np.float64)


class GreensTable:
    """Cached evaluator for Gbar, g, h and the boundary normal derivative of Gbar.

    Parameters
    ----------
    domain : DomainModel
    method : str, optional
        ``"closed-form-disk"`` (default for disks) or ``"grid-solve"``.
    """

    def __init__(self, domain, method=None):
        if method is None:
            method = CLOSED_FORM if domain.kind == "disk" else GRID_SOLVE
        if method == CLOSED_FORM and domain.kind != "disk":
            raise ConfigurationError("closed-form Green's function needs a disk")
        if method not in (CLOSED_FORM, GRID_SOLVE):
            raise ConfigurationError(f"unknown Green method {method!r}")
        self.domain = domain
        self.method = method
        self.big_R = domain.big_R
        self._fields = {}

    @property
    def grid(self):
        return self.domain.grid

    @property
    def sources(self):
        return list(self._fields)

    # -- helpers ----------------------------------------------------------

    def _unit(self, x):
        c = self.domain.params["center"]
        rho = self.domain.params["radius"]
        x = _pts(x)
        return ((x[..., 0] - c[0]) + 1j * (x[..., 1] - c[1])) / rho

    def check_source(self, z, margin=None):
        z = _pts(z)
        margin = 2 * self.grid.h if margin is None else margin
        if not self.domain.contains(z) or self.domain.distance_to_boundary(z) <= margin:
            raise GeometryError(f"source {tuple(z)} not interior (margin {margin:.3g})")
        return z

    def field(self, z):
        """Regular part g(., z) as a ScalarField on the domain grid (cached)."""
        key = (float(z[0]), float(z[1]))
        if key not in self._fields:
            self.solve_sources([key])
        return self._fields[key]

    def solve_sources(self, zs, chunk=32):
        """Solve (or evaluate) the regular part for several sources at once."""
        pending = [(float(z[0]), float(z[1])) for z in zs]
        pending = [z for z in dict.fromkeys(pending) if z not in self._fields]
        grid = self.grid
        for z in pending:
            self.check_source(z)
        if self.method == CLOSED_FORM:
            X, Y = grid.coords()
            pts = np.stack([X, Y], axis=-1)
            for z in pending:
                self._fields[z] = ScalarField(grid, self._g_closed(pts, z))
            return
        for k in range(0, len(pending), chunk):
            block = np.asarray(pending[k:k + chunk])
            R = self.big_R

            def data(p, block=block):
                return np.log(R / np.hypot(p[:, 0:1] - block[None, :, 0], p[:, 1:2] - block[None, :, 1]))

            u, bvals = grid.solve_dirichlet(data)
            for j, z in enumerate(pending[k:k + chunk]):
                full = grid.to_full(u[:, j])
                self._fields[z] = ScalarField(grid, grid.ghost_fill(full, bvals[:, j]))

    def _g_closed(self, x, z):
        rho = self.domain.params["radius"]
        xu = self._unit(x)
        zu = self._unit(z)
        return math.log(self.big_R / rho) - np.log(np.abs(1.0 - xu * np.conj(zu)))

    # -- evaluations ------------------------------------------------------

    def regular_part(self, x, z):
        """g(x, z), vectorised over x."""
        if self.method == CLOSED_FORM:
            self.check_source(z, margin=0.0)
            return self._g_closed(x, z)
        return self.field(z).at(x)

    def green(self, x, z):
        """Gbar(x, z), vectorised over x; singular at x = z."""
        x = _pts(x)
        z = _pts(z)
        r = np.hypot(x[..., 0] - z[0], x[..., 1] - z[1])
        if np.any(r == 0):
            raise SingularityError("Green's function evaluated at its source")
        if self.method == CLOSED_FORM:
            self.check_source(z, margin=0.0)
            xu = self._unit(x)
            zu = self._unit(z)
            return np.log(np.abs(1.0 - xu * np.conj(zu)) / np.abs(xu - zu))
        return np.log(self.big_R / r) - self.field(z).at(x)

    def robin(self, z):
        """h(z) = g(z, z)."""
        z = _pts(z)
        if self.method == CLOSED_FORM:
            self.check_source(z, margin=0.0)
            rho = self.domain.params["radius"]
            return math.log(self.big_R / rho) - math.log(1.0 - abs(complex(self._unit(z))) ** 2)
        return float(np.ravel(self.field(z).at(z))[0])

    def regular_part_gradient(self, x, z):
        """∇_x g(x, z); analytic on the disk, centred differences (step h) otherwise."""
        x = _pts(x)
        if self.method == CLOSED_FORM:
            rho = self.domain.params["radius"]
            xu = self._unit(x)
            zu = self._unit(z)
            w = 1.0 - xu * np.conj(zu)
            # d/dx ln|w| = Re(w'/w) with w' = -conj(zu); d/dy uses w' = -i conj(zu)
            gx = -np.real(-np.conj(zu) / w) / rho
            gy = -np.real(-1j * np.conj(zu) / w) / rho
            return np.stack([gx, gy], axis=-1)
        step = self.grid.h
        e = np.array([step, 0.0])
        f = np.array([0.0, step])
        gx = (self.regular_part(x + e, z) - self.regular_part(x - e, z)) / (2 * step)
        gy = (self.regular_part(x + f, z) - self.regular_part(x - f, z)) / (2 * step)
        return np.stack([gx, gy], axis=-1)

    def green_gradient(self, x, z):
        """∇_x Gbar(x, z) for x ≠ z."""
        x = _pts(x)
        z = _pts(z)
        d = x - z
        r2 = np.sum(d * d, axis=-1)
        return -d / r2[..., None] - self.regular_part_gradient(x, z)

    def normal_derivative(self, z, t):
        """∂_ν Gbar(z, p(t)) with the outward normal ν, vectorised over t."""
        t = _pts(t)
        p, nu = self.domain.boundary_point(t)
        if self.method == CLOSED_FORM:
            self.check_source(z, margin=0.0)
            rho = self.domain.params["radius"]
            zu = complex(self._unit(z))
            pu = self._unit(p)
            return -(1.0 - abs(zu) ** 2) / (rho * np.abs(pu - zu) ** 2)
        delta = 2 * self.grid.h
        q1 = p - delta * nu
        q2 = p - 2 * delta * nu
        if not (np.all(self.domain.contains(q1)) and np.all(self.domain.contains(q2))):
            raise GeometryError("normal-derivative stencil leaves the domain")
        # second-order one-sided difference with Gbar = 0 at p
        f1 = self.green(q1, z)
        f2 = self.green(q2, z)
        return -(4.0 * f1 - f2) / (2.0 * delta)


def solve_regular_part(dom, z, method=GRID_SOLVE):
    """Grid field of g(., z) on ``dom``; see :class:`GreensTable`."""
    return GreensTable(dom, method).field(z)


def greens_value(tbl, x, z):
    return tbl.green(x, z)


def robin(tbl, z):
    return tbl.robin(z)


def boundary_normal_derivative(tbl, z, t):
    return tbl.normal_derivative(z, t)


def harmonic_center(tbl, spacing=None):
    """Minimiser of the Robin function: lattice scan, then Nelder-Mead polish.

    Returns ``(point, h_value)``.
    """
    dom = tbl.domain
    spacing = dom.diam / 40 if spacing is None else spacing
    margin = 2 * tbl.grid.h
    xmin, xmax, ymin, ymax = dom.bounding_box()
    cx, cy = 0.5 * (xmin + xmax), 0.5 * (ymin + ymax)
    kx = int((xmax - xmin) / (2 * spacing)) + 1
    ky = int((ymax - ymin) / (2 * spacing)) + 1
    xs = cx + spacing * np.arange(-kx, kx + 1)
    ys = cy + spacing * np.arange(-ky, ky + 1)
    cand = np.stack(np.meshgrid(xs, ys), axis=-1).reshape(-1, 2)
    keep = dom.contains(cand)
    cand = cand[keep]
    cand = cand[dom.distance_to_boundary(cand) > max(margin, spacing)]
    if len(cand) == 0:
        raise DegenerateDomainError("no harmonic-centre candidates away from the boundary")
    if tbl.method == GRID_SOLVE:
        tbl.solve_sources(cand)
    vals = np.array([tbl.robin(z) for z in cand])
    best = cand[int(np.argmin(vals))]

    def objective(z):
        if not dom.contains(z) or dom.distance_to_boundary(z) <= margin:
            return np.inf
        return tbl.robin(z)

    res = minimize(objective, best, method="Nelder-Mead",
                   options={"xatol": 1e-7, "fatol": 1e-12, "initial_simplex":
                            np.array([best, best + [spacing / 2, 0], best + [0, spacing / 2]])})
    z = res.x if res.fun <= vals.min() else best
    return (float(z[0]), float(z[1])), float(min(res.fun, vals.min()))


def boundary_extremizer(tbl, z):
    """Boundary points maximising ∂_ν Gbar(z, .) and |∂_ν Gbar(z, .)|.

    Returns a dict with the two points, their curve parameters and values,
    and a ``degenerate`` flag when the values are flat within 1e-6.
    """
    dom = tbl.domain
    t = dom.samples_t
    vals = tbl.normal_derivative(z, t)
    n = len(t)
    out = {"degenerate": bool(vals.max() - vals.min() <= 1e-6)}
    for name, sign in (("max", 1.0), ("max_abs", -1.0)):
        # sign=-1 on a negative function turns max |f| into max(-f)
        k = int(np.argmax(sign * vals))
        lo, hi = t[k] - 1.0 / n, t[k] + 1.0 / n

        def neg(tt, sign=sign):
            return -sign * float(tbl.normal_derivative(z, np.array([tt]))[0])

        tt = float(np.mod(golden_section_min(neg, lo, hi, tol=1e-10), 1.0))
        if -neg(tt) < sign * vals[k]:
            tt = float(t[k])
        p, _ = dom.boundary_point(np.array([tt]))
        out[name] = {"t": tt, "point": (float(p[0, 0]), float(p[0, 1])),
                     "value": float(tbl.normal_derivative(z, np.array([tt]))[0])}
    return out


def make_table(domain_spec=None, grid_n=257, r_factor=1.1, method=None):
    """Convenience constructor: unit disk unless a domain spec is given."""
    spec = domain_spec or {"type": "disk", "radius": 1.0}
    return GreensTable(DomainModel.from_spec(spec, grid_n, r_factor), method)
