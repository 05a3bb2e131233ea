"""Kirchhoff-Routh type Hamiltonians and their minimisation over peak pairs.

    H_{a1,a2}(z1, z2) = a1² h(z1) + 2 a1 a2 Gbar(z1, z2) + a2² h(z2),
    H_γ = H_{1,γ}.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
import math

import numpy as np
from scipy.optimize import minimize

from .errors import ConfigurationError, ParameterError
from .greens import CLOSED_FORM, GRID_SOLVE

DEFAULT_STARTS = 16


@dataclass(frozen=True)
class PeakConfig:
    """Peak pair (z1, z2) with its separation margin ``delta``."""

    z1: tuple
    z2: tuple
    delta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "z1", (float(self.z1[0]), float(self.z1[1])))
        object.__setattr__(self, "z2", (float(self.z2[0]), float(self.z2[1])))

    def swapped(self):
        return PeakConfig(self.z2, self.z1, self.delta)

    def as_array(self):
        return np.array(self.z1 + self.z2)

    def violation(self, domain):
        """Reason the pair violates the margin constraints, or None."""
        z = np.array([self.z1, self.z2])
        if not np.all(domain.contains(z)):
            return "peak outside the domain"
        if np.any(domain.distance_to_boundary(z) < self.delta):
            return "peak closer than delta to the boundary"
        if math.dist(self.z1, self.z2) < max(self.delta, 1e-300):
            return "peaks closer than delta to each other"
        return None

    def validate(self, domain):
        why = self.violation(domain)
        if why:
            raise ConfigurationError(f"{why}: {self}")
        return self


def default_delta(tbl):
    return 3.0 * tbl.grid.h


def hamiltonian(tbl, Z, a1, a2):
    """H_{a1,a2}(z1, z2)."""
    if a1 < 0 or a2 < 0:
        raise ParameterError("amplitudes must be non-negative")
    Z.validate(tbl.domain)
    value = a1 * a1 * tbl.robin(Z.z1)
    if a2 != 0:
        value += 2.0 * a1 * a2 * float(tbl.green(np.array(Z.z2), Z.z1)) + a2 * a2 * tbl.robin(Z.z2)
    return float(value)


def hamiltonian_gradient(tbl, Z, a1, a2, step=None):
    """Central-difference gradient of H_{a1,a2} in (z1x, z1y, z2x, z2y), step 2h."""
    Z.validate(tbl.domain)
    step = 2.0 * tbl.grid.h if step is None else step
    base = Z.as_array()
    grad = np.empty(4)
    for k in range(4):
        e = np.zeros(4)
        e[k] = step
        vals = []
        for sgn in (1.0, -1.0):
            v = base + sgn * e
            # stencil points only need to stay inside the domain
            Zk = PeakConfig(tuple(v[:2]), tuple(v[2:]), tbl.grid.h)
            if Zk.violation(tbl.domain):
                raise ConfigurationError("gradient stencil leaves the feasible set")
            vals.append(hamiltonian(tbl, Zk, a1, a2))
        grad[k] = (vals[0] - vals[1]) / (2.0 * step)
    return grad


def _objective(tbl, gamma, delta):
    dom = tbl.domain

    def f(v):
        Z = PeakConfig(tuple(v[:2]), tuple(v[2:]), delta)
        if Z.violation(dom):
            return np.inf
        return hamiltonian(tbl, Z, 1.0, gamma)

    return f


def _lattice(tbl, delta, n_side=9):
    dom = tbl.domain
    xmin, xmax, ymin, ymax = dom.bounding_box()
    span = max(xmax - xmin, ymax - ymin)
    step = span / (n_side + 1)
    cx, cy = 0.5 * (xmin + xmax), 0.5 * (ymin + ymax)
    k = np.arange(-(n_side // 2), n_side // 2 + 1)
    pts = np.stack(np.meshgrid(cx + step * k, cy + step * k), axis=-1).reshape(-1, 2)
    pts = pts[dom.contains(pts)]
    return pts[dom.distance_to_boundary(pts) > max(2 * delta, step / 2)]


def seed_pairs(tbl, gamma, starts, delta):
    """Deterministic start pairs: best ``starts`` pairs of a coarse product lattice."""
    pts = _lattice(tbl, delta)
    if len(pts) < 2:
        raise ConfigurationError("no feasible start configurations")
    if tbl.method == GRID_SOLVE:
        tbl.solve_sources(pts)
    hv = np.array([tbl.robin(p) for p in pts])
    n = len(pts)
    G = np.full((n, n), np.inf)
    for i in range(n):
        others = np.arange(n) != i
        G[i, others] = tbl.green(pts[others], pts[i])
    H = hv[:, None] + 2 * gamma * G + gamma * gamma * hv[None, :]
    flat = np.argsort(H, axis=None, kind="stable")
    chosen = [divmod(int(k), n) for k in flat[:starts] if np.isfinite(H.flat[k])]
    if not chosen:
        raise ConfigurationError("no feasible start configurations")
    return [np.r_[pts[i], pts[j]] for i, j in chosen]


def _polish(f, x0, scale):
    simplex = [x0] + [x0 + scale * e for e in np.eye(4)]
    res = minimize(f, x0, method="Nelder-Mead",
                   options={"xatol": 1e-9, "fatol": 1e-13, "maxiter": 8000, "maxfev": 16000,
                            "initial_simplex": np.array(simplex)})
    # restart once from the result; simplex searches stall on curved valleys
    simplex = [res.x] + [res.x + 0.1 * scale * e for e in np.eye(4)]
    res2 = minimize(f, res.x, method="Nelder-Mead",
                    options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 8000, "maxfev": 16000,
                             "initial_simplex": np.array(simplex)})
    return res2 if res2.fun <= res.fun else res


def _canonical_disk(tbl, gamma, x, delta):
    """Rotate a disk minimiser so z2 lies on the positive x-axis, then re-polish on the axis."""
    c = np.asarray(tbl.domain.params["center"])
    z1, z2 = x[:2] - c, x[2:] - c
    ang = math.atan2(z2[1], z2[0])
    rot = np.array([[math.cos(ang), math.sin(ang)], [-math.sin(ang), math.cos(ang)]])
    z1, z2 = rot @ z1, rot @ z2
    f = _objective(tbl, gamma, delta)

    def f_axis(v):
        return f(np.array([v[0] + c[0], c[1], v[1] + c[0], c[1]]))

    v0 = np.array([z1[0], z2[0]])
    res = minimize(f_axis, v0, method="Nelder-Mead",
                   options={"xatol": 1e-12, "fatol": 1e-15, "maxiter": 4000,
                            "initial_simplex": np.array([v0, v0 + [0.01, 0], v0 + [0, 0.01]])})
    v = res.x if res.fun <= f_axis(v0) else v0
    return np.array([v[0] + c[0], c[1], v[1] + c[0], c[1]])


def minimize_hamiltonian(tbl, gamma, starts=DEFAULT_STARTS, seed=0, threads=1, warm_start=None,
                         delta=None):
    """Minimise H_γ over feasible pairs by multistart Nelder-Mead.

    Parameters
    ----------
    tbl : GreensTable
    gamma : float
        Negative-peak level, > 0.
    starts : int
        Number of lattice seeds (>= 4).
    seed : int
        Seeds the jitter added to every start.
    threads : int
        Parallel polishes.
    warm_start : PeakConfig, optional
        Extra start tried first (continuation along a sweep).
    delta : float, optional
        Feasibility margin, default three mesh widths.

    Returns
    -------
    (PeakConfig, float)
    """
    if not gamma > 0:
        raise ParameterError("gamma must be positive")
    if starts < 4:
        raise ParameterError("at least 4 starts are required")
    delta = default_delta(tbl) if delta is None else delta
    f = _objective(tbl, gamma, delta)
    rng = np.random.default_rng(seed)
    scale = tbl.domain.diam / 20
    x0s = []
    if warm_start is not None:
        x0s.append(warm_start.as_array())
    for x in seed_pairs(tbl, gamma, starts, delta):
        jitter = rng.uniform(-0.25, 0.25, size=4) * scale
        xj = x + jitter
        x0s.append(xj if np.isfinite(f(xj)) else x)
    if tbl.method == GRID_SOLVE or threads <= 1:
        results = [_polish(f, x0, scale) for x0 in x0s]
    else:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(lambda x0: _polish(f, x0, scale), x0s))
    finite = [r for r in results if np.isfinite(r.fun)]
    if not finite:
        raise ConfigurationError("no feasible configuration found")
    best_val = min(r.fun for r in finite)
    tied = [r for r in finite if r.fun <= best_val + 1e-12 * max(1.0, abs(best_val))]
    best = min(tied, key=lambda r: tuple(np.round(r.x, 9)))
    x = best.x
    if tbl.method == CLOSED_FORM:
        xc = _canonical_disk(tbl, gamma, x, delta)
        if f(xc) <= best.fun + 1e-12:
            x = xc
    Z = PeakConfig(tuple(x[:2]), tuple(x[2:]), delta)
    return Z, float(f(x))


def polish_configuration(tbl, gamma, start, delta=None):
    """Local minimisation of H_γ from a single start pair.

    Returns ``(PeakConfig, float)``; disk results are put in canonical
    orientation as in :func:`minimize_hamiltonian`.
    """
    if not gamma > 0:
        raise ParameterError("gamma must be positive")
    delta = default_delta(tbl) if delta is None else delta
    f = _objective(tbl, gamma, delta)
    x0 = start.as_array()
    if not np.isfinite(f(x0)):
        raise ConfigurationError(f"start pair infeasible: {start}")
    res = _polish(f, x0, tbl.domain.diam / 20)
    x, val = (res.x, res.fun) if res.fun <= f(x0) else (x0, f(x0))
    if tbl.method == CLOSED_FORM:
        xc = _canonical_disk(tbl, gamma, x, delta)
        if f(xc) <= val + 1e-12:
            x = xc
    return PeakConfig(tuple(x[:2]), tuple(x[2:]), delta), float(f(x))
