"""Two-peak approximate solutions W_ε = PU_1 - PU_2 and their diagnostics.

Amplitudes solve

    a1 (1 - h(z1)/L) - a2 Gbar(z1, z2)/L = 1
    a2 (1 - h(z2)/L) - a1 Gbar(z2, z1)/L = γ,      L = ln(R/(sε)),

so that the error term vanishes at both peak centres.  Projected bubbles are

    PU(x) = a [1 + k_ε phi1(|x - z|/ε) - g(x, z)/L]   in B_{sε}(z),
    PU(x) = (a/L) Gbar(x, z)                            elsewhere.
"""

from dataclasses import dataclass
import math

import numpy as np
from scipy.optimize import brentq

from .cellfn import CellParams, k_epsilon
from .domain import ScalarField
from .errors import EpsilonTooLargeError, GeometryError, ResolutionError
from .specfun import bessel_constants, bessel_j0

DET_MIN = 1e-8
LEVEL_SET_RAYS = 64


@dataclass(frozen=True)
class Amplitudes:
    """Solution of the amplitude system and the data it was built from."""

    a1: float
    a2: float
    epsilon: float
    log_factor: float
    determinant: float
    h1: float
    h2: float
    G12: float
    G21: float

    @property
    def asymptotic_regime(self):
        """True when L exceeds every Green entry by 1 (the regime the expansions assume)."""
        return self.log_factor > max(self.h1, self.h2, self.G12, self.G21) + 1.0


def log_factor(big_R, epsilon):
    return math.log(big_R / (bessel_constants().s * epsilon))


def solve_amplitudes(tbl, Z, gamma, epsilon):
    """Amplitudes (a1, a2) by direct solution of the 2x2 system."""
    if not epsilon > 0:
        raise EpsilonTooLargeError("epsilon must be positive")
    L_ = log_factor(tbl.big_R, epsilon)
    if L_ <= 0:
        raise EpsilonTooLargeError("s*epsilon must be below R")
    Z.validate(tbl.domain)
    h1 = tbl.robin(Z.z1)
    h2 = tbl.robin(Z.z2)
    G12 = float(tbl.green(np.array(Z.z1), Z.z2))  # source z2, evaluated at z1
    G21 = float(tbl.green(np.array(Z.z2), Z.z1))
    M = np.array([[1.0 - h1 / L_, -G12 / L_], [-G21 / L_, 1.0 - h2 / L_]])
    det = float(np.linalg.det(M))
    if det < DET_MIN:
        raise EpsilonTooLargeError(f"amplitude system near singular (det={det:.3e}); decrease epsilon")
    a1, a2 = np.linalg.solve(M, [1.0, gamma])
    if not (a1 > 0 and a2 > 0):
        raise EpsilonTooLargeError(f"non-positive amplitudes ({a1:.4g}, {a2:.4g}); decrease epsilon")
    return Amplitudes(float(a1), float(a2), float(epsilon), L_, det, h1, h2, G12, G21)


def _projected(tbl, p, x):
    """PU_{ε,a,z}(x) for points x (trailing axis 2)."""
    x = np.asarray(x, dtype=np.float64)
    z = p.center_z
    r = np.hypot(x[..., 0] - z[0], x[..., 1] - z[1])
    L_ = p.log_factor
    core = r < p.core_radius
    out = np.empty(r.shape)
    if core.any():
        xc = x[core]
        out[core] = p.amplitude_a * (1.0 + k_epsilon(p) * bessel_j0(r[core] / p.epsilon)
                                     - tbl.regular_part(xc, z) / L_)
    if (~core).any():
        out[~core] = p.amplitude_a / L_ * tbl.green(x[~core], z)
    return out


def _node_field(tbl, fn):
    grid = tbl.grid
    pts = grid.interior_points()
    return ScalarField(grid, grid.to_full(fn(pts)))


def project_bubble(tbl, p):
    """Grid field of PU for one bubble; zero at non-interior nodes."""
    if tbl.domain.distance_to_boundary(np.array(p.center_z)) <= p.core_radius or \
            not tbl.domain.contains(np.array(p.center_z)):
        raise GeometryError("bubble core touches the boundary")
    return _node_field(tbl, lambda x: _projected(tbl, p, x))


@dataclass
class Ansatz:
    """W_ε for a configuration, with pointwise evaluators and its grid field."""

    tbl: object
    Z: object
    gamma: float
    epsilon: float
    amps: Amplitudes
    W: ScalarField

    @property
    def cells(self):
        R = self.tbl.big_R
        return (CellParams(self.epsilon, self.amps.a1, self.Z.z1, R),
                CellParams(self.epsilon, self.amps.a2, self.Z.z2, R))

    @property
    def k(self):
        return k_epsilon(self.cells[0])

    @property
    def core_radius(self):
        return bessel_constants().s * self.epsilon

    def evaluate(self, x):
        c1, c2 = self.cells
        return _projected(self.tbl, c1, x) - _projected(self.tbl, c2, x)

    def closed_form(self, x):
        """Three-piece representation of W_ε in terms of values at the peak centres."""
        x = np.asarray(x, dtype=np.float64)
        tbl, A, L_, k = self.tbl, self.amps, self.amps.log_factor, self.k
        z1, z2 = self.Z.z1, self.Z.z2
        r1 = np.hypot(x[..., 0] - z1[0], x[..., 1] - z1[1])
        r2 = np.hypot(x[..., 0] - z2[0], x[..., 1] - z2[1])
        rc = self.core_radius
        in1 = r1 < rc
        in2 = r2 < rc
        out = np.empty(r1.shape)
        if in1.any():
            y = x[in1]
            out[in1] = (1.0 + A.a1 * k * bessel_j0(r1[in1] / self.epsilon)
                        + A.a1 * (A.h1 - tbl.regular_part(y, z1)) / L_
                        + A.a2 * (A.G12 - tbl.green(y, z2)) / L_)
        if in2.any():
            y = x[in2]
            out[in2] = (-self.gamma - A.a2 * k * bessel_j0(r2[in2] / self.epsilon)
                        - A.a2 * (A.h2 - tbl.regular_part(y, z2)) / L_
                        - A.a1 * (A.G21 - tbl.green(y, z1)) / L_)
        rest = ~(in1 | in2)
        if rest.any():
            y = x[rest]
            out[rest] = (A.a1 * tbl.green(y, z1) - A.a2 * tbl.green(y, z2)) / L_
        return out

    def closed_form_discrepancy(self):
        """Max over interior nodes of |assembled W - closed form|."""
        pts = self.tbl.grid.interior_points()
        return float(np.abs(self.W.interior() - self.closed_form(pts)).max())


def build_ansatz(tbl, Z, gamma, epsilon):
    amps = solve_amplitudes(tbl, Z, gamma, epsilon)
    rc = bessel_constants().s * epsilon
    for z in (Z.z1, Z.z2):
        if tbl.domain.distance_to_boundary(np.array(z)) <= rc:
            raise GeometryError("bubble core touches the boundary")
    if math.dist(Z.z1, Z.z2) <= 2 * rc:
        raise GeometryError("bubble cores overlap")
    ans = Ansatz(tbl, Z, gamma, epsilon, amps, None)
    ans.W = _node_field(tbl, ans.evaluate)
    return ans


def assemble_W(tbl, Z, gamma, epsilon):
    """W_ε = PU_1 - PU_2 on the grid (zero at non-interior nodes)."""
    return build_ansatz(tbl, Z, gamma, epsilon).W


# ---------------------------------------------------------------------------
# Level sets
# ---------------------------------------------------------------------------


def calibrate_T(ans, factor=1.2):
    """T = factor * max_i M_i s / a_i from the gradients of the harmonic corrections.

    M_i = a_i |∇_x g(z_i, z_i)| + a_j |∇_x Gbar(z_i, z_j)| bounds the slope of
    the correction that tilts W away from the radial profile inside the core.
    """
    tbl, A, Z = ans.tbl, ans.amps, ans.Z
    s = bessel_constants().s
    z1, z2 = np.array(Z.z1), np.array(Z.z2)
    M1 = A.a1 * np.linalg.norm(tbl.regular_part_gradient(z1, z1)) + \
        A.a2 * np.linalg.norm(tbl.green_gradient(z1, z2))
    M2 = A.a2 * np.linalg.norm(tbl.regular_part_gradient(z2, z2)) + \
        A.a1 * np.linalg.norm(tbl.green_gradient(z2, z1))
    return float(factor * max(M1 * s / A.a1, M2 * s / A.a2)), float(max(M1, M2))


def free_boundary_radii(ans, which, n_rays=LEVEL_SET_RAYS):
    """Radii along rays from z_i where W crosses 1 (i=1) or -γ (i=2)."""
    z = np.array(ans.Z.z1 if which == 1 else ans.Z.z2)
    sign, level = (1.0, 1.0) if which == 1 else (-1.0, ans.gamma)
    rc = ans.core_radius
    radii = np.empty(n_rays)
    for k in range(n_rays):
        th = 2 * math.pi * k / n_rays
        e = np.array([math.cos(th), math.sin(th)])

        def f(r):
            return sign * float(ans.evaluate((z + r * e)[None, :])[0]) - level

        lo, hi = 0.0, rc
        while f(hi) > 0:
            lo, hi = hi, hi * 1.25
        radii[k] = brentq(f, lo, hi, xtol=1e-14 * rc, rtol=1e-13)
    return radii


def verify_level_sets(ans, T=None, sigma=0.5):
    """Check the three level-set inclusions on every grid node.

    Returns a dict with ``inner_pos``, ``inner_neg``, ``outer`` booleans, the
    ball radii used, node counts, measured free-boundary radii and the
    exponent condition ``sigma < γ1/(2 γ2)`` of the asymptotic argument
    (reported, not enforced).
    """
    eps, gamma = ans.epsilon, ans.gamma
    if T is None:
        T, M = calibrate_T(ans)
    else:
        M = calibrate_T(ans)[1]
    rc = ans.core_radius
    r_in = rc * (1.0 - T * eps)
    r_out = rc * (1.0 + eps ** sigma)
    grid = ans.tbl.grid
    X, Y = grid.coords()
    W = ans.W.values
    report = {"T": T, "M": M, "sigma": sigma, "r_inner": r_in, "r_outer": r_out}
    dist = []
    for z in (ans.Z.z1, ans.Z.z2):
        dist.append(np.hypot(X - z[0], Y - z[1]))
    ball1 = (dist[0] < r_in) & grid.inside
    ball2 = (dist[1] < r_in) & grid.inside
    report["inner_nodes"] = [int(ball1.sum()), int(ball2.sum())]
    if r_in <= 0 or min(report["inner_nodes"]) < 8:
        raise ResolutionError(f"inner level-set ball unresolved (T*eps={T * eps:.3g}, "
                              f"nodes={report['inner_nodes']})")
    far = grid.inside & (dist[0] >= r_out) & (dist[1] >= r_out)
    report["inner_pos"] = bool(np.all(W[ball1] > 1.0))
    report["inner_neg"] = bool(np.all(-W[ball2] > gamma))
    report["outer"] = bool(np.all((W[far] > -gamma) & (W[far] < 1.0)))
    rad1 = free_boundary_radii(ans, 1)
    rad2 = free_boundary_radii(ans, 2)
    report["radius_pos"] = [float(rad1.min()), float(rad1.max())]
    report["radius_neg"] = [float(rad2.min()), float(rad2.max())]
    report["radii_within_bands"] = bool(rad1.min() > r_in and rad1.max() < r_out
                                        and rad2.min() > r_in and rad2.max() < r_out)
    g1 = min(0.5, gamma / 2)
    g2 = max(1.5, gamma + 0.5)
    report["sigma_condition"] = bool(sigma < g1 / (2 * g2))
    report["amplitudes_in_band"] = bool(all(g1 <= a <= g2 for a in (ans.amps.a1, ans.amps.a2)))
    report["passed"] = report["inner_pos"] and report["inner_neg"] and report["outer"]
    return report


# ---------------------------------------------------------------------------
# Error term and energies
# ---------------------------------------------------------------------------


def nonlinearity(u, gamma):
    return np.maximum(u - 1.0, 0.0) - np.maximum(-u - gamma, 0.0)


def error_term(W, gamma, epsilon):
    """ℓ = ε² Δ_h W + (W-1)_+ - (-W-γ)_+ at interior nodes (zero elsewhere)."""
    grid = W.grid
    w = W.interior()
    lap = -(grid.neg_laplacian() @ w)
    return ScalarField(grid, grid.to_full(epsilon ** 2 * lap + nonlinearity(w, gamma)))


def error_term_at_peaks(ans):
    """ℓ interpolated at z1 and z2."""
    ell = error_term(ans.W, ans.gamma, ans.epsilon)
    v = np.ravel(ell.at(np.array([ans.Z.z1, ans.Z.z2])))
    return ell, float(v[0]), float(v[1])


def discrete_energy(u, gamma, epsilon):
    """Discrete I_ε: (ε²/2) u.A.u - (1/2) Σ [(u-1)_+² + (-u-γ)_+²], times h².

    u.A.u is the link-weighted sum of squared differences, so this is the
    midpoint-rule Dirichlet energy whose critical points are exactly the
    solutions of the discrete equation used by the solver.
    """
    grid = u.grid
    v = u.interior()
    Av = grid.neg_laplacian() @ v
    mass = np.maximum(v - 1.0, 0.0) ** 2 + np.maximum(-v - gamma, 0.0) ** 2
    return float(grid.h ** 2 * (0.5 * epsilon ** 2 * v @ Av - 0.5 * mass.sum()))


energy = discrete_energy


def _gauss(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def core_integral(f, z, radius, n_r=64, n_theta=64):
    """∫_{B_radius(z)} f(x) dx by Gauss-Legendre in r and the trapezoid rule in θ."""
    t, w = _gauss(n_r)
    r = radius * t
    th = 2 * math.pi * np.arange(n_theta) / n_theta
    R_, TH = np.meshgrid(r, th, indexing="ij")
    pts = np.stack([z[0] + R_ * np.cos(TH), z[1] + R_ * np.sin(TH)], axis=-1)
    vals = f(pts.reshape(-1, 2)).reshape(R_.shape)
    return float(np.sum(vals * (R_ * radius * w[:, None])) * 2 * math.pi / n_theta)


def plasma_mass(ans, which, n_r=48, n_theta=128):
    """∫[(W-1)_+]² (which=1) or ∫[(-W-γ)_+]² (which=2) by polar quadrature to the level curve."""
    z = np.array(ans.Z.z1 if which == 1 else ans.Z.z2)
    sign, level = (1.0, 1.0) if which == 1 else (-1.0, ans.gamma)
    radii = free_boundary_radii(ans, which, n_theta)
    rc = ans.core_radius
    t, w = _gauss(n_r)
    total = 0.0
    for k in range(n_theta):
        th = 2 * math.pi * k / n_theta
        e = np.array([math.cos(th), math.sin(th)])
        rs = radii[k]
        # split at the core circle where W is only C^1
        pieces = [(0.0, min(rs, rc))] + ([(rc, rs)] if rs > rc else [])
        for a, b in pieces:
            r = a + (b - a) * t
            v = sign * ans.evaluate(z + r[:, None] * e) - level
            total += np.sum(np.maximum(v, 0.0) ** 2 * r * w) * (b - a)
    return total * 2 * math.pi / n_theta


def gradient_energy_parts(ans, n_r=64, n_theta=64):
    """Exact-quadrature ∫|∇PU_1|², ∫|∇PU_2|² and ∫∇PU_1.∇PU_2.

    Uses -Δ PU_i = (a_i k/ε²) phi1(|x - z_i|/ε) on the core and 0 elsewhere.
    """
    c1, c2 = ans.cells
    k, eps, rc = ans.k, ans.epsilon, ans.core_radius
    out = {}
    for name, ci, cj in (("11", c1, c1), ("22", c2, c2), ("12", c1, c2)):
        src = ci

        def f(x, src=src, cj=cj):
            r = np.hypot(x[:, 0] - src.center_z[0], x[:, 1] - src.center_z[1])
            return src.amplitude_a * k / eps ** 2 * bessel_j0(r / eps) \
                * _projected(ans.tbl, cj, x)

        out[name] = core_integral(f, src.center_z, rc, n_r, n_theta)
    return out


def ansatz_energy(ans, n_r=64, n_theta=64):
    """Continuous I_ε(W_ε) by quadrature on the cores and plasma sets."""
    parts = gradient_energy_parts(ans, n_r, n_theta)
    grad_sq = parts["11"] + parts["22"] - 2.0 * parts["12"]
    mass = plasma_mass(ans, 1) + plasma_mass(ans, 2)
    return 0.5 * ans.epsilon ** 2 * grad_sq - 0.5 * mass


def expansion_constants(a1, a2):
    c = bessel_constants()
    A1 = 0.5 * c.mass_phi1
    A2 = 0.5 * (a1 * a1 + a2 * a2) * c.mass_phi1
    A3 = 0.5 * (a1 * a1 + a2 * a2) * c.mass_phi1_sq
    return A1, A2, A3


def reduced_energy_expansion(tbl, Z, gamma, epsilon, include_k2_term=True):
    """-A1 (ε² k/L) H_{a1,a2} + ε² k A2 - ε² k² A3.

    With ``include_k2_term=False`` the last term is dropped: the k² parts of
    the Dirichlet energy and of the plasma masses cancel exactly, so the
    expansion without it has the smaller remainder.
    """
    from .routh import hamiltonian

    amps = solve_amplitudes(tbl, Z, gamma, epsilon)
    k = k_epsilon(CellParams(epsilon, amps.a1, Z.z1, tbl.big_R))
    H = hamiltonian(tbl, Z, amps.a1, amps.a2) if tbl.method == "closed-form-disk" else (
        amps.a1 ** 2 * amps.h1 + amps.a1 * amps.a2 * (amps.G12 + amps.G21) + amps.a2 ** 2 * amps.h2)
    A1, A2, A3 = expansion_constants(amps.a1, amps.a2)
    e2 = epsilon * epsilon
    value = -A1 * e2 * k / amps.log_factor * H + e2 * k * A2
    if include_k2_term:
        value -= e2 * k * k * A3
    return float(value)


def reduced_energy(tbl, Z, gamma, epsilon):
    """Leading-order reduced energy (ε² k ∫phi1 / 2)(a1 + γ a2).

    Equal to the expansion -A1 (ε² k/L) H_{a1,a2} + ε² k A2 by the amplitude
    system; its critical points locate the peaks of the true solution at
    finite ε.
    """
    amps = solve_amplitudes(tbl, Z, gamma, epsilon)
    k = k_epsilon(CellParams(epsilon, amps.a1, Z.z1, tbl.big_R))
    return 0.5 * epsilon ** 2 * k * bessel_constants().mass_phi1 * (amps.a1 + gamma * amps.a2)


def locate_peaks(tbl, Z, gamma, epsilon):
    """Local minimiser of :func:`reduced_energy` started from Z (Nelder-Mead).

    For γ = 1 the pair is processed in lexicographic order so that swapping
    the input swaps the output exactly.
    """
    from scipy.optimize import minimize

    from .routh import PeakConfig

    if gamma == 1.0 and Z.z1 > Z.z2:
        return locate_peaks(tbl, Z.swapped(), gamma, epsilon).swapped()
    rc = bessel_constants().s * epsilon

    def f(v):
        Zv = PeakConfig(tuple(v[:2]), tuple(v[2:]), Z.delta)
        if Zv.violation(tbl.domain) or math.dist(Zv.z1, Zv.z2) <= 2 * rc or \
                np.any(tbl.domain.distance_to_boundary(np.array([Zv.z1, Zv.z2])) <= rc):
            return np.inf
        try:
            return reduced_energy(tbl, Zv, gamma, epsilon)
        except EpsilonTooLargeError:
            return np.inf

    x0 = Z.as_array()
    if not np.isfinite(f(x0)):
        raise GeometryError("starting configuration infeasible for this epsilon")
    # on a disk the energy is rotation invariant; a pair collinear with the
    # centre stays on that line, so search only along it
    basis = np.eye(4)
    if tbl.domain.kind == "disk":
        c = np.asarray(tbl.domain.params["center"])
        d1, d2 = np.asarray(Z.z1) - c, np.asarray(Z.z2) - c
        if abs(d1[0] * d2[1] - d1[1] * d2[0]) <= 1e-12 * max(1.0, np.dot(d2, d2)):
            e = d2 / np.linalg.norm(d2) if np.linalg.norm(d2) > 0 else d1 / np.linalg.norm(d1)
            basis = np.array([[e[0], e[1], 0.0, 0.0], [0.0, 0.0, e[0], e[1]]])
    step = 0.02 * tbl.domain.diam

    def f_sub(w):
        return f(x0 + w @ basis)

    w0 = np.zeros(len(basis))
    simplex = np.array([w0] + [w0 + step * e for e in np.eye(len(basis))])
    scale = abs(f(x0))
    res = minimize(f_sub, w0, method="Nelder-Mead",
                   options={"xatol": 1e-10, "fatol": 1e-15 * scale, "maxiter": 20000,
                            "maxfev": 40000, "initial_simplex": simplex})
    v = x0 + res.x @ basis if res.fun <= f(x0) else x0
    return PeakConfig(tuple(v[:2]), tuple(v[2:]), Z.delta)
