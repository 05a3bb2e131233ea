"""Tracking the H_γ minimiser as γ → 0.

As γ decreases the positive peak moves to a harmonic centre and the
negative peak to the boundary.  :func:`gamma_sweep` follows the minimising
branch by continuation and records the distances involved, together with
the boundary points where ∂_ν Gbar(z1, .) is extremal.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from .errors import GeometryError, ParameterError, PlasmaPeaksError
from .greens import CLOSED_FORM, boundary_extremizer, harmonic_center
from .routh import (DEFAULT_STARTS, PeakConfig, hamiltonian,
                    minimize_hamiltonian, polish_configuration)

__all__ = ["SweepRecord", "gamma_sweep", "boundary_extremizer", "reference_bound",
           "verify_boundary_expansion", "separation_ok", "FRESH_EVERY"]

FRESH_EVERY = 3


@dataclass
class SweepRecord:
    """One γ of a sweep.  Numeric fields are NaN when ``error`` is set."""

    gamma: float
    z1_gamma: tuple = (math.nan, math.nan)
    z2_gamma: tuple = (math.nan, math.nan)
    value: float = math.nan
    dist_to_center: float = math.nan
    dist_to_boundary: float = math.nan
    boundary_projection: tuple = (math.nan, math.nan)
    nu_derivative_at_projection: float = math.nan
    extremizers: dict = field(default_factory=dict)
    attracting: str = ""
    fresh_multistart: bool = False
    branch_jump: bool = False
    extrapolated: bool = False
    error: str = ""

    @property
    def config(self):
        return PeakConfig(self.z1_gamma, self.z2_gamma)


def reference_bound(tbl, center=None):
    """Fixed upper bound M = h(zb1) + 2 Gbar(zb1, zb2) + h(zb2) for every γ ≤ 1.

    The reference pair is the harmonic centre and the point halfway from it
    to the boundary along +x.  Returns ``(M, PeakConfig)``.
    """
    if center is None:
        center, _ = harmonic_center(tbl)
    c = np.asarray(center, dtype=np.float64)
    e = np.array([1.0, 0.0])
    # bisect for the exit distance along +x
    lo, hi = 0.0, tbl.domain.diam
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if tbl.domain.contains(c + mid * e) else (lo, mid)
    zb2 = c + 0.5 * lo * e
    Z = PeakConfig(tuple(c), tuple(zb2))
    return hamiltonian(tbl, Z, 1.0, 1.0), Z


def _attracting(ext, projection, tol):
    """Which reported extremizer the boundary projection of z2 sits at."""
    if ext.get("degenerate"):
        return "degenerate"
    hits = [name for name in ("max", "max_abs")
            if math.dist(ext[name]["point"], projection) <= tol]
    return "+".join(hits) if hits else "none"


def gamma_sweep(tbl, gammas, starts=DEFAULT_STARTS, seed=0, threads=1, fresh_every=FRESH_EVERY,
                match_tol=None):
    """H_γ minimisers along a descending list of γ values.

    Parameters
    ----------
    tbl : GreensTable
    gammas : sequence of float
        Strictly descending values in (0, 1].
    starts, seed, threads :
        Passed to :func:`routh.minimize_hamiltonian`.
    fresh_every : int
        Every this many γ (starting with the first) a full multistart runs
        alongside the warm start; ``branch_jump`` marks records where it found
        a lower value than continuation alone.
    match_tol : float, optional
        Distance within which the projection of z2 counts as sitting at an
        extremizer; default four mesh widths.

    Returns
    -------
    list of SweepRecord
        Failures are recorded in ``error`` and the sweep continues.
    """
    gammas = [float(g) for g in gammas]
    if not gammas or any(not 0 < g <= 1 for g in gammas):
        raise ParameterError("gammas must lie in (0, 1]")
    if any(b >= a for a, b in zip(gammas, gammas[1:])):
        raise ParameterError("gammas must be strictly descending")
    h = tbl.grid.h
    match_tol = 4 * h if match_tol is None else match_tol
    center, _ = harmonic_center(tbl)
    records = []
    warm = None
    for i, g in enumerate(gammas):
        rec = SweepRecord(gamma=g, fresh_multistart=(warm is None or i % fresh_every == 0))
        try:
            cont = polish_configuration(tbl, g, warm) if warm is not None else None
            if rec.fresh_multistart:
                fresh = minimize_hamiltonian(tbl, g, starts=starts, seed=seed, threads=threads,
                                             warm_start=warm)
                if cont is not None and fresh[1] < cont[1] - 1e-9 * max(1.0, abs(cont[1])):
                    rec.branch_jump = True
                best = fresh if cont is None or fresh[1] <= cont[1] else cont
            else:
                best = cont
            Z, val = best
            z1, z2 = np.array(Z.z1), np.array(Z.z2)
            _, proj = tbl.domain.nearest_boundary(z2)
            proj = proj[0]
            t_proj, _ = tbl.domain.nearest_boundary(proj)
            ext = boundary_extremizer(tbl, Z.z1)
            rec.z1_gamma, rec.z2_gamma, rec.value = Z.z1, Z.z2, val
            rec.dist_to_center = float(math.dist(z1, center))
            rec.dist_to_boundary = float(tbl.domain.distance_to_boundary(z2))
            rec.boundary_projection = (float(proj[0]), float(proj[1]))
            rec.nu_derivative_at_projection = float(tbl.normal_derivative(Z.z1, t_proj)[0])
            rec.extremizers = ext
            rec.attracting = _attracting(ext, rec.boundary_projection, match_tol)
            rec.extrapolated = tbl.method != CLOSED_FORM and rec.dist_to_boundary < 3 * h
            warm = Z
        except PlasmaPeaksError as exc:
            rec.error = f"{type(exc).__name__}: {exc}"
        records.append(rec)
    return records


def verify_boundary_expansion(tbl, z, p, depths):
    """Behaviour of h and Gbar(z, .) along the inward normal at a boundary point.

    With x_d = p - d ν(p) the report tabulates h(x_d) + ln(2d), which tends to
    ln R for this Green normalisation, and Gbar(z, x_d)/d, which tends to
    -∂_ν Gbar(z, p).  On a disk the exact h(x_d) is listed as well.

    Parameters
    ----------
    tbl : GreensTable
    z : point
        Interior source.
    p : point
        Boundary point (projected onto the curve).
    depths : sequence of float
        Values in (0, 0.2 diam).

    Returns
    -------
    dict with ``rows`` (one dict per depth, deepest first), ``normal_derivative``,
    ``log_R``, ``drift_intercept`` (linear fit of h + ln 2d against d),
    ``max_exact_error`` (disk only, else None) and ``ratio_errors``.
    """
    dom = tbl.domain
    depths = sorted((float(d) for d in depths), reverse=True)
    if not depths or any(not 0 < d < 0.2 * dom.diam for d in depths):
        raise GeometryError("depths must lie in (0, 0.2 diam)")
    t, _ = dom.nearest_boundary(np.asarray(p, dtype=np.float64))
    pb, nu = dom.boundary_point(t)
    pb, nu = pb[0], nu[0]
    minus_nu = -float(tbl.normal_derivative(z, t)[0])
    rows = []
    for d in depths:
        x = pb - d * nu
        if not dom.contains(x):
            raise GeometryError(f"depth {d:g} leaves the domain")
        hv = float(tbl.robin(x))
        row = {"depth": d, "h": hv, "h_plus_log_2d": hv + math.log(2 * d),
               "green_over_depth": float(tbl.green(x, np.asarray(z))) / d}
        if dom.kind == "disk":
            rho = dom.params["radius"]
            q = 1.0 - d / rho
            row["h_exact"] = math.log(tbl.big_R / rho) - math.log(1.0 - q * q)
        rows.append(row)
    dd = np.array([r["depth"] for r in rows])
    drift = np.array([r["h_plus_log_2d"] for r in rows])
    intercept = float(np.polyfit(dd, drift, 1)[1]) if len(rows) > 1 else float(drift[0])
    exact_err = (max(abs(r["h"] - r["h_exact"]) for r in rows) if dom.kind == "disk" else None)
    return {
        "point": (float(pb[0]), float(pb[1])),
        "normal_derivative": -minus_nu,
        "log_R": math.log(tbl.big_R),
        "rows": rows,
        "drift_intercept": intercept,
        "max_exact_error": exact_err,
        "ratio_errors": [abs(r["green_over_depth"] - minus_nu) for r in rows],
    }


def separation_ok(records, tbl):
    """True when every successful record keeps |z1 - z2| ≥ 5h."""
    return all(math.dist(r.z1_gamma, r.z2_gamma) >= 5 * tbl.grid.h
               for r in records if not r.error)

