"""Verification suites run by ``plasma-peaks verify``.

Each check returns a :class:`Check` whose ``values`` hold only quantities
that are deterministic for a fixed configuration, so reports can be compared
byte for byte.  :class:`Context` caches tables, minimisers and solves shared
between checks.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from .ansatz import (ansatz_energy, build_ansatz, discrete_energy, error_term_at_peaks,
                     reduced_energy_expansion, solve_amplitudes, verify_level_sets)
from .domain import DomainModel
from .errors import PlasmaPeaksError
from .greens import CLOSED_FORM, GRID_SOLVE, GreensTable, boundary_extremizer, harmonic_center
from .routh import minimize_hamiltonian
from .solver import connected_components, plasma_eigenvalue, solve_pde, vacuum_mask
from .specfun import bessel_j0, first_zero_j0
from .sweep import gamma_sweep, reference_bound, separation_ok, verify_boundary_expansion

SOLVE_EPSILONS = (0.08, 0.04, 0.02)
AMPLITUDE_EPSILONS = (1e-2, 1e-3, 1e-4)
AMPLITUDE_GAMMAS = (0.25, 0.5, 1.0)
SWEEP_GAMMAS = (0.5, 0.3, 0.2, 0.1, 0.05)


@dataclass
class Check:
    name: str
    passed: bool
    values: dict = field(default_factory=dict)

    def line(self):
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}"


def band_ratio(values):
    """max/min of positive values; inf if any is zero."""
    v = np.abs(np.asarray(values, dtype=np.float64))
    return float(v.max() / v.min()) if v.min() > 0 else math.inf


class Context:
    """Shared state for the acceptance checks on the unit disk."""

    def __init__(self, grid_n=257, r_factor=1.1, seed=0, threads=1):
        self.grid_n = grid_n
        self.r_factor = r_factor
        self.seed = seed
        self.threads = threads
        self._tables = {}
        self._minimizers = {}
        self._solves = {}

    def table(self, method=CLOSED_FORM):
        if method not in self._tables:
            dom = DomainModel.disk(1.0, grid_n=self.grid_n, r_factor=self.r_factor)
            self._tables[method] = GreensTable(dom, method)
        return self._tables[method]

    @property
    def h(self):
        return self.table().grid.h

    def minimizer(self, gamma):
        if gamma not in self._minimizers:
            self._minimizers[gamma] = minimize_hamiltonian(self.table(), gamma, seed=self.seed,
                                                           threads=self.threads)
        return self._minimizers[gamma]

    def solve(self, gamma, epsilon, swapped=False):
        key = (gamma, epsilon, swapped)
        if key not in self._solves:
            Z, _ = self.minimizer(gamma)
            self._solves[key] = solve_pde(self.table(), Z.swapped() if swapped else Z, gamma,
                                          epsilon)
        return self._solves[key]

    @property
    def solves(self):
        return dict(self._solves)


# ---------------------------------------------------------------------------
# Acceptance criteria
# ---------------------------------------------------------------------------


def check_green_oracle(ctx, margin=0.05, limit=1e-3):
    """Grid-solved g(., z) against the image-charge form on the disk."""
    grid_tbl = ctx.table(GRID_SOLVE)
    exact = ctx.table(CLOSED_FORM)
    grid = grid_tbl.grid
    X, Y = grid.coords()
    pts = np.stack([X, Y], axis=-1)
    keep = grid.inside & (grid_tbl.domain.distance_to_boundary(pts) >= margin)
    values = {}
    for z in ((0.0, 0.0), (0.5, 0.0)):
        g_grid = grid_tbl.field(z).values[keep]
        g_true = exact.regular_part(pts[keep], z)
        values[f"max_rel_error_z={z[0]:g},{z[1]:g}"] = float(np.max(np.abs(g_grid - g_true)
                                                                   / np.abs(g_true)))
    return Check("1 disk Green oracle", all(v <= limit for v in values.values()),
                 {**values, "limit": limit})


def check_amplitude_asymptotics(ctx, band=2.0):
    """|a1 - 1| L and |a2 - γ| L within a factor-2 band of their ε = 1e-2 value."""
    values = {}
    ok = True
    for gamma in AMPLITUDE_GAMMAS:
        Z, _ = ctx.minimizer(gamma)
        rows = []
        for eps in AMPLITUDE_EPSILONS:
            a = solve_amplitudes(ctx.table(), Z, gamma, eps)
            rows.append((abs(a.a1 - 1.0) * a.log_factor, abs(a.a2 - gamma) * a.log_factor))
        rows = np.array(rows)
        ratios = rows / rows[0]
        ok &= bool(np.all((ratios >= 1.0 / band) & (ratios <= band)))
        values[f"gamma={gamma:g}"] = {"scaled_a1": rows[:, 0].tolist(),
                                      "scaled_a2": rows[:, 1].tolist(),
                                      "ratios_a1": ratios[:, 0].tolist(),
                                      "ratios_a2": ratios[:, 1].tolist()}
    return Check("2 amplitude asymptotics", ok, values)


def check_ansatz_identity(ctx, gamma=0.5, epsilon=0.08, id_tol=1e-10, ell_factor=5.0):
    """Assembled W against the piecewise closed form; ℓ_ε at the peaks against 5h²."""
    Z, _ = ctx.minimizer(gamma)
    ans = build_ansatz(ctx.table(), Z, gamma, epsilon)
    disc = ans.closed_form_discrepancy()
    _, l1, l2 = error_term_at_peaks(ans)
    h2 = ctx.h ** 2
    values = {"gamma": gamma, "epsilon": epsilon, "identity_discrepancy": disc,
              "ell_z1": l1, "ell_z2": l2, "ell_z1_over_h2": l1 / h2, "ell_z2_over_h2": l2 / h2,
              "limit_over_h2": ell_factor}
    ok = disc <= id_tol and abs(l1) <= ell_factor * h2 and abs(l2) <= ell_factor * h2
    return Check("3 ansatz identity and peak error term", ok, values)


def check_level_sets(ctx, sigma=0.5):
    values = {}
    ok = True
    for gamma in (0.5, 1.0):
        Z, _ = ctx.minimizer(gamma)
        for eps in SOLVE_EPSILONS:
            rep = verify_level_sets(build_ansatz(ctx.table(), Z, gamma, eps), sigma=sigma)
            trip = [rep["inner_pos"], rep["inner_neg"], rep["outer"]]
            ok &= all(trip)
            values[f"gamma={gamma:g},eps={eps:g}"] = {"flags": trip, "T": rep["T"]}
    return Check("4 level-set bands", ok, values)


def check_correction_bound(ctx, gamma=0.5, band=3.0):
    scaled = []
    for eps in SOLVE_EPSILONS:
        r = ctx.solve(gamma, eps)
        scaled.append(r.correction_norm * abs(math.log(eps)) / eps)
    ratio = band_ratio(scaled)
    return Check("5 correction bound", ratio <= band,
                 {"epsilons": list(SOLVE_EPSILONS), "scaled_correction": scaled,
                  "band_ratio": ratio, "limit": band})


def _structure(res, gamma):
    u = res.u
    n_pos = connected_components(res.plasma_pos)
    n_neg = connected_components(res.plasma_neg)
    n_vac = connected_components(vacuum_mask(u, gamma))
    cpos = [p.closed for p in res.free_boundary_pos]
    cneg = [p.closed for p in res.free_boundary_neg]
    ok = (n_pos == n_neg == n_vac == 1 and cpos == [True] and cneg == [True])
    return ok, {"components_pos": n_pos, "components_neg": n_neg, "components_vacuum": n_vac,
                "contours_pos": len(cpos), "contours_neg": len(cneg),
                "all_closed": all(cpos + cneg)}


def check_free_boundary_structure(ctx, extra=((0.5, 0.04, False), (1.0, 0.04, False),
                                               (1.0, 0.04, True))):
    """Connectedness for every solve held by the context, after running ``extra``."""
    for gamma, eps, swapped in extra:
        ctx.solve(gamma, eps, swapped)
    values = {}
    ok = True
    for (gamma, eps, swapped), res in sorted(ctx.solves.items()):
        good, v = _structure(res, gamma)
        ok &= good
        values[f"gamma={gamma:g},eps={eps:g}{',swapped' if swapped else ''}"] = v
    return Check("6 free-boundary structure", ok, values)


def check_eigenvalue_identity(ctx, gamma=0.5, epsilon=0.04, lo=0.95, hi=1.05):
    r = ctx.solve(gamma, epsilon)
    lam_pos = epsilon ** 2 * plasma_eigenvalue(r.u, 1.0, 1.0)
    lam_neg = epsilon ** 2 * plasma_eigenvalue(r.u, -gamma, -1.0)
    return Check("7 eigenvalue identity", lo <= lam_pos <= hi and lo <= lam_neg <= hi,
                 {"eps2_lambda1_pos": lam_pos, "eps2_lambda1_neg": lam_neg})


def check_energy_expansion(ctx, gamma=0.5, band=4.0):
    """Expansion remainder of I(W) and the energy gap I_h(u) - I_h(W), scaled by |ln ε|/ε³."""
    Z, _ = ctx.minimizer(gamma)
    rem, gap, corrected = [], [], []
    for eps in SOLVE_EPSILONS:
        scale = abs(math.log(eps)) / eps ** 3
        ans = build_ansatz(ctx.table(), Z, gamma, eps)
        iw = ansatz_energy(ans)
        rem.append(abs(iw - reduced_energy_expansion(ctx.table(), Z, gamma, eps)) * scale)
        corrected.append(abs(iw - reduced_energy_expansion(ctx.table(), Z, gamma, eps,
                                                           include_k2_term=False)) * scale)
        r = ctx.solve(gamma, eps)
        gap.append(abs(discrete_energy(r.u, gamma, eps)
                       - discrete_energy(r.fitted_ansatz.W, gamma, eps)) * scale)
    r1, r2 = band_ratio(rem), band_ratio(gap)
    return Check("8 energy expansion", r1 <= band and r2 <= band,
                 {"scaled_expansion_remainder": rem, "expansion_band_ratio": r1,
                  "scaled_energy_gap": gap, "energy_gap_band_ratio": r2,
                  "scaled_remainder_without_k2_term": corrected, "limit": band})


def check_antisymmetry(ctx, epsilon=0.04, limit=1e-8):
    a = ctx.solve(1.0, epsilon)
    b = ctx.solve(1.0, epsilon, swapped=True)
    err = float(np.max(np.abs(a.u.values + b.u.values)))
    return Check("9 gamma=1 antisymmetry", err <= limit, {"max_abs_sum": err, "limit": limit})


def check_gamma_sweep(ctx):
    tbl = ctx.table()
    h = tbl.grid.h
    recs = gamma_sweep(tbl, SWEEP_GAMMAS, seed=ctx.seed, threads=ctx.threads)
    d_c = [r.dist_to_center for r in recs]
    d_b = [r.dist_to_boundary for r in recs]
    mono = all(b <= a + 2 * h for a, b in zip(d_c, d_c[1:]))
    last = recs[-1]
    ok = (not any(r.error for r in recs) and mono and d_c[-1] <= 0.05 and d_b[-1] <= 0.1
          and last.attracting not in ("none", ""))
    return Check("10 gamma->0 asymptotics", ok,
                 {"gammas": list(SWEEP_GAMMAS), "dist_to_center": d_c, "dist_to_boundary": d_b,
                  "attracting": [r.attracting for r in recs],
                  "projection": list(last.boundary_projection)})


ACCEPTANCE = (check_green_oracle, check_amplitude_asymptotics, check_ansatz_identity,
              check_level_sets, check_correction_bound, check_free_boundary_structure,
              check_eigenvalue_identity, check_energy_expansion, check_antisymmetry,
              check_gamma_sweep)


# ---------------------------------------------------------------------------
# Lighter suites
# ---------------------------------------------------------------------------


def suite_disk_oracle(ctx):
    tbl = ctx.table()
    s = first_zero_j0()
    checks = [check_green_oracle(ctx)]
    checks.append(Check("first zero of J0", abs(bessel_j0(s)) <= 1e-14 and
                        abs(s - 2.404825557695773) <= 1e-12, {"s": s}))
    c, hv = harmonic_center(tbl)
    checks.append(Check("harmonic centre at the origin", math.hypot(*c) <= 1e-6 and
                        abs(hv - math.log(tbl.big_R)) <= 1e-9, {"center": list(c), "h_value": hv}))
    ext = boundary_extremizer(tbl, (0.5, 0.0))
    checks.append(Check("normal-derivative extremizers at z=(0.5,0)",
                        abs(ext["max"]["value"] + 1 / 3) <= 1e-9
                        and abs(ext["max_abs"]["value"] + 3) <= 1e-9
                        and math.dist(ext["max"]["point"], (-1, 0)) <= 1e-6
                        and math.dist(ext["max_abs"]["point"], (1, 0)) <= 1e-6,
                        {"max": ext["max"], "max_abs": ext["max_abs"]}))
    rep = verify_boundary_expansion(tbl, (0.0, 0.0), (1.0, 0.0), [0.1, 0.05, 0.02, 0.01])
    checks.append(Check("boundary expansion of h and Gbar",
                        rep["max_exact_error"] <= 1e-12 and rep["ratio_errors"][-1] <= 0.01,
                        {"drift_intercept": rep["drift_intercept"], "log_R": rep["log_R"],
                         "ratio_errors": rep["ratio_errors"]}))
    return checks


def suite_ansatz(ctx):
    return [check_amplitude_asymptotics(ctx), check_ansatz_identity(ctx), check_level_sets(ctx)]


def suite_solve(ctx):
    r = ctx.solve(0.5, 0.04)
    checks = [Check("newton residual", r.residual_norm <= 1e-10,
                    {"residual_norm": r.residual_norm, "iterations": r.iterations})]
    checks.append(check_free_boundary_structure(ctx, extra=()))
    checks.append(check_eigenvalue_identity(ctx))
    return checks


def suite_sweep(ctx):
    tbl = ctx.table()
    recs = gamma_sweep(tbl, SWEEP_GAMMAS, seed=ctx.seed, threads=ctx.threads)
    M, ref = reference_bound(tbl)
    values = [r.value for r in recs]
    checks = [check_gamma_sweep(ctx)]
    checks.append(Check("swept minima below the reference bound", all(v <= M for v in values),
                        {"M": M, "reference": [list(ref.z1), list(ref.z2)], "values": values}))
    checks.append(Check("peak separation at least 5h", separation_ok(recs, tbl), {}))
    return checks


def suite_acceptance(ctx):
    return [fn(ctx) for fn in ACCEPTANCE]


SUITES = {
    "disk-oracle": suite_disk_oracle,
    "ansatz": suite_ansatz,
    "solve": suite_solve,
    "sweep": suite_sweep,
    "acceptance": suite_acceptance,
}


def run_suite(name, ctx):
    """Run one suite; exceptions inside a check become a failed check."""
    try:
        checks = SUITES[name](ctx)
    except PlasmaPeaksError as exc:
        checks = [Check(f"{name} aborted", False, {"error": f"{type(exc).__name__}: {exc}"})]
    return {"suite": name, "passed": all(c.passed for c in checks),
            "checks": [{"name": c.name, "passed": c.passed, "values": c.values} for c in checks]}
