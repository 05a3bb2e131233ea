"""Semismooth Newton solve of -ε²Δu = (u-1)_+ - (-u-γ)_+ and free-boundary diagnostics."""

from dataclasses import dataclass, field
import math

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.optimize import least_squares

from . import _kernels
from .ansatz import build_ansatz, locate_peaks, nonlinearity
from .domain import ScalarField
from .errors import (CyclingError, NonconvergenceError, ResolutionError, SolverError)
from .routh import PeakConfig
from .specfun import bessel_constants

MAX_NEWTON = 50
MIN_DAMPING = 2.0 ** -12
MIN_CORE_CELLS = 6.0
EIG_TOL = 1e-8
SMOOTHING_WIDTHS = (0.05, 0.02, 0.01, 0.005, 0.002, 0.001, 3e-4, 1e-4)


@dataclass(frozen=True)
class Polyline:
    points: np.ndarray
    closed: bool

    @property
    def area(self):
        p = self.points
        if not self.closed or len(p) < 3:
            return 0.0
        x, y = p[:, 0], p[:, 1]
        return 0.5 * abs(float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)))


@dataclass
class SolveResult:
    """Converged solution with diagnostics; treat as read-only."""

    u: ScalarField
    iterations: int
    residual_norm: float
    residual_history: list
    correction_norm: float
    seed_correction_norm: float
    Z_seed: PeakConfig
    Z_fit: object
    ansatz: object
    fitted_ansatz: object
    plasma_pos: np.ndarray
    plasma_neg: np.ndarray
    free_boundary_pos: list = field(default_factory=list)
    free_boundary_neg: list = field(default_factory=list)
    active_set_changes: list = field(default_factory=list)
    continuation: bool = False


def check_resolution(grid, epsilon):
    ratio = bessel_constants().s * epsilon / grid.h
    if ratio < MIN_CORE_CELLS:
        raise ResolutionError(f"s*eps/h = {ratio:.3g} below {MIN_CORE_CELLS:g}; refine the grid "
                              f"or increase epsilon")
    return ratio


def residual(A, u, gamma, epsilon):
    return epsilon ** 2 * (A @ u) - nonlinearity(u, gamma)


def newton(A, u0, gamma, epsilon, tol=1e-10, max_iter=MAX_NEWTON):
    """Damped semismooth Newton iteration on interior-node vectors.

    Returns ``(u, iterations, history, active_changes)``.
    """
    u = u0.copy()
    F = residual(A, u, gamma, epsilon)
    norm = float(np.abs(F).max())
    history = [norm]
    changes = []
    sets = []
    frozen_next = False
    n_freeze = 0
    eA = (epsilon ** 2) * A.tocsc()
    for it in range(1, max_iter + 1):
        if norm <= tol:
            return u, it - 1, history, changes
        active = (u > 1.0) | (u < -gamma)
        if frozen_next:
            active = sets[-1]
            frozen_next = False
        key = np.packbits(active).tobytes()
        if len(sets) >= 2 and key == np.packbits(sets[-2]).tobytes() and \
                key != np.packbits(sets[-1]).tobytes():
            n_freeze += 1
            if n_freeze > 5:
                raise CyclingError("active set keeps oscillating with period 2")
            frozen_next = True
        changes.append(int(np.count_nonzero(active != sets[-1])) if sets else 0)
        sets.append(active)
        J = eA - sp.diags(active.astype(np.float64), format="csc")
        try:
            delta = spla.splu(J).solve(-F)
        except RuntimeError as exc:  # singular factor
            raise NonconvergenceError(f"Newton matrix singular: {exc}", u, it) from exc
        t = 1.0
        merit = float(F @ F)
        while True:
            trial = u + t * delta
            Ft = residual(A, trial, gamma, epsilon)
            nt = float(np.abs(Ft).max())
            # sufficient decrease of the least-squares merit or of the max-norm
            if float(Ft @ Ft) < (1.0 - 1e-4 * t) * merit or nt < norm:
                break
            t *= 0.5
            if t < MIN_DAMPING:
                raise NonconvergenceError("residual did not decrease at minimal damping", u, it)
        u, F, norm = trial, Ft, nt
        history.append(norm)
    if norm <= tol:
        return u, max_iter, history, changes
    raise NonconvergenceError(f"no convergence in {max_iter} Newton steps (residual {norm:.3e})",
                              u, max_iter)


def _smoothed(u, gamma, mu):
    """Softplus smoothing of the nonlinearity and its derivative, width mu."""
    a, b = (u - 1.0) / mu, (-u - gamma) / mu
    f = mu * (np.logaddexp(0.0, a) - np.logaddexp(0.0, b))
    df = 0.5 * (2.0 + np.tanh(0.5 * a) + np.tanh(0.5 * b))
    return f, df


def smoothing_continuation(A, u0, gamma, epsilon, widths=SMOOTHING_WIDTHS, inner=30):
    """Track solutions of the softplus-smoothed problem as the width shrinks.

    Each stage runs damped Newton on the smooth residual from the previous
    stage's solution.  The result is a seed for the semismooth iteration in
    the regime where the plain iteration cycles between active sets.
    """
    u = u0.copy()
    eA = (epsilon ** 2) * A.tocsc()
    for mu in widths:
        for it in range(inner):
            f, df = _smoothed(u, gamma, mu)
            F = eA @ u - f
            if np.abs(F).max() <= 1e-12:
                break
            J = eA - sp.diags(df, format="csc")
            d = spla.splu(J).solve(-F)
            n0 = float(np.linalg.norm(F))
            t = 1.0
            while t >= MIN_DAMPING:
                f, _ = _smoothed(u + t * d, gamma, mu)
                if np.linalg.norm(eA @ (u + t * d) - f) < (1.0 - 1e-4 * t) * n0:
                    break
                t *= 0.5
            if t < MIN_DAMPING:
                break  # stalled; the next, sharper stage starts from here
            u = u + t * d
    return u


def refit_configuration(tbl, u, Z, gamma, epsilon):
    """Peak pair whose ansatz is closest to u in the grid L² norm."""
    target = u.interior()
    h = tbl.grid.h

    def res(v):
        Zv = PeakConfig(tuple(v[:2]), tuple(v[2:]), Z.delta)
        return build_ansatz(tbl, Zv, gamma, epsilon).W.interior() - target

    fit = least_squares(res, Z.as_array(), x_scale=h, diff_step=1e-6, xtol=1e-12, ftol=1e-14,
                        gtol=1e-14, max_nfev=200)
    v = fit.x
    return PeakConfig(tuple(v[:2]), tuple(v[2:]), Z.delta)


def solve_pde(tbl, Z, gamma, epsilon, tol=1e-10, locate=True, refit=True,
              max_iter=MAX_NEWTON):
    """Solve the free-boundary problem on the grid, seeded by W_ε.

    With ``locate=True`` the seed is W_ε at the reduced-energy critical
    point reached from Z (see :func:`ansatz.locate_peaks`); otherwise at Z.
    When the plain semismooth iteration fails, the seed is first carried
    through :func:`smoothing_continuation` (``continuation`` is then True).

    ``correction_norm`` is ||u - W_ε(Z_fit)||_∞ where Z_fit is the peak pair
    whose ansatz fits u best in the grid L² norm, so that translations of
    the peaks are not counted as correction.  With ``refit=False`` the fit is
    skipped and the seed pair is used.  ``seed_correction_norm`` is always
    measured against the seed.

    Raises ResolutionError below s ε / h = 6, NonconvergenceError (carrying
    the last iterate) on failure and when the iteration falls onto a branch
    without both plasma regions.
    """
    if tol < 1e-10:
        raise SolverError("tolerance below 1e-10 is not supported", 0)
    grid = tbl.grid
    check_resolution(grid, epsilon)
    Zs = locate_peaks(tbl, Z, gamma, epsilon) if locate else Z
    ans = build_ansatz(tbl, Zs, gamma, epsilon)
    A = grid.neg_laplacian()
    try:
        u, iters, history, changes = newton(A, ans.W.interior(), gamma, epsilon, tol, max_iter)
        continued = False
    except (NonconvergenceError, CyclingError):
        # coarse cores make the active set flip; follow the smoothed problem instead
        u0 = smoothing_continuation(A, ans.W.interior(), gamma, epsilon)
        u, iters, history, changes = newton(A, u0, gamma, epsilon, tol, max_iter)
        continued = True
    if u.max() <= 1.0 or u.min() >= -gamma:
        raise NonconvergenceError("solution lost a plasma region (trivial branch)", u, iters)
    U = ScalarField(grid, grid.to_full(u))
    seed_corr = float(np.abs(u - ans.W.interior()).max())
    if refit:
        Zf = refit_configuration(tbl, U, Zs, gamma, epsilon)
        fitted = build_ansatz(tbl, Zf, gamma, epsilon)
        corr = float(np.abs(u - fitted.W.interior()).max())
    else:
        Zf, fitted, corr = Zs, ans, seed_corr
    pos = grid.inside & (U.values > 1.0)
    neg = grid.inside & (U.values < -gamma)
    return SolveResult(
        u=U, iterations=iters, residual_norm=history[-1], residual_history=history,
        correction_norm=corr, seed_correction_norm=seed_corr, Z_seed=Zs, Z_fit=Zf, ansatz=ans,
        fitted_ansatz=fitted,
        plasma_pos=pos, plasma_neg=neg,
        free_boundary_pos=extract_free_boundary(U, 1.0),
        free_boundary_neg=extract_free_boundary(U, -gamma),
        active_set_changes=changes, continuation=continued,
    )


# ---------------------------------------------------------------------------
# Free boundaries and components
# ---------------------------------------------------------------------------


def _chain(seg, ids):
    """Join marching-squares segments that share grid-edge ids into polylines."""
    n = len(seg)
    if n == 0:
        return []
    where = {}
    for k in range(n):
        for end in (0, 1):
            where.setdefault(int(ids[k, end]), []).append((k, end))
    used = np.zeros(n, dtype=bool)
    lines = []
    for start in range(n):
        if used[start]:
            continue
        used[start] = True
        pts = [seg[start, 0:2], seg[start, 2:4]]
        first_id, cur_id = int(ids[start, 0]), int(ids[start, 1])
        closed = False
        # walk forward, then backward from the start if the curve is open
        for direction in (0, 1):
            while True:
                nxt = [(k, e) for k, e in where[cur_id] if not used[k]]
                if not nxt:
                    break
                k, e = nxt[0]
                used[k] = True
                other = 1 - e
                p = seg[k, 2:4] if other == 1 else seg[k, 0:2]
                pts.append(p) if direction == 0 else pts.insert(0, p)
                cur_id = int(ids[k, other])
            if direction == 0 and cur_id == first_id:
                closed = True
                break
            cur_id = first_id
        arr = np.array(pts)
        if closed:
            arr = arr[:-1]
        lines.append((arr, closed))
    return lines


def extract_free_boundary(u, level):
    """Closed or open polylines of the level set {u = level} in physical coordinates."""
    grid = u.grid
    seg, ids = _kernels.march_segments(u.values, level)
    out = []
    for arr, closed in _chain(seg, ids):
        xy = np.stack([grid.x0 + grid.h * arr[:, 1], grid.y0 + grid.h * arr[:, 0]], axis=1)
        out.append(Polyline(xy, closed))
    return out


def connected_components(mask):
    """Number of 4-connected components of a boolean node mask."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        return 0
    return _kernels.label_components(mask)[1]


def vacuum_mask(u, gamma):
    g = u.grid
    return g.inside & (u.values > -gamma) & (u.values < 1.0)


# ---------------------------------------------------------------------------
# First Dirichlet eigenvalue of a plasma region
# ---------------------------------------------------------------------------


def region_operator(u, level=1.0, sign=1.0):
    """Cut-cell -Δ_h on the nodes where sign*(u - level) > 0.

    A link leaving the set is cut where the linear interpolant of
    sign*(u - level) vanishes, with Dirichlet value zero there.
    """
    grid = u.grid
    v = sign * (u.values - level)
    S = grid.inside & (v > 0)
    n = int(S.sum())
    idx = -np.ones(S.shape, dtype=np.int64)
    idx[S] = np.arange(n)
    rr, cc = np.nonzero(S)
    rows, cols, vals = [], [], []
    diag = np.zeros(n)
    me = idx[rr, cc]
    for dr, dc in ((0, 1), (0, -1), (1, 0), (-1, 0)):
        r2, c2 = rr + dr, cc + dc
        inn = S[r2, c2]
        rows.append(me[inn])
        cols.append(idx[r2[inn], c2[inn]])
        vals.append(-np.ones(int(inn.sum())))
        diag[me[inn]] += 1.0
        out = ~inn
        vi = v[rr[out], cc[out]]
        vj = v[r2[out], c2[out]]
        theta = np.clip(vi / (vi - vj), 1e-6, 1.0)
        np.add.at(diag, me[out], 1.0 / theta)
    rows.append(np.arange(n))
    cols.append(np.arange(n))
    vals.append(diag)
    A = sp.csc_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n, n)) / grid.h ** 2
    return A, S


def plasma_eigenvalue(u, level=1.0, sign=1.0, tol=EIG_TOL, max_iter=500):
    """First Dirichlet eigenvalue of -Δ on {sign*(u - level) > 0} by inverse power iteration."""
    A, S = region_operator(u, level, sign)
    n = A.shape[0]
    if n < 20:
        raise ResolutionError(f"plasma region has {n} nodes (< 20)")
    lu = spla.splu(A)
    x = np.ones(n) / math.sqrt(n)
    lam = float(x @ (A @ x))
    for _ in range(max_iter):
        y = lu.solve(x)
        x = y / np.linalg.norm(y)
        new = float(x @ (A @ x))
        if abs(new - lam) <= tol * abs(new):
            return new
        lam = new
    raise SolverError("inverse iteration did not converge", max_iter)
