"""Planar domains, their Cartesian grids and the cut-cell Laplacian.

The discrete operator is a symmetric cut-cell 5-point scheme: a link from
an interior node to a node outside the domain is cut at the boundary
crossing, at fraction ``theta`` of the mesh width, and contributes
``1/theta`` to the diagonal (linear ghost extrapolation through the boundary
value).  The resulting matrix ``A ~ -Laplacian`` is symmetric positive
definite, and ``u.A.u`` is a weighted sum of squared differences over links,
so the discrete problems below are exact critical-point equations of discrete
energies.
"""

from dataclasses import dataclass, field
import math

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.interpolate import CubicSpline
from scipy.spatial import ConvexHull
from scipy.spatial.distance import pdist

from . import _kernels
from .errors import ConfigurationError, GeometryError, SolverError

THETA_MIN = 1e-6
MIN_BOUNDARY_SAMPLES = 512
_DIRECTIONS = ((0, 1), (0, -1), (1, 0), (-1, 0))  # (drow, dcol)


def _polyline_area(p):
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _segments_intersect(p):
    """True if the closed polyline ``p`` crosses itself."""
    a = p
    b = np.roll(p, -1, axis=0)
    n = len(p)
    d = b - a
    for i in range(n):
        # skip the segment itself and its two neighbours
        j = np.arange(i + 2, n if i > 0 else n - 1)
        if j.size == 0:
            continue
        r = d[i]
        s = d[j]
        qp = a[j] - a[i]
        den = r[0] * s[:, 1] - r[1] * s[:, 0]
        ok = np.abs(den) > 1e-300
        t = np.where(ok, (qp[:, 0] * s[:, 1] - qp[:, 1] * s[:, 0]) / np.where(ok, den, 1), -1)
        u = np.where(ok, (qp[:, 0] * r[1] - qp[:, 1] * r[0]) / np.where(ok, den, 1), -1)
        if np.any(ok & (t > 0) & (t < 1) & (u > 0) & (u < 1)):
            return True
    return False


class DomainModel:
    """A smooth, simply connected planar domain with a Cartesian grid.

    Use the constructors :meth:`disk`, :meth:`ellipse`, :meth:`curve` or
    :meth:`from_spec`.  ``big_R = r_factor * diam``.
    """

    def __init__(self, kind, params, grid_n=257, r_factor=1.1):
        if grid_n < 9:
            raise ConfigurationError("grid_n too small")
        if not r_factor > 1:
            raise ConfigurationError("r_factor must exceed 1")
        self.kind = kind
        self.params = params
        self.grid_n = int(grid_n)
        self.r_factor = float(r_factor)
        if kind == "curve":
            self._init_curve(params["points"])
        self.samples_t = np.arange(max(MIN_BOUNDARY_SAMPLES, 8 * self.grid_n)) / max(
            MIN_BOUNDARY_SAMPLES, 8 * self.grid_n)
        self.samples, self.sample_normals = self.boundary_point(self.samples_t)
        self.diam = self._diameter()
        self.big_R = self.r_factor * self.diam
        self.grid = Grid.build(self, self.grid_n)

    # -- constructors -----------------------------------------------------

    @classmethod
    def disk(cls, radius=1.0, center=(0.0, 0.0), grid_n=257, r_factor=1.1):
        if not radius > 0:
            raise ConfigurationError("disk radius must be positive")
        return cls("disk", {"radius": float(radius), "center": (float(center[0]), float(center[1]))},
                   grid_n, r_factor)

    @classmethod
    def ellipse(cls, semi_x, semi_y, center=(0.0, 0.0), grid_n=257, r_factor=1.1):
        if not (semi_x > 0 and semi_y > 0):
            raise ConfigurationError("ellipse semi-axes must be positive")
        return cls("ellipse", {"semi_x": float(semi_x), "semi_y": float(semi_y),
                               "center": (float(center[0]), float(center[1]))}, grid_n, r_factor)

    @classmethod
    def curve(cls, points, grid_n=257, r_factor=1.1):
        return cls("curve", {"points": [list(map(float, p)) for p in points]}, grid_n, r_factor)

    @classmethod
    def from_spec(cls, spec, grid_n=None, r_factor=None):
        """Build from a JSON-style description.

        ``{"type": "disk", "radius": 1}``, ``{"type": "ellipse", "semi_x": 2, "semi_y": 1}``
        or ``{"type": "curve", "points": [[x, y], ...]}``; optional keys
        ``grid_n`` and ``r_factor`` are overridden by explicit arguments.
        """
        grid_n = grid_n if grid_n is not None else spec.get("grid_n", 257)
        r_factor = r_factor if r_factor is not None else spec.get("r_factor", 1.1)
        kind = spec.get("type")
        if kind == "disk":
            return cls.disk(spec.get("radius", 1.0), spec.get("center", (0.0, 0.0)), grid_n, r_factor)
        if kind == "ellipse":
            return cls.ellipse(spec["semi_x"], spec["semi_y"], spec.get("center", (0.0, 0.0)),
                               grid_n, r_factor)
        if kind == "curve":
            return cls.curve(spec["points"], grid_n, r_factor)
        raise ConfigurationError(f"unknown domain type {kind!r}")

    def to_spec(self):
        if self.kind == "curve":
            return {"type": "curve", "points": self.params["points"]}
        out = {"type": self.kind}
        out.update({k: (list(v) if isinstance(v, tuple) else v) for k, v in self.params.items()})
        return out

    # -- boundary ---------------------------------------------------------

    def _init_curve(self, points):
        p = np.asarray(points, dtype=np.float64)
        if p.ndim != 2 or p.shape[1] != 2 or len(p) < 8:
            raise GeometryError("curve needs at least 8 points")
        if np.allclose(p[0], p[-1]):
            p = p[:-1]
        if _polyline_area(p) < 0:
            p = p[::-1]
        if _segments_intersect(p):
            raise GeometryError("boundary curve intersects itself")
        closed = np.vstack([p, p[:1]])
        chord = np.r_[0.0, np.cumsum(np.hypot(*np.diff(closed, axis=0).T))]
        self._spline = CubicSpline(chord / chord[-1], closed, bc_type="periodic")
        dense_t = np.arange(8192) / 8192
        self._dense = self._spline(dense_t)
        if _polyline_area(self._dense) <= 0:
            raise GeometryError("degenerate boundary curve")

    def boundary_point(self, t):
        """Points p(t) and outward unit normals for curve parameters t in [0, 1)."""
        t = np.asarray(t, dtype=np.float64)
        ang = 2.0 * math.pi * t
        if self.kind == "disk":
            c = self.params["center"]
            rho = self.params["radius"]
            nrm = np.stack([np.cos(ang), np.sin(ang)], axis=-1)
            return np.asarray(c) + rho * nrm, nrm
        if self.kind == "ellipse":
            c = self.params["center"]
            a, b = self.params["semi_x"], self.params["semi_y"]
            pts = np.asarray(c) + np.stack([a * np.cos(ang), b * np.sin(ang)], axis=-1)
            nrm = np.stack([b * np.cos(ang), a * np.sin(ang)], axis=-1)
        else:
            tt = np.mod(t, 1.0)
            pts = self._spline(tt)
            tan = self._spline(tt, 1)
            nrm = np.stack([tan[..., 1], -tan[..., 0]], axis=-1)
        nrm = nrm / np.linalg.norm(nrm, axis=-1, keepdims=True)
        return pts, nrm

    def _diameter(self):
        if self.kind == "disk":
            return 2.0 * self.params["radius"]
        if self.kind == "ellipse":
            return 2.0 * max(self.params["semi_x"], self.params["semi_y"])
        pts = self._dense
        hull = pts[ConvexHull(pts).vertices]
        return float(pdist(hull).max())

    def bounding_box(self):
        if self.kind == "disk":
            (cx, cy), r = self.params["center"], self.params["radius"]
            return cx - r, cx + r, cy - r, cy + r
        if self.kind == "ellipse":
            (cx, cy) = self.params["center"]
            a, b = self.params["semi_x"], self.params["semi_y"]
            return cx - a, cx + a, cy - b, cy + b
        p = self._dense
        return p[:, 0].min(), p[:, 0].max(), p[:, 1].min(), p[:, 1].max()

    def _line_crossings(self, coord, axis):
        """Sorted boundary crossings of the line {y = coord} (axis 0) or {x = coord} (axis 1)."""
        if self.kind in ("disk", "ellipse"):
            cx, cy = self.params["center"]
            if self.kind == "disk":
                a = b = self.params["radius"]
            else:
                a, b = self.params["semi_x"], self.params["semi_y"]
            if axis == 0:
                q = 1.0 - ((coord - cy) / b) ** 2
                if q < 0:
                    return np.empty(0)
                w = a * math.sqrt(q)
                return np.array([cx - w, cx + w])
            q = 1.0 - ((coord - cx) / a) ** 2
            if q < 0:
                return np.empty(0)
            w = b * math.sqrt(q)
            return np.array([cy - w, cy + w])
        p = self._dense
        q = np.roll(p, -1, axis=0)
        ka, kb = (1, 0) if axis == 0 else (0, 1)
        cross = (p[:, ka] <= coord) != (q[:, ka] <= coord)
        pa, qa = p[cross], q[cross]
        val = pa[:, kb] + (coord - pa[:, ka]) * (qa[:, kb] - pa[:, kb]) / (qa[:, ka] - pa[:, ka])
        return np.sort(val)

    def contains(self, pts):
        """Strict interior test for points with a trailing axis of length 2."""
        pts = np.asarray(pts, dtype=np.float64)
        x, y = pts[..., 0], pts[..., 1]
        if self.kind == "disk":
            (cx, cy), r = self.params["center"], self.params["radius"]
            return np.hypot(x - cx, y - cy) < r
        if self.kind == "ellipse":
            (cx, cy) = self.params["center"]
            a, b = self.params["semi_x"], self.params["semi_y"]
            return ((x - cx) / a) ** 2 + ((y - cy) / b) ** 2 < 1.0
        flat = np.stack([x.ravel(), y.ravel()], axis=1)
        out = np.empty(len(flat), dtype=bool)
        for i, (px, py) in enumerate(flat):
            xs = self._line_crossings(py, 0)
            out[i] = np.count_nonzero(xs > px) % 2 == 1
        return out.reshape(x.shape)

    def distance_to_boundary(self, pts):
        """Unsigned distance to the boundary curve."""
        pts = np.asarray(pts, dtype=np.float64)
        if self.kind == "disk":
            (cx, cy), r = self.params["center"], self.params["radius"]
            return np.abs(r - np.hypot(pts[..., 0] - cx, pts[..., 1] - cy))
        flat = pts.reshape(-1, 2)
        t, _ = self.nearest_boundary(flat)
        q, _ = self.boundary_point(t)
        return np.hypot(flat[:, 0] - q[:, 0], flat[:, 1] - q[:, 1]).reshape(pts.shape[:-1])

    def nearest_boundary(self, pts):
        """Curve parameter and point of the boundary nearest to each point."""
        pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
        if self.kind == "disk":
            cx, cy = self.params["center"]
            t = np.mod(np.arctan2(pts[:, 1] - cy, pts[:, 0] - cx) / (2 * math.pi), 1.0)
            return t, self.boundary_point(t)[0]
        dense_t = np.arange(4096) / 4096
        dense, _ = self.boundary_point(dense_t)
        ts = np.empty(len(pts))
        for i, p in enumerate(pts):
            k = int(np.argmin(np.hypot(dense[:, 0] - p[0], dense[:, 1] - p[1])))
            lo, hi = dense_t[k] - 1 / 4096, dense_t[k] + 1 / 4096

            def dist(tt, p=p):
                q, _ = self.boundary_point(tt)
                return math.hypot(q[0] - p[0], q[1] - p[1])

            ts[i] = np.mod(golden_section_min(dist, lo, hi, tol=1e-12), 1.0)
        return ts, self.boundary_point(ts)[0]

    def perimeter_weights(self):
        """Arc-length quadrature weights for ``self.samples`` (periodic trapezoid)."""
        if self.kind == "disk":
            n = len(self.samples_t)
            return np.full(n, 2 * math.pi * self.params["radius"] / n)
        if self.kind == "ellipse":
            a, b = self.params["semi_x"], self.params["semi_y"]
            ang = 2 * math.pi * self.samples_t
            speed = 2 * math.pi * np.hypot(a * np.sin(ang), b * np.cos(ang))
            return speed / len(ang)
        speed = np.linalg.norm(self._spline(self.samples_t, 1), axis=-1)
        return speed / len(self.samples_t)


def golden_section_min(f, lo, hi, tol=1e-10, max_iter=200):
    """Minimise a unimodal scalar function on [lo, hi]."""
    inv = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - inv * (b - a)
    d = a + inv * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if abs(b - a) < tol:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - inv * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


@dataclass
class Grid:
    """Uniform node lattice with interior classification and cut links.

    ``inside[r, c]`` marks interior nodes (strictly inside the domain); row
    index ``r`` runs along y and column ``c`` along x.  ``links`` lists every
    link from an interior node to a non-interior neighbour as arrays
    ``(node, dr, dc, theta, px, py)`` where ``(px, py)`` is the boundary crossing.
    """

    x0: float
    y0: float
    h: float
    nx: int
    ny: int
    inside: np.ndarray
    index: np.ndarray
    links: dict
    _ops: dict = field(default_factory=dict, repr=False)

    @classmethod
    def build(cls, dom, grid_n):
        xmin, xmax, ymin, ymax = dom.bounding_box()
        ex, ey = xmax - xmin, ymax - ymin
        h = max(ex, ey) / (grid_n - 1)
        nx = int(math.ceil(ex / h - 1e-9)) + 1
        ny = int(math.ceil(ey / h - 1e-9)) + 1
        x0 = 0.5 * (xmin + xmax) - 0.5 * (nx - 1) * h
        y0 = 0.5 * (ymin + ymax) - 0.5 * (ny - 1) * h
        xs = x0 + h * np.arange(nx)
        ys = y0 + h * np.arange(ny)
        tol = 1e-9 * h
        row_cross = [dom._line_crossings(y, 0) for y in ys]
        col_cross = [dom._line_crossings(x, 1) for x in xs]
        inside = np.zeros((ny, nx), dtype=bool)
        for r, xc in enumerate(row_cross):
            if xc.size:
                parity = np.searchsorted(xc, xs, side="right") % 2 == 1
                near = np.min(np.abs(xs[:, None] - xc[None, :]), axis=1) <= tol
                inside[r] = parity & ~near
        for c, yc in enumerate(col_cross):
            if yc.size:
                near = np.min(np.abs(ys[:, None] - yc[None, :]), axis=1) <= tol
                inside[near, c] = False
        inside[[0, -1], :] = False
        inside[:, [0, -1]] = False
        index = -np.ones((ny, nx), dtype=np.int64)
        index[inside] = np.arange(int(inside.sum()))

        nodes, drs, dcs, thetas, pxs, pys = [], [], [], [], [], []
        rr, cc = np.nonzero(inside)
        for dr, dc in _DIRECTIONS:
            r2, c2 = rr + dr, cc + dc
            out = ~inside[r2, c2]
            for r, c in zip(rr[out], cc[out]):
                if dr == 0:
                    line = row_cross[r]
                    base = xs[c]
                    sgn = dc
                else:
                    line = col_cross[c]
                    base = ys[r]
                    sgn = dr
                frac = (line - base) * sgn / h
                cand = frac[(frac > 0) & (frac <= 1.0 + 1e-12)]
                theta = float(cand.min()) if cand.size else 1.0
                theta = min(max(theta, THETA_MIN), 1.0)
                nodes.append(index[r, c])
                drs.append(dr)
                dcs.append(dc)
                thetas.append(theta)
                pxs.append(xs[c] + dc * theta * h)
                pys.append(ys[r] + dr * theta * h)
        links = {
            "node": np.asarray(nodes, dtype=np.int64),
            "dr": np.asarray(drs, dtype=np.int64),
            "dc": np.asarray(dcs, dtype=np.int64),
            "theta": np.asarray(thetas, dtype=np.float64),
            "px": np.asarray(pxs, dtype=np.float64),
            "py": np.asarray(pys, dtype=np.float64),
        }
        if not inside.any():
            raise GeometryError("grid has no interior nodes")
        return cls(x0, y0, h, nx, ny, inside, index, links)

    @property
    def n_interior(self):
        return int(self.inside.sum())

    def coords(self):
        """Node coordinate arrays ``X, Y`` of shape (ny, nx)."""
        xs = self.x0 + self.h * np.arange(self.nx)
        ys = self.y0 + self.h * np.arange(self.ny)
        return np.meshgrid(xs, ys)

    def interior_points(self):
        X, Y = self.coords()
        return np.stack([X[self.inside], Y[self.inside]], axis=1)

    def boundary_link_points(self):
        return np.stack([self.links["px"], self.links["py"]], axis=1)

    def regular_mask(self):
        """Interior nodes whose four neighbours are all interior (no cut link)."""
        mask = self.inside.copy()
        rr, cc = np.nonzero(self.inside)
        flat = np.zeros(self.n_interior, dtype=bool)
        flat[self.links["node"]] = True
        mask[rr[flat], cc[flat]] = False
        return mask

    # -- operators --------------------------------------------------------

    def neg_laplacian(self):
        """Sparse ``A`` (CSR) with ``A u = -Laplacian_h u`` for zero boundary data."""
        if "A" in self._ops:
            return self._ops["A"]
        n = self.n_interior
        rr, cc = np.nonzero(self.inside)
        idx = self.index[rr, cc]
        rows, cols, vals = [], [], []
        diag = np.zeros(n)
        for dr, dc in _DIRECTIONS:
            nb = self.inside[rr + dr, cc + dc]
            rows.append(idx[nb])
            cols.append(self.index[rr[nb] + dr, cc[nb] + dc])
            vals.append(-np.ones(int(nb.sum())))
            diag[idx[nb]] += 1.0
        np.add.at(diag, self.links["node"], 1.0 / self.links["theta"])
        rows.append(np.arange(n))
        cols.append(np.arange(n))
        vals.append(diag)
        A = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(n, n)) / self.h ** 2
        self._ops["A"] = A
        return A

    def boundary_rhs(self, values_at_crossings):
        """Right-hand side contribution of Dirichlet data given at link crossings."""
        b = np.zeros(self.n_interior)
        np.add.at(b, self.links["node"], values_at_crossings / (self.links["theta"] * self.h ** 2))
        return b

    def factor(self):
        if "lu" not in self._ops:
            self._ops["lu"] = spla.splu(self.neg_laplacian().tocsc())
        return self._ops["lu"]

    def solve_dirichlet(self, boundary_fn, tol=1e-10):
        """Harmonic grid function with Dirichlet data ``boundary_fn(points)``.

        ``boundary_fn`` may return several columns (one per data set).
        Returns interior values and the data at the link crossings.
        """
        data = np.asarray(boundary_fn(self.boundary_link_points()), dtype=np.float64)
        multi = data.ndim == 2
        data2 = data if multi else data[:, None]
        b = np.zeros((self.n_interior, data2.shape[1]))
        coef = 1.0 / (self.links["theta"] * self.h ** 2)
        np.add.at(b, self.links["node"], data2 * coef[:, None])
        A = self.neg_laplacian()
        u = self.factor().solve(b)
        res = np.abs(A @ u - b).max(axis=0) * self.h ** 2
        scale = np.maximum(1.0, np.abs(data2).max(axis=0))
        if np.any(res > tol * scale):
            u = u + self.factor().solve(b - A @ u)
            res = np.abs(A @ u - b).max(axis=0) * self.h ** 2
            if np.any(res > tol * scale):
                raise SolverError(f"Dirichlet solve residual {res.max():.3e} above {tol:g}", 2)
        return (u if multi else u[:, 0]), data

    def to_full(self, interior_values, fill=0.0):
        full = np.full((self.ny, self.nx), fill, dtype=np.float64)
        full[self.inside] = interior_values
        return full

    def ghost_fill(self, full, boundary_values):
        """Overwrite non-interior nodes next to the domain by linear extrapolation.

        Each such node takes the value of the line through the boundary
        crossing and the best-conditioned interior node on one of its links.
        Used only so that bilinear interpolation is second order up to the
        boundary.
        """
        out = full.copy()
        L = self.links
        rr, cc = np.nonzero(self.inside)
        r_in = rr[L["node"]]
        c_in = cc[L["node"]]
        r_out = r_in + L["dr"]
        c_out = c_in + L["dc"]
        theta = L["theta"]
        u_i = full[r_in, c_in]
        # for short links extrapolate from the next interior node instead
        r_far = r_in - L["dr"]
        c_far = c_in - L["dc"]
        ok_far = (r_far >= 0) & (r_far < self.ny) & (c_far >= 0) & (c_far < self.nx)
        ok_far &= self.inside[np.clip(r_far, 0, self.ny - 1), np.clip(c_far, 0, self.nx - 1)]
        use_far = (theta < 0.5) & ok_far
        u_far = full[np.clip(r_far, 0, self.ny - 1), np.clip(c_far, 0, self.nx - 1)]
        ghost = np.where(use_far,
                         boundary_values + (boundary_values - u_far) * (1 - theta) / (1 + theta),
                         u_i + (boundary_values - u_i) / theta)
        quality = np.where(use_far, 1 + theta, theta)
        order = np.argsort(quality, kind="stable")  # best link written last
        out[r_out[order], c_out[order]] = ghost[order]
        filled = self.inside.copy()
        filled[r_out, c_out] = True
        # diagonal corners: mean of filled 4-neighbours
        pad = np.pad(filled, 1)
        vals = np.pad(out * filled, 1)
        cnt = sum(np.roll(np.roll(pad, dr, 0), dc, 1) for dr, dc in _DIRECTIONS)[1:-1, 1:-1]
        tot = sum(np.roll(np.roll(vals, dr, 0), dc, 1) for dr, dc in _DIRECTIONS)[1:-1, 1:-1]
        diag = ~filled & (cnt > 0)
        out[diag] = tot[diag] / cnt[diag]
        return out

    def interpolate(self, full, pts):
        pts = np.asarray(pts, dtype=np.float64)
        return _kernels.bilinear(full, self.x0, self.y0, self.h, pts[..., 0], pts[..., 1])

    def node_of(self, pt):
        """Nearest node (row, col) to a point."""
        c = int(round((pt[0] - self.x0) / self.h))
        r = int(round((pt[1] - self.y0) / self.h))
        return min(max(r, 0), self.ny - 1), min(max(c, 0), self.nx - 1)


@dataclass
class ScalarField:
    """Grid-sampled function: ``values`` holds all nodes, shape (ny, nx)."""

    grid: Grid
    values: np.ndarray

    @property
    def h(self):
        return self.grid.h

    def interior(self):
        return self.values[self.grid.inside]

    def at(self, pts):
        return self.grid.interpolate(self.values, pts)

    def max_norm(self):
        return float(np.abs(self.interior()).max())

    def l2_norm(self):
        return float(math.sqrt(np.sum(self.interior() ** 2)) * self.grid.h)
