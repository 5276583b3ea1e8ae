"""Analytic domain families and their cell-centred raster discretisations."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Mapping

import numpy as np
from scipy.spatial import cKDTree

from .errors import ConfigError, DiscretizationError, DomainError, UnsupportedDomainError
from .finsler import FinslerNorm, eval_gradient, eval_norm, eval_polar

FAMILIES = ("wulff", "ellipse", "rectangle", "annulus")
MAX_CELLS_PER_AXIS = 2048


def _golden_min(f, a: np.ndarray, b: np.ndarray, iters: int = 80) -> np.ndarray:
    """Batched golden-section search; min of f over [a, b] per entry (f unimodal)."""
    g = (math.sqrt(5) - 1) / 2
    a, b = a.astype(float).copy(), b.astype(float).copy()
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        left = fc < fd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        c_new, d_new = b - g * (b - a), a + g * (b - a)
        # reuse the surviving interior point
        keep = np.where(left, fc, fd)
        c, d = np.where(left, c_new, d), np.where(left, c, d_new)
        fnew = f(np.where(left, c, d))
        fc, fd = np.where(left, fnew, keep), np.where(left, keep, fnew)
    return np.minimum(fc, fd)


@dataclass(frozen=True)
class BoundaryQuadrature:
    """Nodes y, unit outward normals nu(y) and arclength weights on the boundary."""

    points: np.ndarray
    normals: np.ndarray
    weights: np.ndarray

    def integrate(self, values, F: FinslerNorm | None = None) -> float:
        """sum_y values(y) F(nu(y)) w_y (Euclidean F if None)."""
        fn = np.ones(len(self.weights)) if F is None else eval_norm(F, self.normals)
        return float(np.sum(np.asarray(values) * fn * self.weights))


@dataclass(frozen=True, eq=False)
class AnalyticDomain:
    """A parametric planar domain.

    ``params`` per family: wulff ``R``; ellipse ``a, b``; rectangle ``w, h``;
    annulus ``r, R`` (the set ``r < F°(x - center) < R``).  ``norm``
    generates the Wulff and annulus families and is ignored otherwise.
    """

    family: str
    params: Mapping[str, float]
    center: tuple[float, float] = (0.0, 0.0)
    norm: FinslerNorm = field(default_factory=FinslerNorm.euclidean)
    quadrature_nodes: int = 4096

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown domain family {self.family!r}")
        need = {"wulff": ("R",), "ellipse": ("a", "b"), "rectangle": ("w", "h"), "annulus": ("r", "R")}[self.family]
        try:
            p = {k: float(self.params[k]) for k in need}
        except KeyError as exc:
            raise ConfigError(f"{self.family} domain needs parameters {need}") from exc
        if min(p.values()) < 0 or (self.family != "annulus" and min(p.values()) <= 0):
            raise ConfigError("domain parameters must be positive")
        if self.family == "annulus" and not p["r"] < p["R"]:
            raise ConfigError("annulus needs r < R")
        object.__setattr__(self, "params", p)
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    # -- description ---------------------------------------------------------

    @property
    def label(self) -> str:
        vals = "-".join(f"{v:g}" for v in self.params.values())
        return f"{self.family}{vals}"

    def to_config(self) -> dict:
        return {"family": self.family, **self.params, "center": list(self.center),
                "quadrature_nodes": self.quadrature_nodes}

    @property
    def is_c2(self) -> bool:
        return self.family != "rectangle"

    @property
    def area(self) -> float:
        p = self.params
        if self.family == "wulff":
            return self.norm.kappa * p["R"] ** 2
        if self.family == "ellipse":
            return math.pi * p["a"] * p["b"]
        if self.family == "rectangle":
            return p["w"] * p["h"]
        return self.norm.kappa * (p["R"] ** 2 - p["r"] ** 2)

    @property
    def half_extent(self) -> np.ndarray:
        p = self.params
        if self.family in ("wulff", "annulus"):
            # support function of W_R is R F
            return p["R"] * eval_norm(self.norm, np.eye(2))
        if self.family == "ellipse":
            return np.array([p["a"], p["b"]])
        return np.array([p["w"], p["h"]]) / 2.0

    def gauge(self, x) -> np.ndarray:
        """A level function with the domain = {gauge < 1} (annulus: outer part)."""
        d = np.asarray(x, dtype=float) - np.asarray(self.center)
        p = self.params
        if self.family in ("wulff", "annulus"):
            return eval_polar(self.norm, d) / p["R"]
        if self.family == "ellipse":
            return np.sqrt((d[..., 0] / p["a"]) ** 2 + (d[..., 1] / p["b"]) ** 2)
        return np.maximum(np.abs(d[..., 0]) / (p["w"] / 2), np.abs(d[..., 1]) / (p["h"] / 2))

    def contains(self, x) -> np.ndarray:
        inside = self.gauge(x) < 1.0
        if self.family == "annulus":
            d = np.asarray(x, dtype=float) - np.asarray(self.center)
            inside &= eval_polar(self.norm, d) > self.params["r"]
        return inside

    def on_boundary(self, x, tol: float = 1e-12) -> np.ndarray:
        g = self.gauge(x)
        out = np.abs(g - 1.0) <= tol
        if self.family == "annulus":
            d = np.asarray(x, dtype=float) - np.asarray(self.center)
            out |= np.abs(eval_polar(self.norm, d) - self.params["r"]) <= tol * self.params["R"]
        return out

    # -- boundary ------------------------------------------------------------

    def _curve(self, t: np.ndarray, component: int = 0):
        """Counter-clockwise (outer) / clockwise (inner) parametrisation and x'(t)."""
        c = np.asarray(self.center)
        p = self.params
        e = np.stack([np.cos(t), np.sin(t)], axis=-1)
        ep = np.stack([-np.sin(t), np.cos(t)], axis=-1)
        if self.family == "ellipse":
            x = c + e * [p["a"], p["b"]]
            dx = ep * [p["a"], p["b"]]
            return x, dx
        if self.family in ("wulff", "annulus"):
            R = p["R"] if component == 0 else p["r"]
            fo = eval_polar(self.norm, e)
            rho = 1.0 / fo
            drho = -np.sum(eval_gradient(self.norm.dual, e) * ep, axis=-1) / fo ** 2
            x = c + R * rho[:, None] * e
            dx = R * (drho[:, None] * e + rho[:, None] * ep)
            if component == 1:
                return x[::-1], -dx[::-1]
            return x, dx
        raise UnsupportedDomainError("rectangle has no smooth parametrisation")

    def boundary_quadrature(self, nodes: int | None = None) -> BoundaryQuadrature:
        n = int(nodes or self.quadrature_nodes)
        if nodes is None and "_quad" in self.__dict__:
            return self.__dict__["_quad"]
        if self.family == "rectangle":
            q = self._rectangle_quadrature(n)
        else:
            comps = self._component_sizes(n)
            pts, nrm, wts = [], [], []
            for comp, m in comps:
                t = 2 * np.pi * np.arange(m) / m
                x, dx = self._curve(t, comp)
                speed = np.linalg.norm(dx, axis=-1)
                pts.append(x)
                nrm.append(np.stack([dx[:, 1], -dx[:, 0]], axis=-1) / speed[:, None])
                wts.append(speed * 2 * np.pi / m)
            q = BoundaryQuadrature(np.concatenate(pts), np.concatenate(nrm), np.concatenate(wts))
        if nodes is None:
            self.__dict__["_quad"] = q
        return q

    def _rectangle_quadrature(self, n: int) -> BoundaryQuadrature:
        w, h = self.params["w"], self.params["h"]
        cx, cy = self.center
        pts, nrm, wts = [], [], []
        sides = [  # start corner, direction, length, normal
            ((cx - w / 2, cy - h / 2), (1, 0), w, (0, -1)),
            ((cx + w / 2, cy - h / 2), (0, 1), h, (1, 0)),
            ((cx + w / 2, cy + h / 2), (-1, 0), w, (0, 1)),
            ((cx - w / 2, cy + h / 2), (0, -1), h, (-1, 0)),
        ]
        for start, d, length, nu in sides:
            m = max(1, int(round(n * length / (2 * (w + h)))))
            s = (np.arange(m) + 0.5) / m * length
            pts.append(np.asarray(start) + s[:, None] * np.asarray(d, float))
            nrm.append(np.tile(np.asarray(nu, float), (m, 1)))
            wts.append(np.full(m, length / m))
        return BoundaryQuadrature(np.concatenate(pts), np.concatenate(nrm), np.concatenate(wts))

    def perimeter(self, F: FinslerNorm | None = None) -> float:
        """Anisotropic perimeter P_F(domain) = integral of F(nu) over the boundary."""
        q = self.boundary_quadrature()
        return q.integrate(np.ones(len(q.weights)), F)

    def green_area(self, nodes: int | None = None) -> float:
        """Area from the boundary quadrature, 1/2 integral of x . nu."""
        q = self.boundary_quadrature(nodes)
        return float(0.5 * np.sum(np.sum(q.points * q.normals, axis=-1) * q.weights))

    def boundary_distance(self, x, F: FinslerNorm) -> np.ndarray:
        """min over the boundary of F°(x - y): node search then local refinement."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        q = self.boundary_quadrature()
        best = np.empty(len(x))
        j = np.empty(len(x), dtype=np.int64)
        step = max(1, (1 << 21) // len(q.weights))
        for s in range(0, len(x), step):
            d = eval_polar(F, x[s:s + step, None, :] - q.points[None])
            j[s:s + step] = np.argmin(d, axis=1)
            best[s:s + step] = d[np.arange(len(d)), j[s:s + step]]
        if self.family == "rectangle":
            return np.minimum(best, self._rectangle_distance(x, F))
        comp, t0, dt = (np.array(v) for v in zip(*(self._node_parameter(k) for k in range(len(q.weights)))))
        for c in np.unique(comp[j]):
            m = comp[j] == c
            xs, tj, dj = x[m], t0[j[m]], dt[j[m]]
            f = lambda t: eval_polar(F, xs - self._point(t, int(c)))
            best[m] = np.minimum(best[m], _golden_min(f, tj - dj, tj + dj))
        return best

    def _point(self, t: np.ndarray, component: int) -> np.ndarray:
        """Boundary point at angle parameter t, one per entry of t."""
        c = np.asarray(self.center)
        e = np.stack([np.cos(t), np.sin(t)], axis=-1)
        if self.family == "ellipse":
            return c + e * [self.params["a"], self.params["b"]]
        R = self.params["R"] if component == 0 else self.params["r"]
        return c + R * e / eval_polar(self.norm, e)[:, None]

    def _component_sizes(self, n: int) -> list[tuple[int, int]]:
        if self.family == "annulus" and self.params["r"] > 0:
            n_in = max(16, int(round(n * self.params["r"] / (self.params["R"] + self.params["r"]))))
            return [(0, n - n_in), (1, n_in)]
        return [(0, n)]

    def _node_parameter(self, j: int) -> tuple[int, float, float]:
        """(component, curve parameter t, node spacing dt) of quadrature node j."""
        offset = 0
        for comp, m in self._component_sizes(self.quadrature_nodes):
            if j < offset + m:
                k = j - offset
                # inner ring nodes are stored in reverse order
                k = m - 1 - k if comp == 1 else k
                return comp, 2 * np.pi * k / m, 2 * np.pi / m
            offset += m
        raise IndexError(j)

    def _rectangle_distance(self, x, F: FinslerNorm) -> np.ndarray:
        w, h = self.params["w"], self.params["h"]
        cx, cy = self.center
        corners = np.array([[cx - w / 2, cy - h / 2], [cx + w / 2, cy - h / 2],
                            [cx + w / 2, cy + h / 2], [cx - w / 2, cy + h / 2]])
        best = np.full(len(x), np.inf)
        one = np.ones(len(x))
        for a, b in zip(corners, np.roll(corners, -1, axis=0)):
            # F° is convex along the segment, so golden section is exact
            f = lambda s: eval_polar(F, x - (a + s[:, None] * (b - a)))
            best = np.minimum(best, _golden_min(f, 0 * one, one))
            best = np.minimum(best, eval_polar(F, x - a))
        return best

    @property
    def star_clearance(self) -> float:
        """Euclidean distance from the centre to the boundary (star-shapedness radius)."""
        if self.family == "annulus":
            raise UnsupportedDomainError("annulus is not star-shaped about its centre")
        q = self.boundary_quadrature()
        return float(np.min(np.linalg.norm(q.points - np.asarray(self.center), axis=-1)))

    @property
    def min_curvature_radius(self) -> float:
        """Radius of the uniform interior ball condition (Euclidean)."""
        p = self.params
        if self.family == "ellipse":
            return min(p["a"], p["b"]) ** 2 / max(p["a"], p["b"])
        if self.family == "wulff":
            return p["R"] * self.norm.wulff_min_curvature_radius
        raise UnsupportedDomainError(f"{self.family} has no uniform interior ball radius here")

    # -- constructors --------------------------------------------------------

    @classmethod
    def from_config(cls, cfg: Mapping[str, Any], norm: FinslerNorm | None = None) -> "AnalyticDomain":
        cfg = dict(cfg)
        family = str(cfg.pop("family", "")).lower()
        if family == "disk":
            family, cfg["R"] = "wulff", cfg.pop("R", cfg.pop("radius", 1.0))
            norm = FinslerNorm.euclidean()
        if family == "square":
            family = "rectangle"
            side = float(cfg.pop("side"))
            cfg["w"] = cfg["h"] = side
        center = cfg.pop("center", (0.0, 0.0))
        if isinstance(center, str):
            center = [float(v) for v in center.replace(",", " ").split()]
        nodes = int(cfg.pop("quadrature_nodes", 4096))
        for k in ("h",) if family != "rectangle" else ():
            cfg.pop(k, None)
        params = {k: float(v) for k, v in cfg.items() if k in ("R", "r", "a", "b", "w", "h")}
        return cls(family, params, tuple(center), norm or FinslerNorm.euclidean(), nodes)


def wulff(R: float = 1.0, norm: FinslerNorm | None = None, center=(0.0, 0.0), nodes: int = 4096) -> AnalyticDomain:
    return AnalyticDomain("wulff", {"R": R}, center, norm or FinslerNorm.euclidean(), nodes)


def disk(R: float = 1.0, center=(0.0, 0.0), nodes: int = 4096) -> AnalyticDomain:
    return wulff(R, FinslerNorm.euclidean(), center, nodes)


def ellipse(a: float, b: float, center=(0.0, 0.0), nodes: int = 4096) -> AnalyticDomain:
    return AnalyticDomain("ellipse", {"a": a, "b": b}, center, FinslerNorm.euclidean(), nodes)


def rectangle(w: float, h: float, center=None, nodes: int = 4096) -> AnalyticDomain:
    center = (w / 2, h / 2) if center is None else center
    return AnalyticDomain("rectangle", {"w": w, "h": h}, center, FinslerNorm.euclidean(), nodes)


def annulus(r: float, R: float, norm: FinslerNorm | None = None, center=(0.0, 0.0), nodes: int = 4096) -> AnalyticDomain:
    return AnalyticDomain("annulus", {"r": r, "R": R}, center, norm or FinslerNorm.euclidean(), nodes)


# ---------------------------------------------------------------------------
# rasters


@dataclass(frozen=True, eq=False)
class RasterDomain:
    """Cell-centred uniform raster; ``mask[i, j]`` marks cells inside the domain.

    Inside cells are numbered in C order of ``(i, j)``; per-cell arrays
    (fields, sets) use that numbering.
    """

    origin: np.ndarray
    h: float
    mask: np.ndarray
    link: AnalyticDomain | None = None
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        m = np.array(self.mask, dtype=bool)
        m.setflags(write=False)
        object.__setattr__(self, "mask", m)
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=float))
        if self.h <= 0:
            raise ConfigError("raster spacing must be positive")

    @classmethod
    def from_mask(cls, mask, h: float = 1.0, origin=(0.0, 0.0)) -> "RasterDomain":
        return cls(np.asarray(origin, float), float(h), np.asarray(mask, bool))

    @property
    def dim(self) -> int:
        return self.mask.ndim

    @property
    def shape(self) -> tuple[int, ...]:
        return self.mask.shape

    @property
    def cell_volume(self) -> float:
        return self.h ** self.dim

    @cached_property
    def index(self) -> np.ndarray:
        idx = -np.ones(self.mask.shape, dtype=np.int64)
        idx[self.mask] = np.arange(int(self.mask.sum()))
        idx.setflags(write=False)
        return idx

    @cached_property
    def cells(self) -> np.ndarray:
        """(n, N) integer lattice coordinates of inside cells."""
        return np.argwhere(self.mask)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @cached_property
    def centers(self) -> np.ndarray:
        return self.origin + (self.cells + 0.5) * self.h

    @property
    def area(self) -> float:
        return self.n_cells * self.cell_volume

    def neighbor(self, offset) -> np.ndarray:
        """Index of the inside cell at ``cell + offset`` or -1."""
        key = ("nbr", tuple(int(o) for o in offset))
        if key not in self._cache:
            tgt = self.cells + np.asarray(offset, dtype=np.int64)
            ok = np.all((tgt >= 0) & (tgt < np.asarray(self.shape)), axis=1)
            out = -np.ones(self.n_cells, dtype=np.int64)
            out[ok] = self.index[tuple(tgt[ok].T)]
            self._cache[key] = out
        return self._cache[key]

    @cached_property
    def boundary_faces(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(cell index, axis, sign) for every face between an inside and an outside cell."""
        cells, axes, signs = [], [], []
        for axis in range(self.dim):
            for sign in (-1, 1):
                off = np.zeros(self.dim, dtype=np.int64)
                off[axis] = sign
                out = np.nonzero(self.neighbor(off) < 0)[0]
                cells.append(out)
                axes.append(np.full(len(out), axis))
                signs.append(np.full(len(out), sign))
        order = np.argsort(np.concatenate(cells), kind="stable")
        return (np.concatenate(cells)[order], np.concatenate(axes)[order], np.concatenate(signs)[order])

    @property
    def face_measure(self) -> float:
        return self.h ** (self.dim - 1)

    @cached_property
    def trace_cells(self) -> np.ndarray:
        """Nearest inside cell for each node of the linked boundary quadrature."""
        if self.link is None:
            raise DomainError("raster has no linked analytic domain")
        q = self.link.boundary_quadrature()
        dist, cell = cKDTree(self.centers).query(q.points)
        if np.any(dist > 2 * self.h * math.sqrt(self.dim)):
            raise DiscretizationError("boundary node without an inside cell within 2h*sqrt(N); refine h")
        return cell.astype(np.int64)

    def trace_weights(self, F: FinslerNorm) -> np.ndarray:
        """Per-cell boundary mass b_c = sum over nodes mapped to c of F(nu) w_y."""
        key = ("trace", F)
        if key not in self._cache:
            q = self.link.boundary_quadrature() if self.link is not None else None
            if q is None:
                raise DomainError("raster has no linked analytic domain")
            b = np.bincount(self.trace_cells, weights=eval_norm(F, q.normals) * q.weights,
                            minlength=self.n_cells)
            self._cache[key] = b
        return self._cache[key]

    def face_weights(self, F: FinslerNorm) -> np.ndarray:
        """Per-cell boundary mass from raster faces with axis normals."""
        key = ("faces", F)
        if key not in self._cache:
            cell, axis, _ = self.boundary_faces
            fe = eval_norm(F, np.eye(self.dim))
            self._cache[key] = np.bincount(cell, weights=fe[axis] * self.face_measure, minlength=self.n_cells)
        return self._cache[key]

    def to_pgm(self, values=None) -> str:
        """Plain (P2) grey-map text; the mask, or per-cell values scaled to 0..255."""
        img = np.zeros(self.shape)
        if values is None:
            img[self.mask] = 255
        else:
            v = np.asarray(values, float)
            lo, hi = float(v.min()), float(v.max())
            img[self.mask] = 255 * (v - lo) / (hi - lo) if hi > lo else 255
        # rows of the image run along -y
        rows = np.flipud(img.T).astype(int)
        body = "\n".join(" ".join(str(x) for x in row) for row in rows)
        return f"P2\n{rows.shape[1]} {rows.shape[0]}\n255\n{body}\n"


def build_raster(domain: AnalyticDomain, h: float) -> RasterDomain:
    """Cells whose centre lies inside ``domain``; lattice aligned to its bounding box."""
    if not h > 0:
        raise ConfigError("h must be positive")
    half = domain.half_extent
    counts = np.ceil(2 * half / h - 1e-9).astype(int)
    if np.any(counts > MAX_CELLS_PER_AXIS):
        raise ConfigError(f"resolution {counts.tolist()} exceeds {MAX_CELLS_PER_AXIS} cells per axis")
    origin = np.asarray(domain.center) - counts * h / 2.0
    axes = [origin[k] + (np.arange(counts[k]) + 0.5) * h for k in range(2)]
    X = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    mask = domain.contains(X)
    if not mask.any():
        raise DiscretizationError("raster has no inside cells; refine h")
    return RasterDomain(origin, float(h), mask, domain)


@dataclass(frozen=True)
class TraceSamples:
    points: np.ndarray
    normals: np.ndarray
    weights: np.ndarray
    cells: np.ndarray
    values: np.ndarray

    def integral(self, g=np.abs, F: FinslerNorm | None = None) -> float:
        fn = np.ones(len(self.weights)) if F is None else eval_norm(F, self.normals)
        return float(np.sum(g(self.values) * fn * self.weights))


def boundary_trace_samples(domain: AnalyticDomain, grid: RasterDomain, u) -> TraceSamples:
    """Boundary nodes with u(y-) read from the nearest inside cell."""
    if grid.link is not domain:
        raise DomainError("raster was not generated from this domain")
    q = domain.boundary_quadrature()
    vals = np.asarray(getattr(u, "values", u), dtype=float)
    cells = grid.trace_cells
    return TraceSamples(q.points, q.normals, q.weights, cells, vals[cells])
