"""Set-ratio minimisation: Lambda = ell by Dinkelbach iteration, brute force, Cheeger constants."""
from __future__ import annotations

from dataclasses import dataclass, field

import maxflow
import numpy as np

from ..domain import RasterDomain
from ..errors import CapacityError, ConfigError, ParameterError
from ..finsler import FinslerNorm, eval_polar
from ..variation import CellSet, GridField, SetEnergy

BRUTE_FORCE_MAX_CELLS = 20


@dataclass
class LambdaOptions:
    tol: float = 1e-6
    max_outer: int = 50
    inner: str = "mincut"          # exact graph cut, or "pdhg" (relaxation + thresholding)
    thresholds: int = 64
    inner_max_iter: int = 10000
    inner_tol: float = 1e-7
    annulus_scan: int = 64
    stencil: str = "auto"
    boundary: str = "auto"


@dataclass
class SetRatioResult:
    value: float
    set: CellSet
    dinkelbach_path: list = field(default_factory=list)
    field: GridField | None = None
    threshold: float = 0.5
    beta: float = 0.0
    probed_min: float = np.inf
    n_probed: int = 0
    converged: bool = False
    stencil: str = ""
    boundary: str = ""
    annulus_radius: float | None = None

    def to_dict(self) -> dict:
        return {"value": self.value, "beta": self.beta, "cells": self.set.count,
                "volume": self.set.volume, "threshold": self.threshold,
                "dinkelbach_path": [[float(s), float(m)] for s, m in self.dinkelbach_path],
                "probed_min": float(self.probed_min), "n_probed": self.n_probed,
                "converged": self.converged, "stencil": self.stencil, "boundary": self.boundary,
                "annulus_radius": self.annulus_radius}


def _check_beta(beta: float) -> None:
    if not beta > -1:
        raise ParameterError("beta <= -1: Lambda is -inf; use divergence_demo")


class _Tracker:
    """Keeps the best probed set; ratios are evaluated by the same SetEnergy."""

    def __init__(self, energy: SetEnergy, beta: float):
        self.e, self.beta = energy, beta
        self.value, self.member, self.n = np.inf, None, 0
        self.tag = None

    def offer(self, sets: np.ndarray, tag=None) -> None:
        sets = np.atleast_2d(sets)
        sets = sets[sets.any(axis=1)]
        if not len(sets):
            return
        r = self.e.ratio(sets, self.beta)
        self.n += len(sets)
        cnt = sets.sum(axis=1)
        # strict improvement, ties go to the larger set
        order = np.lexsort((-cnt, r))
        k = order[0]
        if r[k] < self.value or (self.member is not None and r[k] == self.value and cnt[k] > self.member.sum()):
            self.value, self.member, self.tag = float(r[k]), sets[k].copy(), tag


class _CutSolver:
    """argmin over x in {0,1}^n of sum_e w_e |x_i - x_j| + (c - s h^N) . x for decreasing s.

    The graph keeps its residual flow between calls; lowering s only adds sink
    capacity, so each later solve is incremental.
    """

    def __init__(self, e: SetEnergy, c: np.ndarray):
        self.e, self.c = e, c
        self.vol = e.raster.cell_volume
        self.g = None
        self.s = None

    def _build(self, s: float) -> None:
        e, n = self.e, len(self.c)
        g = maxflow.Graph[float](n, len(e.edge_w))
        self.nodes = g.add_nodes(n)
        g.add_edges(self.nodes[e.edge_i], self.nodes[e.edge_j], e.edge_w, e.edge_w)
        u = self.c - s * self.vol
        g.add_grid_tedges(self.nodes, np.maximum(-u, 0.0), np.maximum(u, 0.0))
        self.g, self.s, self.fresh = g, s, True

    def __call__(self, s: float) -> np.ndarray:
        if self.g is None or s > self.s:
            self._build(s)
        elif s < self.s:
            self.g.add_grid_tedges(self.nodes, np.zeros(len(self.c)), np.full(len(self.c), (self.s - s) * self.vol))
            self.g.mark_grid_nodes(self.nodes)
            self.s = s
        self.g.maxflow(reuse_trees=not self.fresh)
        self.fresh = False
        return ~self.g.get_grid_segments(self.nodes)


def _pdhg(e: SetEnergy, unary: np.ndarray, x0: np.ndarray, max_iter: int, tol: float) -> tuple[np.ndarray, int]:
    """min over x in [0,1]^n of sum_e w_e |x_j - x_i| + unary . x, primal-dual with edge duals.

    The dual y_e is the flux of g across edge e; |y_e| <= w_e is the per-edge
    form of F°(g) <= 1 and clipping is its radial rescaling.  Diagonal
    preconditioning (tau_i = 1/deg_i, sigma_e = 1/2) guarantees convergence.
    """
    n = len(unary)
    i, j, w = e.edge_i, e.edge_j, e.edge_w
    deg = np.bincount(i, minlength=n) + np.bincount(j, minlength=n)
    tau = 1.0 / np.maximum(deg, 1)
    sigma = 0.5
    x = x0.copy()
    xb = x.copy()
    y = np.zeros(len(w))
    for it in range(1, max_iter + 1):
        y = np.clip(y + sigma * (xb[j] - xb[i]), -w, w)
        KTy = np.bincount(j, y, minlength=n) - np.bincount(i, y, minlength=n)
        xn = np.clip(x - tau * (KTy + unary), 0.0, 1.0)
        xb = 2 * xn - x
        step = np.max(np.abs(xn - x))
        x = xn
        if step < tol:
            break
    return x, it


def _threshold_sets(x: np.ndarray, levels: int) -> tuple[np.ndarray, np.ndarray]:
    lo, hi = float(x.min()), float(x.max())
    if hi - lo < 1e-12:
        t = np.array([0.5 * (lo + hi) - 1.0])  # constant field: its only nonempty level set is everything
        return x[None, :] > t[:, None], t
    t = lo + (hi - lo) * (np.arange(levels) + 0.5) / levels
    return x[None, :] > t[:, None], t


def _annulus_sets(grid: RasterDomain, F: FinslerNorm, n: int) -> tuple[np.ndarray, np.ndarray]:
    c = np.asarray(grid.link.center if grid.link is not None else grid.centers.mean(axis=0))
    rho = eval_polar(F, grid.centers - c)
    radii = np.linspace(0.0, rho.max(), n, endpoint=False)
    return rho[None, :] > radii[:, None], radii


def solve_Lambda(grid: RasterDomain, F: FinslerNorm, beta: float, opts: LambdaOptions | None = None,
                 **kw) -> SetRatioResult:
    """Lambda(Omega, beta) by Dinkelbach iteration on lattice sets.

    Each outer step minimises G_s(E) = P(E) + min(1, beta) P(E; boundary) - s |E|,
    exactly by a minimum cut (default) or through a convex relaxation that is
    thresholded; s is then replaced by the best ratio seen so far.
    """
    opts = opts or LambdaOptions(**kw)
    _check_beta(beta)
    if opts.inner not in ("mincut", "pdhg"):
        raise ConfigError(f"unknown inner solver {opts.inner!r}")
    e = SetEnergy.build(grid, F, opts.stencil, opts.boundary)
    bh = min(1.0, beta)
    track = _Tracker(e, beta)
    full = np.ones(grid.n_cells, bool)
    track.offer(full, "full")
    radii = None
    if beta < 0 and opts.annulus_scan > 0:
        sets, radii = _annulus_sets(grid, F, opts.annulus_scan)
        track.offer(sets, "annulus")
    vol = grid.cell_volume
    s = track.value
    path, x, t_star, converged = [], full.astype(float), 0.5, False
    cut = _CutSolver(e, bh * e.bnd_w) if opts.inner == "mincut" else None
    for _ in range(opts.max_outer):
        unary = bh * e.bnd_w - s * vol
        if cut is not None:
            cand = cut(s)[None, :]
            xs, ts = cand.astype(float)[0], np.array([0.5])
        else:
            xs, _ = _pdhg(e, unary, x, opts.inner_max_iter, opts.inner_tol)
            cand, ts = _threshold_sets(xs, opts.thresholds)
        G = e.interior(cand) + e.shared(cand) * bh - s * e.volume(cand)
        m = float(min(0.0, G.min()))
        path.append((s, m))
        before = track.value
        track.offer(cand, "dinkelbach")
        if track.tag == "dinkelbach" and track.value < before:
            x = xs
            k = int(np.argmin(G))
            t_star = float(ts[k])
        gain = s - track.value
        s = track.value
        if m >= -opts.tol * max(1.0, abs(s)) * grid.area or gain < opts.tol:
            converged = True
            break
    member = track.member
    fld = GridField(grid, x if opts.inner == "pdhg" else member.astype(float))
    ann = None
    if track.tag == "annulus" and radii is not None:
        sets, _ = _annulus_sets(grid, F, opts.annulus_scan)
        ann = float(radii[np.nonzero((sets == member).all(axis=1))[0][0]])
    elif beta < 0:
        ann = 0.0 if member.all() else None
    return SetRatioResult(track.value, CellSet(grid, member), path, fld, t_star, beta, track.value, track.n,
                          converged, e.stencil, e.boundary, ann)


def brute_force_ell(grid: RasterDomain, F: FinslerNorm, beta: float, stencil: str = "auto",
                    boundary: str = "auto", chunk: int = 1 << 15) -> tuple[float, CellSet]:
    """Exact minimum of R(E, beta) over all nonempty subsets (at most 20 cells).

    Ties go to the larger set, then to the lexicographically smallest list of
    member cell indices.
    """
    n = grid.n_cells
    if n > BRUTE_FORCE_MAX_CELLS:
        raise CapacityError(f"{n} cells exceed the brute-force limit of {BRUTE_FORCE_MAX_CELLS}")
    e = SetEnergy.build(grid, F, stencil, boundary)
    bits = np.arange(n)
    pool = []
    for start in range(1, 1 << n, chunk):
        k = np.arange(start, min(start + chunk, 1 << n), dtype=np.int64)
        sets = ((k[:, None] >> bits) & 1).astype(bool)
        r = e.ratio(sets, beta)
        keep = r <= r.min() + 1e-12 * max(1.0, abs(r.min()))
        pool.extend(zip(r[keep].tolist(), sets[keep]))
    vmin = min(v for v, _ in pool)
    ties = [m for v, m in pool if v <= vmin + 1e-12 * max(1.0, abs(vmin))]
    best = min(ties, key=lambda m: (-int(m.sum()), list(np.nonzero(m)[0])))
    return float(e.ratio(best, beta)), CellSet(grid, best)


def cheeger_constant(grid: RasterDomain, F: FinslerNorm, **kw) -> float:
    """h_F(Omega): the set ratio with the boundary portion counted in full (beta = 1)."""
    return solve_Lambda(grid, F, 1.0, **kw).value


def annulus_ratio(r: float, R: float, beta: float, N: int = 2) -> float:
    """R(W_R minus closed W_r, beta) = N (r^(N-1) + min(1,beta) R^(N-1)) / (R^N - r^N)."""
    bh = min(1.0, beta)
    return N * (r ** (N - 1) + bh * R ** (N - 1)) / (R ** N - r ** N)


def divergence_demo(grid: RasterDomain, F: FinslerNorm, beta: float, radii=None,
                    stencil: str = "auto", boundary: str = "auto") -> list[tuple[float, float]]:
    """Ratios of the annuli {r < F°(x - x0) < R} as r increases, for beta < -1."""
    if not beta < -1:
        raise ParameterError("divergence_demo is meant for beta < -1")
    if grid.link is None or grid.link.family != "wulff":
        raise ParameterError("divergence_demo needs a raster of a Wulff shape")
    R = grid.link.params["R"]
    h = grid.h
    if radii is None:
        radii = np.arange(0.0, R - 3 * h, h)
    e = SetEnergy.build(grid, F, stencil, boundary)
    rho = eval_polar(F, grid.centers - np.asarray(grid.link.center))
    out = []
    for r in radii:
        m = rho > r
        if not m.any():
            break
        out.append((float(r), float(e.ratio(m, beta))))
    return out
