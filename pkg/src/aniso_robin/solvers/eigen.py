"""First Robin eigenvalue of the Finsler p-Laplacian: grid minimisation and radial shooting."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import minimize

from ..domain import RasterDomain
from ..errors import BracketError, ParameterError, UnsupportedDomainError
from ..finsler import FinslerNorm, eval_gradient, eval_norm, eval_polar
from ..variation import (GridField, boundary_weights, forward_differences,
                         forward_differences_adjoint, rayleigh_Jp)


@dataclass
class EigenOptions:
    tol: float = 1e-8
    max_iter: int = 20000
    method: str = "lbfgs"          # or "descent" (projected gradient with backtracking)
    boundary: str = "auto"
    second_start: bool = True      # radial start for beta < 0


@dataclass
class EigenResult:
    lambda_: float
    field: GridField
    p: float
    beta: float
    residual_history: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    start: str = "constant"

    @property
    def value(self) -> float:
        return self.lambda_

    def to_dict(self) -> dict:
        return {"lambda": self.lambda_, "p": self.p, "beta": self.beta, "iterations": self.iterations,
                "converged": self.converged, "start": self.start,
                "residual_history": [float(v) for v in self.residual_history]}


def _check_p_beta(p: float, beta: float, pmax: float | None = 4.0) -> None:
    if not p > 1 or (pmax is not None and p > pmax):
        raise ParameterError(f"p must lie in (1, {pmax}], got {p}")
    if not beta > -1:
        raise ParameterError("beta <= -1 makes the problem ill-posed (the infimum is -inf)")


class _JpObjective:
    """J_p and its gradient on non-negative cell values."""

    def __init__(self, grid: RasterDomain, F: FinslerNorm, p: float, beta: float, boundary: str):
        self.grid, self.F, self.p, self.beta = grid, F, p, beta
        self.b = boundary_weights(grid, F, boundary)
        self.vol = grid.cell_volume
        self.evals = 0

    def __call__(self, x: np.ndarray) -> tuple[float, np.ndarray]:
        self.evals += 1
        p, g, F = self.p, self.grid, self.F
        u = GridField(g, x)
        D = forward_differences(u)
        f = eval_norm(F, D)
        ax = np.abs(x)
        num = np.sum(f ** p) * self.vol + self.beta * np.dot(self.b, ax ** p)
        den = np.sum(ax ** p) * self.vol
        G = np.zeros_like(D)
        nz = f > 0
        if np.any(nz):
            G[nz] = (p * f[nz] ** (p - 1))[:, None] * eval_gradient(F, D[nz])
        dnum = forward_differences_adjoint(g, G) * self.vol
        dnum += self.beta * p * self.b * ax ** (p - 1) * np.sign(x)
        dden = p * ax ** (p - 1) * np.sign(x) * self.vol
        return float(num / den), (dnum - num / den * dden) / den


def _normalize(x: np.ndarray, p: float, vol: float) -> np.ndarray:
    return x / (np.sum(np.abs(x) ** p) * vol) ** (1.0 / p)


def _run_lbfgs(obj: _JpObjective, x0: np.ndarray, opts: EigenOptions):
    hist = []
    res = minimize(obj, x0, jac=True, method="L-BFGS-B", bounds=[(0.0, None)] * len(x0),
                   callback=lambda xk: hist.append(obj(xk)[0]),
                   options={"maxiter": opts.max_iter, "ftol": opts.tol, "gtol": 1e-12, "maxcor": 20})
    return res.x, float(res.fun), hist, int(res.nit), bool(res.success)


def _run_descent(obj: _JpObjective, x0: np.ndarray, opts: EigenOptions):
    p, vol = obj.p, obj.vol
    x = _normalize(x0, p, vol)
    J, grad = obj(x)
    hist, step, ok = [J], 1.0, False
    for it in range(1, opts.max_iter + 1):
        while True:
            y = _normalize(np.maximum(x - step * grad, 0.0), p, vol)
            Jy, gy = obj(y)
            if Jy <= J - 1e-4 * np.dot(grad, x - y) or step < 1e-14:
                break
            step *= 0.5
        rel = abs(J - Jy) / max(1.0, abs(J))
        x, J, grad = y, Jy, gy
        hist.append(J)
        step *= 2.0
        if rel < opts.tol:
            ok = True
            break
    return x, J, hist, it, ok


def solve_lambda_p(grid: RasterDomain, F: FinslerNorm, p: float, beta: float,
                   opts: EigenOptions | None = None, **kw) -> EigenResult:
    """Minimise J_p over non-negative grid fields; the minimiser is normalised to ||u||_p = 1."""
    opts = opts or EigenOptions(**kw)
    _check_p_beta(p, beta)
    if beta < 0 and (grid.link is None or not grid.link.is_c2):
        raise UnsupportedDomainError("beta < 0 needs a raster generated from a C2 domain")
    vol = grid.cell_volume
    x0 = np.full(grid.n_cells, grid.area ** (-1.0 / p))
    if beta == 0:
        return EigenResult(0.0, GridField(grid, x0), p, beta, [0.0], 0, True)
    obj = _JpObjective(grid, F, p, beta, opts.boundary)
    run = {"lbfgs": _run_lbfgs, "descent": _run_descent}[opts.method]
    starts = [("constant", x0)]
    if beta < 0 and opts.second_start:
        link = grid.link
        x0c = np.asarray(link.center)
        R = float(np.max(eval_polar(F, grid.centers - x0c)))
        starts.append(("radial", _normalize(1 + 0.1 * eval_polar(F, grid.centers - x0c) / R, p, vol)))
    best = None
    for name, s in starts:
        x, _, hist, it, ok = run(obj, s, opts)
        x = _normalize(np.maximum(x, 0.0), p, vol)
        u = GridField(grid, x)
        lam = rayleigh_Jp(u, F, p, beta, opts.boundary)
        r = EigenResult(lam, u, p, beta, hist, it, ok, name)
        if best is None or r.lambda_ < best.lambda_:
            best = r
    return best


# ---------------------------------------------------------------------------
# radial shooting on Wulff shapes


@dataclass
class RadialResult:
    lambda_: float
    r: np.ndarray
    phi: np.ndarray
    p: float
    beta: float
    N: int
    R: float
    monotone: bool
    bracket: tuple[float, float]

    @property
    def profile(self) -> list[tuple[float, float]]:
        return list(zip(self.r.tolist(), self.phi.tolist()))

    def __iter__(self) -> Iterator:
        yield self.lambda_
        yield self.profile

    def evaluate(self, F: FinslerNorm, x, center=(0.0, 0.0)) -> np.ndarray:
        """u(x) = phi(F°(x - x0))."""
        return np.interp(eval_polar(F, np.asarray(x) - np.asarray(center)), self.r, self.phi)


def _radial_start(lam, p, N, r0):
    lam = np.asarray(lam, dtype=float)
    phi = 1 - np.sign(lam) * (np.abs(lam) / N) ** (1 / (p - 1)) * r0 ** (p / (p - 1)) * (p - 1) / p
    return phi, -lam * r0 / N


def _rk4_batch(lam: np.ndarray, p: float, beta: float, N: int, R: float, steps: int, keep: bool = False):
    """Integrate every lane of ``lam`` to R; returns g(lam) (crossing phi=0 counts as negative)."""
    r0 = 1e-6 * R
    phi, w = _radial_start(lam, p, N, r0)
    h = (R - r0) / steps
    alive = np.ones(lam.shape, bool)
    e = 1.0 / (p - 1)

    def rhs(r, a, b):
        return np.sign(b) * np.abs(b) ** e, -(N - 1) * b / r - lam * np.sign(a) * np.abs(a) ** (p - 1)

    rs, ps = [r0], [phi.copy()]
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(steps):
            r = r0 + k * h
            k1 = rhs(r, phi, w)
            k2 = rhs(r + h / 2, phi + h / 2 * k1[0], w + h / 2 * k1[1])
            k3 = rhs(r + h / 2, phi + h / 2 * k2[0], w + h / 2 * k2[1])
            k4 = rhs(r + h, phi + h * k3[0], w + h * k3[1])
            phi_n = phi + h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
            w_n = w + h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
            cross = alive & ~(phi_n > 0)
            alive &= ~cross
            phi = np.where(alive, phi_n, phi)
            w = np.where(alive, w_n, w)
            if keep:
                rs.append(r + h)
                ps.append(phi.copy())
    g = w + beta * np.abs(phi) ** (p - 1)
    g = np.where(alive & np.isfinite(g), g, np.where(alive, np.sign(np.nan_to_num(g)), -1.0))
    return (g, np.array(rs), np.array(ps)) if keep else g


def _dop853(lam: float, p: float, beta: float, N: int, R: float, keep: bool = False):
    r0 = 1e-6 * R
    phi0, w0 = _radial_start(lam, p, N, r0)

    def rhs(r, y):
        a, b = y
        return [np.sign(b) * abs(b) ** (1 / (p - 1)), -(N - 1) * b / r - lam * np.sign(a) * abs(a) ** (p - 1)]

    def hit(r, y):
        return y[0]
    hit.terminal, hit.direction = True, -1
    s = solve_ivp(rhs, (r0, R), [float(phi0), float(w0)], method="DOP853", rtol=1e-11, atol=1e-13,
                  events=hit, dense_output=keep)
    g = -1.0 if s.status == 1 else float(s.y[1, -1] + beta * abs(s.y[0, -1]) ** (p - 1))
    if keep:
        return g, s.t, s.y[0]
    return g


def solve_radial_shooting(F: FinslerNorm | None, R: float, N: int, p: float, beta: float,
                          steps: int = 10000, method: str = "rk4", xtol: float = 1e-10,
                          lane: int = 32) -> RadialResult:
    """lambda_1 of the Wulff shape W_R by shooting on the radial profile phi(F°(x)).

    The radial equation does not involve F, so the eigenvalue is the same for
    every norm; ``F`` is accepted for symmetry with the grid solver.
    """
    _check_p_beta(p, beta, pmax=None)
    if not R > 0:
        raise ParameterError("R must be positive")
    if beta == 0:
        r = np.linspace(0.0, R, 2)
        return RadialResult(0.0, r, np.ones(2), p, beta, N, R, True, (0.0, 0.0))

    if method == "rk4":
        def gvec(lams):
            return _rk4_batch(np.asarray(lams, float), p, beta, N, R, steps)
    elif method == "dop853":
        def gvec(lams):
            return np.array([_dop853(float(v), p, beta, N, R) for v in lams])
    else:
        raise ParameterError(f"unknown shooting method {method!r}")

    sgn = 1.0 if beta > 0 else -1.0
    # g > 0 below lambda_1 for beta > 0, g < 0 above it for beta < 0 (lambda < 0)
    lo, found = 0.0, None
    scan = []
    for k0 in range(-4, 48, 8):
        mags = 2.0 ** np.arange(k0, k0 + 8)
        lams = sgn * mags
        gs = gvec(lams)
        scan.extend(zip(lams.tolist(), gs.tolist()))
        flip = np.nonzero(gs < 0)[0] if beta > 0 else np.nonzero(gs > 0)[0]
        if len(flip):
            i = flip[0]
            far = lams[i]
            near = lams[i - 1] if i > 0 else lo
            found = (near, far)
            break
        lo = lams[-1]
    if found is None:
        raise BracketError(f"no sign change of the shooting residual up to |lambda|=2^47; scan tail {scan[-3:]}")
    a, b = found
    while abs(b - a) > xtol * max(1.0, abs(a)):
        lams = np.linspace(a, b, lane + 2)[1:-1]
        gs = gvec(lams)
        bad = (gs < 0) if beta > 0 else (gs > 0)
        i = int(np.argmax(bad)) if bad.any() else len(lams)
        a, b = (lams[i - 1] if i > 0 else a), (lams[i] if i < len(lams) else b)
    lam = 0.5 * (a + b)
    if method == "rk4":
        _, rs, ps = _rk4_batch(np.array([lam]), p, beta, N, R, steps, keep=True)
        r, phi = rs, ps[:, 0]
    else:
        _, r, phi = _dop853(lam, p, beta, N, R, keep=True)
    r = np.concatenate([[0.0], r])
    phi = np.concatenate([[1.0], phi])
    d = np.diff(phi)
    monotone = bool(np.all(d <= 1e-14) if beta > 0 else np.all(d >= -1e-14))
    return RadialResult(float(lam), r, phi, p, beta, N, R, monotone, (float(a), float(b)))


def bessel_j0_first_root_squared(terms: int = 60) -> float:
    """j_{0,1}^2 from the power series of J_0 and Newton iteration."""
    def j0(x):
        s, t = 0.0, 1.0
        for k in range(terms):
            s += t
            t *= -(x / 2) ** 2 / (k + 1) ** 2
        return s

    def j1(x):
        s, t = 0.0, x / 2
        for k in range(terms):
            s += t
            t *= -(x / 2) ** 2 / ((k + 1) * (k + 2))
        return s
    x = 2.4
    for _ in range(50):
        x += j0(x) / j1(x)          # J0' = -J1
    return x * x
