"""Finsler norms, their polars and gradients, and Wulff-shape geometry.

All evaluators are vectorised over the last axis: ``F(xi)`` accepts an
array of shape ``(..., N)`` and returns shape ``(...)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Mapping

import numpy as np

from .errors import DomainError, NormError, UnsupportedDomainError

KINDS = ("euclidean", "qnorm", "quadratic")


@dataclass(frozen=True, eq=False)
class FinslerNorm:
    """A smooth, strongly convex, even norm on R^N.

    ``kind`` is one of ``euclidean``, ``qnorm`` (weighted q-norm,
    ``F(xi) = (sum w_i |xi_i|^q)^(1/q)``, ``1 < q < inf``) or ``quadratic``
    (``F(xi) = sqrt(xi^T A xi)`` with ``A`` symmetric positive definite).
    """

    kind: str = "euclidean"
    dim: int = 2
    q: float = 2.0
    weights: tuple[float, ...] | None = None
    matrix: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise NormError(f"unknown norm kind {self.kind!r}")
        if self.kind == "qnorm":
            if not (1.0 < self.q < np.inf):
                raise NormError("q-norm requires 1 < q < inf")
            w = (1.0,) * self.dim if self.weights is None else tuple(float(x) for x in self.weights)
            if len(w) != self.dim or min(w) <= 0:
                raise NormError("q-norm weights must be positive, one per axis")
            object.__setattr__(self, "weights", w)
        if self.kind == "quadratic":
            if self.matrix is None:
                raise NormError("quadratic norm needs a matrix")
            A = np.array(self.matrix, dtype=float).reshape(self.dim, self.dim)
            if not np.allclose(A, A.T, rtol=0, atol=1e-12 * np.abs(A).max()):
                raise NormError("quadratic-form matrix must be symmetric")
            if np.linalg.eigvalsh(A).min() <= 0:
                raise NormError("quadratic-form matrix must be positive definite")
            A.setflags(write=False)
            object.__setattr__(self, "matrix", A)

    # -- construction -------------------------------------------------------

    @classmethod
    def euclidean(cls, dim: int = 2) -> "FinslerNorm":
        return cls("euclidean", dim=dim)

    @classmethod
    def qnorm(cls, q: float, weights=None, dim: int = 2) -> "FinslerNorm":
        return cls("qnorm", dim=dim, q=float(q), weights=None if weights is None else tuple(weights))

    @classmethod
    def quadratic(cls, matrix) -> "FinslerNorm":
        A = np.asarray(matrix, dtype=float)
        if A.ndim == 1:
            n = int(round(np.sqrt(A.size)))
            if n * n != A.size:
                raise NormError("row-major matrix must be square")
            A = A.reshape(n, n)
        return cls("quadratic", dim=A.shape[0], matrix=A)

    @classmethod
    def from_config(cls, cfg: Mapping[str, Any]) -> "FinslerNorm":
        """Build from ``{kind, q?, weights?, matrix?}`` (matrix row-major)."""
        kind = str(cfg.get("kind", "euclidean")).replace("-", "").replace("_", "").lower()
        dim = int(cfg.get("dim", 2))
        if kind == "euclidean":
            return cls.euclidean(dim)
        if kind in ("qnorm", "weightedqnorm"):
            return cls.qnorm(float(cfg["q"]), cfg.get("weights"), dim=dim)
        if kind in ("quadratic", "quadraticform"):
            return cls.quadratic(cfg["matrix"])
        raise NormError(f"unknown norm kind {cfg.get('kind')!r}")

    def to_config(self) -> dict:
        if self.kind == "euclidean":
            return {"kind": "euclidean", "dim": self.dim}
        if self.kind == "qnorm":
            return {"kind": "qnorm", "q": self.q, "weights": list(self.weights)}
        return {"kind": "quadratic", "matrix": self.matrix.ravel().tolist()}

    @property
    def label(self) -> str:
        if self.kind == "euclidean":
            return "euclidean"
        if self.kind == "qnorm":
            w = self.weights or ()
            tail = "w" + "-".join(f"{v:g}" for v in w) if any(v != 1 for v in w) else ""
            return f"q{self.q:g}{tail}"
        return "quad" + "-".join(f"{v:g}" for v in self.matrix.ravel())

    def __eq__(self, other):
        return isinstance(other, FinslerNorm) and self.to_config() == other.to_config()

    def __hash__(self):
        return hash(repr(self.to_config()))

    # -- evaluation ---------------------------------------------------------

    def __call__(self, xi) -> np.ndarray:
        return eval_norm(self, xi)

    def polar(self, v) -> np.ndarray:
        return eval_polar(self, v)

    def gradient(self, xi) -> np.ndarray:
        return eval_gradient(self, xi)

    @cached_property
    def dual(self) -> "FinslerNorm":
        """The polar norm F° as a FinslerNorm of the same family."""
        if self.kind == "euclidean":
            return self
        if self.kind == "qnorm":
            qd = self.q / (self.q - 1.0)
            w = tuple(wi ** (-1.0 / (self.q - 1.0)) for wi in self.weights)
            return FinslerNorm.qnorm(qd, w, dim=self.dim)
        return FinslerNorm.quadratic(np.linalg.inv(self.matrix))

    @cached_property
    def a_lower(self) -> float:
        return self._sphere_bounds[0]

    @cached_property
    def b_upper(self) -> float:
        return self._sphere_bounds[1]

    @cached_property
    def _sphere_bounds(self) -> tuple[float, float]:
        if self.kind == "euclidean":
            return 1.0, 1.0
        if self.kind == "quadratic":
            ev = np.linalg.eigvalsh(self.matrix)
            return float(np.sqrt(ev[0])), float(np.sqrt(ev[-1]))
        # minimise / maximise sum w_i x_i^s over the simplex, x = xi^2, s = q/2
        w = np.array(self.weights)
        s = self.q / 2.0
        if np.isclose(s, 1.0):
            lo, hi = w.min(), w.max()
        elif s > 1.0:
            lo, hi = np.sum(w ** (-1.0 / (s - 1.0))) ** (1.0 - s), w.max()
        else:
            lo, hi = w.min(), np.sum(w ** (1.0 / (1.0 - s))) ** (1.0 - s)
        return float(lo ** (1.0 / self.q)), float(hi ** (1.0 / self.q))

    def hessian(self, xi) -> np.ndarray:
        """Hessian of F at xi != 0, shape (..., N, N)."""
        xi = np.asarray(xi, dtype=float)
        f = eval_norm(self, xi)[..., None, None]
        g = eval_gradient(self, xi)
        outer = g[..., :, None] * g[..., None, :]
        if self.kind == "euclidean":
            return (np.eye(self.dim) - outer) / f
        if self.kind == "quadratic":
            return self.matrix / f - outer / f
        q = self.q
        w = np.array(self.weights)
        with np.errstate(divide="ignore", invalid="ignore"):
            diag = w * np.abs(xi) ** (q - 2.0) / f[..., 0] ** (q - 2.0)
        D = diag[..., :, None] * np.eye(self.dim)
        return (q - 1.0) / f * (D - outer)

    @cached_property
    def wulff_curvature_radius(self) -> float:
        """Largest principal radius of curvature of the unit Wulff shape.

        The support function of W = {F° < 1} is F, so the principal radii at
        the boundary point with outer normal nu are the eigenvalues of the
        Hessian of F at nu restricted to the tangent space.  Infinite for
        q-norms with q < 2 (the Wulff shape has flat points).
        """
        if self.kind == "euclidean":
            return 1.0
        if self.kind == "quadratic":
            ev = np.linalg.eigvalsh(self.matrix)
            return float(ev[-1] / np.sqrt(ev[0]))
        if self.q < 2.0:
            return float("inf")
        if self.dim != 2:
            raise NormError("q-norm Wulff curvature is only tabulated in N=2")
        return float(np.max(_tangential_radii_2d(self, 1 << 14)))

    @cached_property
    def wulff_min_curvature_radius(self) -> float:
        """Smallest principal radius of curvature of the unit Wulff shape."""
        if self.kind == "euclidean":
            return 1.0
        if self.kind == "quadratic":
            ev = np.linalg.eigvalsh(self.matrix)
            return float(ev[0] / np.sqrt(ev[-1]))
        if self.q > 2.0:
            return 0.0
        return float(np.min(_tangential_radii_2d(self, 1 << 14)))

    @cached_property
    def kappa(self) -> float:
        """Lebesgue measure of the unit Wulff shape (N=2, by quadrature)."""
        if self.kind == "euclidean" and self.dim == 2:
            return float(np.pi)
        if self.dim != 2:
            raise NormError("Wulff volume is only computed in N=2")
        t = np.linspace(0.0, 2 * np.pi, 1 << 14, endpoint=False)
        e = np.stack([np.cos(t), np.sin(t)], axis=-1)
        r = 1.0 / eval_polar(self, e)
        return float(0.5 * np.mean(r ** 2) * 2 * np.pi)


def _tangential_radii_2d(F: FinslerNorm, n: int) -> np.ndarray:
    t = np.linspace(0.0, np.pi, n, endpoint=False)
    nu = np.stack([np.cos(t), np.sin(t)], axis=-1)
    tau = np.stack([-np.sin(t), np.cos(t)], axis=-1)
    H = F.hessian(nu)
    return np.einsum("ni,nij,nj->n", tau, H, tau)


def _qnorm(x, q, w):
    return np.sum(w * np.abs(x) ** q, axis=-1) ** (1.0 / q)


def eval_norm(F: FinslerNorm, xi) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    # scale out the max entry so tiny vectors do not underflow and large q does not overflow
    m = np.max(np.abs(xi), axis=-1)
    safe = np.where(m > 0, m, 1.0)
    z = xi / safe[..., None]
    if F.kind == "euclidean":
        return m * np.sqrt(np.sum(z * z, axis=-1))
    if F.kind == "quadratic":
        return m * np.sqrt(np.maximum(np.einsum("...i,ij,...j->...", z, F.matrix, z), 0.0))
    return m * _qnorm(z, F.q, np.array(F.weights))


def eval_polar(F: FinslerNorm, v) -> np.ndarray:
    return eval_norm(F.dual, v)


def eval_gradient(F: FinslerNorm, xi) -> np.ndarray:
    """Analytic gradient of F; raises DomainError if any xi is zero."""
    xi = np.asarray(xi, dtype=float)
    f = eval_norm(F, xi)
    if np.any(f == 0):
        raise DomainError("gradient of F is undefined at 0")
    if F.kind == "euclidean":
        return xi / f[..., None]
    if F.kind == "quadratic":
        return xi @ F.matrix / f[..., None]
    w = np.array(F.weights)
    r = xi / f[..., None]
    return w * np.sign(r) * np.abs(r) ** (F.q - 1.0)


def numeric_polar(F: FinslerNorm, v, samples: int = 4096, xtol: float = 1e-10) -> np.ndarray:
    """sup_{eta != 0} v.eta / F(eta) by sphere sampling + golden-section refinement.

    N=2 only; kept for cross-validation of the analytic polar.
    """
    v = np.atleast_2d(np.asarray(v, dtype=float))
    if v.shape[-1] != 2:
        raise NormError("numeric polar is implemented for N=2")
    t = np.linspace(0.0, 2 * np.pi, samples, endpoint=False)
    eta = np.stack([np.cos(t), np.sin(t)], axis=-1)
    Feta = eval_norm(F, eta)
    dt = t[1] - t[0]
    best = np.empty(len(v))
    j = np.empty(len(v), dtype=np.int64)
    for s0 in range(0, len(v), 512):
        vals = (v[s0:s0 + 512] @ eta.T) / Feta
        j[s0:s0 + 512] = np.argmax(vals, axis=1)
        best[s0:s0 + 512] = vals[np.arange(len(vals)), j[s0:s0 + 512]]

    def f(s):
        e = np.stack([np.cos(s), np.sin(s)], axis=-1)
        return np.sum(e * v, axis=-1) / eval_norm(F, e)

    # golden-section maximisation on [t_j - dt, t_j + dt], all samples at once
    g = (np.sqrt(5.0) - 1) / 2
    a, b = t[j] - dt, t[j] + dt
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = f(c), f(d)
    while np.max(b - a) > xtol:
        left = fc > fd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        c_new = b - g * (b - a)
        d_new = a + g * (b - a)
        fc_new = np.where(left, f(c_new), fd)
        fd_new = np.where(left, fc, f(d_new))
        c, d, fc, fd = np.where(left, c_new, d), np.where(left, c, d_new), fc_new, fd_new
    return np.maximum(best, np.maximum(fc, fd))


@dataclass(frozen=True)
class WulffShape:
    """W_R(x0) = {x : F°(x - x0) < R}."""

    norm: FinslerNorm
    radius: float = 1.0
    center: tuple[float, ...] = (0.0, 0.0)

    def contains(self, x) -> np.ndarray:
        return eval_polar(self.norm, np.asarray(x, dtype=float) - np.asarray(self.center)) < self.radius

    @property
    def volume(self) -> float:
        return self.norm.kappa * self.radius ** self.norm.dim


def anisotropic_distance(W, x, norm: FinslerNorm | None = None) -> np.ndarray:
    """d_F(x) = inf_{y on boundary} F°(x - y).

    Exact ``R - F°(x - x0)`` when ``W`` is a WulffShape (or a Wulff-family
    AnalyticDomain evaluated with its own norm); otherwise a boundary-node
    minimisation refined by a bounded scalar search along the boundary.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if isinstance(W, WulffShape):
        rho = eval_polar(W.norm, x - np.asarray(W.center))
        if np.any(rho > W.radius * (1 + 1e-12)):
            raise DomainError("point outside the Wulff shape")
        return W.radius - rho
    domain = W
    F = norm if norm is not None else domain.norm
    if domain.family == "wulff" and F == domain.norm:
        return anisotropic_distance(WulffShape(F, domain.params["R"], domain.center), x)
    if not np.all(domain.contains(x) | domain.on_boundary(x)):
        raise DomainError("point outside the domain")
    return domain.boundary_distance(x, F)


def curvature_mu(domain, F: FinslerNorm | None = None) -> float:
    """mu = r / R_W bounding the anisotropic principal curvatures of the boundary by 1/mu.

    ``r`` is the Euclidean uniform interior ball radius and ``R_W`` the largest
    curvature radius of the unit Wulff shape of ``F``.  A Wulff shape of radius
    rho measured with its own norm is a homothety of W, so mu = rho there.
    """
    F = F if F is not None else domain.norm
    if not domain.is_c2 or domain.family not in ("wulff", "ellipse"):
        raise UnsupportedDomainError(f"curvature bound needs a C2 Wulff shape or ellipse, got {domain.family}")
    if domain.family == "wulff" and F == domain.norm:
        return float(domain.params["R"])
    RW = F.wulff_curvature_radius
    if not np.isfinite(RW):
        raise UnsupportedDomainError("Wulff shape of this norm has flat points, mu = 0")
    return float(domain.min_curvature_radius / RW)


def trace_constant(domain, F: FinslerNorm | None = None) -> float:
    F = F if F is not None else domain.norm
    return 2.0 * F.dim / curvature_mu(domain, F)


BUILTIN_NORMS = {
    "euclidean": lambda: FinslerNorm.euclidean(),
    "q1.5w1-2": lambda: FinslerNorm.qnorm(1.5, (1.0, 2.0)),
    "q4": lambda: FinslerNorm.qnorm(4.0),
    "quad4-0-0-1": lambda: FinslerNorm.quadratic([4.0, 0.0, 0.0, 1.0]),
    "quad2-0.5-0.5-1": lambda: FinslerNorm.quadratic([2.0, 0.5, 0.5, 1.0]),
}


def identity_report(F: FinslerNorm, samples: int = 10000, seed: int = 970) -> dict:
    """Worst violations of the norm identities on random samples, with pass flags.

    homogeneity   |F(t xi) - |t| F(xi)| / (|t| F(xi))      <= 1e-12
    bounds        a|xi| <= F(xi) <= b|xi|                   (slack 1e-12 relative)
    cauchy        |xi . eta| - F(xi) F°(eta)                <= 1e-12
    chain         |F°(grad F(xi)) - 1|                      <= 1e-8
    euler         |grad F(xi) . xi - F(xi)|                 <= 1e-8 (unit xi)
    duality       |numeric polar of F° - F| / F             <= 1e-4
    """
    rng = np.random.default_rng(seed)
    n = F.dim
    xi = rng.normal(size=(samples, n)) * np.exp(rng.uniform(-3, 3, size=(samples, 1)))
    eta = rng.normal(size=(samples, n)) * np.exp(rng.uniform(-3, 3, size=(samples, 1)))
    t = rng.normal(size=samples) * np.exp(rng.uniform(-3, 3, size=samples))
    f = eval_norm(F, xi)
    nx = np.linalg.norm(xi, axis=-1)
    rep = {}
    rep["homogeneity"] = float(np.max(np.abs(eval_norm(F, t[:, None] * xi) - np.abs(t) * f) / (np.abs(t) * f)))
    rep["bounds"] = float(max(np.max((F.a_lower * nx - f) / f), np.max((f - F.b_upper * nx) / f)))
    rep["cauchy"] = float(np.max(np.abs(np.sum(xi * eta, -1)) - f * eval_polar(F, eta)))
    u = xi / nx[:, None]
    gu = eval_gradient(F, u)
    rep["chain"] = float(np.max(np.abs(eval_polar(F, gu) - 1)))
    rep["euler"] = float(np.max(np.abs(np.sum(gu * u, -1) - eval_norm(F, u))))
    if n == 2:
        rep["duality"] = float(np.max(np.abs(numeric_polar(F.dual, u) - eval_norm(F, u)) / eval_norm(F, u)))
    limits = {"homogeneity": 1e-12, "bounds": 1e-12, "cauchy": 1e-12, "chain": 1e-8, "euler": 1e-8, "duality": 1e-4}
    rep["passed"] = {k: bool(rep[k] <= limits[k]) for k in limits if k in rep}
    rep["ok"] = all(rep["passed"].values())
    rep["norm"] = F.label
    rep["samples"] = samples
    return rep
