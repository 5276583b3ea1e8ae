"""Compactly supported smooth approximants by interior scaling and mollification."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy import ndimage

from .errors import DomainError, ParameterError, UnsupportedDomainError
from .finsler import FinslerNorm
from .variation import GridField, extended_variation


def bump_kernel(eps: float, h: float) -> np.ndarray:
    """exp(-1/(1-|y/eps|^2)) on the lattice points |y| < eps, normalised to unit sum."""
    m = int(np.ceil(eps / h))
    y = np.arange(-m, m + 1) * h
    r2 = (y[:, None] ** 2 + y[None, :] ** 2) / eps ** 2
    k = np.zeros_like(r2)
    inside = r2 < 1
    k[inside] = np.exp(-1.0 / (1.0 - r2[inside]))
    return k / k.sum()


def _check(u: GridField, tau: float, eps: float):
    dom = u.raster.link
    if dom is None:
        raise DomainError("shrink_mollify needs a raster linked to an analytic domain")
    if dom.family == "annulus":
        raise UnsupportedDomainError("annulus is not star-shaped about its centre")
    if not 0 < tau <= 0.2:
        raise ParameterError("tau must lie in (0, 0.2]")
    r_star = dom.star_clearance
    if not 0 < eps < tau * r_star / 2:
        raise ParameterError(f"eps={eps} must lie in (0, tau*r_star/2) = (0, {tau * r_star / 2:.6g})")
    return dom


def _image(u: GridField) -> np.ndarray:
    img = np.zeros(u.raster.shape)
    img[tuple(u.raster.cells.T)] = u.values
    return img


def shrink_mollify(u: GridField, tau: float, eps: float) -> GridField:
    """u o Psi composed with a bump of radius eps, Psi(x) = c + (x - c)/(1 - tau).

    The pull-back is sampled by bilinear interpolation of the raster image
    (zero outside the domain); its support is the scaled copy c + (1-tau)(Omega - c).
    """
    dom = _check(u, tau, eps)
    g = u.raster
    c = np.asarray(dom.center)
    x = g.centers
    y = c + (x - c) / (1.0 - tau)
    inside = dom.contains(y)
    # fractional lattice coordinates of y
    idx = ((y - g.origin) / g.h - 0.5).T
    img = _image(u)
    pulled = np.where(inside, ndimage.map_coordinates(img, idx, order=1, mode="nearest"), 0.0)
    pimg = np.zeros(g.shape)
    pimg[tuple(g.cells.T)] = pulled
    k = bump_kernel(eps, g.h)
    out = ndimage.correlate(pimg, k, mode="constant", cval=0.0)
    return GridField(g, out[tuple(g.cells.T)])


def support_clearance(v: GridField, tol: float = 0.0) -> float:
    """Euclidean distance from the support {v != 0} to the domain boundary (cell centres)."""
    g = v.raster
    supp = np.abs(v.values) > tol
    if not supp.any():
        return float("inf")
    # only the outer layer of the support can realise the minimum
    edge = np.zeros(g.n_cells, bool)
    for off in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        nb = g.neighbor(off)
        edge |= supp & ((nb < 0) | ~supp[np.maximum(nb, 0)])
    d = g.link.boundary_distance(g.centers[edge], FinslerNorm.euclidean())
    return float(np.min(d))


@dataclass
class ApproxRow:
    tau: float
    eps: float
    L1_error: float
    extended_TV: float
    support_clearance: float


def strict_convergence_report(u: GridField, schedule, F: FinslerNorm | None = None) -> list[ApproxRow]:
    F = F or u.raster.link.norm
    sched = [(float(t), float(e)) for t, e in schedule]
    taus = [t for t, _ in sched]
    if any(b >= a for a, b in zip(taus, taus[1:])):
        raise ParameterError("schedule must be strictly decreasing in tau")
    rows = []
    for tau, eps in sched:
        v = shrink_mollify(u, tau, eps)
        l1 = float(np.sum(np.abs(v.values - u.values)) * u.raster.cell_volume)
        rows.append(ApproxRow(tau, eps, l1, extended_variation(v, F), support_clearance(v)))
    return rows


def report_to_csv(rows: list[ApproxRow]) -> str:
    head = "tau,eps,L1_error,extended_TV,support_clearance\n"
    return head + "".join(",".join(repr(float(x)) for x in asdict(r).values()) + "\n" for r in rows)
