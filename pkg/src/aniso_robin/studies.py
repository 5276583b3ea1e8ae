"""Experiments: Gamma-limit sweep in p, isoperimetric comparisons, trace-inequality check."""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .domain import AnalyticDomain, RasterDomain, build_raster
from .errors import AnisoError, ConfigError, ParameterError, UnsupportedDomainError
from .finsler import FinslerNorm, curvature_mu, eval_polar
from .solvers.eigen import EigenOptions, solve_lambda_p, solve_radial_shooting
from .solvers.setratio import LambdaOptions, solve_Lambda
from .variation import GridField, total_variation_F, trace_integral

CORPUS_SEED = 970
RICHARDSON_H = (1 / 64, 1 / 128, 1 / 256)


def _map(fn: Callable, items: Sequence, jobs: int = 1) -> list:
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))


# ---------------------------------------------------------------------------
# Richardson-extrapolated Lambda

def richardson(hs: Sequence[float], values: Sequence[float]) -> tuple[float, float]:
    """Least-squares fit v(h) = v0 + c1 h; returns (v0, c1)."""
    A = np.stack([np.ones(len(hs)), np.asarray(hs, float)], axis=1)
    (v0, c1), *_ = np.linalg.lstsq(A, np.asarray(values, float), rcond=None)
    return float(v0), float(c1)


_LAMBDA_MEMO: dict = {}


def lambda_at(domain: AnalyticDomain, F: FinslerNorm, beta: float, h: float,
              opts: LambdaOptions | None = None):
    opts = opts or LambdaOptions()
    key = (json.dumps(domain.to_config(), sort_keys=True), F, float(beta), float(h), repr(opts))
    if key not in _LAMBDA_MEMO:
        _LAMBDA_MEMO[key] = solve_Lambda(build_raster(domain, h), F, beta, opts)
    return _LAMBDA_MEMO[key]


@dataclass
class LambdaEstimate:
    value: float
    hs: tuple
    values: tuple
    slope: float

    def to_dict(self) -> dict:
        return asdict(self)


def lambda_richardson(domain: AnalyticDomain, F: FinslerNorm, beta: float, hs=RICHARDSON_H,
                      opts: LambdaOptions | None = None) -> LambdaEstimate:
    vals = tuple(lambda_at(domain, F, beta, h, opts).value for h in hs)
    v0, c1 = richardson(hs, vals)
    return LambdaEstimate(v0, tuple(hs), vals, c1)


# ---------------------------------------------------------------------------
# Gamma sweep

@dataclass
class SweepRow:
    p: float
    lambda_grid: float
    lambda_shoot: float | None
    Lambda: float
    gap: float
    gap_shoot: float | None
    converged: bool
    error: str = ""


def _sweep_point(args) -> SweepRow:
    domain, F, beta, p, h, eopts, Lam, shoot = args
    lam_s = None
    try:
        if shoot:
            lam_s = solve_radial_shooting(F, domain.params["R"], F.dim, p, beta).lambda_
        res = solve_lambda_p(build_raster(domain, h), F, p, beta, eopts)
        return SweepRow(p, res.lambda_, lam_s, Lam, res.lambda_ - Lam,
                        None if lam_s is None else lam_s - Lam, res.converged)
    except AnisoError as exc:
        return SweepRow(p, float("nan"), lam_s, Lam, float("nan"),
                        None if lam_s is None else lam_s - Lam, False, f"{type(exc).__name__}: {exc}")


def gamma_sweep(domain: AnalyticDomain, F: FinslerNorm, beta: float, p_list: Sequence[float],
                h: float = 1 / 64, richardson_hs=RICHARDSON_H, eigen_opts: EigenOptions | None = None,
                lambda_opts: LambdaOptions | None = None, jobs: int = 1) -> list[SweepRow]:
    """lambda_1(p) on the grid (and by shooting on Wulff shapes) against Lambda."""
    if not beta > -1:
        raise ParameterError("beta must exceed -1")
    if any(b >= a for a, b in zip(p_list, p_list[1:])):
        raise ParameterError("p_list must decrease toward 1")
    if richardson_hs:
        Lam = lambda_richardson(domain, F, beta, richardson_hs, lambda_opts).value
    else:
        Lam = lambda_at(domain, F, beta, h, lambda_opts).value
    if beta == 0:
        Lam = 0.0
    shoot = domain.family == "wulff" and F == domain.norm
    items = [(domain, F, beta, float(p), h, eigen_opts, Lam, shoot) for p in p_list]
    return _map(_sweep_point, items, jobs)


# ---------------------------------------------------------------------------
# Isoperimetric comparison

@dataclass
class IsoRow:
    domain: str
    area: float
    Lambda: float
    verdict: str
    margin: float


def isoperimetric_compare(family: Sequence[AnalyticDomain], F: FinslerNorm, beta: float,
                          hs=RICHARDSON_H, opts: LambdaOptions | None = None, h: float = 1 / 128) -> list[IsoRow]:
    """Lambda of equal-area domains against the Wulff shape of the same area.

    The Wulff shape must be minimal for beta > 0 and maximal for -1 < beta < 0,
    each other domain by at least 2% of |Lambda(W)|.
    """
    if not beta > -1:
        raise ParameterError("beta must exceed -1")
    ref = [d for d in family if d.family == "wulff" and d.norm == F]
    if not ref:
        raise ConfigError("family needs the Wulff shape of the norm as reference")
    W = ref[0]
    for d in family:
        if abs(d.area / W.area - 1) > 0.005:
            raise ConfigError(f"{d.label} area {d.area:.6g} differs from the Wulff area {W.area:.6g} by > 0.5%")
        if beta < 0 and not d.is_c2:
            raise UnsupportedDomainError(f"{d.label} is not C2; beta < 0 comparisons need smooth domains")
    est = {id(d): lambda_richardson(d, F, beta, hs, opts).value if hs else lambda_at(d, F, beta, h, opts).value
           for d in family}
    lw = 0.0 if beta == 0 else est[id(W)]
    delta = 0.02 * abs(lw)
    rows = []
    for d in family:
        lam = 0.0 if beta == 0 else est[id(d)]
        if d is W or beta == 0:
            verdict, margin = ("reference" if d is W else "vacuous-pass"), 0.0
        elif beta > 0:
            margin = lam - lw
            verdict = "pass" if lw <= lam - delta else "fail"
        else:
            margin = lw - lam
            verdict = "pass" if lw >= lam + delta else "fail"
        rows.append(IsoRow(d.label, d.area, lam, verdict, margin))
    return rows


# ---------------------------------------------------------------------------
# Trace inequality

def default_corpus(raster: RasterDomain, F: FinslerNorm, seed: int = CORPUS_SEED, size: int = 100) -> list[tuple[str, GridField]]:
    """Constants, affine fields, radial bumps, random smooth fields and steep tanh profiles."""
    rng = np.random.default_rng(seed)
    x = raster.centers
    c = np.asarray(raster.link.center if raster.link is not None else x.mean(axis=0))
    ext = np.max(np.abs(x - c), axis=0)
    xs = (x - c) / ext
    rho = eval_polar(F, x - c)
    rho = rho / rho.max()
    n_const, n_aff, n_rad, n_tanh = 5, 15, 20, 20
    out = []
    for k in range(n_const):
        out.append((f"const{k}", np.full(len(x), rng.uniform(-2, 2))))
    for k in range(n_aff):
        a, b, d = rng.normal(size=3)
        out.append((f"affine{k}", a * xs[:, 0] + b * xs[:, 1] + d))
    for k in range(n_rad):
        w = rng.uniform(0.15, 1.0)
        s = rng.uniform(-0.5, 0.5, size=2)
        r2 = np.sum((xs - s) ** 2, axis=1) / w ** 2
        out.append((f"bump{k}", np.where(r2 < 1, np.exp(-1 / np.maximum(1 - r2, 1e-300)), 0.0) * rng.uniform(0.5, 3)))
    n_rand = size - n_const - n_aff - n_rad - n_tanh
    for k in range(n_rand):
        v = np.zeros(len(x))
        for _ in range(6):
            kx, ky = rng.integers(0, 5, size=2)
            ph = rng.uniform(0, 2 * np.pi)
            v += rng.normal() / (1 + kx + ky) * np.cos(np.pi * (kx * xs[:, 0] + ky * xs[:, 1]) + ph)
        out.append((f"smooth{k}", v))
    for k in range(n_tanh):
        t0 = rng.uniform(0.2, 0.95)
        width = rng.uniform(0.005, 0.05)
        out.append((f"tanh{k}", 0.5 * (1 - np.tanh((rho - t0) / width))))
    return [(name, GridField(raster, v)) for name, v in out]


@dataclass
class TraceRow:
    field: str
    lhs: float
    rhs: float
    margin: float
    ok: bool


def trace_check(domain: AnalyticDomain, F: FinslerNorm, corpus=None, h: float = 1 / 128,
                seed: int = CORPUS_SEED, slack: float = 0.01) -> list[TraceRow]:
    """boundary integral of |u| F(nu) against |Du|_F + (2N/mu) ||u||_1 on each corpus field."""
    if not domain.is_c2:
        raise UnsupportedDomainError(f"{domain.family} is not C2")
    c = 2 * F.dim / curvature_mu(domain, F)
    if corpus is None:
        corpus = default_corpus(build_raster(domain, h), F, seed)
    rows = []
    for k, item in enumerate(corpus):
        name, u = item if isinstance(item, tuple) else (f"field{k}", item)
        lhs = trace_integral(u, F, np.abs, "quadrature")
        rhs = total_variation_F(u, F) + c * u.integral_abs_p(1.0)
        m = rhs - lhs
        rows.append(TraceRow(name, lhs, rhs, m, bool(m >= -slack * rhs)))
    return rows


# ---------------------------------------------------------------------------
# output

def study_stem(study: str, domain: AnalyticDomain | str, F: FinslerNorm, beta: float | None) -> str:
    d = domain if isinstance(domain, str) else domain.label
    b = "na" if beta is None else f"{beta:g}"
    return f"{study}_{d}_{F.label}_{b}"


def rows_to_csv(rows: Sequence) -> str:
    buf = io.StringIO()
    if not rows:
        return ""
    dicts = [asdict(r) if hasattr(r, "__dataclass_fields__") else dict(r) for r in rows]
    w = csv.DictWriter(buf, fieldnames=list(dicts[0]), lineterminator="\n")
    w.writeheader()
    for d in dicts:
        w.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v) for k, v in d.items()})
    return buf.getvalue()


def _jsonable(v):
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else repr(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def emit(out_dir: str | Path, stem: str, rows: Sequence, summary: dict) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    p_csv, p_json = out / f"{stem}.csv", out / f"{stem}.json"
    p_csv.write_text(rows_to_csv(rows))
    p_json.write_text(json.dumps(_jsonable(summary), indent=2, sort_keys=True) + "\n")
    return p_csv, p_json
