"""Flat sectioned config files: [norm], [domain], [solver], [study]."""
from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, field, fields
from pathlib import Path

from .domain import AnalyticDomain
from .errors import AnisoError, ConfigError
from .finsler import FinslerNorm
from .solvers.eigen import EigenOptions
from .solvers.setratio import LambdaOptions

SECTIONS = ("norm", "domain", "solver", "study")


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.replace(",", " ").split()]


def parse_domain_spec(spec: str, norm: FinslerNorm) -> AnalyticDomain:
    """'ellipse: a=1.4142, b=0.7071' -> AnalyticDomain."""
    fam, _, rest = spec.partition(":")
    cfg = {"family": fam.strip()}
    for item in filter(None, (s.strip() for s in rest.split(","))):
        k, _, v = item.partition("=")
        cfg[k.strip()] = v.strip()
    return AnalyticDomain.from_config(cfg, norm=norm if cfg["family"] in ("wulff", "annulus") else None)


@dataclass
class RunConfig:
    norm: FinslerNorm
    domain: AnalyticDomain | None
    beta: float = 0.0
    p: float = 2.0
    h: float = 1 / 128
    seed: int = 970
    eigen: EigenOptions = field(default_factory=EigenOptions)
    setratio: LambdaOptions = field(default_factory=LambdaOptions)
    study: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)
    digest: str = ""

    def p_list(self, default=(1.5, 1.25, 1.1, 1.05)) -> list[float]:
        return _floats(self.study["p_list"]) if "p_list" in self.study else list(default)

    def betas(self) -> list[float]:
        return _floats(self.study["betas"]) if "betas" in self.study else [self.beta]

    def hs(self, default=(1 / 64, 1 / 128, 1 / 256)):
        """Richardson resolutions; 'none' means a single solve at h."""
        raw = self.study.get("hs")
        if raw is None:
            return tuple(default)
        if raw.strip().lower() == "none":
            return None
        return tuple(_floats(raw))

    def family(self) -> list[AnalyticDomain]:
        if "family" not in self.study:
            raise ConfigError("[study] family is required for isoperimetric runs")
        return [parse_domain_spec(s, self.norm) for s in self.study["family"].split(";") if s.strip()]

    def schedule(self) -> list[tuple[float, float]]:
        taus = _floats(self.study.get("taus", "0.2 0.1 0.05 0.025"))
        if "eps" in self.study:
            eps = _floats(self.study["eps"])
            if len(eps) != len(taus):
                raise ConfigError("taus and eps must have equal length")
        else:
            eps = [t * t for t in taus]
        return list(zip(taus, eps))


def _options(cls, section: dict, prefix: str = ""):
    kw = {}
    for f in fields(cls):
        key = prefix + f.name
        if key in section:
            t = type(getattr(cls(), f.name))
            raw = section[key]
            kw[f.name] = (raw.lower() in ("1", "true", "yes", "on")) if t is bool else t(raw)
    return cls(**kw)


def load_config(path: str | Path | None, overrides: dict | None = None) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    text = ""
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"malformed config {path}: {exc}") from exc
    unknown = [s for s in cp.sections() if s not in SECTIONS]
    if unknown:
        raise ConfigError(f"unknown config sections {unknown}")
    sec = {s: dict(cp[s]) if cp.has_section(s) else {} for s in SECTIONS}
    try:
        ncfg = dict(sec["norm"])
        for k in ("matrix", "weights"):
            if k in ncfg:
                ncfg[k] = _floats(ncfg[k])
        norm = FinslerNorm.from_config(ncfg)
        domain = None
        if sec["domain"]:
            domain = AnalyticDomain.from_config(sec["domain"], norm=norm)
        solver = dict(sec["solver"])
        if "max_iter" in solver:
            solver.setdefault("eigen_max_iter", solver["max_iter"])
        rc = RunConfig(norm=norm, domain=domain,
                       beta=float(solver.get("beta", 0.0)), p=float(solver.get("p", 2.0)),
                       h=float(solver.get("h", 1 / 128)), seed=int(sec["study"].get("seed", 970)),
                       eigen=_options(EigenOptions, solver, "eigen_"),
                       setratio=_options(LambdaOptions, solver),
                       study=sec["study"], raw=sec)
    except AnisoError:
        raise
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"invalid config value: {exc}") from exc
    for k, v in (overrides or {}).items():
        if v is not None:
            setattr(rc, k, v)
    rc.digest = hashlib.sha256(text.encode()).hexdigest()
    return rc
