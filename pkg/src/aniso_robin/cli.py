"""Command-line entry point.

Exit codes: 0 success, 2 a checked invariant failed, 3 configuration error,
64 usage error.
"""
from __future__ import annotations

import argparse
import json
import os
import platform
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .approx import report_to_csv, strict_convergence_report
from .config import RunConfig, load_config
from .domain import RasterDomain, build_raster
from .errors import AnisoError, ConfigError
from .finsler import identity_report
from .solvers.eigen import solve_lambda_p, solve_radial_shooting
from .solvers.setratio import annulus_ratio, brute_force_ell, cheeger_constant, divergence_demo, solve_Lambda
from .studies import (emit, gamma_sweep, isoperimetric_compare, lambda_richardson, study_stem,
                      trace_check)
from .variation import GridField

EXIT_OK, EXIT_ASSERT, EXIT_CONFIG, EXIT_USAGE = 0, 2, 3, 64

COMMANDS = ("norm-check", "eigen-p", "radial", "lambda1", "cheeger", "oracle", "sweep",
            "isoperimetric", "trace-check", "approx-demo", "divergence-demo")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _parser() -> _Parser:
    p = _Parser(prog="aniso-robin", description="Anisotropic Robin eigenvalue laboratory")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", type=str, default=None)
        s.add_argument("--out", type=str, default=None)
        s.add_argument("--jobs", type=int, default=1)
        s.add_argument("--seed", type=int, default=None)
        s.add_argument("--h", type=float, default=None)
        s.add_argument("--quiet", action="store_true")
    return p


def _versions() -> dict:
    import maxflow
    import scipy
    return {"aniso_robin": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "maxflow": getattr(maxflow, "__version__", "?")}


def _need_domain(cfg: RunConfig):
    if cfg.domain is None:
        raise ConfigError("this command needs a [domain] section")
    return cfg.domain


def _grid(cfg: RunConfig) -> RasterDomain:
    return build_raster(_need_domain(cfg), cfg.h)


def _write_json(out: Path, name: str, obj: dict) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=float) + "\n")
    return path


def _base(cfg: RunConfig) -> dict:
    d = {"norm": cfg.norm.to_config(), "h": cfg.h, "seed": cfg.seed}
    if cfg.domain is not None:
        d["domain"] = cfg.domain.to_config()
    return d


# --- commands: each returns (ok, summary dict) -----------------------------

def _cmd_norm_check(cfg, out, args):
    rep = identity_report(cfg.norm, seed=cfg.seed)
    _write_json(out, f"norm-check_{cfg.norm.label}.json", {**_base(cfg), "report": rep})
    return rep["ok"], rep


def _cmd_eigen_p(cfg, out, args):
    res = solve_lambda_p(_grid(cfg), cfg.norm, cfg.p, cfg.beta, cfg.eigen)
    summ = {**_base(cfg), **res.to_dict(), "options": vars(cfg.eigen)}
    stem = study_stem("eigen-p", cfg.domain, cfg.norm, cfg.beta)
    _write_json(out, stem + ".json", summ)
    ok = res.converged and (cfg.beta == 0 or np.sign(res.lambda_) == np.sign(cfg.beta))
    return ok, {"lambda": res.lambda_, "converged": res.converged}


def _cmd_radial(cfg, out, args):
    dom = _need_domain(cfg)
    if dom.family != "wulff":
        raise ConfigError("radial shooting needs a Wulff-shape domain")
    res = solve_radial_shooting(cfg.norm, dom.params["R"], cfg.norm.dim, cfg.p, cfg.beta)
    stem = study_stem("radial", dom, cfg.norm, cfg.beta)
    (out / (stem + ".csv")).parent.mkdir(parents=True, exist_ok=True)
    step = max(1, len(res.r) // 1000)
    (out / (stem + ".csv")).write_text("r,phi\n" + "".join(f"{r!r},{f!r}\n" for r, f in
                                                             zip(res.r[::step].tolist(), res.phi[::step].tolist())))
    summ = {**_base(cfg), "lambda": res.lambda_, "p": cfg.p, "beta": cfg.beta, "monotone": res.monotone,
            "bracket": list(res.bracket)}
    _write_json(out, stem + ".json", summ)
    return res.monotone, {"lambda": res.lambda_, "monotone": res.monotone}


def _cmd_lambda1(cfg, out, args, beta=None, study="lambda1"):
    beta = cfg.beta if beta is None else beta
    dom = _need_domain(cfg)
    richardson = cfg.study.get("richardson", "false").lower() in ("1", "true", "yes", "on")
    summ = _base(cfg)
    if richardson:
        est = lambda_richardson(dom, cfg.norm, beta, hs=cfg.hs(), opts=cfg.setratio)
        value = est.value
        summ["richardson"] = est.to_dict()
    else:
        res = solve_Lambda(build_raster(dom, cfg.h), cfg.norm, beta, cfg.setratio)
        value = res.value
        summ["result"] = res.to_dict()
    summ.update({"value": value, "beta": beta, "options": vars(cfg.setratio)})
    _write_json(out, study_stem(study, dom, cfg.norm, beta) + ".json", summ)
    return True, {"value": value}


def _cmd_cheeger(cfg, out, args):
    dom = _need_domain(cfg)
    v = cheeger_constant(_grid(cfg), cfg.norm, opts=cfg.setratio)
    _write_json(out, study_stem("cheeger", dom, cfg.norm, None) + ".json", {**_base(cfg), "value": v})
    return True, {"value": v}


def _oracle_rasters(cfg: RunConfig) -> list[RasterDomain]:
    shapes = cfg.study.get("shapes", "4x4")
    out = []
    for s in shapes.replace(",", " ").split():
        nx, ny = (int(v) for v in s.lower().split("x"))
        out.append(RasterDomain.from_mask(np.ones((nx, ny), bool), h=float(cfg.study.get("spacing", 1.0))))
    return out


def _cmd_oracle(cfg, out, args):
    tol = float(cfg.study.get("tolerance", 1e-9))
    rows = []
    for g in _oracle_rasters(cfg):
        for b in cfg.betas():
            bf, _ = brute_force_ell(g, cfg.norm, b)
            sv = solve_Lambda(g, cfg.norm, b, cfg.setratio).value
            rows.append({"raster": "x".join(map(str, g.shape)), "beta": b, "brute_force": bf, "solver": sv,
                         "abs_diff": abs(bf - sv), "ok": abs(bf - sv) <= tol})
    ok = all(r["ok"] for r in rows)
    emit(out, f"oracle_{cfg.norm.label}", rows, {**_base(cfg), "rows": rows, "ok": ok})
    return ok, {"instances": len(rows), "ok": ok}


def _cmd_sweep(cfg, out, args):
    dom = _need_domain(cfg)
    ok = True
    summary = {}
    for b in cfg.betas():
        rows = gamma_sweep(dom, cfg.norm, b, cfg.p_list(), h=cfg.h, richardson_hs=cfg.hs(),
                           eigen_opts=cfg.eigen, lambda_opts=cfg.setratio, jobs=args.jobs)
        for r in rows:
            if r.error or (r.lambda_shoot is not None and
                           abs(r.lambda_shoot - r.lambda_grid) > 0.02 * max(1.0, abs(r.lambda_shoot))):
                ok = False
        stem = study_stem("sweep", dom, cfg.norm, b)
        emit(out, stem, rows, {**_base(cfg), "beta": b, "rows": [vars(r) for r in rows]})
        summary[str(b)] = [vars(r) for r in rows]
    return ok, summary


def _cmd_isoperimetric(cfg, out, args):
    ok, summary = True, {}
    for b in cfg.betas():
        rows = isoperimetric_compare(cfg.family(), cfg.norm, b, hs=cfg.hs(), opts=cfg.setratio, h=cfg.h)
        ok &= all(r.verdict != "fail" for r in rows)
        emit(out, study_stem("isoperimetric", "family", cfg.norm, b), rows,
             {**_base(cfg), "beta": b, "rows": [vars(r) for r in rows]})
        summary[str(b)] = [vars(r) for r in rows]
    return ok, summary


def _cmd_trace_check(cfg, out, args):
    dom = _need_domain(cfg)
    rows = trace_check(dom, cfg.norm, h=cfg.h, seed=cfg.seed)
    ok = all(r.ok for r in rows)
    emit(out, study_stem("trace-check", dom, cfg.norm, None), rows,
         {**_base(cfg), "fields": len(rows), "ok": ok, "worst_margin_rel": min(r.margin / r.rhs if r.rhs else 0.0
                                                                              for r in rows)})
    return ok, {"fields": len(rows), "ok": ok}


def _cmd_approx_demo(cfg, out, args):
    dom = _need_domain(cfg)
    g = _grid(cfg)
    kind = cfg.study.get("field", "one")
    if kind == "one":
        u = GridField.constant(g, 1.0)
    elif kind == "cone":
        u = GridField.from_function(g, lambda x: np.maximum(1 - cfg.norm.polar(x - np.asarray(dom.center)), 0.0))
    else:
        raise ConfigError(f"unknown approx field {kind!r}")
    rows = strict_convergence_report(u, cfg.schedule(), cfg.norm)
    stem = study_stem("approx-demo", dom, cfg.norm, None)
    out.mkdir(parents=True, exist_ok=True)
    (out / (stem + ".csv")).write_text(report_to_csv(rows))
    l1 = [r.L1_error for r in rows]
    ok = all(r.support_clearance > 0 for r in rows) and all(b < a for a, b in zip(l1, l1[1:]))
    _write_json(out, stem + ".json", {**_base(cfg), "rows": [vars(r) for r in rows], "ok": ok})
    return ok, {"rows": len(rows), "ok": ok}


def _cmd_divergence_demo(cfg, out, args):
    dom = _need_domain(cfg)
    beta = cfg.beta if cfg.beta < -1 else -1.5
    g = _grid(cfg)
    seq = divergence_demo(g, cfg.norm, beta)
    R, N = dom.params["R"], cfg.norm.dim
    rows = [{"r": r, "ratio": v, "analytic": annulus_ratio(r, R, beta, N)} for r, v in seq]
    ok = min(v for _, v in seq) < -10 * N / R
    emit(out, study_stem("divergence-demo", dom, cfg.norm, beta), rows, {**_base(cfg), "beta": beta, "ok": ok})
    return ok, {"min_ratio": min(v for _, v in seq), "ok": ok}


HANDLERS = {
    "norm-check": _cmd_norm_check, "eigen-p": _cmd_eigen_p, "radial": _cmd_radial, "lambda1": _cmd_lambda1,
    "cheeger": _cmd_cheeger, "oracle": _cmd_oracle, "sweep": _cmd_sweep, "isoperimetric": _cmd_isoperimetric,
    "trace-check": _cmd_trace_check, "approx-demo": _cmd_approx_demo, "divergence-demo": _cmd_divergence_demo,
}


def run(argv=None) -> int:
    try:
        args = _parser().parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:      # --help / --version
        return int(exc.code or 0)
    out = Path(args.out or os.environ.get("ANISO_OUT", "results"))
    try:
        cfg = load_config(args.config, {"seed": args.seed, "h": args.h})
        ok, summary = HANDLERS[args.command](cfg, out, args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AnisoError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    code = EXIT_OK if ok else EXIT_ASSERT
    out.mkdir(parents=True, exist_ok=True)
    record = {"command": args.command, "argv": list(argv) if argv is not None else sys.argv[1:],
              "config": args.config, "config_sha256": cfg.digest, "seed": cfg.seed, "h": cfg.h,
              "jobs": args.jobs, "exit": code, "versions": _versions()}
    with open(out / "provenance.jsonl", "a") as fh:
        fh.write(json.dumps(record, sort_keys=True) + "\n")
    if not args.quiet:
        print(json.dumps({"command": args.command, "ok": ok, **{k: v for k, v in summary.items()
                                                                  if not isinstance(v, (list, dict))}},
                         sort_keys=True, default=float))
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
