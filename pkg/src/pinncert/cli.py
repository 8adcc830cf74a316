"""Command line entry point: ``pinncert {certify,train,estimate-m} --config FILE --out DIR``.

Configuration files are TOML. Log verbosity is read from the
``PINNCERT_LOG_LEVEL`` environment variable (default ``WARNING``).
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import tomli

from . import certify as C
from .fields import GridMismatchError, NormKind
from .kg_reference import estimate_M
from .problems import ProblemSpec, average_residual, get_problem, reference_errors, residual_series
from .surrogate import NetworkSurrogate, analytic_perturbed, exact_surrogate, init_params, load_params, read_param_meta, save_params
from .training import LossWeights, TrainConfig, TrainingError, build_architecture, default_config, sample_points, train

log = logging.getLogger("pinncert")

CSV_HEADER = "t,E_init,E_PI,E_bc,E_tot,E_ref,E_rel"
LOG_ENV = "PINNCERT_LOG_LEVEL"


class ConfigError(ValueError):
    pass


# configuration ------------------------------------------------------------


@dataclass
class CertSettings:
    bound: str
    alpha: float = C.DEFAULT_ALPHA
    safety: float = C.DEFAULT_SAFETY
    n_time: int = 65
    grid: int = 201
    eval_times: Optional[list] = None
    n_eval: int = 11
    boundary: str = "hard"
    n_zeta_bar: int = 1000
    seed: int = 0
    max_refinements: int = 4
    csv: str = "certificate.csv"


@dataclass
class RunConfig:
    problem: str
    surrogate: dict
    certificate: CertSettings
    train: Optional[TrainConfig] = None
    base_dir: Path = field(default_factory=Path.cwd)


def _train_config(problem: str, section: dict) -> TrainConfig:
    sec = dict(section)
    weights = {}
    for key in ("kappa", "rho"):
        if key in sec:
            weights[key] = float(sec.pop(key))
    try:
        cfg = default_config(problem, **sec)
    except TypeError as exc:
        raise ConfigError(f"bad [train] section: {exc}") from None
    if weights:
        w = cfg.weights
        cfg.weights = LossWeights(weights.get("kappa", w.kappa), weights.get("rho", w.rho))
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        doc = tomli.loads(path.read_text(encoding="utf-8"))
    except (OSError, tomli.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if "problem" not in doc:
        raise ConfigError("config needs a top-level 'problem' key")
    name = doc["problem"]
    try:
        problem = get_problem(name)
    except KeyError as exc:
        raise ConfigError(str(exc)) from None
    cert = dict(doc.get("certificate", {}))
    cert.setdefault("bound", next(iter(problem.bounds)))
    try:
        settings = CertSettings(**cert)
    except TypeError as exc:
        raise ConfigError(f"bad [certificate] section: {exc}") from None
    if settings.bound not in problem.bounds:
        raise ConfigError(f"problem {name!r} has no bound {settings.bound!r}; choose from {sorted(problem.bounds)}")
    if settings.boundary not in ("hard", "soft"):
        raise ConfigError("certificate.boundary must be 'hard' or 'soft'")
    if settings.boundary == "soft" and problem.iss is None:
        raise ConfigError(f"problem {name!r} has no ISS gain for soft-boundary certificates")
    train_cfg = _train_config(name, doc["train"]) if "train" in doc else None
    sur = dict(doc.get("surrogate", {"kind": "exact"}))
    kind = sur.get("kind", "exact")
    if kind not in ("exact", "oracle", "params", "train"):
        raise ConfigError(f"unknown surrogate kind {kind!r}")
    if kind == "oracle" and sur.get("mode") not in problem.modes:
        raise ConfigError(f"oracle mode must be one of {sorted(problem.modes)}")
    if kind == "params" and "path" not in sur:
        raise ConfigError("surrogate kind 'params' needs a 'path'")
    if kind == "train" and train_cfg is None:
        train_cfg = default_config(name)
    return RunConfig(name, sur, settings, train_cfg, path.parent)


# surrogates ---------------------------------------------------------------


def network_from_file(path) -> tuple[NetworkSurrogate, dict]:
    meta = read_param_meta(path)
    problem = get_problem(meta["problem"])
    arch = build_architecture(problem, meta["hidden"], meta.get("boundary", "hard"), meta.get("n_periodic", 8), meta.get("pre_hidden", 8))
    template = init_params(arch, np.random.default_rng(0))
    params, meta = load_params(path, template)
    return NetworkSurrogate(arch, params), meta


def param_meta(config: TrainConfig) -> dict:
    return {
        "problem": config.problem,
        "boundary": config.boundary,
        "hidden": [config.hidden_units] * config.hidden_layers,
        "n_periodic": config.n_periodic,
        "pre_hidden": config.pre_hidden,
    }


def build_surrogate(cfg: RunConfig):
    """Surrogate plus the training-average residual if one is known."""
    problem = get_problem(cfg.problem)
    sur = cfg.surrogate
    kind = sur.get("kind", "exact")
    if kind == "exact":
        return exact_surrogate(problem), None
    if kind == "oracle":
        return analytic_perturbed(problem, sur["mode"], float(sur.get("delta", 0.0))), None
    if kind == "params":
        path = Path(sur["path"])
        if not path.is_absolute():
            path = cfg.base_dir / path
        net, meta = network_from_file(path)
        if meta.get("problem") != cfg.problem:
            raise ConfigError(f"parameter file is for problem {meta.get('problem')!r}")
        zb = meta.get("report", {}).get("zeta_bar")
        return net, zb
    result = train(cfg.train)
    return result.surrogate, result.report["zeta_bar"]


# certification pipeline ---------------------------------------------------


@dataclass
class CertifyOutcome:
    certificate: C.Certificate
    series: C.ResidualSeries
    info: dict


def _eval_times(problem: ProblemSpec, s: CertSettings) -> tuple[np.ndarray, int]:
    """Evaluation times and a compatible sample count."""
    tf = problem.t_final
    if s.eval_times is not None:
        return np.asarray(s.eval_times, dtype=float), max(2, s.n_time)
    if s.n_eval < 2:
        raise ConfigError("n_eval must be >= 2")
    step = s.n_eval - 1
    m = max(1, math.ceil((s.n_time - 1) / step))
    return np.linspace(0.0, tf, s.n_eval), step * m + 1


def certify_surrogate(problem: ProblemSpec, surrogate, s: CertSettings, zeta_bar: Optional[float] = None) -> CertifyOutcome:
    """Residual series, curvature estimate, subinterval sizing and the certificate.

    If the trapezoid remainder at any evaluation time would exceed ``alpha``
    times the expected equation error, the time sampling is refined by an
    integer factor (so evaluation times stay on the grid) and redone.
    """
    bound = problem.bound(s.bound)
    norm = problem.norm_for(s.bound)
    grid = problem.grid(s.grid)
    eval_t, n_time = _eval_times(problem, s)
    if zeta_bar is None:
        pts = sample_points((0.0, *problem.lower), (problem.t_final, *problem.upper), s.n_zeta_bar, seed=s.seed)
        zeta_bar = average_residual(problem, surrogate, pts)
    soft = s.boundary == "soft"
    refinements = 0
    while True:
        series = residual_series(problem, surrogate, n_time, grid, norm, with_boundary=soft or None)
        for t in eval_t:
            series.index_of(t)
        K = C.estimate_curvature_bound(series, bound, s.safety)
        needed = 1
        for t in eval_t:
            if t <= 0:
                continue
            eps_exp = C.expected_equation_error(bound, series.zeta0, zeta_bar, problem.volume, t)
            if eps_exp <= 0 or K == 0:
                continue
            n_req = C.required_subintervals(bound, K, s.alpha, t, eps_exp)
            needed = max(needed, math.ceil(n_req / series.index_of(t)))
        if needed <= 1 or refinements >= s.max_refinements:
            break
        n_time = (n_time - 1) * needed + 1
        refinements += 1
        log.info("refining time sampling to %d samples", n_time)
    if soft:
        cert = C.certify_soft(bound, series, K, problem.iss, eval_t)
    else:
        cert = C.certify_hard(bound, series, K, eval_t)
    cert.K_estimated = True
    cert = cert.with_reference(reference_errors(problem, surrogate, cert.t, grid, norm))
    info = {
        "problem": problem.name,
        "bound": s.bound,
        "M": bound.M,
        "omega": bound.omega,
        "norm": norm.value,
        "boundary": s.boundary,
        "n_time": n_time,
        "refinements": refinements,
        "K": K,
        "K_estimated": True,
        "safety": s.safety,
        "alpha": s.alpha,
        "zeta0": series.zeta0,
        "zeta_bar": zeta_bar,
        "sufficient_subintervals": needed <= 1,
    }
    return CertifyOutcome(cert, series, info)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def certificate_csv(cert: C.Certificate) -> str:
    lines = [CSV_HEADER]
    ref = cert.eps_ref if cert.eps_ref is not None else np.zeros_like(cert.t)
    for i in range(cert.t.size):
        e_rel = "" if ref[i] == 0 else _fmt(cert.eps_tot[i] / ref[i])
        row = [cert.t[i], cert.eps_init[i], cert.eps_pi[i], cert.eps_bc[i], cert.eps_tot[i], ref[i]]
        lines.append(",".join(_fmt(v) for v in row) + "," + e_rel)
    return "\n".join(lines) + "\n"


def write_report(path: Path, info: dict) -> None:
    text = "".join(f"{k} = {v!r}\n" if isinstance(v, float) else f"{k} = {v}\n" for k, v in info.items())
    path.write_text(text, encoding="utf-8")


# subcommands ----------------------------------------------------------------


def run_certify(config_path, out_dir) -> int:
    cfg = load_config(config_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    problem = get_problem(cfg.problem)
    surrogate, zeta_bar = build_surrogate(cfg)
    result = certify_surrogate(problem, surrogate, cfg.certificate, zeta_bar)
    csv_path = out / cfg.certificate.csv
    csv_path.write_text(certificate_csv(result.certificate), encoding="utf-8")
    write_report(csv_path.with_suffix(".report.txt"), result.info)
    log.info("wrote %s", csv_path)
    return 0


def run_train(config_path, out_dir) -> int:
    cfg = load_config(config_path)
    if cfg.train is None:
        raise ConfigError("train needs a [train] section")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    result = train(cfg.train)
    meta = param_meta(cfg.train)
    meta["report"] = result.report
    stem = f"{cfg.problem}"
    save_params(out / f"{stem}.params.json", result.surrogate.params, meta)
    write_report(out / f"{stem}.train_report.txt", result.report)
    np.savetxt(out / f"{stem}.loss_history.txt", result.history, fmt="%.17g")
    return 0


def run_estimate_m(config_path, out_dir) -> int:
    path = Path(config_path)
    try:
        doc = tomli.loads(path.read_text(encoding="utf-8"))
    except (OSError, tomli.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    sec = doc.get("estimate_m", {})
    n_samples = int(sec.get("n_samples", 100))
    seed = int(sec.get("seed", 0))
    n_nodes = int(sec.get("n_nodes", 201))
    if "t_grid" in sec:
        t_grid = np.asarray(sec["t_grid"], dtype=float)
    else:
        t_grid = np.linspace(0.0, float(sec.get("t_final", 0.2)), int(sec.get("n_times", 50)))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    info = {"n_samples": n_samples, "seed": seed, "n_nodes": n_nodes, "n_times": int(t_grid.size), "t_final": float(t_grid.max())}
    for norm in (NormKind.L2, NormKind.KG_ENERGY):
        est = estimate_M(n_samples, seed, t_grid, norm, n_nodes=n_nodes)
        info[f"M_lower_{norm.value}"] = est.M_lower
        print(f"{norm.value}: M >= {est.M_lower:.6g} ({est.n_samples} samples, {t_grid.size} times)")
    write_report(out / "estimate_m.report.txt", info)
    return 0


COMMANDS = {"certify": run_certify, "train": run_train, "estimate-m": run_estimate_m}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="pinncert", description="A posteriori error certificates for PDE surrogates.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="TOML configuration file")
        p.add_argument("--out", required=True, help="output directory")
    args = parser.parse_args(argv)
    logging.basicConfig(level=os.environ.get(LOG_ENV, "WARNING").upper(), format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args.config, args.out)
    except (ConfigError, GridMismatchError, KeyError) as exc:
        print(f"pinncert: configuration error: {exc}", file=sys.stderr)
        return 2
    except (TrainingError, OSError, ValueError, ArithmeticError) as exc:
        print(f"pinncert: {args.command} failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
