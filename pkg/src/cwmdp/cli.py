"""Command-line experiment runner.

    cw <experiment> --config <file.json> [--seed S] [--out DIR]

Every run writes its result files plus ``manifest.json`` (config echo, seed,
package versions, wall time, list of emitted files) into the output
directory.  Exit codes: 0 success, 2 usage error, 3 configuration or
admissibility error, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import platform
import secrets
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numba
import numpy as np
import scipy

from . import __version__
from .errors import (ConfigurationError, CWError, DomainError, NumericRangeError,
                     OptimizationError, RegimeError, UnsupportedOrderError)
from .experiments import containment_smoke, repeated_clt_compare, table1_rows
from .genconv import DEFAULT_LADDER, TestFunction, containment_bound, convergence_ladder, witness_family
from .hamiltonian import (AnalyticPath, action, ellis_constant_check, make_hamiltonian,
                          optimal_path, quadratic, quasi_potential, reversed_relaxation)
from .model import ModelParams, find_fixed_points
from .sdelimit import (integrate_sde, long_run_histogram_check, long_run_samples,
                       make_diffusion, stationary_constant_report, stationary_density)
from .simulator import ScalingRegime, simulate_ensemble
from .stats import EmpiricalDistribution, summary_json

EXPERIMENTS = ("simulate", "genconv", "clt-compare", "action", "optimal-path",
               "quasipotential", "sde", "stationary", "containment", "table1")

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3, 4


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    experiment: str
    raw: dict
    seed: int
    seed_source: str
    out: Path
    params: ModelParams = None
    regime: ScalingRegime = None
    options: dict = field(default_factory=dict)


# --- parsing and validation ------------------------------------------------

def _params(raw):
    block = raw.get("params")
    if block is None:
        return None
    if not isinstance(block, dict):
        raise ConfigurationError("'params' must be an object")
    return ModelParams.from_dict(block)


def _regime_dict(raw, params):
    block = raw.get("regime")
    if block is None:
        return None
    if not isinstance(block, dict):
        raise ConfigurationError("'regime' must be an object")
    d = dict(block)
    kind = d.get("kind", "ldp")
    if kind == "mdp" and "b_exponent" not in d:
        d["b_exponent"] = 1.0 / (4 * (int(d.get("k", 0)) + 1))
    if kind == "mdp_temp":
        d.setdefault("k", 1)
        d.setdefault("b_exponent", 1.0 / 8)
    if kind == "clt_temp":
        d.setdefault("k", 1)
    if d.get("m") == "positive_root":
        if params is None:
            raise ConfigurationError("m = 'positive_root' needs model parameters")
        d["m"] = find_fixed_points(params).positive_root()
    return d


def _sizes(raw):
    out = []
    if "n" in raw:
        out.append(int(raw["n"]))
    out.extend(int(n) for n in raw.get("ns", ()))
    return out


def validate(raw):
    """Violations of admissibility, flatness-order consistency and ``kappa >= 0``."""
    if not isinstance(raw, dict) or not raw:
        return ["empty configuration"]
    problems = []
    try:
        params = _params(raw)
        d = _regime_dict(raw, params)
    except (CWError, TypeError, ValueError) as exc:
        return [str(exc)]
    if d is None:
        return problems
    kind = d.get("kind", "ldp")
    k = int(d.get("k", 1 if kind in ("mdp_temp", "clt_temp") else 0))
    if d.get("kappa", 0.0) < 0:
        problems.append(f"kappa = {d['kappa']} must be nonnegative")
    if kind in ("mdp", "mdp_temp") and d.get("strict", True):
        alpha = float(d.get("b_exponent", 1.0 / (4 * (k + 1))))
        if not 0 < alpha < 1.0 / (2 * (k + 1)):
            problems.append(
                f"b_n = n^{alpha:g}: b_n^{2 * (k + 1)}/n = n^{2 * (k + 1) * alpha - 1:g} "
                "does not tend to 0" if alpha > 0 else f"b_n = n^{alpha:g} does not diverge"
            )
    try:
        lenient = dict(d, strict=False) if kind in ("mdp", "mdp_temp") else d
        regime = ScalingRegime.from_dict(lenient)
    except (CWError, TypeError, ValueError) as exc:
        return problems + [str(exc)]
    if kind in ("mdp", "mdp_temp") and d.get("strict", True):
        strict = ScalingRegime.from_dict(dict(lenient, strict=True)) if not problems else None
        if strict is not None:
            for n in _sizes(raw):
                problems.extend(strict.violations(n))
    if kind in ("mdp", "clt") and params is not None:
        try:
            make_hamiltonian(regime, params)
        except (RegimeError, DomainError, UnsupportedOrderError) as exc:
            problems.append(str(exc))
    return problems


def resolve_seed(raw, cli_seed):
    """Seed precedence: --seed, then CW_SEED, then the config, then random."""
    if cli_seed is not None:
        return int(cli_seed), "cli"
    env = os.environ.get("CW_SEED")
    if env not in (None, ""):
        try:
            return int(env, 0), "env"
        except ValueError as exc:
            raise UsageError(f"CW_SEED={env!r} is not an integer") from exc
    if "seed" in raw:
        return int(raw["seed"]), "config"
    return secrets.randbits(63), "random"


def load_config(experiment, path, cli_seed=None, out=None):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config: {exc}") from exc
    if not text.strip():
        raise UsageError("empty configuration")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict) or not raw:
        raise UsageError("empty configuration")
    named = raw.get("experiment")
    if named is not None and named != experiment:
        raise UsageError(f"config is for {named!r}, not {experiment!r}")
    seed, source = resolve_seed(raw, cli_seed)
    out = Path(out if out is not None else raw.get("out", f"cw-out/{experiment}"))
    return RunConfig(experiment, raw, seed, source, out)


def _prepare(cfg):
    problems = validate(cfg.raw)
    if problems:
        raise ConfigurationError("; ".join(problems))
    cfg.params = _params(cfg.raw)
    d = _regime_dict(cfg.raw, cfg.params)
    cfg.regime = ScalingRegime.from_dict(d) if d is not None else None
    cfg.options = {k: v for k, v in cfg.raw.items()
                   if k not in ("params", "regime", "seed", "experiment", "out")}


# --- output helpers --------------------------------------------------------

def _csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def _need(cfg, *names):
    missing = [n for n in names if getattr(cfg, n) is None]
    if missing:
        raise ConfigurationError(f"{cfg.experiment} needs {', '.join(missing)}")


def _hamiltonian(cfg):
    block = cfg.options.get("hamiltonian")
    if block is not None:
        return quadratic(block["drift"], block["D"], label="custom")
    _need(cfg, "regime")
    return make_hamiltonian(cfg.regime, cfg.params)


# --- experiments -----------------------------------------------------------

def exp_simulate(cfg):
    _need(cfg, "regime")
    o = cfg.options
    n, T = int(o["n"]), float(o.get("T", 1.0))
    record = bool(o.get("record_paths", False))
    runs = simulate_ensemble(cfg.params, cfg.regime, n, float(o.get("y0", 0.0)), T,
                             int(o.get("n_replicas", 100)), cfg.seed, record_events=record)
    files = {"terminal.csv": _csv(["replica", "y_T", "sup_abs", "n_events"],
                                  [(s.replica, s.terminal, s.sup_abs, s.n_events) for s in runs])}
    if record:
        files["paths.csv"] = _csv(["replica", "t", "y"],
                                  [(s.replica, t, y) for s in runs
                                   for t, y in zip(s.times, s.values)])
    summary = EmpiricalDistribution(np.array([s.terminal for s in runs])).summary()
    summary["n"] = n
    return files, summary


def exp_genconv(cfg):
    _need(cfg, "regime")
    o = cfg.options
    fns = [TestFunction.from_dict(d) for d in o["test_functions"]] \
        if "test_functions" in o else witness_family()
    ns = o.get("ns", list(DEFAULT_LADDER))
    files, summary = {}, {"ladders": []}
    for i, f in enumerate(fns):
        rep = convergence_ladder(cfg.params, cfg.regime, f, ns, float(o.get("K", 3.0)))
        files[f"ladder_{i}.json"] = rep.to_json()
        files[f"ladder_{i}.csv"] = rep.to_csv()
        summary["ladders"].append({"errors": rep.errors, "ratio": rep.ratio,
                                   "strictly_decreasing": rep.strictly_decreasing})
    return files, summary


def exp_clt_compare(cfg):
    _need(cfg, "regime")
    o = cfg.options
    thr = o.get("ks_threshold")
    res = repeated_clt_compare(cfg.params, cfg.regime, int(o["n"]), float(o.get("T", 1.0)),
                               int(o.get("n_replicas", 10_000)), cfg.seed,
                               int(o.get("repetitions", 1)), float(o.get("dt", 1e-3)),
                               float(o.get("y0", 0.0)), o.get("sampler", "auto"),
                               None if thr is None else float(thr))
    reps = [r.summary() for r in res]
    files = {"ks_report.json": summary_json({"repetitions": reps}),
             "samples.csv": _csv(["replica", "chain", "sde"],
                                 [(i, a, b) for i, (a, b) in enumerate(zip(res[0].chain, res[0].sde))])}
    return files, {"passed": sum(r["pass"] for r in reps), "repetitions": len(reps),
                   "ks": [r["ks"] for r in reps]}


def exp_action(cfg):
    spec = _hamiltonian(cfg)
    o = cfg.options
    path = o.get("path", {"kind": "reversed_relaxation", "a": 1.0})
    kind = path.get("kind")
    if kind == "reversed_relaxation":
        a = float(path.get("a", 1.0))
        rate = abs(float(spec.drift.deriv()(a)))
        T = float(path.get("T", 20.0 / rate if rate > 0 else 20.0))
        value = action(spec, reversed_relaxation(spec, a, T))
        summary = {"action": value, "T": T, "a": a,
                   "S(a)": float(quasi_potential(spec).S(a))}
    elif kind == "linear":
        x0, x1, T = float(path["x0"]), float(path["x1"]), float(path["T"])
        value = action(spec, AnalyticPath(lambda t: x0 + (x1 - x0) * t / T,
                                          lambda t: np.full_like(t, (x1 - x0) / T), T))
        summary = {"action": value, "T": T}
    else:
        raise ConfigurationError(f"unknown path kind {kind!r}")
    return {"action.json": summary_json(summary)}, summary


def exp_optimal_path(cfg):
    spec = _hamiltonian(cfg)
    o = cfg.options
    path, value = optimal_path(spec, float(o["x_start"]), float(o["x_end"]), float(o["T"]),
                               int(o.get("M", 256)), o.get("method", "shooting"))
    summary = {"action": value, "T": path.T, "M": len(path.times) - 1}
    return {"path.csv": _csv(["t", "x"], zip(path.times, path.values)),
            "action.json": summary_json(summary)}, summary


def exp_quasipotential(cfg):
    spec = _hamiltonian(cfg)
    qp = quasi_potential(spec)
    summary = {"S_coefficients": qp.S.coef.tolist(), "residual": qp.residual}
    betas = cfg.options.get("ellis_betas", [])
    summary["ellis"] = [dict(zip(("beta", "lhs", "rhs"), (b, *ellis_constant_check(b))))
                        for b in betas]
    x = np.linspace(-3.0, 3.0, 121)
    return {"quasipotential.csv": _csv(["x", "S"], zip(x, qp.S(x))),
            "quasipotential.json": summary_json(summary)}, summary


def exp_sde(cfg):
    _need(cfg, "regime")
    o = cfg.options
    spec = make_diffusion(cfg.regime, cfg.params)
    ens = integrate_sde(spec, float(o.get("y0", 0.0)), float(o.get("T", 1.0)),
                        float(o.get("dt", 1e-3)), int(o.get("n_paths", 1000)), cfg.seed)
    summary = EmpiricalDistribution(ens.samples).summary()
    summary["n_diverged"] = ens.n_diverged
    return {"samples.csv": _csv(["path", "y"], enumerate(ens.samples)),
            "summary.json": summary_json(summary)}, summary


def exp_stationary(cfg):
    _need(cfg, "regime")
    o = cfg.options
    spec = make_diffusion(cfg.regime, cfg.params)
    rho = stationary_density(spec)
    y, dens = rho.grid(int(o.get("grid", 2001)))
    summary = {"window": rho.window, "exponent": rho.exponent.coef.tolist(),
               "excess_kurtosis": rho.excess_kurtosis()}
    if cfg.regime.kind == "clt":
        rep = stationary_constant_report(cfg.params, cfg.regime)
        summary["constant_report"] = rep.summary()
    if int(o.get("n_paths", 0)) > 0:
        samples = long_run_samples(spec, int(o["n_paths"]), float(o.get("T", 50.0)),
                                   float(o.get("dt", 1e-3)), seed=cfg.seed)
        summary["l1_distance"] = long_run_histogram_check(spec, samples, int(o.get("bins", 40)))
    return {"density.csv": _csv(["y", "rho"], zip(y, dens)),
            "stationary.json": summary_json(summary)}, summary


def exp_containment(cfg):
    o = cfg.options
    if "levels" in o:
        _need(cfg, "regime")
        levels = [float(c) for c in o["levels"]]
        probs = containment_smoke(cfg.params, cfg.regime, int(o["n"]), float(o.get("T", 1.0)),
                                  int(o.get("n_replicas", 1000)), cfg.seed, levels)
        summary = {"levels": levels, "probabilities": probs.tolist()}
        return {"containment.csv": _csv(["C", "probability"], zip(levels, probs)),
                "containment.json": summary_json(summary)}, summary
    rep = containment_bound(_hamiltonian(cfg))
    summary = {"grid_sup": rep.grid_sup, "argmax": rep.argmax, "M": rep.M,
               "c_norm_A": rep.c_norm_A, "analytic_bound": rep.analytic_bound,
               "holds": rep.holds}
    return {"containment.json": summary_json(summary)}, summary


def exp_table1(cfg):
    rows = table1_rows()
    keys = ["alpha", "temperature", "process", "limit", "regime"]
    return {"table1.csv": _csv(keys, ([r[k] for k in keys] for r in rows)),
            "table1.json": summary_json(rows)}, {"rows": len(rows)}


RUNNERS = {
    "simulate": exp_simulate, "genconv": exp_genconv, "clt-compare": exp_clt_compare,
    "action": exp_action, "optimal-path": exp_optimal_path,
    "quasipotential": exp_quasipotential, "sde": exp_sde, "stationary": exp_stationary,
    "containment": exp_containment, "table1": exp_table1,
}


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj) if math.isfinite(obj) else repr(float(obj))
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def run(cfg):
    """Run one experiment and write its files; returns the manifest dict."""
    if cfg.experiment not in RUNNERS:
        raise UsageError(f"unknown experiment {cfg.experiment!r}")
    _prepare(cfg)
    start = time.perf_counter()
    files, summary = RUNNERS[cfg.experiment](cfg)
    wall = time.perf_counter() - start
    cfg.out.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        with open(cfg.out / name, "w", newline="\n") as fh:
            fh.write(text)
    manifest = {
        "experiment": cfg.experiment,
        "config": cfg.raw,
        "seed": cfg.seed,
        "seed_source": cfg.seed_source,
        "versions": {"cwmdp": __version__, "numpy": np.__version__,
                     "scipy": scipy.__version__, "numba": numba.__version__,
                     "python": platform.python_version()},
        "files": sorted(files),
        "summary": _clean(summary),
        "wall_time_s": wall,
    }
    with open(cfg.out / "manifest.json", "w", newline="\n") as fh:
        fh.write(summary_json(manifest))
    return manifest


def main(argv=None):
    parser = argparse.ArgumentParser(prog="cw", description=__doc__.splitlines()[0])
    parser.add_argument("experiment", choices=EXPERIMENTS)
    parser.add_argument("--config", required=True, help="JSON configuration file")
    parser.add_argument("--seed", type=int, default=None, help="64-bit seed")
    parser.add_argument("--out", default=None, help="output directory")
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.experiment, args.config, args.seed, args.out)
        manifest = run(cfg)
    except UsageError as exc:
        print(f"cw: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigurationError, RegimeError, DomainError, UnsupportedOrderError,
            KeyError, TypeError, ValueError) as exc:
        print(f"cw: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericRangeError, OptimizationError, ArithmeticError, RuntimeError) as exc:
        print(f"cw: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    print(f"cw: wrote {len(manifest['files']) + 1} files to {cfg.out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
