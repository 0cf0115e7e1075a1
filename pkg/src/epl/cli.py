"""``epl`` command-line entry point.

Every command writes ``<command>_summary.json`` and ``<command>_series.csv``
into ``--out``.  Exit codes: 0 pass, 2 verification failure, 1 usage or
parameter error.  Settings come from ``--config`` (a flat JSON object whose
keys are the long flag names with dashes or underscores); explicit flags win.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import traceback
from pathlib import Path

import numpy as np

from . import chaining, procgen, reduction, verify
from ._io import write_csv, write_json
from .distmodel import CantorCdf, Exponential, Normal, Uniform01, log_modulus_report
from .empproc import empirical_process, sup_distance
from .errors import EplError, ParameterError

log = logging.getLogger("epl")

COMMANDS = (
    "simulate",
    "chain",
    "reduce",
    "verify-clt",
    "verify-moment4",
    "verify-cov",
    "verify-tightness",
    "bad-intervals",
    "report",
)

DEFAULTS = {
    "out": ".",
    "seed": None,
    "threads": 1,
    "process": "iid-uniform",
    "theta": 0.5,
    "scale": 1.0,
    "rho": 0.5,
    "noise_half_width": 0.25,
    "nar_map": "linear",
    "n_branches": 4,
    "trunc_depth": 40,
    "burn_in": None,
    "model": None,
    "rate": 2.0,
    "loc": 0.0,
    "sd": 1.0,
    "n": None,
    "m": 10,
    "eps": 0.1,
    "t": None,
    "delta": 0.1,
    "gamma": None,
    "D": None,
    "alpha": 3.0,
    "beta": 2.0,
    "reps": None,
    "f": "identity",
    "lag": None,
    "threshold": 0.05,
    "tolerance": 0.03,
    "eta": 0.05,
    "n_list": None,
    "points": None,
    "levels": None,
    "grid_size": 100_000,
    "tol": 1e-10,
}

MODEL_NAMES = ("uniform", "cantor", "exp", "normal")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def _floats(text):
    return [float(v) for v in str(text).replace(";", ",").split(",") if v.strip()]


def _ints(text):
    return [int(v) for v in str(text).replace(";", ",").split(",") if v.strip()]


def build_parser():
    p = _Parser(prog="epl", description="Empirical-process chaining, reduction and verification runs.")
    p.add_argument("command", choices=COMMANDS)
    a = p.add_argument
    S = argparse.SUPPRESS
    a("--config", default=None, help="JSON file with settings; flags override it")
    a("--out", default=S, help="output directory")
    a("--seed", type=int, default=S, help="master seed (falls back to $EPL_SEED, then 0)")
    a("--threads", type=int, default=S, help="worker threads for replicates")
    a("--process", default=S, choices=procgen.KINDS)
    a("--theta", type=float, default=S)
    a("--scale", type=float, default=S)
    a("--rho", type=float, default=S)
    a("--noise-half-width", dest="noise_half_width", type=float, default=S)
    a("--nar-map", dest="nar_map", default=S, choices=procgen.NAR_LINKS)
    a("--n-branches", dest="n_branches", type=int, default=S)
    a("--trunc-depth", dest="trunc_depth", type=int, default=S)
    a("--burn-in", dest="burn_in", type=int, default=S)
    a("--model", default=S, choices=MODEL_NAMES, help="marginal model (defaults to the process marginal)")
    a("--rate", type=float, default=S, help="exponential rate")
    a("--loc", type=float, default=S, help="normal location")
    a("--sd", type=float, default=S, help="normal standard deviation")
    a("--n", type=int, default=S, help="path length")
    a("--m", type=int, default=S, help="number of partition cells")
    a("--eps", type=float, default=S)
    a("--t", type=float, default=S, help="evaluation point for chain")
    a("--delta", type=float, default=S)
    a("--gamma", type=float, default=S)
    a("--D", type=float, default=S)
    a("--alpha", type=float, default=S)
    a("--beta", type=float, default=S)
    a("--reps", type=int, default=S, help="replicate count")
    a("--f", default=S, help="test function: identity, centered-identity, constant")
    a("--lag", type=int, default=S)
    a("--threshold", type=float, default=S, help="KS pass threshold")
    a("--tolerance", type=float, default=S, help="covariance tolerance")
    a("--eta", type=float, default=S, help="tightness probability bound")
    a("--n-list", dest="n_list", default=S, help="comma-separated n values")
    a("--points", default=S, help="comma-separated t values")
    a("--levels", default=S, help="comma-separated quantile levels (mapped through the marginal)")
    a("--grid-size", dest="grid_size", type=int, default=S)
    a("--tol", type=float, default=S)
    return p


def resolve_config(argv=None):
    args = build_parser().parse_args(argv)
    cfg = dict(DEFAULTS)
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ParameterError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(data, dict):
            raise ParameterError("config must be a JSON object")
        for k, v in data.items():
            key = k.replace("-", "_")
            if key == "kind":
                key = "process"
            if key not in cfg:
                raise ParameterError(f"unknown config key {k!r}")
            cfg[key] = v
    for k, v in vars(args).items():
        if k not in ("command", "config"):
            cfg[k] = v
    cfg["command"] = args.command
    if cfg["seed"] is None:
        env = os.environ.get("EPL_SEED")
        try:
            cfg["seed"] = int(env) if env not in (None, "") else 0
        except ValueError as exc:
            raise ParameterError(f"EPL_SEED must be an integer, got {env!r}") from exc
    if int(cfg["seed"]) < 0:
        raise ParameterError("seed must be nonnegative")
    if int(cfg["threads"]) < 1:
        raise ParameterError("--threads must be at least 1")
    return cfg


def _model(cfg):
    name = cfg["model"]
    if name == "uniform":
        return Uniform01()
    if name == "cantor":
        return CantorCdf()
    if name == "exp":
        return Exponential(float(cfg["rate"]))
    if name == "normal":
        return Normal(float(cfg["loc"]), float(cfg["sd"]))
    raise ParameterError(f"unknown model {name!r}")


def _spec(cfg):
    kind = cfg["process"]
    model = _model(cfg) if kind == "iid-model" else None
    return procgen.ProcessSpec(
        kind=kind,
        theta=float(cfg["theta"]),
        scale=float(cfg["scale"]),
        rho=float(cfg["rho"]),
        noise_half_width=float(cfg["noise_half_width"]),
        nar_map=cfg["nar_map"],
        n_branches=int(cfg["n_branches"]),
        trunc_depth=int(cfg["trunc_depth"]),
        burn_in=None if cfg["burn_in"] is None else int(cfg["burn_in"]),
        model=model,
    )


def _list(value, parse):
    if value is None:
        return None
    if isinstance(value, (list, tuple)):
        return [parse(str(v))[0] for v in value]
    return parse(value)


def _n(cfg, default):
    return int(cfg["n"]) if cfg["n"] is not None else default


def _reps(cfg, default):
    return int(cfg["reps"]) if cfg["reps"] is not None else default


def _f(cfg, spec):
    return verify.LipschitzFn.from_name(cfg["f"])


# --- commands ----------------------------------------------------------------------


def cmd_simulate(cfg):
    spec = _spec(cfg)
    n, reps = _n(cfg, 1000), _reps(cfg, 1)
    paths = procgen.generate_batch(spec, n, cfg["seed"], range(reps), threads=cfg["threads"])
    rows = [("replicate", "i", "value")]
    for r in range(reps):
        rows.extend((r, i + 1, float(v)) for i, v in enumerate(paths[r]))
    summary = {
        "spec": spec.to_dict(),
        "n": n,
        "replicates": reps,
        "seed": cfg["seed"],
        "mean": float(paths.mean()),
        "min": float(paths.min()),
        "max": float(paths.max()),
        "pass": True,
    }
    if spec.kind in ("iid-uniform", "cantor", "gouezel", "iid-model"):
        summary["ks_vs_marginal"] = verify.ks_statistic(paths.reshape(-1), procgen.reference_cdf(spec))
    return summary, rows


def cmd_chain(cfg):
    spec = _spec(cfg)
    model = _model(cfg) if cfg["model"] else procgen.reference_cdf(spec)
    n, m, eps = _n(cfg, 10_000), int(cfg["m"]), float(cfg["eps"])
    part = chaining.build_partition(model, m)
    K = chaining.choose_chain_depth(n, part.h, eps)
    x = procgen.generate(spec, n, cfg["seed"], 0).values
    t = float(model.quantile(0.5)) if cfg["t"] is None else float(cfg["t"])
    terms = chaining.chain_decomposition(x, part, t, K)
    sp = chaining.smoothed_process(x, part)
    sup_dev = sup_distance(empirical_process(x, model), sp.process)
    passed = terms.residual < 1e-12 and terms.sandwich_violations == 0
    summary = {
        "K": K,
        "n": n,
        "m": m,
        "eps": eps,
        "t": t,
        "cell": terms.j,
        "residual": terms.residual,
        "sup_deviation": sup_dev,
        "sandwich_violations": terms.sandwich_violations,
        "seed": cfg["seed"],
        "pass": passed,
    }
    rows = [("k", "l", "term", "residual")] + terms.rows()
    return summary, rows


def _reduction_model(cfg):
    if cfg["model"] is None:
        cfg = dict(cfg, model="exp")
    return _model(cfg)


def cmd_bad_intervals(cfg):
    model = _reduction_model(cfg)
    bad = reduction.find_bad_intervals(model, grid_size=int(cfg["grid_size"]), tol=float(cfg["tol"]))
    summary = {
        "model": model.to_dict(),
        "intervals": bad.to_list(),
        "total_length": bad.total_length,
        "scan_range": list(bad.scan_range),
        "tol": bad.tol,
        "pass": True,
    }
    rows = [("x", "y", "lemma_residual")] + [(d["x"], d["y"], d["lemma_residual"]) for d in bad.to_list()]
    write_json(Path(cfg["out"]) / "bad_intervals.json", bad.to_list())
    return summary, rows


def cmd_reduce(cfg):
    model = _reduction_model(cfg)
    bad = reduction.find_bad_intervals(model, grid_size=int(cfg["grid_size"]), tol=float(cfg["tol"]))
    g = reduction.build_reduction(model, bad)
    spec = procgen.ProcessSpec.iid(model)
    n = _n(cfg, 100)
    x = procgen.generate(spec, n, cfg["seed"], 0).values
    lo, hi = bad.scan_range
    grid = np.linspace(lo, hi, 1000)
    resid = reduction.verify_transport(x, model, g, grid)
    rng = procgen.replicate_rng(cfg["seed"], 1)
    s, t = rng.uniform(lo, hi, (2, 100_000))
    lip_excess = float(np.max(np.abs(g(s) - g(t)) - np.abs(s - t)))
    proc_u = empirical_process(x, model)
    y = reduction.reduce_path(g, x)
    proc_v = empirical_process(y, g.reduced_model)
    rows = [("t", "g", "U", "V_of_g")]
    rows += [(float(a), float(b), float(c), float(d)) for a, b, c, d in
             zip(grid, g(grid), proc_u.as_function_of(grid), proc_v.as_function_of(g(grid)))]
    passed = resid < 1e-10 and lip_excess <= 1e-12
    summary = {
        "model": model.to_dict(),
        "intervals": bad.to_list(),
        "n": n,
        "transport_residual": resid,
        "lipschitz_excess": lip_excess,
        "seed": cfg["seed"],
        "pass": passed,
    }
    return summary, rows


def cmd_verify_clt(cfg):
    spec = _spec(cfg)
    n = _n(cfg, 4096)
    rep = verify.clt_check(spec, _f(cfg, spec), n, _reps(cfg, 2000), threshold=float(cfg["threshold"]),
                           master_seed=cfg["seed"], lag=cfg["lag"], threads=cfg["threads"])
    summary = rep.to_dict()
    summary["seed"] = cfg["seed"]
    summary["pass"] = rep.passed
    return summary, rep.rows()


def cmd_verify_moment4(cfg):
    spec = _spec(cfg)
    n_list = _list(cfg["n_list"], _ints) or [2**k for k in range(6, 13)]
    rep = verify.moment4_scan(spec, _f(cfg, spec), n_list, _reps(cfg, 1000), alpha=float(cfg["alpha"]),
                              beta=float(cfg["beta"]), master_seed=cfg["seed"], threads=cfg["threads"])
    summary = rep.to_dict()
    summary["seed"] = cfg["seed"]
    return summary, rep.rows()


def cmd_verify_cov(cfg):
    spec = _spec(cfg)
    model = procgen.reference_cdf(spec)
    pts = _list(cfg["points"], _floats)
    levels = _list(cfg["levels"], _floats)
    if pts is None:
        pts = [float(model.quantile(u)) for u in (levels or [0.25, 0.5, 0.75])]
    n = _n(cfg, 2048)
    expected = verify.bridge_covariance(pts) if spec.kind == "iid-uniform" else None
    rep = verify.cov_kernel(spec, pts, n, _reps(cfg, 5000), lag=cfg["lag"], master_seed=cfg["seed"],
                            tolerance=float(cfg["tolerance"]), expected=expected, threads=cfg["threads"])
    summary = rep.to_dict()
    summary["seed"] = cfg["seed"]
    return summary, rep.rows()


def cmd_verify_tightness(cfg):
    spec = _spec(cfg)
    n = _n(cfg, 4096)
    rep = verify.tightness_probe(spec, n, float(cfg["delta"]), float(cfg["eps"]), _reps(cfg, 200),
                                 master_seed=cfg["seed"], threads=cfg["threads"])
    summary = rep.to_dict()
    summary["eta"] = float(cfg["eta"])
    summary["seed"] = cfg["seed"]
    summary["pass"] = bool(rep.estimate <= float(cfg["eta"]))
    return summary, rep.rows()


def cmd_report(cfg):
    out = Path(cfg["out"])
    rows = [("command", "pass")]
    entries = {}
    for cmd in COMMANDS:
        if cmd == "report":
            continue
        path = out / f"{cmd}_summary.json"
        if path.exists():
            data = json.loads(path.read_text(encoding="utf-8"))
            entries[cmd] = bool(data.get("pass", False))
            rows.append((cmd, entries[cmd]))
    summary = {"commands": entries, "pass": all(entries.values())}
    if cfg["gamma"] is not None:
        model = _model(cfg) if cfg["model"] else procgen.reference_cdf(_spec(cfg))
        mod = log_modulus_report(model, float(cfg["gamma"]), np.geomspace(1e-8, 0.5, 60))
        summary["modulus"] = mod.to_dict()
        summary["modulus"].pop("grid")
        summary["modulus"].pop("omega")
        if cfg["D"] is not None:
            summary["modulus"]["D"] = float(cfg["D"])
            summary["modulus"]["holds_with_D"] = bool(mod.minimal_d <= float(cfg["D"]))
            summary["pass"] = summary["pass"] and summary["modulus"]["holds_with_D"]
        rows = [("command", "pass")] + rows[1:] + [("#", "#")] + list(mod.rows())
    return summary, rows


HANDLERS = {
    "simulate": cmd_simulate,
    "chain": cmd_chain,
    "reduce": cmd_reduce,
    "verify-clt": cmd_verify_clt,
    "verify-moment4": cmd_verify_moment4,
    "verify-cov": cmd_verify_cov,
    "verify-tightness": cmd_verify_tightness,
    "bad-intervals": cmd_bad_intervals,
    "report": cmd_report,
}


def _module_of(exc):
    """Name of the innermost epl module on the traceback."""
    name = "epl"
    pkg = Path(__file__).resolve().parent
    for frame in traceback.extract_tb(exc.__traceback__):
        p = Path(frame.filename).resolve()
        if p.parent == pkg:
            name = f"epl.{p.stem}"
    return name


def run(cfg):
    """Execute one resolved configuration; returns the exit code."""
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    log.info("command=%s seed=%d", cfg["command"], cfg["seed"])
    summary, rows = HANDLERS[cfg["command"]](cfg)
    summary.setdefault("command", cfg["command"])
    write_json(out / f"{cfg['command']}_summary.json", summary)
    write_csv(out / f"{cfg['command']}_series.csv", rows)
    return 0 if summary.get("pass", True) else 2


def main(argv=None):
    logging.basicConfig(level=logging.INFO, format="%(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = resolve_config(argv)
        return run(cfg)
    except SystemExit as exc:
        return int(exc.code or 0) and 1
    except EplError as exc:
        sys.stderr.write(f"epl: error in {_module_of(exc)}: {exc}\n")
        return 1
    except (ValueError, TypeError, OSError) as exc:
        sys.stderr.write(f"epl: error in {_module_of(exc)}: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
