"""Grid evaluation engine behind the CLI: theory sweeps, phase diagrams, MC runs.

Everything here is a pure function of a plain-dict config, so an emitted
CSV (whose first line carries the config as JSON) can be re-parsed and
re-evaluated to reproduce the theory columns bit for bit.
"""

from __future__ import annotations

import csv
import io
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import __version__
from .bayes_optimal import bo_errors, bo_fixed_point
from .exceptions import RobustAsympError
from .hyperopt import DIVERGED, optimize_hyperparams
from .model import OutlierModel, errors_from_overlaps
from .simulation import run_monte_carlo
from .state_evolution import LossSpec, ridge_explicit, solve_fixed_point

__all__ = [
    "SweepResult",
    "FIGURE_PRESETS",
    "sweep_config",
    "evaluate_sweep",
    "evaluate_phase_diagram",
    "evaluate_simulation",
    "evaluate_bo_rate",
    "write_csv",
    "read_csv",
    "worker_count",
]

THREADS_ENV = "ROBUST_ASYMP_THREADS"

AXES = ("alpha", "eps", "delta_out", "beta")

# Parameter sets of the four headline figures (the swept axis is left out).
FIGURE_PRESETS = {
    "fig1-left": {"axis": "alpha", "eps": 0.6, "beta": 0.0, "delta_in": 1.0, "delta_out": 0.5, "target": "gen"},
    "fig1-right": {"axis": "alpha", "eps": 0.3, "beta": 0.0, "delta_in": 1.0, "delta_out": 5.0, "target": "estim"},
    "fig2-left": {"axis": "eps", "alpha": 10.0, "beta": 0.0, "delta_in": 1.0, "delta_out": 5.0, "target": "gen"},
    "fig2-right": {"axis": "delta_out", "alpha": 10.0, "beta": 0.0, "delta_in": 1.0, "eps": 0.3, "target": "gen"},
}

DEFAULT_RANGES = {
    "alpha": (1.0, 1000.0, 13, "log"),
    "eps": (0.02, 0.98, 13, "lin"),
    "delta_out": (0.01, 100.0, 13, "log"),
    "beta": (0.0, 2.0, 11, "lin"),
}


@dataclass(frozen=True)
class SweepResult:
    axis_name: str
    rows: list[dict]
    config: dict


def worker_count() -> int:
    cap = os.environ.get(THREADS_ENV)
    workers = os.cpu_count() or 1
    if cap is not None:
        workers = min(workers, max(1, int(cap)))
    return workers


def grid_from_spec(spec) -> list[float]:
    lo, hi, num, scale = spec
    if num == 1:
        return [float(lo)]
    if scale == "log":
        return [float(v) for v in np.geomspace(lo, hi, int(num))]
    return [float(v) for v in np.linspace(lo, hi, int(num))]


def model_from_config(cfg: dict, **overrides) -> OutlierModel:
    vals = {k: cfg[k] for k in ("eps", "beta", "delta_in", "delta_out")}
    vals.update(overrides)
    return OutlierModel(**vals)


def parse_method(name: str):
    """Method token -> (label, kind, fixed_a or None)."""
    if name.startswith("huber_fixed_a"):
        a = float(name.split(":", 1)[1]) if ":" in name else 1.0
        return name, "huber", a
    if name in ("l2", "l1", "huber", "bayes"):
        return name, name, None
    raise ValueError(f"unknown method {name!r}")


def sweep_config(axis, methods, *, eps, beta, delta_in, delta_out, alpha, range_spec=None,
                 fixed_lambda=None, huber_a=1.0, target="gen", seed=0) -> dict:
    if axis not in AXES:
        raise ValueError(f"axis must be one of {AXES}, got {axis!r}")
    return {
        "command": "sweep",
        "axis": axis,
        "methods": list(methods),
        "eps": eps,
        "beta": beta,
        "delta_in": delta_in,
        "delta_out": delta_out,
        "alpha": alpha,
        "range": list(range_spec) if range_spec else list(DEFAULT_RANGES[axis]),
        "fixed_lambda": fixed_lambda,
        "huber_a": huber_a,
        "target": target,
        "seed": seed,
        "version": __version__,
    }


def _theory_method_at_point(cfg: dict, model: OutlierModel, alpha: float, method: str) -> dict:
    """Errors + tuned hyperparameters of one method at one grid point."""
    label, kind, fixed_a = parse_method(method)
    out: dict = {}
    target = cfg.get("target", "gen")
    if kind == "bayes":
        rep = bo_errors(bo_fixed_point(model, alpha), model)
        out.update(gen=rep.gen_error, excess=rep.excess_gen_error, estim=rep.estim_error,
                   lambda_opt="", a_opt="")
        return out

    fixed_lambda = cfg.get("fixed_lambda")
    a_for_spec = fixed_a if fixed_a is not None else cfg.get("huber_a", 1.0)
    loss = {"l2": LossSpec.l2(), "l1": LossSpec.l1(), "huber": LossSpec.huber(a_for_spec)}[kind]

    if fixed_lambda is not None:
        lam, a_opt = float(fixed_lambda), (a_for_spec if kind == "huber" else None)
    else:
        res = optimize_hyperparams(
            loss, model, alpha, target=target,
            vary_scale=(kind == "huber" and fixed_a is None),
        )
        lam, a_opt = res.lambda_opt, res.a_opt

    if kind == "l2" or a_opt == DIVERGED:
        state = ridge_explicit(model, alpha, lam)
    else:
        solve_loss = loss if kind != "huber" else LossSpec.huber(a_opt if a_opt else a_for_spec)
        state = solve_fixed_point(solve_loss, model, alpha, lam)
    rep = errors_from_overlaps(state.m, state.q, model)
    out.update(
        gen=rep.gen_error,
        excess=rep.excess_gen_error,
        estim=rep.estim_error,
        lambda_opt=lam,
        a_opt=(a_opt if a_opt is not None else ""),
    )
    return out


def _sweep_point(args):
    cfg, value = args
    axis = cfg["axis"]
    alpha = cfg["alpha"]
    overrides = {}
    if axis == "alpha":
        alpha = value
    else:
        overrides[axis] = value
    model = model_from_config(cfg, **overrides)

    row: dict = {axis: value}
    for method in cfg["methods"]:
        label = parse_method(method)[0]
        try:
            vals = _theory_method_at_point(cfg, model, alpha, method)
            status = ""
        except RobustAsympError as exc:
            vals = {k: "" for k in ("gen", "excess", "estim", "lambda_opt", "a_opt")}
            status = type(exc).__name__
        for key, v in vals.items():
            row[f"{label}_{key}"] = v
        row[f"{label}_status"] = status
    return row


def _map_points(fn, items, workers: int):
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def evaluate_sweep(cfg: dict, workers: int = 1) -> SweepResult:
    values = sorted(grid_from_spec(cfg["range"]))
    rows = _map_points(_sweep_point, [(cfg, v) for v in values], workers)
    statuses = [row[f"{parse_method(m)[0]}_status"] for row in rows for m in cfg["methods"]]
    if statuses and all(s != "" for s in statuses):
        raise RobustAsympError("every grid point failed")
    return SweepResult(axis_name=cfg["axis"], rows=rows, config=cfg)


# ---------------------------------------------------------------------------
# Phase diagram: E_gen(l2, opt) - E_gen(huber, opt) over (eps, delta_out).

def _phase_cell(args):
    cfg, eps, dout, alpha = args
    model = model_from_config(cfg, eps=eps, delta_out=dout)
    row = {"alpha": alpha, "eps": eps, "delta_out": dout}
    try:
        l2 = optimize_hyperparams(LossSpec.l2(), model, alpha, target="gen")
        hub = optimize_hyperparams(LossSpec.huber(1.0), model, alpha, target="gen")
        row["gen_diff"] = l2.objective_value - hub.objective_value
        row["huber_a_opt"] = hub.a_opt if hub.a_opt is not None else ""
        row["status"] = ""
    except RobustAsympError as exc:
        row["gen_diff"] = ""
        row["huber_a_opt"] = ""
        row["status"] = type(exc).__name__
    return row


def evaluate_phase_diagram(cfg: dict, workers: int = 1):
    eps_grid = grid_from_spec(cfg["eps_range"])
    dout_grid = grid_from_spec(cfg["dout_range"])
    cells = [(cfg, e, d, a) for a in cfg["alphas"] for e in eps_grid for d in dout_grid]
    rows = _map_points(_phase_cell, cells, workers)

    # Boundary per alpha: for each eps, the first delta_out with a nonzero gap.
    boundary = []
    thr = 1e-9
    for a in cfg["alphas"]:
        for e in eps_grid:
            line = [r for r in rows if r["alpha"] == a and r["eps"] == e and r["status"] == ""]
            line.sort(key=lambda r: r["delta_out"])
            for lo_row, hi_row in zip(line, line[1:]):
                if lo_row["gen_diff"] <= thr < hi_row["gen_diff"]:
                    boundary.append(
                        {"alpha": a, "eps": e,
                         "delta_out": 0.5 * (lo_row["delta_out"] + hi_row["delta_out"])}
                    )
                    break
    return rows, boundary


# ---------------------------------------------------------------------------
# Theory-vs-Monte-Carlo comparison at theory-optimal hyperparameters.

def evaluate_simulation(cfg: dict, workers: int = 1):
    model = model_from_config(cfg)
    rows = []
    for alpha in cfg["alphas"]:
        for method in cfg["methods"]:
            label, kind, fixed_a = parse_method(method)
            point = _theory_method_at_point(cfg, model, alpha, method)
            target = cfg.get("target", "gen")
            theory = point["estim"] if target == "estim" else point["excess"]
            if kind == "bayes":
                est, exc = run_monte_carlo(
                    model, alpha, cfg["dim"], "bayes",
                    n_seeds=cfg["seeds"], seed0=cfg["seed"], n_test=cfg["n_test"],
                    workers=workers,
                )
            else:
                a_opt = point["a_opt"]
                if a_opt == DIVERGED:
                    loss = LossSpec.huber(1e3)
                elif kind == "huber":
                    loss = LossSpec.huber(float(a_opt))
                else:
                    loss = LossSpec(kind)
                est, exc = run_monte_carlo(
                    model, alpha, cfg["dim"], loss, lam=float(point["lambda_opt"]),
                    n_seeds=cfg["seeds"], seed0=cfg["seed"], n_test=cfg["n_test"],
                    workers=workers,
                )
            mc = est if target == "estim" else exc
            z = (mc.mean - theory) / mc.std_error if mc.std_error > 0 else float("inf")
            rows.append(
                {
                    "alpha": alpha, "method": label, "metric": target,
                    "theory": theory, "mc_mean": mc.mean, "mc_se": mc.std_error, "z": z,
                    "lambda_opt": point["lambda_opt"], "a_opt": point["a_opt"],
                }
            )
    return rows


# ---------------------------------------------------------------------------
# Bayes-optimal rate: errors over an alpha grid plus the fitted 1/alpha law.

def evaluate_bo_rate(cfg: dict):
    from .bayes_optimal import bo_rate_coefficient

    model = model_from_config(cfg)
    c_hat = bo_rate_coefficient(model)
    alphas = grid_from_spec(cfg["range"])
    rows = []
    for a in alphas:
        bo = bo_fixed_point(model, a)
        rows.append({"alpha": a, "estim_bo": 1.0 - bo.q_b, "rate_prediction": 1.0 / (c_hat * a)})
    log_a = np.log([r["alpha"] for r in rows])
    log_e = np.log([r["estim_bo"] for r in rows])
    slope, intercept = np.polyfit(log_a, log_e, 1)
    fit = {"c_hat": c_hat, "slope": float(slope), "intercept": float(intercept),
           "prefactor": float(np.exp(intercept))}
    return rows, fit


# ---------------------------------------------------------------------------
# CSV with a JSON config header line.

def write_csv(path: str, config: dict, rows: list[dict]) -> None:
    fieldnames: list[str] = []
    for row in rows:
        for key in row:
            if key not in fieldnames:
                fieldnames.append(key)
    buf = io.StringIO()
    buf.write("# " + json.dumps(config, sort_keys=True) + "\n")
    writer = csv.DictWriter(buf, fieldnames=fieldnames)
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _fmt(row.get(k, "")) for k in fieldnames})
    with open(path, "w") as fh:
        fh.write(buf.getvalue())


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))  # round-trips exactly through the text form
    return v


def read_csv(path: str):
    with open(path) as fh:
        header = fh.readline()
        if not header.startswith("#"):
            raise ValueError(f"{path}: missing JSON config header line")
        config = json.loads(header[1:].strip())
        rows = list(csv.DictReader(fh))
    return config, rows
