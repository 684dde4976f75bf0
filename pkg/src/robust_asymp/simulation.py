"""Finite-size Monte-Carlo: direct ERM solvers, GAMP, and seed-averaged errors.

The ridge minimizer is solved in closed form through a symmetric
positive-definite system; l1 and Huber risks go through L-BFGS with an
analytic gradient (the l1 loss is run as Huber with a small scale, with the
regularisation mapped to scale * lam, which leaves the minimizer
unchanged).  GAMP iterates the message-passing fixed point for a generic
(channel, prior) pair; with the posterior channel and Gaussian prior it
produces the Bayes-optimal estimate.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg
import scipy.optimize

from .channel import dfout_star, fout_star, huber_value
from .exceptions import SolverError
from .model import Dataset, OutlierModel, empirical_errors, rng_for, sample_dataset
from .state_evolution import LossSpec

__all__ = [
    "GampConfig",
    "GampState",
    "McSummary",
    "erm_ridge",
    "erm_convex",
    "gamp",
    "bo_channel_pair",
    "bo_prior_pair",
    "run_monte_carlo",
]

# Scale used when an l1 request is rewritten as a narrow Huber (the
# regularisation is mapped to L1_PROXY_SCALE * lam, which preserves the
# minimizer).
L1_PROXY_SCALE = 1e-3


def erm_ridge(dataset: Dataset, lam: float) -> np.ndarray:
    """Closed-form ridge minimizer (Phi^T Phi / d + lam I)^{-1} Phi^T y / sqrt(d)."""
    n, d = dataset.n, dataset.d
    alpha = n / d
    # Convexity bound: negative lam only above -(1 - sqrt(alpha))^2, and
    # only when the sample covariance spectrum stays away from zero.
    bound = -((1.0 - np.sqrt(alpha)) ** 2) if alpha > 1.0 else 0.0
    if lam <= bound and lam != 0.0:
        raise ValueError(f"lam={lam} is at or below the convexity bound {bound} for alpha={alpha}")

    phi = dataset.samples
    gram = phi.T @ phi / d + lam * np.eye(d)
    rhs = phi.T @ dataset.labels / np.sqrt(d)
    try:
        return scipy.linalg.solve(gram, rhs, assume_a="pos")
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"ridge system singular at lam={lam}: {exc}") from exc


def _huber_risk_and_grad(w, phi, y, a, lam, sqrt_d):
    pred = phi @ w / sqrt_d
    r = y - pred
    value = np.sum(huber_value(r, a)) + 0.5 * lam * np.sum(w**2)
    grad = -phi.T @ np.clip(r, -a, a) / sqrt_d + lam * w
    return value, grad


def erm_convex(dataset: Dataset, loss: LossSpec, lam: float, max_iters: int = 10_000) -> np.ndarray:
    """Quasi-Newton minimizer of the regularised empirical risk.

    Converges when the gradient infinity-norm falls below 1e-8 or the
    relative objective change below 1e-12; convexity makes the minimizer
    global within tolerance.
    """
    if lam < 0.0:
        raise ValueError(f"lam must be nonnegative for the convex solver, got {lam}")
    if loss.kind == "l1":
        a, lam_eff = L1_PROXY_SCALE, L1_PROXY_SCALE * lam
    elif loss.kind == "huber":
        a, lam_eff = loss.scale_a, lam
    else:
        a, lam_eff = np.inf, lam  # quadratic branch everywhere

    phi, y, d = dataset.samples, dataset.labels, dataset.d
    sqrt_d = np.sqrt(d)
    if not np.isfinite(a):
        a = 1e30  # effectively the l2 loss
    w0 = rng_for(dataset.seed, "erm-init").standard_normal(d)

    res = scipy.optimize.minimize(
        _huber_risk_and_grad,
        w0,
        args=(phi, y, a, lam_eff, sqrt_d),
        jac=True,
        method="L-BFGS-B",
        options={"maxiter": max_iters, "gtol": 1e-8, "ftol": 1e-12},
    )
    grad_norm = np.max(np.abs(res.jac))
    # L-BFGS-B reports abnormal exits through status; accept any exit whose
    # gradient satisfies the stationarity target.
    if not res.success and grad_norm > 1e-6:
        raise SolverError(
            f"convex solver failed after {res.nit} iterations: {res.message} (|grad|_inf = {grad_norm:.3e})"
        )
    return res.x


@dataclass(frozen=True)
class GampConfig:
    damping: float = 0.7
    tolerance: float = 1e-8
    max_iters: int = 500


@dataclass(frozen=True)
class GampState:
    w_hat: np.ndarray
    c_vec: np.ndarray
    omega: np.ndarray
    V: np.ndarray
    fout_prev: np.ndarray
    iteration: int


def bo_channel_pair(model: OutlierModel):
    """(f_out, df_out) of the posterior channel, for Bayes-optimal GAMP runs."""

    def f(y, omega, V):
        return fout_star(y, omega, V, model)

    def df(y, omega, V):
        return dfout_star(y, omega, V, model)

    return f, df


def bo_prior_pair():
    """(f_w, df_w) of the standard-normal prior."""

    def f(gamma, lam_vec):
        return gamma / (lam_vec + 1.0)

    def df(gamma, lam_vec):
        return 1.0 / (lam_vec + 1.0)

    return f, df


def gamp(
    dataset: Dataset,
    channel: tuple[Callable, Callable],
    prior: tuple[Callable, Callable],
    config: GampConfig | None = None,
    return_state: bool = False,
):
    """Generalised approximate message passing on a sampled dataset.

    channel = (f_out(y, omega, V), df_out(y, omega, V)) and prior =
    (f_w(gamma, Lambda), df_w(gamma, Lambda)), all vectorized.  Damping is
    applied to the estimate and to the variance track; iteration stops when
    ||w_{t+1} - w_t||^2 / d falls below the tolerance.
    """
    cfg = config or GampConfig()
    f_out, df_out = channel
    f_w, df_w = prior

    x, y = dataset.samples, dataset.labels
    n, d = dataset.n, dataset.d
    sqrt_d = np.sqrt(d)
    x2 = x**2

    w_hat = np.zeros(d)
    c_vec = np.ones(d)
    fout_prev = np.zeros(n)
    v = None
    omega = np.zeros(n)
    history = 0

    for it in range(cfg.max_iters):
        v_new = x2 @ c_vec / d
        v = v_new if v is None else cfg.damping * v_new + (1.0 - cfg.damping) * v
        omega = x @ w_hat / sqrt_d - v * fout_prev

        fout = f_out(y, omega, v)
        dfout = df_out(y, omega, v)
        lam_vec = -(x2.T @ dfout) / d
        gamma = x.T @ fout / sqrt_d + lam_vec * w_hat

        w_new = f_w(gamma, lam_vec)
        c_vec = df_w(gamma, lam_vec)
        w_damped = cfg.damping * w_new + (1.0 - cfg.damping) * w_hat

        if not np.all(np.isfinite(w_damped)):
            raise SolverError(f"GAMP diverged to non-finite iterates after {it + 1} iterations")

        delta = np.sum((w_damped - w_hat) ** 2) / d
        w_hat = w_damped
        fout_prev = fout
        history = it + 1
        if delta < cfg.tolerance:
            break
    else:
        if cfg.max_iters > 0:
            raise SolverError(f"GAMP did not converge within {cfg.max_iters} iterations")

    if return_state:
        return w_hat, GampState(
            w_hat=w_hat, c_vec=c_vec, omega=omega, V=v if v is not None else np.ones(n), fout_prev=fout_prev, iteration=history
        )
    return w_hat


@dataclass(frozen=True)
class McSummary:
    mean: float
    std_error: float
    n_seeds: int


def _summary(values: list[float]) -> McSummary:
    arr = np.asarray(values)
    return McSummary(
        mean=float(np.mean(arr)),
        std_error=float(np.std(arr, ddof=1) / np.sqrt(len(arr))),
        n_seeds=len(arr),
    )


def _mc_one_seed(args):
    model, n, d, method, lam, seed, n_test, gamp_config = args
    train = sample_dataset(model, n, d, seed, stream="train")
    test = sample_dataset(model, n_test, d, seed, teacher=train.teacher, stream="test")
    try:
        if method == "bayes":
            w_hat = gamp(train, bo_channel_pair(model), bo_prior_pair(), config=gamp_config)
        elif isinstance(method, LossSpec):
            if lam is None:
                raise ValueError("lam is required for ERM methods")
            if method.kind == "l2":
                w_hat = erm_ridge(train, lam)
            else:
                w_hat = erm_convex(train, method, lam)
        else:
            raise ValueError(f"unknown method {method!r}")
    except SolverError as exc:
        return ("fail", str(exc))
    report = empirical_errors(test, w_hat, model)
    return ("ok", (report.estim_error, report.excess_gen_error))


def run_monte_carlo(
    model: OutlierModel,
    alpha: float,
    d: int,
    method: LossSpec | str,
    lam: float | None = None,
    n_seeds: int = 100,
    seed0: int = 0,
    n_test: int = 100_000,
    gamp_config: GampConfig | None = None,
    workers: int | None = None,
):
    """Seed-averaged finite-size errors of one solver at fixed hyperparameters.

    method is a LossSpec (solved by ridge / L-BFGS at regularisation lam)
    or the string "bayes" (GAMP with the posterior channel).  Each seed
    draws a fresh training set and a fresh test set sharing the teacher.
    Seeds run as independent tasks; results do not depend on the worker
    count because every stream is keyed by its own seed.  Returns
    (estim_summary, excess_gen_summary).
    """
    if n_seeds < 2:
        raise ValueError(f"need n_seeds >= 2 for a standard error, got {n_seeds}")
    n = int(round(alpha * d))
    tasks = [(model, n, d, method, lam, seed0 + k, n_test, gamp_config) for k in range(n_seeds)]

    if workers is None:
        workers = 1
    workers = max(1, min(workers, os.cpu_count() or 1))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_mc_one_seed, tasks, chunksize=max(1, n_seeds // (4 * workers))))
    else:
        results = [_mc_one_seed(t) for t in tasks]

    estim_vals = [v[0] for status, v in results if status == "ok"]
    excess_vals = [v[1] for status, v in results if status == "ok"]
    failures = [v for status, v in results if status == "fail"]
    if len(failures) > 0.1 * n_seeds or len(estim_vals) < 2:
        raise SolverError(
            f"too many failed seeds ({len(failures)}/{n_seeds}); first: {failures[0] if failures else ''}"
        )
    return _summary(estim_vals), _summary(excess_vals)
