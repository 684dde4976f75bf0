"""Figure rendering for CLI outputs (opt-in via --plot).

Renders the same curves the CSVs tabulate: error panels on top, tuned
hyperparameters below, mirroring the usual presentation of these sweeps.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["plot_sweep", "plot_phase_diagram", "plot_simulation", "plot_bo_rate"]

_METHOD_STYLE = {
    "l2": dict(color="tab:blue", label=r"$\ell_2$"),
    "l1": dict(color="tab:orange", label=r"$\ell_1$"),
    "huber": dict(color="tab:green", label="Huber"),
    "bayes": dict(color="black", linestyle="--", label="Bayes optimal"),
}

_LOG_AXES = {"alpha", "delta_out"}


def _style(method: str):
    base = method.split(":")[0]
    if base.startswith("huber_fixed_a"):
        return dict(color="tab:red", label=f"Huber (fixed a)")
    return dict(_METHOD_STYLE.get(base, dict(label=base)))


def _column(rows, name):
    vals = []
    for r in rows:
        v = r.get(name, "")
        vals.append(float(v) if v not in ("", None, "diverged") else np.nan)
    return np.asarray(vals)


def plot_sweep(config, rows, path):
    axis = config["axis"]
    metric = "estim" if config.get("target") == "estim" else "excess"
    x = _column(rows, axis)

    fig, (ax_err, ax_hyp) = plt.subplots(
        2, 1, figsize=(5.2, 5.6), sharex=True, gridspec_kw={"height_ratios": [2.2, 1.0]}
    )
    for method in config["methods"]:
        label = method  # CSV columns carry the full method token
        sty = _style(method)
        y = _column(rows, f"{label}_{metric}")
        ax_err.plot(x, y, marker="o", ms=3, **sty)
        if label != "bayes":
            lam = _column(rows, f"{label}_lambda_opt")
            ax_hyp.plot(x, lam, marker=".", **{**sty, "label": sty.get("label", label) + r"  $\lambda$"})
    if axis in _LOG_AXES:
        ax_err.set_xscale("log")
    ax_err.set_yscale("log")
    ax_err.set_ylabel("excess generalisation error" if metric == "excess" else "estimation error")
    ax_err.legend(fontsize=8)
    ax_hyp.set_xlabel(axis)
    ax_hyp.set_ylabel("tuned hyperparameters")
    ax_hyp.set_yscale("log")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_phase_diagram(config, rows, boundary, path):
    alphas = sorted({float(r["alpha"]) for r in rows})
    fig, axes = plt.subplots(1, len(alphas), figsize=(4.6 * len(alphas), 3.8), squeeze=False)
    for ax, a in zip(axes[0], alphas):
        sub = [r for r in rows if float(r["alpha"]) == a and r.get("status", "") == ""]
        eps = np.array(sorted({float(r["eps"]) for r in sub}))
        dout = np.array(sorted({float(r["delta_out"]) for r in sub}))
        grid = np.full((len(dout), len(eps)), np.nan)
        for r in sub:
            i = np.searchsorted(dout, float(r["delta_out"]))
            j = np.searchsorted(eps, float(r["eps"]))
            grid[i, j] = float(r["gen_diff"])
        pcm = ax.pcolormesh(eps, dout, grid, shading="nearest", cmap="viridis")
        fig.colorbar(pcm, ax=ax, label=r"$E_{gen}^{\ell_2} - E_{gen}^{Huber}$")
        bpts = [b for b in boundary if float(b["alpha"]) == a]
        if bpts:
            ax.plot([b["eps"] for b in bpts], [b["delta_out"] for b in bpts], "r.-", lw=1, label="boundary")
            ax.legend(fontsize=8)
        ax.set_yscale("log")
        ax.set_xlabel(r"$\epsilon$")
        ax.set_ylabel(r"$\Delta_{out}$")
        ax.set_title(f"alpha = {a:g}")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_simulation(config, rows, path):
    fig, ax = plt.subplots(figsize=(5.2, 3.9))
    methods = sorted({r["method"] for r in rows})
    for method in methods:
        sub = [r for r in rows if r["method"] == method]
        x = np.array([float(r["alpha"]) for r in sub])
        th = np.array([float(r["theory"]) for r in sub])
        mc = np.array([float(r["mc_mean"]) for r in sub])
        se = np.array([float(r["mc_se"]) for r in sub])
        sty = _style(method)
        ax.plot(x, th, **sty)
        ax.errorbar(x, mc, yerr=3 * se, fmt="o", ms=4, color=sty.get("color"), capsize=3)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("alpha")
    metric = rows[0]["metric"] if rows else "excess"
    ax.set_ylabel("estimation error" if metric == "estim" else "excess generalisation error")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_bo_rate(config, rows, fit, path):
    x = np.array([float(r["alpha"]) for r in rows])
    y = np.array([float(r["estim_bo"]) for r in rows])
    pred = np.array([float(r["rate_prediction"]) for r in rows])
    fig, ax = plt.subplots(figsize=(5.0, 3.8))
    ax.loglog(x, y, "o", label="Bayes-optimal estimation error")
    ax.loglog(x, pred, "-", label=rf"$1/(\hat c\, \alpha)$, slope fit {fit['slope']:.3f}")
    ax.set_xlabel("alpha")
    ax.set_ylabel("estimation error")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
