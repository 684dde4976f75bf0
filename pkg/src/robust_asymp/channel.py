"""The two-component Gaussian output channel and its score functions.

For a latent field z ~ N(omega, V), convolving the label process gives

    Z(y | omega, V) = (1 - eps) N(y; omega, V + delta_in)
                      + eps     N(y; beta omega, beta^2 V + delta_out)

and the posterior score f = d/d_omega log Z.  The second component's
variance follows from y = beta z + noise, so the latent variance enters as
beta^2 V.  Everything is evaluated through per-component log-densities and
softmax responsibilities so that extreme variance ratios (e.g. huge
delta_out) underflow gracefully.

Loss-side quantities are the proximal-based scores for the l2, l1 and
Huber losses.  All functions broadcast over numpy arrays.
"""

from __future__ import annotations

import numpy as np

from .model import OutlierModel

__all__ = [
    "log_gauss",
    "mixture_log_weights",
    "zout_star",
    "fout_star",
    "dfout_star",
    "fout_loss",
    "dfout_loss",
    "huber_value",
]

_LOG2PI = np.log(2.0 * np.pi)


def log_gauss(y, mean, var):
    return -0.5 * ((y - mean) ** 2 / var + np.log(var) + _LOG2PI)


def mixture_log_weights(y, omega, V, model: OutlierModel):
    """Per-component log weights log((1-eps) N_in) and log(eps N_out)."""
    v_in = V + model.delta_in
    v_out = model.beta**2 * V + model.delta_out
    shape = np.broadcast(y, omega, V).shape
    if model.eps < 1.0:
        log_in = np.log1p(-model.eps) + log_gauss(y, omega, v_in)
    else:
        log_in = np.full(shape, -np.inf)
    if model.eps > 0.0:
        log_out = np.log(model.eps) + log_gauss(y, model.beta * omega, v_out)
    else:
        log_out = np.full(shape, -np.inf)
    return log_in, log_out


def zout_star(y, omega, V, model: OutlierModel):
    """Mixture likelihood of a label y given latent mean omega and variance V."""
    log_in, log_out = mixture_log_weights(y, omega, V, model)
    return np.exp(np.logaddexp(log_in, log_out))


def _responsibilities(y, omega, V, model):
    log_in, log_out = mixture_log_weights(y, omega, V, model)
    log_z = np.logaddexp(log_in, log_out)
    return np.exp(log_in - log_z), np.exp(log_out - log_z)


def fout_star(y, omega, V, model: OutlierModel):
    """Channel score d/d_omega log Z(y | omega, V)."""
    w_in, w_out = _responsibilities(y, omega, V, model)
    v_in = V + model.delta_in
    v_out = model.beta**2 * V + model.delta_out
    s_in = (y - omega) / v_in
    s_out = model.beta * (y - model.beta * omega) / v_out
    return w_in * s_in + w_out * s_out


def dfout_star(y, omega, V, model: OutlierModel):
    """Derivative of the channel score with respect to omega."""
    w_in, w_out = _responsibilities(y, omega, V, model)
    v_in = V + model.delta_in
    v_out = model.beta**2 * V + model.delta_out
    s_in = (y - omega) / v_in
    s_out = model.beta * (y - model.beta * omega) / v_out
    f = w_in * s_in + w_out * s_out
    return w_in * (s_in**2 - 1.0 / v_in) + w_out * (s_out**2 - model.beta**2 / v_out) - f**2


# ---------------------------------------------------------------------------
# Loss scores f_out = (prox - omega) / V for the three losses.

def fout_loss(kind: str, y, omega, V, a: float | None = None):
    r = y - omega
    if kind == "l2":
        return r / (1.0 + V)
    if kind == "l1":
        return np.clip(r / V, -1.0, 1.0)
    if kind == "huber":
        return np.clip(r / (1.0 + V), -a, a)
    raise ValueError(f"unknown loss kind {kind!r}")


def dfout_loss(kind: str, y, omega, V, a: float | None = None):
    r = y - omega
    if kind == "l2":
        return -1.0 / (1.0 + V) * np.ones_like(r)
    if kind == "l1":
        return np.where(np.abs(r) < V, -1.0 / V, 0.0)
    if kind == "huber":
        return np.where(np.abs(r) < a * (1.0 + V), -1.0 / (1.0 + V), 0.0)
    raise ValueError(f"unknown loss kind {kind!r}")


def huber_value(r, a: float):
    """Pointwise Huber loss: quadratic inside |r| < a, linear outside."""
    ar = np.abs(r)
    return np.where(ar < a, 0.5 * r**2, a * ar - 0.5 * a**2)
