"""Panel-based Gauss-Legendre quadrature for the channel integrals.

All the 2-D integrals in this package have the same structure: an outer
expectation over a standard Gaussian xi restricted to [-8, 8] (tails below
1e-14) and an inner integral over the label y whose integrand is piecewise
smooth, with known breakpoints (the two mixture-component means and, for
l1/Huber, the proximal kinks).  The inner integral uses Gauss-Legendre
panels between breakpoints; panels and orders are refined until two
successive levels agree, which also yields the achieved error estimate.

Everything is evaluated on numpy tensor grids, so a full refinement level
costs a handful of vectorized passes.
"""

from __future__ import annotations

import numpy as np

from .channel import dfout_loss, fout_loss, fout_star, zout_star
from .exceptions import InvalidStateError, QuadratureError
from .model import OutlierModel

__all__ = [
    "hat_updates_by_quadrature",
    "bo_qhat_by_quadrature",
    "channel_fisher",
    "zout_normalization",
]

_XI_BREAKS = np.array([-8.0, -4.0, -1.5, 0.0, 1.5, 4.0, 8.0])
_TAIL_SIGMAS = 8.0

# (xi_order, y_order, y_panel_refine) per refinement level
_LEVELS = ((10, 10, 1), (16, 16, 2), (24, 24, 3), (32, 32, 5), (48, 48, 8))

_leggauss_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _leggauss(order: int):
    if order not in _leggauss_cache:
        _leggauss_cache[order] = np.polynomial.legendre.leggauss(order)
    return _leggauss_cache[order]


def _panelize(breaks: np.ndarray, order: int):
    """Nodes and weights of per-panel Gauss-Legendre rules.

    breaks: (..., B) ascending.  Returns nodes and weights of shape
    (..., B-1, order); zero-width panels contribute zero weight.
    """
    x, w = _leggauss(order)
    lo, hi = breaks[..., :-1], breaks[..., 1:]
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    return mid[..., None] + half[..., None] * x, half[..., None] * w


def _refine(breaks: np.ndarray, factor: int):
    if factor == 1:
        return breaks
    lo, hi = breaks[..., :-1, None], breaks[..., 1:, None]
    t = np.linspace(0.0, 1.0, factor + 1)[:-1]
    inner = (lo + (hi - lo) * t).reshape(*breaks.shape[:-1], -1)
    return np.concatenate([inner, breaks[..., -1:]], axis=-1)


def _xi_grid(order: int):
    xi, wxi = _panelize(_XI_BREAKS, order)
    xi, wxi = xi.ravel(), wxi.ravel()
    wxi = wxi * np.exp(-0.5 * xi**2) / np.sqrt(2.0 * np.pi)
    return xi, wxi


def _y_breaks(interior: list[np.ndarray], means: list[np.ndarray], sds: list[float]):
    """Sorted per-xi breakpoints covering every component's +-8 sigma range.

    Panels are pinned at each component's mean and +-1, +-3 sigma marks so
    that a narrow component embedded in a much wider one is still resolved.
    """
    los = [mu - _TAIL_SIGMAS * sd for mu, sd in zip(means, sds)]
    his = [mu + _TAIL_SIGMAS * sd for mu, sd in zip(means, sds)]
    lo = np.minimum.reduce(los)
    hi = np.maximum.reduce(his)
    marks = []
    for mu, sd in zip(means, sds):
        for k in (-3.0, -1.0, 0.0, 1.0, 3.0):
            marks.append(mu + k * sd)
    cols = [lo] + [np.clip(p, lo, hi) for p in marks + list(interior)] + [hi]
    return np.sort(np.stack(cols, axis=-1), axis=-1)


def _integrate(build, tol: float, what: str):
    """Run ``build(xi_order, y_order, refine) -> ndarray`` through the levels."""
    prev = None
    achieved = np.inf
    for level in _LEVELS:
        vals = build(*level)
        if prev is not None:
            achieved = float(np.max(np.abs(vals - prev) / np.maximum(1.0, np.abs(vals))))
            if achieved < tol:
                return vals, achieved
        prev = vals
    raise QuadratureError(
        f"{what}: quadrature did not converge (achieved {achieved:.3e}, requested {tol:.3e})",
        achieved=achieved,
    )


def hat_updates_by_quadrature(
    kind: str,
    m: float,
    q: float,
    sigma: float,
    model: OutlierModel,
    alpha: float,
    a: float | None = None,
    tol: float = 1e-9,
):
    """Conjugate-parameter updates evaluated directly from the general equations.

    Integrates Z* f* f_out, Z* f_out^2 and -Z* (d f_out / d omega) over
    (y, xi) without using any of the closed erf forms, so it serves as an
    independent oracle for them.  Returns (m_hat, q_hat, sigma_hat, err).
    """
    if q <= 0.0 or sigma <= 0.0:
        raise InvalidStateError(f"need q > 0 and sigma > 0, got q={q}, sigma={sigma}")
    v_star = 1.0 - m * m / q
    if v_star < -1e-12:
        raise InvalidStateError(f"m^2/q = {m*m/q} exceeds 1; teacher field variance negative")
    v_star = max(v_star, 0.0)
    beta = model.beta
    s_in = np.sqrt(v_star + model.delta_in)
    s_out = np.sqrt(beta**2 * v_star + model.delta_out)
    if kind == "l1":
        kink = sigma
    elif kind == "huber":
        kink = a * (1.0 + sigma)
    else:
        kink = None

    def build(xi_order, y_order, refine):
        xi, wxi = _xi_grid(xi_order)
        omega_star = (m / np.sqrt(q)) * xi
        omega = np.sqrt(q) * xi
        interior = [] if kink is None else [omega - kink, omega + kink]
        breaks = _y_breaks(interior, [omega_star, beta * omega_star], [s_in, s_out])
        y, wy = _panelize(_refine(breaks, refine), y_order)

        os_ = omega_star[:, None, None]
        o_ = omega[:, None, None]
        z = zout_star(y, os_, v_star, model)
        fs = fout_star(y, os_, v_star, model)
        fo = fout_loss(kind, y, o_, sigma, a)
        dfo = dfout_loss(kind, y, o_, sigma, a)

        w = wxi[:, None, None] * wy
        return alpha * np.array(
            [
                np.sum(w * z * fs * fo),
                np.sum(w * z * fo**2),
                -np.sum(w * z * dfo),
            ]
        )

    vals, err = _integrate(build, tol, f"hat updates ({kind})")
    return float(vals[0]), float(vals[1]), float(vals[2]), err


def bo_qhat_by_quadrature(q_b: float, model: OutlierModel, alpha: float, tol: float = 1e-10) -> float:
    """Conjugate overlap integral of the Bayes-optimal fixed point at q_b."""
    if not 0.0 <= q_b < 1.0:
        raise InvalidStateError(f"q_b must lie in [0, 1), got {q_b}")
    v = 1.0 - q_b
    beta = model.beta
    s_in = np.sqrt(v + model.delta_in)
    s_out = np.sqrt(beta**2 * v + model.delta_out)

    def build(xi_order, y_order, refine):
        xi, wxi = _xi_grid(xi_order)
        omega = np.sqrt(q_b) * xi
        breaks = _y_breaks([], [omega, beta * omega], [s_in, s_out])
        y, wy = _panelize(_refine(breaks, refine), y_order)
        o_ = omega[:, None, None]
        g = zout_star(y, o_, v, model) * fout_star(y, o_, v, model) ** 2
        return np.array([alpha * np.sum(wxi[:, None, None] * wy * g)])

    vals, _ = _integrate(build, tol, "BO conjugate overlap")
    return float(vals[0])


def channel_fisher(model: OutlierModel, tol: float = 1e-10) -> float:
    """Fisher information of the noise channel at zero latent uncertainty.

    This is the coefficient c_hat governing the large-sample rate of the
    Bayes-optimal estimation error, E_estim ~ 1 / (c_hat * alpha).
    """
    beta = model.beta
    s_in = np.sqrt(model.delta_in)
    s_out = np.sqrt(model.delta_out)

    def build(xi_order, y_order, refine):
        xi, wxi = _xi_grid(xi_order)
        breaks = _y_breaks([], [xi, beta * xi], [s_in, s_out])
        y, wy = _panelize(_refine(breaks, refine), y_order)
        o_ = xi[:, None, None]
        g = zout_star(y, o_, 0.0, model) * fout_star(y, o_, 0.0, model) ** 2
        return np.array([np.sum(wxi[:, None, None] * wy * g)])

    vals, _ = _integrate(build, tol, "channel Fisher information")
    return float(vals[0])


def zout_normalization(omega: float, V: float, model: OutlierModel) -> float:
    """Integral of the mixture likelihood over y (should be 1)."""
    beta = model.beta
    s_in = np.sqrt(V + model.delta_in)
    s_out = np.sqrt(beta**2 * V + model.delta_out)
    means = [np.array([omega]), np.array([beta * omega])]
    breaks = _y_breaks([], means, [s_in, s_out])
    y, wy = _panelize(_refine(breaks, 4), 48)
    return float(np.sum(wy * zout_star(y, omega, V, model)))
