"""Self-consistent equations for ridge-regularised ERM under the outlier channel.

Six coupled scalar equations determine the asymptotic overlaps of the risk
minimizer.  Three are loss-independent,

    m = m_hat / (lam + sigma_hat)
    q = (m_hat^2 + q_hat) / (lam + sigma_hat)^2
    sigma = 1 / (lam + sigma_hat)

and three depend on the loss through the constants

    zeta_in  = delta_in - 2 m + q + 1
    zeta_out = delta_out + beta^2 + q - 2 beta m

    l2:     closed Gaussian forms (no erf)
    l1:     mu = nu = sigma,      chi = sigma / sqrt(2 zeta)
    huber:  nu = sigma + 1, mu = a nu,  chi = mu / sqrt(2 zeta)

with the erf-family updates

    m_hat     = alpha/nu   [ (1-eps) erf(chi_in) + beta eps erf(chi_out) ]
    sigma_hat = alpha/nu   [ (1-eps) erf(chi_in) + eps erf(chi_out) ]
    q_hat     = alpha/nu^2 [ (1-eps) zeta_in erf(chi_in) + eps zeta_out erf(chi_out)
                             + mu^2 ((1-eps) erfc(chi_in) + eps erfc(chi_out))
                             - mu sqrt(2/pi) ((1-eps) sqrt(zeta_in) e^{-chi_in^2}
                                              + eps sqrt(zeta_out) e^{-chi_out^2}) ]

The q_hat expression groups the mu^2 terms through erfc instead of
(zeta - mu^2) erf so that the huge-scale Huber limit (a -> inf, where it
must reduce exactly to l2) does not suffer catastrophic cancellation.

The ridge (l2) fixed point also has a closed form; see ridge_explicit.
A quadrature oracle for the hat updates, built directly on the channel
definition, lives in quadrature_hat_updates.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.special import erf, erfc

from .exceptions import ConvergenceError, InvalidStateError
from .model import OutlierModel, OverlapState
from .quadrature import hat_updates_by_quadrature

__all__ = [
    "LossSpec",
    "FixedPointConfig",
    "ChannelConstants",
    "channel_constants",
    "update_nonhats",
    "update_hats_l2",
    "update_hats_l1",
    "update_hats_huber",
    "update_hats",
    "solve_fixed_point",
    "ridge_explicit",
    "quadrature_hat_updates",
    "DEFAULT_INIT",
]

_SQRT_2_OVER_PI = np.sqrt(2.0 / np.pi)

_KINDS = ("l2", "l1", "huber")


@dataclass(frozen=True)
class LossSpec:
    """One of the three analysed losses; scale_a applies to Huber only."""

    kind: str
    scale_a: float | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"kind must be one of {_KINDS}, got {self.kind!r}")
        if self.kind == "huber":
            if self.scale_a is None or self.scale_a <= 0.0:
                raise ValueError(f"Huber loss needs scale_a > 0, got {self.scale_a}")

    @classmethod
    def l2(cls):
        return cls("l2")

    @classmethod
    def l1(cls):
        return cls("l1")

    @classmethod
    def huber(cls, a: float):
        return cls("huber", a)


# Default initialisation: mildly informative, deterministic.
DEFAULT_INIT = (0.1, 0.5, 1.0)


@dataclass(frozen=True)
class FixedPointConfig:
    damping: float = 0.8
    tolerance: float = 1e-9
    max_iters: int = 10_000
    init: OverlapState | None = None

    def __post_init__(self):
        if not 0.0 < self.damping <= 1.0:
            raise ValueError(f"damping must be in (0, 1], got {self.damping}")
        if self.tolerance <= 0.0:
            raise ValueError(f"tolerance must be positive, got {self.tolerance}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be positive, got {self.max_iters}")


@dataclass(frozen=True)
class ChannelConstants:
    zeta_in: float
    zeta_out: float
    chi_in: float
    chi_out: float
    mu_c: float
    nu_c: float


def _zetas(m: float, q: float, model: OutlierModel):
    zeta_in = model.delta_in - 2.0 * m + q + 1.0
    zeta_out = model.delta_out + model.beta**2 + q - 2.0 * model.beta * m
    if zeta_in <= 0.0 or zeta_out <= 0.0:
        raise InvalidStateError(
            f"residual variances must stay positive: zeta_in={zeta_in}, zeta_out={zeta_out}"
        )
    return zeta_in, zeta_out


def channel_constants(loss: LossSpec, m: float, q: float, sigma: float, model: OutlierModel) -> ChannelConstants:
    zeta_in, zeta_out = _zetas(m, q, model)
    if loss.kind == "l1":
        mu = nu = sigma
    elif loss.kind == "huber":
        nu = sigma + 1.0
        mu = loss.scale_a * nu
    else:
        raise ValueError("channel constants are defined for the l1 and Huber losses")
    return ChannelConstants(
        zeta_in=zeta_in,
        zeta_out=zeta_out,
        chi_in=mu / np.sqrt(2.0 * zeta_in),
        chi_out=mu / np.sqrt(2.0 * zeta_out),
        mu_c=mu,
        nu_c=nu,
    )


def update_nonhats(m_hat: float, q_hat: float, sigma_hat: float, lam: float):
    """Loss-independent half of the fixed point; requires lam + sigma_hat > 0."""
    denom = lam + sigma_hat
    if denom <= 0.0:
        raise ConvergenceError(
            f"regularised denominator lam + sigma_hat = {denom} is not positive; solve diverges",
            residual=denom,
        )
    m = m_hat / denom
    q = (m_hat**2 + q_hat) / denom**2
    sigma = 1.0 / denom
    return m, q, sigma


def update_hats_l2(m: float, q: float, sigma: float, model: OutlierModel, alpha: float):
    if sigma <= 0.0:
        raise InvalidStateError(f"sigma must be positive, got {sigma}")
    one = 1.0 + sigma
    m_hat = alpha * model.gamma / one
    sigma_hat = alpha / one
    q_hat = alpha * (model.lambda_cap + q - 2.0 * m * model.gamma) / one**2
    return m_hat, q_hat, sigma_hat


def _update_hats_erf(cc: ChannelConstants, model: OutlierModel, alpha: float):
    eps, beta = model.eps, model.beta
    e_in, e_out = erf(cc.chi_in), erf(cc.chi_out)
    m_hat = alpha / cc.nu_c * ((1.0 - eps) * e_in + beta * eps * e_out)
    sigma_hat = alpha / cc.nu_c * ((1.0 - eps) * e_in + eps * e_out)
    q_hat = (
        alpha
        / cc.nu_c**2
        * (
            (1.0 - eps) * cc.zeta_in * e_in
            + eps * cc.zeta_out * e_out
            + cc.mu_c**2 * ((1.0 - eps) * erfc(cc.chi_in) + eps * erfc(cc.chi_out))
            - cc.mu_c
            * _SQRT_2_OVER_PI
            * (
                (1.0 - eps) * np.sqrt(cc.zeta_in) * np.exp(-cc.chi_in**2)
                + eps * np.sqrt(cc.zeta_out) * np.exp(-cc.chi_out**2)
            )
        )
    )
    return m_hat, q_hat, sigma_hat


def update_hats_l1(m: float, q: float, sigma: float, model: OutlierModel, alpha: float):
    if sigma <= 0.0:
        raise InvalidStateError(f"sigma must be positive, got {sigma}")
    return _update_hats_erf(channel_constants(LossSpec.l1(), m, q, sigma, model), model, alpha)


def update_hats_huber(m: float, q: float, sigma: float, model: OutlierModel, alpha: float, a: float):
    if sigma <= 0.0:
        raise InvalidStateError(f"sigma must be positive, got {sigma}")
    if a <= 0.0:
        raise ValueError(f"Huber scale must be positive, got {a}")
    return _update_hats_erf(channel_constants(LossSpec.huber(a), m, q, sigma, model), model, alpha)


def update_hats(loss: LossSpec, m: float, q: float, sigma: float, model: OutlierModel, alpha: float):
    if loss.kind == "l2":
        return update_hats_l2(m, q, sigma, model, alpha)
    if loss.kind == "l1":
        return update_hats_l1(m, q, sigma, model, alpha)
    return update_hats_huber(m, q, sigma, model, alpha, loss.scale_a)


def _check_lambda(loss: LossSpec, alpha: float, lam: float):
    if lam >= 0.0:
        return
    if loss.kind != "l2":
        raise ValueError(f"negative regularisation is only admissible for the l2 loss (lam={lam})")
    bound = -((1.0 - np.sqrt(alpha)) ** 2) if alpha > 1.0 else 0.0
    if lam <= bound:
        raise ValueError(f"lam={lam} is below the convexity bound {bound} at alpha={alpha}")


def _feasible(m: float, q: float, sigma: float, model: OutlierModel) -> bool:
    if q < 0.0 or sigma <= 0.0:
        return False
    zeta_in = model.delta_in - 2.0 * m + q + 1.0
    zeta_out = model.delta_out + model.beta**2 + q - 2.0 * model.beta * m
    return zeta_in > 0.0 and zeta_out > 0.0


def solve_fixed_point(
    loss: LossSpec,
    model: OutlierModel,
    alpha: float,
    lam: float,
    config: FixedPointConfig | None = None,
) -> OverlapState:
    """Damped fixed-point iteration of the six self-consistent equations.

    Deterministic given the config.  Raises ConvergenceError with the last
    iterate and residual if the iteration budget is exhausted, and
    InvalidStateError if the iterates leave the feasible region and
    backtracking cannot recover.
    """
    if alpha <= 0.0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    _check_lambda(loss, alpha, lam)
    cfg = config or FixedPointConfig()

    if cfg.init is not None:
        m, q, sigma = cfg.init.m, cfg.init.q, cfg.init.sigma
    else:
        m, q, sigma = DEFAULT_INIT
    mu = cfg.damping

    residual = np.inf
    for _ in range(cfg.max_iters):
        m_hat, q_hat, sigma_hat = update_hats(loss, m, q, sigma, model, alpha)
        m_new, q_new, sigma_new = update_nonhats(m_hat, q_hat, sigma_hat, lam)

        cand = (
            mu * m_new + (1.0 - mu) * m,
            mu * q_new + (1.0 - mu) * q,
            mu * sigma_new + (1.0 - mu) * sigma,
        )
        # Keep iterates feasible: halve the step toward the previous point.
        for _try in range(30):
            if _feasible(*cand, model):
                break
            cand = tuple(0.5 * (c + p) for c, p in zip(cand, (m, q, sigma)))
        else:
            raise InvalidStateError(
                f"iterate left the feasible region and 30 halvings did not recover "
                f"(m={cand[0]}, q={cand[1]}, sigma={cand[2]})"
            )

        residual = max(abs(cand[0] - m), abs(cand[1] - q), abs(cand[2] - sigma))
        m, q, sigma = cand
        if residual < cfg.tolerance:
            m_hat, q_hat, sigma_hat = update_hats(loss, m, q, sigma, model, alpha)
            return OverlapState(m=m, q=q, sigma=sigma, m_hat=m_hat, q_hat=q_hat, sigma_hat=sigma_hat)

    raise ConvergenceError(
        f"fixed point not converged after {cfg.max_iters} iterations (residual {residual:.3e})",
        last_iterate=(m, q, sigma),
        residual=residual,
    )


def ridge_explicit(model: OutlierModel, alpha: float, lam: float) -> OverlapState:
    """Closed-form l2 fixed point for any beta.

    Uses the algebraically equivalent form sigma_hat = 2 alpha lam / (t + 1
    + lam - alpha) when alpha + lam < 1 to avoid cancellation, and the exact
    lam -> 0 limit for alpha > 1.  For alpha <= 1 the ridgeless solution has
    diverging sigma, which is reported as a ConvergenceError.
    """
    if alpha <= 0.0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    _check_lambda(LossSpec.l2(), alpha, lam)

    gam, lcap = model.gamma, model.lambda_cap
    p = alpha + lam
    c = alpha - lam
    t = np.sqrt((p - 1.0) ** 2 + 4.0 * lam)

    if p >= 1.0:
        sigma_hat = 0.5 * (alpha - lam - 1.0 + t)
    else:
        sigma_hat = 2.0 * alpha * lam / (t + 1.0 + lam - alpha)
    denom = lam + sigma_hat
    if denom <= 0.0:
        raise ConvergenceError(
            f"ridgeless solution diverges for alpha={alpha} <= 1 at lam={lam}",
            residual=denom,
        )

    m = 2.0 * alpha * gam / (p + t + 1.0)
    q = (
        4.0
        * alpha
        * (alpha * gam**2 * (p + t - 3.0) + lcap * (p + t + 1.0))
        / ((p + t + 1.0) * (p**2 - 2.0 * c + t**2 + 2.0 * t * (p + 1.0) + 1.0))
    )
    sigma = 1.0 / denom
    m_hat = m * denom
    q_hat = q * denom**2 - m_hat**2
    return OverlapState(m=m, q=q, sigma=sigma, m_hat=m_hat, q_hat=q_hat, sigma_hat=sigma_hat)


def quadrature_hat_updates(
    loss: LossSpec,
    m: float,
    q: float,
    sigma: float,
    model: OutlierModel,
    alpha: float,
    tol: float = 1e-9,
):
    """Hat updates by adaptive 2-D quadrature of the general-form equations.

    Independent oracle for update_hats_l2 / l1 / huber: it never touches the
    erf closed forms, only the channel definition and the loss score.
    """
    m_hat, q_hat, sigma_hat, _err = hat_updates_by_quadrature(
        loss.kind, m, q, sigma, model, alpha, a=loss.scale_a, tol=tol
    )
    return m_hat, q_hat, sigma_hat


def warm_config(config: FixedPointConfig, state: OverlapState | None) -> FixedPointConfig:
    """Config with the initial point replaced by a previously converged state."""
    if state is None:
        return config
    return replace(config, init=state)
