"""Closed-form large-sample and small-outlier-fraction expansions.

Large alpha, l2: the explicit ridge solution expands in 1/alpha with
coefficients that are polynomial in (gamma, lambda_cap, lam); the excess
generalisation error decays as 1/alpha while the estimation error plateaus
at (beta - 1)^2 eps^2.

Large alpha, l1 / Huber: with the scaling sigma ~ sigma0/alpha, hats ~
alpha * hat0, and lam = lam0 + lam1 * alpha, the six equations collapse to
a single scalar equation for the limiting overlap m0 (and q0 = m0^2):

    m0 = m_hat0(m0) / (lam1 + sigma_hat0(m0))

    zeta_in0  = delta_in  + (m0 - 1)^2
    zeta_out0 = delta_out + (m0 - beta)^2

    l1:    m_hat0     = sqrt(2/pi) [ (1-eps)/sqrt(zeta_in0) + beta eps/sqrt(zeta_out0) ]
           sigma_hat0 = sqrt(2/pi) [ (1-eps)/sqrt(zeta_in0) + eps/sqrt(zeta_out0) ]
    huber: m_hat0     = (1-eps) erf(a/sqrt(2 zeta_in0)) + beta eps erf(a/sqrt(2 zeta_out0))
           sigma_hat0 = (1-eps) erf(a/sqrt(2 zeta_in0)) + eps erf(a/sqrt(2 zeta_out0))

The plateaus are (m0 - gamma)^2 for the excess generalisation error and
(m0 - 1)^2 for the estimation error.  Solvability of m0 = gamma under
lam1 >= 0 gives the consistency dichotomy implemented in
gen_consistency_condition; the lam1 that enforces each target is in
optimal_lambda1_gen / optimal_lambda1_estim.

Small eps, l2: the optimal regularisation expands as delta_in + lam1 eps,
and the optimally-regularised error as E0 + E1 eps where E0 is the eps = 0
Bayes-optimal value.  Note the printed E1 tracks the generalisation error
with the noise floor held at delta_in; the slope of the excess error is
E1 - (1 - beta)^2 exactly (the remaining floor terms are linear in eps).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import erf

from .exceptions import RobustAsympError
from .model import OutlierModel
from .state_evolution import LossSpec

__all__ = [
    "ExpansionCoefficients",
    "LeadingOrderState",
    "large_alpha_l2",
    "large_alpha_leading",
    "gen_consistency_condition",
    "optimal_lambda1_gen",
    "optimal_lambda1_estim",
    "ridge_negative_lambda_bound",
    "estim_consistency_negative_reg",
    "small_eps_expansion",
]

_SQRT_2_OVER_PI = np.sqrt(2.0 / np.pi)


@dataclass(frozen=True)
class ExpansionCoefficients:
    """Series coefficients c0 + c1 x + c2 x^2 in the expansion parameter x."""

    order0: float
    order1: float
    order2: float

    def eval(self, x: float) -> float:
        return self.order0 + self.order1 * x + self.order2 * x**2


@dataclass(frozen=True)
class LeadingOrderState:
    m0: float
    q0: float
    sigma0: float
    m_hat0: float
    q_hat0: float
    sigma_hat0: float
    lambda1: float

    def excess_gen_plateau(self, model: OutlierModel) -> float:
        return (self.m0 - model.gamma) ** 2

    def estim_plateau(self) -> float:
        return (self.m0 - 1.0) ** 2


def large_alpha_l2(model: OutlierModel, lam: float):
    """1/alpha series of the l2 errors at fixed regularisation.

    Returns (gen_series, estim_series) in powers of 1/alpha.  The gen
    series is the excess generalisation error (it vanishes at infinite
    sample complexity); the estimation error plateaus at its order0 value.
    """
    eps, beta = model.eps, model.beta
    deff = model.delta_eff

    gen1 = deff - (beta - 1.0) ** 2 * (eps - 1.0) * eps
    gen2 = (
        2.0 * (beta - 1.0) ** 2 * lam * (eps - 1.0) * eps
        + ((beta - 1.0) * lam * eps + lam) ** 2
        - (beta - 1.0) ** 2 * (eps - 1.0) * eps
        - 2.0 * deff * lam
        + deff
    )
    gen = ExpansionCoefficients(0.0, gen1, gen2)

    estim0 = (beta - 1.0) ** 2 * eps**2
    estim1 = (beta - 1.0) * eps * ((2.0 * lam + 1.0) * (eps - 1.0) - beta * (2.0 * lam * eps + eps - 1.0)) + deff
    estim2 = (
        lam * ((beta - 1.0) * eps * (lam * (3.0 * (beta - 1.0) * eps + 4.0) - 2.0 * beta) + lam)
        - (beta - 1.0) ** 2 * (eps - 1.0) * eps
        - 2.0 * deff * lam
        + deff
    )
    estim = ExpansionCoefficients(estim0, estim1, estim2)
    return gen, estim


def _leading_hats(loss: LossSpec, m0: float, model: OutlierModel):
    eps, beta = model.eps, model.beta
    zeta_in0 = model.delta_in + (m0 - 1.0) ** 2
    zeta_out0 = model.delta_out + (m0 - beta) ** 2
    if loss.kind == "l1":
        m_hat0 = _SQRT_2_OVER_PI * ((1.0 - eps) / np.sqrt(zeta_in0) + beta * eps / np.sqrt(zeta_out0))
        sigma_hat0 = _SQRT_2_OVER_PI * ((1.0 - eps) / np.sqrt(zeta_in0) + eps / np.sqrt(zeta_out0))
        q_hat0 = 1.0
    elif loss.kind == "huber":
        a = loss.scale_a
        e_in = erf(a / np.sqrt(2.0 * zeta_in0))
        e_out = erf(a / np.sqrt(2.0 * zeta_out0))
        m_hat0 = (1.0 - eps) * e_in + beta * eps * e_out
        sigma_hat0 = (1.0 - eps) * e_in + eps * e_out
        # Exact leading order of q_hat: the erf terms plus the Gaussian-tail
        # and saturation pieces, which stay O(1) for finite scale.
        q_hat0 = (
            (1.0 - eps) * (zeta_in0 - a**2) * e_in
            + eps * (zeta_out0 - a**2) * e_out
            - a
            * _SQRT_2_OVER_PI
            * (
                (1.0 - eps) * np.sqrt(zeta_in0) * np.exp(-(a**2) / (2.0 * zeta_in0))
                + eps * np.sqrt(zeta_out0) * np.exp(-(a**2) / (2.0 * zeta_out0))
            )
            + a**2
        )
    else:
        raise ValueError("leading-order reduction applies to the l1 and Huber losses")
    return m_hat0, q_hat0, sigma_hat0


def large_alpha_leading(
    loss: LossSpec,
    model: OutlierModel,
    lambda1: float,
    allow_negative: bool = False,
) -> LeadingOrderState:
    """Solve the reduced infinite-alpha system for the limiting overlap m0.

    lambda1 is the coefficient of the alpha-linear part of the
    regularisation.  Bracketed root finding on m0 in (0, max(1, beta) + 5);
    raises if the bracket holds no root or more than one.
    """
    if loss.kind == "l2":
        raise ValueError("the l2 loss has an explicit solution; use large_alpha_l2")
    if lambda1 < 0.0 and not allow_negative:
        raise ValueError(f"lambda1 = {lambda1} < 0 requires allow_negative=True")

    def resid(m0):
        m_hat0, _, sigma_hat0 = _leading_hats(loss, m0, model)
        return m_hat0 / (lambda1 + sigma_hat0) - m0

    lo, hi = 1e-12, max(1.0, model.beta) + 5.0
    grid = np.linspace(lo, hi, 64)
    vals = np.array([resid(g) for g in grid])
    crossings = np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]
    if len(crossings) == 0:
        raise RobustAsympError(f"no root of the leading-order equation in ({lo}, {hi})")
    if len(crossings) > 1:
        raise RobustAsympError(
            f"multiple roots of the leading-order equation in ({lo}, {hi}): bracket indices {crossings}"
        )
    i = crossings[0]
    m0 = brentq(resid, grid[i], grid[i + 1], xtol=1e-12, rtol=8.9e-16)

    m_hat0, q_hat0, sigma_hat0 = _leading_hats(loss, m0, model)
    return LeadingOrderState(
        m0=m0,
        q0=m0**2,
        sigma0=1.0 / (lambda1 + sigma_hat0),
        m_hat0=m_hat0,
        q_hat0=q_hat0,
        sigma_hat0=sigma_hat0,
        lambda1=lambda1,
    )


def gen_consistency_condition(model: OutlierModel) -> bool:
    """Whether optimally-regularised l1 / fixed-scale Huber reach the optimal error.

    True iff delta_out - delta_in >= (1-beta)^2 (2 eps - 1) for beta < 1,
    with the inequality reversed for beta > 1; beta = 1 is consistent by
    continuity.
    """
    gap = model.delta_out - model.delta_in
    threshold = (1.0 - model.beta) ** 2 * (2.0 * model.eps - 1.0)
    if model.beta == 1.0:
        return True
    if model.beta < 1.0:
        return gap >= threshold
    return gap <= threshold


def optimal_lambda1_gen(loss: LossSpec, model: OutlierModel) -> float:
    """lambda1 that pins the limiting overlap at m0 = gamma (vanishing excess).

    May be negative, in which case no admissible (lam >= 0) schedule reaches
    the optimal generalisation error.
    """
    if loss.kind == "l2":
        return 0.0
    gam = model.gamma
    if gam <= 0.0:
        raise RobustAsympError(f"degenerate channel gain gamma = {gam}; target overlap undefined")
    m_hat0, _, sigma_hat0 = _leading_hats(loss, gam, model)
    return m_hat0 / gam - sigma_hat0


def optimal_lambda1_estim(loss: LossSpec, model: OutlierModel) -> float:
    """lambda1 that pins m0 = 1 (vanishing estimation error); sign is sign(beta - 1)."""
    eps, beta = model.eps, model.beta
    zeta_out0 = model.delta_out + (1.0 - beta) ** 2
    if loss.kind == "l2":
        return (beta - 1.0) * eps
    if loss.kind == "huber":
        return (beta - 1.0) * eps * erf(loss.scale_a / np.sqrt(2.0 * zeta_out0))
    return (beta - 1.0) * eps * _SQRT_2_OVER_PI / np.sqrt(zeta_out0)


def ridge_negative_lambda_bound(alpha: float) -> float:
    """Convexity threshold of the ridge risk: lam must exceed -(1 - sqrt(alpha))^2."""
    if alpha < 1.0:
        raise ValueError(f"the negative-regularisation bound needs alpha >= 1, got {alpha}")
    return -((1.0 - np.sqrt(alpha)) ** 2)


def estim_consistency_negative_reg(model: OutlierModel) -> bool:
    """Whether negative-lam l2 can reach vanishing estimation error: (beta-1) eps > -1."""
    return (model.beta - 1.0) * model.eps > -1.0


def small_eps_expansion(model: OutlierModel, alpha: float):
    """First-order small-eps behaviour of optimally-regularised l2.

    Returns (lambda_series, gen_series) in powers of eps.  lambda_series is
    the optimal regularisation, delta_in + lam1 eps.  gen_series tracks the
    generalisation error with the noise floor held at delta_in (its order0
    is the eps = 0 Bayes-optimal error); the excess-error slope is
    gen_series.order1 - (1 - beta)^2.  Second-order coefficients are not
    modelled and are set to zero.
    """
    if alpha <= 0.0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    din, dout, beta = model.delta_in, model.delta_out, model.beta
    lam0 = din

    lam1 = (
        (alpha**2 + 2.0 * alpha * (lam0 - 1.0) + (lam0 + 1.0) ** 2)
        * (beta**2 - 2.0 * beta * (lam0 + 1.0) - din + dout + 2.0 * lam0 + 1.0)
    ) / (alpha**2 + alpha * (3.0 * din - lam0 - 2.0) + (lam0 + 1.0) * (3.0 * din - 2.0 * lam0 + 1.0))

    gen0 = 0.5 * (np.sqrt((alpha + din + 1.0) ** 2 - 4.0 * alpha) - alpha + din + 1.0)
    kappa = np.sqrt(alpha**2 + 2.0 * alpha * (din - 1.0) + (din + 1.0) ** 2)
    gen1 = (
        2.0 * alpha**2 * (beta - 1.0)
        + alpha * (beta * (beta + 2.0 * din - 6.0) - 3.0 * din + dout + 5.0)
        + (din + 1.0) * (beta**2 - din + dout - 1.0)
    ) / (2.0 * kappa) + 0.5 * (-2.0 * alpha * (beta - 1.0) + beta**2 + din - dout - 1.0)

    return (
        ExpansionCoefficients(lam0, lam1, 0.0),
        ExpansionCoefficients(gen0, gen1, 0.0),
    )
