"""Bayes-optimal fixed point, errors, and the large-sample rate coefficient.

The posterior-mean estimator is characterised by a single overlap pair:

    q_b     = q_hat_b / (1 + q_hat_b)
    q_hat_b = alpha * Int dy E_xi [ Z(y | sqrt(q_b) xi, 1 - q_b)
                                    * f(y | sqrt(q_b) xi, 1 - q_b)^2 ]

with the mixture channel Z and its score f from ``channel``.  Errors:

    E_estim = 1 - q_b
    E_gen   = 1 + eps (beta^2 - 1) - q_b (1 + eps (beta - 1))^2 + delta_eff

At large alpha, 1 - q_b ~ 1 / (c_hat alpha) where c_hat is the channel
Fisher information at zero latent uncertainty (bo_rate_coefficient).
"""

from __future__ import annotations

from dataclasses import dataclass

from .exceptions import ConvergenceError
from .model import ErrorReport, OutlierModel
from .quadrature import bo_qhat_by_quadrature, channel_fisher
from .state_evolution import FixedPointConfig

__all__ = ["BOState", "bo_fixed_point", "bo_errors", "bo_rate_coefficient"]


@dataclass(frozen=True)
class BOState:
    q_b: float
    q_hat_b: float


def bo_fixed_point(
    model: OutlierModel,
    alpha: float,
    config: FixedPointConfig | None = None,
    quad_tol: float = 1e-10,
) -> BOState:
    """Damped iteration of the two Bayes-optimal equations."""
    if alpha <= 0.0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    cfg = config or FixedPointConfig()
    mu = cfg.damping

    q = 0.5
    q_hat = bo_qhat_by_quadrature(q, model, alpha, tol=quad_tol)
    residual = float("inf")
    for _ in range(cfg.max_iters):
        q_new = q_hat / (1.0 + q_hat)
        q_cand = mu * q_new + (1.0 - mu) * q
        q_cand = min(max(q_cand, 0.0), 1.0 - 1e-15)
        residual = abs(q_cand - q)
        q = q_cand
        q_hat = bo_qhat_by_quadrature(q, model, alpha, tol=quad_tol)
        if residual < cfg.tolerance:
            return BOState(q_b=q, q_hat_b=q_hat)
    raise ConvergenceError(
        f"BO fixed point not converged after {cfg.max_iters} iterations (residual {residual:.3e})",
        last_iterate=(q, q_hat),
        residual=residual,
    )


def bo_errors(bo: BOState, model: OutlierModel) -> ErrorReport:
    """Errors of the Bayes-optimal estimators at a converged overlap."""
    q = bo.q_b
    gen = 1.0 + model.eps * (model.beta**2 - 1.0) - q * model.gamma**2 + model.delta_eff
    return ErrorReport(
        gen_error=gen,
        excess_gen_error=gen - model.noise_floor,
        estim_error=1.0 - q,
        angle=0.0,
    )


def bo_rate_coefficient(model: OutlierModel, tol: float = 1e-10) -> float:
    """Coefficient c_hat of the 1/alpha Bayes-optimal estimation-error rate.

    E_estim^BO ~ 1 / (c_hat alpha); equals 1/delta for a single Gaussian
    channel of variance delta.
    """
    return channel_fisher(model, tol=tol)
