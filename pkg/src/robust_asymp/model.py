"""Data model with outliers, error metrics, and dataset sampling.

Labels are produced from a linear teacher y* = x . w* / sqrt(d); with
probability 1 - eps the label is y* plus Gaussian noise of variance
delta_in, and with probability eps it is beta * y* plus noise of variance
delta_out.  All asymptotic error formulas below are expressed through the
overlaps m = w* . w / d and q = ||w||^2 / d of a student w against a
unit-norm-per-dimension teacher.

Conventions used throughout the package:

    delta_eff = (1 - eps) * delta_in + eps * delta_out
    gamma     = 1 + eps * (beta - 1)          (optimal label-scale of w*)
    lambda_cap = 1 + delta_eff + eps * (beta^2 - 1)

    gen error    E_gen   = lambda_cap + q - 2 m gamma
    excess       E_exc   = E_gen - eps (1-eps) (1-beta)^2 - delta_eff
    estim error  E_estim = 1 + q - 2 m
    angle        theta   = arccos(m / sqrt(q)) / pi

The excess error vanishes at the asymptotically optimal point
(m, q) = (gamma, gamma^2) for every noise model.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

from .exceptions import RobustAsympError

__all__ = [
    "OutlierModel",
    "OverlapState",
    "ErrorReport",
    "Dataset",
    "rng_for",
    "sample_dataset",
    "gen_error_from_overlaps",
    "excess_gen_error_from_overlaps",
    "estim_error_from_overlaps",
    "teacher_student_angle",
    "errors_from_overlaps",
    "empirical_errors",
]


@dataclass(frozen=True)
class OutlierModel:
    """Noise-channel parameters: outlier fraction, rescaling, and variances."""

    eps: float
    beta: float
    delta_in: float
    delta_out: float

    def __post_init__(self):
        if not 0.0 <= self.eps <= 1.0:
            raise ValueError(f"eps must be in [0, 1], got {self.eps}")
        if self.beta < 0.0:
            raise ValueError(f"beta must be nonnegative, got {self.beta}")
        if self.delta_in <= 0.0:
            raise ValueError(f"delta_in must be positive, got {self.delta_in}")
        if self.delta_out <= 0.0:
            raise ValueError(f"delta_out must be positive, got {self.delta_out}")

    @property
    def delta_eff(self) -> float:
        return (1.0 - self.eps) * self.delta_in + self.eps * self.delta_out

    @property
    def gamma(self) -> float:
        return 1.0 + self.eps * (self.beta - 1.0)

    @property
    def lambda_cap(self) -> float:
        return 1.0 + self.delta_eff + self.eps * (self.beta**2 - 1.0)

    @property
    def noise_floor(self) -> float:
        """Generalisation error of the best possible estimator at infinite data."""
        return self.eps * (1.0 - self.eps) * (1.0 - self.beta) ** 2 + self.delta_eff


@dataclass(frozen=True)
class OverlapState:
    """The six order parameters of the self-consistent equations."""

    m: float
    q: float
    sigma: float
    m_hat: float
    q_hat: float
    sigma_hat: float

    def __post_init__(self):
        if self.q < 0.0:
            raise ValueError(f"q must be nonnegative, got {self.q}")
        if self.sigma <= 0.0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")


@dataclass(frozen=True)
class ErrorReport:
    gen_error: float
    excess_gen_error: float
    estim_error: float
    angle: float


@dataclass(frozen=True)
class Dataset:
    """A sampled regression problem: teacher, inputs, labels, outlier flags."""

    teacher: np.ndarray
    samples: np.ndarray
    labels: np.ndarray
    outlier_mask: np.ndarray
    n: int
    d: int
    seed: int


# Purpose tags keep the RNG streams for teacher / inputs / noise / mask /
# solver-init independent and individually reproducible from one seed.
def rng_for(seed: int, tag: str) -> np.random.Generator:
    """Generator keyed by (seed, purpose tag); streams with different tags are independent."""
    return np.random.default_rng(np.random.SeedSequence((int(seed), zlib.crc32(tag.encode()))))


def sample_dataset(
    model: OutlierModel,
    n: int,
    d: int,
    seed: int,
    teacher: np.ndarray | None = None,
    stream: str = "train",
) -> Dataset:
    """Draw a dataset from the outlier channel, reproducibly from ``seed``.

    ``teacher`` may be passed to reuse an existing teacher vector (e.g. to
    draw a test set for the same regression problem); otherwise the teacher
    is drawn i.i.d. standard normal from the (seed, "teacher") stream.
    ``stream`` isolates the input/noise RNG streams of independent draws
    that share a seed (train vs test).
    """
    if n < 1 or d < 1:
        raise ValueError(f"need n >= 1 and d >= 1, got n={n}, d={d}")
    if teacher is None:
        teacher = rng_for(seed, "teacher").standard_normal(d)
    else:
        teacher = np.asarray(teacher, dtype=float)
        if teacher.shape != (d,):
            raise ValueError(f"teacher has shape {teacher.shape}, expected ({d},)")

    samples = rng_for(seed, stream + "-inputs").standard_normal((n, d))
    z = rng_for(seed, stream + "-noise").standard_normal(n)
    mask = rng_for(seed, stream + "-mask").random(n) < model.eps

    y_star = samples @ teacher / np.sqrt(d)
    labels = np.where(
        mask,
        model.beta * y_star + z * np.sqrt(model.delta_out),
        y_star + z * np.sqrt(model.delta_in),
    )

    for arr in (teacher, samples, labels, mask):
        arr.flags.writeable = False
    return Dataset(teacher=teacher, samples=samples, labels=labels, outlier_mask=mask, n=n, d=d, seed=seed)


def gen_error_from_overlaps(m: float, q: float, model: OutlierModel) -> float:
    """Population generalisation error of a student with overlaps (m, q)."""
    if q < 0.0:
        raise ValueError(f"q must be nonnegative, got {q}")
    return model.lambda_cap + q - 2.0 * m * model.gamma


def excess_gen_error_from_overlaps(m: float, q: float, model: OutlierModel) -> float:
    """Generalisation error above the infinite-data optimum."""
    return gen_error_from_overlaps(m, q, model) - model.noise_floor


def estim_error_from_overlaps(m: float, q: float) -> float:
    """Mean-square distance to the teacher, 1 + q - 2m."""
    if q < 0.0:
        raise ValueError(f"q must be nonnegative, got {q}")
    return 1.0 + q - 2.0 * m


_ANGLE_TOL = 1e-12


def teacher_student_angle(m: float, q: float) -> float:
    """Normalized teacher-student angle arccos(m / sqrt(q)) / pi, in [0, 1]."""
    if q <= 0.0:
        raise RobustAsympError(f"angle undefined for q <= 0 (q={q})")
    c = m / np.sqrt(q)
    if abs(c) > 1.0 + _ANGLE_TOL:
        raise RobustAsympError(f"|m|/sqrt(q) = {abs(c)} exceeds 1 beyond rounding tolerance")
    return float(np.arccos(np.clip(c, -1.0, 1.0)) / np.pi)


def errors_from_overlaps(m: float, q: float, model: OutlierModel) -> ErrorReport:
    gen = gen_error_from_overlaps(m, q, model)
    return ErrorReport(
        gen_error=gen,
        excess_gen_error=gen - model.noise_floor,
        estim_error=estim_error_from_overlaps(m, q),
        angle=teacher_student_angle(m, q) if q > 0 else 0.5,
    )


def empirical_errors(dataset_test: Dataset, w_hat: np.ndarray, model: OutlierModel) -> ErrorReport:
    """Finite-size error estimates for an estimate w_hat on a held-out test set.

    The excess generalisation error is measured against the best label
    rescaling of the teacher, gamma * w*, so that it vanishes (up to
    sampling noise) exactly when w_hat attains the optimal norm and
    direction.  Empirical overlaps are normalized by the realized
    ||w*||^2 / d to reduce finite-size bias.
    """
    w_hat = np.asarray(w_hat, dtype=float)
    if w_hat.shape != (dataset_test.d,):
        raise ValueError(f"w_hat has shape {w_hat.shape}, expected ({dataset_test.d},)")
    if dataset_test.n < 1:
        raise ValueError("empty test set")

    d = dataset_test.d
    w_star = dataset_test.teacher
    x, y = dataset_test.samples, dataset_test.labels

    estim = float(np.sum((w_star - w_hat) ** 2) / d)

    pred = x @ w_hat / np.sqrt(d)
    baseline = model.gamma * (x @ w_star) / np.sqrt(d)
    excess = float(np.mean((y - pred) ** 2) - np.mean((y - baseline) ** 2))

    rho = np.sum(w_star**2) / d
    m_emp = float(w_star @ w_hat / d / np.sqrt(rho))
    q_emp = float(np.sum(w_hat**2) / d)
    angle = teacher_student_angle(m_emp, q_emp) if q_emp > 0 else 0.5

    return ErrorReport(
        gen_error=excess + model.noise_floor,
        excess_gen_error=excess,
        estim_error=estim,
        angle=angle,
    )
