"""Noise mechanisms and randomizers for private training.

All samplers take an explicit ``numpy.random.Generator``; nothing touches
global random state, so runs are reproducible and parallel callers can
derive independent streams by spawning from one master seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import DeltaZero, InvalidGamma, NonPositiveScale, OutOfRange
from .pairgraph import PairwiseDatum

MECHANISMS = ("laplace", "gaussian", "staircase", "duchi")


@dataclass(frozen=True)
class PrivacyBudget:
    """Privacy budget governing noise calibration.

    ``delta == 0`` selects pure (l1 / Laplace) calibration; ``delta > 0``
    selects the approximate (l2 / Gaussian) regime. The per-epoch budget is
    ``epsilon / t_max``; charging it once per epoch over disjoint batches
    accumulates to exactly ``epsilon``.
    """

    epsilon: float
    delta: float = 0.0
    kappa: int = 1
    t_max: int = 1

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if not (0 <= self.delta < 1):
            raise ValueError(f"delta must lie in [0, 1), got {self.delta}")
        if self.kappa < 0:
            raise ValueError(f"kappa must be non-negative, got {self.kappa}")
        if self.t_max < 1:
            raise ValueError(f"t_max must be at least 1, got {self.t_max}")

    @property
    def per_epoch_epsilon(self) -> float:
        return self.epsilon / self.t_max

    def epoch_budget(self) -> "PrivacyBudget":
        """Budget slice for a single epoch."""
        return PrivacyBudget(self.per_epoch_epsilon, self.delta, self.kappa, 1)

    def total_epsilon_charged(self) -> float:
        """Total budget consumed after all epochs (epsilon by construction)."""
        return self.epsilon


@dataclass(frozen=True)
class NoiseSpec:
    """Resolved noise parameters actually used by one update step."""

    mechanism: str
    scale_or_sigma: float
    staircase_gamma: float | None = None

    def __post_init__(self):
        if self.mechanism not in MECHANISMS:
            raise ValueError(f"unknown mechanism {self.mechanism!r}")
        if not self.scale_or_sigma > 0:
            raise NonPositiveScale(
                f"scale must be positive, got {self.scale_or_sigma}"
            )


def laplace_sample(scale: float, rng: np.random.Generator, size=None):
    """Zero-mean Laplace draw(s) with the given scale (variance 2 scale^2)."""
    if not scale > 0:
        raise NonPositiveScale(f"Laplace scale must be positive, got {scale}")
    return rng.laplace(0.0, scale, size=size)


def gaussian_sigma(budget: PrivacyBudget, sensitivity: float) -> float:
    """Smallest Gaussian noise level for the approximate regime.

    sigma = sqrt(2 ln(1.25 / delta)) * sensitivity / epsilon, requiring
    delta > 0.
    """
    if budget.delta <= 0:
        raise DeltaZero("Gaussian calibration requires delta > 0")
    if not sensitivity > 0:
        raise NonPositiveScale(f"sensitivity must be positive, got {sensitivity}")
    return math.sqrt(2.0 * math.log(1.25 / budget.delta)) * sensitivity / budget.epsilon


# --- staircase mechanism ----------------------------------------------------
#
# Piecewise-constant symmetric density: uniform height on |x| in
# [k*delta, (k+gamma)*delta), a factor e^-eps lower on the remainder of each
# period, decaying geometrically by e^-eps per period.


def _staircase_params(epsilon: float, sensitivity: float, gamma: float):
    if not epsilon > 0:
        raise NonPositiveScale(f"epsilon must be positive, got {epsilon}")
    if not sensitivity > 0:
        raise NonPositiveScale(f"sensitivity must be positive, got {sensitivity}")
    if not (0 < gamma <= 1):
        raise InvalidGamma(f"gamma must lie in (0, 1], got {gamma}")
    return math.exp(-epsilon)


def staircase_sample(
    epsilon: float,
    sensitivity: float,
    gamma: float,
    rng: np.random.Generator,
    size=None,
):
    """Zero-mean staircase-distributed draw(s) for an epsilon, sensitivity pair.

    Sampled as sign * delta * (period + offset): the period index is
    geometric with ratio e^-eps, and the offset falls in the high step
    (width gamma) or the low step (width 1 - gamma, weight e^-eps).
    """
    b = _staircase_params(epsilon, sensitivity, gamma)
    shape = () if size is None else size
    sign = rng.integers(0, 2, size=shape) * 2 - 1
    period = rng.geometric(1.0 - b, size=shape) - 1
    uniform = rng.random(size=shape)
    p_low = (1.0 - gamma) * b / (gamma + (1.0 - gamma) * b)
    low_step = rng.random(size=shape) < p_low
    offset = np.where(
        low_step,
        gamma + (1.0 - gamma) * uniform,
        gamma * uniform,
    )
    out = sign * sensitivity * (period + offset)
    return out if size is not None else float(out)


def staircase_variance(epsilon: float, sensitivity: float, gamma: float) -> float:
    """Closed-form variance of the staircase distribution."""
    b = _staircase_params(epsilon, sensitivity, gamma)
    e_g = b / (1.0 - b)
    e_g2 = b * (1.0 + b) / (1.0 - b) ** 2
    p_low = (1.0 - gamma) * b / (gamma + (1.0 - gamma) * b)
    high = e_g2 + gamma * e_g + gamma**2 / 3.0
    low = (
        e_g2
        + (1.0 + gamma) * e_g
        + gamma**2
        + gamma * (1.0 - gamma)
        + (1.0 - gamma) ** 2 / 3.0
    )
    return sensitivity**2 * ((1.0 - p_low) * high + p_low * low)


def staircase_optimal_gamma(epsilon: float) -> float:
    """Variance-minimising step-width parameter for the given budget."""
    if not epsilon > 0:
        raise NonPositiveScale(f"epsilon must be positive, got {epsilon}")
    res = minimize_scalar(
        lambda gm: staircase_variance(epsilon, 1.0, gm),
        bounds=(1e-6, 1.0),
        method="bounded",
    )
    return float(res.x)


# --- one-bit randomizer -----------------------------------------------------


def duchi_randomize(value: float, epsilon: float, rng: np.random.Generator) -> float:
    """Unbiased one-bit randomizer for a value in [-1, 1].

    Returns +/- C with C = (e^eps + 1) / (e^eps - 1), keeping the output
    expectation equal to the input.
    """
    if not epsilon > 0:
        raise NonPositiveScale(f"epsilon must be positive, got {epsilon}")
    if abs(value) > 1.0:
        raise OutOfRange(f"value must lie in [-1, 1], got {value}")
    c = (math.exp(epsilon) + 1.0) / (math.exp(epsilon) - 1.0)
    p_plus = 0.5 * (1.0 + value / c)
    return c if rng.random() < p_plus else -c


def duchi_randomize_vector(
    values: np.ndarray, epsilon: float, rng: np.random.Generator
) -> np.ndarray:
    """Per-dimension one-bit randomizer with the budget split evenly."""
    values = np.asarray(values, dtype=float)
    if not epsilon > 0:
        raise NonPositiveScale(f"epsilon must be positive, got {epsilon}")
    if np.any(np.abs(values) > 1.0):
        raise OutOfRange("all coordinates must lie in [-1, 1]")
    eps_dim = epsilon / values.size
    c = (math.exp(eps_dim) + 1.0) / (math.exp(eps_dim) - 1.0)
    p_plus = 0.5 * (1.0 + values / c)
    signs = np.where(rng.random(values.shape) < p_plus, 1.0, -1.0)
    return c * signs


def warner_flip(label: int, epsilon: float, rng: np.random.Generator) -> int:
    """Randomized response: keep the label with probability e^eps/(1+e^eps)."""
    if label not in (0, 1):
        raise OutOfRange(f"label must be 0 or 1, got {label!r}")
    keep = 1.0 / (1.0 + math.exp(-epsilon)) if not math.isinf(epsilon) else 1.0
    return label if rng.random() < keep else 1 - label


def input_perturb(
    pairs: list[PairwiseDatum],
    epsilon: float,
    rng: np.random.Generator,
    feature_share: float = 0.5,
) -> list[PairwiseDatum]:
    """Input-perturbation baseline: noise the data itself, then train cleanly.

    ``feature_share`` of the budget goes to the feature differences (split
    evenly across dimensions, Laplace at per-coordinate sensitivity 2 under
    the l1 normalisation); the rest drives randomized response on labels.
    """
    if not epsilon > 0:
        raise NonPositiveScale(f"epsilon must be positive, got {epsilon}")
    if not (0 < feature_share < 1):
        raise ValueError(f"feature_share must lie in (0, 1), got {feature_share}")
    if not pairs:
        return []
    d = pairs[0].dim
    eps_feat = feature_share * epsilon
    eps_label = (1.0 - feature_share) * epsilon
    scale = 0.0 if math.isinf(eps_feat) else 2.0 * d / eps_feat
    out = []
    for p in pairs:
        noise = rng.laplace(0.0, scale, size=d) if scale > 0 else np.zeros(d)
        out.append(
            PairwiseDatum(p.i, p.j, p.delta_x + noise, warner_flip(p.y, eps_label, rng))
        )
    return out
