"""Contrastive-loss metric learning under pairwise privacy.

The loss for one pair is ``(1-y)/2 * D^2 + y/2 * max(0, m - D)^2`` with
``D = ||W dx||_2``. Training runs noisy minibatch gradient descent: per-row
gradients are clipped to a Lipschitz cap, averaged, perturbed by the
configured mechanism at a scale calibrated to the privacy distance of the
pair graph, and applied with a ``1/sqrt(step)`` learning-rate decay. The
data-dependent sensitivity bound (batch gradient peak plus its worst-case
counterpart) replaces the fixed bound when sensitivity reduction is on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    ConfigInvalid,
    DegenerateDistance,
    DimensionMismatch,
    EmptyBatch,
)
from .kappa import KappaReport, compute_kappa
from .mechanisms import (
    PrivacyBudget,
    duchi_randomize_vector,
    gaussian_sigma,
    staircase_optimal_gamma,
    staircase_sample,
)
from .pairgraph import PairGraph, PairwiseDatum

TRAIN_MECHANISMS = ("none", "laplace", "gaussian", "staircase", "duchi")
SENSITIVITY_MODES = ("basic", "reduced")
NORM_MODES = ("l1", "l2")
BATCH_MODES = ("shuffle", "component")


@dataclass(frozen=True)
class MetricModel:
    """Learned transformation; the distance metric is ``W^T W``."""

    w: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        if w.ndim != 2:
            raise DimensionMismatch(f"W must be 2-D, got shape {w.shape}")
        if not 1 <= w.shape[0] <= w.shape[1]:
            raise DimensionMismatch(
                f"W must have 1 <= d_prime <= d, got shape {w.shape}"
            )
        w = w.copy()
        w.setflags(write=False)
        object.__setattr__(self, "w", w)

    @property
    def d_prime(self) -> int:
        return self.w.shape[0]

    @property
    def d(self) -> int:
        return self.w.shape[1]

    def metric(self) -> np.ndarray:
        """Materialise M = W^T W (symmetric PSD by construction)."""
        return self.w.T @ self.w

    def to_dict(self) -> dict:
        return {
            "d_prime": self.d_prime,
            "d": self.d,
            "w": [float(v) for v in self.w.ravel()],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MetricModel":
        w = np.array(d["w"], dtype=float).reshape(d["d_prime"], d["d"])
        return cls(w)


@dataclass
class TrainConfig:
    """Hyperparameters of the private training loop."""

    d_prime: int
    margin: float | None = None       # None: margin_ratio * mean dissimilar distance
    margin_ratio: float = 1.0
    lipschitz: float = 0.5
    batch_size: int = 50
    t_max: int = 10
    epsilon: float = 2.0
    delta: float = 0.0
    mechanism: str = "laplace"
    sensitivity_mode: str = "reduced"
    norm_mode: str = "l1"
    seed: int = 0
    init_scale: float = 0.1
    staircase_gamma: float | None = None
    batch_mode: str = "shuffle"

    def validate(self) -> None:
        if self.d_prime < 1:
            raise ConfigInvalid(f"d_prime must be >= 1, got {self.d_prime}")
        if self.margin is not None and not self.margin > 0:
            raise ConfigInvalid(f"margin must be positive, got {self.margin}")
        if not self.margin_ratio > 0:
            raise ConfigInvalid(f"margin_ratio must be positive, got {self.margin_ratio}")
        if not self.lipschitz > 0:
            raise ConfigInvalid(f"lipschitz must be positive, got {self.lipschitz}")
        if self.batch_size < 1:
            raise ConfigInvalid(f"batch_size must be >= 1, got {self.batch_size}")
        if self.t_max < 1:
            raise ConfigInvalid(f"t_max must be >= 1, got {self.t_max}")
        if self.mechanism not in TRAIN_MECHANISMS:
            raise ConfigInvalid(f"mechanism must be one of {TRAIN_MECHANISMS}")
        if self.sensitivity_mode not in SENSITIVITY_MODES:
            raise ConfigInvalid(f"sensitivity_mode must be one of {SENSITIVITY_MODES}")
        if self.norm_mode not in NORM_MODES:
            raise ConfigInvalid(f"norm_mode must be one of {NORM_MODES}")
        if self.batch_mode not in BATCH_MODES:
            raise ConfigInvalid(f"batch_mode must be one of {BATCH_MODES}")
        if self.mechanism != "none" and not self.epsilon > 0:
            raise ConfigInvalid(f"epsilon must be positive, got {self.epsilon}")
        if self.mechanism == "gaussian":
            if not self.delta > 0:
                raise ConfigInvalid("gaussian mechanism requires delta > 0")
            if self.norm_mode != "l2":
                raise ConfigInvalid("gaussian mechanism requires norm_mode='l2'")
        elif self.delta != 0:
            raise ConfigInvalid("delta > 0 only applies to the gaussian mechanism")
        if self.staircase_gamma is not None and not 0 < self.staircase_gamma <= 1:
            raise ConfigInvalid(
                f"staircase_gamma must lie in (0, 1], got {self.staircase_gamma}"
            )
        if not self.init_scale > 0:
            raise ConfigInvalid(f"init_scale must be positive, got {self.init_scale}")

    def budget(self, kappa: int) -> PrivacyBudget:
        eps = self.epsilon if self.mechanism != "none" else math.inf
        return PrivacyBudget(eps, self.delta, kappa, self.t_max)


@dataclass(frozen=True)
class SensitivityBound:
    """Per-row gradient sensitivity (privacy-distance factor included)."""

    per_row: np.ndarray
    mode: str

    def __post_init__(self):
        arr = np.asarray(self.per_row, dtype=float)
        arr.setflags(write=False)
        object.__setattr__(self, "per_row", arr)


@dataclass
class TrainTrace:
    """Per-iteration record of one training run."""

    kappa: int
    kappa_method: str
    margin: float
    initial_objective: float
    iterations: list[int] = field(default_factory=list)
    epochs: list[int] = field(default_factory=list)
    objectives: list[float] = field(default_factory=list)
    etas: list[float] = field(default_factory=list)
    sens_basic: list[float] = field(default_factory=list)
    sens_reduced: list[np.ndarray] = field(default_factory=list)
    degenerate_events: int = 0

    def rows(self) -> list[dict]:
        out = []
        for k in range(len(self.iterations)):
            reduced = self.sens_reduced[k]
            out.append(
                {
                    "iter": self.iterations[k],
                    "epoch": self.epochs[k],
                    "objective": self.objectives[k],
                    "eta": self.etas[k],
                    "sens_basic": self.sens_basic[k],
                    "sens_reduced_min": float(np.min(reduced)),
                    "sens_reduced_max": float(np.max(reduced)),
                }
            )
        return out


# --- loss and gradients -----------------------------------------------------


def contrastive_loss(model: MetricModel, pair: PairwiseDatum, margin: float) -> float:
    """Per-pair loss: pull same-class pairs together, push different-class
    pairs out to the margin."""
    if pair.dim != model.d:
        raise DimensionMismatch(
            f"pair has dimension {pair.dim}, model expects {model.d}"
        )
    d_w = float(np.linalg.norm(model.w @ pair.delta_x))
    if pair.y == 0:
        return 0.5 * d_w**2
    return 0.5 * max(0.0, margin - d_w) ** 2


def gradient_row(
    model: MetricModel, pair: PairwiseDatum, margin: float, row: int
) -> np.ndarray:
    """Gradient of the pair loss with respect to one row of W (0-based).

    Piecewise: ``(W_r . dx) dx`` for similar pairs, scaled by
    ``(D - m) / D`` inside the margin for dissimilar pairs, zero beyond it.
    Raises :class:`DegenerateDistance` at D = 0 for a dissimilar pair; the
    training loop substitutes the zero subgradient there instead.
    """
    if pair.dim != model.d:
        raise DimensionMismatch(
            f"pair has dimension {pair.dim}, model expects {model.d}"
        )
    if not 0 <= row < model.d_prime:
        raise IndexError(f"row {row} out of range for d_prime={model.d_prime}")
    dx = pair.delta_x
    proj = float(model.w[row] @ dx)
    if pair.y == 0:
        return proj * dx
    d_w = float(np.linalg.norm(model.w @ dx))
    if d_w >= margin:
        return np.zeros_like(dx)
    if d_w == 0.0:
        raise DegenerateDistance(
            "dissimilar pair with zero projected distance; hinge gradient undefined"
        )
    return (d_w - margin) / d_w * proj * dx


def _vector_norm(v: np.ndarray, norm_mode: str) -> float:
    return float(np.abs(v).sum()) if norm_mode == "l1" else float(np.linalg.norm(v))


def clip_gradient(g: np.ndarray, h: float, norm_mode: str = "l1") -> np.ndarray:
    """Rescale ``g`` so its norm is at most ``h``; identity when already inside."""
    if not h > 0:
        raise ConfigInvalid(f"clipping threshold must be positive, got {h}")
    norm = _vector_norm(np.asarray(g, dtype=float), norm_mode)
    return np.asarray(g, dtype=float) / max(1.0, norm / h)


def step_size(tau: int) -> float:
    """Learning rate at global step ``tau`` (1-based): ``1 / sqrt(tau)``."""
    if tau < 1:
        raise ValueError(f"step counter must be >= 1, got {tau}")
    return 1.0 / math.sqrt(tau)


# --- sensitivity bounds -----------------------------------------------------


def sensitivity_basic(
    kappa: int, h: float, batch_size: int, d_prime: int = 1
) -> SensitivityBound:
    """Fixed per-row bound ``2 kappa h / batch_size`` from the Lipschitz cap."""
    if kappa < 0 or not h > 0 or batch_size < 1 or d_prime < 1:
        raise ConfigInvalid("kappa >= 0, h > 0, batch_size >= 1, d_prime >= 1 required")
    return SensitivityBound(
        np.full(d_prime, 2.0 * kappa * h / batch_size), mode="basic"
    )


def _counterpart_bound(w: np.ndarray, h: float, margin: float, norm_mode: str) -> np.ndarray:
    """Worst-case clipped gradient norm of any replacement pair, per row."""
    d_prime = w.shape[0]
    if norm_mode == "l1":
        w_norms = np.abs(w).sum(axis=1)
        hinge_cap = 2.0 * margin * math.sqrt(d_prime)
    else:
        w_norms = np.linalg.norm(w, axis=1)
        hinge_cap = 2.0 * margin
    return np.minimum(h, np.maximum(4.0 * w_norms, hinge_cap))


def _reduced_bound(
    g_peaks: np.ndarray,
    w: np.ndarray,
    h: float,
    margin: float,
    kappa: int,
    batch_size: int,
    norm_mode: str,
) -> np.ndarray:
    counterpart = _counterpart_bound(w, h, margin, norm_mode)
    return kappa * (g_peaks + counterpart) / batch_size


def sensitivity_reduced(
    clipped_grads: Sequence[np.ndarray],
    w: np.ndarray,
    h: float,
    margin: float,
    kappa: int,
    batch_size: int,
    norm_mode: str = "l1",
) -> SensitivityBound:
    """Data-dependent per-row bound ``kappa (g' + g'') / batch_size``.

    ``clipped_grads[r]`` holds the clipped per-pair gradients of row r as an
    (n_batch, d) array; g' is the largest norm among them and g'' the
    clipped worst case any replacement pair could contribute.
    """
    w = np.asarray(w, dtype=float)
    if len(clipped_grads) != w.shape[0]:
        raise DimensionMismatch(
            f"need one gradient block per row: got {len(clipped_grads)} "
            f"blocks for {w.shape[0]} rows"
        )
    peaks = []
    for block in clipped_grads:
        block = np.atleast_2d(np.asarray(block, dtype=float))
        if block.shape[0] == 0:
            raise EmptyBatch("cannot bound sensitivity on an empty batch")
        if norm_mode == "l1":
            norms = np.abs(block).sum(axis=1)
        else:
            norms = np.linalg.norm(block, axis=1)
        peaks.append(float(norms.max()))
    per_row = _reduced_bound(
        np.array(peaks), w, h, margin, kappa, batch_size, norm_mode
    )
    mode = "reduced" if norm_mode == "l1" else "reduced_l2"
    return SensitivityBound(per_row, mode=mode)


# --- training ----------------------------------------------------------------


def default_margin(pairs: Sequence[PairwiseDatum], ratio: float, norm_mode: str) -> float:
    """Margin as ``ratio`` times the average dissimilar-pair distance."""
    dissimilar = [p for p in pairs if p.y == 1]
    if not dissimilar:
        raise ConfigInvalid(
            "no dissimilar pairs to derive a margin from; set margin explicitly"
        )
    total = sum(_vector_norm(p.delta_x, norm_mode) for p in dissimilar)
    m = ratio * total / len(dissimilar)
    if not m > 0:
        raise ConfigInvalid("derived margin is zero; set margin explicitly")
    return m


def _batch_slices(
    n_pairs: int,
    batch_size: int,
    order: np.ndarray,
) -> list[np.ndarray]:
    batches = [
        order[k : k + batch_size] for k in range(0, n_pairs, batch_size)
    ]
    if len(batches) > 1 and len(batches[-1]) < batch_size / 2:
        batches.pop()  # too small for a stable sensitivity denominator
    return batches


def _pair_order(
    pairs: Sequence[PairwiseDatum],
    graph: PairGraph,
    batch_mode: str,
    rng: np.random.Generator,
) -> np.ndarray:
    order = rng.permutation(len(pairs))
    if batch_mode == "component":
        comp_of: dict[int, int] = {}
        for ci, comp in enumerate(graph.components()):
            for v in comp:
                comp_of[v] = ci
        comp_key = np.array(
            [comp_of[graph.node_index(pairs[k].i)] for k in order]
        )
        order = order[np.argsort(comp_key, kind="stable")]
    return order


def _coefficients(
    w: np.ndarray, dx: np.ndarray, y: np.ndarray, margin: float
) -> tuple[np.ndarray, np.ndarray, int]:
    """Per-pair gradient coefficient matrix and distances for one batch.

    Returns (A, d_w, degenerate) where row r of A holds the scalar that
    multiplies dx_j in the gradient of row r; the zero subgradient is used
    for dissimilar pairs at zero distance.
    """
    proj = w @ dx.T                       # (d_prime, n)
    d_w = np.linalg.norm(proj, axis=0)    # (n,)
    coef = np.ones_like(d_w)
    active = (y == 1) & (d_w > 0) & (d_w < margin)
    coef[active] = (d_w[active] - margin) / d_w[active]
    dead = (y == 1) & ((d_w >= margin) | (d_w == 0))
    coef[dead] = 0.0
    degenerate = int(np.count_nonzero((y == 1) & (d_w == 0)))
    return proj * coef, d_w, degenerate


def dataset_objective(
    w: np.ndarray, dx: np.ndarray, y: np.ndarray, margin: float
) -> float:
    """Mean contrastive loss of the whole pair set under W."""
    d_w = np.linalg.norm(w @ dx.T, axis=0)
    losses = np.where(
        y == 0, 0.5 * d_w**2, 0.5 * np.maximum(0.0, margin - d_w) ** 2
    )
    return float(losses.mean())


def train(
    pairs: Sequence[PairwiseDatum],
    graph: PairGraph,
    config: TrainConfig,
    kappa_report: KappaReport | None = None,
) -> tuple[MetricModel, TrainTrace]:
    """Run the private training loop and return the model plus its trace.

    The privacy distance comes from ``kappa_report`` when given (so repeated
    runs on one dataset can share it), otherwise it is computed from the
    graph. All randomness derives from ``config.seed``: one stream for the
    initial W, one for the batch order and one per row of W for noise, so
    identical inputs give a bit-identical trajectory.
    """
    config.validate()
    if not pairs:
        raise ConfigInvalid("cannot train on an empty pair list")
    d = pairs[0].dim
    if config.d_prime > d:
        raise ConfigInvalid(
            f"d_prime={config.d_prime} exceeds feature dimension {d}"
        )
    if kappa_report is None:
        kappa_report = compute_kappa(graph)
    kappa = kappa_report.kappa

    margin = (
        config.margin
        if config.margin is not None
        else default_margin(pairs, config.margin_ratio, config.norm_mode)
    )

    dx_all = np.stack([p.delta_x for p in pairs])
    y_all = np.array([p.y for p in pairs], dtype=int)
    dx_norms = (
        np.abs(dx_all).sum(axis=1)
        if config.norm_mode == "l1"
        else np.linalg.norm(dx_all, axis=1)
    )

    seeds = np.random.SeedSequence(config.seed).spawn(2 + config.d_prime)
    init_rng = np.random.default_rng(seeds[0])
    order_rng = np.random.default_rng(seeds[1])
    row_rngs = [np.random.default_rng(s) for s in seeds[2:]]

    w = init_rng.uniform(-config.init_scale, config.init_scale, (config.d_prime, d))
    order = _pair_order(pairs, graph, config.batch_mode, order_rng)
    batches = _batch_slices(len(pairs), config.batch_size, order)

    budget = config.budget(kappa)
    eps_epoch = budget.per_epoch_epsilon
    h = config.lipschitz
    gamma = config.staircase_gamma
    if config.mechanism == "staircase" and gamma is None:
        gamma = staircase_optimal_gamma(eps_epoch)

    trace = TrainTrace(
        kappa=kappa,
        kappa_method=kappa_report.method,
        margin=margin,
        initial_objective=dataset_objective(w, dx_all, y_all, margin),
    )

    tau = 0
    for epoch in range(1, config.t_max + 1):
        for batch in batches:
            tau += 1
            eta = step_size(tau)
            dx = dx_all[batch]
            yv = y_all[batch]
            n_b = len(batch)

            amat, _, degenerate = _coefficients(w, dx, yv, margin)
            trace.degenerate_events += degenerate
            raw_norms = np.abs(amat) * dx_norms[batch]      # (d_prime, n)
            clip = np.maximum(1.0, raw_norms / h)
            cmat = amat / clip
            clipped_norms = raw_norms / clip
            g_peaks = clipped_norms.max(axis=1)
            mean_grad = (cmat @ dx) / n_b

            basic = 2.0 * kappa * h / n_b
            reduced = _reduced_bound(
                g_peaks, w, h, margin, kappa, n_b, config.norm_mode
            )
            sens = reduced if config.sensitivity_mode == "reduced" else np.full(
                config.d_prime, basic
            )

            update = mean_grad
            if config.mechanism != "none":
                update = mean_grad.copy()
                for r in range(config.d_prime):
                    update[r] += _row_noise(
                        mean_grad[r], sens[r], eps_epoch, config, gamma,
                        h, row_rngs[r],
                    )
            w = w - eta * update

            trace.iterations.append(tau)
            trace.epochs.append(epoch)
            trace.objectives.append(dataset_objective(w, dx_all, y_all, margin))
            trace.etas.append(eta)
            trace.sens_basic.append(basic)
            trace.sens_reduced.append(reduced)

    return MetricModel(w), trace


def _row_noise(
    mean_row: np.ndarray,
    sens: float,
    eps_epoch: float,
    config: TrainConfig,
    gamma: float | None,
    h: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Additive noise for one row's mean gradient (or, for the one-bit
    randomizer, the correction that replaces it entirely)."""
    d = mean_row.shape[0]
    if math.isinf(eps_epoch) or sens == 0.0:
        return np.zeros(d)
    if config.mechanism == "laplace":
        return rng.laplace(0.0, sens / eps_epoch, size=d)
    if config.mechanism == "gaussian":
        sigma = gaussian_sigma(
            PrivacyBudget(eps_epoch, config.delta, 1, 1), sens
        )
        return rng.normal(0.0, sigma, size=d)
    if config.mechanism == "staircase":
        return staircase_sample(eps_epoch, sens, gamma, rng, size=d)
    # one-bit randomizer: rebuild the row from scaled sign bits; clipping
    # guarantees |coord| <= h up to rounding, so clamp the last ulp away
    scaled = np.clip(mean_row / h, -1.0, 1.0)
    return h * duchi_randomize_vector(scaled, eps_epoch, rng) - mean_row
