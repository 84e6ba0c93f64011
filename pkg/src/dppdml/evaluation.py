"""Utility evaluation of a learned metric.

Projects data through the learned transformation, scores it with a kNN
classifier trained on the individuals that appear in training pairs (all
remaining individuals form the test set), and aggregates repeated
private-training runs into accuracy-versus-budget comparisons.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .dml import MetricModel, TrainConfig, train
from .errors import DimensionMismatch, EmptyTrainSet
from .kappa import KappaReport, compute_kappa, kappa_node_dp
from .dataio import SampleSet
from .mechanisms import input_perturb
from .pairgraph import PairGraph, PairwiseDatum

METHODS = ("nonpriv", "dpp", "dpp_s", "node_dp", "input_per")


@dataclass(frozen=True)
class ExperimentReport:
    """Aggregated accuracy of one (method, epsilon) cell."""

    method: str
    epsilon: float
    runs: int
    mean_accuracy: float
    std_accuracy: float
    per_run: tuple[float, ...]

    def __post_init__(self):
        if self.runs != len(self.per_run):
            raise ValueError("runs must equal len(per_run)")
        if self.per_run:
            if abs(self.mean_accuracy - float(np.mean(self.per_run))) > 1e-12:
                raise ValueError("mean_accuracy inconsistent with per_run")

    @classmethod
    def from_runs(cls, method: str, epsilon: float, per_run) -> "ExperimentReport":
        per_run = tuple(float(v) for v in per_run)
        return cls(
            method=method,
            epsilon=epsilon,
            runs=len(per_run),
            mean_accuracy=float(np.mean(per_run)),
            std_accuracy=float(np.std(per_run)),
            per_run=per_run,
        )

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "epsilon": self.epsilon,
            "runs": self.runs,
            "mean_accuracy": self.mean_accuracy,
            "std_accuracy": self.std_accuracy,
            "per_run": list(self.per_run),
        }


def project(model: MetricModel, x: np.ndarray) -> np.ndarray:
    """Map samples (rows of ``x``) into the learned space."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] != model.d:
        raise DimensionMismatch(
            f"expected an n x {model.d} matrix, got shape {x.shape}"
        )
    return x @ model.w.T


def _encode_labels(train_labels, test_labels) -> tuple[np.ndarray, np.ndarray]:
    classes = np.unique(np.concatenate([np.asarray(train_labels),
                                        np.asarray(test_labels)]))
    lookup = {c: k for k, c in enumerate(classes.tolist())}
    enc = lambda arr: np.array([lookup[v] for v in np.asarray(arr).tolist()])
    return enc(train_labels), enc(test_labels)


def knn_accuracy(
    model: MetricModel,
    train_x: np.ndarray,
    train_labels,
    test_x: np.ndarray,
    test_labels,
    k: int = 5,
) -> float:
    """Fraction of test points classified correctly by projected-space kNN.

    Vote ties fall back to the nearest neighbour's label; equal distances
    prefer the lower training index.
    """
    train_x = np.asarray(train_x, dtype=float)
    test_x = np.asarray(test_x, dtype=float)
    if len(train_x) == 0:
        raise EmptyTrainSet("kNN needs at least one training point")
    if not 1 <= k <= len(train_x):
        raise ValueError(f"k must lie in [1, {len(train_x)}], got {k}")
    y_train, y_test = _encode_labels(train_labels, test_labels)
    p_train = project(model, train_x)
    p_test = project(model, test_x)
    # squared distances suffice for ranking
    d2 = (
        np.sum(p_test**2, axis=1)[:, None]
        + np.sum(p_train**2, axis=1)[None, :]
        - 2.0 * p_test @ p_train.T
    )
    n_classes = int(max(y_train.max(), y_test.max())) + 1
    correct = 0
    for row in range(len(test_x)):
        nearest = np.argsort(d2[row], kind="stable")[:k]
        votes = np.bincount(y_train[nearest], minlength=n_classes)
        top = votes.max()
        winners = np.flatnonzero(votes == top)
        pred = winners[0] if len(winners) == 1 else y_train[nearest[0]]
        correct += int(pred == y_test[row])
    return correct / len(test_x)


def split_by_participation(
    samples: SampleSet, pairs: list[PairwiseDatum]
) -> tuple[np.ndarray, np.ndarray]:
    """Row indices of pair participants (train) and everyone else (test)."""
    index = samples.index_of()
    participants = sorted(
        {index[p.i] for p in pairs} | {index[p.j] for p in pairs}
    )
    mask = np.zeros(len(samples), dtype=bool)
    mask[participants] = True
    return np.flatnonzero(mask), np.flatnonzero(~mask)


def _method_config(
    method: str, base: TrainConfig, epsilon: float, seed: int
) -> TrainConfig:
    if method == "nonpriv" or method == "input_per":
        return replace(base, mechanism="none", seed=seed)
    if method == "dpp":
        return replace(
            base, mechanism="laplace", sensitivity_mode="basic",
            epsilon=epsilon, seed=seed,
        )
    if method == "dpp_s":
        return replace(
            base, mechanism="laplace", sensitivity_mode="reduced",
            epsilon=epsilon, seed=seed,
        )
    if method == "node_dp":
        return replace(
            base, mechanism="laplace", sensitivity_mode="basic",
            epsilon=epsilon, seed=seed,
        )
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")


def run_experiment(
    samples: SampleSet,
    pairs: list[PairwiseDatum],
    graph: PairGraph,
    methods,
    epsilons,
    repeats: int,
    config: TrainConfig,
    seed: int = 0,
    k: int = 5,
    kappa_default: KappaReport | None = None,
    kappa_node: KappaReport | None = None,
) -> list[ExperimentReport]:
    """Train ``repeats`` models per (method, epsilon) cell and score each.

    Seeds run ``seed + 0 .. seed + repeats - 1`` so cells are directly
    comparable; the privacy distance is computed once per distance notion
    and reused across runs (or passed in by callers that fan out cells).
    """
    if repeats < 1:
        raise ValueError(f"repeats must be >= 1, got {repeats}")
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}; expected one of {METHODS}")
    train_idx, test_idx = split_by_participation(samples, pairs)
    if len(test_idx) == 0:
        test_idx = train_idx  # every individual participates; score in-sample
    if kappa_default is None:
        kappa_default = compute_kappa(graph)
    if kappa_node is None:
        kappa_node = kappa_node_dp(graph)

    def one_run(method: str, epsilon: float, run_seed: int) -> float:
        run_pairs = pairs
        kap: KappaReport = kappa_default
        if method == "node_dp":
            kap = kappa_node
        if method == "input_per":
            rng = np.random.default_rng([1347, run_seed])
            run_pairs = input_perturb(pairs, epsilon, rng)
        cfg = _method_config(method, config, epsilon, run_seed)
        model, _ = train(run_pairs, graph, cfg, kappa_report=kap)
        return knn_accuracy(
            model,
            samples.x[train_idx],
            samples.labels[train_idx],
            samples.x[test_idx],
            samples.labels[test_idx],
            k,
        )

    reports = []
    nonpriv_cache: tuple[float, ...] | None = None
    for method in methods:
        for epsilon in epsilons:
            if method == "nonpriv" and nonpriv_cache is not None:
                reports.append(
                    ExperimentReport.from_runs(method, epsilon, nonpriv_cache)
                )
                continue
            per_run = [
                one_run(method, epsilon, seed + r) for r in range(repeats)
            ]
            if method == "nonpriv":
                nonpriv_cache = tuple(per_run)
            reports.append(ExperimentReport.from_runs(method, epsilon, per_run))
    return reports
