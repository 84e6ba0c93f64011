"""Dataset generation and ingestion.

Covers the synthetic two-strip benchmark, per-sample norm capping, pair
sampling at a controlled graph density, class rebalancing, and CSV
ingestion for externally prepared datasets (categorical columns must be
pre-encoded numerically).
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass

import numpy as np

from .errors import (
    InfeasibleBalance,
    InfeasibleDensity,
    MissingLabelColumn,
    ParseError,
    SingleClass,
)
from .pairgraph import PairwiseDatum

logger = logging.getLogger(__name__)

# Toy strip geometry: two parallel Gaussian strips, long axis along x,
# offset along y. Scaled so typical samples already satisfy the l1 cap, the
# gap direction dominates the dissimilar-pair differences (so the hinge
# stretches the right axis), and projected distances can actually reach a
# unit margin within a short training run.
TOY_MEAN_A = (0.08, 0.08)
TOY_MEAN_B = (0.08, 0.78)
TOY_STD = (0.035, 0.012)
TOY_SEPARATION_RATIO = (TOY_MEAN_B[1] - TOY_MEAN_A[1]) / TOY_STD[1]

#: Per-sample l1 cap after normalisation (kept strictly below 1).
L1_CAP = 1.0 - 1e-6


@dataclass
class SampleSet:
    """Feature matrix with class labels and node ids, one row per individual."""

    x: np.ndarray
    labels: np.ndarray
    ids: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.labels = np.asarray(self.labels)
        self.ids = np.asarray(self.ids)
        if not (len(self.x) == len(self.labels) == len(self.ids)):
            raise ValueError(
                f"inconsistent lengths: {len(self.x)} rows, "
                f"{len(self.labels)} labels, {len(self.ids)} ids"
            )

    def __len__(self) -> int:
        return len(self.x)

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    def index_of(self) -> dict:
        return {i: k for k, i in enumerate(self.ids.tolist())}


def synth_two_gaussians(n_per_class: int, seed: int = 0) -> SampleSet:
    """Two anisotropic Gaussian strips with parallel major axes."""
    if n_per_class < 1:
        raise ValueError(f"n_per_class must be >= 1, got {n_per_class}")
    rng = np.random.default_rng(seed)
    a = rng.normal(TOY_MEAN_A, TOY_STD, size=(n_per_class, 2))
    b = rng.normal(TOY_MEAN_B, TOY_STD, size=(n_per_class, 2))
    x = np.vstack([a, b])
    labels = np.concatenate(
        [np.zeros(n_per_class, dtype=int), np.ones(n_per_class, dtype=int)]
    )
    ids = np.arange(2 * n_per_class)
    return SampleSet(x, labels, ids)


def normalize(samples: SampleSet, mode: str = "l1") -> SampleSet:
    """Cap each row's norm (l1 strictly below 1, l2 at 1); idempotent.

    Rows already inside the cap pass through unchanged; all-zero rows stay
    zero with a warning.
    """
    if mode not in ("l1", "l2"):
        raise ValueError(f"mode must be 'l1' or 'l2', got {mode!r}")
    x = samples.x.copy()
    cap = L1_CAP if mode == "l1" else 1.0
    norm_of = (
        (lambda m: np.abs(m).sum(axis=1))
        if mode == "l1"
        else (lambda m: np.linalg.norm(m, axis=1))
    )
    norms = norm_of(x)
    if np.any(norms == 0):
        logger.warning(
            "normalize: %d all-zero rows left unscaled", int(np.sum(norms == 0))
        )
    # a second pass absorbs one-ulp overshoot so the operation is idempotent
    while True:
        over = norms > cap
        if not np.any(over):
            break
        x[over] *= (cap / norms[over])[:, None]
        norms = norm_of(x)
    return SampleSet(x, samples.labels.copy(), samples.ids.copy())


def _pair_datum(samples: SampleSet, a: int, b: int) -> PairwiseDatum:
    """Pair between row indices a < b; label 0 iff same class."""
    y = 0 if samples.labels[a] == samples.labels[b] else 1
    return PairwiseDatum(
        samples.ids[a].item() if hasattr(samples.ids[a], "item") else samples.ids[a],
        samples.ids[b].item() if hasattr(samples.ids[b], "item") else samples.ids[b],
        samples.x[a] - samples.x[b],
        y,
    )


def sample_pairs(
    samples: SampleSet,
    density: float,
    balance: bool = False,
    seed: int = 0,
) -> list[PairwiseDatum]:
    """Uniformly sample unordered pairs until edges-per-participant hits
    ``density``.

    The participant count only includes individuals that appear in some
    sampled pair. With ``balance`` the same- and different-class pair counts
    are kept equal.
    """
    n = len(samples)
    if n < 2 or density > (n - 1) / 2:
        raise InfeasibleDensity(
            f"density {density} infeasible for {n} samples "
            f"(max {(n - 1) / 2 if n >= 2 else 0})"
        )
    if not density > 0:
        raise InfeasibleDensity(f"density must be positive, got {density}")
    rng = np.random.default_rng(seed)
    total_possible = n * (n - 1) // 2
    seen: set[tuple[int, int]] = set()
    skipped: set[tuple[int, int]] = set()
    chosen: list[tuple[int, int]] = []
    nodes: set[int] = set()
    counts = [0, 0]

    def satisfied() -> bool:
        if not chosen:
            return False
        if balance and counts[0] != counts[1]:
            return False
        return len(chosen) >= round(density * len(nodes))

    while not satisfied():
        if len(seen) + len(skipped) >= total_possible:
            if balance and counts[0] != counts[1]:
                raise InfeasibleBalance(
                    f"ran out of pairs at counts {counts[0]}/{counts[1]}"
                )
            raise InfeasibleDensity(
                f"exhausted all {total_possible} pairs before reaching "
                f"density {density}"
            )
        a = int(rng.integers(n))
        b = int(rng.integers(n))
        if a == b:
            continue
        key = (a, b) if a < b else (b, a)
        if key in seen or key in skipped:
            continue
        y = 0 if samples.labels[key[0]] == samples.labels[key[1]] else 1
        if balance and counts[y] > counts[1 - y]:
            skipped.add(key)
            continue
        seen.add(key)
        chosen.append(key)
        counts[y] += 1
        nodes.update(key)
        skipped.clear()  # class eligibility may have flipped
    return [_pair_datum(samples, a, b) for a, b in chosen]


def toy_pairs(
    samples: SampleSet,
    intra_per_class: int = 50,
    inter: int = 50,
    seed: int = 0,
) -> list[PairwiseDatum]:
    """Acyclic toy pair selection: a chain inside each class plus an
    inter-class star.

    The star centre is the first-class sample closest to its class mean
    (an off-centre hub would tilt every inter-class difference along the
    strip axis); one spoke joins the other class's chain and the rest
    attach fresh nodes, so the whole selection stays a forest (privacy
    distance 1).
    """
    classes = sorted(set(samples.labels.tolist()))
    if len(classes) != 2:
        raise InfeasibleDensity(
            f"toy selection needs exactly 2 classes, got {len(classes)}"
        )
    rng = np.random.default_rng(seed)
    idx_a = np.flatnonzero(samples.labels == classes[0])
    idx_b = np.flatnonzero(samples.labels == classes[1])
    if len(idx_a) < intra_per_class + 1:
        raise InfeasibleDensity(
            f"class {classes[0]!r} needs {intra_per_class + 1} samples for the chain"
        )
    if len(idx_b) < intra_per_class + inter:
        raise InfeasibleDensity(
            f"class {classes[1]!r} needs {intra_per_class + inter} samples "
            "for the chain plus fresh star targets"
        )
    mean_a = samples.x[idx_a].mean(axis=0)
    centre = int(idx_a[np.argmin(np.linalg.norm(samples.x[idx_a] - mean_a, axis=1))])
    perm_a = np.concatenate(
        [[centre], rng.permutation([i for i in idx_a if i != centre])]
    )
    perm_b = rng.permutation(idx_b)
    pairs = []
    for k in range(intra_per_class):
        pairs.append(_pair_datum(samples, int(perm_a[k]), int(perm_a[k + 1])))
        pairs.append(_pair_datum(samples, int(perm_b[k]), int(perm_b[k + 1])))
    targets = [int(perm_b[0])] + [
        int(v) for v in perm_b[intra_per_class + 1 : intra_per_class + inter]
    ]
    for t in targets:
        pairs.append(_pair_datum(samples, centre, t))
    return pairs


def downsample_majority(samples: SampleSet, seed: int = 0) -> SampleSet:
    """Randomly subsample every larger class down to the minority size."""
    classes, counts = np.unique(samples.labels, return_counts=True)
    if len(classes) < 2:
        raise SingleClass("rebalancing needs at least two classes")
    target = int(counts.min())
    rng = np.random.default_rng(seed)
    keep: list[int] = []
    for cls in classes:
        members = np.flatnonzero(samples.labels == cls)
        if len(members) > target:
            members = rng.choice(members, size=target, replace=False)
        keep.extend(int(v) for v in members)
    keep.sort()
    return SampleSet(samples.x[keep], samples.labels[keep], samples.ids[keep])


# --- samples CSV ------------------------------------------------------------
#
# Header row required: optional id column, a named label column, remaining
# columns are numeric features.


def load_csv(
    path,
    label_col: str = "label",
    id_col: str = "id",
    delimiter: str = ",",
) -> SampleSet:
    """Load samples from delimited text with a header row."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty samples file", row=1) from None
        header = [c.strip() for c in header]
        if label_col not in header:
            raise MissingLabelColumn(
                f"samples file lacks label column {label_col!r} "
                f"(columns: {header})"
            )
        label_idx = header.index(label_col)
        id_idx = header.index(id_col) if id_col in header else None
        feat_idx = [
            k for k in range(len(header)) if k != label_idx and k != id_idx
        ]
        rows, labels, ids = [], [], []
        for rownum, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ParseError(
                    f"row {rownum}: expected {len(header)} columns, got {len(row)}",
                    row=rownum,
                )
            feats = []
            for k in feat_idx:
                try:
                    feats.append(float(row[k]))
                except ValueError:
                    raise ParseError(
                        f"row {rownum}, col {k + 1}: feature {row[k]!r} "
                        "is not numeric",
                        row=rownum,
                        col=k + 1,
                    ) from None
            rows.append(feats)
            labels.append(_parse_label(row[label_idx]))
            if id_idx is not None:
                ids.append(_parse_id(row[id_idx]))
            else:
                ids.append(rownum - 2)
    if not rows:
        raise ParseError("samples file has a header but no data rows", row=2)
    return SampleSet(np.array(rows), np.array(labels), np.array(ids))


def _parse_label(cell: str):
    cell = cell.strip()
    try:
        return int(float(cell))
    except ValueError:
        return cell


def _parse_id(cell: str):
    cell = cell.strip()
    try:
        return int(cell)
    except ValueError:
        return cell


def save_samples_csv(path, samples: SampleSet, delimiter: str = ",") -> None:
    """Write samples in the format ``load_csv`` accepts."""
    d = samples.dim
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, delimiter=delimiter)
        writer.writerow(["id", "label"] + [f"f{k + 1}" for k in range(d)])
        for k in range(len(samples)):
            writer.writerow(
                [samples.ids[k], samples.labels[k]]
                + [repr(float(v)) for v in samples.x[k]]
            )
