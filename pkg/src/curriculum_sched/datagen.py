"""Synthetic hierarchical, imbalanced classification data.

Each fine class is a Gaussian cluster. Coarse-group centroids sit on the
vertices of a simplex (scaled by ``separation``); fine centres are placed
around their group centroid. A class's ``difficulty`` pulls its centre
toward the group centroid and widens its noise, so harder classes overlap
their siblings more and have a higher Bayes error.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import asdict, dataclass, field, fields, replace
from enum import IntEnum
from pathlib import Path

import numpy as np

from .metrics import ClassTaxonomy

FINE_NAMES = ("A1", "A2", "A3", "B1", "B2", "B3", "NF")
COARSE_NAMES = ("A", "B", "NF")


class DataError(ValueError):
    """Invalid dataset specification or split request."""


class DegenerateSplitWarning(UserWarning):
    """A split ratio of zero leaves validation or test empty."""


class Split(IntEnum):
    TRAIN = 0
    VAL = 1
    TEST = 2


@dataclass(frozen=True)
class SynthSpec:
    """Generator parameters. Defaults give 7 fine classes in 3 coarse groups.

    ``difficulty_rank`` (hardest to easiest) defaults to the order of
    decreasing ``difficulty``; ``agreement`` defaults to
    ``1 - 0.5 * difficulty / max(difficulty)``.

    ``label_noise`` simulates inconsistent annotation: a train or validation
    label of class ``m`` is swapped for a random sibling in its coarse group
    with probability ``label_noise * difficulty[m] / max(difficulty)``. Test
    labels stay clean.
    """

    n_classes: int = 7
    coarse_groups: tuple[int, ...] = (0, 0, 0, 1, 1, 1, 2)
    feature_dim: int = 8
    class_counts: tuple[int, ...] = (90, 60, 30, 80, 60, 30, 200)
    difficulty: tuple[float, ...] = (1.0, 3.0, 6.0, 2.0, 4.0, 5.0, 0.0)
    split_ratios: tuple[float, float, float] = (0.7, 0.1, 0.2)
    seed: int = 0
    separation: float = 4.0
    within_radius: float = 3.0
    noise: float = 1.0
    difficulty_noise: float = 0.5
    label_noise: float = 0.0
    balanced_test: bool = True
    fine_names: tuple[str, ...] | None = None
    coarse_names: tuple[str, ...] | None = None
    agreement: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        for name in ("coarse_groups", "class_counts", "difficulty", "split_ratios",
                     "fine_names", "coarse_names", "agreement"):
            value = getattr(self, name)
            if value is not None and not isinstance(value, tuple):
                object.__setattr__(self, name, tuple(value))
        m = self.n_classes
        if m < 2:
            raise DataError("need at least two classes")
        if len(self.coarse_groups) != m or len(self.class_counts) != m or len(self.difficulty) != m:
            raise DataError("coarse_groups, class_counts and difficulty need one entry per class")
        if any(c < 1 for c in self.class_counts):
            raise DataError("every class needs at least one sample")
        if any(d < 0 for d in self.difficulty):
            raise DataError("difficulty must be non-negative")
        if len(self.split_ratios) != 3 or any(r < 0 for r in self.split_ratios):
            raise DataError("split_ratios must be three non-negative numbers")
        if abs(sum(self.split_ratios) - 1.0) > 1e-9:
            raise DataError("split_ratios must sum to 1")
        groups = sorted(set(self.coarse_groups))
        if groups != list(range(len(groups))):
            raise DataError("coarse group ids must be 0..G-1")
        if self.feature_dim < 1:
            raise DataError("feature_dim must be positive")
        if self.feature_dim < 2 and m > 2:
            raise DataError("feature_dim < 2 cannot host more than two class centres")
        if not 0.0 <= self.label_noise <= 1.0:
            raise DataError("label_noise must lie in [0, 1]")
        if self.agreement is not None and len(self.agreement) != m:
            raise DataError("agreement needs one entry per class")

    @property
    def n_coarse(self) -> int:
        return max(self.coarse_groups) + 1

    def taxonomy(self) -> ClassTaxonomy:
        m = self.n_classes
        if self.fine_names is not None:
            fine = self.fine_names
        elif m == len(FINE_NAMES):
            fine = FINE_NAMES
        else:
            fine = tuple(f"c{i}" for i in range(m))
        if self.coarse_names is not None:
            coarse = self.coarse_names
        elif self.n_coarse == len(COARSE_NAMES) and m == len(FINE_NAMES):
            coarse = COARSE_NAMES
        else:
            coarse = tuple(f"g{i}" for i in range(self.n_coarse))
        d = np.asarray(self.difficulty, dtype=np.float64)
        # stable: ties keep index order
        rank = tuple(int(i) for i in np.argsort(-d, kind="stable"))
        if self.agreement is not None:
            agreement = tuple(float(a) for a in self.agreement)
        else:
            top = d.max()
            agreement = tuple(float(1.0 - 0.5 * x / top) if top > 0 else 1.0 for x in d)
        return ClassTaxonomy(fine, coarse, self.coarse_groups, rank, agreement,
                             tuple(int(c) for c in self.class_counts))

    def to_dict(self) -> dict:
        out = asdict(self)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in out.items()}

    @classmethod
    def from_dict(cls, data: dict) -> "SynthSpec":
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise DataError(f"unknown dataset fields: {sorted(unknown)}")
        return cls(**data)


@dataclass
class LabeledDataset:
    features: np.ndarray
    labels: np.ndarray
    taxonomy: ClassTaxonomy
    split: np.ndarray = field(default=None)

    def __post_init__(self) -> None:
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.split is None:
            self.split = np.full(self.labels.shape[0], Split.TRAIN, dtype=np.int8)
        self.split = np.asarray(self.split, dtype=np.int8)
        n = self.labels.shape[0]
        if self.features.ndim != 2 or self.features.shape[0] != n or self.split.shape != (n,):
            raise DataError("features, labels and split disagree in length")
        if n and (self.labels.min() < 0 or self.labels.max() >= self.taxonomy.n_fine):
            raise DataError("label outside the taxonomy")

    def part(self, which: Split) -> tuple[np.ndarray, np.ndarray]:
        mask = self.split == which
        return self.features[mask], self.labels[mask]

    def split_sizes(self) -> dict[str, int]:
        return {s.name.lower(): int(np.sum(self.split == s)) for s in Split}

    def subset(self, mask: np.ndarray) -> "LabeledDataset":
        return LabeledDataset(self.features[mask], self.labels[mask], self.taxonomy, self.split[mask])


def _group_centroids(n_groups: int, dim: int, separation: float) -> np.ndarray:
    centroids = np.zeros((n_groups, dim))
    if dim >= n_groups:
        centroids[:, :n_groups] = np.eye(n_groups) * separation
    else:
        angles = 2 * math.pi * np.arange(n_groups) / n_groups
        centroids[:, 0] = separation * np.cos(angles)
        centroids[:, 1] = separation * np.sin(angles)
    return centroids


def class_centres(spec: SynthSpec, rng: np.random.Generator) -> np.ndarray:
    """Fine-class centres; harder classes sit closer to their group centroid."""
    groups = np.asarray(spec.coarse_groups)
    centroids = _group_centroids(spec.n_coarse, spec.feature_dim, spec.separation)
    centres = np.empty((spec.n_classes, spec.feature_dim))
    for g in range(spec.n_coarse):
        members = np.flatnonzero(groups == g)
        if len(members) == 1:
            centres[members[0]] = centroids[g]
            continue
        # evenly spread directions in a random 2-plane, so siblings are equidistant
        basis = np.linalg.qr(rng.standard_normal((spec.feature_dim, min(2, spec.feature_dim))))[0]
        phase = rng.uniform(0, 2 * math.pi)
        for j, cls in enumerate(members):
            angle = phase + 2 * math.pi * j / len(members)
            direction = basis[:, 0] * math.cos(angle)
            if basis.shape[1] > 1:
                direction = direction + basis[:, 1] * math.sin(angle)
            radius = spec.within_radius / (1.0 + spec.difficulty[cls])
            centres[cls] = centroids[g] + radius * direction
    return centres


def generate(spec: SynthSpec) -> LabeledDataset:
    """Draw the dataset and its train/val/test assignment from ``spec.seed``."""
    seq = np.random.SeedSequence(spec.seed)
    layout_rng, sample_rng, split_rng, noise_rng = (np.random.default_rng(s) for s in seq.spawn(4))
    centres = class_centres(spec, layout_rng)
    blocks, labels = [], []
    for cls, count in enumerate(spec.class_counts):
        scale = spec.noise * (1.0 + spec.difficulty_noise * spec.difficulty[cls])
        blocks.append(centres[cls] + scale * sample_rng.standard_normal((count, spec.feature_dim)))
        labels.append(np.full(count, cls, dtype=np.int64))
    X = np.vstack(blocks)
    y = np.concatenate(labels)
    perm = sample_rng.permutation(y.shape[0])
    X, y = X[perm], y[perm]
    taxonomy = spec.taxonomy()
    split = stratified_split(y, spec.split_ratios, split_rng, spec.coarse_groups, spec.balanced_test)
    if spec.label_noise > 0:
        y = _annotate(y, split, spec, noise_rng)
    return LabeledDataset(X, y, taxonomy, split)


def _annotate(y: np.ndarray, split: np.ndarray, spec: SynthSpec, rng: np.random.Generator) -> np.ndarray:
    d = np.asarray(spec.difficulty, dtype=np.float64)
    if d.max() <= 0:
        return y
    flip = spec.label_noise * d / d.max()
    groups = np.asarray(spec.coarse_groups)
    draws = rng.random(y.shape[0])
    picks = rng.random(y.shape[0])
    out = y.copy()
    for i in np.flatnonzero((split != Split.TEST) & (draws < flip[y])):
        siblings = np.flatnonzero((groups == groups[y[i]]) & (np.arange(spec.n_classes) != y[i]))
        if siblings.size == 0:
            siblings = np.flatnonzero(np.arange(spec.n_classes) != y[i])
        out[i] = siblings[int(picks[i] * siblings.size)]
    return out


def _apportion(n: int, ratios) -> list[int]:
    # largest remainder; ties go to the earlier split
    raw = [n * r for r in ratios]
    base = [int(math.floor(x + 1e-9)) for x in raw]
    rest = n - sum(base)
    order = sorted(range(len(ratios)), key=lambda i: (-(raw[i] - base[i]), i))
    for i in order[:rest]:
        base[i] += 1
    return base


def stratified_split(
    labels: np.ndarray,
    ratios,
    rng: np.random.Generator,
    coarse_groups=None,
    balanced_test: bool = False,
) -> np.ndarray:
    """Per-class proportional train/val/test assignment.

    With ``balanced_test`` the test split is cut down to the same size for
    every coarse group; the surplus test samples move to training so every
    sample keeps exactly one split.
    """
    labels = np.asarray(labels, dtype=np.int64)
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or abs(sum(ratios) - 1.0) > 1e-9 or any(r < 0 for r in ratios):
        raise DataError("ratios must be three non-negative numbers summing to 1")
    if ratios[1] == 0 or ratios[2] == 0:
        warnings.warn("a zero split ratio leaves validation or test empty", DegenerateSplitWarning,
                      stacklevel=2)
    split = np.empty(labels.shape[0], dtype=np.int8)
    test_by_class: dict[int, np.ndarray] = {}
    for cls in np.unique(labels):
        members = np.flatnonzero(labels == cls)
        rng.shuffle(members)
        n_train, n_val, n_test = _apportion(len(members), ratios)
        for count, ratio in zip((n_train, n_val, n_test), ratios):
            if ratio > 0 and count == 0:
                raise DataError(f"class {cls} with {len(members)} samples cannot fill every split")
        split[members[:n_train]] = Split.TRAIN
        split[members[n_train:n_train + n_val]] = Split.VAL
        split[members[n_train + n_val:]] = Split.TEST
        test_by_class[int(cls)] = members[n_train + n_val:]

    if balanced_test and ratios[2] > 0:
        if coarse_groups is None:
            raise DataError("balanced_test needs the coarse grouping")
        groups = np.asarray(coarse_groups)
        present = sorted({int(groups[c]) for c in test_by_class})
        per_group = {g: sum(len(test_by_class[c]) for c in test_by_class if groups[c] == g)
                     for g in present}
        target = min(per_group.values())
        for g in present:
            classes = [c for c in sorted(test_by_class) if groups[c] == g]
            sizes = [len(test_by_class[c]) for c in classes]
            keep = _apportion(target, [s / per_group[g] for s in sizes])
            for c, k in zip(classes, keep):
                split[test_by_class[c][k:]] = Split.TRAIN
    return split


def restrict_training(dataset: LabeledDataset, fraction: float, rng: np.random.Generator) -> LabeledDataset:
    """Keep ``ceil(fraction * n_train)`` training samples, stratified by class.

    Validation and test samples are untouched; dropped training samples are
    removed from the returned dataset.
    """
    if not 0.0 < fraction <= 1.0:
        raise DataError("fraction must lie in (0, 1]")
    if fraction == 1.0:
        return dataset
    train_idx = np.flatnonzero(dataset.split == Split.TRAIN)
    y = dataset.labels[train_idx]
    classes, counts = np.unique(y, return_counts=True)
    total = math.ceil(fraction * len(train_idx) - 1e-9)
    keep_counts = _apportion(total, counts / counts.sum())
    keep = np.ones(dataset.labels.shape[0], dtype=bool)
    for cls, k in zip(classes, keep_counts):
        if k == 0:
            raise DataError(f"fraction {fraction} leaves class {cls} without training samples")
        members = train_idx[y == cls]
        members = members[rng.permutation(len(members))]
        keep[members[k:]] = False
    return dataset.subset(keep)


def save_csv(dataset: LabeledDataset, path) -> Path:
    """Write ``split,label,f0..fD`` rows plus a ``<stem>.taxonomy.json`` sidecar."""
    path = Path(path)
    dim = dataset.features.shape[1]
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["split", "label", *(f"f{j}" for j in range(dim))])
        for s, lab, row in zip(dataset.split, dataset.labels, dataset.features):
            writer.writerow([Split(int(s)).name.lower(), int(lab), *(repr(float(v)) for v in row)])
    taxonomy_path(path).write_text(json.dumps(dataset.taxonomy.to_dict(), indent=2) + "\n", encoding="utf-8")
    return path


def taxonomy_path(csv_path) -> Path:
    p = Path(csv_path)
    return p.with_name(p.stem + ".taxonomy.json")


def load_csv(path) -> LabeledDataset:
    path = Path(path)
    taxonomy = ClassTaxonomy.from_dict(json.loads(taxonomy_path(path).read_text(encoding="utf-8")))
    splits, labels, rows = [], [], []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:2] != ["split", "label"]:
            raise DataError(f"{path}: unexpected header {header[:2]}")
        for rec in reader:
            splits.append(Split[rec[0].upper()])
            labels.append(int(rec[1]))
            rows.append([float(v) for v in rec[2:]])
    return LabeledDataset(np.array(rows), np.array(labels), taxonomy, np.array(splits, dtype=np.int8))


def with_seed(spec: SynthSpec, seed: int) -> SynthSpec:
    return replace(spec, seed=seed)
