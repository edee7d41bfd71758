"""Curriculum probabilities, decay toward uniform, and epoch reordering.

A curriculum assigns each class a weight; every training sample inherits its
class weight split evenly among the class members. At the start of each
epoch the per-sample probabilities are flattened by

.. math::

    q_i = p_i \\exp(-c_i^2 / s), \\qquad p'_i = q_i / \\sum_j q_j

where ``c_i`` counts how often sample ``i`` was selected and ``s`` is the
decay scale (10 by default), and the epoch order is drawn from the result.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from . import kernels

EXPONENT_CAP = 700.0
UNDERFLOW_FLOOR = 1e-300
SNAPSHOT_FORMAT = "curriculum-scheduler-state"
SNAPSHOT_VERSION = 1


class SchedulerError(ValueError):
    """Invalid curriculum specification or scheduler state."""


class NumericDegeneracyError(SchedulerError):
    """The decayed probability mass underflowed."""


class Scheme(str, Enum):
    UNIFORM = "uniform"
    FREQUENCY = "frequency"
    RANK = "rank"
    AGREEMENT = "agreement"


class Direction(str, Enum):
    CURRICULUM = "curriculum"
    ANTI_CURRICULUM = "anti_curriculum"


class SamplingMode(str, Enum):
    WITH_REPLACEMENT = "with_replacement"
    WITHOUT_REPLACEMENT = "without_replacement"


class CounterWindow(str, Enum):
    """Which counts feed the decay exponent.

    ``EPOCH`` uses the selections made since the previous decay step;
    ``CUMULATIVE`` uses the lifetime counter. The cumulative form is unstable
    under sampling with replacement (the feedback gain grows with the
    counter) and concentrates the distribution on a few samples.
    """

    EPOCH = "epoch"
    CUMULATIVE = "cumulative"


class CountUnit(str, Enum):
    """How one epoch's draws advance a sample's counter."""

    MEMBERSHIP = "membership"  # +1 if drawn at least once
    DRAW = "draw"  # +1 per draw


@dataclass(frozen=True)
class CurriculumSpec:
    """Weighting scheme, its parameters and direction."""

    scheme: Scheme
    direction: Direction = Direction.CURRICULUM
    rank_order: tuple[int, ...] | None = None
    agreement_scores: tuple[float, ...] | None = None
    decay_scale: float = 10.0
    counter_window: CounterWindow = CounterWindow.EPOCH
    count_unit: CountUnit = CountUnit.MEMBERSHIP

    def __post_init__(self) -> None:
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        object.__setattr__(self, "direction", Direction(self.direction))
        object.__setattr__(self, "counter_window", CounterWindow(self.counter_window))
        object.__setattr__(self, "count_unit", CountUnit(self.count_unit))
        if not (math.isfinite(self.decay_scale) and self.decay_scale > 0):
            raise SchedulerError(f"decay_scale must be positive, got {self.decay_scale}")
        if self.rank_order is not None:
            order = tuple(int(i) for i in self.rank_order)
            if sorted(order) != list(range(len(order))):
                raise SchedulerError(f"rank_order is not a permutation: {order}")
            object.__setattr__(self, "rank_order", order)
        if self.agreement_scores is not None:
            scores = tuple(float(s) for s in self.agreement_scores)
            if any(not (0.0 <= s <= 1.0) for s in scores):
                raise SchedulerError(f"agreement scores must lie in [0, 1]: {scores}")
            if not any(s > 0 for s in scores):
                raise SchedulerError("agreement scores are all zero")
            object.__setattr__(self, "agreement_scores", scores)
        if self.scheme is Scheme.RANK and self.rank_order is None:
            raise SchedulerError("rank scheme requires rank_order")
        if self.scheme is Scheme.AGREEMENT and self.agreement_scores is None:
            raise SchedulerError("agreement scheme requires agreement_scores")

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme.value,
            "direction": self.direction.value,
            "rank_order": list(self.rank_order) if self.rank_order is not None else None,
            "agreement_scores": (
                list(self.agreement_scores) if self.agreement_scores is not None else None
            ),
            "decay_scale": self.decay_scale,
            "counter_window": self.counter_window.value,
            "count_unit": self.count_unit.value,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CurriculumSpec":
        known = {
            "scheme", "direction", "rank_order", "agreement_scores",
            "decay_scale", "counter_window", "count_unit",
        }
        unknown = set(data) - known
        if unknown:
            raise SchedulerError(f"unknown curriculum fields: {sorted(unknown)}")
        kwargs = {k: v for k, v in data.items() if v is not None}
        for key in ("rank_order", "agreement_scores"):
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
        return cls(**kwargs)


@dataclass
class SchedulerState:
    """Per-sample probabilities, selection counters and epoch index.

    ``window_start`` holds the counters as they were at the last decay step,
    so the epoch-window decay can read the selections made since.
    """

    probabilities: np.ndarray
    counters: np.ndarray
    epoch: int = 0
    window_start: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.probabilities = np.asarray(self.probabilities, dtype=np.float64)
        self.counters = np.asarray(self.counters, dtype=np.int64)
        n = self.probabilities.shape[0]
        if self.probabilities.ndim != 1 or n == 0:
            raise SchedulerError("probabilities must be a non-empty vector")
        if self.counters.shape != (n,):
            raise SchedulerError("counters must match probabilities in length")
        if np.any(self.probabilities < 0) or not np.all(np.isfinite(self.probabilities)):
            raise SchedulerError("probabilities must be finite and non-negative")
        if abs(float(self.probabilities.sum()) - 1.0) > 1e-9:
            raise SchedulerError("probabilities must sum to 1")
        if np.any(self.counters < 0):
            raise SchedulerError("counters must be non-negative")
        if self.epoch < 0:
            raise SchedulerError("epoch must be non-negative")
        if self.window_start is None:
            self.window_start = np.zeros(n, dtype=np.int64)
        else:
            self.window_start = np.asarray(self.window_start, dtype=np.int64)
            if self.window_start.shape != (n,) or np.any(self.window_start > self.counters):
                raise SchedulerError("window_start must not exceed counters")

    @property
    def size(self) -> int:
        return int(self.probabilities.shape[0])

    def copy(self) -> "SchedulerState":
        return SchedulerState(
            self.probabilities.copy(), self.counters.copy(), self.epoch, self.window_start.copy()
        )

    def to_json(self) -> str:
        """Serialise to a JSON snapshot; floats use shortest round-trip repr."""
        payload = {
            "format": SNAPSHOT_FORMAT,
            "version": SNAPSHOT_VERSION,
            "epoch": self.epoch,
            "probabilities": [float(x) for x in self.probabilities],
            "counters": [int(x) for x in self.counters],
            "window_start": [int(x) for x in self.window_start],
        }
        return json.dumps(payload)

    @classmethod
    def from_json(cls, text: str) -> "SchedulerState":
        data = json.loads(text)
        if data.get("format") != SNAPSHOT_FORMAT:
            raise SchedulerError("not a scheduler snapshot")
        if data.get("version") != SNAPSHOT_VERSION:
            raise SchedulerError(f"unsupported snapshot version {data.get('version')}")
        return cls(
            np.array(data["probabilities"], dtype=np.float64),
            np.array(data["counters"], dtype=np.int64),
            int(data["epoch"]),
            np.array(data["window_start"], dtype=np.int64),
        )


@dataclass(frozen=True)
class EpochOrder:
    """Sequence of dataset indices consumed by one epoch."""

    indices: np.ndarray
    with_replacement: bool

    def __post_init__(self) -> None:
        idx = np.asarray(self.indices, dtype=np.int64)
        object.__setattr__(self, "indices", idx)
        n = idx.shape[0]
        if idx.ndim != 1 or n == 0:
            raise SchedulerError("epoch order must be a non-empty vector")
        if idx.min() < 0 or idx.max() >= n:
            raise SchedulerError("epoch order index out of range")
        if not self.with_replacement and np.any(np.bincount(idx, minlength=n) != 1):
            raise SchedulerError("without-replacement order is not a permutation")

    def __len__(self) -> int:
        return int(self.indices.shape[0])


def class_weights(spec: CurriculumSpec, class_counts: Sequence[int]) -> np.ndarray:
    """Per-class curriculum weights summing to one.

    For the anti-curriculum, rank orders are reversed; frequency and
    agreement weights are mirrored as ``max + min - w`` over the classes that
    carry mass, then renormalised.
    """
    counts = np.asarray(class_counts, dtype=np.int64)
    m = counts.shape[0]
    if m < 2:
        raise SchedulerError("need at least two classes")
    if np.any(counts < 0) or counts.sum() <= 0:
        raise SchedulerError("class counts must be non-negative with a positive total")

    anti = spec.direction is Direction.ANTI_CURRICULUM
    if spec.scheme is Scheme.UNIFORM:
        return np.full(m, 1.0 / m)
    if spec.scheme is Scheme.RANK:
        order = list(spec.rank_order)
        if len(order) != m:
            raise SchedulerError(f"rank_order covers {len(order)} classes, expected {m}")
        if anti:
            order = order[::-1]
        w = np.empty(m)
        # position 0 is the hardest class and gets rank 1
        for k, cls in enumerate(order, start=1):
            w[cls] = k
        return w / (m * (m + 1) / 2)

    if spec.scheme is Scheme.FREQUENCY:
        w = counts / counts.sum()
    else:
        scores = np.asarray(spec.agreement_scores, dtype=np.float64)
        if scores.shape[0] != m:
            raise SchedulerError(f"agreement_scores covers {scores.shape[0]} classes, expected {m}")
        w = scores / scores.sum()
    if anti:
        live = w > 0
        mirrored = np.zeros(m)
        mirrored[live] = w[live].max() + w[live].min() - w[live]
        w = mirrored / mirrored.sum()
    return w


def init_probabilities(
    weights: Sequence[float], labels: Sequence[int], n_classes: int | None = None
) -> SchedulerState:
    """Initial per-sample probabilities carrying class mass ``weights[m]``."""
    w = np.asarray(weights, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if y.size == 0:
        raise SchedulerError("empty dataset")
    m = w.shape[0] if n_classes is None else n_classes
    if w.shape[0] != m:
        raise SchedulerError("weights length does not match class count")
    if np.any(w < 0) or abs(float(w.sum()) - 1.0) > 1e-9:
        raise SchedulerError("weights must be non-negative and sum to 1")
    if y.min() < 0 or y.max() >= m:
        raise SchedulerError("label outside the class range")
    counts = np.bincount(y, minlength=m)
    empty = (w > 0) & (counts == 0)
    if np.any(empty):
        raise SchedulerError(f"classes {np.flatnonzero(empty).tolist()} have weight but no samples")
    p = w[y] / counts[y]
    p = p / p.sum()
    return SchedulerState(p, np.zeros(y.size, dtype=np.int64), 0)


def decay_step(
    state: SchedulerState,
    decay_scale: float = 10.0,
    window: CounterWindow | str = CounterWindow.EPOCH,
) -> SchedulerState:
    """Flatten the probabilities by the selection counts and advance the epoch."""
    if not decay_scale > 0:
        raise SchedulerError("decay_scale must be positive")
    window = CounterWindow(window)
    if window is CounterWindow.EPOCH:
        counts = state.counters - state.window_start
    else:
        counts = state.counters
    p, total = kernels.decay_probabilities(
        np.ascontiguousarray(state.probabilities),
        np.ascontiguousarray(counts, dtype=np.float64),
        float(decay_scale),
        EXPONENT_CAP,
    )
    if not total >= UNDERFLOW_FLOOR:
        raise NumericDegeneracyError(f"decayed mass underflowed (sum q = {total:.3g})")
    return SchedulerState(p, state.counters.copy(), state.epoch + 1, state.counters.copy())


def draw_epoch_order(
    state: SchedulerState,
    rng: np.random.Generator,
    mode: SamplingMode | str = SamplingMode.WITH_REPLACEMENT,
    count_unit: CountUnit | str = CountUnit.MEMBERSHIP,
) -> tuple[EpochOrder, SchedulerState]:
    """Draw the epoch's training order according to ``state.probabilities``."""
    mode = SamplingMode(mode)
    count_unit = CountUnit(count_unit)
    p = np.ascontiguousarray(state.probabilities)
    if not np.any(p > 0):
        raise SchedulerError("all probabilities are zero")
    n = state.size
    u = rng.random(n)
    if mode is SamplingMode.WITH_REPLACEMENT:
        idx = kernels.categorical_draws(p, u)
    else:
        idx = kernels.weighted_permutation(p, u)
    hits = np.bincount(idx, minlength=n)
    if count_unit is CountUnit.MEMBERSHIP:
        hits = (hits > 0).astype(np.int64)
    new_state = SchedulerState(
        p.copy(), state.counters + hits, state.epoch, state.window_start.copy()
    )
    return EpochOrder(idx, mode is SamplingMode.WITH_REPLACEMENT), new_state


class CurriculumScheduler:
    """Drives one run's scheduler state from epoch to epoch.

    The first call to :meth:`next_order` draws from the initial
    probabilities; every later call decays first.
    """

    def __init__(
        self,
        spec: CurriculumSpec,
        labels: Sequence[int],
        n_classes: int,
        mode: SamplingMode | str = SamplingMode.WITH_REPLACEMENT,
    ) -> None:
        self.spec = spec
        self.mode = SamplingMode(mode)
        y = np.asarray(labels, dtype=np.int64)
        counts = np.bincount(y, minlength=n_classes)
        self.weights = class_weights(spec, counts)
        self.state = init_probabilities(self.weights, y, n_classes)
        self._drawn = False

    def next_order(self, rng: np.random.Generator) -> EpochOrder:
        if self._drawn:
            self.state = decay_step(self.state, self.spec.decay_scale, self.spec.counter_window)
        order, self.state = draw_epoch_order(self.state, rng, self.mode, self.spec.count_unit)
        self._drawn = True
        return order
