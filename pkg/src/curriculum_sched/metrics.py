"""Evaluation metrics and significance testing.

Confusion matrices, support-weighted F1, Cohen's kappa, fine-to-coarse
posterior aggregation and the paired Student t-test. The t distribution
CDF is evaluated through the regularized incomplete beta function
(continued fraction, modified Lentz), accurate to ~1e-14 in double
precision.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

CONFUSION_CSV_HEADER_PREFIX = "true\\pred"


class DegenerateAgreementError(ValueError):
    """Chance agreement is 1 while observed agreement is not."""


@dataclass(frozen=True)
class ClassTaxonomy:
    """Fine class names with their coarse grouping and curriculum metadata.

    ``difficulty_rank`` lists fine class indices from hardest to easiest.
    """

    fine_classes: tuple[str, ...]
    coarse_classes: tuple[str, ...]
    coarse_groups: tuple[int, ...]
    difficulty_rank: tuple[int, ...]
    agreement: tuple[float, ...]
    frequencies: tuple[int, ...]

    def __post_init__(self) -> None:
        m = len(self.fine_classes)
        for name in ("coarse_groups", "agreement", "frequencies"):
            if len(getattr(self, name)) != m:
                raise ValueError(f"{name} must have one entry per fine class")
        if sorted(self.difficulty_rank) != list(range(m)):
            raise ValueError("difficulty_rank must be a permutation of the fine classes")
        if any(not 0 <= g < len(self.coarse_classes) for g in self.coarse_groups):
            raise ValueError("coarse group index out of range")
        if any(not 0.0 <= a <= 1.0 for a in self.agreement):
            raise ValueError("agreement values must lie in [0, 1]")

    @property
    def n_fine(self) -> int:
        return len(self.fine_classes)

    @property
    def n_coarse(self) -> int:
        return len(self.coarse_classes)

    def to_dict(self) -> dict:
        return {
            "fine_classes": list(self.fine_classes),
            "coarse_classes": list(self.coarse_classes),
            "coarse_groups": list(self.coarse_groups),
            "difficulty_rank": list(self.difficulty_rank),
            "agreement": list(self.agreement),
            "frequencies": list(self.frequencies),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ClassTaxonomy":
        return cls(
            tuple(data["fine_classes"]),
            tuple(data["coarse_classes"]),
            tuple(int(g) for g in data["coarse_groups"]),
            tuple(int(i) for i in data["difficulty_rank"]),
            tuple(float(a) for a in data["agreement"]),
            tuple(int(c) for c in data["frequencies"]),
        )


def _labels(values: Sequence[int], n_classes: int, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.int64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be a vector")
    if arr.size and (arr.min() < 0 or arr.max() >= n_classes):
        raise ValueError(f"{name} contains a label outside [0, {n_classes})")
    return arr


def confusion_matrix(truth: Sequence[int], predicted: Sequence[int], n_classes: int) -> np.ndarray:
    """Counts with rows = true class, columns = predicted class."""
    t = _labels(truth, n_classes, "truth")
    p = _labels(predicted, n_classes, "predicted")
    if t.shape != p.shape:
        raise ValueError("truth and predicted differ in length")
    return np.bincount(t * n_classes + p, minlength=n_classes * n_classes).reshape(
        n_classes, n_classes
    )


def per_class_f1(cm: np.ndarray) -> np.ndarray:
    tp = np.diag(cm).astype(np.float64)
    pred_tot = cm.sum(axis=0)
    true_tot = cm.sum(axis=1)
    # F1 = 2TP / (2TP + FP + FN); zero when the class is never true nor predicted
    denom = pred_tot + true_tot
    out = np.zeros(cm.shape[0])
    mask = denom > 0
    out[mask] = 2.0 * tp[mask] / denom[mask]
    return out


def weighted_f1(truth: Sequence[int], predicted: Sequence[int], n_classes: int) -> float:
    """F1 averaged over classes with weights equal to their support in ``truth``."""
    cm = confusion_matrix(truth, predicted, n_classes)
    support = cm.sum(axis=1)
    total = support.sum()
    if total == 0:
        raise ValueError("empty label vectors")
    return float(np.dot(per_class_f1(cm), support) / total)


def cohens_kappa(ratings_a: Sequence[int], ratings_b: Sequence[int], n_classes: int) -> float:
    cm = confusion_matrix(ratings_a, ratings_b, n_classes).astype(np.float64)
    n = cm.sum()
    if n == 0:
        raise ValueError("empty rating vectors")
    p_o = np.trace(cm) / n
    p_e = float(np.dot(cm.sum(axis=1), cm.sum(axis=0)) / (n * n))
    if p_e == 1.0:
        if p_o == 1.0:
            return 1.0
        raise DegenerateAgreementError("chance agreement is 1 but observed agreement is not")
    return float((p_o - p_e) / (1.0 - p_e))


def aggregate_posterior(posterior: np.ndarray, coarse_groups: Sequence[int], n_coarse: int | None = None) -> np.ndarray:
    """Sum fine-class probabilities into their coarse groups.

    Works on a single posterior vector or a batch (rows are samples).
    """
    p = np.asarray(posterior, dtype=np.float64)
    groups = np.asarray(coarse_groups, dtype=np.int64)
    if p.shape[-1] != groups.shape[0]:
        raise ValueError("taxonomy does not cover every fine class")
    g = int(groups.max()) + 1 if n_coarse is None else n_coarse
    onehot = np.zeros((groups.shape[0], g))
    onehot[np.arange(groups.shape[0]), groups] = 1.0
    return p @ onehot


def within_group_misprediction_rate(
    truth: Sequence[int], predicted: Sequence[int], coarse_groups: Sequence[int]
) -> float:
    """Share of fine mispredictions that stay inside the true coarse group.

    Returns NaN when there are no mispredictions.
    """
    t = np.asarray(truth, dtype=np.int64)
    p = np.asarray(predicted, dtype=np.int64)
    groups = np.asarray(coarse_groups, dtype=np.int64)
    wrong = t != p
    if not wrong.any():
        return float("nan")
    return float(np.mean(groups[t[wrong]] == groups[p[wrong]]))


def confusion_to_csv(cm: np.ndarray, class_names: Sequence[str] | None = None) -> str:
    """Header ``true\\pred,<names...>``; one row per true class."""
    m = cm.shape[0]
    names = list(class_names) if class_names is not None else [str(i) for i in range(m)]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([CONFUSION_CSV_HEADER_PREFIX, *names])
    for i in range(m):
        writer.writerow([names[i], *(int(x) for x in cm[i])])
    return buf.getvalue()


# -- Student t via the regularized incomplete beta ---------------------------

_EPS = 1e-16
_TINY = 1e-300


def _betacf(a: float, b: float, x: float) -> float:
    # continued fraction for I_x(a, b), modified Lentz
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, 10000):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) for a, b > 0 and 0 <= x <= 1."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if x == 0.0 or x == 1.0:
        return x
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def student_t_sf_two_sided(t: float, df: float) -> float:
    """P(|T| >= |t|) for Student's t with ``df`` degrees of freedom."""
    if df <= 0:
        raise ValueError("degrees of freedom must be positive")
    if math.isinf(t):
        return 0.0
    x = df / (df + t * t)
    return regularized_incomplete_beta(df / 2.0, 0.5, x)


def student_t_cdf(t: float, df: float) -> float:
    tail = 0.5 * student_t_sf_two_sided(t, df)
    return 1.0 - tail if t > 0 else tail


@dataclass(frozen=True)
class TTestResult:
    statistic: float
    p_value: float
    df: int
    degenerate: bool = False


def paired_t_test(scores_a: Sequence[float], scores_b: Sequence[float]) -> TTestResult:
    """Two-sided paired t-test on ``a - b``.

    Zero variance in the differences is flagged as degenerate: with a zero
    mean the result is ``t = 0, p = 1``; otherwise ``t = +-inf, p = 0``.
    """
    a = np.asarray(scores_a, dtype=np.float64)
    b = np.asarray(scores_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("paired samples must be equal-length vectors")
    k = a.shape[0]
    if k < 2:
        raise ValueError("paired t-test needs at least two pairs")
    d = a - b
    mean = float(np.mean(d))
    sd = float(np.std(d, ddof=1))
    df = k - 1
    if sd == 0.0:
        if mean == 0.0:
            return TTestResult(0.0, 1.0, df, degenerate=True)
        return TTestResult(math.copysign(math.inf, mean), 0.0, df, degenerate=True)
    t = mean / (sd / math.sqrt(k))
    return TTestResult(t, student_t_sf_two_sided(t, df), df)
