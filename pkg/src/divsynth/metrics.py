"""Classifier head, AUROC/AUPRC, learning-curve harness, threshold and
gap reports, and the exact binomial test."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.stats import rankdata, t as t_dist

from .errors import DataError
from .seeding import rng


@dataclass
class LogisticModel:
    weights: np.ndarray
    bias: float
    feature_mean: np.ndarray
    feature_scale: np.ndarray
    l2: float
    epochs: int
    learning_rate: float
    seed: int


@dataclass
class CurvePoint:
    step: int
    n_augment: int
    auroc_mean: float
    auroc_lo: float
    auroc_hi: float
    auprc_mean: float
    auprc_lo: float
    auprc_hi: float


@dataclass
class LearningCurve:
    points: list[CurvePoint]
    repeats: int
    method: str


@dataclass
class ThresholdReport:
    threshold: float
    steps_to_auroc: int | None
    steps_to_auprc: int | None
    data_to_auroc: float | None
    ratio_vs_real: float | None = None


@dataclass
class TuringReport:
    n_synth: int
    n_real: int
    correct_synth: int
    correct_real: int
    p_value_synth: float
    p_value_real: float
    partial: bool = False

    def __post_init__(self):
        if self.correct_synth > self.n_synth or self.correct_real > self.n_real:
            raise DataError("correct counts exceed totals")


@dataclass
class GapReport:
    real_final_auroc: tuple[float, float, float]
    method_final_auroc: tuple[float, float, float]
    real_final_auprc: tuple[float, float, float]
    method_final_auprc: tuple[float, float, float]
    auroc_gap_pct: float
    auprc_gap_pct: float


def _check_binary(labels: np.ndarray) -> None:
    if not np.all((labels == 0) | (labels == 1)):
        raise DataError("labels must be binary 0/1")


def auroc(scores, labels) -> float:
    """Mann-Whitney statistic: P(random positive outscores random
    negative), ties counted half."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    _check_binary(y)
    n_pos = int(np.sum(y == 1))
    n_neg = int(np.sum(y == 0))
    if n_pos == 0 or n_neg == 0:
        raise DataError("auroc requires both classes")
    ranks = rankdata(s, method="average")
    u = float(np.sum(ranks[y == 1])) - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def auprc(scores, labels) -> float:
    """Average precision: mean of the precision at each positive hit in
    the score-descending ordering (score ties broken by original index)."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    _check_binary(y)
    n_pos = int(np.sum(y == 1))
    if n_pos == 0:
        raise DataError("auprc requires at least one positive")
    order = np.lexsort((np.arange(len(s)), -s))
    hits = y[order] == 1
    cum_pos = np.cumsum(hits)
    positions = np.arange(1, len(s) + 1)
    return float(np.sum(cum_pos[hits] / positions[hits]) / n_pos)


def _stable_log_loss(z: np.ndarray, y: np.ndarray) -> np.ndarray:
    # -log sigmoid(z) for y=1, -log(1 - sigmoid(z)) for y=0, overflow-safe
    zy = np.where(y == 1, z, -z)
    return np.logaddexp(0.0, -zy)


def train_logistic(features, labels, l2: float = 1e-3, epochs: int = 500,
                   learning_rate: float = 0.1, seed: int = 0) -> LogisticModel:
    """Full-batch gradient descent on L2-regularized logistic loss over
    standardized features.

    Steps that fail to decrease the loss are reverted and the learning
    rate is halved, so the final loss never exceeds the initial one.
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    _check_binary(y)
    if x.shape[0] < 2 or len(np.unique(y)) < 2:
        raise DataError("training requires >= 2 examples of both classes")
    mean = x.mean(axis=0)
    scale = np.maximum(x.std(axis=0), 1e-12)
    xs = (x - mean) / scale
    n, d = xs.shape

    w = np.zeros(d)
    b = 0.0
    lr = learning_rate

    def loss(wv, bv):
        z = xs @ wv + bv
        return float(np.mean(_stable_log_loss(z, y)) + 0.5 * l2 * np.dot(wv, wv))

    current = loss(w, b)
    for _ in range(epochs):
        p = 1.0 / (1.0 + np.exp(-np.clip(xs @ w + b, -500, 500)))
        grad_w = xs.T @ (p - y) / n + l2 * w
        grad_b = float(np.mean(p - y))
        w_new = w - lr * grad_w
        b_new = b - lr * grad_b
        candidate = loss(w_new, b_new)
        if candidate < current:
            w, b, current = w_new, b_new, candidate
        else:
            lr /= 2.0
            if lr < 1e-12:
                break
    return LogisticModel(weights=w, bias=b, feature_mean=mean,
                         feature_scale=scale, l2=l2, epochs=epochs,
                         learning_rate=learning_rate, seed=seed)


def predict(model: LogisticModel, features) -> np.ndarray:
    """Class-1 probabilities, clamped strictly inside (0, 1)."""
    x = np.asarray(features, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[1] != model.weights.shape[0]:
        raise DataError(
            f"feature dimension {x.shape[1]} != model dimension "
            f"{model.weights.shape[0]}"
        )
    xs = (x - model.feature_mean) / model.feature_scale
    z = np.clip(xs @ model.weights + model.bias, -500, 500)
    p = 1.0 / (1.0 + np.exp(-z))
    return np.clip(p, 1e-12, 1.0 - 1e-12)


def _labels_01(notes) -> np.ndarray:
    labels = []
    for n in notes:
        if n.label not in ("present", "absent"):
            raise DataError(f"note {n.id!r} lacks a present/absent label")
        labels.append(1 if n.label == "present" else 0)
    return np.asarray(labels)


def _ci(values: np.ndarray) -> tuple[float, float, float]:
    """(mean, lo, hi): 95% CI over repeats using the t quantile."""
    mean = float(np.mean(values))
    r = len(values)
    if r < 2:
        return mean, mean, mean
    half = float(t_dist.ppf(0.975, r - 1) * np.std(values, ddof=1) / math.sqrt(r))
    return mean, mean - half, mean + half


def run_learning_curve(baseline, pool, test, embedder, increment: int = 25,
                       iterations: int = 15, repeats: int = 5, seed: int = 0,
                       method: str = "realworld", l2: float = 1e-3,
                       epochs: int = 500, learning_rate: float = 0.1) -> LearningCurve:
    """Augmentation learning curve: retrain from scratch at each step on
    baseline + step*increment pool notes, evaluate on the fixed test set.

    Each repeat reshuffles the pool with its own derived seed; points
    aggregate AUROC/AUPRC across repeats with 95% confidence intervals.
    """
    baseline = list(baseline)
    pool = list(pool)
    test = list(test)
    if len(pool) < increment * iterations:
        raise DataError(
            f"pool of {len(pool)} cannot supply {iterations} steps of "
            f"{increment}"
        )
    test_ids = {n.id for n in test}
    overlap = test_ids & ({n.id for n in baseline} | {n.id for n in pool})
    if overlap:
        raise DataError(f"test ids leak into training material: {sorted(overlap)[:5]}")

    train_notes = baseline + pool
    x_train_all = np.asarray(embedder(train_notes), dtype=np.float64)
    x_test = np.asarray(embedder(test), dtype=np.float64)
    y_train_all = _labels_01(train_notes)
    y_test = _labels_01(test)
    n_base = len(baseline)

    auroc_runs = np.empty((repeats, iterations + 1))
    auprc_runs = np.empty((repeats, iterations + 1))
    for r in range(repeats):
        perm = rng(seed, "curve", method, r).permutation(len(pool))
        for step in range(iterations + 1):
            take = perm[: step * increment] + n_base
            idx = np.concatenate([np.arange(n_base), take])
            model = train_logistic(
                x_train_all[idx], y_train_all[idx], l2=l2, epochs=epochs,
                learning_rate=learning_rate, seed=seed,
            )
            scores = predict(model, x_test)
            auroc_runs[r, step] = auroc(scores, y_test)
            auprc_runs[r, step] = auprc(scores, y_test)

    points = []
    for step in range(iterations + 1):
        roc = _ci(auroc_runs[:, step])
        prc = _ci(auprc_runs[:, step])
        points.append(CurvePoint(
            step=step,
            n_augment=step * increment,
            auroc_mean=roc[0], auroc_lo=roc[1], auroc_hi=roc[2],
            auprc_mean=prc[0], auprc_lo=prc[1], auprc_hi=prc[2],
        ))
    return LearningCurve(points=points, repeats=repeats, method=method)


def _metric_means(curve: LearningCurve, metric: str) -> list[float]:
    if metric not in ("auroc", "auprc"):
        raise DataError(f"unknown metric {metric!r}")
    attr = f"{metric}_mean"
    return [getattr(p, attr) for p in curve.points]


def steps_to_threshold(curve: LearningCurve, metric: str = "auroc",
                       threshold: float = 0.85) -> int | None:
    """Smallest step whose mean metric reaches the threshold."""
    for point, mean in zip(curve.points, _metric_means(curve, metric)):
        if mean >= threshold:
            return point.step
    return None


def data_to_threshold(curve: LearningCurve, metric: str = "auroc",
                      threshold: float = 0.85) -> float | None:
    """Augmentation count at the threshold crossing, linearly
    interpolated between the last point below and the first at/above."""
    means = _metric_means(curve, metric)
    if means[0] >= threshold:
        return float(curve.points[0].n_augment)
    for i in range(1, len(means)):
        if means[i] >= threshold:
            below, above = curve.points[i - 1], curve.points[i]
            frac = (threshold - means[i - 1]) / (means[i] - means[i - 1])
            return float(below.n_augment + frac * (above.n_augment - below.n_augment))
    return None


def real_to_synth_ratio(real_data: float, method_data: float) -> float:
    """How much one method data point is worth relative to a real one."""
    if real_data <= 0 or method_data <= 0:
        raise DataError("data amounts must be positive")
    return real_data / method_data


def threshold_report(curve: LearningCurve, threshold: float = 0.85,
                     real_data_to_threshold: float | None = None) -> ThresholdReport:
    data_auroc = data_to_threshold(curve, "auroc", threshold)
    ratio = None
    if (real_data_to_threshold is not None and real_data_to_threshold > 0
            and data_auroc is not None and data_auroc > 0):
        ratio = real_to_synth_ratio(real_data_to_threshold, data_auroc)
    return ThresholdReport(
        threshold=threshold,
        steps_to_auroc=steps_to_threshold(curve, "auroc", threshold),
        steps_to_auprc=steps_to_threshold(curve, "auprc", threshold),
        data_to_auroc=data_auroc,
        ratio_vs_real=ratio,
    )


def binomial_test(k: int, n: int, p0: float = 0.5) -> float:
    """One-sided exact tail P(X >= k | n, p0) by summation of binomial
    terms with log-gamma coefficients."""
    if not (0 <= k <= n):
        raise DataError(f"require 0 <= k <= n, got k={k}, n={n}")
    if k == 0:
        return 1.0
    if p0 <= 0.0:
        return 0.0
    if p0 >= 1.0:
        return 1.0
    log_p, log_q = math.log(p0), math.log1p(-p0)
    total = 0.0
    for i in range(k, n + 1):
        log_coef = (math.lgamma(n + 1) - math.lgamma(i + 1)
                    - math.lgamma(n - i + 1))
        total += math.exp(log_coef + i * log_p + (n - i) * log_q)
    return min(total, 1.0)


def gap_report(real_curve: LearningCurve, method_curve: LearningCurve) -> GapReport:
    """Final-step percentage gap between the real-data curve and a
    method's curve, for both metrics."""
    if len(real_curve.points) != len(method_curve.points):
        raise DataError("curves have different lengths")
    r, m = real_curve.points[-1], method_curve.points[-1]
    if r.auroc_mean == 0 or r.auprc_mean == 0:
        raise DataError("degenerate real curve final (zero mean)")
    return GapReport(
        real_final_auroc=(r.auroc_mean, r.auroc_lo, r.auroc_hi),
        method_final_auroc=(m.auroc_mean, m.auroc_lo, m.auroc_hi),
        real_final_auprc=(r.auprc_mean, r.auprc_lo, r.auprc_hi),
        method_final_auprc=(m.auprc_mean, m.auprc_lo, m.auprc_hi),
        auroc_gap_pct=(r.auroc_mean - m.auroc_mean) / r.auroc_mean * 100.0,
        auprc_gap_pct=(r.auprc_mean - m.auprc_mean) / r.auprc_mean * 100.0,
    )


def curve_to_csv(curve: LearningCurve, entity: str, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([
            "method", "entity", "step", "n_augment",
            "auroc_mean", "auroc_lo", "auroc_hi",
            "auprc_mean", "auprc_lo", "auprc_hi",
        ])
        for p in curve.points:
            writer.writerow([
                curve.method, entity, p.step, p.n_augment,
                repr(p.auroc_mean), repr(p.auroc_lo), repr(p.auroc_hi),
                repr(p.auprc_mean), repr(p.auprc_lo), repr(p.auprc_hi),
            ])
