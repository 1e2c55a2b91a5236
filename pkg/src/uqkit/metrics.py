"""Evaluation metrics: accuracy/MAE, lift-curve calibration (AULC/rAULC),
OOD detection ROC/PR AUCs, rank calibration curves, Spearman correlation,
and measured cost ratios.

The lift curve orders samples by increasing uncertainty and evaluates the
model on every uncertainty-quantile prefix:

    AULC  = -1 + (1/S) * sum_{j=1..S} F(q_j) / F_R(q_j)

with F the prefix performance (accuracy for classification, inverse MAE
for regression), F_R the full-set performance (the exact expectation of a
random ordering), and quantiles taken over record ranks. rAULC divides by
the AULC of the oracle ordering (samples sorted by true error), so a
perfect uncertainty ranking scores 1 and an uninformative one 0.
"""

from __future__ import annotations

import time
from typing import NamedTuple

import numpy as np

from uqkit.records import predictions_of, targets_of, uncertainties_of

TASKS = ("regression", "classification")
INVERSE_MAE_EPS = 1e-8
DEFAULT_QUANTILE_STEPS = 20


def record_errors(records, task: str) -> np.ndarray:
    """Per-record error: 0/1 incorrectness or absolute residual."""
    preds = predictions_of(records)
    targets = targets_of(records)
    if task == "classification":
        return (np.rint(preds) != np.rint(targets)).astype(np.float64)
    return np.abs(preds - targets)


def accuracy(records) -> float:
    if not records:
        raise ValueError("accuracy of an empty record list")
    return float(1.0 - record_errors(records, "classification").mean())


def mae(records) -> float:
    if not records:
        raise ValueError("mae of an empty record list")
    return float(record_errors(records, "regression").mean())


# -- lift curve ----------------------------------------------------------------

def _prefix_performance(errors_sorted: np.ndarray, k: int, task: str) -> float:
    chunk = errors_sorted[:k]
    if task == "classification":
        return float(1.0 - chunk.mean())
    return 1.0 / (float(chunk.mean()) + INVERSE_MAE_EPS)


def _aulc_of_ordering(errors_sorted: np.ndarray, task: str, steps: int) -> float:
    n = len(errors_sorted)
    full = _prefix_performance(errors_sorted, n, task)
    if full == 0.0:
        return 0.0
    total = 0.0
    for j in range(1, steps + 1):
        k = -(-j * n // steps)  # ceil(j*n/steps)
        total += _prefix_performance(errors_sorted, k, task) / full
    return total / steps - 1.0


def aulc(records, task: str, steps: int = DEFAULT_QUANTILE_STEPS) -> float:
    """Area under the lift curve of the records' uncertainty ordering."""
    if task not in TASKS:
        raise ValueError(f"unknown task {task!r}")
    if steps < 2:
        raise ValueError(f"steps must be >= 2, got {steps}")
    if not records:
        raise ValueError("aulc of an empty record list")
    errors = record_errors(records, task)
    u = uncertainties_of(records)
    if not np.all(np.isfinite(u)):
        raise ValueError("non-finite uncertainty")
    order = np.argsort(u, kind="stable")
    return _aulc_of_ordering(errors[order], task, steps)


def raulc(records, task: str, steps: int = DEFAULT_QUANTILE_STEPS) -> float:
    """AULC normalized by the perfect (error-ordered) AULC; 1 is ideal,
    0 matches random ordering. All-equal uncertainties define 0."""
    if not records:
        raise ValueError("raulc of an empty record list")
    u = uncertainties_of(records)
    if np.all(u == u[0]):
        return 0.0
    errors = record_errors(records, task)
    oracle = _aulc_of_ordering(np.sort(errors, kind="stable"), task, steps)
    if abs(oracle) < 1e-15:
        return 0.0
    return aulc(records, task, steps) / oracle


# -- ood detection -------------------------------------------------------------

def _validate_scores_labels(scores, labels):
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(np.int64)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError(
            f"scores/labels must be matching vectors, got {scores.shape} "
            f"and {labels.shape}"
        )
    if labels.min() == labels.max():
        raise ValueError("labels contain a single class")
    return scores, labels


def _average_ranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values))
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def roc_auc(scores, labels) -> float:
    """P(random positive outranks random negative), ties counted half."""
    scores, labels = _validate_scores_labels(scores, labels)
    ranks = _average_ranks(scores)
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    pos_rank_sum = float(ranks[labels == 1].sum())
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def pr_auc(scores, labels) -> float:
    """Step-interpolated area under the precision-recall curve
    (positive = OOD, score = uncertainty)."""
    scores, labels = _validate_scores_labels(scores, labels)
    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_labels = labels[order]
    n_pos = int(labels.sum())

    area = 0.0
    tp = 0
    seen = 0
    prev_recall = 0.0
    i = 0
    n = len(scores)
    while i < n:
        j = i
        while j + 1 < n and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        tp += int(sorted_labels[i:j + 1].sum())
        seen += j - i + 1
        recall = tp / n_pos
        precision = tp / seen
        area += (recall - prev_recall) * precision
        prev_recall = recall
        i = j + 1
    return area


# -- calibration curve ---------------------------------------------------------

class CalibrationCurve(NamedTuple):
    points: list[tuple[float, float]]
    degenerate: bool


def calibration_curve(records, task: str, n_points: int = 20) -> CalibrationCurve:
    """Error-CDF level reached at each uncertainty-CDF level.

    Rank-based: the curve of a perfectly rank-calibrated estimator lies on
    the diagonal. A constant uncertainty column carries no ordering; the
    result is flagged degenerate.
    """
    errors = record_errors(records, task)
    u = uncertainties_of(records)
    n = len(records)
    order = np.argsort(u, kind="stable")
    errors_by_u = errors[order]
    sorted_errors = np.sort(errors)
    points = []
    for k in range(1, n_points + 1):
        x = k / n_points
        idx = -(-k * n // n_points) - 1  # ceil(k*n/n_points) - 1
        e_at_rank = errors_by_u[idx]
        y = float(np.searchsorted(sorted_errors, e_at_rank, side="right")) / n
        points.append((x, y))
    return CalibrationCurve(points, degenerate=bool(np.all(u == u[0])))


# -- correlation ---------------------------------------------------------------

def spearman(u, err) -> float:
    """Pearson correlation of average ranks."""
    u = np.asarray(u, dtype=np.float64)
    err = np.asarray(err, dtype=np.float64)
    if u.shape != err.shape or u.ndim != 1 or len(u) < 3:
        raise ValueError("spearman needs two equal-length vectors of >= 3 values")
    if np.all(u == u[0]) or np.all(err == err[0]):
        raise ValueError("spearman undefined for constant input")
    ru = _average_ranks(u)
    re = _average_ranks(err)
    ru -= ru.mean()
    re -= re.mean()
    return float((ru * re).sum() / np.sqrt((ru * ru).sum() * (re * re).sum()))


# -- cost accounting -----------------------------------------------------------

def cost_report(estimator, reference, X, repeats: int = 3) -> dict:
    """Measured cost ratios of an estimator against a fitted reference.

    Inference is timed per sample (no batch amortization, matching a
    no-parallelization accounting) over all rows of X; both estimators run
    their real estimate paths, skipping the one-time input validation so
    fixed call overhead does not dilute the ratio. The two sides are timed
    in row-level alternation with the call order flipping every row, so
    background load hits them symmetrically. Train time uses the recorded
    fit wall times and size the exact parameter counts.
    """
    X = np.asarray(X, dtype=np.float64)
    est_fn = lambda row: estimator._estimate(row[None])
    ref_fn = lambda row: reference._estimate(row[None])
    est_fn(X[0]); ref_fn(X[0])  # warm caches outside the timed region
    est_times: list[float] = []
    ref_times: list[float] = []
    for rep in range(repeats):
        for i, row in enumerate(X):
            flip = (i + rep) % 2
            pair = (est_fn, ref_fn) if flip == 0 else (ref_fn, est_fn)
            t0 = time.perf_counter()
            pair[0](row)
            t1 = time.perf_counter()
            pair[1](row)
            t2 = time.perf_counter()
            if flip == 0:
                est_times.append(t1 - t0)
                ref_times.append(t2 - t1)
            else:
                ref_times.append(t1 - t0)
                est_times.append(t2 - t1)
    # medians shrug off scheduler preemption spikes that sums would absorb
    return {
        "train_time_ratio": estimator.fit_seconds_ / reference.fit_seconds_,
        "size_ratio": estimator.n_parameters_ / reference.n_parameters_,
        "inference_time_ratio": float(np.median(est_times) / np.median(ref_times)),
    }
