"""Brute-force metric re-implementations used as oracles.

Everything here is written with plain loops, independent of the
production code paths: the lift-curve sum is assembled term by term, the
ROC statistic walks every positive/negative pair, and the Spearman
formula only handles tie-free inputs (which is how it is exercised).
"""

import math


def brute_aulc(errors, uncertainties, task, steps):
    """Literal prefix-quantile lift-curve sum."""
    n = len(errors)
    ordered = [e for _, _, e in sorted(
        (u, i, e) for i, (u, e) in enumerate(zip(uncertainties, errors))
    )]

    def perf(prefix):
        if task == "classification":
            return 1.0 - sum(prefix) / len(prefix)
        return 1.0 / (sum(prefix) / len(prefix) + 1e-8)

    full = perf(ordered)
    if full == 0.0:
        return 0.0
    total = 0.0
    for j in range(1, steps + 1):
        k = math.ceil(j * n / steps)
        total += perf(ordered[:k]) / full
    return total / steps - 1.0


def brute_raulc(errors, uncertainties, task, steps):
    if all(u == uncertainties[0] for u in uncertainties):
        return 0.0
    oracle = brute_aulc(errors, sorted_rank_scores(errors), task, steps)
    if abs(oracle) < 1e-15:
        return 0.0
    return brute_aulc(errors, uncertainties, task, steps) / oracle


def sorted_rank_scores(errors):
    """An uncertainty column that reproduces the error ordering exactly."""
    order = sorted(range(len(errors)), key=lambda i: (errors[i], i))
    scores = [0.0] * len(errors)
    for rank, idx in enumerate(order):
        scores[idx] = float(rank)
    return scores


def pairwise_roc_auc(scores, labels):
    """Every positive/negative pair; ties count half."""
    pos = [s for s, l in zip(scores, labels) if l == 1]
    neg = [s for s, l in zip(scores, labels) if l == 0]
    total = 0.0
    for p in pos:
        for q in neg:
            if p > q:
                total += 1.0
            elif p == q:
                total += 0.5
    return total / (len(pos) * len(neg))


def threshold_pr_auc(scores, labels):
    """Step integration over every distinct score threshold."""
    n_pos = sum(labels)
    thresholds = sorted(set(scores), reverse=True)
    area = 0.0
    prev_recall = 0.0
    for t in thresholds:
        tp = sum(1 for s, l in zip(scores, labels) if s >= t and l == 1)
        kept = sum(1 for s in scores if s >= t)
        recall = tp / n_pos
        precision = tp / kept
        area += (recall - prev_recall) * precision
        prev_recall = recall
    return area


def spearman_formula(u, err):
    """1 - 6*sum(d^2)/(n(n^2-1)); valid for tie-free inputs only."""
    n = len(u)
    rank_u = {i: r for r, i in enumerate(sorted(range(n), key=lambda i: u[i]))}
    rank_e = {i: r for r, i in enumerate(sorted(range(n), key=lambda i: err[i]))}
    d2 = sum((rank_u[i] - rank_e[i]) ** 2 for i in range(n))
    return 1.0 - 6.0 * d2 / (n * (n * n - 1))
