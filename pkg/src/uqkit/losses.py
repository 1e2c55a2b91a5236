"""Training losses. All return scalar tensors attached to the graph."""

from __future__ import annotations

import numpy as np

from uqkit import tensor as T
from uqkit.tensor import Tensor


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def mse(pred: Tensor, target) -> Tensor:
    """Mean squared difference over all elements."""
    target = _as_tensor(target)
    if pred.shape != target.shape:
        raise T.ShapeError(f"mse: shapes {pred.shape} and {target.shape} differ")
    return (pred - target).square().mean()


def cross_entropy(logits: Tensor, classes) -> Tensor:
    """Negative log softmax probability of the target class, batch-averaged."""
    idx = np.asarray(classes, dtype=np.int64)
    if logits.ndim != 2 or idx.shape != (logits.shape[0],):
        raise T.ShapeError(
            f"cross_entropy: logits {logits.shape} incompatible with "
            f"{idx.shape} class indices"
        )
    if idx.size and (idx.min() < 0 or idx.max() >= logits.shape[1]):
        raise ValueError(
            f"cross_entropy: class index out of range for {logits.shape[1]} classes"
        )
    return -(T.take_rows(T.log_softmax(logits), idx).mean())


def gaussian_nll(mean: Tensor, log_var: Tensor, target) -> Tensor:
    """0.5 * mean(exp(-log_var) * (mean - target)^2 + log_var)."""
    target = _as_tensor(target)
    if mean.shape != target.shape or mean.shape != log_var.shape:
        raise T.ShapeError(
            f"gaussian_nll: shapes {mean.shape}/{log_var.shape}/{target.shape} differ"
        )
    sq = (mean - target).square()
    return 0.5 * ((-log_var).exp() * sq + log_var).mean()
