"""Generic mini-batch training loop shared by the estimators."""

from __future__ import annotations

import numpy as np

from uqkit.layers import Model
from uqkit.optim import make_optimizer


def iterate_batches(n: int, batch_size: int | None, rng: np.random.Generator | None):
    """Yield index arrays; one shuffled pass when batch_size is set, else all."""
    if batch_size is None or batch_size >= n:
        yield np.arange(n)
        return
    order = np.arange(n)
    if rng is not None:
        rng.shuffle(order)
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]


def fit_model(model: Model, inputs: np.ndarray, targets: np.ndarray, loss_fn,
              epochs: int, lr: float, batch_size: int | None = None,
              optimizer: str = "adam", shuffle_seed: int | None = None,
              **opt_kwargs) -> float:
    """Train in place; returns the last epoch's mean batch loss.

    ``loss_fn(model, xb, yb)`` must return a scalar loss tensor.
    """
    opt = make_optimizer(optimizer, model.parameters(), lr, **opt_kwargs)
    rng = None if shuffle_seed is None else np.random.default_rng(shuffle_seed)
    model.train()
    last = float("nan")
    n = inputs.shape[0]
    for _ in range(epochs):
        total = 0.0
        count = 0
        for idx in iterate_batches(n, batch_size, rng):
            loss = loss_fn(model, inputs[idx], targets[idx])
            loss.backward()
            opt.step()
            total += float(loss.data) * len(idx)
            count += len(idx)
        last = total / count
    model.eval()
    return last
