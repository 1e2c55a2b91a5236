"""Dual-pass uncertainty: widen the first layer to accept a prior target,
train both passes against the truth, and read uncertainty off their gap.

The model learns to produce the target both from ``(x, 0)`` and from
``(x, y)``. At inference the first pass runs with the zero blank token,
the second feeds the first pass's own prediction back in, and the
distance between the two outputs is the uncertainty estimate: a confident
prediction reconstructs itself, a wrong one amounts to an
out-of-distribution prior and drifts.

Note one ambiguity inherited by regression tasks: the blank token is the
zero vector, so a genuine target of exactly 0 is indistinguishable from
"no prior". This is implemented as stated; the toolkit's experiments keep
targets away from degenerate all-zero regimes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from uqkit.layers import Conv2d, Linear, Model, kaiming_uniform, load_model, save_model
from uqkit.tensor import Tensor
from uqkit.training import fit_model

TASKS = ("regression", "classification")


@dataclass
class DualPrediction:
    """Outputs of the two passes and their distance."""

    y0: np.ndarray
    y1: np.ndarray
    u: float


def softmax_probs(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def one_hot(classes: np.ndarray, n_classes: int) -> np.ndarray:
    out = np.zeros((len(classes), n_classes))
    out[np.arange(len(classes)), np.asarray(classes, dtype=np.int64)] = 1.0
    return out


def widen_first_layer(model: Model, target_dim: int,
                      rng: np.random.Generator | None = None) -> None:
    """Grow the first trainable layer by ``target_dim`` inputs (or channels).

    Existing weights are kept; the new prior slots get fresh fan-in init.
    """
    first = model.layers[0]
    rng = rng or np.random.default_rng(0)
    if isinstance(first, Linear):
        new_in = first.in_dim + target_dim
        extra = kaiming_uniform((target_dim, first.out_dim), new_in, rng)
        first.weight = Tensor(np.vstack([first.weight.data, extra]),
                              requires_grad=True)
        first.in_dim = new_in
    elif isinstance(first, Conv2d):
        k = first.kernel_size
        fan_in = (first.in_channels + target_dim) * k * k
        extra = kaiming_uniform((first.out_channels, target_dim, k, k), fan_in, rng)
        first.weight = Tensor(np.concatenate([first.weight.data, extra], axis=1),
                              requires_grad=True)
        first.in_channels += target_dim
    else:
        raise ValueError(
            f"cannot widen a {first.kind!r} first layer; linear or conv2d required"
        )


class ZigZagModel:
    """A widened model with dual-pass training and inference.

    ``target_dim`` is 1 for scalar regression and the class count for
    classification. The prior rides along as extra input features (flat
    inputs) or as spatially-broadcast extra channels (image inputs).
    """

    def __init__(self, base: Model, target_dim: int, task: str,
                 norm: str = "l2"):
        if task not in TASKS:
            raise ValueError(f"unknown task {task!r}; valid: {TASKS}")
        if norm not in ("l2", "l1"):
            raise ValueError(f"unknown norm {norm!r}; valid: l2, l1")
        self.base = base
        self.target_dim = target_dim
        self.task = task
        self.norm = norm
        self.prior_encoding = (
            "probability_vector" if task == "classification" else "raw_value"
        )

    @property
    def blank(self) -> np.ndarray:
        return np.zeros(self.target_dim)

    def eval(self) -> "ZigZagModel":
        self.base.eval()
        return self

    def train(self) -> "ZigZagModel":
        self.base.train()
        return self

    # -- plumbing --------------------------------------------------------

    def _augment(self, x: np.ndarray, prior: np.ndarray) -> np.ndarray:
        if prior.shape != (x.shape[0], self.target_dim):
            raise ValueError(
                f"prior shape {prior.shape} != ({x.shape[0]}, {self.target_dim})"
            )
        if x.ndim == 2:
            return np.concatenate([x, prior], axis=1)
        if x.ndim == 4:
            b, _, h, w = x.shape
            planes = np.broadcast_to(
                prior[:, :, None, None], (b, self.target_dim, h, w)
            )
            return np.concatenate([x, planes], axis=1)
        raise ValueError(f"unsupported input rank {x.ndim}")

    def forward(self, x: np.ndarray, prior: np.ndarray) -> Tensor:
        return self.base.forward(self._augment(x, prior))

    def encode_target(self, y: np.ndarray) -> np.ndarray:
        """Ground-truth prior used by the second training term."""
        if self.task == "classification":
            return one_hot(y, self.target_dim)
        y = np.asarray(y, dtype=np.float64)
        return y.reshape(len(y), self.target_dim)

    def encode_prediction(self, y0: np.ndarray) -> np.ndarray:
        """Inference-time prior built from the first pass (detached)."""
        if self.task == "classification":
            return softmax_probs(y0)
        return y0

    def _distance(self, a: np.ndarray, b: np.ndarray) -> float:
        d = a - b
        if self.norm == "l1":
            return float(np.abs(d).sum())
        return float(np.sqrt((d * d).sum()))

    # -- training ---------------------------------------------------------

    def dual_loss(self, loss_fn, x: np.ndarray, y: np.ndarray) -> Tensor:
        """Sum of the blank-prior and true-prior loss terms.

        Both passes run as one stacked batch, so train-mode batchnorm
        statistics describe the union of the two prior distributions that
        inference will later normalize with. For mean-reducing losses the
        stacked loss times two equals the sum of the separately computed
        terms (see ``dual_loss_terms``).
        """
        n = x.shape[0]
        stacked_x = np.concatenate([x, x], axis=0)
        priors = np.concatenate(
            [np.zeros((n, self.target_dim)), self.encode_target(y)], axis=0
        )
        stacked_y = np.concatenate([y, y], axis=0)
        return 2.0 * loss_fn(self.forward(stacked_x, priors), stacked_y)

    def dual_loss_terms(self, loss_fn, x: np.ndarray,
                        y: np.ndarray) -> tuple[float, float]:
        """The two loss terms evaluated independently (diagnostics)."""
        n = x.shape[0]
        first = loss_fn(self.forward(x, np.zeros((n, self.target_dim))), y)
        second = loss_fn(self.forward(x, self.encode_target(y)), y)
        return float(first.data), float(second.data)

    def train_step(self, optimizer, loss_fn, x: np.ndarray, y: np.ndarray) -> float:
        if self.base.mode != "train":
            raise RuntimeError("train_step requires the model in train mode")
        loss = self.dual_loss(loss_fn, x, y)
        loss.backward()
        optimizer.step()
        return float(loss.data)

    def fit(self, X: np.ndarray, y: np.ndarray, loss_fn, epochs: int, lr: float,
            batch_size: int | None = None, optimizer: str = "adam",
            shuffle_seed: int | None = None) -> float:
        return fit_model(
            self.base, X, y,
            lambda model, xb, yb: self.dual_loss(loss_fn, xb, yb),
            epochs=epochs, lr=lr, batch_size=batch_size,
            optimizer=optimizer, shuffle_seed=shuffle_seed,
        )

    # -- inference ---------------------------------------------------------

    def predict(self, x: np.ndarray) -> DualPrediction:
        """Two passes on a single sample; uncertainty is their distance.

        Classification distances are taken between the two softmax
        probability vectors, regression between raw outputs.
        """
        xb = np.asarray(x, dtype=np.float64)[None, ...]
        y0 = self.forward(xb, np.zeros((1, self.target_dim))).data[0]
        prior = self.encode_prediction(y0[None, :])
        y1 = self.forward(xb, prior).data[0]
        if self.task == "classification":
            u = self._distance(softmax_probs(y0), softmax_probs(y1))
        else:
            u = self._distance(y0, y1)
        return DualPrediction(y0=y0, y1=y1, u=u)

    def predict_batch(self, xs: np.ndarray) -> list[DualPrediction]:
        """Per-sample predicts; bit-identical to calling ``predict`` in a loop."""
        return [self.predict(x) for x in np.asarray(xs, dtype=np.float64)]

    # -- persistence ---------------------------------------------------------

    def save(self, path) -> None:
        save_model(self.base, path, header={
            "zigzag": True,
            "target_dim": self.target_dim,
            "task": self.task,
            "prior_encoding": self.prior_encoding,
            "norm": self.norm,
        })

    @classmethod
    def load(cls, path) -> "ZigZagModel":
        base, header = load_model(path)
        if not header.get("zigzag"):
            raise ValueError(f"{path}: checkpoint has no zigzag header")
        return cls(base, header["target_dim"], header["task"], header["norm"])


def augment(model: Model, target_dim: int, task: str,
            rng: np.random.Generator | None = None, norm: str = "l2") -> ZigZagModel:
    """Widen an existing model's first layer and wrap it for dual-pass use."""
    widen_first_layer(model, target_dim, rng)
    return ZigZagModel(model, target_dim, task, norm=norm)
