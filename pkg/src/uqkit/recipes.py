"""Named model architectures used by the bundled experiments.

Layer counts follow the training setups the experiments assume:

* ``synthetic_regression``: 6 linear layers with batchnorm, ELU and skip
  connections around the hidden blocks.
* ``synthetic_classification``: 10 linear layers with ELU and skip
  connections.
* ``mnist_mlp``: 784-256-128-10 with LeakyReLU; the default for the
  image experiments (the conv variant is provided but slower).
* ``mnist_cnn``: two conv+maxpool stages then three linear layers with
  LeakyReLU.
* ``autoencoder_mnist``: hourglass MLP with a sigmoid output for [0, 1]
  pixels.

``dropout`` > 0 inserts inverted-dropout before the last two linear
layers, which is where the MC-dropout estimator samples from.
Hidden widths default to 64 for the synthetic recipes and are
configurable.
"""

from __future__ import annotations

import numpy as np

from uqkit.layers import (
    Activation,
    BatchNorm1d,
    Conv2d,
    Dropout,
    Flatten,
    Linear,
    MaxPool2d,
    Model,
    SkipBlock,
)

RECIPES = (
    "synthetic_regression",
    "synthetic_classification",
    "mnist_mlp",
    "mnist_cnn",
    "autoencoder_mnist",
)

_DEFAULT_DIMS = {
    "synthetic_regression": (1, 1),
    "synthetic_classification": (2, 2),
    "mnist_mlp": (784, 10),
    "mnist_cnn": (1, 10),   # input dim counts channels for the conv recipe
    "autoencoder_mnist": (784, 784),
}


def build_recipe(name: str, input_dim: int | None = None,
                 output_dim: int | None = None, width: int = 64,
                 dropout: float = 0.0, extra_input_dim: int = 0,
                 seed: int = 0) -> Model:
    """Construct one of the named architectures.

    ``extra_input_dim`` widens the first trainable layer (extra features
    for linear-first recipes, extra channels for the conv recipe).
    """
    if name not in RECIPES:
        raise ValueError(f"unknown recipe {name!r}; valid: {', '.join(RECIPES)}")
    d_in, d_out = _DEFAULT_DIMS[name]
    if input_dim is not None:
        d_in = input_dim
    if output_dim is not None:
        d_out = output_dim
    rng = np.random.default_rng(seed)
    builder = {
        "synthetic_regression": _synthetic_regression,
        "synthetic_classification": _synthetic_classification,
        "mnist_mlp": _mnist_mlp,
        "mnist_cnn": _mnist_cnn,
        "autoencoder_mnist": _autoencoder,
    }[name]
    layers = builder(d_in + extra_input_dim if name != "mnist_cnn" else d_in,
                     d_out, width, dropout, extra_input_dim, rng)
    return Model(layers, seed=seed)


def _hidden_block(width, rng, batchnorm):
    inner = [Linear(width, width, rng)]
    if batchnorm:
        inner.append(BatchNorm1d(width))
    inner.append(Activation("elu", 1.0))
    return SkipBlock(inner)


def _synthetic_regression(d_in, d_out, width, dropout, extra, rng):
    # 6 linear layers: entry, 4 residual blocks, head.
    layers = [Linear(d_in, width, rng), BatchNorm1d(width), Activation("elu", 1.0)]
    for i in range(4):
        block = _hidden_block(width, rng, batchnorm=True)
        if dropout > 0.0 and i == 3:
            block.inner.insert(0, Dropout(dropout))
        layers.append(block)
    if dropout > 0.0:
        layers.append(Dropout(dropout))
    layers.append(Linear(width, d_out, rng))
    return layers


def _synthetic_classification(d_in, d_out, width, dropout, extra, rng):
    # 10 linear layers: entry, 8 residual blocks, head.
    layers = [Linear(d_in, width, rng), Activation("elu", 1.0)]
    for i in range(8):
        block = _hidden_block(width, rng, batchnorm=False)
        if dropout > 0.0 and i == 7:
            block.inner.insert(0, Dropout(dropout))
        layers.append(block)
    if dropout > 0.0:
        layers.append(Dropout(dropout))
    layers.append(Linear(width, d_out, rng))
    return layers


def _mnist_mlp(d_in, d_out, width, dropout, extra, rng):
    layers = [Linear(d_in, 256, rng), Activation("leaky_relu", 0.01)]
    if dropout > 0.0:
        layers.append(Dropout(dropout))
    layers += [Linear(256, 128, rng), Activation("leaky_relu", 0.01)]
    if dropout > 0.0:
        layers.append(Dropout(dropout))
    layers.append(Linear(128, d_out, rng))
    return layers


def _mnist_cnn(channels, d_out, width, dropout, extra, rng):
    c_in = channels + extra
    layers = [
        Conv2d(c_in, 8, 3, padding=1, rng=rng), Activation("leaky_relu", 0.01),
        MaxPool2d(2),
        Conv2d(8, 16, 3, padding=1, rng=rng), Activation("leaky_relu", 0.01),
        MaxPool2d(2),
        Flatten(),
        Linear(16 * 7 * 7, 128, rng), Activation("leaky_relu", 0.01),
    ]
    if dropout > 0.0:
        layers.append(Dropout(dropout))
    layers += [Linear(128, 64, rng), Activation("leaky_relu", 0.01)]
    if dropout > 0.0:
        layers.append(Dropout(dropout))
    layers.append(Linear(64, d_out, rng))
    return layers


def _autoencoder(d_in, d_out, width, dropout, extra, rng):
    return [
        Linear(d_in, 128, rng), Activation("leaky_relu", 0.01),
        Linear(128, 32, rng), Activation("leaky_relu", 0.01),
        Linear(32, 128, rng), Activation("leaky_relu", 0.01),
        Linear(128, d_out, rng), Activation("sigmoid"),
    ]


def count_linear_layers(model: Model) -> int:
    """Number of Linear layers, including those inside skip blocks."""
    total = 0
    stack = list(model.layers)
    while stack:
        layer = stack.pop()
        if isinstance(layer, Linear):
            total += 1
        elif isinstance(layer, SkipBlock):
            stack.extend(layer.inner)
    return total
