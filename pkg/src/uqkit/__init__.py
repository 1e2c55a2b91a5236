"""Dual-pass uncertainty estimation toolkit.

Trains a network to produce the same output with and without its own
prediction as an extra input and uses the disagreement between the two
passes as an uncertainty measure, alongside sampling-based and
sampling-free baselines and the calibration/OOD evaluation machinery to
compare them.
"""

from uqkit.estimators import (
    AutoencoderEstimator,
    DeepEnsembleEstimator,
    MCDropoutEstimator,
    SingleEstimator,
    TwoModelEstimator,
    ZigZagEstimator,
    budget_matched_samples,
    load_estimator,
    make_estimator,
    save_estimator,
)
from uqkit.tensor import Tensor
from uqkit.zigzag import DualPrediction, ZigZagModel, augment

__version__ = "0.1.0"

__all__ = [
    "AutoencoderEstimator",
    "DeepEnsembleEstimator",
    "DualPrediction",
    "MCDropoutEstimator",
    "SingleEstimator",
    "Tensor",
    "TwoModelEstimator",
    "ZigZagEstimator",
    "ZigZagModel",
    "augment",
    "budget_matched_samples",
    "load_estimator",
    "make_estimator",
    "save_estimator",
    "__version__",
]
