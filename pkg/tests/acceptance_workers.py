"""Module-level worker functions for the acceptance suite's process pool.

Each worker trains one estimator for one seed and returns plain floats
and small arrays, so the parent only aggregates. Image workers load the
IDX files themselves to avoid shipping arrays across the pool.
"""

import numpy as np

from uqkit.data import (
    load_idx,
    make_ood_split,
    ood_grid,
    ood_interval,
    resolve_idx_paths,
    split_digits,
    toy_regression,
    toy_classification,
)
from uqkit.estimators import (
    AutoencoderEstimator,
    DeepEnsembleEstimator,
    MCDropoutEstimator,
    SingleEstimator,
    ZigZagEstimator,
)
from uqkit.metrics import roc_auc, spearman

TOY_REG_N = 320
TOY_CLS_N = 1000
MNIST_TRAIN_N = 20000

_ESTIMATORS = {
    "zigzag": ZigZagEstimator,
    "single": SingleEstimator,
    "deep_ensemble": DeepEnsembleEstimator,
}


def toy_regression_unit(kind: str, seed: int) -> dict:
    """Train one toy-regression estimator; report the OOD/ID uncertainty
    ratio and the held-out materials the correlation criterion needs."""
    train = toy_regression(TOY_REG_N, seed=100 + seed)
    held = toy_regression(300, seed=200 + seed)
    far = ood_interval(4.0, 6.0, 100)

    params = dict(task="regression", seed=seed)
    if kind == "deep_ensemble":
        params["n_members"] = 5
    est = _ESTIMATORS[kind](**params).fit(train.inputs, train.targets)

    pred_id, u_id = est.estimate(held.inputs)
    _, u_far = est.estimate(far)
    out = {
        "kind": kind,
        "seed": seed,
        "ratio": float(u_far.mean() / u_id.mean()),
    }
    if kind == "zigzag":
        out["spearman"] = float(
            spearman(u_id, np.abs(pred_id - held.targets)))
    return out


def toy_classification_unit(kind: str, seed: int) -> dict:
    """Train one toy-classification estimator; report far-corner vs
    cluster-center mean uncertainty."""
    train = toy_classification(TOY_CLS_N, seed=100 + seed)
    grid = ood_grid((-4.0, 4.0), (-4.0, 4.0), 21)
    corners = (((grid[:, 0] <= -2.5) & (grid[:, 1] <= -2.5))
               | ((grid[:, 0] >= 2.5) & (grid[:, 1] >= 2.5)))
    centers = ((np.linalg.norm(grid - [-1.0, -1.0], axis=1) <= 0.7)
               | (np.linalg.norm(grid - [1.0, 1.0], axis=1) <= 0.7))

    params = dict(task="classification", seed=seed)
    if kind == "deep_ensemble":
        params["n_members"] = 5
    est = _ESTIMATORS[kind](**params).fit(train.inputs, train.targets)
    _, u = est.estimate(grid)
    return {
        "kind": kind,
        "seed": seed,
        "corner_ratio": float(u[corners].mean() / u[centers].mean()),
    }


def _mnist_ood_arrays(data_dir):
    paths = resolve_idx_paths(data_dir)
    train = load_idx(paths["train_images"], paths["train_labels"], flatten=False)
    split = make_ood_split("mnist_vs_fashion", paths, flatten=False)
    return (train.inputs[:MNIST_TRAIN_N], train.targets[:MNIST_TRAIN_N], split)


def _acc_and_roc(est, split):
    pred, u_id = est.estimate(split.in_distribution.inputs)
    acc = float((pred == split.in_distribution.targets).mean())
    _, u_ood = est.estimate(split.out_of_distribution.inputs)
    labels = np.concatenate([np.zeros(len(u_id), dtype=int),
                             np.ones(len(u_ood), dtype=int)])
    return acc, float(roc_auc(np.concatenate([u_id, u_ood]), labels))


def mnist_zigzag_unit(seed: int, data_dir: str) -> dict:
    X, y, split = _mnist_ood_arrays(data_dir)
    est = ZigZagEstimator(task="classification", recipe="mnist_cnn",
                          seed=seed).fit(X, y)
    acc, roc = _acc_and_roc(est, split)
    return {"seed": seed, "acc": acc, "roc": roc}


def mnist_ensemble_unit(seed: int, data_dir: str) -> dict:
    """Five identically trained members; the first two double as the
    budget-matched two-member ensemble."""
    X, y, split = _mnist_ood_arrays(data_dir)
    ens5 = DeepEnsembleEstimator(task="classification", recipe="mnist_cnn",
                                 n_members=5, seed=seed).fit(X, y)
    acc5, roc5 = _acc_and_roc(ens5, split)
    ens2 = DeepEnsembleEstimator(task="classification", recipe="mnist_cnn",
                                 n_members=2, seed=seed)
    ens2.members_ = ens5.members_[:2]
    ens2.n_parameters_ = sum(m.n_parameters() for m in ens2.members_)
    ens2.fit_seconds_ = ens5.fit_seconds_
    _, roc2 = _acc_and_roc(ens2, split)
    return {"seed": seed, "acc5": acc5, "roc5": roc5, "roc2": roc2}


def mnist_mc_dropout_unit(seed: int, data_dir: str) -> dict:
    X, y, split = _mnist_ood_arrays(data_dir)
    mcd = MCDropoutEstimator(task="classification", recipe="mnist_cnn",
                             n_samples=5, seed=seed).fit(X, y)
    _, roc5 = _acc_and_roc(mcd, split)
    mcd.set_params(n_samples=2)
    _, roc2 = _acc_and_roc(mcd, split)
    return {"seed": seed, "roc5": roc5, "roc2": roc2}


def split_mnist_unit(seed: int, data_dir: str) -> dict:
    """Digits 0-4 in-distribution, 5-9 OOD: zigzag vs the reconstruction
    baseline."""
    paths = resolve_idx_paths(data_dir)
    split = make_ood_split("split_mnist", paths, flatten=False)
    labels = np.concatenate([
        np.zeros(len(split.in_distribution), dtype=int),
        np.ones(len(split.out_of_distribution), dtype=int),
    ])

    train = split_digits(load_idx(paths["train_images"], paths["train_labels"],
                                  flatten=False))
    X, y = train.inputs[:MNIST_TRAIN_N], train.targets[:MNIST_TRAIN_N]
    zz = ZigZagEstimator(task="classification", recipe="mnist_cnn",
                         seed=seed).fit(X, y)
    _, u_id = zz.estimate(split.in_distribution.inputs)
    _, u_ood = zz.estimate(split.out_of_distribution.inputs)
    zz_roc = float(roc_auc(np.concatenate([u_id, u_ood]), labels))

    train_flat = split_digits(load_idx(paths["train_images"],
                                       paths["train_labels"]))
    split_flat = make_ood_split("split_mnist", paths)
    ae = AutoencoderEstimator(task="classification", recipe="mnist_mlp",
                              seed=seed).fit(train_flat.inputs[:MNIST_TRAIN_N],
                                             train_flat.targets[:MNIST_TRAIN_N])
    _, u_id = ae.estimate(split_flat.in_distribution.inputs)
    _, u_ood = ae.estimate(split_flat.out_of_distribution.inputs)
    ae_roc = float(roc_auc(np.concatenate([u_id, u_ood]), labels))
    return {"seed": seed, "zigzag_roc": zz_roc, "autoencoder_roc": ae_roc}
