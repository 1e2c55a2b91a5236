"""Uncertainty estimators behind one fit/estimate interface.

Six kinds: ``single`` (predicted variance / predictive entropy),
``deep_ensemble``, ``mc_dropout``, ``two_model``, ``autoencoder``, and
``zigzag``. Every estimator exposes ``fit(X, y)``, ``predict(X)`` and
``estimate(X) -> (predictions, uncertainties)`` plus the sklearn
get_params/set_params protocol, and counts the forward passes its
estimates spend (single=1, zigzag=2, n-sample methods=n per sample).

Training hyper-parameters default to the per-recipe setups the bundled
experiments use; pass explicit values to override.
"""

from __future__ import annotations

import json
import time
from pathlib import Path

import numpy as np

from uqkit import losses
from uqkit.base import BaseEstimator, check_X_y, check_array, check_is_fitted
from uqkit.layers import Model, load_model, save_model
from uqkit.recipes import build_recipe
from uqkit.tensor import Tensor, take_col
from uqkit.training import fit_model
from uqkit.zigzag import ZigZagModel, softmax_probs

# epochs, learning rate, batch size per recipe
_TRAIN_DEFAULTS = {
    "synthetic_regression": (4000, 1e-2, None),
    "synthetic_classification": (300, 1e-2, None),
    "mnist_mlp": (3, 1e-2, 128),
    "mnist_cnn": (3, 1e-2, 128),
    "autoencoder_mnist": (3, 1e-3, 128),
}

_MC_DROPOUT_RATES = {
    "synthetic_regression": 0.2,
    "synthetic_classification": 0.15,
    "mnist_mlp": 0.2,
    "mnist_cnn": 0.2,
}

_DEFAULT_RECIPES = {
    "regression": "synthetic_regression",
    "classification": "synthetic_classification",
}


def derive_seed(*parts: int) -> int:
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


def entropy(p: np.ndarray) -> np.ndarray:
    """Shannon entropy of probability rows, in nats."""
    terms = np.where(p > 0.0, p * np.log(np.where(p > 0.0, p, 1.0)), 0.0)
    return -terms.sum(axis=-1)


_EVAL_CHUNK = 256  # bounds conv im2col buffers on large eval sets


def forward_chunked(model: Model, X: np.ndarray,
                    force_dropout: bool = False) -> np.ndarray:
    parts = [model.forward(X[i:i + _EVAL_CHUNK], force_dropout=force_dropout).data
             for i in range(0, len(X), _EVAL_CHUNK)]
    return parts[0] if len(parts) == 1 else np.concatenate(parts, axis=0)


def build_plain_model(task: str, recipe: str, input_dim: int, n_outputs: int,
                      width: int = 64, seed: int = 0) -> Model:
    """The no-uncertainty reference model cost ratios are relative to."""
    return build_recipe(recipe, input_dim=input_dim, output_dim=n_outputs,
                        width=width, seed=seed)


class UncertaintyEstimator(BaseEstimator):
    """Shared surface: config in the constructor, data only in fit."""

    task: str
    recipe: str | None
    epochs: int | None
    lr: float | None
    batch_size: int | None
    width: int
    seed: int

    def fit(self, X, y):
        X, y = check_X_y(X, y, self.task)
        start = time.perf_counter()
        self._fit(X, y)
        self.fit_seconds_ = time.perf_counter() - start
        self.n_parameters_ = sum(m.n_parameters() for m in self._models())
        return self

    def estimate(self, X):
        """Return (predictions, uncertainties) for each row of X."""
        check_is_fitted(self, "n_parameters_")
        return self._estimate(check_array(X))

    def predict(self, X):
        return self.estimate(X)[0]

    # -- hooks ------------------------------------------------------------

    def _fit(self, X, y):
        raise NotImplementedError

    def _estimate(self, X):
        raise NotImplementedError

    def _models(self) -> list[Model]:
        raise NotImplementedError

    # -- shared helpers -----------------------------------------------------

    def _resolve_recipe(self) -> str:
        return self.recipe or _DEFAULT_RECIPES[self.task]

    def _train_params(self) -> tuple[int, float, int | None]:
        epochs, lr, batch = _TRAIN_DEFAULTS[self._resolve_recipe()]
        return (
            self.epochs if self.epochs is not None else epochs,
            self.lr if self.lr is not None else lr,
            self.batch_size if self.batch_size is not None else batch,
        )

    def _n_classes(self, y) -> int:
        return int(np.max(y)) + 1

    # -- instrumentation ------------------------------------------------------

    def reset_passes(self) -> None:
        for m in self._models():
            m.sample_passes = 0

    @property
    def sample_passes(self) -> int:
        return sum(m.sample_passes for m in self._models())

    @property
    def n_trainings_(self) -> int:
        return len(self._models())


VARIANCE_WARMUP_FRACTION = 0.9


def _fit_task_model(task, recipe, X, y, width, epochs, lr, batch_size, seed,
                    variance_head=False, dropout=0.0):
    """Train one model for the task; returns (model, n_outputs).

    Variance-head regression (the Kendall-style heteroscedastic loss) is
    trained in two phases: the mean column alone under squared error for
    most of the budget, then the full likelihood. Joint training from
    scratch lands in variance-inflation basins on some inits, and a long
    likelihood phase lets the variance head extrapolate wildly; the short
    tail fits the noise level while keeping the head's weights small.
    """
    input_dim = X.shape[1]
    if task == "classification":
        n_out = int(np.max(y)) + 1
        loss = lambda m, xb, yb: losses.cross_entropy(m.forward(xb), yb)
    elif variance_head:
        n_out = 2
        def loss(m, xb, yb):
            out = m.forward(xb)
            return losses.gaussian_nll(take_col(out, 0), take_col(out, 1), yb)
    else:
        n_out = 1
        loss = lambda m, xb, yb: losses.mse(m.forward(xb), Tensor(yb.reshape(-1, 1)))
    model = build_recipe(recipe, input_dim=input_dim, output_dim=n_out,
                         width=width, dropout=dropout, seed=derive_seed(seed, 1))
    model.reseed(derive_seed(seed, 2))
    if variance_head:
        warm = int(round(epochs * VARIANCE_WARMUP_FRACTION))
        mean_loss = lambda m, xb, yb: losses.mse(take_col(m.forward(xb), 0),
                                                 Tensor(yb))
        fit_model(model, X, y, mean_loss, epochs=warm, lr=lr,
                  batch_size=batch_size, shuffle_seed=derive_seed(seed, 3))
        if epochs - warm > 0:
            fit_model(model, X, y, loss, epochs=epochs - warm, lr=lr,
                      batch_size=batch_size, shuffle_seed=derive_seed(seed, 5))
    else:
        fit_model(model, X, y, loss, epochs=epochs, lr=lr, batch_size=batch_size,
                  shuffle_seed=derive_seed(seed, 3))
    return model, n_out


class SingleEstimator(UncertaintyEstimator):
    """One model; predicted variance (regression) or entropy (classification)."""

    def __init__(self, task: str = "regression", recipe: str | None = None,
                 epochs: int | None = None, lr: float | None = None,
                 batch_size: int | None = None, width: int = 64, seed: int = 0):
        self.task = task
        self.recipe = recipe
        self.epochs = epochs
        self.lr = lr
        self.batch_size = batch_size
        self.width = width
        self.seed = seed

    def _fit(self, X, y):
        epochs, lr, batch = self._train_params()
        self.model_, self.n_outputs_ = _fit_task_model(
            self.task, self._resolve_recipe(), X, y, self.width,
            epochs, lr, batch, self.seed, variance_head=True,
        )

    def _estimate(self, X):
        out = forward_chunked(self.model_, X)
        if self.task == "classification":
            p = softmax_probs(out)
            return p.argmax(axis=1).astype(np.float64), entropy(p)
        return out[:, 0], np.exp(out[:, 1])

    def _models(self):
        return [self.model_] if hasattr(self, "model_") else []


class DeepEnsembleEstimator(UncertaintyEstimator):
    """Independently seeded members; spread of their predictions is the
    uncertainty. Regression members carry variance heads by default and
    the uncertainty is the total predictive variance."""

    def __init__(self, task: str = "regression", n_members: int = 5,
                 member_variance: bool = True, recipe: str | None = None,
                 epochs: int | None = None, lr: float | None = None,
                 batch_size: int | None = None, width: int = 64, seed: int = 0):
        self.task = task
        self.n_members = n_members
        self.member_variance = member_variance
        self.recipe = recipe
        self.epochs = epochs
        self.lr = lr
        self.batch_size = batch_size
        self.width = width
        self.seed = seed

    def _fit(self, X, y):
        if self.n_members < 2:
            raise ValueError(f"an ensemble needs >= 2 members, got {self.n_members}")
        epochs, lr, batch = self._train_params()
        self.members_ = []
        for i in range(self.n_members):
            model, _ = _fit_task_model(
                self.task, self._resolve_recipe(), X, y, self.width,
                epochs, lr, batch, derive_seed(self.seed, 100 + i),
                variance_head=self.task == "regression" and self.member_variance,
            )
            self.members_.append(model)

    def _estimate(self, X):
        outs = [forward_chunked(m, X) for m in self.members_]
        if self.task == "classification":
            probs = np.mean([softmax_probs(o) for o in outs], axis=0)
            return probs.argmax(axis=1).astype(np.float64), entropy(probs)
        means = np.stack([o[:, 0] for o in outs])
        pred = means.mean(axis=0)
        u = means.var(axis=0)
        if self.member_variance:
            u = u + np.mean([np.exp(o[:, 1]) for o in outs], axis=0)
        return pred, u

    def _models(self):
        return getattr(self, "members_", [])


class MCDropoutEstimator(UncertaintyEstimator):
    """Stochastic forward passes with dropout forced on at inference."""

    def __init__(self, task: str = "regression", n_samples: int = 5,
                 rate: float | None = None, recipe: str | None = None,
                 epochs: int | None = None, lr: float | None = None,
                 batch_size: int | None = None, width: int = 64, seed: int = 0):
        self.task = task
        self.n_samples = n_samples
        self.rate = rate
        self.recipe = recipe
        self.epochs = epochs
        self.lr = lr
        self.batch_size = batch_size
        self.width = width
        self.seed = seed

    def _fit(self, X, y):
        if self.n_samples < 2:
            raise ValueError(
                f"mc-dropout needs >= 2 samples for a spread, got {self.n_samples}"
            )
        rate = self.rate
        if rate is None:
            rate = _MC_DROPOUT_RATES.get(self._resolve_recipe(), 0.2)
        if rate <= 0.0:
            raise ValueError("mc-dropout requires a model with dropout layers")
        epochs, lr, batch = self._train_params()
        self.model_, _ = _fit_task_model(
            self.task, self._resolve_recipe(), X, y, self.width,
            epochs, lr, batch, self.seed, dropout=rate,
        )

    def _estimate(self, X):
        # reseeding here makes repeated estimates identical under one seed
        self.model_.reseed(derive_seed(self.seed, 4))
        outs = [forward_chunked(self.model_, X, force_dropout=True)
                for _ in range(self.n_samples)]
        if self.task == "classification":
            probs = np.mean([softmax_probs(o) for o in outs], axis=0)
            return probs.argmax(axis=1).astype(np.float64), entropy(probs)
        means = np.stack([o[:, 0] for o in outs])
        return means.mean(axis=0), means.var(axis=0)

    def _models(self):
        return [self.model_] if hasattr(self, "model_") else []


class TwoModelEstimator(UncertaintyEstimator):
    """Mean model plus a second model regressing log squared residuals."""

    def __init__(self, task: str = "regression", recipe: str | None = None,
                 epochs: int | None = None, lr: float | None = None,
                 batch_size: int | None = None, width: int = 64, seed: int = 0,
                 residual_floor: float = 1e-8):
        self.task = task
        self.recipe = recipe
        self.epochs = epochs
        self.lr = lr
        self.batch_size = batch_size
        self.width = width
        self.seed = seed
        self.residual_floor = residual_floor

    def _fit(self, X, y):
        if self.task != "regression":
            raise ValueError("two_model is a regression-only baseline")
        epochs, lr, batch = self._train_params()
        self.mean_model_, _ = _fit_task_model(
            "regression", self._resolve_recipe(), X, y, self.width,
            epochs, lr, batch, derive_seed(self.seed, 10),
        )
        residuals = forward_chunked(self.mean_model_, X)[:, 0] - y
        log_sq = np.log(residuals ** 2 + self.residual_floor)
        self.var_model_, _ = _fit_task_model(
            "regression", self._resolve_recipe(), X, log_sq, self.width,
            epochs, lr, batch, derive_seed(self.seed, 11),
        )

    def _estimate(self, X):
        pred = forward_chunked(self.mean_model_, X)[:, 0]
        u = np.exp(forward_chunked(self.var_model_, X)[:, 0])
        return pred, u

    def _models(self):
        out = []
        for attr in ("mean_model_", "var_model_"):
            if hasattr(self, attr):
                out.append(getattr(self, attr))
        return out


class AutoencoderEstimator(UncertaintyEstimator):
    """Reconstruction error of an hourglass autoencoder as uncertainty;
    predictions come from a separately trained task model."""

    def __init__(self, task: str = "classification", recipe: str | None = None,
                 epochs: int | None = None, lr: float | None = None,
                 batch_size: int | None = None, width: int = 64, seed: int = 0,
                 ae_epochs: int | None = None, ae_lr: float | None = None):
        self.task = task
        self.recipe = recipe
        self.epochs = epochs
        self.lr = lr
        self.batch_size = batch_size
        self.width = width
        self.seed = seed
        self.ae_epochs = ae_epochs
        self.ae_lr = ae_lr

    def _fit(self, X, y):
        epochs, lr, batch = self._train_params()
        self.task_model_, _ = _fit_task_model(
            self.task, self._resolve_recipe(), X, y, self.width,
            epochs, lr, batch, derive_seed(self.seed, 20),
        )
        ae_epochs, ae_lr, ae_batch = _TRAIN_DEFAULTS["autoencoder_mnist"]
        if self.ae_epochs is not None:
            ae_epochs = self.ae_epochs
        if self.ae_lr is not None:
            ae_lr = self.ae_lr
        d = X.shape[1]
        self.ae_model_ = build_recipe("autoencoder_mnist", input_dim=d,
                                      output_dim=d,
                                      seed=derive_seed(self.seed, 21))
        fit_model(self.ae_model_, X, X,
                  lambda m, xb, yb: losses.mse(m.forward(xb), Tensor(yb)),
                  epochs=ae_epochs, lr=ae_lr, batch_size=ae_batch,
                  shuffle_seed=derive_seed(self.seed, 22))

    def _estimate(self, X):
        out = forward_chunked(self.task_model_, X)
        if self.task == "classification":
            pred = softmax_probs(out).argmax(axis=1).astype(np.float64)
        else:
            pred = out[:, 0]
        recon = forward_chunked(self.ae_model_, X)
        u = ((recon - X) ** 2).sum(axis=1)
        return pred, u

    def _models(self):
        out = []
        for attr in ("task_model_", "ae_model_"):
            if hasattr(self, attr):
                out.append(getattr(self, attr))
        return out


class ZigZagEstimator(UncertaintyEstimator):
    """Dual-pass estimator: first layer widened by the target dimension,
    trained on both blank and true priors, uncertainty = pass distance."""

    def __init__(self, task: str = "regression", norm: str = "l2",
                 recipe: str | None = None, epochs: int | None = None,
                 lr: float | None = None, batch_size: int | None = None,
                 width: int = 64, seed: int = 0):
        self.task = task
        self.norm = norm
        self.recipe = recipe
        self.epochs = epochs
        self.lr = lr
        self.batch_size = batch_size
        self.width = width
        self.seed = seed

    def _fit(self, X, y):
        epochs, lr, batch = self._train_params()
        if self.task == "classification":
            target_dim = self._n_classes(y)
            n_out = target_dim
            loss = losses.cross_entropy
        else:
            target_dim = 1
            n_out = 1
            loss = lambda out, yb: losses.mse(out, Tensor(yb.reshape(-1, 1)))
        base = build_recipe(self._resolve_recipe(), input_dim=X.shape[1],
                            output_dim=n_out, width=self.width,
                            extra_input_dim=target_dim,
                            seed=derive_seed(self.seed, 1))
        base.reseed(derive_seed(self.seed, 2))
        self.zigzag_ = ZigZagModel(base, target_dim, self.task, norm=self.norm)
        self.zigzag_.fit(X, y, loss, epochs=epochs, lr=lr, batch_size=batch,
                         shuffle_seed=derive_seed(self.seed, 3))

    def _estimate(self, X):
        duals = self.zigzag_.predict_batch(X)
        u = np.array([d.u for d in duals])
        if self.task == "classification":
            pred = np.array([float(np.argmax(d.y0)) for d in duals])
        else:
            pred = np.array([d.y0[0] for d in duals])
        return pred, u

    def predict_dual(self, X):
        check_is_fitted(self, "n_parameters_")
        return self.zigzag_.predict_batch(check_array(X))

    def _models(self):
        return [self.zigzag_.base] if hasattr(self, "zigzag_") else []


ESTIMATOR_KINDS = {
    "single": SingleEstimator,
    "deep_ensemble": DeepEnsembleEstimator,
    "mc_dropout": MCDropoutEstimator,
    "two_model": TwoModelEstimator,
    "autoencoder": AutoencoderEstimator,
    "zigzag": ZigZagEstimator,
}

# fixed checkpoint slots; ensembles and zigzag are handled specially
_CHECKPOINT_SLOTS = {
    "single": [("model.ckpt", "model_")],
    "mc_dropout": [("model.ckpt", "model_")],
    "two_model": [("mean_model.ckpt", "mean_model_"),
                  ("var_model.ckpt", "var_model_")],
    "autoencoder": [("task_model.ckpt", "task_model_"),
                    ("ae_model.ckpt", "ae_model_")],
}


def _kind_of(estimator) -> str:
    for kind, cls in ESTIMATOR_KINDS.items():
        if type(estimator) is cls:
            return kind
    raise ValueError(f"unregistered estimator type {type(estimator).__name__}")


def save_estimator(estimator, directory) -> Path:
    """Write per-model checkpoints and a manifest listing them."""
    check_is_fitted(estimator, "n_parameters_")
    kind = _kind_of(estimator)
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    files = []
    if kind == "zigzag":
        files = ["zigzag.ckpt"]
        estimator.zigzag_.save(directory / files[0])
    elif kind == "deep_ensemble":
        for i, member in enumerate(estimator.members_):
            name = f"member_{i}.ckpt"
            save_model(member, directory / name)
            files.append(name)
    else:
        for name, attr in _CHECKPOINT_SLOTS[kind]:
            save_model(getattr(estimator, attr), directory / name)
            files.append(name)
    manifest = {
        "kind": kind,
        "params": estimator.get_params(),
        "fit_seconds": estimator.fit_seconds_,
        "n_parameters": estimator.n_parameters_,
        "files": files,
    }
    path = directory / "manifest.json"
    path.write_text(json.dumps(manifest, sort_keys=True, indent=1),
                    encoding="utf-8")
    return path


def load_estimator(directory):
    """Rebuild a fitted estimator from ``save_estimator`` output."""
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text("utf-8"))
    kind = manifest["kind"]
    est = make_estimator(kind, **manifest["params"])
    if kind == "zigzag":
        est.zigzag_ = ZigZagModel.load(directory / manifest["files"][0]).eval()
    elif kind == "deep_ensemble":
        est.members_ = []
        for name in manifest["files"]:
            model, _ = load_model(directory / name)
            est.members_.append(model.eval())
    else:
        for (name, attr), fname in zip(_CHECKPOINT_SLOTS[kind],
                                       manifest["files"]):
            model, _ = load_model(directory / fname)
            setattr(est, attr, model.eval())
    est.fit_seconds_ = manifest["fit_seconds"]
    est.n_parameters_ = manifest["n_parameters"]
    return est

# how many samples/members an inference budget buys, per kind
_BUDGET_PARAM = {"deep_ensemble": "n_members", "mc_dropout": "n_samples"}


def make_estimator(kind: str, **params) -> UncertaintyEstimator:
    if kind not in ESTIMATOR_KINDS:
        raise ValueError(
            f"unknown estimator kind {kind!r}; valid: {sorted(ESTIMATOR_KINDS)}"
        )
    return ESTIMATOR_KINDS[kind](**params)


def budget_matched_samples(kind: str, budget: int, **params) -> UncertaintyEstimator:
    """Configure a sampling-based estimator to spend exactly ``budget``
    forward passes per estimate. Non-sampling kinds pass through unchanged
    (their cost is fixed by construction)."""
    if budget < 2:
        raise ValueError(f"budget must be >= 2, got {budget}")
    if kind in _BUDGET_PARAM:
        params[_BUDGET_PARAM[kind]] = budget
    return make_estimator(kind, **params)
