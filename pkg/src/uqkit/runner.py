"""Experiment runner: train an estimator per seed, evaluate in-distribution
calibration and OOD detection, persist prediction records, aggregate.

Every reported number traces back to a PredictionRecord CSV written next
to it. Reported cost columns are the deterministic nominal ratios (model
trainings, exact parameter counts, forward passes per sample); measured
wall-clock ratios live in ``metrics.cost_report`` and the provenance
file, which is the one output that is not bit-reproducible.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from uqkit import data as datamod
from uqkit import metrics as metricsmod
from uqkit.config import ExperimentConfig
from uqkit.estimators import (
    budget_matched_samples,
    build_plain_model,
    derive_seed,
    make_estimator,
)
from uqkit.records import from_arrays, write_records

SCALAR_METRICS = ("accuracy_or_mae", "raulc", "roc_auc", "pr_auc", "spearman",
                  "train_time_ratio", "size_ratio", "inference_time_ratio")


@dataclass
class SeedResult:
    seed: int
    metrics: dict
    calibration: list
    records_id: list
    records_ood: list
    figures: dict = field(default_factory=dict)


@dataclass
class RunResult:
    config: ExperimentConfig
    method: str
    per_seed: list[SeedResult]
    aggregate: dict
    errors: dict = field(default_factory=dict)

    @property
    def seeds(self) -> list[int]:
        return [s.seed for s in self.per_seed]


# -- dataset assembly ----------------------------------------------------------

def _toy_ood_params(cfg: ExperimentConfig) -> dict:
    d = cfg.dataset
    return {
        "lo": d.get("ood.lo", 4.0),
        "hi": d.get("ood.hi", 6.0),
        "n": d.get("ood.n", 200),
        "span": d.get("ood.span", 4.0),
        "resolution": d.get("ood.resolution", 21),
    }


def build_seed_data(cfg: ExperimentConfig, seed: int):
    """Returns (train, id_test, ood_inputs, figures_probe)."""
    name = cfg.dataset["name"]
    d = cfg.dataset
    if name == "toy_regression":
        noise = d.get("noise_std")
        train = datamod.toy_regression(d.get("n_train", 1000),
                                       seed=derive_seed(seed, 31),
                                       noise_std=noise)
        id_test = datamod.toy_regression(d.get("n_test", 500),
                                         seed=derive_seed(seed, 32),
                                         noise_std=noise)
        ood = _toy_ood_params(cfg)
        ood_inputs = datamod.ood_interval(ood["lo"], ood["hi"], ood["n"])
        probe = {"probe_x": datamod.ood_interval(-2.0, 6.0, 161)}
        return train, id_test, ood_inputs, probe
    if name == "toy_classification":
        train = datamod.toy_classification(d.get("n_train", 1000),
                                           seed=derive_seed(seed, 31))
        id_test = datamod.toy_classification(d.get("n_test", 500),
                                             seed=derive_seed(seed, 32))
        ood = _toy_ood_params(cfg)
        span, res = ood["span"], ood["resolution"]
        grid = datamod.ood_grid((-span, span), (-span, span), res)
        return train, id_test, grid, {"grid": grid}
    # image protocols
    paths = datamod.resolve_idx_paths(d.get("dir", "data"))
    flatten = cfg.recipe != "mnist_cnn"
    train = datamod.load_idx(paths["train_images"], paths["train_labels"],
                             flatten=flatten)
    if name == "split_mnist":
        train = datamod.split_digits(train)
    split = datamod.make_ood_split(name, paths, flatten=flatten)
    n_train = d.get("n_train")
    if n_train:
        train = datamod.Dataset(train.inputs[:n_train], train.targets[:n_train],
                                train.metadata)
    return train, split.in_distribution, split.out_of_distribution.inputs, {}


def build_estimator(cfg: ExperimentConfig, seed: int):
    e = dict(cfg.estimator)
    kind = e.pop("kind")
    budget = e.pop("n", None)
    params = {
        "task": cfg.task,
        "recipe": cfg.recipe,
        "width": cfg.model.get("width", 64),
        "seed": seed,
    }
    for key in ("epochs", "lr", "batch_size"):
        if cfg.train.get(key) is not None:
            params[key] = cfg.train[key]
    params.update(e)  # rate, norm, member_variance, ...
    if budget is not None:
        return budget_matched_samples(kind, budget, **params)
    return make_estimator(kind, **params)


# -- per-seed execution ----------------------------------------------------------

def run_seed(cfg: ExperimentConfig, seed: int) -> SeedResult:
    train, id_test, ood_inputs, probe = build_seed_data(cfg, seed)
    est = build_estimator(cfg, seed)
    est.fit(train.inputs, train.targets)

    est.reset_passes()
    pred_id, u_id = est.estimate(id_test.inputs)
    passes_per_sample = est.sample_passes / len(id_test.inputs)
    pred_ood, u_ood = est.estimate(ood_inputs)

    records_id = from_arrays(pred_id, u_id, targets=id_test.targets,
                             id_prefix="i")
    records_ood = from_arrays(pred_ood, u_ood, targets=None, is_ood=True,
                              id_prefix="o")

    task = cfg.task
    if task == "classification":
        quality = metricsmod.accuracy(records_id)
    else:
        quality = metricsmod.mae(records_id)
    errors_id = metricsmod.record_errors(records_id, task)
    try:
        rho = metricsmod.spearman(u_id, errors_id)
    except ValueError:
        rho = float("nan")
    scores = np.concatenate([u_id, u_ood])
    labels = np.concatenate([np.zeros(len(u_id), dtype=int),
                             np.ones(len(u_ood), dtype=int)])
    reference = build_plain_model(
        task, cfg.recipe, input_dim=train.inputs.shape[1],
        n_outputs=int(train.targets.max()) + 1 if task == "classification" else 1,
        width=cfg.model.get("width", 64))

    steps = cfg.dataset.get("quantile_steps", metricsmod.DEFAULT_QUANTILE_STEPS)
    result_metrics = {
        "accuracy_or_mae": quality,
        "raulc": metricsmod.raulc(records_id, task, steps),
        "roc_auc": metricsmod.roc_auc(scores, labels),
        "pr_auc": metricsmod.pr_auc(scores, labels),
        "spearman": rho,
        "train_time_ratio": float(est.n_trainings_),
        "size_ratio": est.n_parameters_ / reference.n_parameters(),
        "inference_time_ratio": passes_per_sample,
    }
    curve = metricsmod.calibration_curve(records_id, task)

    figures = {}
    if "probe_x" in probe:
        probe_pred, probe_u = est.estimate(probe["probe_x"])
        figures = {"probe_x": probe["probe_x"][:, 0], "probe_pred": probe_pred,
                   "probe_u": probe_u, "train_x": train.inputs[:, 0],
                   "train_y": train.targets}
    elif "grid" in probe:
        figures = {"grid": probe["grid"], "grid_u": u_ood,
                   "train_xy": train.inputs, "train_labels": train.targets}

    return SeedResult(seed=seed, metrics=result_metrics,
                      calibration=list(curve.points), records_id=records_id,
                      records_ood=records_ood, figures=figures)


def _aggregate(per_seed: list[SeedResult]) -> dict:
    out = {}
    for key in SCALAR_METRICS:
        values = np.array([s.metrics[key] for s in per_seed])
        std = float(values.std(ddof=1)) if len(values) > 1 else 0.0
        out[key] = (float(values.mean()), std)
    return out


def run_experiment(cfg: ExperimentConfig, jobs: int = 1,
                   out_dir=None) -> RunResult:
    """Train/evaluate over every configured seed and persist the records."""
    seeds = list(cfg.seeds)
    per_seed: list[SeedResult] = []
    errors: dict[int, str] = {}
    if jobs > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = {seed: pool.submit(run_seed, cfg, seed) for seed in seeds}
            for seed in seeds:
                try:
                    per_seed.append(futures[seed].result())
                except Exception as err:  # noqa: BLE001 - recorded per seed
                    errors[seed] = f"{type(err).__name__}: {err}"
    else:
        for seed in seeds:
            try:
                per_seed.append(run_seed(cfg, seed))
            except Exception as err:  # noqa: BLE001 - recorded per seed
                errors[seed] = f"{type(err).__name__}: {err}"
    if not per_seed:
        detail = "; ".join(f"seed {s}: {m}" for s, m in errors.items())
        raise RuntimeError(f"all seeds failed: {detail}")

    result = RunResult(config=cfg, method=cfg.estimator["kind"],
                       per_seed=per_seed, aggregate=_aggregate(per_seed),
                       errors=errors)
    target = Path(out_dir if out_dir is not None else cfg.output_dir)
    persist_records(result, target)
    return result


def persist_records(result: RunResult, out_dir: Path) -> None:
    base = Path(out_dir) / result.method
    for seed_result in result.per_seed:
        seed_dir = base / f"seed{seed_result.seed}"
        seed_dir.mkdir(parents=True, exist_ok=True)
        write_records(seed_result.records_id, seed_dir / "records_id.csv")
        write_records(seed_result.records_ood, seed_dir / "records_ood.csv")


def run_sample_sweep(cfg: ExperimentConfig, budgets: list[int],
                     jobs: int = 1, out_dir=None) -> list[tuple[int, RunResult]]:
    """One full run per inference budget (the sample-count sweep)."""
    rows = []
    for budget in budgets:
        if budget < 2:
            raise ValueError(f"budget must be >= 2, got {budget}")
        sub = ExperimentConfig(
            dataset=dict(cfg.dataset),
            estimator={**cfg.estimator, "n": budget},
            model=dict(cfg.model), train=dict(cfg.train),
            seeds=list(cfg.seeds),
            output_dir=str(Path(out_dir if out_dir is not None else
                                cfg.output_dir) / f"budget{budget}"),
        )
        rows.append((budget, run_experiment(sub, jobs=jobs)))
    return rows
