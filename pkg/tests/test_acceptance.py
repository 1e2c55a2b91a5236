"""Acceptance gate: every criterion runs at its stated tolerance and
reports one pass/fail line (see the terminal summary section).

The training-based criteria run real experiments over three seeds and
dominate the suite's runtime; they parallelize over two worker processes.
Image criteria need the IDX files described in the README and skip loudly
without them.
"""

import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np
import pytest

from uqkit import losses, metrics
from uqkit.config import load_config
from uqkit.data import toy_regression
from uqkit.estimators import (
    DeepEnsembleEstimator,
    MCDropoutEstimator,
    SingleEstimator,
    ZigZagEstimator,
    build_plain_model,
)
from uqkit.recipes import build_recipe
from uqkit.records import from_arrays
from uqkit.report import emit_report
from uqkit.runner import run_experiment

from conftest import (
    DATA_DIR,
    numerical_gradient,
    record_criterion,
    relative_error,
    requires_mnist,
)
from gradcheck_cases import ALL_CASES, check_gradients
from metric_oracles import (
    brute_aulc,
    brute_raulc,
    pairwise_roc_auc,
    spearman_formula,
)
import acceptance_workers as workers

SEEDS = (1, 2, 3)
JOBS = 2


def _pool_run(units):
    """units: list of (fn, *args); returns results in submission order."""
    with ProcessPoolExecutor(max_workers=JOBS) as pool:
        futures = [pool.submit(fn, *args) for fn, *args in units]
        return [f.result() for f in futures]


# -- criterion 1: autodiff vs central finite differences ------------------------

def _model_gradcheck(model, compute_loss, tol, h=1e-5):
    loss = compute_loss()
    loss.backward()
    params = model.parameters()
    analytic = {k: p.grad.copy() for k, p in params.items()}
    worst = 0.0
    for k, p in params.items():
        p.zero_grad()
        numeric = np.zeros_like(p.data)
        flat = p.data.reshape(-1)
        nflat = numeric.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = float(compute_loss().data)
            flat[i] = orig - h
            down = float(compute_loss().data)
            flat[i] = orig
            nflat[i] = (up - down) / (2.0 * h)
        worst = max(worst, relative_error(analytic[k], numeric))
    assert worst < tol, f"model gradient mismatch: {worst:.3e}"
    return worst


def test_criterion_1_autodiff_gradients():
    start = time.perf_counter()
    cases = 0
    worst = 0.0
    for case in ALL_CASES:
        rng = np.random.default_rng(hash(case.__name__) % (2**32))
        for _ in range(4):
            make_loss, arrays = case(rng)
            worst = max(worst, check_gradients(make_loss, arrays, tol=1e-4))
            cases += 1

    # full MLP loss over every parameter
    rng = np.random.default_rng(1234)
    mlp = build_recipe("synthetic_classification", input_dim=3, output_dim=3,
                       width=6, seed=7)
    x_mlp = rng.standard_normal((5, 3))
    y_mlp = rng.integers(0, 3, size=5)
    worst = max(worst, _model_gradcheck(
        mlp, lambda: losses.cross_entropy(mlp.forward(x_mlp), y_mlp), tol=1e-4))
    cases += 1

    # full CNN loss over every parameter
    from uqkit.layers import Activation, Conv2d, Flatten, Linear, MaxPool2d, Model
    cnn = Model([
        Conv2d(1, 2, 3, padding=1, rng=rng), Activation("leaky_relu", 0.01),
        MaxPool2d(2),
        Flatten(),
        Linear(2 * 3 * 3, 3, rng),
    ])
    x_cnn = rng.standard_normal((3, 1, 6, 6))
    y_cnn = rng.integers(0, 3, size=3)
    worst = max(worst, _model_gradcheck(
        cnn, lambda: losses.cross_entropy(cnn.forward(x_cnn), y_cnn), tol=1e-4))
    cases += 1

    elapsed = time.perf_counter() - start
    ok = cases >= 100 and worst < 1e-4 and elapsed < 60.0
    record_criterion(
        "criterion 1 (autodiff vs finite differences)",
        ok, f"{cases} cases, worst rel err {worst:.2e}, {elapsed:.1f}s")
    assert cases >= 100
    assert worst < 1e-4
    assert elapsed < 60.0


# -- criterion 2: metric oracles -------------------------------------------------

def test_criterion_2_metric_oracles():
    start = time.perf_counter()
    rng = np.random.default_rng(42)

    roc_exact = 0
    for _ in range(50):
        n = int(rng.integers(3, 13))
        labels = (rng.random(n) < 0.5).astype(int)
        if labels.min() == labels.max():
            labels[0] = 1 - labels[0]
        scores = rng.choice([0.0, 0.25, 0.5, 0.75, 1.0], size=n)
        if metrics.roc_auc(scores, labels) == pairwise_roc_auc(
                scores.tolist(), labels.tolist()):
            roc_exact += 1

    lift_worst = 0.0
    for _ in range(50):
        n = int(rng.integers(3, 21))
        steps = int(rng.integers(2, 11))
        targets = rng.standard_normal(n)
        preds = targets + rng.standard_normal(n)
        us = rng.choice([0.1, 0.3, 0.5, 0.7], size=n)
        recs = from_arrays(preds, us, targets=targets)
        errors = np.abs(preds - targets).tolist()
        lift_worst = max(
            lift_worst,
            abs(metrics.aulc(recs, "regression", steps)
                - brute_aulc(errors, us.tolist(), "regression", steps)),
            abs(metrics.raulc(recs, "regression", steps)
                - brute_raulc(errors, us.tolist(), "regression", steps)),
        )

    spearman_worst = 0.0
    for _ in range(30):
        n = int(rng.integers(4, 11))
        u = rng.standard_normal(n)
        e = rng.standard_normal(n)
        spearman_worst = max(
            spearman_worst,
            abs(metrics.spearman(u, e) - spearman_formula(u.tolist(), e.tolist())),
        )

    elapsed = time.perf_counter() - start
    ok = (roc_exact == 50 and lift_worst <= 1e-12
          and spearman_worst <= 1e-12 and elapsed < 60.0)
    record_criterion(
        "criterion 2 (metric oracles)", ok,
        f"roc exact {roc_exact}/50, lift max dev {lift_worst:.1e}, "
        f"spearman max dev {spearman_worst:.1e}, {elapsed:.1f}s")
    assert roc_exact == 50
    assert lift_worst <= 1e-12
    assert spearman_worst <= 1e-12
    assert elapsed < 60.0


# -- criterion 3: raulc endpoints -------------------------------------------------

def test_criterion_3_raulc_endpoints():
    rng = np.random.default_rng(7)
    targets = rng.standard_normal(1000)
    preds = targets + rng.standard_normal(1000)
    perfect = from_arrays(preds, np.abs(preds - targets), targets=targets)
    perfect_value = metrics.raulc(perfect, "regression")

    values = []
    for _ in range(20):
        targets = rng.standard_normal(10_000)
        preds = targets + rng.standard_normal(10_000)
        random_u = rng.random(10_000)
        values.append(metrics.raulc(from_arrays(preds, random_u,
                                                targets=targets), "regression"))
    random_mean = float(np.mean(values))

    ok = abs(perfect_value - 1.0) <= 1e-9 and abs(random_mean) <= 0.05
    record_criterion(
        "criterion 3 (raulc endpoints)", ok,
        f"perfect {perfect_value:.12f}, random mean {random_mean:+.4f}")
    assert perfect_value == pytest.approx(1.0, abs=1e-9)
    assert abs(random_mean) <= 0.05


# -- criteria 4 and 8: toy regression --------------------------------------------

@pytest.fixture(scope="module")
def toy_regression_runs():
    start = time.perf_counter()
    units = [(workers.toy_regression_unit, kind, seed)
             for kind in ("deep_ensemble", "zigzag", "single")
             for seed in SEEDS]
    results = _pool_run(units)
    wall = time.perf_counter() - start
    by_kind = {}
    for r in results:
        by_kind.setdefault(r["kind"], []).append(r)
    return by_kind, wall


@pytest.mark.slow
def test_criterion_4_toy_regression_ood(toy_regression_runs):
    by_kind, wall = toy_regression_runs
    means = {k: float(np.mean([r["ratio"] for r in v]))
             for k, v in by_kind.items()}
    ok = (means["zigzag"] > 3.0 and means["deep_ensemble"] > 3.0
          and means["single"] < 3.0 and wall < 600.0)
    record_criterion(
        "criterion 4 (toy regression OOD ratios)", ok,
        f"zigzag {means['zigzag']:.1f}x, ensemble {means['deep_ensemble']:.1f}x, "
        f"single {means['single']:.2f}x, {wall:.0f}s")
    assert means["zigzag"] > 3.0
    assert means["deep_ensemble"] > 3.0
    assert means["single"] < 3.0
    assert wall < 600.0


@pytest.mark.slow
def test_criterion_8_uncertainty_error_correlation(toy_regression_runs):
    by_kind, _ = toy_regression_runs
    rhos = [r["spearman"] for r in by_kind["zigzag"]]
    mean_rho = float(np.mean(rhos))
    ok = mean_rho > 0.3
    record_criterion(
        "criterion 8 (uncertainty-error spearman > 0.3)", ok,
        f"mean {mean_rho:+.3f}, per-seed "
        + ", ".join(f"{r:+.3f}" for r in rhos))
    assert mean_rho > 0.3, (
        "held-out in-distribution toy-regression errors are dominated by "
        "the irreducible label noise, which no uncertainty ranking can "
        f"predict; measured mean spearman {mean_rho:+.3f}"
    )


# -- criterion 5: toy classification ----------------------------------------------

@pytest.fixture(scope="module")
def toy_classification_runs():
    start = time.perf_counter()
    units = [(workers.toy_classification_unit, kind, seed)
             for kind in ("deep_ensemble", "zigzag", "single")
             for seed in SEEDS]
    results = _pool_run(units)
    wall = time.perf_counter() - start
    by_kind = {}
    for r in results:
        by_kind.setdefault(r["kind"], []).append(r)
    return by_kind, wall


@pytest.mark.slow
def test_criterion_5_toy_classification_corners(toy_classification_runs):
    by_kind, wall = toy_classification_runs
    means = {k: float(np.mean([r["corner_ratio"] for r in v]))
             for k, v in by_kind.items()}
    ok = (means["zigzag"] > 3.0 and means["deep_ensemble"] > 3.0
          and means["single"] <= 3.0 and wall < 600.0)
    record_criterion(
        "criterion 5 (toy classification corners)", ok,
        f"zigzag {means['zigzag']:.3g}x, ensemble {means['deep_ensemble']:.3g}x, "
        f"single {means['single']:.3g}x, {wall:.0f}s")
    assert means["zigzag"] > 3.0
    assert means["deep_ensemble"] > 3.0
    assert means["single"] <= 3.0
    assert wall < 600.0


# -- criterion 6: mnist vs fashion-mnist -------------------------------------------

@pytest.fixture(scope="module")
def mnist_runs():
    start = time.perf_counter()
    data_dir = str(DATA_DIR)
    units = []
    for seed in SEEDS:
        units.append((workers.mnist_zigzag_unit, seed, data_dir))
    for seed in SEEDS:
        units.append((workers.mnist_ensemble_unit, seed, data_dir))
    for seed in SEEDS:
        units.append((workers.mnist_mc_dropout_unit, seed, data_dir))
    results = _pool_run(units)
    wall = time.perf_counter() - start
    n = len(SEEDS)
    return {
        "zigzag": results[:n],
        "ensemble": results[n:2 * n],
        "mc_dropout": results[2 * n:],
        "wall": wall,
    }


@requires_mnist
@pytest.mark.slow
def test_criterion_6a_mnist_accuracy(mnist_runs):
    acc = float(np.mean([r["acc"] for r in mnist_runs["zigzag"]]))
    ok = acc >= 0.95
    record_criterion("criterion 6a (mnist zigzag accuracy >= 0.95)", ok,
                     f"mean accuracy {acc:.4f}")
    assert acc >= 0.95


@requires_mnist
@pytest.mark.slow
def test_criterion_6b_mnist_ood_roc(mnist_runs):
    roc = float(np.mean([r["roc"] for r in mnist_runs["zigzag"]]))
    ok = roc >= 0.90
    record_criterion("criterion 6b (mnist zigzag OOD ROC-AUC >= 0.90)", ok,
                     f"mean ROC-AUC {roc:.4f}")
    assert roc >= 0.90


@requires_mnist
@pytest.mark.slow
def test_criterion_6c_mnist_vs_ensemble(mnist_runs):
    zz = float(np.mean([r["roc"] for r in mnist_runs["zigzag"]]))
    ens = float(np.mean([r["roc5"] for r in mnist_runs["ensemble"]]))
    ok = zz >= ens - 0.05
    record_criterion("criterion 6c (zigzag within 0.05 of 5-ensemble)", ok,
                     f"zigzag {zz:.4f} vs ensemble {ens:.4f}")
    assert zz >= ens - 0.05


@requires_mnist
@pytest.mark.slow
def test_criterion_6d_two_sample_budget(mnist_runs):
    zz = float(np.mean([r["roc"] for r in mnist_runs["zigzag"]]))
    ens2 = float(np.mean([r["roc2"] for r in mnist_runs["ensemble"]]))
    mcd2 = float(np.mean([r["roc2"] for r in mnist_runs["mc_dropout"]]))
    wall = mnist_runs["wall"]
    ok = zz >= ens2 and zz >= mcd2 and wall < 1800.0
    record_criterion(
        "criterion 6d (2-sample budget: zigzag >= ens2 and mcd2)", ok,
        f"zigzag {zz:.4f} vs ens2 {ens2:.4f}, mcd2 {mcd2:.4f}, "
        f"experiment wall {wall:.0f}s")
    assert wall < 1800.0
    assert zz >= ens2, (
        "two identically trained conv members already rank FashionMNIST "
        "by predictive entropy near ceiling at this desk scale; the "
        f"dual-pass model trails: {zz:.4f} < {ens2:.4f}"
    )
    assert zz >= mcd2


# -- criterion 7: split-mnist --------------------------------------------------

@pytest.fixture(scope="module")
def split_mnist_runs():
    start = time.perf_counter()
    results = _pool_run([(workers.split_mnist_unit, seed, str(DATA_DIR))
                         for seed in SEEDS])
    return results, time.perf_counter() - start


@requires_mnist
@pytest.mark.slow
def test_criterion_7_split_mnist(split_mnist_runs):
    results, wall = split_mnist_runs
    zz = float(np.mean([r["zigzag_roc"] for r in results]))
    ae = float(np.mean([r["autoencoder_roc"] for r in results]))
    ok = zz > 0.5 and zz > ae and wall < 1800.0
    record_criterion(
        "criterion 7 (split-mnist: zigzag beats autoencoder)", ok,
        f"zigzag {zz:.4f} vs autoencoder {ae:.4f}, {wall:.0f}s")
    assert zz > 0.5
    assert zz > ae
    assert wall < 1800.0


# -- criterion 9: cost accounting ---------------------------------------------

@pytest.mark.slow
def test_criterion_9_cost_accounting():
    train = toy_regression(320, seed=11)
    probe = toy_regression(1000, seed=12).inputs

    zz = ZigZagEstimator(task="regression", epochs=300, seed=1).fit(
        train.inputs, train.targets)
    single = SingleEstimator(task="regression", epochs=300, seed=1).fit(
        train.inputs, train.targets)

    counters_ok = True
    for est, expected in ((single, 1), (zz, 2)):
        est.reset_passes()
        est.estimate(probe[:50])
        counters_ok &= est.sample_passes == expected * 50

    cls_train = toy_regression(120, seed=13)
    y_cls = (cls_train.targets > cls_train.targets.mean()).astype(int)
    ens = DeepEnsembleEstimator(task="classification", n_members=5,
                                epochs=2, seed=1).fit(cls_train.inputs, y_cls)
    mcd = MCDropoutEstimator(task="classification", n_samples=5,
                             epochs=2, seed=1).fit(cls_train.inputs, y_cls)
    for est, expected in ((ens, 5), (mcd, 5)):
        est.reset_passes()
        est.estimate(cls_train.inputs[:40])
        counters_ok &= est.sample_passes == expected * 40

    reference = build_plain_model("classification", "synthetic_classification",
                                  input_dim=1, n_outputs=2)
    size_ratio = ens.n_parameters_ / reference.n_parameters()

    report = metrics.cost_report(zz, single, probe, repeats=3)
    ratio = report["inference_time_ratio"]

    ok = counters_ok and size_ratio == 5.0 and 1.8 <= ratio <= 2.5
    record_criterion(
        "criterion 9 (cost accounting)", ok,
        f"counters {'ok' if counters_ok else 'WRONG'}, ensemble size ratio "
        f"{size_ratio}, measured zigzag inference ratio {ratio:.2f}")
    assert counters_ok
    assert size_ratio == 5.0
    assert 1.8 <= ratio <= 2.5


# -- criterion 10: determinism ---------------------------------------------------

DETERMINISM_CFG = """
dataset.name = toy_regression
dataset.n_train = 120
dataset.n_test = 80
dataset.ood.n = 40
estimator.kind = zigzag
train.epochs = 60
seeds = 1,2
output.dir = {out}
"""


@pytest.mark.slow
def test_criterion_10_determinism(tmp_path):
    outs = []
    for run in ("a", "b"):
        out = tmp_path / run
        cfg = load_config(DETERMINISM_CFG.format(out=out))
        result = run_experiment(cfg)
        emit_report(result, "csv", out)
        outs.append(out)

    identical = True
    compared = 0
    for rel in ("zigzag/seed1/records_id.csv", "zigzag/seed1/records_ood.csv",
                "zigzag/seed2/records_id.csv", "zigzag/seed2/records_ood.csv",
                "metrics.csv"):
        a = (outs[0] / rel).read_bytes()
        b = (outs[1] / rel).read_bytes()
        identical &= a == b
        compared += 1
    record_criterion("criterion 10 (bit-exact rerun)",
                     identical, f"{compared} CSVs compared byte-for-byte")
    assert identical
