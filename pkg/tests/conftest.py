"""Shared oracles and fixtures.

The gradient oracle is a plain central finite-difference evaluator that
only ever calls the forward path, so gradient tests compare two genuinely
independent routes.
"""

import os

# The matrices here are small; multithreaded BLAS only adds contention and
# makes timings unstable. Must happen before numpy loads.
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("OMP_NUM_THREADS", "1")

from pathlib import Path

import numpy as np
import pytest


def numerical_gradient(f, arrays, wrt, h=1e-5):
    """Central finite differences of scalar-valued f w.r.t. arrays[wrt].

    ``f`` maps a list of plain ndarrays to a python float and must not
    touch autodiff machinery.
    """
    base = [a.copy() for a in arrays]
    target = base[wrt]
    grad = np.zeros_like(target)
    flat = target.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f(base)
        flat[i] = orig - h
        fm = f(base)
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * h)
    return grad


def relative_error(analytic, numeric):
    scale = max(np.max(np.abs(numeric)), np.max(np.abs(analytic)), 1e-10)
    return np.max(np.abs(analytic - numeric)) / scale


DATA_DIR = Path(os.environ.get("UQKIT_DATA_DIR", Path(__file__).resolve().parents[1] / "data"))


def mnist_paths():
    """Resolve the IDX files, or None when any are absent."""
    from uqkit.data import resolve_idx_paths

    try:
        return resolve_idx_paths(DATA_DIR)
    except FileNotFoundError:
        return None


requires_mnist = pytest.mark.skipif(
    mnist_paths() is None,
    reason=(
        f"MNIST/FashionMNIST IDX files not found under {DATA_DIR} "
        "(set UQKIT_DATA_DIR or fetch the files named in README.md)"
    ),
)


# -- acceptance reporting -------------------------------------------------------

ACCEPTANCE_LINES: list[str] = []


def record_criterion(name: str, passed: bool, detail: str) -> None:
    """Collect a pass/fail line; printed in the terminal summary."""
    status = "PASS" if passed else "FAIL"
    ACCEPTANCE_LINES.append(f"[{status}] {name}: {detail}")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)
