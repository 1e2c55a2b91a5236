"""Estimator protocol plumbing: sklearn-convention params and input checks."""

from __future__ import annotations

import inspect

import numpy as np


class NotFittedError(RuntimeError):
    """Estimator used before fit."""


class BaseEstimator:
    """get_params/set_params following the sklearn convention.

    Constructor arguments are stored verbatim under their own names;
    fitted state lives in trailing-underscore attributes.
    """

    @classmethod
    def _param_names(cls) -> list[str]:
        sig = inspect.signature(cls.__init__)
        return [n for n in sig.parameters if n != "self"]

    def get_params(self) -> dict:
        return {name: getattr(self, name) for name in self._param_names()}

    def set_params(self, **params) -> "BaseEstimator":
        valid = set(self._param_names())
        for name, value in params.items():
            if name not in valid:
                raise ValueError(
                    f"invalid parameter {name!r} for {type(self).__name__}; "
                    f"valid: {sorted(valid)}"
                )
            setattr(self, name, value)
        return self

    def __repr__(self) -> str:
        args = ", ".join(f"{k}={v!r}" for k, v in self.get_params().items())
        return f"{type(self).__name__}({args})"


def check_array(X, name: str = "X", min_dim: int = 2) -> np.ndarray:
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 1 and min_dim == 2:
        arr = arr.reshape(-1, 1)
    if arr.ndim < min_dim:
        raise ValueError(f"{name} must be at least {min_dim}-d, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_X_y(X, y, task: str) -> tuple[np.ndarray, np.ndarray]:
    X = check_array(X)
    if task == "classification":
        y = np.asarray(y)
        if not np.issubdtype(y.dtype, np.integer):
            y_int = y.astype(np.int64)
            if not np.array_equal(y_int, y):
                raise ValueError("classification targets must be integer class ids")
            y = y_int
    else:
        y = np.asarray(y, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(y)):
            raise ValueError("y contains non-finite values")
    if len(X) != len(y):
        raise ValueError(f"X and y disagree on length: {len(X)} vs {len(y)}")
    if len(X) == 0:
        raise ValueError("empty training set")
    return X, y


def check_is_fitted(estimator, attribute: str) -> None:
    if not hasattr(estimator, attribute):
        raise NotFittedError(
            f"{type(estimator).__name__} is not fitted yet; call fit first"
        )
