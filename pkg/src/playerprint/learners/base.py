from __future__ import annotations

from typing import Any

import numpy as np


class Classifier:
    """Common surface: ``fit`` / ``predict_proba`` / ``predict`` plus state export."""

    kind: str = ""
    classes_: np.ndarray
    n_features_: int

    def hyperparameters(self) -> dict[str, Any]:
        raise NotImplementedError

    def fit(self, X, y) -> "Classifier":
        raise NotImplementedError

    def _predict_proba(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def predict_proba(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features_:
            raise ValueError(
                f"expected input of width {self.n_features_}, got shape {X.shape}"
            )
        if not np.all(np.isfinite(X)):
            raise ValueError("input contains non-finite values")
        return self._predict_proba(X)

    def predict(self, X) -> np.ndarray:
        return self.classes_[np.argmax(self.predict_proba(X), axis=1)]

    def parameters(self) -> dict[str, np.ndarray]:
        raise NotImplementedError

    def set_parameters(self, params: dict[str, np.ndarray]) -> None:
        raise NotImplementedError


def check_training_data(X, y) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Validate a training set; returns (X, class list, class index per row)."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if X.ndim != 2:
        raise ValueError(f"X must be 2-D, got shape {X.shape}")
    if y.ndim != 1 or len(y) != len(X):
        raise ValueError(f"y must be 1-D with {len(X)} entries, got shape {y.shape}")
    if len(X) < 2:
        raise ValueError("need at least 2 training rows")
    if not np.all(np.isfinite(X)):
        raise ValueError("training features contain non-finite values")
    classes, y_idx = np.unique(y, return_inverse=True)
    if len(classes) < 2:
        raise ValueError("training labels contain a single class")
    return X, classes, y_idx


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def one_hot(y_idx: np.ndarray, n_classes: int) -> np.ndarray:
    out = np.zeros((len(y_idx), n_classes))
    out[np.arange(len(y_idx)), y_idx] = 1.0
    return out


def cross_entropy(probs: np.ndarray, y_idx: np.ndarray) -> float:
    picked = probs[np.arange(len(y_idx)), y_idx]
    return float(-np.mean(np.log(np.maximum(picked, 1e-300))))
