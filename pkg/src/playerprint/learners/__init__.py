"""In-house classifiers behind one train / predict-probability contract."""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path
from typing import IO, Any, Iterable, Mapping

import numpy as np

from .base import Classifier, check_training_data
from .forest import DecisionTree, RandomForest, best_split
from .logreg import SoftmaxRegression
from .mlp import MLP

MODEL_KINDS = ("logreg", "forest", "mlp")
MODEL_FORMAT = "playerprint.model"
MODEL_FORMAT_VERSION = 1

_CLASSES = {"logreg": SoftmaxRegression, "forest": RandomForest, "mlp": MLP}

DEFAULTS: dict[str, dict[str, Any]] = {
    "logreg": {"l2": 1e-3, "lr": 0.1, "epochs": 500},
    "forest": {"n_trees": 100, "max_depth": None, "min_leaf": 1, "max_features": "sqrt", "bootstrap": True},
    "mlp": {"hidden": 64, "lr": 0.01, "momentum": 0.9, "epochs": 300, "batch_size": 32, "l2": 0.0},
}


@dataclasses.dataclass(frozen=True)
class ModelSpec:
    kind: str
    params: Mapping[str, Any] = dataclasses.field(default_factory=dict)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}; choose from {MODEL_KINDS}")
        unknown = set(self.params) - set(DEFAULTS[self.kind])
        if unknown:
            raise ValueError(f"unknown {self.kind} hyperparameters: {sorted(unknown)}")

    def hyperparameters(self) -> dict[str, Any]:
        return {**DEFAULTS[self.kind], **self.params}

    def build(self) -> Classifier:
        return _CLASSES[self.kind](**self.hyperparameters(), seed=self.seed)

    def with_seed(self, seed: int) -> "ModelSpec":
        return dataclasses.replace(self, seed=seed)


def train(spec: ModelSpec, X, y) -> Classifier:
    return spec.build().fit(X, y)


def predict_proba(model: Classifier, X) -> np.ndarray:
    return model.predict_proba(X)


def gradient_check(spec: ModelSpec, X, y, eps: float = 1e-6) -> float:
    """Max elementwise relative error between analytic and central-difference gradients.

    Evaluated at the model's own random starting point for ``spec.seed``.
    """
    if spec.kind not in ("logreg", "mlp"):
        raise ValueError(f"gradient check unsupported for kind {spec.kind!r}")
    model = spec.build()
    X, classes, y_idx = check_training_data(X, y)
    k = len(classes)
    theta = model.initial_parameters(X, k, np.random.default_rng(spec.seed))
    _, analytic = model.loss_and_grad(theta, X, y_idx, k)
    numeric = np.empty_like(theta)
    for i in range(len(theta)):
        step = np.zeros_like(theta)
        step[i] = eps
        plus = model.loss_and_grad(theta + step, X, y_idx, k)[0]
        minus = model.loss_and_grad(theta - step, X, y_idx, k)[0]
        numeric[i] = (plus - minus) / (2 * eps)
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return float(np.max(np.abs(analytic - numeric) / scale))


# --- serialization -----------------------------------------------------------


def _json_value(value):
    if isinstance(value, np.generic):
        return value.item()
    return value


def model_records(model: Classifier) -> list[dict]:
    """Header record followed by one record per flattened parameter array."""
    records: list[dict] = [
        {
            "format": MODEL_FORMAT,
            "version": MODEL_FORMAT_VERSION,
            "kind": model.kind,
            "hyperparameters": model.hyperparameters(),
            "seed": model.seed,
            "classes": [_json_value(c) for c in model.classes_],
            "width": int(model.n_features_),
        }
    ]
    for name, arr in model.parameters().items():
        arr = np.asarray(arr)
        records.append(
            {
                "param": name,
                "dtype": "int" if arr.dtype.kind in "iu" else "float",
                "shape": list(arr.shape),
                "data": [_json_value(v) for v in arr.ravel()],
            }
        )
    return records


def model_from_records(records: Iterable[Mapping]) -> Classifier:
    records = list(records)
    header = records[0]
    if header.get("format") != MODEL_FORMAT:
        raise ValueError("not a serialized model")
    if header.get("version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {header.get('version')}")
    spec = ModelSpec(header["kind"], header["hyperparameters"], header["seed"])
    model = spec.build()
    params = {}
    for rec in records[1:]:
        dtype = np.int64 if rec["dtype"] == "int" else float
        params[rec["param"]] = np.asarray(rec["data"], dtype=dtype).reshape(rec["shape"])
    model.set_parameters(params)
    model.classes_ = np.asarray(header["classes"])
    model.n_features_ = int(header["width"])
    return model


def dump_model(model: Classifier, handle: IO[str]) -> None:
    for record in model_records(model):
        handle.write(json.dumps(record, separators=(",", ":")) + "\n")


def save_model(model: Classifier, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="\n") as handle:
        dump_model(model, handle)


def load_model(path: str | Path) -> Classifier:
    with Path(path).open("r", encoding="utf-8") as handle:
        return model_from_records(json.loads(line) for line in handle if line.strip())


__all__ = [
    "Classifier",
    "DecisionTree",
    "MLP",
    "MODEL_KINDS",
    "ModelSpec",
    "RandomForest",
    "SoftmaxRegression",
    "best_split",
    "dump_model",
    "gradient_check",
    "load_model",
    "model_from_records",
    "model_records",
    "predict_proba",
    "save_model",
    "train",
]
