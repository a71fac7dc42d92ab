"""Per-family base models stacked under a one-hidden-layer combiner, plus
metrics, cross-validation, the pair-correlation analysis and the feature
combination sweep."""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import warnings
import zlib
from pathlib import Path
from typing import IO, Any, Mapping, Sequence

import numpy as np

from .datasets import (
    STATS_FAMILY,
    LabeledDataset,
    Normalizer,
    fit_normalizer,
    make_folds,
    stacking_split,
)
from .learners import Classifier, ModelSpec, load_model, save_model
from .stats import STAT_NAMES

logger = logging.getLogger(__name__)

COMBINER_DEFAULTS: dict[str, Any] = {
    "hidden": 16,
    "lr": 0.02,
    "momentum": 0.9,
    "epochs": 400,
    "batch_size": 16,
    "l2": 3e-2,
}


class FamilyDroppedWarning(UserWarning):
    pass


def family_seed(seed: int, family: str) -> int:
    """Seed for one family's base model, independent of which other families run."""
    return int(np.random.SeedSequence([seed, zlib.crc32(family.encode())]).generate_state(1)[0])


@dataclasses.dataclass(frozen=True)
class EnsembleSpec:
    """``combiner=None`` trains the single enabled family directly, without stacking."""

    families: tuple[str, ...]
    base: Mapping[str, ModelSpec]
    combiner: ModelSpec | None = ModelSpec("mlp", COMBINER_DEFAULTS)
    stack_fraction: float = 0.75
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.families:
            raise ValueError("ensemble needs at least one family")
        if len(set(self.families)) != len(self.families):
            raise ValueError("duplicate family in ensemble")
        missing = [f for f in self.families if f not in self.base]
        if missing:
            raise ValueError(f"no base model for families {missing}")
        if self.combiner is None and len(self.families) != 1:
            raise ValueError("an ensemble without combiner must have exactly one family")
        if self.combiner is not None and self.combiner.kind != "mlp":
            raise ValueError("combiner must be a one-hidden-layer mlp")
        if not 0 < self.stack_fraction < 1:
            raise ValueError("stack_fraction must be in (0, 1)")

    @classmethod
    def uniform(
        cls,
        families: Sequence[str],
        model: ModelSpec,
        seed: int = 0,
        stacked: bool | None = None,
        combiner: ModelSpec | None = None,
    ) -> "EnsembleSpec":
        """Same base model kind for every family; a single family skips stacking
        unless ``stacked`` is set."""
        families = tuple(families)
        stacked = len(families) > 1 if stacked is None else stacked
        comb = (combiner or ModelSpec("mlp", COMBINER_DEFAULTS)) if stacked else None
        return cls(families, {f: model for f in families}, comb, seed=seed)

    def to_dict(self) -> dict:
        return {
            "families": list(self.families),
            "base": {f: _spec_dict(s) for f, s in self.base.items() if f in self.families},
            "combiner": None if self.combiner is None else _spec_dict(self.combiner),
            "stack_fraction": self.stack_fraction,
            "seed": self.seed,
        }


def _spec_dict(spec: ModelSpec) -> dict:
    return {"kind": spec.kind, "hyperparameters": spec.hyperparameters(), "seed": spec.seed}


# --- metrics -----------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    precision: float
    recall: float
    n: int
    labels: tuple[int, ...]
    confusion: tuple[tuple[int, ...], ...]  # rows = true label, columns = predicted
    tp: int | None = None
    fp: int | None = None
    tn: int | None = None
    fn: int | None = None

    def to_dict(self) -> dict:
        return dataclasses.asdict(self) | {
            "labels": list(self.labels),
            "confusion": [list(r) for r in self.confusion],
        }


def _ratio(num: int, den: int) -> float:
    return num / den if den else 0.0


def metrics(predicted, true, positive_label: int | None = None) -> MetricsReport:
    """Accuracy always; binary precision/recall for ``positive_label``, otherwise
    macro averages over the labels seen in either vector (undefined ratios count 0)."""
    predicted = np.asarray(predicted)
    true = np.asarray(true)
    if predicted.shape != true.shape or predicted.ndim != 1 or len(true) == 0:
        raise ValueError("metrics need two equal-length, nonempty label vectors")
    labels = np.unique(np.concatenate([true, predicted]))
    if positive_label is not None and positive_label not in labels:
        labels = np.sort(np.append(labels, positive_label))
    index = {int(l): i for i, l in enumerate(labels)}
    confusion = np.zeros((len(labels), len(labels)), dtype=np.int64)
    for t, p in zip(true, predicted):
        confusion[index[int(t)], index[int(p)]] += 1
    n = len(true)
    correct = int(np.trace(confusion))
    accuracy = correct / n
    if positive_label is not None:
        i = index[int(positive_label)]
        tp = int(confusion[i, i])
        fp = int(confusion[:, i].sum()) - tp
        fn = int(confusion[i, :].sum()) - tp
        tn = n - tp - fp - fn
        return MetricsReport(
            accuracy, _ratio(tp, tp + fp), _ratio(tp, tp + fn), n,
            tuple(int(l) for l in labels), tuple(tuple(int(v) for v in r) for r in confusion),
            tp, fp, tn, fn,
        )
    diag = np.diag(confusion)
    precision = float(np.mean([_ratio(int(d), int(c)) for d, c in zip(diag, confusion.sum(axis=0))]))
    recall = float(np.mean([_ratio(int(d), int(c)) for d, c in zip(diag, confusion.sum(axis=1))]))
    return MetricsReport(
        accuracy, precision, recall, n,
        tuple(int(l) for l in labels), tuple(tuple(int(v) for v in r) for r in confusion),
    )


# --- ensemble ----------------------------------------------------------------


def _aligned(model: Classifier, X: np.ndarray, classes: np.ndarray) -> np.ndarray:
    out = np.zeros((len(X), len(classes)))
    if len(X):
        out[:, np.searchsorted(classes, model.classes_)] = model.predict_proba(X)
    return out


def family_probabilities(
    model: Classifier, dataset: LabeledDataset, family: str, samples: np.ndarray, classes: np.ndarray
) -> np.ndarray:
    """Per-sample class probabilities: the mean over that sample's rows, or uniform
    for samples without rows in this family."""
    fm = dataset.families[family]
    rows = fm.rows_for(samples)
    probs = _aligned(model, fm.X[rows], classes)
    sorter = np.argsort(samples, kind="stable")
    pos = sorter[np.searchsorted(samples, fm.owner[rows], sorter=sorter)]
    sums = np.zeros((len(samples), len(classes)))
    np.add.at(sums, pos, probs)
    counts = np.bincount(pos, minlength=len(samples)).astype(float)
    out = np.full((len(samples), len(classes)), 1.0 / len(classes))
    has = counts > 0
    out[has] = sums[has] / counts[has, None]
    return out


def _combiner_input(blocks: list[np.ndarray], n_classes: int) -> np.ndarray:
    # centre so that a uniform (uninformative) block maps to zeros
    return np.hstack([b * n_classes - 1.0 for b in blocks])


def _fit_family(spec: ModelSpec, dataset: LabeledDataset, family: str, samples: np.ndarray) -> Classifier | None:
    fm = dataset.families[family]
    rows = fm.rows_for(samples)
    y = dataset.labels[fm.owner[rows]]
    if len(rows) < 2 or len(np.unique(y)) < 2:
        return None
    return spec.build().fit(fm.X[rows], y)


@dataclasses.dataclass(eq=False)
class TrainedEnsemble:
    spec: EnsembleSpec
    classes: np.ndarray
    normalizer: Normalizer
    base_models: dict[str, Classifier]
    combiner: Classifier | None
    dropped: list[str]

    @property
    def families(self) -> list[str]:
        return [f for f in self.spec.families if f in self.base_models]

    def base_probabilities(self, dataset: LabeledDataset, samples: np.ndarray, normalized: bool = False) -> dict[str, np.ndarray]:
        data = dataset if normalized else self.normalizer.apply(dataset)
        samples = np.asarray(samples)
        return {
            f: family_probabilities(self.base_models[f], data, f, samples, self.classes)
            for f in self.families
        }

    def predict_proba(self, dataset: LabeledDataset, samples: np.ndarray, normalized: bool = False) -> np.ndarray:
        blocks = self.base_probabilities(dataset, samples, normalized)
        if self.combiner is None:
            return blocks[self.families[0]]
        X = _combiner_input([blocks[f] for f in self.families], len(self.classes))
        return _aligned(self.combiner, X, self.classes)

    def predict(self, dataset: LabeledDataset, samples: np.ndarray, normalized: bool = False) -> np.ndarray:
        return self.classes[np.argmax(self.predict_proba(dataset, samples, normalized), axis=1)]


def _prepare(dataset: LabeledDataset, train_samples: np.ndarray, families: Sequence[str]):
    missing = [f for f in families if f not in dataset.families]
    if missing:
        raise ValueError(f"dataset has no families {missing}; available: {sorted(dataset.families)}")
    subset = dataset.with_families({f: dataset.families[f] for f in families})
    normalizer = fit_normalizer(subset, train_samples)
    return normalizer, normalizer.apply(subset)


def train_ensemble(spec: EnsembleSpec, dataset: LabeledDataset, train_samples) -> TrainedEnsemble:
    train_samples = np.sort(np.asarray(train_samples))
    classes = np.unique(dataset.labels)
    normalizer, data = _prepare(dataset, train_samples, spec.families)
    if spec.combiner is None:
        base_part, hold_part = train_samples, train_samples[:0]
    else:
        base_part, hold_part = stacking_split(data, train_samples, spec.stack_fraction, spec.seed)

    base_models: dict[str, Classifier] = {}
    dropped: list[str] = []
    for family in spec.families:
        model_spec = spec.base[family].with_seed(family_seed(spec.seed, family))
        model = _fit_family(model_spec, data, family, base_part)
        if model is None:
            warnings.warn(f"family {family!r} has no usable training rows; dropped", FamilyDroppedWarning)
            dropped.append(family)
        else:
            base_models[family] = model
    if not base_models:
        raise ValueError("every family was dropped; nothing to train")

    ensemble = TrainedEnsemble(spec, classes, normalizer, base_models, None, dropped)
    if spec.combiner is not None:
        stack_on = hold_part
        if len(np.unique(data.labels[hold_part])) < 2:
            logger.warning("stacking holdout has fewer than 2 classes; combiner trained on base samples")
            stack_on = base_part
        blocks = ensemble.base_probabilities(data, stack_on, normalized=True)
        X = _combiner_input([blocks[f] for f in ensemble.families], len(classes))
        comb_spec = spec.combiner.with_seed(family_seed(spec.seed, "combiner"))
        ensemble.combiner = comb_spec.build().fit(X, data.labels[stack_on])
    return ensemble


# --- cross-validation --------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class CVResult:
    folds: tuple[MetricsReport, ...]
    test_sizes: tuple[int, ...]
    dropped: tuple[tuple[str, ...], ...]

    @property
    def accuracy(self) -> float:
        return float(np.mean([r.accuracy for r in self.folds]))

    @property
    def precision(self) -> float:
        return float(np.mean([r.precision for r in self.folds]))

    @property
    def recall(self) -> float:
        return float(np.mean([r.recall for r in self.folds]))

    def aggregate(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "accuracy_std": float(np.std([r.accuracy for r in self.folds])),
            "n": int(sum(self.test_sizes)),
            "k": len(self.folds),
        }

    def records(self, meta: Mapping[str, Any] | None = None) -> list[dict]:
        meta = dict(meta or {})
        out = []
        for i, (r, size, dropped) in enumerate(zip(self.folds, self.test_sizes, self.dropped)):
            out.append({"record": "fold", "fold": i, "test_size": size, "dropped": list(dropped), **meta, **r.to_dict()})
        out.append({"record": "aggregate", **meta, **self.aggregate()})
        return out


def evaluate_cv(spec: EnsembleSpec, dataset: LabeledDataset, k: int = 5, seed: int = 0) -> CVResult:
    plan = make_folds(dataset, k, seed)
    reports, sizes, dropped = [], [], []
    for fold in range(k):
        train_idx, test_idx = plan.train(fold), plan.test(fold)
        ensemble = train_ensemble(spec, dataset, train_idx)
        predicted = ensemble.predict(dataset, test_idx)
        reports.append(metrics(predicted, dataset.labels[test_idx], dataset.positive_label))
        sizes.append(len(test_idx))
        dropped.append(tuple(ensemble.dropped))
        logger.info("fold %d: accuracy %.4f", fold, reports[-1].accuracy)
    return CVResult(tuple(reports), tuple(sizes), tuple(dropped))


def write_report(records: Sequence[Mapping], handle: IO[str]) -> None:
    for record in records:
        handle.write(json.dumps(record, separators=(",", ":"), sort_keys=True) + "\n")


# --- pair correlation --------------------------------------------------------


@dataclasses.dataclass(frozen=True, eq=False)
class CorrelationMatrix:
    """``matrix[i, j]`` correlates stat i of match A with stat j of match B."""

    names: tuple[str, ...]
    matrix: np.ndarray
    n_pairs: int

    def entry(self, a: str, b: str) -> float:
        return float(self.matrix[self.names.index(a), self.names.index(b)])


def pair_correlation(dataset: LabeledDataset) -> CorrelationMatrix:
    if dataset.experiment != "pairs":
        raise ValueError("pair correlation needs a pair dataset")
    X = dataset.families[STATS_FAMILY].X[dataset.labels == dataset.positive_label]
    if len(X) < 3:
        raise ValueError("pair correlation needs at least 3 positive pairs")
    d = len(STAT_NAMES)
    A = X[:, :d] - X[:, :d].mean(axis=0)
    B = X[:, d:] - X[:, d:].mean(axis=0)
    cov = A.T @ B
    norm = np.outer(np.sqrt((A * A).sum(axis=0)), np.sqrt((B * B).sum(axis=0)))
    with np.errstate(invalid="ignore", divide="ignore"):
        matrix = np.where(norm > 0, cov / np.where(norm > 0, norm, 1.0), np.nan)
    return CorrelationMatrix(tuple(STAT_NAMES), np.clip(matrix, -1.0, 1.0), len(X))


# --- combination sweep -------------------------------------------------------

MOUSE = ("attack", "move", "cast")


ITEM_LABELS = {"hashed": "items-hashed", "onehot": "items-onehot", "starting": "starting-items", "boots": "boots-only"}


def feature_combinations(items: str = "starting") -> list[tuple[str, tuple[str, ...]]]:
    """The 13 comparison rows (mouse + stats, then mouse, stats and mouse + stats
    each joined with one item encoding), followed by the 5 single families with
    ``items`` as the item encoding."""
    combos: list[tuple[str, tuple[str, ...]]] = [("mouse+stats", MOUSE + (STATS_FAMILY,))]
    for prefix, fams in (("mouse", MOUSE), ("stats", (STATS_FAMILY,)), ("mouse+stats", MOUSE + (STATS_FAMILY,))):
        for enc, label in ITEM_LABELS.items():
            combos.append((f"{prefix}+{label}", fams + (enc,)))
    singles = [(f"only:{f}", (f,)) for f in MOUSE + (STATS_FAMILY, items)]
    return combos + singles


@dataclasses.dataclass(frozen=True)
class SweepRow:
    combination: str
    families: tuple[str, ...]
    model: str
    accuracy: float
    precision: float
    recall: float


def run_sweep(
    dataset: LabeledDataset,
    models: Sequence[ModelSpec],
    combinations: Sequence[tuple[str, tuple[str, ...]]] | None = None,
    k: int = 5,
    seed: int = 0,
) -> list[SweepRow]:
    combinations = feature_combinations() if combinations is None else combinations
    rows = []
    for name, families in combinations:
        if any(f not in dataset.families for f in families):
            logger.warning("skipping %s: dataset lacks %s", name, [f for f in families if f not in dataset.families])
            continue
        for model in models:
            spec = EnsembleSpec.uniform(families, model, seed=seed)
            result = evaluate_cv(spec, dataset, k, seed)
            rows.append(SweepRow(name, families, model.kind, result.accuracy, result.precision, result.recall))
            logger.info("%s / %s: %.4f", name, model.kind, result.accuracy)
    return rows


def _fmt(v: float) -> str:
    return f"{v:.6f}"


def write_sweep_long(rows: Sequence[SweepRow], handle: IO[str]) -> None:
    writer = csv.writer(handle, lineterminator="\n")
    writer.writerow(["combination", "families", "model", "accuracy", "precision", "recall"])
    for r in rows:
        writer.writerow([r.combination, "+".join(r.families), r.model, _fmt(r.accuracy), _fmt(r.precision), _fmt(r.recall)])


def write_sweep_wide(rows: Sequence[SweepRow], handle: IO[str]) -> None:
    """Accuracy grid: one row per combination, one column per model."""
    models = list(dict.fromkeys(r.model for r in rows))
    combos = list(dict.fromkeys(r.combination for r in rows))
    acc = {(r.combination, r.model): r.accuracy for r in rows}
    writer = csv.writer(handle, lineterminator="\n")
    writer.writerow(["combination"] + models)
    for c in combos:
        writer.writerow([c] + [_fmt(acc[(c, m)]) if (c, m) in acc else "" for m in models])


# --- persistence -------------------------------------------------------------


def save_ensemble(ensemble: TrainedEnsemble, out_dir, label_map: Sequence[str] | None = None) -> None:
    """Write ``ensemble.json``, ``normalizer.ndjson`` and one model file per family
    (plus ``combiner.ndjson`` when stacked)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    meta = {
        "spec": ensemble.spec.to_dict(),
        "classes": [int(c) for c in ensemble.classes],
        "label_map": list(label_map) if label_map is not None else None,
        "families": ensemble.families,
        "dropped": list(ensemble.dropped),
    }
    (out / "ensemble.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    with (out / "normalizer.ndjson").open("w", encoding="utf-8", newline="\n") as handle:
        write_report(ensemble.normalizer.to_records(), handle)
    for family, model in ensemble.base_models.items():
        save_model(model, out / f"model-{family}.ndjson")
    if ensemble.combiner is not None:
        save_model(ensemble.combiner, out / "combiner.ndjson")


def load_ensemble(in_dir) -> TrainedEnsemble:
    src = Path(in_dir)
    meta = json.loads((src / "ensemble.json").read_text(encoding="utf-8"))
    s = meta["spec"]

    def spec_of(d):
        return ModelSpec(d["kind"], d["hyperparameters"], d["seed"])

    spec = EnsembleSpec(
        tuple(s["families"]),
        {f: spec_of(d) for f, d in s["base"].items()},
        None if s["combiner"] is None else spec_of(s["combiner"]),
        s["stack_fraction"],
        s["seed"],
    )
    with (src / "normalizer.ndjson").open(encoding="utf-8") as handle:
        normalizer = Normalizer.from_records(json.loads(line) for line in handle if line.strip())
    base = {f: load_model(src / f"model-{f}.ndjson") for f in meta["families"]}
    combiner = load_model(src / "combiner.ndjson") if spec.combiner is not None else None
    return TrainedEnsemble(spec, np.asarray(meta["classes"]), normalizer, base, combiner, list(meta["dropped"]))
