"""Labeled datasets for closed-pool identification and same-player pair
classification: feature extraction per match, pairing with balanced negative
sampling, train-fold normalization and stratified, grouped fold assignment."""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
from typing import IO, Iterable, Mapping, Sequence

import numpy as np

from .blocks import FeatureBlock
from .events import InventorySnapshot, ReplayEventStream
from .items import DEFAULT_BUCKETS, ItemCatalog, encode_diff, encode_match, encoding_width, sample_points
from .mouse import ACTION_KINDS, FEATURE_NAMES, SegmentationConfig, action_matrix, complex_actions
from .stats import STAT_NAMES, aggregate, aggregate_columns, game_stats, match_aggregate

logger = logging.getLogger(__name__)

MOUSE_FAMILIES = ACTION_KINDS
STATS_FAMILY = "stats"
MATCH_ITEM_FAMILIES = ("hashed", "onehot", "starting", "boots")
ALL_FAMILIES = MOUSE_FAMILIES + (STATS_FAMILY,) + MATCH_ITEM_FAMILIES + ("diff",)
NORMALIZED_FAMILIES = frozenset(MOUSE_FAMILIES + (STATS_FAMILY,))


@dataclasses.dataclass(frozen=True)
class ExtractConfig:
    tau_ms: float = 300.0
    slices: int = 1
    buckets: int = DEFAULT_BUCKETS
    hash_seed: int = 0
    encodings: tuple[str, ...] = MATCH_ITEM_FAMILIES
    mouse: bool = True


@dataclasses.dataclass(eq=False)
class MatchFeatureBundle:
    match_id: str
    account_id: str
    actions: dict[str, np.ndarray]  # kind -> (n_actions, 38)
    aggregates: dict[str, FeatureBlock]  # kind -> 152 * P values with missing mask
    stats: FeatureBlock
    items: dict[str, FeatureBlock]
    snapshots: tuple[InventorySnapshot, InventorySnapshot] | None


def extract_bundle(stream: ReplayEventStream, catalog: ItemCatalog, cfg: ExtractConfig = ExtractConfig()) -> MatchFeatureBundle:
    seg = SegmentationConfig(cfg.tau_ms, stream.header.tick_rate)
    actions: dict[str, np.ndarray] = {}
    aggregates: dict[str, FeatureBlock] = {}
    if cfg.mouse:
        whole = complex_actions(stream.cursor, stream.commands, seg)
        actions = {kind: action_matrix(whole, kind) for kind in ACTION_KINDS}
        agg = aggregate([whole]) if cfg.slices == 1 else match_aggregate(stream, cfg.slices, seg)
        aggregates = {
            kind: FeatureBlock(kind, agg.block(kind), agg.mask(kind)) for kind in ACTION_KINDS
        }
    stats = FeatureBlock(STATS_FAMILY, game_stats(stream).to_array())
    items: dict[str, FeatureBlock] = {}
    snapshots = None
    if stream.inventories:
        snapshots = sample_points(stream)
        items = encode_match(stream, catalog, cfg.encodings, cfg.buckets, cfg.hash_seed)
    return MatchFeatureBundle(
        match_id=stream.header.match_id,
        account_id=stream.header.account_id,
        actions=actions,
        aggregates=aggregates,
        stats=stats,
        items=items,
        snapshots=snapshots,
    )


@dataclasses.dataclass(eq=False)
class FamilyMatrix:
    """Rows of one feature family; ``owner[i]`` is the sample row i belongs to."""

    X: np.ndarray
    owner: np.ndarray
    columns: list[str]

    def __post_init__(self) -> None:
        if self.X.ndim != 2 or self.X.shape[1] != len(self.columns):
            raise ValueError(f"matrix shape {self.X.shape} does not match {len(self.columns)} columns")
        if len(self.owner) != len(self.X):
            raise ValueError("owner vector must have one entry per row")

    @property
    def width(self) -> int:
        return self.X.shape[1]

    def rows_for(self, samples: np.ndarray) -> np.ndarray:
        """Row indices owned by any of the given samples, in row order."""
        return np.nonzero(np.isin(self.owner, samples))[0]


@dataclasses.dataclass(eq=False)
class LabeledDataset:
    experiment: str  # "pool" or "pairs"
    labels: np.ndarray
    sample_ids: list[str]
    sources: list[tuple[str, ...]]
    groups: np.ndarray
    families: dict[str, FamilyMatrix]
    label_map: list[str]
    positive_label: int | None = None

    @property
    def n_samples(self) -> int:
        return len(self.labels)

    def with_families(self, families: dict[str, FamilyMatrix]) -> "LabeledDataset":
        return dataclasses.replace(self, families=families)


# --- pool dataset ------------------------------------------------------------


def _item_columns(name: str, width: int) -> list[str]:
    return [f"{name}.{i}" for i in range(width)]


def build_pool_dataset(
    bundles: Sequence[MatchFeatureBundle],
    max_actions_per_match: int | None = None,
    seed: int = 0,
) -> LabeledDataset:
    """One sample per match labeled by player index; mouse families keep one row per action.

    ``max_actions_per_match`` caps action rows per match and kind by a seeded
    draw without replacement (rows keep their original order).
    """
    accounts = sorted({b.account_id for b in bundles})
    if len(accounts) < 2:
        raise ValueError("closed-pool dataset needs at least 2 players")
    label_of = {a: i for i, a in enumerate(accounts)}
    labels = np.array([label_of[b.account_id] for b in bundles], dtype=np.int64)
    rng = np.random.default_rng(seed)

    families: dict[str, FamilyMatrix] = {}
    if bundles and bundles[0].actions:
        for kind in MOUSE_FAMILIES:
            blocks, owners = [], []
            for s, b in enumerate(bundles):
                rows = b.actions[kind]
                if max_actions_per_match is not None and len(rows) > max_actions_per_match:
                    keep = np.sort(rng.choice(len(rows), max_actions_per_match, replace=False))
                    rows = rows[keep]
                blocks.append(rows)
                owners.append(np.full(len(rows), s, dtype=np.int64))
            families[kind] = FamilyMatrix(
                np.vstack(blocks), np.concatenate(owners), list(FEATURE_NAMES)
            )
    arange = np.arange(len(bundles), dtype=np.int64)
    families[STATS_FAMILY] = FamilyMatrix(
        np.vstack([b.stats.values for b in bundles]), arange, list(STAT_NAMES)
    )
    for name in bundles[0].items if bundles else ():
        X = np.vstack([b.items[name].values for b in bundles])
        families[name] = FamilyMatrix(X, arange.copy(), _item_columns(name, X.shape[1]))

    return LabeledDataset(
        experiment="pool",
        labels=labels,
        sample_ids=[b.match_id for b in bundles],
        sources=[(b.match_id,) for b in bundles],
        groups=arange.copy(),
        families=families,
        label_map=accounts,
    )


# --- pair dataset ------------------------------------------------------------


def pair_indices(accounts: Sequence[str], seed: int) -> tuple[list[tuple[int, int]], list[tuple[int, int]]]:
    """All ordered same-player pairs, and an equal number of different-player pairs
    drawn uniformly without replacement."""
    n = len(accounts)
    positives = [(i, j) for i in range(n) for j in range(n) if i != j and accounts[i] == accounts[j]]
    if not positives:
        raise ValueError("pair dataset needs at least one player with 2 or more matches")
    negatives_all = [(i, j) for i in range(n) for j in range(n) if accounts[i] != accounts[j]]
    if len(negatives_all) < len(positives):
        raise ValueError(
            f"only {len(negatives_all)} different-player pairs for {len(positives)} positives"
        )
    rng = np.random.default_rng(seed)
    picked = np.sort(rng.choice(len(negatives_all), len(positives), replace=False))
    return positives, [negatives_all[k] for k in picked]


def build_pair_dataset(
    bundles: Sequence[MatchFeatureBundle],
    seed: int = 0,
    catalog: ItemCatalog | None = None,
) -> LabeledDataset:
    """Label-balanced ordered pairs; each family is the concatenation of both
    matches' blocks. With a catalog, the item-difference family is added."""
    if len({b.account_id for b in bundles}) < 2:
        raise ValueError("pair dataset needs at least 2 players")
    positives, negatives = pair_indices([b.account_id for b in bundles], seed)
    pairs = positives + negatives
    labels = np.array([1] * len(positives) + [0] * len(negatives), dtype=np.int64)

    group_of: dict[tuple[int, int], int] = {}
    groups = np.array(
        [group_of.setdefault((min(i, j), max(i, j)), len(group_of)) for i, j in pairs], dtype=np.int64
    )
    a_idx = np.array([i for i, _ in pairs], dtype=np.int64)
    b_idx = np.array([j for _, j in pairs], dtype=np.int64)
    owner = np.arange(len(pairs), dtype=np.int64)

    def paired(name: str, per_match: np.ndarray, columns: list[str]) -> FamilyMatrix:
        X = np.hstack([per_match[a_idx], per_match[b_idx]])
        return FamilyMatrix(X, owner.copy(), [f"a.{c}" for c in columns] + [f"b.{c}" for c in columns])

    families: dict[str, FamilyMatrix] = {}
    first = bundles[0]
    if first.aggregates:
        P = first.aggregates[MOUSE_FAMILIES[0]].width // (len(FEATURE_NAMES) * 4)
        for kind in MOUSE_FAMILIES:
            per_match = np.vstack([b.aggregates[kind].values for b in bundles])
            families[kind] = paired(kind, per_match, aggregate_columns(kind, P))
    families[STATS_FAMILY] = paired(
        STATS_FAMILY, np.vstack([b.stats.values for b in bundles]), list(STAT_NAMES)
    )
    for name in first.items:
        per_match = np.vstack([b.items[name].values for b in bundles])
        families[name] = paired(name, per_match, _item_columns(name, per_match.shape[1]))
    if catalog is not None and all(b.snapshots is not None for b in bundles):
        diff = np.vstack(
            [encode_diff(bundles[i].snapshots, bundles[j].snapshots, catalog).values for i, j in pairs]
        )
        families["diff"] = FamilyMatrix(diff, owner.copy(), _item_columns("diff", encoding_width("diff", catalog)))

    return LabeledDataset(
        experiment="pairs",
        labels=labels,
        sample_ids=[f"{bundles[i].match_id}|{bundles[j].match_id}" for i, j in pairs],
        sources=[(bundles[i].match_id, bundles[j].match_id) for i, j in pairs],
        groups=groups,
        families=families,
        label_map=["different", "same"],
        positive_label=1,
    )


# --- normalization -----------------------------------------------------------


@dataclasses.dataclass(eq=False)
class FamilyScaling:
    mean: np.ndarray
    std: np.ndarray
    constant: np.ndarray
    scale: bool


@dataclasses.dataclass(eq=False)
class Normalizer:
    """Per-family train-fold statistics. Missing entries are imputed with the
    train mean; scaled families are z-scored, constant columns map to 0."""

    families: dict[str, FamilyScaling]

    def transform(self, family: str, X: np.ndarray) -> np.ndarray:
        sc = self.families[family]
        X = np.where(np.isnan(X), sc.mean, X)
        if not sc.scale:
            return X
        out = (X - sc.mean) / np.where(sc.constant, 1.0, sc.std)
        out[:, sc.constant] = 0.0
        return out

    def apply(self, dataset: LabeledDataset) -> LabeledDataset:
        families = {
            name: dataclasses.replace(fm, X=self.transform(name, fm.X))
            for name, fm in dataset.families.items()
            if name in self.families
        }
        return dataset.with_families(families)

    def to_records(self) -> list[dict]:
        return [
            {
                "family": name,
                "scale": sc.scale,
                "mean": sc.mean.tolist(),
                "std": sc.std.tolist(),
                "constant": sc.constant.astype(int).tolist(),
            }
            for name, sc in self.families.items()
        ]

    @classmethod
    def from_records(cls, records: Iterable[Mapping]) -> "Normalizer":
        return cls(
            {
                r["family"]: FamilyScaling(
                    np.asarray(r["mean"], dtype=float),
                    np.asarray(r["std"], dtype=float),
                    np.asarray(r["constant"], dtype=bool),
                    bool(r["scale"]),
                )
                for r in records
            }
        )


def fit_normalizer(dataset: LabeledDataset, train_samples: np.ndarray) -> Normalizer:
    train_samples = np.asarray(train_samples)
    if len(train_samples) == 0:
        raise ValueError("normalizer needs a nonempty training set")
    out = {}
    for name, fm in dataset.families.items():
        X = fm.X[fm.rows_for(train_samples)]
        observed = ~np.isnan(X)
        counts = observed.sum(axis=0)
        safe = np.where(observed, X, 0.0)
        mean = np.divide(safe.sum(axis=0), counts, out=np.zeros(fm.width), where=counts > 0)
        dev = np.where(observed, X - mean, 0.0)
        var = np.divide((dev * dev).sum(axis=0), counts, out=np.zeros(fm.width), where=counts > 0)
        std = np.sqrt(var)
        out[name] = FamilyScaling(mean, std, std <= 1e-12, name in NORMALIZED_FAMILIES)
    return Normalizer(out)


# --- folds -------------------------------------------------------------------


@dataclasses.dataclass(frozen=True, eq=False)
class FoldPlan:
    k: int
    assignment: np.ndarray  # fold index per sample

    def test(self, fold: int) -> np.ndarray:
        return np.nonzero(self.assignment == fold)[0]

    def train(self, fold: int) -> np.ndarray:
        return np.nonzero(self.assignment != fold)[0]


def _stratified_unit_order(labels: np.ndarray, groups: np.ndarray, samples: np.ndarray, rng) -> list[int]:
    """Groups of the given samples, label-major with a seeded shuffle inside each label."""
    unit_label: dict[int, int] = {}
    for s in samples:
        unit_label.setdefault(int(groups[s]), int(labels[s]))
    order: list[int] = []
    for label in sorted(set(unit_label.values())):
        units = np.array(sorted(u for u, l in unit_label.items() if l == label))
        order.extend(int(u) for u in rng.permutation(units))
    return order


def make_folds(dataset: LabeledDataset, k: int, seed: int = 0) -> FoldPlan:
    """Stratified folds over groups (a pair and its mirror share a fold)."""
    samples = np.arange(dataset.n_samples)
    n_units = len(np.unique(dataset.groups))
    if k < 2 or k > n_units:
        raise ValueError(f"k must be in [2, {n_units}], got {k}")
    rng = np.random.default_rng(seed)
    order = _stratified_unit_order(dataset.labels, dataset.groups, samples, rng)
    fold_of_unit = {u: i % k for i, u in enumerate(order)}
    assignment = np.array([fold_of_unit[int(g)] for g in dataset.groups], dtype=np.int64)
    return FoldPlan(k, assignment)


def stacking_split(
    dataset: LabeledDataset, samples: np.ndarray, fraction: float, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Split samples into (base, holdout) with ``fraction`` of groups in base,
    stratified by label and keeping groups intact."""
    if not 0 < fraction < 1:
        raise ValueError("stacking fraction must be in (0, 1)")
    rng = np.random.default_rng(seed)
    order = _stratified_unit_order(dataset.labels, dataset.groups, samples, rng)
    hold = 1.0 - fraction
    holdout_units = {u for i, u in enumerate(order) if int((i + 1) * hold) > int(i * hold)}
    in_hold = np.array([int(dataset.groups[s]) in holdout_units for s in samples], dtype=bool)
    return samples[~in_hold], samples[in_hold]


# --- export ------------------------------------------------------------------


def write_manifest(dataset: LabeledDataset, handle: IO[str], folds: FoldPlan | None = None) -> None:
    for s in range(dataset.n_samples):
        record = {
            "sample_id": dataset.sample_ids[s],
            "label": int(dataset.labels[s]),
            "label_name": dataset.label_map[int(dataset.labels[s])],
            "fold": None if folds is None else int(folds.assignment[s]),
            "matches": list(dataset.sources[s]),
        }
        handle.write(json.dumps(record, separators=(",", ":")) + "\n")


def write_family_csv(dataset: LabeledDataset, family: str, handle: IO[str]) -> None:
    fm = dataset.families[family]
    writer = csv.writer(handle, lineterminator="\n")
    writer.writerow(["sample_id"] + fm.columns)
    for row, owner in zip(fm.X, fm.owner):
        writer.writerow([dataset.sample_ids[owner]] + ["" if np.isnan(v) else repr(float(v)) for v in row])
