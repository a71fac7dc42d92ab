"""Inventory itemization encodings.

Five encodings of the start/end inventory snapshots of a match:

* ``onehot``   every (sample, slot, item) position, start and end
* ``starting`` start snapshot only, restricted to starting items
* ``boots``    per slot, which of the boot types (or none) occupies it
* ``hashed``   signed feature hashing of (sample, slot, item) keys
* ``diff``     per (slot, item) agreement bits between two matches
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
import warnings
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .blocks import FeatureBlock
from .events import INVENTORY_SLOTS, InventorySnapshot, ReplayEventStream

CATALOG_ENV = "PLAYERPRINT_CATALOG"
ENCODINGS = ("hashed", "onehot", "starting", "boots", "diff")
DEFAULT_BUCKETS = 64
BOOT_STATES = 7  # six boot types plus "none"

ItemFeatureBlock = FeatureBlock


class UnknownItemError(KeyError):
    def __init__(self, item_id: str):
        self.item_id = item_id
        super().__init__(f"item {item_id!r} is not in the catalog")


@dataclasses.dataclass(frozen=True, slots=True)
class Item:
    id: str
    name: str
    starting: bool = False
    boots: bool = False


@dataclasses.dataclass(frozen=True)
class ItemCatalog:
    items: tuple[Item, ...]
    version: str = "unversioned"

    def __post_init__(self) -> None:
        ids = [item.id for item in self.items]
        if len(set(ids)) != len(ids):
            raise ValueError("catalog item ids must be unique")
        object.__setattr__(self, "_index", {i: n for n, i in enumerate(ids)})
        object.__setattr__(
            self, "_starting", {item.id: n for n, item in enumerate(i for i in self.items if i.starting)}
        )
        object.__setattr__(
            self, "_boots", {item.id: n for n, item in enumerate(i for i in self.items if i.boots)}
        )

    def __len__(self) -> int:
        return len(self.items)

    def __contains__(self, item_id: str) -> bool:
        return item_id in self._index

    def index(self, item_id: str) -> int:
        try:
            return self._index[item_id]
        except KeyError:
            raise UnknownItemError(item_id) from None

    @property
    def starting_ids(self) -> list[str]:
        return list(self._starting)

    @property
    def boot_ids(self) -> list[str]:
        return list(self._boots)

    def starting_index(self, item_id: str) -> int | None:
        self.index(item_id)
        return self._starting.get(item_id)

    def boot_index(self, item_id: str) -> int | None:
        self.index(item_id)
        return self._boots.get(item_id)


def synthetic_catalog(n_items: int = 281, n_starting: int = 31, n_boots: int = 6) -> ItemCatalog:
    """Catalog with the given counts: starting items first, then boots, then the rest."""
    if n_starting + n_boots > n_items:
        raise ValueError("starting + boots items exceed catalog size")
    items = []
    for n in range(n_items):
        if n < n_starting:
            items.append(Item(f"i{n:03d}", f"starter-{n:02d}", starting=True))
        elif n < n_starting + n_boots:
            items.append(Item(f"i{n:03d}", f"boots-{n - n_starting}", boots=True))
        else:
            items.append(Item(f"i{n:03d}", f"item-{n:03d}"))
    return ItemCatalog(tuple(items), version=f"synthetic-{n_items}-{n_starting}-{n_boots}")


def parse_catalog(lines: Iterable[str]) -> ItemCatalog:
    items = []
    version = "unversioned"
    for number, raw in enumerate(lines, start=1):
        if not raw.strip():
            continue
        try:
            record = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ValueError(f"catalog line {number}: malformed JSON ({exc.msg})") from None
        if "version" in record and "id" not in record:
            version = str(record["version"])
            continue
        try:
            items.append(
                Item(
                    id=str(record["id"]),
                    name=str(record.get("name", record["id"])),
                    starting=bool(record.get("starting", False)),
                    boots=bool(record.get("boots", False)),
                )
            )
        except KeyError:
            raise ValueError(f"catalog line {number}: missing 'id'") from None
    return ItemCatalog(tuple(items), version=version)


def catalog_records(catalog: ItemCatalog) -> list[dict]:
    out: list[dict] = [{"version": catalog.version}]
    out.extend(dataclasses.asdict(item) for item in catalog.items)
    return out


def save_catalog(catalog: ItemCatalog, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="\n") as handle:
        for record in catalog_records(catalog):
            handle.write(json.dumps(record, separators=(",", ":")) + "\n")


def load_catalog(path: str | Path | None = None) -> ItemCatalog:
    """Load a catalog file; falls back to $PLAYERPRINT_CATALOG, then the bundled catalog."""
    if path is None:
        path = os.environ.get(CATALOG_ENV)
    if path is None:
        text = resources.files("playerprint").joinpath("data/catalog.ndjson").read_text("utf-8")
        return parse_catalog(text.splitlines())
    with Path(path).open("r", encoding="utf-8") as handle:
        return parse_catalog(handle)


# --- encodings ---------------------------------------------------------------


def sample_points(stream: ReplayEventStream) -> tuple[InventorySnapshot, InventorySnapshot]:
    """Earliest and latest inventory snapshots of a match."""
    if not stream.inventories:
        raise ValueError(f"match {stream.header.match_id} has no inventory snapshots")
    ordered = sorted(stream.inventories, key=lambda s: s.tick)
    if len(ordered) == 1:
        warnings.warn(
            f"match {stream.header.match_id} has a single inventory snapshot; "
            "using it as both start and end",
            stacklevel=2,
        )
    return ordered[0], ordered[-1]


def _check_known(snapshots: Sequence[InventorySnapshot], catalog: ItemCatalog) -> None:
    for snap in snapshots:
        for item in snap.slots:
            if item is not None:
                catalog.index(item)


def encode_onehot(start: InventorySnapshot, end: InventorySnapshot, catalog: ItemCatalog) -> FeatureBlock:
    n = len(catalog)
    values = np.zeros(2 * INVENTORY_SLOTS * n)
    for sample, snap in enumerate((start, end)):
        for slot, item in enumerate(snap.slots):
            if item is not None:
                values[(sample * INVENTORY_SLOTS + slot) * n + catalog.index(item)] = 1.0
    return FeatureBlock("onehot", values)


def encode_starting(start: InventorySnapshot, catalog: ItemCatalog) -> FeatureBlock:
    n = len(catalog.starting_ids)
    values = np.zeros(INVENTORY_SLOTS * n)
    for slot, item in enumerate(start.slots):
        if item is None:
            continue
        idx = catalog.starting_index(item)
        if idx is not None:
            values[slot * n + idx] = 1.0
    return FeatureBlock("starting", values)


def encode_boots(start: InventorySnapshot, end: InventorySnapshot, catalog: ItemCatalog) -> FeatureBlock:
    """Per slot, the boot type held there; the end snapshot wins over the start."""
    n_types = len(catalog.boot_ids)
    states = n_types + 1
    _check_known((start, end), catalog)
    values = np.zeros(INVENTORY_SLOTS * states)
    for slot in range(INVENTORY_SLOTS):
        state = n_types  # none
        for snap in (start, end):
            item = snap.slots[slot]
            if item is not None:
                idx = catalog.boot_index(item)
                if idx is not None:
                    state = idx
        values[slot * states + state] = 1.0
    return FeatureBlock("boots", values)


def _bucket_and_sign(key: str, buckets: int, seed: int) -> tuple[int, float]:
    digest = hashlib.blake2b(key.encode("utf-8"), digest_size=8, salt=seed.to_bytes(8, "little", signed=False))
    value = int.from_bytes(digest.digest(), "little")
    return (value >> 1) % buckets, (1.0 if value & 1 else -1.0)


def encode_hashed(
    start: InventorySnapshot,
    end: InventorySnapshot,
    catalog: ItemCatalog,
    buckets: int = DEFAULT_BUCKETS,
    seed: int = 0,
) -> FeatureBlock:
    if buckets <= 0:
        raise ValueError(f"buckets must be positive, got {buckets}")
    if seed < 0:
        raise ValueError("hash seed must be non-negative")
    values = np.zeros(buckets)
    for sample, snap in enumerate((start, end)):
        for slot, item in enumerate(snap.slots):
            if item is None:
                continue
            catalog.index(item)
            bucket, sign = _bucket_and_sign(f"{sample}:{slot}:{item}", buckets, seed)
            values[bucket] += sign
    return FeatureBlock("hashed", values)


def encode_diff(
    a: tuple[InventorySnapshot, InventorySnapshot],
    b: tuple[InventorySnapshot, InventorySnapshot],
    catalog: ItemCatalog,
) -> FeatureBlock:
    """1 at (slot, item) when both matches hold that item in that slot,
    comparing start with start and end with end."""
    n = len(catalog)
    _check_known((*a, *b), catalog)
    values = np.zeros(INVENTORY_SLOTS * n)
    for snap_a, snap_b in zip(a, b):
        for slot in range(INVENTORY_SLOTS):
            item = snap_a.slots[slot]
            if item is not None and item == snap_b.slots[slot]:
                values[slot * n + catalog.index(item)] = 1.0
    return FeatureBlock("diff", values)


def encoding_width(name: str, catalog: ItemCatalog, buckets: int = DEFAULT_BUCKETS) -> int:
    if name == "onehot":
        return len(catalog) * INVENTORY_SLOTS * 2
    if name == "starting":
        return len(catalog.starting_ids) * INVENTORY_SLOTS
    if name == "boots":
        return (len(catalog.boot_ids) + 1) * INVENTORY_SLOTS
    if name == "hashed":
        return buckets
    if name == "diff":
        return len(catalog) * INVENTORY_SLOTS
    raise ValueError(f"unknown item encoding {name!r}")


def encode_match(
    stream: ReplayEventStream,
    catalog: ItemCatalog,
    encodings: Iterable[str] = ("hashed", "onehot", "starting", "boots"),
    buckets: int = DEFAULT_BUCKETS,
    seed: int = 0,
) -> dict[str, FeatureBlock]:
    """All single-match encodings for one stream (``diff`` needs a pair)."""
    start, end = sample_points(stream)
    out = {}
    for name in encodings:
        if name == "onehot":
            out[name] = encode_onehot(start, end, catalog)
        elif name == "starting":
            out[name] = encode_starting(start, catalog)
        elif name == "boots":
            out[name] = encode_boots(start, end, catalog)
        elif name == "hashed":
            out[name] = encode_hashed(start, end, catalog, buckets, seed)
        else:
            raise ValueError(f"encoding {name!r} is not a single-match encoding")
    return out
