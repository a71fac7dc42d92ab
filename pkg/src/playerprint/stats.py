"""Per-match game statistics, equal-duration time slicing and match-level
aggregation of complex-action features."""

from __future__ import annotations

import csv
import dataclasses
from typing import IO, Iterable, Sequence

import numpy as np

from .events import ReplayEventStream
from .mouse import (
    ACTION_KINDS,
    FEATURE_NAMES,
    N_FEATURES,
    ComplexAction,
    SegmentationConfig,
    action_matrix,
    complex_actions,
)

SUPPORTED_SLICES = (1, 2, 3, 5)
SLICE_STATISTICS = ("mean", "std", "min", "max")
AGGREGATE_WIDTH = N_FEATURES * len(SLICE_STATISTICS)  # 152 per kind per slice

STAT_NAMES = (
    "kills",
    "assists",
    "deaths",
    "gold_per_min",
    "xp_per_min",
    "cs_per_min",
    "denies",
    "actions_per_min",
    "move_target_pm",
    "move_position_pm",
    "attack_target_pm",
    "attack_position_pm",
    "cast_target_pm",
    "cast_position_pm",
    "cast_notarget_pm",
    "hold_pm",
)

# command (kind, targeting) -> per-minute field
_COMMAND_FIELDS = {
    ("move", "unit"): "move_target_pm",
    ("move", "position"): "move_position_pm",
    ("attack", "unit"): "attack_target_pm",
    ("attack", "position"): "attack_position_pm",
    ("cast", "unit"): "cast_target_pm",
    ("cast", "position"): "cast_position_pm",
    ("cast", "none"): "cast_notarget_pm",
    ("hold", "none"): "hold_pm",
}


@dataclasses.dataclass(frozen=True, slots=True)
class GameStatVector:
    kills: float
    assists: float
    deaths: float
    gold_per_min: float
    xp_per_min: float
    cs_per_min: float
    denies: float
    actions_per_min: float
    move_target_pm: float
    move_position_pm: float
    attack_target_pm: float
    attack_position_pm: float
    cast_target_pm: float
    cast_position_pm: float
    cast_notarget_pm: float
    hold_pm: float

    def to_array(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in STAT_NAMES], dtype=float)


def command_counts(stream: ReplayEventStream) -> dict[tuple[str, str], int]:
    counts = dict.fromkeys(_COMMAND_FIELDS, 0)
    for cmd in stream.commands:
        counts[(cmd.kind, cmd.targeting)] += 1
    return counts


def game_stats(stream: ReplayEventStream) -> GameStatVector:
    """Sixteen statistics; totals for kills/assists/deaths/denies, per-minute rates otherwise."""
    h = stream.header
    if h.duration_ticks <= 0:
        raise ValueError(f"match {h.match_id}: duration must be positive for per-minute stats")
    per_min = 60.0 * h.tick_rate / h.duration_ticks
    f = stream.finals
    values = {
        "kills": float(f.kills),
        "assists": float(f.assists),
        "deaths": float(f.deaths),
        "gold_per_min": f.gold_total * per_min,
        "xp_per_min": f.xp_total * per_min,
        "cs_per_min": f.last_hits * per_min,
        "denies": float(f.denies),
        "actions_per_min": len(stream.commands) * per_min,
    }
    for key, count in command_counts(stream).items():
        values[_COMMAND_FIELDS[key]] = count * per_min
    return GameStatVector(**values)


def write_stats_csv(rows: Iterable[tuple[str, GameStatVector]], handle: IO[str]) -> None:
    writer = csv.writer(handle, lineterminator="\n")
    writer.writerow(("match_id",) + STAT_NAMES)
    for match_id, vec in rows:
        writer.writerow([match_id] + [repr(float(v)) for v in vec.to_array()])


# --- time slicing ------------------------------------------------------------


@dataclasses.dataclass(frozen=True, slots=True)
class TimeSlicePlan:
    P: int
    edges: tuple[int, ...]  # P + 1 edges from 0 to duration

    @property
    def boundaries(self) -> tuple[int, ...]:
        """Interior cut points."""
        return self.edges[1:-1]

    def slice_of(self, tick: int) -> int:
        for k in range(self.P - 1):
            if tick < self.edges[k + 1]:
                return k
        return self.P - 1


def slice_plan(duration_ticks: int, P: int) -> TimeSlicePlan:
    if P not in SUPPORTED_SLICES:
        raise ValueError(f"unsupported slice count {P}; choose one of {SUPPORTED_SLICES}")
    base, extra = divmod(duration_ticks, P)
    edges = [0]
    for k in range(P):
        edges.append(edges[-1] + base + (1 if k < extra else 0))
    return TimeSlicePlan(P=P, edges=tuple(edges))


def slice_stream(stream: ReplayEventStream, P: int) -> list[ReplayEventStream]:
    """Split a match into P equal-duration sub-streams with ticks rebased to each slice.

    An event on a cut point belongs to the later slice; the final edge is
    inclusive. Finals are copied unchanged into every slice.
    """
    plan = slice_plan(stream.header.duration_ticks, P)
    if P == 1:
        return [stream]
    buckets: list[dict[str, list]] = [
        {"cursor": [], "commands": [], "inventories": []} for _ in range(P)
    ]
    for group in ("cursor", "commands", "inventories"):
        for event in getattr(stream, group):
            k = plan.slice_of(event.tick)
            buckets[k][group].append(dataclasses.replace(event, tick=event.tick - plan.edges[k]))
    out = []
    for k in range(P):
        header = dataclasses.replace(
            stream.header, duration_ticks=plan.edges[k + 1] - plan.edges[k]
        )
        out.append(
            ReplayEventStream(
                header=header,
                cursor=tuple(buckets[k]["cursor"]),
                commands=tuple(buckets[k]["commands"]),
                inventories=tuple(buckets[k]["inventories"]),
                finals=stream.finals,
            )
        )
    return out


# --- aggregation -------------------------------------------------------------


@dataclasses.dataclass(frozen=True, slots=True, eq=False)
class MatchAggregate:
    """values[slice, kind, feature, statistic]; missing[slice, kind] marks empty slices.

    Missing entries hold NaN in ``values``.
    """

    values: np.ndarray
    missing: np.ndarray

    @property
    def P(self) -> int:
        return self.values.shape[0]

    def block(self, kind: str) -> np.ndarray:
        """Flat vector of 152 * P numbers for one action kind, slice-major."""
        k = ACTION_KINDS.index(kind)
        # (P, 38, 4) -> statistic-major inside each slice so names read slice.statistic.series
        return np.transpose(self.values[:, k], (0, 2, 1)).reshape(-1).copy()

    def mask(self, kind: str) -> np.ndarray:
        k = ACTION_KINDS.index(kind)
        return np.repeat(self.missing[:, k], AGGREGATE_WIDTH)


def aggregate_columns(kind: str, P: int) -> list[str]:
    return [
        f"{kind}.{p}.{stat}.{feature}"
        for p in range(P)
        for stat in SLICE_STATISTICS
        for feature in FEATURE_NAMES
    ]


def _describe(rows: np.ndarray) -> np.ndarray:
    """(n, 38) -> (38, 4) of mean, population std, min, max."""
    return np.stack([rows.mean(axis=0), rows.std(axis=0), rows.min(axis=0), rows.max(axis=0)], axis=1)


def aggregate(actions_per_slice: Sequence[Sequence[ComplexAction]]) -> MatchAggregate:
    P = len(actions_per_slice)
    values = np.full((P, len(ACTION_KINDS), N_FEATURES, len(SLICE_STATISTICS)), np.nan)
    missing = np.ones((P, len(ACTION_KINDS)), dtype=bool)
    for p, actions in enumerate(actions_per_slice):
        for k, kind in enumerate(ACTION_KINDS):
            rows = action_matrix(actions, kind)
            if len(rows):
                values[p, k] = _describe(rows)
                missing[p, k] = False
    return MatchAggregate(values=values, missing=missing)


def sliced_actions(stream: ReplayEventStream, P: int, cfg: SegmentationConfig) -> list[list[ComplexAction]]:
    """Complex actions per slice; sequences never cross a slice boundary."""
    return [complex_actions(sub.cursor, sub.commands, cfg) for sub in slice_stream(stream, P)]


def match_aggregate(stream: ReplayEventStream, P: int, cfg: SegmentationConfig) -> MatchAggregate:
    return aggregate(sliced_actions(stream, P, cfg))
