"""Mouse dynamics: movement-sequence segmentation, kinematic series and
command-paired complex actions.

Kinematic quantities live on a staggered grid. Step quantities (angle,
velocities) belong to the midpoint of each pair of samples; their first
differences (curvature, acceleration, angular velocity) belong to the
interior samples; second differences (rate of change of curvature, jerk)
belong to the interior step midpoints. Each difference is divided by the
spacing of the grid it is taken on, so the estimates stay consistent on
irregular tick spacing.
"""

from __future__ import annotations

import bisect
import csv
import dataclasses
import math
from typing import IO, Iterable, Sequence

import numpy as np

from .events import CommandEvent, CursorSample

SERIES_NAMES = ("theta", "c", "dc", "vx", "vy", "v", "a", "jerk", "w")
AGGREGATES = ("min", "max", "mean", "std")
FEATURE_NAMES = tuple(f"{s}_{agg}" for s in SERIES_NAMES for agg in AGGREGATES) + ("t_n", "d")
N_FEATURES = len(FEATURE_NAMES)  # 38
ACTION_KINDS = ("attack", "move", "cast")
MIN_KINEMATIC_LENGTH = 4


class SequenceTooShort(ValueError):
    pass


@dataclasses.dataclass(frozen=True, slots=True)
class SegmentationConfig:
    tau_ms: float = 300.0
    tick_rate: int = 30

    def __post_init__(self) -> None:
        if self.tau_ms <= 0:
            raise ValueError(f"tau_ms must be positive, got {self.tau_ms}")
        if self.tick_rate < 1:
            raise ValueError(f"tick_rate must be >= 1, got {self.tick_rate}")

    @property
    def tau_ticks(self) -> int:
        # round half up; at least one tick
        return max(1, math.floor(self.tau_ms * self.tick_rate / 1000.0 + 0.5))


@dataclasses.dataclass(frozen=True, slots=True, eq=False)
class MovementSequence:
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray

    @property
    def n(self) -> int:
        return len(self.t)

    @property
    def last_tick(self) -> int:
        return int(self.t[-1])

    @property
    def last_position(self) -> tuple[float, float]:
        return float(self.x[-1]), float(self.y[-1])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MovementSequence):
            return NotImplemented
        return (
            np.array_equal(self.t, other.t)
            and np.array_equal(self.x, other.x)
            and np.array_equal(self.y, other.y)
        )


@dataclasses.dataclass(frozen=True, slots=True)
class KinematicSeries:
    theta: np.ndarray
    c: np.ndarray
    dc: np.ndarray
    vx: np.ndarray
    vy: np.ndarray
    v: np.ndarray
    a: np.ndarray
    jerk: np.ndarray
    w: np.ndarray
    ds: np.ndarray

    def series(self) -> tuple[np.ndarray, ...]:
        """The nine aggregated series, in feature order."""
        return tuple(getattr(self, name) for name in SERIES_NAMES)


@dataclasses.dataclass(frozen=True, slots=True, eq=False)
class ComplexAction:
    kind: str
    tick: int
    features: np.ndarray

    @property
    def t_n(self) -> float:
        return float(self.features[-2])

    @property
    def d(self) -> float:
        return float(self.features[-1])


# --- segmentation ------------------------------------------------------------


def _collapse_ticks(cursor: Sequence[CursorSample]) -> list[CursorSample]:
    """Keep the last sample recorded for each tick."""
    out: list[CursorSample] = []
    for sample in cursor:
        if out and out[-1].tick == sample.tick:
            out[-1] = sample
        else:
            out.append(sample)
    return out


def _to_sequence(run: list[tuple[int, int, int]]) -> MovementSequence:
    arr = np.asarray(run, dtype=float)
    return MovementSequence(t=arr[:, 0], x=arr[:, 1], y=arr[:, 2])


def raw_runs(cursor: Sequence[CursorSample], tau_ticks: int) -> list[list[tuple[int, int, int]]]:
    """Split a cursor trail into maximal runs, before any length filtering.

    A run ends when the cursor stays put for ``tau_ticks`` or longer. A new run
    starts from the resting sample just before motion resumes, provided that
    sample is itself within ``tau_ticks`` of the first moving one. Consecutive
    duplicate positions are collapsed to their first occurrence.
    """
    samples = _collapse_ticks(cursor)
    if not samples:
        return []
    runs: list[list[tuple[int, int, int]]] = []
    first = samples[0]
    run = [(first.tick, first.x, first.y)]
    px, py = first.x, first.y
    arrival = latest = first.tick
    for s in samples[1:]:
        if s.x == px and s.y == py:
            latest = s.tick
            continue
        if s.tick - arrival >= tau_ticks:
            runs.append(run)
            if s.tick - latest < tau_ticks:
                run = [(latest, px, py), (s.tick, s.x, s.y)]
            else:
                run = [(s.tick, s.x, s.y)]
        else:
            run.append((s.tick, s.x, s.y))
        px, py = s.x, s.y
        arrival = latest = s.tick
    runs.append(run)
    return runs


def segment(cursor: Sequence[CursorSample], cfg: SegmentationConfig) -> list[MovementSequence]:
    """Segment a tick-ordered cursor trail into movement sequences with n >= 2."""
    return [_to_sequence(run) for run in raw_runs(cursor, cfg.tau_ticks) if len(run) >= 2]


# --- kinematics --------------------------------------------------------------


def _wrap(angle: np.ndarray) -> np.ndarray:
    """Map angles into (-pi, pi]."""
    wrapped = np.mod(angle + np.pi, 2.0 * np.pi) - np.pi
    return np.where(wrapped == -np.pi, np.pi, wrapped)


def kinematics(seq: MovementSequence, cfg: SegmentationConfig) -> KinematicSeries:
    if seq.n < MIN_KINEMATIC_LENGTH:
        raise SequenceTooShort(f"need at least {MIN_KINEMATIC_LENGTH} samples, got {seq.n}")
    t = np.asarray(seq.t, dtype=float) / cfg.tick_rate
    dx = np.diff(np.asarray(seq.x, dtype=float))
    dy = np.diff(np.asarray(seq.y, dtype=float))
    dt = np.diff(t)
    ds = np.hypot(dx, dy)

    heading = np.arctan2(dy, dx)
    dtheta = _wrap(np.diff(heading))
    theta = heading[0] + np.concatenate(([0.0], np.cumsum(dtheta)))

    # spacing between consecutive step midpoints, in time and in arc length
    dt_mid = 0.5 * (dt[:-1] + dt[1:])
    ds_mid = 0.5 * (ds[:-1] + ds[1:])

    vx = dx / dt
    vy = dy / dt
    v = np.hypot(vx, vy)
    c = dtheta / ds_mid
    a = np.diff(v) / dt_mid
    w = dtheta / dt_mid
    # second-level quantities sit between interior samples: spacing is the step itself
    dc = np.diff(c) / ds[1:-1]
    jerk = np.diff(a) / dt[1:-1]
    return KinematicSeries(theta=theta, c=c, dc=dc, vx=vx, vy=vy, v=v, a=a, jerk=jerk, w=w, ds=ds)


def summarize(kin: KinematicSeries) -> np.ndarray:
    """Min, max, mean and population std of each of the nine series (36 values)."""
    out = np.empty(4 * len(SERIES_NAMES))
    for i, s in enumerate(kin.series()):
        out[4 * i] = s.min()
        out[4 * i + 1] = s.max()
        out[4 * i + 2] = s.mean()
        out[4 * i + 3] = s.std()
    return out


# --- complex actions ---------------------------------------------------------


def pair_commands(
    sequences: Sequence[MovementSequence],
    commands: Iterable[CommandEvent],
    cfg: SegmentationConfig,
) -> list[ComplexAction]:
    """Pair each attack/move/cast command with the movement sequence leading up to it.

    The partner is the latest usable sequence (n >= 4) whose last tick is at or
    before the command and less than ``tau_ticks`` before it. A sequence may
    serve several commands. Unpaired and hold commands produce nothing.
    """
    usable = [s for s in sequences if s.n >= MIN_KINEMATIC_LENGTH]
    if not usable:
        return []
    usable.sort(key=lambda s: s.last_tick)
    ends = [s.last_tick for s in usable]
    tau = cfg.tau_ticks
    summaries: dict[int, np.ndarray] = {}
    actions: list[ComplexAction] = []
    for cmd in commands:
        if cmd.kind not in ACTION_KINDS:
            continue
        idx = bisect.bisect_right(ends, cmd.tick) - 1
        if idx < 0:
            continue
        seq = usable[idx]
        t_n = cmd.tick - seq.last_tick
        if t_n >= tau:
            continue
        if idx not in summaries:
            summaries[idx] = summarize(kinematics(seq, cfg))
        lx, ly = seq.last_position
        features = np.empty(N_FEATURES)
        features[:-2] = summaries[idx]
        features[-2] = t_n
        features[-1] = math.hypot(cmd.x - lx, cmd.y - ly)
        actions.append(ComplexAction(kind=cmd.kind, tick=cmd.tick, features=features))
    return actions


def complex_actions(cursor, commands, cfg: SegmentationConfig) -> list[ComplexAction]:
    """Segment a cursor trail and pair it with commands in one call."""
    return pair_commands(segment(cursor, cfg), commands, cfg)


@dataclasses.dataclass(frozen=True, slots=True)
class ActionMix:
    attack: float
    move: float
    cast: float
    empty: bool = False

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.attack, self.move, self.cast)


def action_mix(actions: Iterable[ComplexAction | str]) -> ActionMix:
    counts = dict.fromkeys(ACTION_KINDS, 0)
    for action in actions:
        kind = action if isinstance(action, str) else action.kind
        counts[kind] += 1
    total = sum(counts.values())
    if total == 0:
        return ActionMix(0.0, 0.0, 0.0, empty=True)
    return ActionMix(*(counts[k] / total for k in ACTION_KINDS))


def action_matrix(actions: Iterable[ComplexAction], kind: str) -> np.ndarray:
    rows = [a.features for a in actions if a.kind == kind]
    if not rows:
        return np.empty((0, N_FEATURES))
    return np.vstack(rows)


def write_actions_csv(actions: Iterable[ComplexAction], handle: IO[str]) -> None:
    """Debug dump: one row per complex action, fixed 38-name header plus kind/tick."""
    writer = csv.writer(handle, lineterminator="\n")
    writer.writerow(("kind", "tick") + FEATURE_NAMES)
    for a in actions:
        writer.writerow([a.kind, a.tick] + [repr(float(v)) for v in a.features])
