"""Synthetic players and replays with a tunable separability dial.

A profile is the population centre moved along a per-profile random direction,
scaled by the dial: at 0 every profile generates from the same distribution,
at 1 profiles sit far apart. Matches are generated from a profile with a seed
derived from (seed, profile index, match index).
"""

from __future__ import annotations

import dataclasses
import json
import math
from pathlib import Path
from typing import IO, Iterable, Mapping, Sequence

import numpy as np

from .events import (
    COMMAND_KINDS,
    CommandEvent,
    CursorSample,
    FinalStats,
    InventorySnapshot,
    INVENTORY_SLOTS,
    MatchHeader,
    ReplayEventStream,
    _ALLOWED_TARGETING,
    save_stream,
)
from .items import ItemCatalog, synthetic_catalog

SCREEN = (1920.0, 1080.0)
HERO_ID = 1


@dataclasses.dataclass(frozen=True)
class PlayerProfile:
    profile_id: str
    speed_mean: float  # units per second
    speed_std: float
    jitter: float  # amplitude of the perpendicular wobble, units
    curvature: float  # signed bow of each stroke, fraction of its length
    reach: float  # mean stroke length, units
    idle_mean: float  # mean extra rest after each stroke, seconds
    reaction_ms: float  # delay between arriving and issuing the command
    command_prob: float  # chance a stroke ends in a command
    command_mix: Mapping[str, float]
    targeting: Mapping[str, Mapping[str, float]]
    gold_pm: float
    xp_pm: float
    cs_pm: float
    farm_spread: float  # per-match log-sd of the shared farm factor
    kill_rate: float  # per minute
    death_rate: float
    assist_rate: float
    deny_rate: float
    start_build: tuple[str | None, ...]
    end_build: tuple[str | None, ...]
    item_fidelity: float  # chance each slot follows the build
    seed: int = 0

    def __post_init__(self) -> None:
        if set(self.command_mix) != set(COMMAND_KINDS):
            raise ValueError(f"command mix must cover {COMMAND_KINDS}")
        if any(p < 0 for p in self.command_mix.values()) or not math.isclose(sum(self.command_mix.values()), 1.0, abs_tol=1e-9):
            raise ValueError("command mix must be a probability distribution")
        for kind, dist in self.targeting.items():
            if set(dist) - set(_ALLOWED_TARGETING[kind]) or not math.isclose(sum(dist.values()), 1.0, abs_tol=1e-9):
                raise ValueError(f"bad targeting distribution for {kind}")
        spreads = (self.speed_mean, self.speed_std, self.jitter, self.reach, self.idle_mean, self.reaction_ms,
                   self.farm_spread, self.kill_rate, self.death_rate, self.assist_rate, self.deny_rate,
                   self.gold_pm, self.xp_pm, self.cs_pm)
        if any(v < 0 for v in spreads):
            raise ValueError("profile rates and spreads must be non-negative")
        if not 0 <= self.command_prob <= 1 or not 0 <= self.item_fidelity <= 1:
            raise ValueError("probabilities must lie in [0, 1]")
        if len(self.start_build) != INVENTORY_SLOTS or len(self.end_build) != INVENTORY_SLOTS:
            raise ValueError("builds must have one entry per inventory slot")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["command_mix"] = dict(self.command_mix)
        d["targeting"] = {k: dict(v) for k, v in self.targeting.items()}
        d["start_build"] = list(self.start_build)
        d["end_build"] = list(self.end_build)
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "PlayerProfile":
        d = dict(d)
        d["start_build"] = tuple(d["start_build"])
        d["end_build"] = tuple(d["end_build"])
        return cls(**d)


def _softmax(logits: np.ndarray) -> np.ndarray:
    e = np.exp(logits - logits.max())
    return e / e.sum()


def _distribution(names: Sequence[str], centre: Sequence[float], shift: np.ndarray) -> dict[str, float]:
    p = _softmax(np.log(np.asarray(centre)) + shift)
    p = p / p.sum()
    out = {n: float(v) for n, v in zip(names, p)}
    # force an exact sum so validation never trips on rounding
    out[names[-1]] = 1.0 - sum(out[n] for n in names[:-1])
    return out


_MIX_CENTRE = (0.20, 0.75, 0.03, 0.02)
_TARGET_CENTRE = {
    "attack": (0.7, 0.3),
    "move": (0.15, 0.85),
    "cast": (0.5, 0.3, 0.2),
    "hold": (1.0,),
}


def make_profiles(
    n: int,
    dial: float,
    seed: int = 0,
    catalog: ItemCatalog | None = None,
    item_fidelity: float = 0.6,
) -> list[PlayerProfile]:
    """``n`` profiles whose distance from the population centre scales with ``dial``.

    Builds differ per profile and every profile prefers a distinct (boot type,
    slot) pair while ``n`` is at most 36. Each slot follows the build with
    probability ``dial * item_fidelity``, otherwise it is drawn at random.
    """
    if not 0 <= dial <= 1:
        raise ValueError("dial must lie in [0, 1]")
    if n < 1:
        raise ValueError("need at least one profile")
    catalog = catalog or synthetic_catalog()
    rng = np.random.default_rng(seed)
    starting = catalog.starting_ids
    boots = catalog.boot_ids
    late = [i.id for i in catalog.items if not i.starting and not i.boots]
    boot_combos = [(b, s) for b in range(len(boots)) for s in range(INVENTORY_SLOTS)]
    combo_order = rng.permutation(len(boot_combos))

    profiles = []
    for p in range(n):
        z = rng.standard_normal(32)
        farm = z[0]

        def logn(centre, spread, k):
            return float(centre * math.exp(dial * spread * z[k]))

        start_build = tuple(
            str(rng.choice(starting)) if rng.random() < 0.7 else None for _ in range(INVENTORY_SLOTS)
        )
        boot_type, boot_slot = boot_combos[combo_order[p % len(boot_combos)]]
        end_build = tuple(
            boots[boot_type] if s == boot_slot else str(rng.choice(late)) for s in range(INVENTORY_SLOTS)
        )
        speed = logn(900.0, 0.5, 1)
        targeting = {
            "attack": _distribution(_ALLOWED_TARGETING["attack"], _TARGET_CENTRE["attack"], dial * 0.8 * np.array([z[20], 0])),
            "move": _distribution(_ALLOWED_TARGETING["move"], _TARGET_CENTRE["move"], dial * 0.8 * np.array([z[21], 0])),
            "cast": _distribution(_ALLOWED_TARGETING["cast"], _TARGET_CENTRE["cast"], dial * 0.8 * np.array([z[22], z[23], 0])),
            "hold": {"none": 1.0},
        }
        profiles.append(
            PlayerProfile(
                profile_id=f"player-{p:03d}",
                speed_mean=speed,
                speed_std=speed * logn(0.25, 0.4, 2),
                jitter=logn(3.0, 0.6, 3),
                curvature=float(0.12 * dial * z[4]),
                reach=logn(350.0, 0.4, 5),
                idle_mean=logn(0.35, 0.5, 6),
                reaction_ms=logn(120.0, 0.4, 7),
                command_prob=float(1.0 / (1.0 + math.exp(-(1.7 + dial * 0.8 * z[8])))),
                command_mix=_distribution(COMMAND_KINDS, _MIX_CENTRE, dial * 0.6 * z[9:13]),
                targeting=targeting,
                gold_pm=logn(450.0, 0.3, 0),
                xp_pm=float(500.0 * math.exp(dial * 0.3 * (0.9 * farm + 0.3 * z[14]))),
                cs_pm=float(5.0 * math.exp(dial * 0.3 * (0.9 * farm + 0.3 * z[15]))),
                farm_spread=0.08,
                kill_rate=logn(0.15, 0.5, 16),
                death_rate=logn(0.12, 0.5, 17),
                assist_rate=logn(0.25, 0.5, 18),
                deny_rate=logn(0.3, 0.5, 19),
                start_build=start_build,
                end_build=end_build,
                item_fidelity=float(dial * item_fidelity),
                seed=seed,
            )
        )
    return profiles


# --- match generation --------------------------------------------------------


def _fold(v: np.ndarray, lim: float) -> np.ndarray:
    """Reflect coordinates back into [0, lim] (triangle wave)."""
    v = np.abs(v) % (2 * lim)
    return np.where(v > lim, 2 * lim - v, v)


def _categorical(rng: np.random.Generator, probs: np.ndarray, n: int) -> np.ndarray:
    return np.minimum(np.searchsorted(np.cumsum(probs), rng.random(n), side="right"), len(probs) - 1)


def _stroke_points(start, end, n, bow, wobble_rng, jitter) -> tuple[np.ndarray, np.ndarray]:
    """Per-tick positions of every stroke, concatenated, plus each point's stroke index."""
    idx = np.repeat(np.arange(len(n)), n)
    first = np.concatenate([[0], np.cumsum(n)[:-1]])
    j = np.arange(len(idx)) - first[idx] + 1
    u = j / n[idx]
    s = u * u * u * (10 - 15 * u + 6 * u * u)  # minimum-jerk progress
    chord = end - start
    length = np.hypot(chord[:, 0], chord[:, 1])
    normal = np.stack([-chord[:, 1], chord[:, 0]], axis=1) / np.maximum(length, 1e-9)[:, None]
    control = (start + end) / 2 + (bow * length)[:, None] * normal
    a, b, c = ((1 - s) ** 2)[:, None], (2 * (1 - s) * s)[:, None], (s * s)[:, None]
    pts = a * start[idx] + b * control[idx] + c * end[idx]
    # AR(1) wobble along each stroke, zero at both ends
    width = int(n.max()) if len(n) else 0
    noise = wobble_rng.standard_normal((len(n), width)) * jitter
    wob = np.zeros((len(n), width))
    for k in range(1, width):
        wob[:, k] = 0.7 * wob[:, k - 1] + noise[:, k]
    pts = pts + (np.sin(np.pi * u) * wob[idx, j - 1])[:, None] * normal[idx]
    pts[np.cumsum(n) - 1] = end
    return pts, idx


def generate_match(
    profile: PlayerProfile,
    duration_min: float,
    seed: int,
    catalog: ItemCatalog | None = None,
    tick_rate: int = 30,
    match_id: str | None = None,
    cursor: bool = True,
) -> ReplayEventStream:
    """One replay for ``profile``.

    The cursor makes strokes toward random waypoints; each stroke may end in a
    command after a reaction delay, then the cursor rests. With
    ``cursor=False`` the same commands, finals and items are produced but no
    cursor samples are emitted.
    """
    if duration_min <= 0:
        raise ValueError("duration_min must be positive")
    if profile.speed_mean <= 0 and profile.command_prob <= 0:
        raise ValueError(f"profile {profile.profile_id} neither moves nor issues commands")
    catalog = catalog or synthetic_catalog()
    main_seq, wobble_seq = np.random.SeedSequence(seed).spawn(2)
    rng = np.random.default_rng(main_seq)
    duration = int(round(duration_min * 60 * tick_rate))
    # every cycle lasts >= 10 ticks at 30/s, so this many strokes always spans the match
    rest_min = 0.35
    N = duration // max(1, int(round(rest_min * tick_rate))) + 2

    moves = profile.speed_mean > 0
    dist = profile.reach * np.exp(0.4 * rng.standard_normal(N)) if moves else np.zeros(N)
    angle = rng.uniform(-math.pi, math.pi, N)
    speed = np.maximum(50.0, profile.speed_mean + profile.speed_std * rng.standard_normal(N))
    bow = profile.curvature + 0.05 * rng.standard_normal(N)
    reaction = np.rint(profile.reaction_ms * np.exp(0.3 * rng.standard_normal(N)) * tick_rate / 1000).astype(np.int64)
    rest = rest_min + (rng.exponential(profile.idle_mean, N) if profile.idle_mean > 0 else np.zeros(N))
    issue = rng.random(N) < profile.command_prob
    kinds = _categorical(rng, np.array([profile.command_mix[k] for k in COMMAND_KINDS]), N)
    target_u = rng.random(N)

    centre = np.array([SCREEN[0] / 2, SCREEN[1] / 2])
    walk = centre + np.cumsum(dist[:, None] * np.stack([np.cos(angle), np.sin(angle)], axis=1), axis=0)
    end = np.stack([_fold(walk[:, 0], SCREEN[0]), _fold(walk[:, 1], SCREEN[1])], axis=1)
    start = np.vstack([centre, end[:-1]])
    length = np.hypot(*(end - start).T)
    n = np.where(moves, np.maximum(3, np.ceil(length / (speed / tick_rate))), 0).astype(np.int64)
    gap = np.maximum(reaction + 1, np.rint(rest * tick_rate).astype(np.int64))
    depart = np.concatenate([[0], np.cumsum(n + gap)[:-1]])
    keep = depart < duration
    assert not keep[-1], "stroke budget too small"
    depart, n, start, end, bow = depart[keep], n[keep], start[keep], end[keep], bow[keep]
    arrival = depart + n

    commands: list[CommandEvent] = []
    for i in np.nonzero(issue[: len(depart)] & (arrival + reaction[: len(depart)] <= duration))[0]:
        kind = COMMAND_KINDS[kinds[i]]
        dist_t = profile.targeting[kind]
        names = list(dist_t)
        cdf = np.cumsum([dist_t[t] for t in names])
        targeting = names[min(int(np.searchsorted(cdf, target_u[i], side="right")), len(names) - 1)]
        x, y = np.rint(end[i]).astype(np.int64)
        commands.append(CommandEvent(int(arrival[i] + reaction[i]), kind, targeting, int(x), int(y)))

    samples: list[CursorSample] = []
    if cursor and moves and len(depart):
        pts, idx = _stroke_points(start, end, n, bow, np.random.default_rng(wobble_seq), profile.jitter)
        ticks = np.arange(len(idx)) - np.concatenate([[0], np.cumsum(n)[:-1]])[idx] + 1 + depart[idx]
        all_ticks = np.concatenate([depart, ticks])
        all_pts = np.rint(np.vstack([start, pts])).astype(np.int64)
        order = np.argsort(all_ticks, kind="stable")
        all_ticks, all_pts = all_ticks[order], all_pts[order]
        ok = all_ticks <= duration
        samples = [CursorSample(int(t), int(x), int(y)) for t, (x, y) in zip(all_ticks[ok], all_pts[ok])]

    minutes = duration / (60.0 * tick_rate)
    farm = profile.farm_spread * rng.standard_normal()
    noise = 0.03 * rng.standard_normal(3)
    finals = FinalStats(
        kills=int(rng.poisson(profile.kill_rate * minutes)),
        deaths=int(rng.poisson(profile.death_rate * minutes)),
        assists=int(rng.poisson(profile.assist_rate * minutes)),
        last_hits=int(round(profile.cs_pm * math.exp(farm + noise[2]) * minutes)),
        denies=int(rng.poisson(profile.deny_rate * minutes)),
        gold_total=int(round(profile.gold_pm * math.exp(farm + noise[0]) * minutes)),
        xp_total=int(round(profile.xp_pm * math.exp(farm + noise[1]) * minutes)),
    )
    inventories = (
        InventorySnapshot(0, _draw_inventory(rng, profile.start_build, profile.item_fidelity, catalog, start=True)),
        InventorySnapshot(duration, _draw_inventory(rng, profile.end_build, profile.item_fidelity, catalog, start=False)),
    )
    header = MatchHeader(
        match_id=match_id or f"{profile.profile_id}-{seed}",
        account_id=profile.profile_id,
        hero_id=HERO_ID,
        tick_rate=tick_rate,
        duration_ticks=duration,
    )
    return ReplayEventStream(header, tuple(samples), tuple(commands), inventories, finals)


def _draw_inventory(rng, build, fidelity: float, catalog: ItemCatalog, start: bool) -> tuple[str | None, ...]:
    starting = catalog.starting_ids
    boots = catalog.boot_ids
    late = [i.id for i in catalog.items if not i.starting and not i.boots]
    slots = []
    for preferred in build:
        follow = rng.random() < fidelity
        draw = rng.random()
        if follow:
            slots.append(preferred)
        elif start:
            slots.append(str(starting[rng.integers(len(starting))]) if draw < 0.6 else None)
        elif draw < 0.15:
            slots.append(str(boots[rng.integers(len(boots))]))
        elif draw < 0.8:
            slots.append(str(late[rng.integers(len(late))]))
        else:
            slots.append(None)
    return tuple(slots)


# --- pools -------------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class SyntheticMatch:
    stream: ReplayEventStream
    profile_id: str


def match_seed(seed: int, profile_index: int, match_index: int) -> int:
    return int(np.random.SeedSequence([seed, profile_index, match_index]).generate_state(1)[0])


def generate_pool(
    profiles: Sequence[PlayerProfile],
    matches_per_player: int,
    seed: int = 0,
    duration_min: float = 6.0,
    catalog: ItemCatalog | None = None,
    cursor: bool = True,
) -> list[SyntheticMatch]:
    if len(profiles) < 2:
        raise ValueError("a pool needs at least 2 profiles")
    if matches_per_player < 1:
        raise ValueError("matches_per_player must be >= 1")
    catalog = catalog or synthetic_catalog()
    out = []
    for p, profile in enumerate(profiles):
        for m in range(matches_per_player):
            stream = generate_match(
                profile,
                duration_min,
                match_seed(seed, p, m),
                catalog,
                match_id=f"{profile.profile_id}-m{m:03d}",
                cursor=cursor,
            )
            out.append(SyntheticMatch(stream, profile.profile_id))
    return out


def _dump(records: Iterable[Mapping], handle: IO[str]) -> None:
    for record in records:
        handle.write(json.dumps(record, separators=(",", ":"), sort_keys=True) + "\n")


def save_profiles(profiles: Sequence[PlayerProfile], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="\n") as handle:
        _dump((p.to_dict() for p in profiles), handle)


def load_profiles(path: str | Path) -> list[PlayerProfile]:
    with Path(path).open("r", encoding="utf-8") as handle:
        return [PlayerProfile.from_dict(json.loads(line)) for line in handle if line.strip()]


def write_corpus(matches: Sequence[SyntheticMatch], out_dir: str | Path) -> Path:
    """One NDJSON replay per match plus ``manifest.ndjson``; returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for m in matches:
        save_stream(m.stream, out / f"{m.stream.header.match_id}.ndjson")
    manifest = out / "manifest.ndjson"
    with manifest.open("w", encoding="utf-8", newline="\n") as handle:
        _dump(({"match_id": m.stream.header.match_id, "profile_id": m.profile_id} for m in matches), handle)
    return manifest
