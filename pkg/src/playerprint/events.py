"""Canonical replay event model and its NDJSON file format.

A replay is one header record, any number of cursor / command / inventory
records, and exactly one finals record. Parsing validates every record and
normalizes ordering (stable sort by tick); writing emits records in a fixed
order so output is byte-stable.
"""

from __future__ import annotations

import dataclasses
import io
import json
from pathlib import Path
from typing import IO, Iterable

DEFAULT_TICK_RATE = 30
INVENTORY_SLOTS = 6

COMMAND_KINDS = ("attack", "move", "cast", "hold")
TARGETINGS = ("unit", "position", "none")

_ALLOWED_TARGETING = {
    "attack": ("unit", "position"),
    "move": ("unit", "position"),
    "cast": ("unit", "position", "none"),
    "hold": ("none",),
}


class ReplayError(ValueError):
    """Base class for replay format problems; carries the 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ReplayParseError(ReplayError):
    """A line is not a well-formed record."""


class ReplayStructureError(ReplayError):
    """Header or finals missing, duplicated or misplaced."""


class ReplayValidationError(ReplayError):
    """A record is well formed but violates a value constraint."""


@dataclasses.dataclass(frozen=True, slots=True)
class MatchHeader:
    match_id: str
    account_id: str
    hero_id: int
    tick_rate: int = DEFAULT_TICK_RATE
    duration_ticks: int = 0

    def __post_init__(self) -> None:
        if not self.match_id:
            raise ReplayValidationError("match_id must be nonempty")
        if self.tick_rate < 1:
            raise ReplayValidationError(f"tick_rate must be >= 1, got {self.tick_rate}")
        if self.duration_ticks < 0:
            raise ReplayValidationError(f"duration_ticks must be >= 0, got {self.duration_ticks}")

    @property
    def minutes(self) -> float:
        return self.duration_ticks / (60.0 * self.tick_rate)


@dataclasses.dataclass(frozen=True, slots=True)
class CursorSample:
    tick: int
    x: int
    y: int


@dataclasses.dataclass(frozen=True, slots=True)
class CommandEvent:
    tick: int
    kind: str
    targeting: str
    x: int
    y: int

    def __post_init__(self) -> None:
        if self.kind not in _ALLOWED_TARGETING:
            raise ReplayValidationError(f"unknown command kind {self.kind!r}")
        if self.targeting not in _ALLOWED_TARGETING[self.kind]:
            raise ReplayValidationError(
                f"{self.kind} command cannot have targeting {self.targeting!r}"
            )


@dataclasses.dataclass(frozen=True, slots=True)
class InventorySnapshot:
    tick: int
    slots: tuple[str | None, ...]

    def __post_init__(self) -> None:
        if len(self.slots) != INVENTORY_SLOTS:
            raise ReplayValidationError(
                f"inventory must have {INVENTORY_SLOTS} slots, got {len(self.slots)}"
            )


@dataclasses.dataclass(frozen=True, slots=True)
class FinalStats:
    kills: int = 0
    deaths: int = 0
    assists: int = 0
    last_hits: int = 0
    denies: int = 0
    gold_total: int = 0
    xp_total: int = 0

    def __post_init__(self) -> None:
        for field in dataclasses.fields(self):
            if getattr(self, field.name) < 0:
                raise ReplayValidationError(f"finals.{field.name} must be non-negative")


@dataclasses.dataclass(frozen=True, slots=True)
class ReplayEventStream:
    header: MatchHeader
    cursor: tuple[CursorSample, ...] = ()
    commands: tuple[CommandEvent, ...] = ()
    inventories: tuple[InventorySnapshot, ...] = ()
    finals: FinalStats = FinalStats()

    def __post_init__(self) -> None:
        limit = self.header.duration_ticks
        for group in (self.cursor, self.commands, self.inventories):
            for event in group:
                if not 0 <= event.tick <= limit:
                    raise ReplayValidationError(
                        f"tick {event.tick} outside [0, {limit}]"
                    )

    def normalized(self) -> "ReplayEventStream":
        """Return a copy with every event group stably sorted by tick."""
        return dataclasses.replace(
            self,
            cursor=tuple(sorted(self.cursor, key=_tick)),
            commands=tuple(sorted(self.commands, key=_tick)),
            inventories=tuple(sorted(self.inventories, key=_tick)),
        )


def _tick(event) -> int:
    return event.tick


# --- parsing -----------------------------------------------------------------


def _int_field(record: dict, key: str, line: int, default: int | None = None) -> int:
    if key not in record:
        if default is not None:
            return default
        raise ReplayParseError(f"missing field {key!r}", line)
    value = record[key]
    if isinstance(value, bool) or not isinstance(value, int):
        if isinstance(value, float) and value.is_integer():
            return int(value)
        raise ReplayParseError(f"field {key!r} must be an integer, got {value!r}", line)
    return value


def _str_field(record: dict, key: str, line: int) -> str:
    value = record.get(key)
    if value is None:
        raise ReplayParseError(f"missing field {key!r}", line)
    return str(value)


def _check_tick(tick: int, duration: int, line: int) -> None:
    if not 0 <= tick <= duration:
        raise ReplayValidationError(f"tick {tick} outside [0, {duration}]", line)


def parse_stream(source: str | Iterable[str] | IO[str]) -> ReplayEventStream:
    """Parse an NDJSON replay from a string, a file object or an iterable of lines."""
    lines: Iterable[str] = source.splitlines() if isinstance(source, str) else source

    header: MatchHeader | None = None
    finals: FinalStats | None = None
    cursor: list[CursorSample] = []
    commands: list[CommandEvent] = []
    inventories: list[InventorySnapshot] = []

    for number, raw in enumerate(lines, start=1):
        if not raw.strip():
            continue
        try:
            record = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ReplayParseError(f"malformed JSON ({exc.msg})", number) from None
        if not isinstance(record, dict):
            raise ReplayParseError("record must be a JSON object", number)
        kind = record.get("type")

        if header is None:
            if kind != "header":
                raise ReplayStructureError("first record must be the header", number)
            try:
                header = MatchHeader(
                    match_id=_str_field(record, "match_id", number),
                    account_id=_str_field(record, "account_id", number),
                    hero_id=_int_field(record, "hero_id", number),
                    tick_rate=_int_field(record, "tick_rate", number, DEFAULT_TICK_RATE),
                    duration_ticks=_int_field(record, "duration_ticks", number),
                )
            except ReplayParseError:
                raise
            except ReplayError as exc:
                raise ReplayValidationError(str(exc), number) from None
            continue

        duration = header.duration_ticks
        try:
            if kind == "cursor":
                tick = _int_field(record, "tick", number)
                _check_tick(tick, duration, number)
                cursor.append(
                    CursorSample(tick, _int_field(record, "x", number), _int_field(record, "y", number))
                )
            elif kind == "command":
                tick = _int_field(record, "tick", number)
                _check_tick(tick, duration, number)
                commands.append(
                    CommandEvent(
                        tick=tick,
                        kind=_str_field(record, "kind", number),
                        targeting=_str_field(record, "targeting", number),
                        x=_int_field(record, "x", number),
                        y=_int_field(record, "y", number),
                    )
                )
            elif kind == "inventory":
                tick = _int_field(record, "tick", number)
                _check_tick(tick, duration, number)
                slots = record.get("slots")
                if not isinstance(slots, list):
                    raise ReplayParseError("inventory slots must be a list", number)
                inventories.append(
                    InventorySnapshot(tick, tuple(None if s is None else str(s) for s in slots))
                )
            elif kind == "finals":
                if finals is not None:
                    raise ReplayStructureError("duplicate finals record", number)
                finals = FinalStats(
                    **{
                        f.name: _int_field(record, f.name, number)
                        for f in dataclasses.fields(FinalStats)
                    }
                )
            elif kind == "header":
                raise ReplayStructureError("duplicate header record", number)
            else:
                raise ReplayParseError(f"unknown record type {kind!r}", number)
        except ReplayError as exc:
            if exc.line is None:
                raise ReplayValidationError(str(exc), number) from None
            raise

    if header is None:
        raise ReplayStructureError("missing header record")
    if finals is None:
        raise ReplayStructureError("missing finals record")

    return ReplayEventStream(
        header=header,
        cursor=tuple(cursor),
        commands=tuple(commands),
        inventories=tuple(inventories),
        finals=finals,
    ).normalized()


def read_stream(path: str | Path) -> ReplayEventStream:
    path = Path(path)
    with path.open("r", encoding="utf-8") as handle:
        try:
            return parse_stream(handle)
        except ReplayError as exc:
            located = type(exc)(f"{path}: {exc}")
            located.line = exc.line
            raise located from None


# --- writing -----------------------------------------------------------------


def _dumps(record: dict) -> str:
    return json.dumps(record, separators=(",", ":"), ensure_ascii=False)


def iter_records(stream: ReplayEventStream) -> Iterable[dict]:
    h = stream.header
    yield {
        "type": "header",
        "match_id": h.match_id,
        "account_id": h.account_id,
        "hero_id": h.hero_id,
        "tick_rate": h.tick_rate,
        "duration_ticks": h.duration_ticks,
    }
    for c in stream.cursor:
        yield {"type": "cursor", "tick": c.tick, "x": c.x, "y": c.y}
    for c in stream.commands:
        yield {
            "type": "command",
            "tick": c.tick,
            "kind": c.kind,
            "targeting": c.targeting,
            "x": c.x,
            "y": c.y,
        }
    for inv in stream.inventories:
        yield {"type": "inventory", "tick": inv.tick, "slots": list(inv.slots)}
    yield {"type": "finals", **dataclasses.asdict(stream.finals)}


def write_stream(stream: ReplayEventStream, handle: IO[str] | None = None) -> str:
    """Serialize a stream; returns the text (and writes it to ``handle`` if given)."""
    buffer = io.StringIO()
    for record in iter_records(stream):
        buffer.write(_dumps(record))
        buffer.write("\n")
    text = buffer.getvalue()
    if handle is not None:
        handle.write(text)
    return text


def save_stream(stream: ReplayEventStream, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="\n") as handle:
        write_stream(stream, handle)
