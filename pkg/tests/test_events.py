from __future__ import annotations

import io
import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from playerprint.events import (
    CommandEvent,
    CursorSample,
    FinalStats,
    InventorySnapshot,
    MatchHeader,
    ReplayEventStream,
    ReplayParseError,
    ReplayStructureError,
    ReplayValidationError,
    parse_stream,
    read_stream,
    save_stream,
    write_stream,
)
from playerprint.synth import generate_match, make_profiles

from conftest import make_stream

HEADER = {"type": "header", "match_id": "m1", "account_id": "a1", "hero_id": 7, "tick_rate": 30, "duration_ticks": 100}
FINALS = {"type": "finals", "kills": 1, "deaths": 2, "assists": 3, "last_hits": 4, "denies": 5, "gold_total": 6, "xp_total": 7}


def ndjson(*records) -> str:
    return "".join(json.dumps(r) + "\n" for r in records)


def test_minimal_file_parses_to_empty_stream():
    s = parse_stream(ndjson(HEADER, FINALS))
    assert s.cursor == () and s.commands == () and s.inventories == ()
    assert s.finals == FinalStats(1, 2, 3, 4, 5, 6, 7)
    assert s.header.minutes == pytest.approx(100 / 1800)


def test_minimal_stream_writes_header_and_finals():
    text = write_stream(parse_stream(ndjson(HEADER, FINALS)))
    lines = text.splitlines()
    assert len(lines) == 2
    assert json.loads(lines[0])["type"] == "header"
    assert json.loads(lines[1])["type"] == "finals"


def test_cursor_ticks_are_sorted():
    text = ndjson(HEADER, *({"type": "cursor", "tick": t, "x": t, "y": 0} for t in (3, 1, 2)), FINALS)
    assert [c.tick for c in parse_stream(text).cursor] == [1, 2, 3]


def test_sort_is_stable_for_equal_ticks():
    cmds = [
        {"type": "command", "tick": 5, "kind": "move", "targeting": "position", "x": 1, "y": 1},
        {"type": "command", "tick": 2, "kind": "attack", "targeting": "unit", "x": 2, "y": 2},
        {"type": "command", "tick": 5, "kind": "cast", "targeting": "none", "x": 3, "y": 3},
    ]
    s = parse_stream(ndjson(HEADER, *cmds, FINALS))
    assert [c.kind for c in s.commands] == ["attack", "move", "cast"]


def test_single_cursor_sample_is_second_line():
    s = make_stream(cursor=[(1, 5, 6)], inventories=())
    assert json.loads(write_stream(s).splitlines()[1])["type"] == "cursor"


def test_records_in_any_order_after_header():
    text = ndjson(HEADER, FINALS, {"type": "cursor", "tick": 4, "x": 1, "y": 2})
    assert parse_stream(text).cursor == (CursorSample(4, 1, 2),)


def test_default_tick_rate_and_unknown_keys():
    header = {k: v for k, v in HEADER.items() if k != "tick_rate"} | {"replay_build": "x"}
    s = parse_stream(ndjson(header, FINALS | {"extra": 1}))
    assert s.header.tick_rate == 30


def test_malformed_line_reports_line_number():
    text = ndjson(HEADER) + "{not json\n" + ndjson(FINALS)
    with pytest.raises(ReplayParseError) as err:
        parse_stream(text)
    assert err.value.line == 2
    assert "line 2" in str(err.value)


def test_tick_beyond_duration_rejected_with_line():
    text = ndjson(HEADER, {"type": "cursor", "tick": 1, "x": 0, "y": 0}, {"type": "cursor", "tick": 101, "x": 0, "y": 0}, FINALS)
    with pytest.raises(ReplayValidationError) as err:
        parse_stream(text)
    assert err.value.line == 3


@pytest.mark.parametrize(
    "records",
    [
        [FINALS],
        [HEADER],
        [HEADER, HEADER, FINALS],
        [HEADER, FINALS, FINALS],
    ],
)
def test_structural_errors(records):
    with pytest.raises(ReplayStructureError):
        parse_stream(ndjson(*records))


def test_unknown_type_rejected():
    with pytest.raises(ReplayParseError):
        parse_stream(ndjson(HEADER, {"type": "chat", "tick": 1}, FINALS))


@pytest.mark.parametrize(
    "kind,targeting",
    [("hold", "unit"), ("attack", "none"), ("move", "none"), ("jump", "none")],
)
def test_invalid_command_targeting(kind, targeting):
    rec = {"type": "command", "tick": 1, "kind": kind, "targeting": targeting, "x": 0, "y": 0}
    with pytest.raises(ReplayValidationError):
        parse_stream(ndjson(HEADER, rec, FINALS))


def test_inventory_needs_six_slots():
    rec = {"type": "inventory", "tick": 0, "slots": [None] * 5}
    with pytest.raises(ReplayValidationError):
        parse_stream(ndjson(HEADER, rec, FINALS))


def test_negative_finals_rejected():
    with pytest.raises(ReplayValidationError):
        parse_stream(ndjson(HEADER, FINALS | {"kills": -1}))


def test_stream_constructor_validates_ticks():
    with pytest.raises(ReplayValidationError):
        make_stream(cursor=[(50, 0, 0)], duration=10)


def test_read_stream_names_file(tmp_path):
    path = tmp_path / "bad.ndjson"
    path.write_text(ndjson(HEADER) + "oops\n")
    with pytest.raises(ReplayParseError) as err:
        read_stream(path)
    assert "bad.ndjson" in str(err.value) and err.value.line == 2


def test_synthetic_match_round_trip(tmp_path):
    profile = make_profiles(1, 1.0, seed=3)[0]
    stream = generate_match(profile, 2.0, seed=11)
    assert len(stream.cursor) > 100 and len(stream.commands) > 10
    assert parse_stream(write_stream(stream)) == stream
    path = tmp_path / "m.ndjson"
    save_stream(stream, path)
    assert read_stream(path) == stream


def test_output_is_byte_stable():
    profile = make_profiles(1, 1.0, seed=4)[0]
    stream = generate_match(profile, 1.0, seed=2)
    assert len(stream.cursor) + len(stream.commands) >= 1000
    assert write_stream(stream) == write_stream(generate_match(profile, 1.0, seed=2))


def test_write_to_handle():
    s = make_stream(cursor=[(0, 1, 1), (1, 2, 2)])
    buf = io.StringIO()
    text = write_stream(s, buf)
    assert buf.getvalue() == text and text.endswith("\n")


# --- property: round trip for arbitrary valid streams --------------------------

_ids = st.text(alphabet="abcdefghij0123456789-", min_size=1, max_size=8)


@st.composite
def streams(draw):
    duration = draw(st.integers(0, 500))
    tick = st.integers(0, duration)
    coord = st.integers(-5000, 5000)
    cursor = draw(st.lists(st.builds(CursorSample, tick, coord, coord), max_size=30))
    kind_targeting = st.sampled_from(
        [("attack", "unit"), ("attack", "position"), ("move", "unit"), ("move", "position"),
         ("cast", "unit"), ("cast", "position"), ("cast", "none"), ("hold", "none")]
    )
    commands = draw(
        st.lists(st.builds(lambda t, kt, x, y: CommandEvent(t, kt[0], kt[1], x, y), tick, kind_targeting, coord, coord), max_size=20)
    )
    slot = st.one_of(st.none(), _ids)
    inventories = draw(st.lists(st.builds(lambda t, s: InventorySnapshot(t, tuple(s)), tick, st.lists(slot, min_size=6, max_size=6)), max_size=4))
    n = st.integers(0, 10**6)
    finals = draw(st.builds(FinalStats, n, n, n, n, n, n, n))
    header = MatchHeader(draw(_ids), draw(_ids), draw(st.integers(0, 200)), draw(st.integers(1, 60)), duration)
    return ReplayEventStream(header, tuple(cursor), tuple(commands), tuple(inventories), finals)


@settings(max_examples=150, deadline=None)
@given(streams())
def test_round_trip_property(stream):
    parsed = parse_stream(write_stream(stream))
    assert parsed == stream.normalized()
    assert all(a.tick <= b.tick for a, b in zip(parsed.cursor, parsed.cursor[1:]))
    assert all(a.tick <= b.tick for a, b in zip(parsed.commands, parsed.commands[1:]))
    assert write_stream(parsed) == write_stream(stream.normalized())
