from __future__ import annotations

import numpy as np
import pytest

from playerprint.events import (
    CommandEvent,
    CursorSample,
    FinalStats,
    InventorySnapshot,
    MatchHeader,
    ReplayEventStream,
)
from playerprint.items import synthetic_catalog


def make_stream(
    cursor=(),
    commands=(),
    inventories=None,
    duration=None,
    finals=FinalStats(),
    tick_rate=30,
    match_id="m0",
    account_id="p0",
) -> ReplayEventStream:
    cursor = tuple(c if isinstance(c, CursorSample) else CursorSample(*c) for c in cursor)
    commands = tuple(c if isinstance(c, CommandEvent) else CommandEvent(*c) for c in commands)
    ticks = [e.tick for e in cursor + commands] + [0]
    if duration is None:
        duration = max(ticks) + 1
    if inventories is None:
        inventories = (
            InventorySnapshot(0, (None,) * 6),
            InventorySnapshot(duration, (None,) * 6),
        )
    header = MatchHeader(match_id, account_id, 1, tick_rate, duration)
    return ReplayEventStream(header, cursor, commands, tuple(inventories), finals)


def line_cursor(start_tick: int, n: int, x0: int = 0, y0: int = 0, step: int = 3):
    """n samples moving along +x, one per tick."""
    return [CursorSample(start_tick + i, x0 + step * i, y0) for i in range(n)]


@pytest.fixture(scope="session")
def catalog():
    return synthetic_catalog()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# criterion number -> (passed, summary line), filled by test_acceptance
ACCEPTANCE_RESULTS: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        passed, line = ACCEPTANCE_RESULTS[number]
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {number:2d}. {line}")
