from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from playerprint.events import CommandEvent, CursorSample
from playerprint.mouse import (
    FEATURE_NAMES,
    MIN_KINEMATIC_LENGTH,
    N_FEATURES,
    MovementSequence,
    SegmentationConfig,
    SequenceTooShort,
    action_matrix,
    action_mix,
    complex_actions,
    kinematics,
    pair_commands,
    raw_runs,
    segment,
    summarize,
)
from playerprint.synth import generate_match, make_profiles

from conftest import line_cursor
from kinematic_oracles import DENSITIES, QUANTITIES, RADII, SHAPES, relative_errors

CFG = SegmentationConfig()  # 300 ms at 30 ticks/s


def seq(points, ticks=None):
    arr = np.asarray(points, dtype=float)
    t = np.arange(len(arr), dtype=float) if ticks is None else np.asarray(ticks, dtype=float)
    return MovementSequence(t, arr[:, 0], arr[:, 1])


def test_feature_layout():
    assert N_FEATURES == 38 == len(FEATURE_NAMES)
    assert FEATURE_NAMES[:4] == ("theta_min", "theta_max", "theta_mean", "theta_std")
    assert FEATURE_NAMES[-2:] == ("t_n", "d")


@pytest.mark.parametrize("tau_ms,rate,expected", [(300, 30, 9), (100, 30, 3), (10, 30, 1), (250, 60, 15), (50, 30, 2)])
def test_tau_ticks(tau_ms, rate, expected):
    assert SegmentationConfig(tau_ms, rate).tau_ticks == expected


def test_tau_must_be_positive():
    with pytest.raises(ValueError):
        SegmentationConfig(0)


# --- segmentation ------------------------------------------------------------


def test_segment_empty():
    assert segment([], CFG) == []


def test_segment_continuous_motion_is_one_sequence():
    out = segment(line_cursor(0, 10), CFG)
    assert len(out) == 1 and out[0].n == 10


def test_segment_idle_gap_splits():
    # moving 0-5, resting 5-20, moving 20-25
    cursor = [CursorSample(t, 3 * t, 0) for t in range(6)]
    cursor += [CursorSample(t, 15, 0) for t in range(6, 20)]
    cursor += [CursorSample(t, 15 + 3 * (t - 19), 0) for t in range(20, 26)]
    out = segment(cursor, CFG)
    assert len(out) == 2
    assert out[0].t.tolist() == [0, 1, 2, 3, 4, 5]
    # the second run starts from the last resting sample
    assert out[1].t[0] == 19 and out[1].x[0] == 15


def test_short_rest_does_not_split():
    cursor = line_cursor(0, 5) + [CursorSample(t, 12, 0) for t in range(5, 12)] + line_cursor(12, 5, x0=15)
    assert len(segment(cursor, CFG)) == 1


def test_sparse_sampling_gap_splits():
    # a gap of >= tau ticks between samples counts as rest even without repeats
    cursor = line_cursor(0, 5) + line_cursor(30, 5, x0=100)
    out = segment(cursor, CFG)
    assert [s.n for s in out] == [5, 5]


def test_duplicate_positions_collapse():
    cursor = [CursorSample(0, 0, 0), CursorSample(1, 1, 0), CursorSample(2, 1, 0), CursorSample(3, 2, 0)]
    (s,) = segment(cursor, CFG)
    assert s.t.tolist() == [0, 1, 3] and s.x.tolist() == [0, 1, 2]


def test_same_tick_keeps_last_sample():
    cursor = [CursorSample(0, 0, 0), CursorSample(1, 5, 5), CursorSample(1, 1, 0), CursorSample(2, 2, 0)]
    (s,) = segment(cursor, CFG)
    assert s.x.tolist() == [0, 1, 2]


def test_single_samples_are_discarded():
    cursor = [CursorSample(0, 0, 0), CursorSample(40, 5, 5), CursorSample(80, 9, 9)]
    assert segment(cursor, CFG) == []


@st.composite
def cursor_trails(draw):
    n = draw(st.integers(0, 60))
    gaps = draw(st.lists(st.integers(1, 25), min_size=n, max_size=n))
    moves = draw(st.lists(st.sampled_from([(0, 0), (1, 0), (0, 2), (-3, 1)]), min_size=n, max_size=n))
    t, x, y, out = 0, 0, 0, []
    for g, (mx, my) in zip(gaps, moves):
        t += g
        x += mx
        y += my
        out.append(CursorSample(t, x, y))
    return out


@settings(max_examples=200, deadline=None)
@given(cursor_trails(), st.integers(1, 20), st.integers(1, 20))
def test_run_count_non_increasing_in_tau(cursor, tau_a, tau_b):
    lo, hi = sorted((tau_a, tau_b))
    assert len(raw_runs(cursor, hi)) <= len(raw_runs(cursor, lo))


@settings(max_examples=100, deadline=None)
@given(cursor_trails())
def test_runs_partition_moving_samples(cursor):
    # every sample that changes position lands in exactly one run
    runs = raw_runs(cursor, 9)
    ticks = [t for run in runs for t, _, _ in run]
    assert ticks == sorted(ticks)


def test_sequence_count_non_increasing_in_tau_on_dense_trails():
    profile = make_profiles(1, 1.0, seed=5)[0]
    stream = generate_match(profile, 1.0, seed=1)
    counts = [len(segment(stream.cursor, SegmentationConfig(ms, 30))) for ms in (50, 100, 200, 300, 500, 1000, 2000)]
    assert counts == sorted(counts, reverse=True)
    assert counts[0] > counts[-1]


# --- kinematics --------------------------------------------------------------


def test_kinematics_straight_line_constant_speed():
    # 100 units/s along +x at 30 ticks/s -> 10 units every 3 ticks
    s = seq([(10 * i, 0) for i in range(8)], ticks=[3 * i for i in range(8)])
    k = kinematics(s, CFG)
    assert np.allclose(k.vy, 0) and np.allclose(k.v, 100) and np.allclose(k.theta, 0)
    assert np.allclose(k.c, 0) and np.allclose(k.a, 0) and np.allclose(k.jerk, 0)


def test_first_heading_is_atan2():
    k = kinematics(seq([(0, 0), (1, 1), (3, 1), (3, 4)]), CFG)
    assert k.theta[0] == pytest.approx(math.pi / 4)
    assert k.theta[1] == pytest.approx(0.0)
    assert k.theta[2] == pytest.approx(math.pi / 2)


def test_heading_is_unwrapped_across_pi():
    # turning steadily counter-clockwise past the negative x axis
    pts = [(math.cos(a), math.sin(a)) for a in np.linspace(0, 3 * np.pi, 40)]
    k = kinematics(seq(np.asarray(pts) * 100), CFG)
    assert np.all(np.diff(k.theta) > 0)
    assert k.theta[-1] > math.pi


def test_series_lengths():
    n = 9
    k = kinematics(seq([(i, i * i) for i in range(n)]), CFG)
    lengths = {name: len(getattr(k, name)) for name in ("theta", "c", "dc", "vx", "vy", "v", "a", "jerk", "w", "ds")}
    assert lengths == {"theta": n - 1, "c": n - 2, "dc": n - 3, "vx": n - 1, "vy": n - 1, "v": n - 1,
                       "a": n - 2, "jerk": n - 3, "w": n - 2, "ds": n - 1}


def test_too_short_sequence():
    with pytest.raises(SequenceTooShort):
        kinematics(seq([(0, 0), (1, 0), (2, 1)]), CFG)


@pytest.mark.parametrize("shape", SHAPES)
@pytest.mark.parametrize("radius", RADII)
def test_closed_form_kinematics(shape, radius):
    coarse, dense = (relative_errors(shape, radius, d) for d in DENSITIES)
    for q in QUANTITIES:
        assert dense[q] < 1e-3, (q, dense[q])
        if coarse[q] > 1e-8:
            assert dense[q] < coarse[q], q
        else:
            # exact on this shape, only roundoff left
            assert dense[q] < 1e-6, q


def random_walk(rng, n):
    steps = rng.normal(size=(n - 1, 2)) * 10 + np.array([3.0, 1.0])
    pts = np.vstack([[0.0, 0.0], np.cumsum(steps, axis=0)])
    ticks = np.cumsum(rng.integers(1, 4, n)).astype(float)
    return MovementSequence(ticks, pts[:, 0], pts[:, 1])


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.integers(4, 30), st.floats(-1e4, 1e4), st.floats(-1e4, 1e4))
def test_translation_invariance(seed, n, ox, oy):
    s = random_walk(np.random.default_rng(seed), n)
    moved = MovementSequence(s.t, s.x + ox, s.y + oy)
    a, b = kinematics(s, CFG), kinematics(moved, CFG)
    for x, y in zip(a.series() + (a.ds,), b.series() + (b.ds,)):
        np.testing.assert_allclose(x, y, rtol=1e-9, atol=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.integers(4, 30), st.floats(-math.pi, math.pi))
def test_rotation_covariance(seed, n, phi):
    s = random_walk(np.random.default_rng(seed), n)
    c, sn = math.cos(phi), math.sin(phi)
    rot = MovementSequence(s.t, c * s.x - sn * s.y, sn * s.x + c * s.y)
    a, b = kinematics(s, CFG), kinematics(rot, CFG)
    shift = np.mod(b.theta - a.theta - phi + np.pi, 2 * np.pi) - np.pi
    np.testing.assert_allclose(shift, 0, atol=1e-9)
    for name in ("c", "dc", "v", "a", "jerk", "w", "ds"):
        np.testing.assert_allclose(getattr(a, name), getattr(b, name), rtol=1e-9, atol=1e-7)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.integers(4, 30), st.integers(2, 5))
def test_time_rescaling(seed, n, k):
    s = random_walk(np.random.default_rng(seed), n)
    a = kinematics(s, SegmentationConfig(300, 30))
    b = kinematics(s, SegmentationConfig(300, 30 * k))
    np.testing.assert_allclose(b.v, k * a.v, rtol=1e-9)
    np.testing.assert_allclose(b.a, k**2 * a.a, rtol=1e-9, atol=1e-9)
    np.testing.assert_allclose(b.jerk, k**3 * a.jerk, rtol=1e-9, atol=1e-7)
    np.testing.assert_allclose(b.w, k * a.w, rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(b.c, a.c, rtol=1e-12)
    np.testing.assert_allclose(b.theta, a.theta, rtol=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.integers(4, 40))
def test_summary_order(seed, n):
    f = summarize(kinematics(random_walk(np.random.default_rng(seed), n), CFG)).reshape(9, 4)
    mn, mx, mean, std = f.T
    assert np.all(mn <= mean + 1e-9) and np.all(mean <= mx + 1e-9) and np.all(std >= 0)


def test_summary_uses_population_std():
    k = kinematics(seq([(0, 0), (1, 0), (3, 0), (6, 0), (10, 0)]), CFG)
    f = summarize(k)
    v_std = f[FEATURE_NAMES.index("v_std")]
    assert v_std == pytest.approx(np.std(k.v, ddof=0))
    assert v_std == pytest.approx(np.sqrt(np.mean((k.v - k.v.mean()) ** 2)))


# --- pairing -----------------------------------------------------------------


def test_no_sequences_no_actions():
    cmds = [CommandEvent(5, "attack", "unit", 0, 0)]
    assert pair_commands([], cmds, CFG) == []


def test_three_four_five_pairing():
    s = seq([(1, 10), (4, 10), (7, 10), (10, 10)], ticks=[97, 98, 99, 100])
    (act,) = pair_commands([s], [CommandEvent(104, "attack", "unit", 13, 14)], CFG)
    assert act.kind == "attack" and act.t_n == 4 and act.d == 5
    assert act.features.shape == (38,)


def test_pairing_window_and_reuse():
    s = seq([(0, 0), (3, 0), (6, 1), (9, 3)], ticks=[10, 11, 12, 13])
    cmds = [
        CommandEvent(13, "move", "position", 9, 3),  # t_n = 0
        CommandEvent(21, "cast", "none", 0, 0),  # t_n = 8 < 9
        CommandEvent(22, "attack", "unit", 0, 0),  # t_n = 9, outside the window
        CommandEvent(15, "hold", "none", 0, 0),  # never paired
        CommandEvent(12, "move", "unit", 0, 0),  # before the sequence ends
    ]
    acts = pair_commands([s], cmds, CFG)
    assert [(a.kind, a.t_n) for a in acts] == [("move", 0.0), ("cast", 8.0)]
    np.testing.assert_array_equal(acts[0].features[:36], acts[1].features[:36])


def test_short_sequences_are_skipped_for_pairing():
    long_seq = seq([(0, 0), (3, 0), (6, 1), (9, 3)], ticks=[0, 1, 2, 3])
    short = seq([(50, 50), (60, 50)], ticks=[5, 6])
    (act,) = pair_commands([long_seq, short], [CommandEvent(7, "attack", "unit", 9, 3)], CFG)
    assert act.t_n == 4


def brute_force_pairing(sequences, commands, cfg):
    """Quadratic reference: scan every sequence for every command."""
    tau = cfg.tau_ticks
    out = []
    for cmd in commands:
        if cmd.kind == "hold":
            continue
        best = None
        for s in sequences:
            if s.n < MIN_KINEMATIC_LENGTH:
                continue
            gap = cmd.tick - s.t[-1]
            if 0 <= gap < tau and (best is None or s.t[-1] > best.t[-1]):
                best = s
        if best is not None:
            lx, ly = best.x[-1], best.y[-1]
            out.append((cmd.tick, cmd.kind, cmd.tick - best.t[-1], math.hypot(cmd.x - lx, cmd.y - ly), summarize(kinematics(best, cfg))))
    return out


def test_pairing_matches_brute_force_on_synthetic_match():
    profile = make_profiles(1, 1.0, seed=8)[0]
    stream = generate_match(profile, 2.0, seed=3)
    seqs = segment(stream.cursor, CFG)
    fast = pair_commands(seqs, stream.commands, CFG)
    slow = brute_force_pairing(seqs, stream.commands, CFG)
    assert len(fast) == len(slow) > 20
    for a, (tick, kind, t_n, d, summary) in zip(fast, slow):
        assert (a.tick, a.kind) == (tick, kind)
        assert a.t_n == t_n and a.d == pytest.approx(d)
        np.testing.assert_array_equal(a.features[:36], summary)


def test_complex_actions_have_38_nonnegative_extras():
    profile = make_profiles(1, 1.0, seed=9)[0]
    stream = generate_match(profile, 1.0, seed=4)
    acts = complex_actions(stream.cursor, stream.commands, CFG)
    assert acts and all(a.features.shape == (38,) and a.t_n >= 0 and a.d >= 0 for a in acts)
    assert np.all(np.isfinite(action_matrix(acts, "move")))
    assert action_matrix([], "cast").shape == (0, 38)


# --- action mix --------------------------------------------------------------


def test_action_mix_examples():
    assert action_mix(["attack"]).attack == 1.0
    assert action_mix(["attack", "move", "move", "move"]).as_tuple() == (0.25, 0.75, 0.0)
    empty = action_mix([])
    assert empty.empty and empty.as_tuple() == (0.0, 0.0, 0.0)


def test_action_mix_follows_profile_mix():
    import dataclasses

    profile = make_profiles(1, 0.0, seed=1)[0]
    mix = {"attack": 0.20, "move": 0.78, "cast": 0.02, "hold": 0.0}
    profile = dataclasses.replace(profile, command_mix=mix, command_prob=1.0)
    stream = generate_match(profile, 200.0, seed=6, cursor=False)
    kinds = [c.kind for c in stream.commands if c.kind != "hold"]
    assert len(kinds) >= 10_000
    observed = action_mix(kinds).as_tuple()
    assert np.allclose(observed, (0.20, 0.78, 0.02), atol=0.02)
