"""Closed-form trajectories and their exact kinematics on the staggered grid.

Velocity lives between samples i and i+1, curvature, angular velocity and
acceleration at interior sample i+1, jerk between interior samples.
"""

from __future__ import annotations

import numpy as np

from playerprint.mouse import MovementSequence, SegmentationConfig, kinematics

SHAPES = ("line", "circle", "spiral")
RADII = (50.0, 200.0, 800.0)
DENSITIES = (60, 240)  # ticks per second
QUANTITIES = ("v", "a", "jerk", "c", "w")
SPEED = 300.0


def trajectory(shape: str, radius: float, tick_rate: int, seconds: float = 1.0):
    n = int(seconds * tick_rate) + 1
    ticks = np.arange(n, dtype=float)
    t = ticks / tick_rate
    t_step = (t[:-1] + t[1:]) / 2
    t_vertex = t[1:-1]
    t_jerk = (t[1:-2] + t[2:-1]) / 2
    if shape == "line":
        accel = 4.0 * radius
        s = SPEED * t + 0.5 * accel * t * t
        x, y = s * np.cos(0.3), s * np.sin(0.3)
        exact = {
            "v": SPEED + accel * t_step,
            "a": np.full(n - 2, accel),
            "jerk": np.zeros(n - 3),
            "c": np.zeros(n - 2),
            "w": np.zeros(n - 2),
        }
        scale = {"jerk": accel, "c": 1.0 / radius, "w": 1.0}
    elif shape == "circle":
        omega = SPEED / radius
        x, y = radius * np.cos(omega * t), radius * np.sin(omega * t)
        exact = {
            "v": np.full(n - 1, SPEED),
            "a": np.zeros(n - 2),
            "jerk": np.zeros(n - 3),
            "c": np.full(n - 2, 1.0 / radius),
            "w": np.full(n - 2, omega),
        }
        scale = {"a": SPEED * omega, "jerk": SPEED * omega**2}
    elif shape == "spiral":
        # Archimedean spiral r = b * phi swept at constant d(phi)/dt
        b, om = radius / 10.0, 1.5
        phi = 2 * np.pi + om * t
        x, y = b * phi * np.cos(phi), b * phi * np.sin(phi)
        pm, pv, pj = (2 * np.pi + om * tt for tt in (t_step, t_vertex, t_jerk))
        exact = {
            "v": b * om * np.sqrt(1 + pm**2),
            "a": b * om**2 * pv / np.sqrt(1 + pv**2),
            "jerk": b * om**3 / (1 + pj**2) ** 1.5,
            "c": (pv**2 + 2) / (b * (1 + pv**2) ** 1.5),
            "w": om * (pv**2 + 2) / (1 + pv**2),
        }
        scale = {}
    else:
        raise ValueError(shape)
    seq = MovementSequence(ticks, x, y)
    return seq, exact, scale


def relative_errors(shape: str, radius: float, tick_rate: int) -> dict[str, float]:
    """Max abs error of each series over the max magnitude of its closed form
    (or over a natural scale when the closed form is identically zero)."""
    seq, exact, scale = trajectory(shape, radius, tick_rate)
    kin = kinematics(seq, SegmentationConfig(300.0, tick_rate))
    out = {}
    for q in QUANTITIES:
        est = getattr(kin, q)
        ref = exact[q]
        assert est.shape == ref.shape
        denom = scale.get(q, float(np.max(np.abs(ref))))
        out[q] = float(np.max(np.abs(est - ref)) / denom)
    return out
