"""Hand-constructed boundary cases for the caption grammar; exact string match.

Thresholds: area 64^2 / 96^2, speed 3 / 7 px per frame, distance 0.10 / 0.30
of the frame width, rotation 8 / 16 degrees. Comparisons are strict, so a
value exactly on a threshold gets no modifier.
"""

import numpy as np
import pytest

from motionpairs.captions import (
    Segment, ThresholdConfig, assemble_caption, describe_appearance, describe_rotation,
    describe_translation, is_diagonal,
)
from motionpairs.kinematics import Keyframe, MotionSpec

CFG = ThresholdConfig()
EPS = 1e-6


def spec(h, w, keyframes, name="car", size=224):
    return MotionSpec(name, 0, h, w, size, size, tuple(Keyframe(*k) for k in keyframes))


def appearance(h, w, x, y, name="car", size=224):
    return describe_appearance(spec(h, w, [(0, x, y, 0), (15, x, y, 0)], name, size), CFG)


def line(step, steps, axis=0, sign=1, start=100.0, width=224):
    """Evenly spaced poses moving ``step`` px per frame along one axis."""
    offsets = sign * step * np.arange(steps + 1)
    centers = np.full((steps + 1, 2), start)
    centers[:, axis] += offsets
    return describe_translation(Segment(centers, np.zeros(steps + 1), width), CFG)


def travel(total, steps, axis=0, sign=1, start=100.0, width=224):
    centers = np.full((steps + 1, 2), start)
    centers[:, axis] += sign * np.linspace(0.0, total, steps + 1)
    centers[-1, axis] = start + sign * total
    return describe_translation(Segment(centers, np.zeros(steps + 1), width), CFG)


def drift(dx, dy, steps):
    centers = np.array([100.0, 100.0]) + np.linspace(0, 1, steps + 1)[:, None] * np.array([dx, dy])
    return describe_translation(Segment(centers, np.zeros(steps + 1), 224), CFG)


def turn(delta):
    return describe_rotation(Segment(np.zeros((2, 2)), np.array([0.0, delta]), 224), CFG)


GOLDEN = [
    # appearance: size words around 64^2 and 96^2
    ("area 50x50 left cell", lambda: appearance(50, 50, 30, 112), "A small car in the left"),
    ("area 80x80 top-right", lambda: appearance(80, 80, 180, 40, "piano"), "A piano in the top-right"),
    ("area 64^2-1", lambda: appearance(63, 65, 112, 112), "A small car in the center"),
    ("area 64^2", lambda: appearance(64, 64, 112, 112), "A car in the center"),
    ("area 64^2+1", lambda: appearance(17, 241, 160, 160, size=320), "A car in the center"),
    ("area 96^2-1", lambda: appearance(95, 97, 112, 112), "A car in the center"),
    ("area 96^2", lambda: appearance(96, 96, 112, 112), "A car in the center"),
    ("area 96^2+1", lambda: appearance(13, 709, 400, 400, size=800), "A big car in the center"),
    ("area 97^2", lambda: appearance(97, 97, 112, 112, "hot air balloon"), "A big hot air balloon in the center"),
    # grid cells: a center on a boundary goes to the lower-index cell
    ("x on first column boundary", lambda: appearance(70, 70, 100, 150, size=300), "A car in the left"),
    ("x on second column boundary", lambda: appearance(70, 70, 200, 150, size=300), "A car in the center"),
    ("y on first row boundary", lambda: appearance(70, 70, 150, 100, size=300), "A car in the top"),
    ("corner boundary", lambda: appearance(70, 70, 100, 100, size=300), "A car in the top-left"),
    # speed around 3 and 7 px/frame (15 frames: 45 px and 105 px travelled)
    ("speed 3-eps", lambda: line(3 - EPS, 15), "moves slowly right"),
    ("speed 3", lambda: line(3, 15), "moves right"),
    ("speed 3+eps", lambda: line(3 + EPS, 15), "moves right"),
    ("speed 7-eps", lambda: line(7 - EPS, 15), "moves right a lot"),
    ("speed 7", lambda: line(7, 15), "moves right a lot"),
    ("speed 7+eps", lambda: line(7 + EPS, 15), "moves quickly right a lot"),
    # distance around 0.10 W and 0.30 W
    ("distance 0.10W-1px", lambda: travel(21.4, 5, axis=1), "moves downwards a little"),
    ("distance 0.10W+1px", lambda: travel(23.4, 5, axis=1), "moves downwards"),
    ("distance exactly 0.10W", lambda: travel(20.0, 5, axis=1, width=200), "moves downwards"),
    ("distance 0.30W-1px", lambda: travel(66.2, 15, sign=-1), "moves left"),
    ("distance 0.30W+1px", lambda: travel(68.2, 15, sign=-1), "moves left a lot"),
    ("distance exactly 0.30W", lambda: travel(60.0, 15, sign=-1, width=200), "moves left"),
    # rotation around 8 and 16 degrees, both signs
    ("rotation +8-eps", lambda: turn(8 - EPS), "while rotating left slightly"),
    ("rotation +8", lambda: turn(8), "while rotating left"),
    ("rotation +8+eps", lambda: turn(8 + EPS), "while rotating left"),
    ("rotation +16-eps", lambda: turn(16 - EPS), "while rotating left"),
    ("rotation +16", lambda: turn(16), "while rotating left"),
    ("rotation +16+eps", lambda: turn(16 + EPS), "while rotating left significantly"),
    ("rotation -8+eps", lambda: turn(-8 + EPS), "while rotating right slightly"),
    ("rotation -8", lambda: turn(-8), "while rotating right"),
    ("rotation -8-eps", lambda: turn(-8 - EPS), "while rotating right"),
    ("rotation -16+eps", lambda: turn(-16 + EPS), "while rotating right"),
    ("rotation -16", lambda: turn(-16), "while rotating right"),
    ("rotation -16-eps", lambda: turn(-16 - EPS), "while rotating right significantly"),
    ("rotation +5", lambda: turn(5), "while rotating left slightly"),
    ("rotation -20", lambda: turn(-20), "while rotating right significantly"),
    ("rotation 0", lambda: turn(0), ""),
    # directions, diagonals and ties toward the vertical word
    ("leftward 60px over 15 frames", lambda: drift(-60, 0, 15), "moves left"),
    ("up-right 45 degrees", lambda: drift(48, -48, 6), "moves quickly diagonally upwards a lot"),
    ("slow short downward", lambda: drift(0, 5, 10), "moves slowly downwards a little"),
    ("up-left 135 degrees", lambda: drift(-48, -48, 6), "moves quickly diagonally upwards a lot"),
    ("down-right -45 degrees", lambda: drift(48, 48, 6), "moves quickly diagonally downwards a lot"),
    ("down-left -135 degrees", lambda: drift(-48, 48, 6), "moves quickly diagonally downwards a lot"),
    # full captions
    ("K=2 composed caption",
     lambda: assemble_caption(spec(10, 10, [(0, 190, 74, 0), (15, 190, 5, 5)], "piano")).rendered,
     "A small piano in the top-right moves upwards a lot while rotating left slightly"),
    ("K=3 composed caption",
     lambda: assemble_caption(spec(40, 40, [(0, 60, 60, 0), (8, 100, 60, 10), (15, 100, 20, -10)])).rendered,
     "A small car in the top-left first moves right while rotating left, "
     "before it moves upwards while rotating right significantly"),
    ("K=3 static first segment",
     lambda: assemble_caption(spec(40, 40, [(0, 60, 60, 0), (8, 60, 60, 0), (15, 100, 60, 0)])).rendered,
     "A small car in the top-left first pauses, before it moves right"),
    ("K=3 no motion",
     lambda: assemble_caption(spec(40, 40, [(0, 60, 60, 3), (8, 60, 60, 3), (15, 60, 60, 3)])).rendered,
     "A small car in the top-left"),
]


def test_golden_suite_size():
    assert len(GOLDEN) >= 40


@pytest.mark.parametrize("build,expected", [g[1:] for g in GOLDEN], ids=[g[0] for g in GOLDEN])
def test_golden(build, expected):
    assert build() == expected


@pytest.mark.parametrize("angle,expected", [
    (30.0, False), (30.0 + EPS, True), (60.0 - EPS, True), (60.0, False),
    (-30.0, False), (-45.0, True), (120.0 + EPS, True), (150.0, False), (0.0, False),
])
def test_diagonal_band_is_open(angle, expected):
    assert is_diagonal(angle, CFG) is expected
