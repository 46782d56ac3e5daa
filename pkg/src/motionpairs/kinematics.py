"""Motion parameter sampling and keyframe interpolation.

Coordinates are continuous pixel units: the frame spans ``[0, W] x [0, H]``,
``x`` is horizontal (grows rightwards) and ``y`` is vertical (grows
downwards, i.e. along pixel rows). Pixel ``(row, col)`` has its center at
``(col + 0.5, row + 0.5)``.

Angles are degrees. A positive angle is a visually counter-clockwise turn.

Randomness comes from numpy's PCG64. Every video gets its own child stream,
``SeedSequence(seed, spawn_key=(video_index,))``, so a dataset can be built
in any order or across any number of workers and still come out the same.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .errors import AssetError, ConfigError


@dataclass(frozen=True)
class GenConfig:
    frame_width: int = 224
    frame_height: int = 224
    num_frames: int = 16
    num_keyframes: int = 3
    min_obj_side: int = 32
    max_obj_side: int = 128
    delta_max: float = 10.0
    theta_range: float = 25.0
    rng_seed: int = 0

    def validate(self) -> "GenConfig":
        if self.num_keyframes < 2:
            raise ConfigError(f"num_keyframes must be >= 2, got {self.num_keyframes}")
        if self.num_frames < self.num_keyframes:
            raise ConfigError(
                f"num_frames ({self.num_frames}) must be >= num_keyframes ({self.num_keyframes})"
            )
        if not 0 < self.min_obj_side <= self.max_obj_side:
            raise ConfigError("need 0 < min_obj_side <= max_obj_side")
        if self.max_obj_side >= min(self.frame_width, self.frame_height):
            raise ConfigError(
                f"objects up to {self.max_obj_side}px cannot be contained in a "
                f"{self.frame_width}x{self.frame_height} frame"
            )
        if self.delta_max < 0:
            raise ConfigError("delta_max must be non-negative")
        if self.theta_range < 0:
            raise ConfigError("theta_range must be non-negative")
        return self

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Keyframe:
    frame: int
    x: float
    y: float
    angle: float


@dataclass(frozen=True)
class MotionSpec:
    """Everything needed to render one injected motion and to describe it."""

    object_name: str
    object_index: int
    height: int  # scaled object height H'
    width: int  # scaled object width W'
    frame_width: int
    frame_height: int
    keyframes: tuple[Keyframe, ...] = field(default_factory=tuple)

    @property
    def num_frames(self) -> int:
        return self.keyframes[-1].frame + 1

    @property
    def area(self) -> int:
        return self.height * self.width

    def to_dict(self) -> dict:
        return {
            "object_name": self.object_name,
            "object_index": self.object_index,
            "height": self.height,
            "width": self.width,
            "frame_width": self.frame_width,
            "frame_height": self.frame_height,
            "keyframes": [
                {"frame": k.frame, "x": k.x, "y": k.y, "angle": k.angle} for k in self.keyframes
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MotionSpec":
        return cls(
            object_name=d["object_name"],
            object_index=int(d["object_index"]),
            height=int(d["height"]),
            width=int(d["width"]),
            frame_width=int(d["frame_width"]),
            frame_height=int(d["frame_height"]),
            keyframes=tuple(
                Keyframe(int(k["frame"]), float(k["x"]), float(k["y"]), float(k["angle"]))
                for k in d["keyframes"]
            ),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))


@dataclass(frozen=True)
class PoseTrack:
    centers: np.ndarray  # (N, 2) as (x, y)
    angles: np.ndarray  # (N,)

    def __len__(self) -> int:
        return len(self.angles)


def video_rng(seed: int, video_index: int) -> np.random.Generator:
    """Child generator for one video; independent of generation order."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(video_index,))))


def scaled_size(native_hw: tuple[int, int], longest_side: int) -> tuple[int, int]:
    """Scale ``(h, w)`` so the longer side equals ``longest_side``."""
    h, w = native_hw
    if h >= w:
        return longest_side, max(1, round(longest_side * w / h))
    return max(1, round(longest_side * h / w)), longest_side


def sample_motion(cfg: GenConfig, sprites: Sequence, rng: np.random.Generator) -> MotionSpec:
    """Draw one motion: object, scale, keyframe times, centers and angles.

    ``sprites`` is any sequence of objects with ``name``, ``height`` and
    ``width`` attributes.
    """
    cfg.validate()
    if len(sprites) == 0:
        raise AssetError("sprite set is empty")

    index = int(rng.integers(len(sprites)))
    sprite = sprites[index]
    side = int(rng.integers(cfg.min_obj_side, cfg.max_obj_side + 1))
    h, w = scaled_size((sprite.height, sprite.width), side)

    n, k = cfg.num_frames, cfg.num_keyframes
    interior = rng.choice(np.arange(1, n - 1), size=k - 2, replace=False) if k > 2 else []
    frames = [0, *sorted(int(i) for i in interior), n - 1]

    x_lo, x_hi = w / 2, cfg.frame_width - w / 2
    y_lo, y_hi = h / 2, cfg.frame_height - h / 2

    keyframes = []
    prev = None
    for f in frames:
        if prev is None:
            x = rng.uniform(x_lo, x_hi)
            y = rng.uniform(y_lo, y_hi)
        else:
            reach = cfg.delta_max * (f - prev.frame)
            x = rng.uniform(max(x_lo, prev.x - reach), min(x_hi, prev.x + reach))
            y = rng.uniform(max(y_lo, prev.y - reach), min(y_hi, prev.y + reach))
        angle = rng.uniform(-cfg.theta_range, cfg.theta_range)
        prev = Keyframe(f, float(x), float(y), float(angle))
        keyframes.append(prev)

    return MotionSpec(
        object_name=sprite.name,
        object_index=index,
        height=h,
        width=w,
        frame_width=cfg.frame_width,
        frame_height=cfg.frame_height,
        keyframes=tuple(keyframes),
    )


def interpolate(spec: MotionSpec, num_frames: int | None = None) -> PoseTrack:
    """Piecewise-linear per-frame poses; exact at keyframes."""
    n = spec.num_frames
    if num_frames is not None and num_frames != n:
        raise ValueError(f"spec spans {n} frames, asked for {num_frames}")
    kf = spec.keyframes
    t = np.arange(n, dtype=np.float64)
    knots = np.array([k.frame for k in kf], dtype=np.float64)
    xs = np.interp(t, knots, [k.x for k in kf])
    ys = np.interp(t, knots, [k.y for k in kf])
    angles = np.interp(t, knots, [k.angle for k in kf])
    # np.interp is not guaranteed to reproduce knot values bit-for-bit
    for k in kf:
        xs[k.frame], ys[k.frame], angles[k.frame] = k.x, k.y, k.angle
    return PoseTrack(centers=np.stack([xs, ys], axis=1), angles=angles)


def rotation_matrix(theta: float) -> np.ndarray:
    """``[[cos, -sin], [sin, cos]]`` for ``theta`` in degrees.

    Exact for multiples of 90 degrees.
    """
    if theta % 90 == 0:
        c, s = [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)][int(theta // 90) % 4]
    else:
        r = math.radians(theta)
        c, s = math.cos(r), math.sin(r)
    return np.array([[c, -s], [s, c]])


def check_spec(spec: MotionSpec, cfg: GenConfig) -> list[str]:
    """Return a list of invariant violations (empty when the spec is valid)."""
    problems = []
    kf = spec.keyframes
    if kf[0].frame != 0 or kf[-1].frame != cfg.num_frames - 1:
        problems.append("keyframes must start at 0 and end at N-1")
    for a, b in zip(kf, kf[1:]):
        if b.frame <= a.frame:
            problems.append(f"keyframe {b.frame} not after {a.frame}")
            continue
        reach = cfg.delta_max * (b.frame - a.frame)
        if abs(b.x - a.x) > reach or abs(b.y - a.y) > reach:
            problems.append(f"displacement between frames {a.frame} and {b.frame} exceeds delta")
    for k in kf:
        if not (spec.width / 2 <= k.x <= spec.frame_width - spec.width / 2):
            problems.append(f"x={k.x} at frame {k.frame} leaves the frame")
        if not (spec.height / 2 <= k.y <= spec.frame_height - spec.height / 2):
            problems.append(f"y={k.y} at frame {k.frame} leaves the frame")
        if abs(k.angle) > cfg.theta_range:
            problems.append(f"angle {k.angle} at frame {k.frame} out of range")
    return problems
