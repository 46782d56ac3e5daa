"""Template captions describing an injected motion.

A caption is an appearance phrase followed by one translation/rotation
phrase per keyframe segment::

    A small car in the left moves quickly diagonally upwards a lot while rotating left slightly
    A car in the top first moves right, before it moves downwards while rotating right

Conventions fixed here (the rest follows the threshold table):

* translation angle is measured on screen: 0 deg = right, 90 deg = up
  (decreasing pixel row). Each direction word owns the 90 deg interval
  centered on it; a tie at an interval edge goes to the vertical word.
* a positive angle change (visually counter-clockwise) is "rotating left".
* a value sitting exactly on a threshold gets no modifier.
* a motionless segment renders as "pauses" when other segments move, and
  a fully motionless multi-segment caption is the appearance phrase alone.
"""

from __future__ import annotations

import math
import re
from dataclasses import asdict, dataclass, field
from itertools import product
from typing import Sequence

import numpy as np

from .kinematics import MotionSpec, PoseTrack, interpolate

SIZE_WORDS = ("big", "small")
POSITION_WORDS = (
    ("top-left", "top", "top-right"),
    ("left", "center", "right"),
    ("bottom-left", "bottom", "bottom-right"),
)
ALL_POSITIONS = tuple(w for row in POSITION_WORDS for w in row)
SPEED_WORDS = ("quickly", "slowly")
DIRECTION_WORDS = ("upwards", "right", "downwards", "left")
DISTANCE_WORDS = ("a lot", "a little")
ROT_DIRECTION_WORDS = ("left", "right")
ROT_AMOUNT_WORDS = ("slightly", "significantly")
STATIC_SEGMENT = "pauses"


@dataclass(frozen=True)
class ThresholdConfig:
    size_small_max: float = 64.0 * 64  # area below -> "small"
    size_big_min: float = 96.0 * 96  # area above -> "big"
    speed_slow_max: float = 3.0  # px/frame below -> "slowly"
    speed_quick_min: float = 7.0  # px/frame above -> "quickly"
    dist_little_max: float = 0.10  # fraction of frame width
    dist_lot_min: float = 0.30
    rot_slight_max: float = 8.0  # degrees
    rot_signif_min: float = 16.0
    diag_band: tuple[float, float] = (30.0, 60.0)  # on |angle| mod 90

    def __post_init__(self):
        pairs = [
            (self.size_small_max, self.size_big_min, "size"),
            (self.speed_slow_max, self.speed_quick_min, "speed"),
            (self.dist_little_max, self.dist_lot_min, "distance"),
            (self.rot_slight_max, self.rot_signif_min, "rotation"),
            (self.diag_band[0], self.diag_band[1], "diagonal band"),
        ]
        for lo, hi, what in pairs:
            if not lo < hi:
                raise ValueError(f"{what} thresholds must satisfy lower < upper, got {lo} >= {hi}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["diag_band"] = list(self.diag_band)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ThresholdConfig":
        d = dict(d)
        if "diag_band" in d:
            d["diag_band"] = tuple(d["diag_band"])
        return cls(**d)


@dataclass(frozen=True)
class SegmentSlots:
    speed: str = ""
    diagonal: bool = False
    direction: str = ""
    distance: str = ""
    rot_direction: str = ""
    rot_amount: str = ""

    @property
    def translated(self) -> bool:
        return bool(self.direction)

    @property
    def rotated(self) -> bool:
        return bool(self.rot_direction)

    @property
    def empty(self) -> bool:
        return not (self.translated or self.rotated)


@dataclass(frozen=True)
class CaptionSlots:
    size: str
    object: str
    position: str
    segments: tuple[SegmentSlots, ...] = field(default_factory=lambda: (SegmentSlots(),))


@dataclass(frozen=True)
class MotionCaption:
    rendered: str
    slots: CaptionSlots

    def __str__(self) -> str:
        return self.rendered


@dataclass(frozen=True)
class Segment:
    """Interpolated poses from one keyframe to the next, both ends included."""

    centers: np.ndarray  # (m + 1, 2)
    angles: np.ndarray  # (m + 1,)
    frame_width: int

    @property
    def displacement(self) -> np.ndarray:
        return self.centers[-1] - self.centers[0]


def grid_position(x: float, y: float, width: float, height: float) -> str:
    """3x3 grid cell name; a center on a cell boundary goes to the lower-index cell."""
    col = 0 if x <= width / 3 else 1 if x <= 2 * width / 3 else 2
    row = 0 if y <= height / 3 else 1 if y <= 2 * height / 3 else 2
    return POSITION_WORDS[row][col]


def size_word(area: float, cfg: ThresholdConfig) -> str:
    if area < cfg.size_small_max:
        return "small"
    if area > cfg.size_big_min:
        return "big"
    return ""


def translation_angle(dx: float, dy: float) -> float:
    """Screen angle in degrees, (-180, 180]; ``dy`` is in pixel-row units."""
    return math.degrees(math.atan2(-dy, dx))


def direction_word(angle: float) -> str:
    if 45 <= angle <= 135:
        return "upwards"
    if -135 <= angle <= -45:
        return "downwards"
    if -45 < angle < 45:
        return "right"
    return "left"


def is_diagonal(angle: float, cfg: ThresholdConfig) -> bool:
    m = abs(angle) % 90
    return cfg.diag_band[0] < m < cfg.diag_band[1]


def translation_slots(segment: Segment, cfg: ThresholdConfig) -> dict:
    dx, dy = (float(v) for v in segment.displacement)
    if dx == 0 and dy == 0:
        return {}
    steps = np.linalg.norm(np.diff(segment.centers, axis=0), axis=1)
    speed = float(steps.mean())
    total = math.hypot(dx, dy)
    angle = translation_angle(dx, dy)
    w = segment.frame_width
    return {
        "speed": "quickly" if speed > cfg.speed_quick_min else "slowly" if speed < cfg.speed_slow_max else "",
        "diagonal": is_diagonal(angle, cfg),
        "direction": direction_word(angle),
        "distance": "a lot" if total > cfg.dist_lot_min * w else "a little" if total < cfg.dist_little_max * w else "",
    }


def rotation_slots(segment: Segment, cfg: ThresholdConfig) -> dict:
    change = float(segment.angles[-1] - segment.angles[0])
    if change == 0:
        return {}
    mag = abs(change)
    return {
        "rot_direction": "left" if change > 0 else "right",
        "rot_amount": "slightly" if mag < cfg.rot_slight_max else "significantly" if mag > cfg.rot_signif_min else "",
    }


def render_translation(s: SegmentSlots) -> str:
    if not s.direction:
        return ""
    words = ["moves", s.speed, "diagonally" if s.diagonal else "", s.direction, s.distance]
    return " ".join(w for w in words if w)


def render_rotation(s: SegmentSlots) -> str:
    if not s.rot_direction:
        return ""
    return " ".join(w for w in ("while rotating", s.rot_direction, s.rot_amount) if w)


def render_segment(s: SegmentSlots) -> str:
    return " ".join(p for p in (render_translation(s), render_rotation(s)) if p)


def render_appearance(size: str, obj: str, position: str) -> str:
    return " ".join(w for w in ("A", size, obj, "in the", position) if w)


def render(slots: CaptionSlots) -> str:
    head = render_appearance(slots.size, slots.object, slots.position)
    return _join(head, [render_segment(s) for s in slots.segments])


def _join(head: str, segment_phrases: Sequence[str]) -> str:
    if len(segment_phrases) == 1:
        return " ".join(p for p in (head, segment_phrases[0]) if p)
    if not any(segment_phrases):
        return head
    body = ", before it ".join(p or STATIC_SEGMENT for p in segment_phrases)
    return " ".join(p for p in (head, "first", body) if p)


def describe_appearance(spec: MotionSpec, cfg: ThresholdConfig) -> str:
    first = spec.keyframes[0]
    pos = grid_position(first.x, first.y, spec.frame_width, spec.frame_height)
    return render_appearance(size_word(spec.area, cfg), spec.object_name, pos)


def describe_translation(segment: Segment, cfg: ThresholdConfig) -> str:
    return render_translation(SegmentSlots(**translation_slots(segment, cfg)))


def describe_rotation(segment: Segment, cfg: ThresholdConfig) -> str:
    return render_rotation(SegmentSlots(**rotation_slots(segment, cfg)))


def segments_from_track(spec: MotionSpec, track: PoseTrack) -> list[Segment]:
    out = []
    for a, b in zip(spec.keyframes, spec.keyframes[1:]):
        sl = slice(a.frame, b.frame + 1)
        out.append(Segment(track.centers[sl], track.angles[sl], spec.frame_width))
    return out


def segments_from_keyframes(spec: MotionSpec) -> list[Segment]:
    """Segments built from keyframe values alone, with evenly spaced poses."""
    out = []
    for a, b in zip(spec.keyframes, spec.keyframes[1:]):
        t = np.linspace(0.0, 1.0, b.frame - a.frame + 1)[:, None]
        p0, p1 = np.array([a.x, a.y]), np.array([b.x, b.y])
        centers = p0 + (p1 - p0) * t
        centers[-1] = p1
        out.append(Segment(centers, np.array([a.angle, b.angle]), spec.frame_width))
    return out


def caption_slots(spec: MotionSpec, segments: Sequence[Segment], cfg: ThresholdConfig) -> CaptionSlots:
    first = spec.keyframes[0]
    seg_slots = tuple(
        SegmentSlots(**translation_slots(seg, cfg), **rotation_slots(seg, cfg)) for seg in segments
    )
    return CaptionSlots(
        size=size_word(spec.area, cfg),
        object=spec.object_name,
        position=grid_position(first.x, first.y, spec.frame_width, spec.frame_height),
        segments=seg_slots,
    )


def assemble_caption(spec: MotionSpec, track: PoseTrack | None = None,
                     cfg: ThresholdConfig | None = None) -> MotionCaption:
    """Caption for ``spec``; qualifiers are measured on the per-frame track."""
    cfg = cfg or ThresholdConfig()
    track = track if track is not None else interpolate(spec)
    slots = caption_slots(spec, segments_from_track(spec, track), cfg)
    return MotionCaption(render(slots), slots)


# inverse grammar ---------------------------------------------------------

_APPEARANCE_RE = re.compile(
    r"^A (?:(big|small) )?(.+?) in the (%s)(?: (.*))?$"
    % "|".join(sorted(ALL_POSITIONS, key=len, reverse=True))
)
_TRANSLATE_RE = re.compile(
    r"^moves(?: (quickly|slowly))?( diagonally)? (upwards|right|downwards|left)(?: (a lot|a little))?$"
)
_ROTATE_RE = re.compile(r"^while rotating (left|right)(?: (slightly|significantly))?$")


class CaptionParseError(ValueError):
    pass


def _parse_segment(text: str) -> SegmentSlots:
    if text in ("", STATIC_SEGMENT):
        return SegmentSlots()
    i = text.find("while rotating")
    trans, rot = (text, "") if i < 0 else (text[:i].strip(), text[i:])
    out = {}
    if trans:
        m = _TRANSLATE_RE.match(trans)
        if not m:
            raise CaptionParseError(f"bad translation phrase: {trans!r}")
        out.update(speed=m[1] or "", diagonal=bool(m[2]), direction=m[3], distance=m[4] or "")
    if rot:
        m = _ROTATE_RE.match(rot)
        if not m:
            raise CaptionParseError(f"bad rotation phrase: {rot!r}")
        out.update(rot_direction=m[1], rot_amount=m[2] or "")
    return SegmentSlots(**out)


def parse_caption(text: str, num_segments: int | None = None) -> CaptionSlots:
    """Recover the slot record from a rendered caption.

    ``num_segments`` is only needed to expand an appearance-only caption of a
    multi-keyframe motion back into its motionless segments.
    """
    m = _APPEARANCE_RE.match(text)
    if not m:
        raise CaptionParseError(f"not a motion caption: {text!r}")
    size, obj, pos, rest = m[1] or "", m[2], m[3], m[4] or ""
    if rest.startswith("first "):
        segments = tuple(_parse_segment(p) for p in rest[len("first "):].split(", before it "))
        if len(segments) < 2:
            raise CaptionParseError(f"'first' without 'before it': {text!r}")
    elif rest == "" and num_segments and num_segments > 1:
        segments = tuple(SegmentSlots() for _ in range(num_segments))
    else:
        segments = (_parse_segment(rest),)
    return CaptionSlots(size, obj, pos, segments)


# caption space -----------------------------------------------------------

def _segment_options(translation: bool, rotation: bool, include_static: bool) -> list[SegmentSlots]:
    trans = [{}] if not translation else [
        dict(speed=s, diagonal=d, direction=r, distance=t)
        for s, d, r, t in product(("quickly", "", "slowly"), (True, False), DIRECTION_WORDS, ("a lot", "", "a little"))
    ]
    rot = [{}] if not rotation else [
        dict(rot_direction=r, rot_amount=a) for r, a in product(ROT_DIRECTION_WORDS, ("slightly", "", "significantly"))
    ]
    if include_static:
        trans = trans if not translation else trans + [{}]
        rot = rot if not rotation else rot + [{}]
    return [SegmentSlots(**t, **r) for t, r in product(trans, rot)]


def caption_space_product(num_keyframes: int, appearance: bool = True, translation: bool = True,
                          rotation: bool = True, include_static: bool = False) -> int:
    """Closed-form size of the caption space for one object."""
    a = 27 if appearance else 1
    t = (72 + include_static) if translation else 1
    r = (6 + include_static) if rotation else 1
    return a * (t * r) ** (num_keyframes - 1)


def count_caption_space(num_keyframes: int, appearance: bool = True, translation: bool = True,
                        rotation: bool = True, include_static: bool = False,
                        object_name: str = "car", limit: int = 20_000_000) -> int:
    """Count distinct captions for one object by rendering every slot combination.

    ``include_static`` adds the zero-translation / zero-rotation options that
    this renderer supports beyond the base phrase grammar.
    """
    if num_keyframes < 2:
        raise ValueError("need at least 2 keyframes")
    heads = [""] if not appearance else [
        render_appearance(s, object_name, p) for s in ("big", "", "small") for p in ALL_POSITIONS
    ]
    phrases = [render_segment(s) for s in _segment_options(translation, rotation, include_static)]
    nseg = num_keyframes - 1
    total = len(heads) * len(phrases) ** nseg
    if total > limit:
        raise ValueError(f"{total} combinations exceed the enumeration limit {limit}")

    # 64-bit string hashes; a collision among <= 2e7 strings has probability ~1e-5
    blocks = []
    subs = [p or STATIC_SEGMENT for p in phrases]
    for head in heads:
        if nseg == 1:
            blocks.append([hash(_join(head, (p,))) for p in phrases])
            continue
        lead = f"{head} first " if head else "first "
        for prefix in product(range(len(phrases)), repeat=nseg - 1):
            base = lead + ", before it ".join(subs[j] for j in prefix) + ", before it "
            block = [hash(base + s) for s in subs]
            if not any(phrases[j] for j in prefix):
                for j, p in enumerate(phrases):
                    if not p:
                        block[j] = hash(_join(head, [""] * nseg))
            blocks.append(block)
    return int(np.unique(np.array(blocks, dtype=np.int64).ravel()).size)
