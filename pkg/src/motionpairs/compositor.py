"""Alpha compositing of a moving sprite onto a frame sequence.

All resampling is bilinear on premultiplied color. Scale, rotation and the
sub-pixel pose offset are folded into one inverse map per frame, so each
output pixel is resampled exactly once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import AssetError
from .kinematics import PoseTrack, rotation_matrix
from .sprites import IMAGE_SUFFIXES, Sprite

BACKGROUND_MODES = ("video", "static_frame", "black")


@dataclass(eq=False)
class FrameSeq:
    frames: np.ndarray  # (N, H, W, 3) uint8
    background_mode: str = "video"

    def __post_init__(self):
        f = self.frames
        if f.ndim != 4 or f.shape[3] != 3 or f.dtype != np.uint8:
            raise ValueError(f"frames must be (N, H, W, 3) uint8, got {f.shape} {f.dtype}")
        if f.shape[0] < 2:
            raise ValueError("a frame sequence needs at least 2 frames")
        if self.background_mode not in BACKGROUND_MODES:
            raise ValueError(f"unknown background mode {self.background_mode!r}")

    def __len__(self) -> int:
        return self.frames.shape[0]

    @property
    def height(self) -> int:
        return self.frames.shape[1]

    @property
    def width(self) -> int:
        return self.frames.shape[2]


def _premultiplied(sprite: Sprite) -> np.ndarray:
    """Premultiplied float RGBA padded with one transparent pixel on each side."""
    rgba = sprite.rgba.astype(np.float64)
    a = rgba[..., 3:4] / 255.0
    out = np.zeros((sprite.height + 2, sprite.width + 2, 4))
    out[1:-1, 1:-1, :3] = rgba[..., :3] * a
    out[1:-1, 1:-1, 3] = rgba[..., 3]
    return out


def _sample(padded: np.ndarray, qx: np.ndarray, qy: np.ndarray) -> np.ndarray:
    """Bilinear lookup at sprite coordinates; zero outside the sprite rectangle."""
    h, w = padded.shape[0] - 2, padded.shape[1] - 2
    inside = (qx >= 0) & (qx <= w) & (qy >= 0) & (qy <= h)
    fx = np.clip(qx + 0.5, 0.0, w + 1.0)  # +1 padding, -0.5 to pixel-center grid
    fy = np.clip(qy + 0.5, 0.0, h + 1.0)
    x0 = np.minimum(np.floor(fx).astype(np.intp), w)
    y0 = np.minimum(np.floor(fy).astype(np.intp), h)
    wx = (fx - x0)[..., None]
    wy = (fy - y0)[..., None]
    top = padded[y0, x0] * (1 - wx) + padded[y0, x0 + 1] * wx
    bot = padded[y0 + 1, x0] * (1 - wx) + padded[y0 + 1, x0 + 1] * wx
    out = top * (1 - wy) + bot * wy
    out[~inside] = 0.0
    return out


def rotated_extent(height: float, width: float, theta: float) -> tuple[int, int]:
    """``(h, w)`` of the tight integer box around a rotated ``height x width`` rect."""
    r = rotation_matrix(theta)
    c, s = abs(r[0, 0]), abs(r[1, 0])
    eps = 1e-9
    return math.ceil(width * s + height * c - eps), math.ceil(width * c + height * s - eps)


def _inverse_map(px, py, cx, cy, theta, scale_x, scale_y, sprite_w, sprite_h):
    """Frame coordinates -> sprite coordinates for a sprite centered at (cx, cy).

    Pixel rows grow downwards, so applying ``rotation_matrix(theta)`` to a
    frame-space offset undoes a visually counter-clockwise turn by ``theta``.
    """
    r = rotation_matrix(theta)
    dx, dy = px - cx, py - cy
    qx = (r[0, 0] * dx + r[0, 1] * dy) / scale_x + sprite_w / 2
    qy = (r[1, 0] * dx + r[1, 1] * dy) / scale_y + sprite_h / 2
    return qx, qy


def transform_sprite(sprite: Sprite, scale_to: tuple[int, int], theta: float) -> Sprite:
    """Scale ``sprite`` to ``scale_to = (h, w)`` then rotate by ``theta`` degrees."""
    th, tw = scale_to
    if th <= 0 or tw <= 0:
        raise ValueError(f"target size must be positive, got {scale_to}")
    native = (th, tw) == (sprite.height, sprite.width)
    if native and theta % 90 == 0:
        return Sprite(sprite.name, np.rot90(sprite.rgba, k=int(theta // 90) % 4).copy())

    oh, ow = rotated_extent(th, tw, theta)
    jj, ii = np.meshgrid(np.arange(ow) + 0.5, np.arange(oh) + 0.5)
    qx, qy = _inverse_map(jj, ii, ow / 2, oh / 2, theta, tw / sprite.width, th / sprite.height,
                          sprite.width, sprite.height)
    s = _sample(_premultiplied(sprite), qx, qy)
    a = s[..., 3]
    rgb = np.zeros(s.shape[:2] + (3,))
    nz = a > 0
    rgb[nz] = s[nz, :3] * 255.0 / a[nz, None]
    out = np.concatenate([rgb, a[..., None]], axis=-1)
    return Sprite(sprite.name, np.clip(np.rint(out), 0, 255).astype(np.uint8))


def _blend_into(frame: np.ndarray, padded: np.ndarray, sprite_hw, size, center, theta) -> tuple[slice, slice] | None:
    """Source-over blend one transformed sprite into ``frame`` (float, in place)."""
    H, W = frame.shape[:2]
    sh, sw = sprite_hw
    th, tw = size
    cx, cy = center
    bh, bw = rotated_extent(th, tw, theta)
    c0 = max(0, math.floor(cx - bw / 2))
    c1 = min(W, math.ceil(cx + bw / 2))
    r0 = max(0, math.floor(cy - bh / 2))
    r1 = min(H, math.ceil(cy + bh / 2))
    if c0 >= c1 or r0 >= r1:
        return None
    jj, ii = np.meshgrid(np.arange(c0, c1) + 0.5, np.arange(r0, r1) + 0.5)
    qx, qy = _inverse_map(jj, ii, cx, cy, theta, tw / sw, th / sh, sw, sh)
    s = _sample(padded, qx, qy)
    region = frame[r0:r1, c0:c1]
    region *= 1.0 - s[..., 3:4] / 255.0
    region += s[..., :3]
    return slice(r0, r1), slice(c0, c1)


def composite(background: FrameSeq, sprite: Sprite, track: PoseTrack,
              size: tuple[int, int] | None = None) -> FrameSeq:
    """Overlay ``sprite`` on every frame at the pose given by ``track``.

    ``size`` is the scaled object size ``(h, w)``; defaults to the native size.
    """
    if len(track) != len(background):
        raise ValueError(f"track has {len(track)} poses but background has {len(background)} frames")
    size = size or (sprite.height, sprite.width)
    if size[0] <= 0 or size[1] <= 0:
        raise ValueError(f"object size must be positive, got {size}")
    padded = _premultiplied(sprite)
    out = background.frames.copy()
    for i in range(len(background)):
        frame = out[i].astype(np.float64)
        box = _blend_into(frame, padded, (sprite.height, sprite.width), size,
                          track.centers[i], float(track.angles[i]))
        if box is not None:
            out[i][box] = np.clip(np.rint(frame[box]), 0, 255).astype(np.uint8)
    return FrameSeq(out, background.background_mode)


def resize_frame(frame: np.ndarray, height: int, width: int) -> np.ndarray:
    """Center-crop to the target aspect ratio, then bilinear resize."""
    h, w = frame.shape[:2]
    if (h, w) == (height, width):
        return frame
    target = width / height
    if w / h > target:
        cw, ch = round(h * target), h
    else:
        cw, ch = w, round(w / target)
    x0, y0 = (w - cw) // 2, (h - ch) // 2
    crop = frame[y0:y0 + ch, x0:x0 + cw]
    img = Image.fromarray(np.ascontiguousarray(crop), "RGB").resize((width, height), Image.BILINEAR)
    return np.asarray(img, dtype=np.uint8)


def make_background(mode: str, source: FrameSeq | np.ndarray | None, num_frames: int,
                    height: int = 224, width: int = 224) -> FrameSeq:
    """Build the ``num_frames`` background for one video.

    Source clips shorter than ``num_frames`` are looped.
    """
    if mode not in BACKGROUND_MODES:
        raise ValueError(f"unknown background mode {mode!r}")
    if mode == "black":
        return FrameSeq(np.zeros((num_frames, height, width, 3), dtype=np.uint8), "black")
    if source is None:
        raise AssetError(f"background mode {mode!r} needs source frames")
    frames = source.frames if isinstance(source, FrameSeq) else np.asarray(source, dtype=np.uint8)
    if len(frames) == 0:
        raise AssetError("background source has no frames")
    if mode == "static_frame":
        first = resize_frame(frames[0], height, width)
        return FrameSeq(np.repeat(first[None], num_frames, axis=0), "static_frame")
    idx = np.arange(num_frames) % len(frames)
    return FrameSeq(np.stack([resize_frame(frames[i], height, width) for i in idx]), "video")


def load_clip(clip_dir: str | Path) -> np.ndarray:
    """Read a directory of frame images (sorted by filename) as ``(N, H, W, 3)``."""
    files = sorted(p for p in Path(clip_dir).iterdir() if p.suffix.lower() in IMAGE_SUFFIXES | {".jpg", ".jpeg"})
    if not files:
        raise AssetError(f"no frames in clip directory {clip_dir}")
    frames = []
    for f in files:
        with Image.open(f) as im:
            frames.append(np.asarray(im.convert("RGB"), dtype=np.uint8))
    if len({fr.shape for fr in frames}) != 1:
        raise AssetError(f"frames in {clip_dir} differ in size")
    return np.stack(frames)


def list_clips(background_dir: str | Path) -> list[Path]:
    root = Path(background_dir)
    if not root.is_dir():
        raise AssetError(f"background directory not found: {root}")
    clips = sorted(p for p in root.iterdir() if p.is_dir())
    if not clips:
        raise AssetError(f"no clip directories under {root}")
    return clips


def synthetic_clip(rng: np.random.Generator, num_frames: int = 16, height: int = 224, width: int = 224) -> np.ndarray:
    """A drifting color-gradient clip, used as stand-in background footage."""
    base = rng.uniform(0, 255, size=3)
    slope = rng.uniform(-0.6, 0.6, size=(2, 3))
    drift = rng.uniform(-2, 2, size=2)
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    out = []
    for t in range(num_frames):
        img = base + (xx + drift[0] * t)[..., None] * slope[0] + (yy + drift[1] * t)[..., None] * slope[1]
        out.append(np.clip(np.abs(np.mod(img, 510) - 255), 0, 255))
    return np.stack(out).astype(np.uint8)
