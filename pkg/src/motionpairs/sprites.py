"""Sprite assets: loading from disk and a procedural generator for tests."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image, ImageDraw

from .errors import AssetError

# Nouns used by the procedural sprite set; every name is a single lowercase word.
DEFAULT_OBJECT_NAMES = (
    "car", "piano", "apple", "zebra", "dog", "kite", "ball", "boat", "airplane", "bird",
    "fish", "cup", "book", "chair", "clock", "lamp", "hat", "shoe", "key", "leaf",
)

IMAGE_SUFFIXES = {".png", ".webp", ".tif", ".tiff"}


@dataclass(frozen=True, eq=False)
class Sprite:
    name: str
    rgba: np.ndarray  # (h, w, 4) uint8, straight (non-premultiplied) alpha

    def __post_init__(self):
        if not self.name:
            raise AssetError("sprite name must be non-empty")
        if self.rgba.ndim != 3 or self.rgba.shape[2] != 4 or self.rgba.dtype != np.uint8:
            raise AssetError(f"sprite {self.name!r} must be an (h, w, 4) uint8 array")

    @property
    def height(self) -> int:
        return self.rgba.shape[0]

    @property
    def width(self) -> int:
        return self.rgba.shape[1]

    @property
    def alpha(self) -> np.ndarray:
        return self.rgba[..., 3]


def sprite_digest(sprites: Sequence[Sprite]) -> str:
    h = hashlib.sha256()
    for s in sprites:
        h.update(s.name.encode("utf-8"))
        h.update(np.asarray(s.rgba.shape, dtype=np.int64).tobytes())
        h.update(np.ascontiguousarray(s.rgba).tobytes())
    return h.hexdigest()


def load_sprites(sprite_dir: str | Path) -> list[Sprite]:
    """Load ``<sprite_dir>/<object_name>/<id>.png`` RGBA images.

    Underscores in directory names become spaces in the object name. Order is
    sorted by (name, file) so the set is reproducible.
    """
    root = Path(sprite_dir)
    if not root.is_dir():
        raise AssetError(f"sprite directory not found: {root}")
    sprites = []
    for obj_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        name = obj_dir.name.replace("_", " ")
        for f in sorted(obj_dir.iterdir()):
            if f.suffix.lower() not in IMAGE_SUFFIXES:
                continue
            with Image.open(f) as im:
                rgba = np.asarray(im.convert("RGBA"), dtype=np.uint8).copy()
            if not rgba[..., 3].any():
                raise AssetError(f"sprite {f} is fully transparent")
            sprites.append(Sprite(name, rgba))
    if not sprites:
        raise AssetError(f"no sprites found under {root}")
    return sprites


def save_sprites(sprites: Sequence[Sprite], sprite_dir: str | Path) -> None:
    root = Path(sprite_dir)
    counts: dict[str, int] = {}
    for s in sprites:
        d = root / s.name.replace(" ", "_")
        d.mkdir(parents=True, exist_ok=True)
        i = counts.get(s.name, 0)
        counts[s.name] = i + 1
        Image.fromarray(s.rgba, "RGBA").save(d / f"{i:03d}.png")


def _shape_polygon(kind: str, w: float, h: float) -> list[tuple[float, float]] | None:
    cx, cy = w / 2, h / 2
    if kind == "rect":
        return [(0, 0), (w, 0), (w, h), (0, h)]
    if kind == "diamond":
        return [(cx, 0), (w, cy), (cx, h), (0, cy)]
    if kind == "parallelogram":
        k = w * 0.25
        return [(k, 0), (w, 0), (w - k, h), (0, h)]
    if kind in ("hexagon", "octagon"):
        n = 6 if kind == "hexagon" else 8
        a = np.arange(n) * 2 * np.pi / n + np.pi / n
        return list(zip(cx + cx * np.cos(a), cy + cy * np.sin(a)))
    if kind == "star":
        a = np.arange(8) * np.pi / 4
        r = np.where(np.arange(8) % 2 == 0, 1.0, 0.45)
        return list(zip(cx + cx * r * np.cos(a), cy + cy * r * np.sin(a)))
    if kind == "cross":
        t = 0.3
        return [
            (w * t, 0), (w * (1 - t), 0), (w * (1 - t), h * t), (w, h * t), (w, h * (1 - t)),
            (w * (1 - t), h * (1 - t)), (w * (1 - t), h), (w * t, h), (w * t, h * (1 - t)),
            (0, h * (1 - t)), (0, h * t), (w * t, h * t),
        ]
    return None  # ellipse


SHAPES = ("rect", "diamond", "parallelogram", "hexagon", "octagon", "star", "cross", "ellipse")


def procedural_sprite(name: str, rng: np.random.Generator, size: int = 128) -> Sprite:
    """A bright, point-symmetric polygon sprite.

    Point symmetry puts the alpha centroid at the raster center, so the
    changed-pixel centroid of a composite follows the pose center.
    """
    kind = SHAPES[int(rng.integers(len(SHAPES)))]
    aspect = float(rng.uniform(0.55, 1.0))
    w, h = (size, max(8, round(size * aspect))) if rng.random() < 0.5 else (max(8, round(size * aspect)), size)
    ss = 4  # supersampling factor for antialiased edges
    outer = tuple(int(v) for v in rng.integers(120, 256, size=3))
    inner = tuple(int(v) for v in rng.integers(120, 256, size=3))
    img = Image.new("RGBA", (w * ss, h * ss), (0, 0, 0, 0))
    draw = ImageDraw.Draw(img)
    poly = _shape_polygon(kind, w * ss, h * ss)
    if poly is None:
        draw.ellipse([0, 0, w * ss - 1, h * ss - 1], fill=outer + (255,))
    else:
        draw.polygon(poly, fill=outer + (255,))
    # centered inner band keeps the sprite point-symmetric but makes rotation visible
    bw, bh = w * ss * 0.5, h * ss * 0.12
    draw.rectangle([w * ss / 2 - bw / 2, h * ss / 2 - bh / 2, w * ss / 2 + bw / 2, h * ss / 2 + bh / 2], fill=inner + (255,))
    img = img.resize((w, h), Image.BOX)
    rgba = np.asarray(img, dtype=np.uint8).copy()
    rgba[rgba[..., 3] == 0, :3] = 0
    return Sprite(name, rgba)


def procedural_sprites(names: Sequence[str] = DEFAULT_OBJECT_NAMES, seed: int = 0, size: int = 128) -> list[Sprite]:
    rng = np.random.default_rng(seed)
    return [procedural_sprite(n, rng, size) for n in names]
