"""Hand-crafted motion features of a composited video.

The changed-pixel mask (frame vs. background) is reduced per frame to its
centroid, area and principal-axis orientation. The feature vector is::

    [cx_1..cx_N, cy_1..cy_N,        centroid / frame size, in [0, 1]
     dx_1..dx_{N-1}, dy_1..dy_{N-1}, centroid steps, in frame units
     area_1..area_N,                 mask area / frame area
     orient_1..orient_N]             principal axis angle / 90 deg

so ``d_v = 6N - 2``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..compositor import FrameSeq

MASK_THRESHOLD = 24


@dataclass(frozen=True)
class VideoFeature:
    vector: np.ndarray
    centroids: np.ndarray  # (N, 2) pixel coordinates, x then y
    degenerate: bool = False


def feature_dim(num_frames: int) -> int:
    return 6 * num_frames - 2


def changed_mask(frames: np.ndarray, background: np.ndarray, threshold: int = MASK_THRESHOLD) -> np.ndarray:
    diff = np.abs(frames.astype(np.int16) - background.astype(np.int16)).max(axis=-1)
    return diff > threshold


def extract_video_feature(frames: FrameSeq | np.ndarray, background: FrameSeq | np.ndarray,
                          threshold: int = MASK_THRESHOLD) -> VideoFeature:
    f = frames.frames if isinstance(frames, FrameSeq) else frames
    b = background.frames if isinstance(background, FrameSeq) else background
    if f.shape != b.shape:
        raise ValueError(f"frames {f.shape} and background {b.shape} differ in shape")
    n, h, w = f.shape[:3]
    mask = changed_mask(f, b, threshold)
    ys, xs = np.mgrid[0:h, 0:w]
    xs = xs + 0.5
    ys = ys + 0.5

    centroids = np.zeros((n, 2))
    area = np.zeros(n)
    orient = np.zeros(n)
    last = None
    for i in range(n):
        m = mask[i]
        count = m.sum()
        if count == 0:
            if last is not None:
                centroids[i] = last
            continue
        cx, cy = xs[m].mean(), ys[m].mean()
        dx, dy = xs[m] - cx, ys[m] - cy
        # rows grow downwards: negate the cross moment so positive angles turn counter-clockwise
        orient[i] = 0.5 * np.degrees(np.arctan2(-2 * (dx * dy).mean(), (dx * dx).mean() - (dy * dy).mean()))
        centroids[i] = last = (cx, cy)
        area[i] = count / (h * w)

    if last is None:
        return VideoFeature(np.zeros(feature_dim(n)), centroids, degenerate=True)
    norm = centroids / np.array([w, h])
    steps = np.diff(norm, axis=0)
    vec = np.concatenate([norm[:, 0], norm[:, 1], steps[:, 0], steps[:, 1], area, orient / 90.0])
    return VideoFeature(vec, centroids)
