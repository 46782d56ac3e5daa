"""Text-to-video retrieval recall."""

from __future__ import annotations

from typing import Sequence

import numpy as np


def recall_at_k(similarity: np.ndarray, captions: Sequence[str] | None = None,
                ks: Sequence[int] = (1, 5, 10)) -> dict[str, float]:
    """Recall of text-to-video retrieval from a ``(videos, texts)`` score matrix.

    Text ``j`` belongs to video ``j``. With ``captions`` given, any video whose
    caption equals the query's counts as correct (duplicate captions). A query
    ranks as (number of wrong videos scoring strictly higher than its best
    correct video) + 1.
    """
    sim = np.asarray(similarity, dtype=np.float64)
    n_v, n_t = sim.shape
    if n_v != n_t:
        raise ValueError("expected one caption per video")
    if captions is not None:
        caps = np.asarray(captions, dtype=object)
        correct = caps[:, None] == caps[None, :]
    else:
        correct = np.eye(n_v, dtype=bool)
    best = np.where(correct, sim, -np.inf).max(axis=0)
    ranks = (np.where(correct, -np.inf, sim) > best[None, :]).sum(axis=0) + 1
    out = {f"R@{k}": float(np.mean(ranks <= k)) for k in ks}
    out["Avg"] = float(np.mean([out[f"R@{k}"] for k in ks]))
    return out


def chance_recall(num_candidates: int, k: int) -> float:
    return min(1.0, k / num_candidates)
