"""Caption tokenization, vocabulary and token masking for the probe."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Sequence

import numpy as np

PAD, MASK, UNK = 0, 1, 2
SPECIALS = ("<pad>", "<mask>", "<unk>")
NOT_MASKABLE = {"a", "an", "the", ","}
DIRECTIONS = {"upwards", "downwards", "left", "right"}
_BEFORE_DIRECTION = {"moves", "quickly", "slowly", "diagonally"}
MAX_SEGMENTS = 4

_TOKEN_RE = re.compile(r"[a-z0-9]+(?:[-'][a-z0-9]+)*|,")


def tokenize(caption: str) -> list[str]:
    return _TOKEN_RE.findall(caption.lower())


class Vocab:
    def __init__(self, words: Sequence[str]):
        self.itos = list(SPECIALS) + [w for w in words if w not in SPECIALS]
        self.stoi = {w: i for i, w in enumerate(self.itos)}

    @classmethod
    def build(cls, captions: Sequence[str]) -> "Vocab":
        return cls(sorted({t for c in captions for t in tokenize(c)}))

    def __len__(self) -> int:
        return len(self.itos)

    def encode(self, captions: Sequence[str], max_len: int) -> tuple[np.ndarray, np.ndarray]:
        ids = np.full((len(captions), max_len), PAD, dtype=np.int64)
        for i, c in enumerate(captions):
            toks = tokenize(c)[:max_len]
            ids[i, : len(toks)] = [self.stoi.get(t, UNK) for t in toks]
        return ids, ids != PAD


def segment_index(ids_row: np.ndarray, pos: int, comma_id: int | None) -> int:
    if comma_id is None:
        return 0
    return min(int((ids_row[:pos] == comma_id).sum()), MAX_SEGMENTS - 1)


@dataclass(frozen=True)
class MaskedBatch:
    masked_ids: np.ndarray  # (B, L)
    rows: np.ndarray  # (M,)
    positions: np.ndarray  # (M,)
    targets: np.ndarray  # (M,)
    segments: np.ndarray  # (M,)


def _masked(ids, rows, positions, vocab) -> MaskedBatch:
    rows = np.asarray(rows, dtype=np.int64)
    positions = np.asarray(positions, dtype=np.int64)
    masked = ids.copy()
    masked[rows, positions] = MASK
    comma = vocab.stoi.get(",")
    segs = np.array([segment_index(ids[r], p, comma) for r, p in zip(rows, positions)], dtype=np.int64)
    return MaskedBatch(masked, rows, positions, ids[rows, positions].copy(), segs)


def sample_mask(ids: np.ndarray, vocab: Vocab, rng: np.random.Generator, rate: float = 0.25) -> MaskedBatch:
    """Mask ``round(rate * maskable)`` (at least one) uniformly chosen tokens per caption."""
    blocked = {vocab.stoi[w] for w in NOT_MASKABLE if w in vocab.stoi} | {PAD}
    rows, positions = [], []
    for r in range(ids.shape[0]):
        cand = [p for p in range(ids.shape[1]) if ids[r, p] not in blocked]
        if not cand:
            continue
        k = max(1, int(round(rate * len(cand))))
        for p in sorted(rng.choice(cand, size=k, replace=False)):
            rows.append(r)
            positions.append(int(p))
    return _masked(ids, rows, positions, vocab)


def direction_positions(ids: np.ndarray, vocab: Vocab) -> list[tuple[int, int]]:
    """(row, position) of every movement-direction word in a batch of template captions."""
    out = []
    for r in range(ids.shape[0]):
        toks = [vocab.itos[i] for i in ids[r]]
        for p in range(1, len(toks)):
            if toks[p] in DIRECTIONS and toks[p - 1] in _BEFORE_DIRECTION:
                out.append((r, p))
    return out


def mask_positions(ids: np.ndarray, vocab: Vocab, items: Sequence[tuple[int, int]]) -> MaskedBatch:
    """One masked copy of the caption per (row, position) item."""
    rows = np.array([r for r, _ in items], dtype=np.int64)
    expanded = ids[rows]
    return _masked(expanded, np.arange(len(items)), [p for _, p in items], vocab)
