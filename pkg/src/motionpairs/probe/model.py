"""A small dual encoder with contrastive, matching and masked-token objectives.

Pure numpy with hand-written backward passes. Hidden layers use tanh so the
losses are smooth everywhere and finite-difference checks are exact up to
truncation error.

Shapes: ``B`` batch, ``L`` caption length, ``M`` masked tokens, ``V`` vocab.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import log_softmax, logsumexp, softmax

from .text import MAX_SEGMENTS, PAD, MaskedBatch

OBJECTIVES = ("contrast", "match", "mlm")


@dataclass(frozen=True)
class ModelDims:
    video_in: int
    vocab: int
    max_len: int
    video_hidden: int = 64
    embed: int = 32  # shared contrastive space
    token_embed: int = 32
    text_hidden: int = 64
    match_hidden: int = 32
    mlm_hidden: int = 64


def init_params(dims: ModelDims, rng: np.random.Generator, tau: float = 0.07) -> dict[str, np.ndarray]:
    def lin(n_in, n_out):
        return rng.normal(0.0, 1.0 / np.sqrt(n_in), size=(n_in, n_out))

    e, d = dims.token_embed, dims.embed
    mlm_in = dims.video_hidden + 4 * e + MAX_SEGMENTS
    return {
        "W1": lin(dims.video_in, dims.video_hidden), "b1": np.zeros(dims.video_hidden),
        "W2": lin(dims.video_hidden, d), "b2": np.zeros(d),
        "E": rng.normal(0.0, 0.5, size=(dims.vocab, e)),
        "U1": lin(e, dims.text_hidden), "c1": np.zeros(dims.text_hidden),
        "U2": lin(dims.text_hidden, d), "c2": np.zeros(d),
        "M1": lin(3 * d, dims.match_hidden), "d1": np.zeros(dims.match_hidden),
        "M2": lin(dims.match_hidden, 1)[:, 0], "d2": np.zeros(1),
        "P": rng.normal(0.0, 0.5, size=(dims.max_len, e)),
        "Q1": lin(mlm_in, dims.mlm_hidden), "q1": np.zeros(dims.mlm_hidden),
        "Q2": lin(dims.mlm_hidden, dims.vocab), "q2": np.zeros(dims.vocab),
        "tau": np.array([tau]),
    }


@dataclass
class Batch:
    video: np.ndarray  # (B, d_v) standardized features
    ids: np.ndarray  # (B, L) clean caption ids
    mlm: MaskedBatch | None = None
    negatives: np.ndarray | None = None  # (B,) in-batch caption index paired with each video as a negative
    video_rows: np.ndarray | None = field(default=None)  # video row per masked caption; defaults to identity


def derangement(n: int, rng: np.random.Generator) -> np.ndarray:
    """Random permutation with no fixed points (n >= 2)."""
    while True:
        p = rng.permutation(n)
        if not np.any(p == np.arange(n)):
            return p


def _normalize(r):
    n = np.linalg.norm(r, axis=1, keepdims=True)
    return r / n, n


def _normalize_back(dz, z, n):
    return (dz - z * np.sum(z * dz, axis=1, keepdims=True)) / n


def encode_video(p, x):
    hv = np.tanh(x @ p["W1"] + p["b1"])
    rv = hv @ p["W2"] + p["b2"]
    zv, nv = _normalize(rv)
    return hv, zv, nv


def _mean_embed(p, ids):
    m = (ids != PAD)[..., None].astype(np.float64)
    cnt = np.maximum(m.sum(axis=1), 1.0)
    return (p["E"][ids] * m).sum(axis=1) / cnt, m, cnt


def encode_text(p, ids):
    ebar, m, cnt = _mean_embed(p, ids)
    ht = np.tanh(ebar @ p["U1"] + p["c1"])
    rt = ht @ p["U2"] + p["c2"]
    zt, nt = _normalize(rt)
    return (ebar, m, cnt, ht), zt, nt


def match_logits(p, zv, zt):
    x = np.concatenate([zv, zt, zv * zt], axis=1)
    hm = np.tanh(x @ p["M1"] + p["d1"])
    return hm @ p["M2"] + p["d2"][0], (x, hm)


def mlm_inputs(p, hv, mb: MaskedBatch, video_rows, use_video: bool):
    L = mb.masked_ids.shape[1]
    mbar, m, cnt = _mean_embed(p, mb.masked_ids)
    r, pos = mb.rows, mb.positions
    prev_ids = np.where(pos > 0, mb.masked_ids[r, np.maximum(pos - 1, 0)], PAD)
    next_ids = np.where(pos + 1 < L, mb.masked_ids[r, np.minimum(pos + 1, L - 1)], PAD)
    vrows = video_rows[r]
    vc = hv[vrows] if use_video else np.zeros((len(r), hv.shape[1]))
    seg = np.eye(MAX_SEGMENTS)[mb.segments]
    x = np.concatenate([vc, mbar[r], p["E"][prev_ids], p["E"][next_ids], p["P"][pos], seg], axis=1)
    return x, (mbar, m, cnt, prev_ids, next_ids, vrows)


def mlm_logits(p, x):
    hq = np.tanh(x @ p["Q1"] + p["q1"])
    return hq @ p["Q2"] + p["q2"], hq


def forward_backward(p: dict, batch: Batch, weights: dict[str, float] | None = None,
                     use_video_in_mlm: bool = True, grads: bool = True):
    """Per-objective losses and the gradient of their weighted sum.

    Objectives with zero or missing weight are skipped entirely. Returns
    ``(losses, grads)``; ``grads`` is ``None`` when ``grads=False``.
    """
    weights = {"contrast": 1.0, "match": 1.0, "mlm": 1.0} if weights is None else weights
    g = {k: np.zeros_like(v) for k, v in p.items()}
    B = batch.video.shape[0]
    hv, zv, nv = encode_video(p, batch.video)
    (ebar, m, cnt, ht), zt, nt = encode_text(p, batch.ids)
    dzv = np.zeros_like(zv)
    dzt = np.zeros_like(zt)
    dhv = np.zeros_like(hv)
    losses = {}

    w = weights.get("contrast", 0.0)
    if w and B > 1:
        tau = p["tau"][0]
        A = zv @ zt.T
        S = A / tau
        diag = np.diag(S)
        losses["contrast"] = 0.5 * (np.mean(logsumexp(S, axis=1) - diag) + np.mean(logsumexp(S, axis=0) - diag))
        eye = np.eye(B)
        dS = w * 0.5 / B * ((softmax(S, axis=1) - eye) + (softmax(S, axis=0) - eye))
        dzv += dS @ zt / tau
        dzt += dS.T @ zv / tau
        g["tau"][0] += np.sum(dS * A) * (-1.0 / tau ** 2)

    w = weights.get("match", 0.0)
    if w:
        neg = batch.negatives
        va = np.concatenate([zv, zv])
        tb = np.concatenate([zt, zt[neg]])
        s, (x, hm) = match_logits(p, va, tb)
        y = np.concatenate([np.ones(B), np.zeros(len(neg))])
        losses["match"] = np.mean(np.logaddexp(0.0, s) - y * s)
        ds = w * (1.0 / (1.0 + np.exp(-s)) - y) / len(s)
        g["M2"] += hm.T @ ds
        g["d2"][0] += ds.sum()
        dam = np.outer(ds, p["M2"]) * (1 - hm ** 2)
        g["M1"] += x.T @ dam
        g["d1"] += dam.sum(axis=0)
        dx = dam @ p["M1"].T
        d = zv.shape[1]
        dva = dx[:, :d] + dx[:, 2 * d:] * tb
        dtb = dx[:, d:2 * d] + dx[:, 2 * d:] * va
        dzv += dva[:B] + dva[B:]
        dzt += dtb[:B]
        np.add.at(dzt, neg, dtb[B:])

    w = weights.get("mlm", 0.0)
    if w and batch.mlm is not None and len(batch.mlm.rows):
        mb = batch.mlm
        video_rows = batch.video_rows if batch.video_rows is not None else np.arange(B)
        x, (mbar, mm, mcnt, prev_ids, next_ids, vrows) = mlm_inputs(p, hv, mb, video_rows, use_video_in_mlm)
        logits, hq = mlm_logits(p, x)
        logp = log_softmax(logits, axis=1)
        k = len(mb.targets)
        losses["mlm"] = -np.mean(logp[np.arange(k), mb.targets])
        dlog = np.exp(logp)
        dlog[np.arange(k), mb.targets] -= 1.0
        dlog *= w / k
        g["Q2"] += hq.T @ dlog
        g["q2"] += dlog.sum(axis=0)
        daq = (dlog @ p["Q2"].T) * (1 - hq ** 2)
        g["Q1"] += x.T @ daq
        g["q1"] += daq.sum(axis=0)
        dx = daq @ p["Q1"].T
        hvd, e = hv.shape[1], p["E"].shape[1]
        parts = np.split(dx, np.cumsum([hvd, e, e, e, e]), axis=1)
        dvc, dmbar_items, dprev, dnext, dpos = parts[:5]
        if use_video_in_mlm:
            np.add.at(dhv, vrows, dvc)
        dmbar = np.zeros_like(mbar)
        np.add.at(dmbar, mb.rows, dmbar_items)
        np.add.at(g["E"], mb.masked_ids, (dmbar / mcnt)[:, None, :] * mm)
        np.add.at(g["E"], prev_ids, dprev)
        np.add.at(g["E"], next_ids, dnext)
        np.add.at(g["P"], mb.positions, dpos)

    if not grads:
        return losses, None

    drt = _normalize_back(dzt, zt, nt)
    g["U2"] += ht.T @ drt
    g["c2"] += drt.sum(axis=0)
    dat = (drt @ p["U2"].T) * (1 - ht ** 2)
    g["U1"] += ebar.T @ dat
    g["c1"] += dat.sum(axis=0)
    debar = dat @ p["U1"].T
    np.add.at(g["E"], batch.ids, (debar / cnt)[:, None, :] * m)

    drv = _normalize_back(dzv, zv, nv)
    g["W2"] += hv.T @ drv
    g["b2"] += drv.sum(axis=0)
    dav = (drv @ p["W2"].T + dhv) * (1 - hv ** 2)
    g["W1"] += batch.video.T @ dav
    g["b1"] += dav.sum(axis=0)
    return losses, g


def total_loss(losses: dict, weights: dict | None = None) -> float:
    weights = {"contrast": 1.0, "match": 1.0, "mlm": 1.0} if weights is None else weights
    return float(sum(weights.get(k, 0.0) * v for k, v in losses.items()))


def contrastive_lower_bound(batch_size: int, tau: float) -> float:
    """Contrastive loss when the similarity matrix is the identity scaled by ``1/tau``."""
    return float(np.log1p((batch_size - 1) * np.exp(-1.0 / tau)))
