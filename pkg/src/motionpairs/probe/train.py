"""Training, gradient checking and evaluation of the alignment probe."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from ..pipeline import Manifest
from .features import extract_video_feature
from .model import (
    OBJECTIVES, Batch, ModelDims, derangement, encode_text, encode_video, forward_backward,
    init_params, match_logits, mlm_inputs, mlm_logits, total_loss,
)
from .retrieval import recall_at_k
from .text import Vocab, direction_positions, mask_positions, sample_mask, tokenize

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ProbeConfig:
    epochs: int = 60
    batch_size: int = 50
    lr: float = 0.2
    clip_norm: float = 5.0
    tau_init: float = 0.07
    tau_min: float = 0.01
    tau_max: float = 1.0
    mask_rate: float = 0.25
    weight_contrast: float = 1.0
    weight_match: float = 1.0
    weight_mlm: float = 1.0
    video_hidden: int = 64
    embed: int = 32
    token_embed: int = 32
    text_hidden: int = 64
    match_hidden: int = 32
    mlm_hidden: int = 64
    video_in_mlm: bool = True  # False gives the video-blind masked-token ablation
    shuffle_labels: bool = False  # decouple captions from videos in the training split
    score: str = "contrast"  # retrieval score: "contrast" (cosine) or "match" (matching head)
    seed: int = 0

    @property
    def weights(self) -> dict[str, float]:
        return {"contrast": self.weight_contrast, "match": self.weight_match, "mlm": self.weight_mlm}


@dataclass
class ProbeData:
    features: np.ndarray  # (n, d_v) raw, unstandardized
    captions: list[str]
    degenerate: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.degenerate is None:
            self.degenerate = np.zeros(len(self.captions), dtype=bool)

    def split(self, n_train: int) -> tuple["ProbeData", "ProbeData"]:
        a = ProbeData(self.features[:n_train], self.captions[:n_train], self.degenerate[:n_train])
        b = ProbeData(self.features[n_train:], self.captions[n_train:], self.degenerate[n_train:])
        return a, b

    @classmethod
    def from_manifest(cls, manifest: Manifest | str, use_paraphrase: bool = False) -> "ProbeData":
        if not isinstance(manifest, Manifest):
            manifest = Manifest.load(manifest)
        feats, caps, degen = [], [], []
        for rec in manifest.records:
            f = extract_video_feature(manifest.load_frames(rec), manifest.load_background(rec))
            feats.append(f.vector)
            degen.append(f.degenerate)
            caps.append(rec.caption if use_paraphrase else rec.template_caption)
        return cls(np.stack(feats), caps, np.array(degen))


@dataclass
class ProbeModel:
    params: dict[str, np.ndarray]
    dims: ModelDims
    vocab: Vocab
    mean: np.ndarray
    std: np.ndarray
    config: ProbeConfig

    def standardize(self, features: np.ndarray) -> np.ndarray:
        return (features - self.mean) / self.std

    def encode_captions(self, captions: Sequence[str]) -> np.ndarray:
        return self.vocab.encode(captions, self.dims.max_len)[0]

    def video_embeddings(self, features: np.ndarray) -> np.ndarray:
        return encode_video(self.params, self.standardize(features))[1]

    def text_embeddings(self, captions: Sequence[str]) -> np.ndarray:
        return encode_text(self.params, self.encode_captions(captions))[1]

    def similarity(self, features: np.ndarray, captions: Sequence[str]) -> np.ndarray:
        """``(videos, texts)`` score matrix."""
        zv = self.video_embeddings(features)
        zt = self.text_embeddings(captions)
        if self.config.score == "match":
            nv, nt = len(zv), len(zt)
            s, _ = match_logits(self.params, np.repeat(zv, nt, axis=0), np.tile(zt, (nv, 1)))
            return s.reshape(nv, nt)
        return zv @ zt.T

    def make_batch(self, features: np.ndarray, captions: Sequence[str], rng: np.random.Generator) -> Batch:
        ids = self.encode_captions(captions)
        n = len(captions)
        return Batch(
            video=self.standardize(features),
            ids=ids,
            mlm=sample_mask(ids, self.vocab, rng, self.config.mask_rate),
            negatives=derangement(n, rng) if n > 1 else np.zeros(n, dtype=np.int64),
        )

    def direction_accuracy(self, features: np.ndarray, captions: Sequence[str]) -> float:
        """Accuracy of recovering each masked movement-direction word, one mask at a time."""
        ids = self.encode_captions(captions)
        items = direction_positions(ids, self.vocab)
        if not items:
            return float("nan")
        mb = mask_positions(ids, self.vocab, items)
        hv = encode_video(self.params, self.standardize(features))[0]
        rows = np.array([r for r, _ in items])
        x, _ = mlm_inputs(self.params, hv, mb, rows, self.config.video_in_mlm)
        logits, _ = mlm_logits(self.params, x)
        return float(np.mean(logits.argmax(axis=1) == mb.targets))


def new_model(train: ProbeData, cfg: ProbeConfig, rng: np.random.Generator) -> ProbeModel:
    vocab = Vocab.build(train.captions)
    max_len = max(len(tokenize(c)) for c in train.captions) + 4
    dims = ModelDims(
        video_in=train.features.shape[1], vocab=len(vocab), max_len=max_len,
        video_hidden=cfg.video_hidden, embed=cfg.embed, token_embed=cfg.token_embed,
        text_hidden=cfg.text_hidden, match_hidden=cfg.match_hidden, mlm_hidden=cfg.mlm_hidden,
    )
    mean = train.features.mean(axis=0)
    std = train.features.std(axis=0)
    std[std < 1e-8] = 1.0
    return ProbeModel(init_params(dims, rng, cfg.tau_init), dims, vocab, mean, std, cfg)


def sgd_step(params: dict, grads: dict, cfg: ProbeConfig) -> float:
    """Clipped SGD update in place; returns the pre-clip gradient norm.

    The temperature steps in log space (``d/d log tau = tau * d/d tau``) so a
    single update can never push it through zero.
    """
    norm = float(np.sqrt(sum(np.sum(g * g) for g in grads.values())))
    scale = min(1.0, cfg.clip_norm / norm) if norm > 0 else 1.0
    for k, g in grads.items():
        if k == "tau":
            continue
        params[k] -= cfg.lr * scale * g
    tau = params["tau"][0]
    log_tau = np.log(tau) - cfg.lr * scale * tau * grads["tau"][0]
    params["tau"][0] = np.exp(np.clip(log_tau, np.log(cfg.tau_min), np.log(cfg.tau_max)))
    return norm


def train_probe(data: ProbeData | Manifest | str, cfg: ProbeConfig = ProbeConfig(),
                n_train: int | None = None) -> tuple[ProbeModel, dict]:
    """Train on the first ``n_train`` pairs and evaluate retrieval on the rest."""
    if not isinstance(data, ProbeData):
        data = ProbeData.from_manifest(data)
    n = len(data.captions)
    if n < 2:
        raise ValueError("need at least 2 pairs to train the probe")
    n_train = n_train if n_train is not None else max(1, int(round(n * 5 / 7)))
    train, heldout = data.split(n_train)
    rng = np.random.default_rng(cfg.seed)
    if cfg.shuffle_labels:
        perm = rng.permutation(len(train.captions))
        train = ProbeData(train.features, [train.captions[i] for i in perm], train.degenerate)

    model = new_model(train, cfg, rng)
    params = model.params
    if cfg.batch_size < 2 or len(train.captions) < 2:
        log.warning("batch size below 2: contrastive objective skipped")

    curve = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(train.captions))
        sums = {k: 0.0 for k in (*OBJECTIVES, "total")}
        batches = 0
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            batch = model.make_batch(train.features[idx], [train.captions[i] for i in idx], rng)
            losses, grads = forward_backward(params, batch, cfg.weights, cfg.video_in_mlm)
            total = total_loss(losses, cfg.weights)
            if not np.isfinite(total) or not all(np.all(np.isfinite(g)) for g in grads.values()):
                raise FloatingPointError(
                    f"non-finite loss at epoch {epoch}, batch {batches}: {losses}, tau={params['tau'][0]}"
                )
            sgd_step(params, grads, cfg)
            for k, v in losses.items():
                sums[k] += v
            sums["total"] += total
            batches += 1
        curve.append({"epoch": epoch + 1, **{k: float(v / batches) for k, v in sums.items()}})

    metrics = {
        "config": asdict(cfg),
        "train_size": len(train.captions),
        "heldout_size": len(heldout.captions),
        "loss_curve": curve,
        "tau": float(params["tau"][0]),
    }
    if len(heldout.captions) >= 2:
        sim = model.similarity(heldout.features, heldout.captions)
        metrics["retrieval"] = recall_at_k(sim, heldout.captions)
        metrics["chance_R@1"] = 1.0 / len(heldout.captions)
        metrics["direction_accuracy"] = model.direction_accuracy(heldout.features, heldout.captions)
    return model, metrics


def evaluate_retrieval(model: ProbeModel, split: ProbeData) -> dict[str, float]:
    if len(split.captions) < 10:
        raise ValueError("retrieval evaluation needs at least 10 candidates")
    return recall_at_k(model.similarity(split.features, split.captions), split.captions)


def gradient_errors(params: dict, batch: Batch, objectives: Sequence[str] = OBJECTIVES,
                    step: float = 1e-4, per_tensor: int = 4, seed: int = 0,
                    use_video_in_mlm: bool = True,
                    tamper: Callable[[dict], dict] | None = None) -> dict[str, float]:
    """Max relative error of analytic vs central-difference gradients, per objective.

    Checks ``per_tensor`` random entries of every parameter tensor that the
    objective touches. ``tamper`` may rewrite the analytic gradients (to test
    that the check catches broken gradients).
    """
    rng = np.random.default_rng(seed)
    out = {}
    for obj in objectives:
        weights = {obj: 1.0}
        _, grads = forward_backward(params, batch, weights, use_video_in_mlm)
        if tamper is not None:
            grads = tamper(grads)
        worst = 0.0
        for name, value in params.items():
            flat = value.reshape(-1)
            for i in rng.choice(flat.size, size=min(per_tensor, flat.size), replace=False):
                old = flat[i]
                flat[i] = old + step
                up = forward_backward(params, batch, weights, use_video_in_mlm, grads=False)[0].get(obj, 0.0)
                flat[i] = old - step
                down = forward_backward(params, batch, weights, use_video_in_mlm, grads=False)[0].get(obj, 0.0)
                flat[i] = old
                numeric = (up - down) / (2 * step)
                analytic = grads[name].reshape(-1)[i]
                denom = abs(analytic) + abs(numeric)
                if denom < 1e-10:  # parameter does not influence this objective
                    continue
                worst = max(worst, abs(analytic - numeric) / denom)
        out[obj] = worst
    return out


def gradient_check(model: ProbeModel | dict, batch: Batch, **kwargs) -> float:
    params = model.params if isinstance(model, ProbeModel) else model
    return max(gradient_errors(params, batch, **kwargs).values())


def with_config(cfg: ProbeConfig, **changes) -> ProbeConfig:
    return replace(cfg, **changes)
