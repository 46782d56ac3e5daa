import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import binom

from motionpairs.captions import ThresholdConfig
from motionpairs.kinematics import GenConfig
from motionpairs.pipeline import generate_dataset
from motionpairs.probe.features import extract_video_feature, feature_dim
from motionpairs.probe.model import Batch, contrastive_lower_bound, forward_backward
from motionpairs.probe.retrieval import chance_recall, recall_at_k
from motionpairs.probe.text import Vocab, direction_positions, sample_mask, tokenize
from motionpairs.probe.train import (
    ProbeConfig, ProbeData, gradient_check, gradient_errors, sgd_step, train_probe, with_config,
)

FAST = ProbeConfig(epochs=15, batch_size=20)


def square_video(centers, size=(64, 80), half=5):
    h, w = size
    frames = np.zeros((len(centers), h, w, 3), dtype=np.uint8)
    for i, (cx, cy) in enumerate(centers):
        frames[i, cy - half:cy + half, cx - half:cx + half] = 255
    return frames


@pytest.fixture(scope="module")
def data(tmp_path_factory):
    out = tmp_path_factory.mktemp("probe")
    generate_dataset(GenConfig(num_frames=8), ThresholdConfig(), out, count=70, seed=11)
    return ProbeData.from_manifest(out / "manifest.jsonl")


@pytest.fixture(scope="module")
def trained(data):
    return train_probe(data, FAST, n_train=50)


# features

def test_feature_centroids_of_opaque_square():
    centers = [(20, 30), (24, 30), (28, 26)]
    f = extract_video_feature(square_video(centers), np.zeros((3, 64, 80, 3), np.uint8))
    np.testing.assert_allclose(f.centroids, centers)  # square spans [c-5, c+5) so its pixel-center mean is c
    assert f.vector.shape == (feature_dim(3),) and not f.degenerate
    np.testing.assert_allclose(f.vector[6:8], [4 / 80, 4 / 80])
    np.testing.assert_allclose(f.vector[8:10], [0, -4 / 64])
    np.testing.assert_allclose(f.vector[10:13], 100 / (64 * 80))


def test_zero_motion_gives_zero_steps():
    f = extract_video_feature(square_video([(40, 32)] * 4), np.zeros((4, 64, 80, 3), np.uint8))
    assert np.all(f.vector[8:14] == 0)


def test_invisible_object_is_degenerate():
    bg = np.full((3, 64, 80, 3), 90, np.uint8)
    f = extract_video_feature(bg.copy(), bg)
    assert f.degenerate and np.all(f.vector == 0)


def test_feature_shape_mismatch():
    with pytest.raises(ValueError):
        extract_video_feature(np.zeros((2, 8, 8, 3), np.uint8), np.zeros((3, 8, 8, 3), np.uint8))


def test_feature_dim_of_manifest(data):
    assert data.features.shape == (70, feature_dim(8))
    assert not data.degenerate.any()


# gradients and losses

def _batch(data, model, n=12, seed=0):
    return model.make_batch(data.features[:n], data.captions[:n], np.random.default_rng(seed))


def test_gradient_check_all_objectives(data, trained):
    model, _ = trained
    errs = gradient_errors(model.params, _batch(data, model), per_tensor=3)
    assert set(errs) == {"contrast", "match", "mlm"}
    assert max(errs.values()) < 1e-4


def test_gradient_check_video_blind(data, trained):
    model, _ = trained
    assert gradient_check(model, _batch(data, model), objectives=("mlm",), use_video_in_mlm=False) < 1e-4


def test_gradient_check_catches_broken_gradients(data, trained):
    model, _ = trained

    def zero_w1(grads):
        grads = dict(grads)
        grads["W1"] = np.zeros_like(grads["W1"])
        return grads

    assert gradient_check(model, _batch(data, model), objectives=("contrast",), tamper=zero_w1) > 0.99


def test_large_temperature_flattens_contrastive_gradient(data, trained):
    model, _ = trained
    batch = _batch(data, model)
    norms = []
    for tau in (0.05, 1.0, 100.0):
        p = {k: v.copy() for k, v in model.params.items()}
        p["tau"][0] = tau
        g = forward_backward(p, batch, {"contrast": 1.0})[1]
        norms.append(np.linalg.norm(g["W1"]))
    assert norms[2] < norms[1] < norms[0]


def test_contrastive_loss_above_bound(data, trained):
    model, _ = trained
    batch = _batch(data, model, n=20)
    loss = forward_backward(model.params, batch, {"contrast": 1.0}, grads=False)[0]["contrast"]
    tau = model.params["tau"][0]
    assert loss >= contrastive_lower_bound(20, tau) - 1e-9


def test_contrastive_bound_formula():
    assert contrastive_lower_bound(1, 0.1) == 0.0
    assert math.isclose(contrastive_lower_bound(5, 1.0), math.log(1 + 4 * math.exp(-1)))


def test_sgd_keeps_temperature_in_range():
    cfg = ProbeConfig(lr=10.0, clip_norm=1e12)
    p = {"W": np.ones(2), "tau": np.array([0.07])}
    sgd_step(p, {"W": np.ones(2), "tau": np.array([1e6])}, cfg)
    assert math.isclose(p["tau"][0], cfg.tau_min)
    sgd_step(p, {"W": np.ones(2), "tau": np.array([-1e4])}, cfg)
    assert math.isclose(p["tau"][0], cfg.tau_max)


def test_sgd_clips_global_norm():
    cfg = ProbeConfig(lr=1.0, clip_norm=1.0)
    p = {"W": np.zeros(2), "tau": np.array([0.5])}
    norm = sgd_step(p, {"W": np.array([30.0, 40.0]), "tau": np.zeros(1)}, cfg)
    assert norm == 50.0
    np.testing.assert_allclose(p["W"], [-0.6, -0.8])


# retrieval

def test_identity_similarity_is_perfect():
    r = recall_at_k(np.eye(30))
    assert r["R@1"] == r["R@5"] == r["R@10"] == r["Avg"] == 1.0


def test_duplicate_captions_count_as_hits():
    sim = np.array([[0.0, 1.0], [1.0, 0.0]])
    assert recall_at_k(sim)["R@1"] == 0.0
    assert recall_at_k(sim, ["same", "same"])["R@1"] == 1.0


def test_ties_do_not_count_against_query():
    assert recall_at_k(np.zeros((10, 10)))["R@1"] == 1.0


def test_random_scores_near_chance():
    n = 100
    hits = []
    for seed in range(20):
        sim = np.random.default_rng(seed).normal(size=(n, n))
        hits.append(recall_at_k(sim)["R@10"] * n)
    lo, hi = binom.interval(0.999, n * 20, chance_recall(n, 10))
    assert lo <= sum(hits) <= hi


def test_recall_requires_square():
    with pytest.raises(ValueError):
        recall_at_k(np.zeros((3, 4)))


# masking

def test_direction_positions_skip_position_words():
    caps = ["A car in the left moves right", "A dog in the top-right moves diagonally upwards while rotating left"]
    vocab = Vocab.build(caps)
    ids, _ = vocab.encode(caps, 16)
    found = [(r, vocab.itos[ids[r, p]]) for r, p in direction_positions(ids, vocab)]
    assert found == [(0, "right"), (1, "upwards")]


@given(st.floats(0.05, 0.9), st.integers(0, 2**31))
@settings(max_examples=30)
def test_mask_rate_per_caption(rate, seed):
    caps = ["A small car in the top moves left a lot", "A dog in the bottom-left moves quickly downwards"]
    vocab = Vocab.build(caps)
    ids, _ = vocab.encode(caps, 16)
    mb = sample_mask(ids, vocab, np.random.default_rng(seed), rate)
    for r, cap in enumerate(caps):
        maskable = sum(t not in {"a", "the"} for t in tokenize(cap))
        assert (mb.rows == r).sum() == max(1, round(rate * maskable))
    assert np.all(mb.masked_ids[mb.rows, mb.positions] == 1)
    assert np.all(ids[mb.rows, mb.positions] == mb.targets)


# training

def test_training_metrics(trained):
    _, m = trained
    assert m["train_size"] == 50 and m["heldout_size"] == 20
    assert len(m["loss_curve"]) == FAST.epochs
    assert all(row[k] >= 0 for row in m["loss_curve"] for k in ("contrast", "match", "mlm", "total"))
    assert FAST.tau_min <= m["tau"] <= FAST.tau_max
    assert m["chance_R@1"] == 1 / 20
    assert 0 <= m["direction_accuracy"] <= 1


def test_loss_curve_decreases(trained):
    curve = [row["total"] for row in trained[1]["loss_curve"]]
    assert curve[-1] < 0.8 * curve[0]
    for i in range(1, len(curve)):  # no epoch rises more than 5% above the best so far
        assert curve[i] <= 1.05 * min(curve[:i])


def test_training_is_deterministic(data):
    cfg = with_config(FAST, epochs=3)
    a = train_probe(data, cfg, n_train=50)[1]
    b = train_probe(data, cfg, n_train=50)[1]
    assert a == b


def test_untrained_probe_is_near_chance(data):
    _, m = train_probe(data, with_config(FAST, epochs=0), n_train=50)
    assert m["loss_curve"] == []
    assert m["retrieval"]["R@1"] <= binom.ppf(0.999, 20, 1 / 20) / 20


def test_batch_of_one_warns(data, caplog):
    small = ProbeData(data.features[:6], data.captions[:6])
    with caplog.at_level(logging.WARNING):
        _, m = train_probe(small, with_config(FAST, batch_size=1, epochs=1), n_train=4)
    assert "batch size below 2" in caplog.text
    assert m["loss_curve"][0]["contrast"] == 0.0


def test_too_few_pairs(data):
    with pytest.raises(ValueError):
        train_probe(ProbeData(data.features[:1], data.captions[:1]), FAST)


def test_match_score_retrieval(data):
    model, m = train_probe(data, with_config(FAST, epochs=2, score="match"), n_train=50)
    assert set(m["retrieval"]) == {"R@1", "R@5", "R@10", "Avg"}
    assert model.similarity(data.features[:3], data.captions[:4]).shape == (3, 4)
