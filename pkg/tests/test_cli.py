import json
import shutil

import pytest
from PIL import Image

from motionpairs.cli import main
from motionpairs.pipeline import Manifest

SMALL = ["--num-frames", "6", "--num-keyframes", "3"]


@pytest.fixture(scope="module")
def run(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "ds"
    assert main(["generate", "--out", str(out), "--count", "12", "--seed", "4", "--paraphrase", "offline", *SMALL]) == 0
    return out


def test_generate_writes_manifest(run):
    m = Manifest.load(run)
    assert len(m.records) == 12
    assert m.header["seed"] == 4
    assert m.records[0].paraphrase_model == "offline-synonym-v1"


def test_flags_override_yaml(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("generation:\n  num_frames: 5\n  num_keyframes: 2\npipeline:\n  count: 2\n  seed: 1\n")
    assert main(["generate", "--config", str(cfg), "--out", str(tmp_path / "o"), "--num-frames", "4"]) == 0
    m = Manifest.load(tmp_path / "o")
    assert len(m.records) == 2 and m.header["gen_config"]["num_frames"] == 4


def test_threshold_flag_is_recorded(tmp_path):
    assert main(["generate", "--out", str(tmp_path), "--count", "1", "--speed-slow-max", "2.5", *SMALL]) == 0
    assert Manifest.load(tmp_path).header["thresholds"]["speed_slow_max"] == 2.5


def test_verify_exit_codes(run, tmp_path, capsys):
    assert main(["verify", str(run)]) == 0
    assert "12/12 records pass" in capsys.readouterr().out
    broken = tmp_path / "broken"
    shutil.copytree(run, broken)
    m = Manifest.load(broken)
    shutil.rmtree(broken / m.records[0].frames_path)
    assert main(["verify", str(broken)]) == 1
    assert "missing-frames" in capsys.readouterr().out
    assert main(["verify", str(tmp_path / "nothing.jsonl")]) == 2


def test_stats_json(run, tmp_path, capsys):
    assert main(["stats", str(run), "--format", "json"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["pos_profile"]["num_captions"] == 12
    assert 0 <= report["noun_uniqueness"] <= 1
    captions = tmp_path / "caps.txt"
    captions.write_text("A car moves left\nA dog in the top moves upwards\n\n")
    assert main(["stats", str(captions), "--out", str(tmp_path / "r.txt")]) == 0
    assert "captions: 2" in (tmp_path / "r.txt").read_text()


def test_stats_errors(tmp_path):
    assert main(["stats", str(tmp_path / "missing.txt")]) == 2
    (tmp_path / "empty.txt").write_text("\n")
    assert main(["stats", str(tmp_path / "empty.txt")]) == 1


def test_probe_writes_outputs(run, tmp_path, capsys):
    out = tmp_path / "probe"
    code = main(["probe", str(run), "--out", str(out), "--epochs", "2", "--batch-size", "4", "--n-train", "8"])
    assert code == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["chance_R@1"] == 0.25
    metrics = json.loads((out / "metrics.json").read_text())
    assert metrics["train_size"] == 8 and metrics["config"]["epochs"] == 2
    rows = (out / "loss_curve.csv").read_text().splitlines()
    assert rows[0] == "epoch,contrast,match,mlm,total" and len(rows) == 3


def test_probe_ablation_flags(run, tmp_path):
    out = tmp_path / "p"
    assert main(["probe", str(run), "--out", str(out), "--epochs", "1", "--video-blind", "--shuffle-labels"]) == 0
    cfg = json.loads((out / "metrics.json").read_text())["config"]
    assert cfg["video_in_mlm"] is False and cfg["shuffle_labels"] is True


def test_preview(run, tmp_path, capsys):
    gif = tmp_path / "v.gif"
    assert main(["preview", str(run), "3", "--out", str(gif)]) == 0
    with Image.open(gif) as im:
        assert im.n_frames == 6
    assert main(["preview", str(run), "vid_999999"]) == 1


def test_config_errors_exit_1(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("pipeline:\n  colour: red\n")
    assert main(["generate", "--config", str(bad), "--out", str(tmp_path / "o")]) == 1
    assert main(["generate", "--out", str(tmp_path / "o"), "--num-keyframes", "1"]) == 1
    with pytest.raises(SystemExit) as e:
        main(["generate", "--out", str(tmp_path / "o"), "--count", "many"])
    assert e.value.code == 1


def test_asset_error_exit_2(tmp_path):
    (tmp_path / "sprites").mkdir()
    assert main(["generate", "--out", str(tmp_path / "o"), "--sprite-dir", str(tmp_path / "sprites")]) == 2


def test_failure_cap_exit_3(tmp_path, monkeypatch, capsys):
    import motionpairs.pipeline as pipeline

    def broken(job, sprites):
        raise RuntimeError("render failed")

    monkeypatch.setattr(pipeline, "render_video", broken)
    assert main(["generate", "--out", str(tmp_path), "--count", "2", *SMALL]) == 3
    assert "2 of 2 videos failed" in capsys.readouterr().err
    assert not (tmp_path / "manifest.jsonl").exists()
