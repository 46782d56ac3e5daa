"""End-to-end generation of motion video-text pairs and manifest handling.

Output layout::

    out_dir/
      manifest.jsonl          header line, then one PairRecord per line
      failures.jsonl          per-video failures (only when there are any)
      frames/vid_000000/frame_00000.png ...

The manifest is written last, through a temporary file and an atomic
rename, so a partial run never leaves a manifest behind.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import shutil
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import yaml
from PIL import Image

from . import __version__
from .captions import ThresholdConfig, assemble_caption
from .compositor import BACKGROUND_MODES, FrameSeq, composite, list_clips, load_clip, make_background
from .errors import AssetError, ConfigError, PartialFailureError
from .kinematics import GenConfig, MotionSpec, interpolate, sample_motion, video_rng
from .paraphrase import ParaphraseConfig, paraphrase_batch
from .sprites import Sprite, load_sprites, procedural_sprites, sprite_digest

log = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.jsonl"
FAILURES_NAME = "failures.jsonl"
PNG_COMPRESS_LEVEL = 1


def frame_filename(index: int) -> str:
    return f"frame_{index:05d}.png"


def video_id(index: int) -> str:
    return f"vid_{index:06d}"


@dataclass
class PairRecord:
    video_id: str
    video_index: int
    frames_path: str  # relative to the manifest directory
    num_frames: int
    background_mode: str
    background_clip: str | None
    motion_spec: MotionSpec
    template_caption: str
    paraphrase: str | None = None
    paraphrase_verdict: str = "off"
    paraphrase_model: str | None = None
    source_caption: str | None = None
    seed: int = 0

    def to_dict(self) -> dict:
        return {
            "type": "record",
            "video_id": self.video_id,
            "video_index": self.video_index,
            "frames_path": self.frames_path,
            "num_frames": self.num_frames,
            "background_mode": self.background_mode,
            "background_clip": self.background_clip,
            "motion_spec": self.motion_spec.to_dict(),
            "template_caption": self.template_caption,
            "paraphrase": self.paraphrase,
            "paraphrase_verdict": self.paraphrase_verdict,
            "paraphrase_model": self.paraphrase_model,
            "source_caption": self.source_caption,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PairRecord":
        d = {k: v for k, v in d.items() if k != "type"}
        d["motion_spec"] = MotionSpec.from_dict(d["motion_spec"])
        return cls(**d)

    @property
    def caption(self) -> str:
        """Text used for training: the accepted paraphrase, else the template."""
        if self.paraphrase and self.paraphrase_verdict == "accepted":
            return self.paraphrase
        return self.template_caption


@dataclass
class Manifest:
    header: dict
    records: list[PairRecord] = field(default_factory=list)
    path: Path | None = None

    @property
    def root(self) -> Path:
        return self.path.parent if self.path else Path(".")

    @property
    def gen_config(self) -> GenConfig:
        return GenConfig(**self.header["gen_config"])

    @property
    def thresholds(self) -> ThresholdConfig:
        return ThresholdConfig.from_dict(self.header["thresholds"])

    def frame_paths(self, record: PairRecord) -> list[Path]:
        return [self.root / record.frames_path / frame_filename(i) for i in range(record.num_frames)]

    def load_frames(self, record: PairRecord) -> FrameSeq:
        frames = []
        for p in self.frame_paths(record):
            with Image.open(p) as im:
                frames.append(np.asarray(im.convert("RGB"), dtype=np.uint8))
        return FrameSeq(np.stack(frames), record.background_mode)

    def load_background(self, record: PairRecord) -> FrameSeq:
        cfg = self.gen_config
        source = None
        if record.background_mode != "black":
            source = load_clip(Path(self.header["background_dir"]) / record.background_clip)
        return make_background(record.background_mode, source, record.num_frames, cfg.frame_height, cfg.frame_width)

    def dumps(self) -> str:
        lines = [json.dumps(self.header, separators=(",", ":"))]
        lines += [json.dumps(r.to_dict(), separators=(",", ":"), ensure_ascii=False) for r in self.records]
        return "\n".join(lines) + "\n"

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        tmp = path.with_name(path.name + ".tmp")
        with open(tmp, "w", encoding="utf-8") as f:
            f.write(self.dumps())
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp, path)
        self.path = path
        return path

    @classmethod
    def load(cls, path: str | Path) -> "Manifest":
        path = Path(path)
        if path.is_dir():
            path = path / MANIFEST_NAME
        with open(path, encoding="utf-8") as f:
            lines = [ln for ln in f.read().splitlines() if ln.strip()]
        if not lines:
            raise OSError(f"empty manifest: {path}")
        try:
            header = json.loads(lines[0])
            records = [PairRecord.from_dict(json.loads(ln)) for ln in lines[1:]]
        except (json.JSONDecodeError, KeyError, TypeError) as e:
            raise OSError(f"unreadable manifest {path}: {e}") from e
        if header.get("type") != "header":
            raise OSError(f"manifest {path} has no header line")
        return cls(header, records, path)


def config_digest(gen: GenConfig, thresholds: ThresholdConfig) -> str:
    blob = json.dumps({"gen_config": gen.to_dict(), "thresholds": thresholds.to_dict()}, sort_keys=True)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


# per-video work -------------------------------------------------------------

_WORKER_SPRITES: Sequence[Sprite] = ()


def _init_worker(sprites):
    global _WORKER_SPRITES
    _WORKER_SPRITES = sprites


@dataclass(frozen=True)
class _Job:
    index: int
    seed: int
    cfg: GenConfig
    thresholds: ThresholdConfig
    mode: str
    clips: tuple[str, ...]
    background_dir: str | None
    count: int
    out_dir: str


def render_video(job: _Job, sprites: Sequence[Sprite]) -> tuple[PairRecord, FrameSeq]:
    """Sample, composite and caption one video. Pure given the job."""
    cfg = job.cfg
    rng = video_rng(job.seed, job.index)
    spec = sample_motion(cfg, sprites, rng)
    clip = None
    source = None
    if job.mode != "black":
        # one clip per video when the counts match, otherwise a uniform draw
        ci = job.index if len(job.clips) == job.count else int(rng.integers(len(job.clips)))
        clip = job.clips[ci]
        source = load_clip(Path(job.background_dir) / clip)
    background = make_background(job.mode, source, cfg.num_frames, cfg.frame_height, cfg.frame_width)
    track = interpolate(spec)
    frames = composite(background, sprites[spec.object_index], track, (spec.height, spec.width))
    caption = assemble_caption(spec, track, job.thresholds)
    vid = video_id(job.index)
    record = PairRecord(
        video_id=vid,
        video_index=job.index,
        frames_path=f"frames/{vid}",
        num_frames=cfg.num_frames,
        background_mode=job.mode,
        background_clip=clip,
        motion_spec=spec,
        template_caption=caption.rendered,
        seed=job.seed,
    )
    return record, frames


def _run_job(job: _Job, sprites: Sequence[Sprite] | None = None) -> dict:
    sprites = sprites if sprites is not None else _WORKER_SPRITES
    try:
        record, frames = render_video(job, sprites)
        d = Path(job.out_dir) / record.frames_path
        d.mkdir(parents=True, exist_ok=True)
        for i, frame in enumerate(frames.frames):
            Image.fromarray(frame, "RGB").save(d / frame_filename(i), compress_level=PNG_COMPRESS_LEVEL)
        return {"ok": True, "record": record}
    except Exception as e:  # recorded per video, never fatal on its own
        return {"ok": False, "video_index": job.index, "error": f"{type(e).__name__}: {e}"}


def resolve_sprites(sprite_dir: str | Path | None) -> tuple[list[Sprite], str]:
    if sprite_dir is None:
        return procedural_sprites(), "procedural"
    return load_sprites(sprite_dir), str(sprite_dir)


def generate_dataset(cfg: GenConfig, thresholds: ThresholdConfig, out_dir: str | Path, count: int,
                     seed: int | None = None, sprite_dir: str | Path | None = None,
                     sprites: Sequence[Sprite] | None = None, background_mode: str = "black",
                     background_dir: str | Path | None = None,
                     paraphrase_cfg: ParaphraseConfig = ParaphraseConfig(), workers: int = 1,
                     failure_cap: float = 0.1, endpoint=None) -> Manifest:
    """Generate ``count`` pairs into ``out_dir`` and write the manifest.

    ``sprites`` overrides ``sprite_dir``; with neither, the procedural set is used.
    ``endpoint`` overrides the endpoint built from ``paraphrase_cfg``.
    """
    cfg.validate()
    seed = cfg.rng_seed if seed is None else seed
    if count < 0:
        raise ConfigError("count must be non-negative")
    if background_mode not in BACKGROUND_MODES:
        raise ConfigError(f"background mode must be one of {BACKGROUND_MODES}")
    if sprites is None:
        sprites, sprite_source = resolve_sprites(sprite_dir)
    else:
        sprite_source = "in-memory"
    if not sprites:
        raise AssetError("sprite set is empty")
    clips: tuple[str, ...] = ()
    if background_mode != "black":
        if background_dir is None:
            raise AssetError(f"background mode {background_mode!r} needs a background directory")
        clips = tuple(p.name for p in list_clips(background_dir))

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest_path = out / MANIFEST_NAME
    for stale in (manifest_path, out / FAILURES_NAME):
        stale.unlink(missing_ok=True)

    jobs = [
        _Job(i, seed, cfg, thresholds, background_mode, clips,
             str(background_dir) if background_dir is not None else None, count, str(out))
        for i in range(count)
    ]
    if workers > 1 and count > 1:
        with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker, initargs=(list(sprites),)) as pool:
            results = list(pool.map(_run_job, jobs, chunksize=max(1, count // (4 * workers))))
    else:
        results = [_run_job(j, sprites) for j in jobs]

    records = [r["record"] for r in results if r["ok"]]
    failures = [{k: v for k, v in r.items() if k != "ok"} for r in results if not r["ok"]]

    endpoint = endpoint if endpoint is not None else paraphrase_cfg.endpoint()
    if endpoint is not None and records:
        captions = [assemble_caption(r.motion_spec, None, thresholds) for r in records]
        results = paraphrase_batch(captions, endpoint, max_in_flight=paraphrase_cfg.concurrency,
                                   retry=paraphrase_cfg.retry)
        kept = []
        for rec, res in zip(records, results):
            rec.paraphrase = res.text
            rec.paraphrase_verdict = str(res.verdict)
            rec.paraphrase_model = res.model_id
            if not res.accepted and paraphrase_cfg.strict:
                failures.append({"video_index": rec.video_index, "error": f"paraphrase {res.verdict}"})
                shutil.rmtree(out / rec.frames_path, ignore_errors=True)
                continue
            kept.append(rec)
        records = kept

    failures.sort(key=lambda f: f["video_index"])
    if failures:
        with open(out / FAILURES_NAME, "w", encoding="utf-8") as f:
            for item in failures:
                f.write(json.dumps(item) + "\n")
        log.warning("%d of %d videos failed", len(failures), count)
    if count and len(failures) / count > failure_cap:
        raise PartialFailureError(
            f"{len(failures)} of {count} videos failed (cap {failure_cap:.0%}); see {out / FAILURES_NAME}"
        )

    header = {
        "type": "header",
        "tool": "motionpairs",
        "version": __version__,
        "gen_config": cfg.to_dict(),
        "thresholds": thresholds.to_dict(),
        "config_digest": config_digest(cfg, thresholds),
        "sprite_source": sprite_source,
        "sprite_digest": sprite_digest(sprites),
        "sprite_names": sorted({s.name for s in sprites}),
        "background_mode": background_mode,
        "background_dir": str(background_dir) if background_dir is not None else None,
        "seed": seed,
        "requested": count,
        "failures": len(failures),
        "paraphrase": paraphrase_cfg.to_public_dict(),
    }
    manifest = Manifest(header, sorted(records, key=lambda r: r.video_index))
    manifest.save(manifest_path)
    return manifest


# verification ---------------------------------------------------------------

@dataclass
class RecordCheck:
    video_id: str
    ok: bool
    problems: list[str]


@dataclass
class VerifyReport:
    checks: list[RecordCheck]
    header_problems: list[str]

    @property
    def ok(self) -> bool:
        return not self.header_problems and all(c.ok for c in self.checks)

    @property
    def failed(self) -> list[RecordCheck]:
        return [c for c in self.checks if not c.ok]

    def summary(self) -> str:
        lines = [f"header: {'; '.join(self.header_problems) or 'ok'}"]
        for c in self.checks:
            lines.append(f"{c.video_id}: {'ok' if c.ok else 'FAIL ' + '; '.join(c.problems)}")
        lines.append(f"{len(self.checks) - len(self.failed)}/{len(self.checks)} records pass")
        return "\n".join(lines)


def verify_manifest(manifest_path: str | Path) -> VerifyReport:
    """Re-render every caption from its motion spec and check the frame files."""
    manifest = Manifest.load(manifest_path)
    header_problems = []
    cfg, thresholds = manifest.gen_config, manifest.thresholds
    if manifest.header.get("config_digest") != config_digest(cfg, thresholds):
        header_problems.append("config digest does not match header configs")
    expected = manifest.header.get("requested", 0) - manifest.header.get("failures", 0)
    if expected != len(manifest.records):
        header_problems.append(f"expected {expected} records, found {len(manifest.records)}")

    checks = []
    for rec in manifest.records:
        problems = []
        rerendered = assemble_caption(rec.motion_spec, None, thresholds).rendered
        if rerendered != rec.template_caption:
            problems.append(f"caption-mismatch: expected {rerendered!r}")
        missing = 0
        for p in manifest.frame_paths(rec):
            if not p.exists():
                missing += 1
                continue
            with Image.open(p) as im:
                if im.size != (cfg.frame_width, cfg.frame_height):
                    problems.append(f"bad-dimensions: {p.name} is {im.size[0]}x{im.size[1]}")
        if missing:
            problems.append(f"missing-frames: {missing} of {rec.num_frames}")
        checks.append(RecordCheck(rec.video_id, not problems, problems))
    return VerifyReport(checks, header_problems)


# configuration file -----------------------------------------------------------

def load_config(path: str | Path | None) -> dict:
    """Read the YAML config; sections ``generation``, ``thresholds``, ``paraphrase``, ``pipeline``, ``probe``."""
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as f:
            data = yaml.safe_load(f) or {}
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    except yaml.YAMLError as e:
        raise ConfigError(f"invalid YAML in {path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must be a mapping")
    unknown = set(data) - {"generation", "thresholds", "paraphrase", "pipeline", "probe"}
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    return data


def build_configs(data: dict) -> tuple[GenConfig, ThresholdConfig, ParaphraseConfig]:
    try:
        gen = GenConfig(**data.get("generation", {})).validate()
        thresholds = ThresholdConfig.from_dict(data.get("thresholds", {}))
    except TypeError as e:
        raise ConfigError(str(e)) from e
    except ValueError as e:
        raise ConfigError(str(e)) from e
    return gen, thresholds, ParaphraseConfig.from_dict(data.get("paraphrase", {}))


def write_preview(manifest: Manifest, record: PairRecord, out_path: str | Path, fps: int = 8) -> Path:
    """Animated GIF of one video's frames."""
    frames = [Image.fromarray(f) for f in manifest.load_frames(record).frames]
    out_path = Path(out_path)
    frames[0].save(out_path, save_all=True, append_images=frames[1:], duration=int(1000 / fps), loop=0)
    return out_path
