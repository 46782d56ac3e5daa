"""Command-line interface: ``motionpairs {generate,verify,stats,probe,preview}``.

Every numeric setting of the generation, threshold, paraphrase and probe
configs is exposed as a flag; flags override the YAML config file, which
overrides the built-in defaults. Exit codes: 0 success, 1 config error,
2 asset error, 3 failures over the cap.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path

from .analytics import default_tag_lexicon, noun_uniqueness, pos_profile
from .captions import ThresholdConfig
from .errors import ConfigError, MotionPairsError
from .kinematics import GenConfig
from .paraphrase import ParaphraseConfig
from .pipeline import Manifest, build_configs, generate_dataset, load_config, verify_manifest, write_preview

log = logging.getLogger("motionpairs")

PIPELINE_DEFAULTS = {
    "count": 100,
    "seed": None,
    "workers": 1,
    "background_mode": "black",
    "background_dir": None,
    "sprite_dir": None,
    "failure_cap": 0.1,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors are config errors
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _numeric_fields(cls):
    for f in fields(cls):
        default = getattr(cls, f.name, None)
        if isinstance(default, (int, float)) and not isinstance(default, bool):
            yield f.name, type(default)


def _add_flags(parser, cls, section: str, prefix: str = "", skip=()):
    group = parser.add_argument_group(f"{section} settings")
    for name, typ in _numeric_fields(cls):
        if name in skip:
            continue
        group.add_argument(f"--{prefix}{name.replace('_', '-')}", dest=f"{section}.{name}", type=typ,
                           default=None, metavar=typ.__name__.upper())


def _overrides(args) -> dict:
    """Nested ``{section: {field: value}}`` of the flags that were given."""
    out: dict = {}
    for key, value in vars(args).items():
        if "." in key and value is not None:
            section, name = key.split(".", 1)
            out.setdefault(section, {})[name] = value
    return out


def _merged_config(args) -> dict:
    data = load_config(args.config)
    for section, values in _overrides(args).items():
        merged = dict(data.get(section) or {})
        merged.update(values)
        data[section] = merged
    return data


def cmd_generate(args) -> int:
    data = _merged_config(args)
    pipe = {**PIPELINE_DEFAULTS, **(data.pop("pipeline", None) or {})}
    data.pop("probe", None)
    unknown = set(pipe) - set(PIPELINE_DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown pipeline settings: {sorted(unknown)}")
    gen, thresholds, para = build_configs(data)
    manifest = generate_dataset(
        gen, thresholds, args.out, count=int(pipe["count"]), seed=pipe["seed"],
        sprite_dir=pipe["sprite_dir"], background_mode=pipe["background_mode"],
        background_dir=pipe["background_dir"], paraphrase_cfg=para, workers=int(pipe["workers"]),
        failure_cap=float(pipe["failure_cap"]),
    )
    print(f"wrote {len(manifest.records)} pairs to {manifest.path}")
    return 0


def cmd_verify(args) -> int:
    try:
        report = verify_manifest(args.manifest)
    except OSError as e:
        print(f"cannot read manifest: {e}", file=sys.stderr)
        return 2
    text = report.summary() if args.all else "\n".join(
        [f"header: {'; '.join(report.header_problems) or 'ok'}"]
        + [f"{c.video_id}: FAIL {'; '.join(c.problems)}" for c in report.failed]
        + [f"{len(report.checks) - len(report.failed)}/{len(report.checks)} records pass"]
    )
    print(text)
    return 0 if report.ok else 1


def _read_captions(path: str) -> tuple[list[str], list[str]]:
    """Captions and object names from a manifest or a one-caption-per-line file."""
    p = Path(path)
    try:
        manifest = Manifest.load(p)
        return [r.caption for r in manifest.records], manifest.header.get("sprite_names", [])
    except (OSError, UnicodeDecodeError):
        if p.is_dir():
            raise
    with open(p, encoding="utf-8") as f:
        return [ln.strip() for ln in f if ln.strip()], []


def cmd_stats(args) -> int:
    try:
        captions, objects = _read_captions(args.input)
    except OSError as e:
        print(f"cannot read {args.input}: {e}", file=sys.stderr)
        return 2
    lexicon = default_tag_lexicon().with_objects(objects)
    if args.lexicon:
        from .analytics import TagLexicon
        lexicon = TagLexicon.load(args.lexicon, objects)
    try:
        profile = pos_profile(captions, lexicon)
    except ValueError as e:
        print(str(e), file=sys.stderr)
        return 1
    report = {
        "input": str(args.input),
        "pos_profile": profile.to_dict(),
        "noun_uniqueness": noun_uniqueness(captions, lexicon),
    }
    if args.format == "json":
        text = json.dumps(report, indent=2)
    else:
        rows = [(k, f"{v:.4f}") for k, v in profile.to_dict().items() if k != "num_captions"]
        width = max(len(k) for k, _ in rows)
        text = "\n".join(
            [f"captions: {profile.num_captions}", f"{'tag':<{width}}  avg/caption"]
            + [f"{k:<{width}}  {v}" for k, v in rows]
            + [f"noun uniqueness: {report['noun_uniqueness']:.4f}"]
        )
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)
    return 0


def write_loss_curve(curve: list[dict], path: Path) -> None:
    if not curve:
        path.write_text("epoch\n", encoding="utf-8")
        return
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=list(curve[0]))
        writer.writeheader()
        writer.writerows({k: float(v) if k != "epoch" else v for k, v in row.items()} for row in curve)


def cmd_probe(args) -> int:
    from .probe.train import ProbeConfig, ProbeData, train_probe

    data = _merged_config(args)
    values = dict(data.get("probe") or {})
    n_train = values.pop("n_train", None)
    if args.video_blind:
        values["video_in_mlm"] = False
    if args.shuffle_labels:
        values["shuffle_labels"] = True
    try:
        cfg = ProbeConfig(**values)
    except TypeError as e:
        raise ConfigError(str(e)) from e
    try:
        pairs = ProbeData.from_manifest(args.manifest)
    except OSError as e:
        print(f"cannot read manifest: {e}", file=sys.stderr)
        return 2
    _, metrics = train_probe(pairs, cfg, n_train=n_train)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_loss_curve(metrics["loss_curve"], out / "loss_curve.csv")
    report = {k: v for k, v in metrics.items() if k != "loss_curve"}
    report["final_loss"] = metrics["loss_curve"][-1] if metrics["loss_curve"] else None
    (out / "metrics.json").write_text(json.dumps(report, indent=2, default=float) + "\n", encoding="utf-8")
    print(json.dumps({k: report[k] for k in ("retrieval", "chance_R@1", "direction_accuracy") if k in report},
                     default=float))
    return 0


def cmd_preview(args) -> int:
    try:
        manifest = Manifest.load(args.manifest)
    except OSError as e:
        print(f"cannot read manifest: {e}", file=sys.stderr)
        return 2
    matches = [r for r in manifest.records if r.video_id == args.video or str(r.video_index) == args.video]
    if not matches:
        print(f"no video {args.video!r} in manifest", file=sys.stderr)
        return 1
    try:
        path = write_preview(manifest, matches[0], args.out, fps=args.fps)
    except OSError as e:
        print(f"cannot read frames: {e}", file=sys.stderr)
        return 2
    print(f"{path}: {matches[0].caption}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="motionpairs", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="render video-caption pairs and write a manifest")
    g.add_argument("--config", help="YAML config file")
    g.add_argument("--out", required=True, help="output directory")
    g.add_argument("--count", dest="pipeline.count", metavar="N", type=int)
    g.add_argument("--seed", dest="pipeline.seed", metavar="N", type=int)
    g.add_argument("--workers", dest="pipeline.workers", metavar="N", type=int)
    g.add_argument("--background-mode", dest="pipeline.background_mode", choices=("black", "static_frame", "video"))
    g.add_argument("--background-dir", dest="pipeline.background_dir", metavar="DIR")
    g.add_argument("--sprite-dir", dest="pipeline.sprite_dir", metavar="DIR")
    g.add_argument("--failure-cap", dest="pipeline.failure_cap", metavar="FRACTION", type=float)
    g.add_argument("--paraphrase", dest="paraphrase.mode", choices=("off", "offline", "online"))
    g.add_argument("--paraphrase-url", dest="paraphrase.url", metavar="URL")
    g.add_argument("--paraphrase-model", dest="paraphrase.model", metavar="NAME")
    _add_flags(g, GenConfig, "generation")
    _add_flags(g, ThresholdConfig, "thresholds")
    _add_flags(g, ParaphraseConfig, "paraphrase", prefix="paraphrase-")
    g.set_defaults(func=cmd_generate)

    v = sub.add_parser("verify", help="re-check captions and frames of a manifest")
    v.add_argument("manifest")
    v.add_argument("--all", action="store_true", help="list passing records too")
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("stats", help="part-of-speech profile and noun-set uniqueness")
    s.add_argument("input", help="manifest or text file with one caption per line")
    s.add_argument("--lexicon", help="tab-separated word/tag/lemma file")
    s.add_argument("--format", choices=("table", "json"), default="table")
    s.add_argument("--out", help="write the report here instead of stdout")
    s.set_defaults(func=cmd_stats)

    from .probe.train import ProbeConfig

    p = sub.add_parser("probe", help="train the alignment probe on a manifest")
    p.add_argument("manifest")
    p.add_argument("--config", help="YAML config file (section 'probe')")
    p.add_argument("--out", default="probe_out", help="directory for metrics.json and loss_curve.csv")
    p.add_argument("--n-train", dest="probe.n_train", type=int, metavar="N", help="training pairs; the rest are held out")
    p.add_argument("--video-blind", action="store_true", help="drop the video input of the masked-token head")
    p.add_argument("--shuffle-labels", action="store_true", help="decouple training captions from videos")
    _add_flags(p, ProbeConfig, "probe")
    p.set_defaults(func=cmd_probe)

    w = sub.add_parser("preview", help="animated GIF of one video")
    w.add_argument("manifest")
    w.add_argument("video", help="video id or index")
    w.add_argument("--out", default="preview.gif")
    w.add_argument("--fps", type=int, default=8)
    w.set_defaults(func=cmd_preview)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except MotionPairsError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
