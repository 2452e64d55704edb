"""Command-line entry point: ``wordfence <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 data or I/O error, 3 internal
invariant violation.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from wordfence.errors import InvalidArgument, InvalidState, WordFenceError
from wordfence.evaluate import DetectionReport, end_to_end_score, match_detections
from wordfence.extract import extract_boxes
from wordfence.formats import read_ften, read_image, read_pnm, write_ften, write_pnm
from wordfence.fusion import DEFAULT_SCALES, ScaleSet, fuse_votes, infer_multiscale
from wordfence.labelgen import (
    DEFAULT_BORDER_WIDTH,
    drop_fence,
    dump_boxes,
    load_annotations,
    load_boxes,
    rasterize_labels,
)
from wordfence.overlay import render_overlay
from wordfence.pipeline import PipelineConfig, per_image_csv, run_pipeline
from wordfence.synth import SynthConfig, write_dataset
from wordfence.toynet import TrainConfig, format_loss_log, load_checkpoint, save_checkpoint, train

log = logging.getLogger("wordfence")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def _scales(text: str) -> tuple[float, ...]:
    try:
        return ScaleSet(tuple(float(s) for s in text.split(","))).scales
    except (ValueError, InvalidArgument) as exc:
        raise argparse.ArgumentTypeError(f"bad scale list {text!r}: {exc}") from exc


def _pair(text: str) -> tuple[int, int]:
    lo, _, hi = text.partition(",")
    return int(lo), int(hi or lo)


def _read_manifest(path: Path) -> list[dict]:
    return json.loads(path.read_text())["scenes"]


def _load_training_set(data_dir: Path, border_width: int, two_class: bool):
    dataset = []
    for scene in _read_manifest(data_dir / "manifest.json"):
        image = read_image(data_dir / scene["image"])
        anns = load_annotations(data_dir / scene["annotations"])
        labels = rasterize_labels(anns, image.shape[0], image.shape[1], border_width)
        dataset.append((image, drop_fence(labels) if two_class else labels))
    return dataset


# -- subcommands ---------------------------------------------------------------

def cmd_synth(args):
    cfg = SynthConfig(image_h=args.height, image_w=args.width, words_min=args.words[0], words_max=args.words[1],
                      word_h=args.word_height, word_w=args.word_width, gap_min=args.gap_min, gap_max=args.gap_max,
                      noise_sigma=args.noise, texture=args.texture, seed=args.seed)
    write_dataset(args.out, cfg, args.count)
    print(f"wrote {args.count} scenes to {args.out}")


def cmd_labelgen(args):
    anns = load_annotations(args.annotations)
    if args.image:
        h, w = read_pnm(args.image).shape[:2]
    elif args.height and args.width:
        h, w = args.height, args.width
    else:
        raise UsageError("give --image or both --height and --width")
    labels = rasterize_labels(anns, h, w, args.border_width)
    write_pnm(args.out, labels.grid)
    if args.ignore_out:
        write_pnm(args.ignore_out, labels.ignore_mask.astype(np.uint8) * 255)


def cmd_train(args):
    dataset = _load_training_set(args.data, args.border_width, args.two_class)
    cfg = TrainConfig(learning_rate=args.learning_rate, epochs=args.epochs, batch=args.batch, seed=args.seed,
                      weight_init_scale=args.init_scale)
    params, history = train(dataset, cfg)
    save_checkpoint(args.out, params, cfg, extra={"border_width": args.border_width,
                                                  "two_class": args.two_class})
    (Path(args.out) / "loss.csv").write_text(format_loss_log(history))
    print(f"final mean loss {history[-1]:.6f}; checkpoint in {args.out}")


def cmd_infer(args):
    params, _ = load_checkpoint(args.checkpoint)
    image = read_image(args.image)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    for scale, probs in zip(args.scales, infer_multiscale(params, image, ScaleSet(args.scales))):
        path = args.out_dir / f"{args.image.stem}.s{scale:g}.ften"
        write_ften(path, probs)
        print(path)


def cmd_fuse(args):
    maps = [read_ften(p) for p in args.maps]
    if args.height and args.width:
        h, w = args.height, args.width
    else:
        h, w = max(m.shape[0] for m in maps), max(m.shape[1] for m in maps)
    write_pnm(args.out, fuse_votes(maps, h, w))


def cmd_extract(args):
    labels = read_pnm(args.labels)
    boxes = extract_boxes(labels, args.min_area, args.expand)
    text = dump_boxes(boxes)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_eval(args):
    if args.manifest:
        scenes = _read_manifest(args.manifest)
        root = args.manifest.parent
        gts = [root / s["annotations"] for s in scenes]
        dets = [args.det_dir / f"{Path(s['image']).stem}.boxes.json" for s in scenes]
    else:
        dets, gts = args.dets or [], args.gts or []
    if len(dets) != len(gts):
        raise UsageError(f"{len(dets)} detection files but {len(gts)} ground-truth files")
    total, rows = DetectionReport(), []
    for det_path, gt_path in zip(dets, gts):
        found = load_boxes(det_path)
        words = load_annotations(gt_path)
        if args.end_to_end:
            report = end_to_end_score(found, words, args.iou)
        else:
            report = match_detections([b for b, _ in found], words, args.iou)
        total = total + report
        rows.append((Path(det_path).stem, report))
    summary = json.dumps(total.summary(), indent=1, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(summary)
    sys.stdout.write(summary)
    if args.csv:
        Path(args.csv).write_text(per_image_csv(rows))


def cmd_pipeline(args):
    common = dict(checkpoint=args.checkpoint, out_dir=args.out_dir, border_width=args.border_width,
                  scales=args.scales, min_area=args.min_area, expand=args.expand, iou_thresh=args.iou,
                  seed=args.seed)
    if args.manifest:
        config = PipelineConfig.from_manifest(args.manifest, **common)
    else:
        config = PipelineConfig(images=args.images or [], annotations=args.annotations or [], **common)
    result = run_pipeline(config)
    sys.stdout.write(json.dumps(result.report.summary(), sort_keys=True) + "\n")
    if not result.ok:
        print(f"{len(result.failures)} image(s) failed", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def cmd_overlay(args):
    image = read_image(args.image)
    boxes = [b for b, _ in load_boxes(args.boxes)] if args.boxes else []
    labels = read_pnm(args.labels) if args.labels else None
    write_pnm(args.out, render_overlay(image, boxes, labels))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="wordfence", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="generate synthetic scenes")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--height", type=int, default=64)
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--words", type=_pair, default=(2, 4), help="min,max words per scene")
    p.add_argument("--word-height", type=_pair, default=(8, 14))
    p.add_argument("--word-width", type=_pair, default=(12, 28))
    p.add_argument("--gap-min", type=int, default=3)
    p.add_argument("--gap-max", type=int, default=None)
    p.add_argument("--noise", type=float, default=0.04)
    p.add_argument("--texture", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("labelgen", help="rasterize annotations into a label map")
    p.add_argument("--annotations", type=Path, required=True)
    p.add_argument("--image", type=Path)
    p.add_argument("--height", type=int)
    p.add_argument("--width", type=int)
    p.add_argument("--border-width", type=int, default=DEFAULT_BORDER_WIDTH)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--ignore-out", type=Path)
    p.set_defaults(func=cmd_labelgen)

    p = sub.add_parser("train", help="train the toy network on a synthetic dataset")
    p.add_argument("--data", type=Path, required=True, help="directory holding manifest.json")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--learning-rate", type=float, default=0.05)
    p.add_argument("--batch", type=int, default=1)
    p.add_argument("--init-scale", type=float, default=0.1)
    p.add_argument("--border-width", type=int, default=DEFAULT_BORDER_WIDTH)
    p.add_argument("--two-class", action="store_true", help="train without the border class")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", help="write per-scale probability maps")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--image", type=Path, required=True)
    p.add_argument("--scales", type=_scales, default=DEFAULT_SCALES)
    p.add_argument("--out-dir", type=Path, required=True)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("fuse", help="vote probability maps into one label map")
    p.add_argument("--maps", type=Path, nargs="+", required=True)
    p.add_argument("--height", type=int)
    p.add_argument("--width", type=int)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("extract", help="word boxes from a label map")
    p.add_argument("--labels", type=Path, required=True)
    p.add_argument("--min-area", type=int, default=6)
    p.add_argument("--expand", type=int, default=0)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("eval", help="score detections against ground truth")
    p.add_argument("--dets", type=Path, nargs="+")
    p.add_argument("--gts", type=Path, nargs="+")
    p.add_argument("--manifest", type=Path, help="dataset manifest; detections read from --det-dir")
    p.add_argument("--det-dir", type=Path, default=Path("."))
    p.add_argument("--iou", type=float, default=0.5)
    p.add_argument("--end-to-end", action="store_true", help="also require matching transcriptions")
    p.add_argument("--out", type=Path)
    p.add_argument("--csv", type=Path)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("pipeline", help="detect and score a set of images")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--manifest", type=Path)
    p.add_argument("--images", type=Path, nargs="*")
    p.add_argument("--annotations", type=Path, nargs="*")
    p.add_argument("--out-dir", type=Path, required=True)
    p.add_argument("--border-width", type=int, default=DEFAULT_BORDER_WIDTH)
    p.add_argument("--scales", type=_scales, default=DEFAULT_SCALES)
    p.add_argument("--min-area", type=int, default=6)
    p.add_argument("--expand", type=int, default=0)
    p.add_argument("--iou", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("overlay", help="draw boxes and labels over an image")
    p.add_argument("--image", type=Path, required=True)
    p.add_argument("--boxes", type=Path)
    p.add_argument("--labels", type=Path)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_overlay)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args) or EXIT_OK
    except (UsageError, InvalidArgument) as exc:
        print(f"wordfence {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InvalidState as exc:
        print(f"wordfence {args.command}: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except (WordFenceError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"wordfence {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
