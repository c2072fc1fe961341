"""Command line: serve the service, prepare datasets, evaluate, one-off detect.

Exit codes: 0 success, 1 runtime failure, 2 usage/validation error.
"""

from __future__ import annotations

import argparse
import json
import socket
import sys
from pathlib import Path

from . import __version__
from .config import ConfigError, load_config
from .dataset import (
    AugmentOptions,
    SplitError,
    augment_dataset,
    adjust_exposure,
    format_label_file,
    load_manifest,
    mirror_image,
    save_manifest,
    split_dataset,
)
from .detector import BackendError, DetectorConfig, build_backend, postprocess
from .evaluation import (
    evaluate,
    format_summary,
    load_predictions,
    manifest_to_truths,
    report_to_dict,
    write_report_files,
)
from .geometry import letterbox_plan
from .images import ImageDecodeError, decode_image, encode_image

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="smokewatch",
        description="Wildfire-smoke early-warning service and dataset/eval toolkit",
    )
    parser.add_argument("--version", action="version", version=f"smokewatch {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the full service")
    serve.add_argument("--config", required=True, help="TOML config file")
    serve.set_defaults(func=cmd_serve)

    augment = sub.add_parser("augment", help="write mirrored/exposure copies of a dataset")
    augment.add_argument("--in", dest="manifest", required=True, help="input manifest (JSONL)")
    augment.add_argument("--out", dest="out_dir", required=True, help="output directory")
    augment.add_argument("--mirror", action="store_true", help="add horizontal mirror copies")
    augment.add_argument(
        "--exposure", default="", help="comma-separated gains in [-0.15, 0.15]"
    )
    augment.set_defaults(func=cmd_augment)

    split = sub.add_parser("split", help="assign train/val/test splits")
    split.add_argument("--in", dest="manifest", required=True)
    split.add_argument("--counts", required=True, help="train,val,test e.g. 2405,228,79")
    split.add_argument("--seed", type=int, required=True)
    split.add_argument("--out", dest="out_path", default=None, help="output manifest path")
    split.set_defaults(func=cmd_split)

    ev = sub.add_parser("eval", help="score a predictions file against labeled truth")
    ev.add_argument("--pred", required=True, help="predictions JSONL")
    ev.add_argument("--truth", required=True, help="truth manifest (JSONL)")
    ev.add_argument("--iou", type=float, default=0.5)
    ev.add_argument("--out", dest="out_dir", required=True, help="report output directory")
    ev.add_argument("--json", action="store_true", help="print machine-readable summary")
    ev.set_defaults(func=cmd_eval)

    detect = sub.add_parser("detect", help="one-shot detection on an image file")
    detect.add_argument("--image", required=True)
    detect.add_argument("--backend", choices=("mock", "external"), default="mock")
    detect.add_argument("--fixture", default=None, help="mock fixture file")
    detect.add_argument("--endpoint", default=None, help="external backend URL")
    detect.add_argument("--image-id", default=None, help="image id (default: file stem)")
    detect.add_argument("--conf-floor", type=float, default=0.298)
    detect.add_argument("--nms-iou", type=float, default=0.45)
    detect.add_argument("--json", action="store_true")
    detect.add_argument("--annotate", default=None, help="write annotated copy here")
    detect.set_defaults(func=cmd_detect)

    return parser


def _fail(message: str, code: int) -> int:
    print(f"smokewatch: error: {message}", file=sys.stderr)
    return code


def cmd_serve(args) -> int:
    config_path = Path(args.config)
    if not config_path.exists():
        print(f"smokewatch: error: config file not found: {config_path}", file=sys.stderr)
        print("usage: smokewatch serve --config <path>", file=sys.stderr)
        return EXIT_USAGE
    try:
        config = load_config(config_path)
    except ConfigError as exc:
        return _fail(str(exc), EXIT_USAGE)

    # Claim the port up front so a clash is a clean exit, not a traceback.
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        probe.bind((config.server.host, config.server.port))
    except OSError as exc:
        probe.close()
        return _fail(
            f"cannot bind {config.server.host}:{config.server.port}: {exc}", EXIT_RUNTIME
        )
    probe.close()

    import uvicorn

    from .server import create_app
    from .service import SmokewatchService

    try:
        service = SmokewatchService(config)
    except Exception as exc:
        return _fail(f"cannot start service: {exc}", EXIT_RUNTIME)
    app = create_app(service)
    service.start()
    print(f"smokewatch serving on http://{config.server.host}:{config.server.port}", flush=True)
    try:
        uvicorn.run(app, host=config.server.host, port=config.server.port, log_level="warning")
    finally:
        service.stop()
    return EXIT_OK


def _stem_for(image_id: str) -> str:
    return image_id.replace("/", "_").replace("#", "_")


def cmd_augment(args) -> int:
    try:
        gains = tuple(float(g) for g in args.exposure.split(",") if g.strip())
    except ValueError:
        return _fail(f"bad --exposure value: {args.exposure!r}", EXIT_USAGE)
    try:
        opts = AugmentOptions(mirror=args.mirror, exposure_gains=gains)
    except ValueError as exc:
        return _fail(str(exc), EXIT_USAGE)

    manifest_path = Path(args.manifest)
    try:
        manifest = load_manifest(manifest_path)
    except (OSError, ValueError) as exc:
        return _fail(f"cannot load manifest: {exc}", EXIT_USAGE)

    out_dir = Path(args.out_dir)
    images_dir = out_dir / "images"
    images_dir.mkdir(parents=True, exist_ok=True)

    try:
        augmented = augment_dataset(manifest, opts)
    except ValueError as exc:
        return _fail(str(exc), EXIT_USAGE)

    written = 0
    for sample in augmented.samples:
        source = sample.image_id.split("#", 1)[0]
        rel = manifest.paths.get(source)
        if rel is None:
            return _fail(f"sample {source!r} has no image path in the manifest", EXIT_USAGE)
        src_path = manifest_path.parent / rel
        if not src_path.exists():
            return _fail(f"image file missing: {src_path}", EXIT_USAGE)
        try:
            image = decode_image(src_path.read_bytes())
        except ImageDecodeError as exc:
            return _fail(f"{src_path}: {exc}", EXIT_USAGE)
        if sample.image_id.endswith("#mirror"):
            image = mirror_image(image)
        elif "#exp" in sample.image_id:
            gain = float(sample.image_id.rsplit("#exp", 1)[1])
            image = adjust_exposure(image, gain)

        stem = _stem_for(sample.image_id)
        img_path = images_dir / f"{stem}.png"
        label_path = images_dir / f"{stem}.txt"
        if img_path.exists() or label_path.exists():
            return _fail(f"output collision: {img_path} already exists", EXIT_USAGE)
        img_path.write_bytes(encode_image(image, format="png"))
        label_path.write_text(format_label_file(sample.boxes), encoding="utf-8")
        augmented.paths[sample.image_id] = f"images/{stem}.png"
        written += 1

    save_manifest(augmented, out_dir / "manifest.jsonl")
    print(f"wrote {written} samples to {out_dir}")
    return EXIT_OK


def cmd_split(args) -> int:
    try:
        counts = tuple(int(c) for c in args.counts.split(","))
        if len(counts) != 3:
            raise ValueError
    except ValueError:
        return _fail(f"--counts must be three integers, got {args.counts!r}", EXIT_USAGE)
    manifest_path = Path(args.manifest)
    try:
        manifest = load_manifest(manifest_path)
    except (OSError, ValueError) as exc:
        return _fail(f"cannot load manifest: {exc}", EXIT_USAGE)
    try:
        split = split_dataset(manifest, counts, seed=args.seed)
    except SplitError as exc:
        return _fail(str(exc), EXIT_USAGE)
    out_path = Path(args.out_path) if args.out_path else manifest_path.with_suffix(".split.jsonl")
    save_manifest(split, out_path)
    counts_now = split.split_counts()
    print(
        f"split {len(split.samples)} samples -> "
        f"train {counts_now['train']}, val {counts_now['val']}, test {counts_now['test']} "
        f"({out_path})"
    )
    return EXIT_OK


def cmd_eval(args) -> int:
    try:
        preds = load_predictions(Path(args.pred))
    except (OSError, ValueError) as exc:
        return _fail(f"cannot load predictions: {exc}", EXIT_USAGE)
    try:
        manifest = load_manifest(Path(args.truth))
    except (OSError, ValueError) as exc:
        return _fail(f"cannot load truth manifest: {exc}", EXIT_USAGE)
    if not (0.0 < args.iou <= 1.0):
        return _fail(f"--iou must be in (0,1], got {args.iou}", EXIT_USAGE)
    truths = manifest_to_truths(manifest)
    report = evaluate(preds, truths, iou_thresh=args.iou)
    write_report_files(report, Path(args.out_dir))
    if args.json:
        print(json.dumps(report_to_dict(report), indent=2))
    else:
        print(format_summary(report), end="")
    return EXIT_OK


def cmd_detect(args) -> int:
    image_path = Path(args.image)
    try:
        data = image_path.read_bytes()
        image = decode_image(data)
    except (OSError, ImageDecodeError) as exc:
        return _fail(f"cannot read image: {exc}", EXIT_USAGE)

    try:
        cfg = DetectorConfig(
            backend=args.backend,
            endpoint=args.endpoint,
            fixture_path=args.fixture,
            conf_floor=args.conf_floor,
            nms_iou=args.nms_iou,
        )
        backend = build_backend(cfg)
    except ValueError as exc:
        return _fail(str(exc), EXIT_USAGE)

    image_id = args.image_id or image_path.stem
    try:
        raw = backend.detect(image, image_id)
    except BackendError as exc:
        return _fail(str(exc), EXIT_RUNTIME)
    t = letterbox_plan(image.width, image.height, cfg.input_side)
    detections = postprocess(raw, t, cfg, ())

    if args.json:
        print(
            json.dumps(
                {
                    "image_id": image_id,
                    "model_id": raw.model_id,
                    "detections": [
                        {
                            "x1": d.box.x1,
                            "y1": d.box.y1,
                            "x2": d.box.x2,
                            "y2": d.box.y2,
                            "class_id": d.class_id,
                            "confidence": d.confidence,
                        }
                        for d in detections
                    ],
                },
                indent=2,
            )
        )
    else:
        if detections:
            print(f"{'conf':>6}  {'class':>5}  box (x1, y1, x2, y2)")
            for d in detections:
                print(
                    f"{d.confidence:6.3f}  {d.class_id:5d}  "
                    f"({d.box.x1:.1f}, {d.box.y1:.1f}, {d.box.x2:.1f}, {d.box.y2:.1f})"
                )
        else:
            print("no detections")

    if args.annotate:
        _write_annotated(image, detections, Path(args.annotate))
    return EXIT_OK


def _write_annotated(image, detections, out_path: Path) -> None:
    from PIL import Image as PILImage
    from PIL import ImageDraw

    pil = PILImage.fromarray(image.to_array(), mode="RGB")
    draw = ImageDraw.Draw(pil)
    for d in detections:
        draw.rectangle([d.box.x1, d.box.y1, d.box.x2, d.box.y2], outline=(255, 40, 40), width=2)
        draw.text((d.box.x1 + 2, max(d.box.y1 - 12, 0)), f"{d.confidence:.2f}", fill=(255, 40, 40))
    pil.save(out_path)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
