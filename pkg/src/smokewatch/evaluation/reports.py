"""Prediction-file I/O, CSV tables, summary formatting, and SVG curve rendering."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Sequence

from ..dataset import DatasetManifest
from ..geometry import BoxXYXY, Detection, yolo_to_xyxy
from .metrics import EvalReport, F1Curve, GroundTruthSet, PRCurve, PredictionSet


def load_predictions(path: Path) -> PredictionSet:
    """Read JSONL prediction records: image_id, class_id, confidence, x1..y2."""
    path = Path(path)
    preds: dict[str, list[Detection]] = {}
    with path.open("r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                det = Detection(
                    box=BoxXYXY(
                        float(rec["x1"]), float(rec["y1"]), float(rec["x2"]), float(rec["y2"])
                    ),
                    class_id=int(rec["class_id"]),
                    confidence=float(rec["confidence"]),
                )
                image_id = rec["image_id"]
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{line_no}: bad prediction record: {exc}") from None
            preds.setdefault(image_id, []).append(det)
    return preds


def save_predictions(preds: PredictionSet, path: Path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for image_id in sorted(preds):
            for det in preds[image_id]:
                fh.write(
                    json.dumps(
                        {
                            "image_id": image_id,
                            "class_id": det.class_id,
                            "confidence": det.confidence,
                            "x1": det.box.x1,
                            "y1": det.box.y1,
                            "x2": det.box.x2,
                            "y2": det.box.y2,
                        }
                    )
                    + "\n"
                )


def manifest_to_truths(manifest: DatasetManifest) -> GroundTruthSet:
    """Normalized manifest labels to per-image pixel-frame ground truths."""
    truths: dict[str, list[tuple[BoxXYXY, int]]] = {}
    for sample in manifest.samples:
        truths[sample.image_id] = [
            (yolo_to_xyxy(b, sample.image_w, sample.image_h), b.class_id) for b in sample.boxes
        ]
    return truths


def write_pr_csv(curve: PRCurve, path: Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["threshold", "recall", "precision"])
        for p in curve.points:
            writer.writerow([f"{p.threshold:.6f}", f"{p.recall:.6f}", f"{p.precision:.6f}"])


def write_f1_csv(curve: F1Curve, path: Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["threshold", "precision", "recall", "f1"])
        for p in curve.points:
            writer.writerow(
                [f"{p.threshold:.6f}", f"{p.precision:.6f}", f"{p.recall:.6f}", f"{p.f1:.6f}"]
            )


def report_to_dict(report: EvalReport) -> dict:
    best_t, best_f1 = report.f1_curve.best
    return {
        "iou_thresh": report.iou_thresh,
        "per_class_ap": {str(k): v for k, v in report.per_class_ap.items()},
        "map": report.mean_ap,
        "best_f1": best_f1,
        "best_f1_threshold": best_t,
        "counts": {
            "images": report.counts.images,
            "gts": report.counts.gts,
            "preds": report.counts.preds,
            "tps": report.counts.tps,
            "fps": report.counts.fps,
        },
    }


def format_summary(report: EvalReport) -> str:
    """Human-readable summary block mirroring the headline curve numbers."""
    best_t, best_f1 = report.f1_curve.best
    lines = [
        f"mAP@{report.iou_thresh:g}: {report.mean_ap:.3f}",
        f"best F1: {best_f1:.2f} at confidence {best_t:.3f}",
        (
            f"images: {report.counts.images}  ground truths: {report.counts.gts}  "
            f"predictions: {report.counts.preds}  TP: {report.counts.tps}  FP: {report.counts.fps}"
        ),
    ]
    for cls in sorted(report.per_class_ap):
        lines.append(f"class {cls} AP: {report.per_class_ap[cls]:.3f}")
    return "\n".join(lines) + "\n"


def render_curve_svg(
    points: Sequence[tuple[float, float]],
    x_label: str,
    y_label: str,
    title: str,
    marker: tuple[float, float] | None = None,
) -> str:
    """Small standalone SVG line plot on a unit-square axis frame."""
    width, height = 480, 360
    left, right, top, bottom = 56, 16, 28, 44
    plot_w = width - left - right
    plot_h = height - top - bottom

    def sx(x: float) -> float:
        return left + x * plot_w

    def sy(y: float) -> float:
        return top + (1.0 - y) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.0f}" y="16" text-anchor="middle" font-size="13">{title}</text>',
        f'<rect x="{left}" y="{top}" width="{plot_w}" height="{plot_h}" '
        f'fill="none" stroke="#999"/>',
    ]
    for tick in (0.0, 0.25, 0.5, 0.75, 1.0):
        parts.append(
            f'<line x1="{sx(tick):.1f}" y1="{top + plot_h}" x2="{sx(tick):.1f}" '
            f'y2="{top + plot_h + 4}" stroke="#999"/>'
        )
        parts.append(
            f'<text x="{sx(tick):.1f}" y="{top + plot_h + 16}" text-anchor="middle">{tick:g}</text>'
        )
        parts.append(
            f'<line x1="{left - 4}" y1="{sy(tick):.1f}" x2="{left}" y2="{sy(tick):.1f}" stroke="#999"/>'
        )
        parts.append(
            f'<text x="{left - 7}" y="{sy(tick) + 4:.1f}" text-anchor="end">{tick:g}</text>'
        )
    parts.append(
        f'<text x="{left + plot_w / 2:.0f}" y="{height - 8}" text-anchor="middle">{x_label}</text>'
    )
    parts.append(
        f'<text x="14" y="{top + plot_h / 2:.0f}" text-anchor="middle" '
        f'transform="rotate(-90 14 {top + plot_h / 2:.0f})">{y_label}</text>'
    )
    if points:
        coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in points)
        parts.append(f'<polyline points="{coords}" fill="none" stroke="#1f77b4" stroke-width="1.5"/>')
    if marker is not None:
        mx, my = marker
        parts.append(f'<circle cx="{sx(mx):.2f}" cy="{sy(my):.2f}" r="3.5" fill="#d62728"/>')
        parts.append(
            f'<text x="{sx(mx) + 6:.1f}" y="{sy(my) - 6:.1f}" fill="#d62728">'
            f"{my:.2f} @ {mx:.3f}</text>"
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_report_files(report: EvalReport, out_dir: Path) -> list[Path]:
    """Write summary text/JSON, PR/F1 CSVs, and SVG renderings; returns paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    summary_txt = out_dir / "summary.txt"
    summary_txt.write_text(format_summary(report), encoding="utf-8")
    written.append(summary_txt)

    summary_json = out_dir / "summary.json"
    summary_json.write_text(json.dumps(report_to_dict(report), indent=2) + "\n", encoding="utf-8")
    written.append(summary_json)

    # Single-class datasets get one PR table; multi-class one per class.
    for cls, curve in report.pr_curves.items():
        suffix = "" if len(report.pr_curves) == 1 else f"_class{cls}"
        pr_path = out_dir / f"pr_curve{suffix}.csv"
        write_pr_csv(curve, pr_path)
        written.append(pr_path)
        svg_path = out_dir / f"pr_curve{suffix}.svg"
        svg_path.write_text(
            render_curve_svg(
                [(p.recall, p.precision) for p in curve.points],
                "recall",
                "precision",
                f"PR curve (IoU {report.iou_thresh:g})",
            ),
            encoding="utf-8",
        )
        written.append(svg_path)

    f1_path = out_dir / "f1_curve.csv"
    write_f1_csv(report.f1_curve, f1_path)
    written.append(f1_path)
    f1_svg = out_dir / "f1_curve.svg"
    f1_svg.write_text(
        render_curve_svg(
            [(p.threshold, p.f1) for p in report.f1_curve.points],
            "confidence threshold",
            "F1",
            "F1 vs confidence",
            marker=(report.f1_curve.best[0], report.f1_curve.best[1]),
        ),
        encoding="utf-8",
    )
    written.append(f1_svg)
    return written
