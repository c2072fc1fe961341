"""Labeled-dataset tooling: label-file I/O, mirror/exposure augmentation,
deterministic grouped train/val/test splitting, and training-plan arithmetic.

Label files are the plain normalized text format: one ``class cx cy w h``
line per box, whitespace-separated, next to the image as ``<stem>.txt``.
The manifest is JSON-lines, one record per sample (id, path, width, height,
split), with class names in a ``classes.txt`` sidecar.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .geometry import EDGE_EPS, YoloBox
from .images import ImageRGB

EXPOSURE_GAIN_LIMIT = 0.15

SPLIT_NAMES = ("train", "val", "test")


class LabelParseError(ValueError):
    """A malformed label-file line; carries the 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class SplitError(ValueError):
    pass


@dataclass(frozen=True)
class SampleLabel:
    """One labeled image: id, pixel dimensions, and its normalized boxes."""

    image_id: str
    image_w: int
    image_h: int
    boxes: tuple[YoloBox, ...] = ()

    def __post_init__(self) -> None:
        if self.image_w <= 0 or self.image_h <= 0:
            raise ValueError(f"image dimensions must be positive: {self.image_id}")


@dataclass
class DatasetManifest:
    """A set of labeled samples plus their (possibly partial) split assignment."""

    samples: list[SampleLabel] = field(default_factory=list)
    split_of: dict[str, str] = field(default_factory=dict)
    class_names: list[str] = field(default_factory=list)
    paths: dict[str, str] = field(default_factory=dict)

    def validate(self) -> None:
        ids = {s.image_id for s in self.samples}
        if len(ids) != len(self.samples):
            raise ValueError("duplicate image ids in manifest")
        for image_id, split in self.split_of.items():
            if image_id not in ids:
                raise ValueError(f"split assignment for unknown sample {image_id!r}")
            if split not in SPLIT_NAMES:
                raise ValueError(f"unknown split {split!r} for {image_id!r}")

    def split_counts(self) -> dict[str, int]:
        counts = {name: 0 for name in SPLIT_NAMES}
        for split in self.split_of.values():
            counts[split] += 1
        return counts


@dataclass(frozen=True)
class AugmentOptions:
    """Which derived copies to produce per source sample."""

    mirror: bool = False
    exposure_gains: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        for g in self.exposure_gains:
            _check_gain(g)

    @property
    def multiplicity(self) -> int:
        return 1 + (1 if self.mirror else 0) + len(self.exposure_gains)


def _check_gain(gain: float) -> None:
    if not (-EXPOSURE_GAIN_LIMIT <= gain <= EXPOSURE_GAIN_LIMIT):
        raise ValueError(
            f"exposure gain {gain} outside [-{EXPOSURE_GAIN_LIMIT}, +{EXPOSURE_GAIN_LIMIT}]"
        )


# -- label files ------------------------------------------------------------


def _clamp_eps(value: float, lo: float, hi: float) -> float | None:
    if value < lo - EDGE_EPS or value > hi + EDGE_EPS:
        return None
    return min(max(value, lo), hi)


def parse_label_file(text: str, image_w: int, image_h: int) -> list[YoloBox]:
    """Parse ``class cx cy w h`` lines into YoloBoxes; blank lines are skipped."""
    del image_w, image_h  # labels are normalized; dimensions kept for signature symmetry
    boxes: list[YoloBox] = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 5:
            raise LabelParseError(line_no, f"expected 5 fields, got {len(fields)}")
        try:
            class_id = int(fields[0])
            values = [float(f) for f in fields[1:]]
        except ValueError:
            raise LabelParseError(line_no, f"non-numeric field in {line!r}") from None
        if class_id < 0:
            raise LabelParseError(line_no, f"negative class id {class_id}")
        cx = _clamp_eps(values[0], 0.0, 1.0)
        cy = _clamp_eps(values[1], 0.0, 1.0)
        w = _clamp_eps(values[2], 0.0, 1.0)
        h = _clamp_eps(values[3], 0.0, 1.0)
        if None in (cx, cy, w, h) or w == 0.0 or h == 0.0:
            raise LabelParseError(line_no, f"coordinates out of range in {line!r}")
        try:
            boxes.append(YoloBox(class_id=class_id, cx=cx, cy=cy, w=w, h=h))
        except ValueError as exc:
            raise LabelParseError(line_no, str(exc)) from None
    return boxes


def format_label_file(boxes: list[YoloBox] | tuple[YoloBox, ...]) -> str:
    """Render boxes back to label-file text (6 decimals, round-trips within 1e-6)."""
    lines = [f"{b.class_id} {b.cx:.6f} {b.cy:.6f} {b.w:.6f} {b.h:.6f}" for b in boxes]
    return "\n".join(lines) + ("\n" if lines else "")


# -- pixel + label transforms -----------------------------------------------


def mirror_label(label: SampleLabel) -> SampleLabel:
    mirrored = tuple(replace(b, cx=1.0 - b.cx) for b in label.boxes)
    return replace(label, boxes=mirrored)


def mirror_image(img: ImageRGB) -> ImageRGB:
    return ImageRGB.from_array(img.to_array()[:, ::-1].copy())


def mirror_sample(img: ImageRGB, label: SampleLabel) -> tuple[ImageRGB, SampleLabel]:
    """Horizontal mirror: columns reversed, box centers reflected about cx=0.5."""
    return mirror_image(img), mirror_label(label)


def adjust_exposure(img: ImageRGB, gain: float) -> ImageRGB:
    """Multiplicative exposure gain on 8-bit values: clamp(round-half-up(v*(1+gain)))."""
    _check_gain(gain)
    arr = img.to_array().astype(np.float64)
    out = np.floor(arr * (1.0 + gain) + 0.5)
    return ImageRGB.from_array(np.clip(out, 0, 255).astype(np.uint8))


def mirror_id(image_id: str) -> str:
    return f"{image_id}#mirror"


def exposure_id(image_id: str, gain: float) -> str:
    return f"{image_id}#exp{gain:+g}"


def source_id(image_id: str) -> str:
    """Source sample id for a (possibly derived) id: everything before the first '#'."""
    return image_id.split("#", 1)[0]


def augment_dataset(manifest: DatasetManifest, opts: AugmentOptions) -> DatasetManifest:
    """Emit each source sample plus its mirrored/exposure copies.

    Derived samples inherit the source's split. Labels are transformed here;
    writing transformed pixels is the CLI's job.
    """
    out = DatasetManifest(class_names=list(manifest.class_names))
    existing = {s.image_id for s in manifest.samples}

    def add(sample: SampleLabel, split: str | None, path: str | None) -> None:
        if any(s.image_id == sample.image_id for s in out.samples):
            raise ValueError(f"augmented id collision: {sample.image_id!r}")
        out.samples.append(sample)
        if split is not None:
            out.split_of[sample.image_id] = split
        if path is not None:
            out.paths[sample.image_id] = path

    for sample in manifest.samples:
        split = manifest.split_of.get(sample.image_id)
        path = manifest.paths.get(sample.image_id)
        add(sample, split, path)
        if opts.mirror:
            new_id = mirror_id(sample.image_id)
            if new_id in existing:
                raise ValueError(f"augmented id collision: {new_id!r}")
            add(replace(mirror_label(sample), image_id=new_id), split, None)
        for gain in opts.exposure_gains:
            new_id = exposure_id(sample.image_id, gain)
            if new_id in existing:
                raise ValueError(f"augmented id collision: {new_id!r}")
            add(replace(sample, image_id=new_id), split, None)
    return out


# -- splitting ---------------------------------------------------------------


def split_dataset(
    manifest: DatasetManifest, counts: tuple[int, int, int], seed: int
) -> DatasetManifest:
    """Assign samples to train/val/test with the exact requested counts.

    Samples sharing a source id (augmented copies) are kept together:
    source groups are shuffled with the seeded generator and assigned
    whole-group, first-fit, in train -> val -> test order.
    """
    if len(counts) != 3 or any(c < 0 for c in counts):
        raise SplitError(f"counts must be three non-negative integers, got {counts}")
    total = sum(counts)
    if total != len(manifest.samples):
        raise SplitError(f"counts sum to {total}, expected {len(manifest.samples)} samples")

    groups: dict[str, list[str]] = {}
    for sample in manifest.samples:
        groups.setdefault(source_id(sample.image_id), []).append(sample.image_id)

    keys = sorted(groups)
    random.Random(seed).shuffle(keys)

    remaining = list(counts)
    split_of: dict[str, str] = {}
    for key in keys:
        members = groups[key]
        for idx, name in enumerate(SPLIT_NAMES):
            if remaining[idx] >= len(members):
                remaining[idx] -= len(members)
                for image_id in members:
                    split_of[image_id] = name
                break
        else:
            raise SplitError(
                f"counts {tuple(counts)} not achievable with source group {key!r} "
                f"of size {len(members)} (remaining {tuple(remaining)})"
            )

    return DatasetManifest(
        samples=list(manifest.samples),
        split_of=split_of,
        class_names=list(manifest.class_names),
        paths=dict(manifest.paths),
    )


def iterations_per_epoch(n_samples: int, batch_size: int) -> int:
    """Weight updates per full pass: ceil(n_samples / batch_size)."""
    if n_samples <= 0:
        raise ValueError(f"n_samples must be positive, got {n_samples}")
    if batch_size <= 0:
        raise ValueError(f"batch_size must be positive, got {batch_size}")
    return math.ceil(n_samples / batch_size)


# -- manifest files ----------------------------------------------------------


def save_manifest(manifest: DatasetManifest, path: Path) -> None:
    """Write the JSONL manifest plus the classes.txt sidecar."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for sample in manifest.samples:
            record = {
                "id": sample.image_id,
                "path": manifest.paths.get(sample.image_id, ""),
                "width": sample.image_w,
                "height": sample.image_h,
                "split": manifest.split_of.get(sample.image_id),
            }
            fh.write(json.dumps(record) + "\n")
    classes = path.parent / "classes.txt"
    classes.write_text("".join(f"{name}\n" for name in manifest.class_names), encoding="utf-8")


def load_manifest(path: Path, load_labels: bool = True) -> DatasetManifest:
    """Read a JSONL manifest; label files are looked up next to each image path."""
    path = Path(path)
    manifest = DatasetManifest()
    classes = path.parent / "classes.txt"
    if classes.exists():
        manifest.class_names = [
            line.strip() for line in classes.read_text(encoding="utf-8").splitlines() if line.strip()
        ]
    with path.open("r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                image_id = record["id"]
                width = int(record["width"])
                height = int(record["height"])
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{line_no}: bad manifest record: {exc}") from None
            boxes: list[YoloBox] = []
            rel_path = record.get("path") or ""
            if load_labels and rel_path:
                label_path = (path.parent / rel_path).with_suffix(".txt")
                if label_path.exists():
                    boxes = parse_label_file(
                        label_path.read_text(encoding="utf-8"), width, height
                    )
            manifest.samples.append(
                SampleLabel(image_id=image_id, image_w=width, image_h=height, boxes=tuple(boxes))
            )
            if rel_path:
                manifest.paths[image_id] = rel_path
            if record.get("split"):
                manifest.split_of[image_id] = record["split"]
    manifest.validate()
    return manifest
