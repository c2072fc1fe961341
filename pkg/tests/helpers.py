"""Shared random generators for geometry and evaluation tests."""

from __future__ import annotations

import random

from smokewatch.geometry import BoxXYXY, Detection


def random_box(rng: random.Random, extent: float = 640.0, min_size: float = 4.0) -> BoxXYXY:
    x1 = rng.uniform(0.0, extent - min_size)
    y1 = rng.uniform(0.0, extent - min_size)
    w = rng.uniform(min_size, extent - x1)
    h = rng.uniform(min_size, extent - y1)
    return BoxXYXY(x1, y1, x1 + w, y1 + h)


def integer_box(rng: random.Random, extent: int = 1000) -> BoxXYXY:
    x1 = rng.randint(0, extent - 1)
    y1 = rng.randint(0, extent - 1)
    x2 = rng.randint(x1 + 1, extent)
    y2 = rng.randint(y1 + 1, extent)
    return BoxXYXY(float(x1), float(y1), float(x2), float(y2))


def jitter_box(rng: random.Random, box: BoxXYXY, extent: float = 640.0) -> BoxXYXY:
    w = box.x2 - box.x1
    h = box.y2 - box.y1
    dx = rng.uniform(-0.3, 0.3) * w
    dy = rng.uniform(-0.3, 0.3) * h
    sw = rng.uniform(0.7, 1.3)
    sh = rng.uniform(0.7, 1.3)
    x1 = min(max(box.x1 + dx, 0.0), extent - 1.0)
    y1 = min(max(box.y1 + dy, 0.0), extent - 1.0)
    x2 = min(max(x1 + w * sw, x1 + 1.0), extent)
    y2 = min(max(y1 + h * sh, y1 + 1.0), extent)
    return BoxXYXY(x1, y1, x2, y2)


def random_detections(
    rng: random.Random, n: int, classes: tuple[int, ...] = (0,), extent: float = 640.0
) -> list[Detection]:
    return [
        Detection(
            box=random_box(rng, extent),
            class_id=rng.choice(classes),
            confidence=round(rng.random(), 3),
        )
        for _ in range(n)
    ]


def random_scene(
    rng: random.Random,
    n_images: int = 20,
    max_gt: int = 5,
    max_preds: int = 8,
    classes: tuple[int, ...] = (0,),
):
    """One synthetic evaluation scene: per-image truths and predictions.

    Predictions are a mix of jittered copies of truths (so true positives
    occur) and unrelated boxes; confidences are rounded to 3 decimals to
    exercise tie handling.
    """
    truths: dict[str, list[tuple[BoxXYXY, int]]] = {}
    preds: dict[str, list[Detection]] = {}
    for i in range(n_images):
        image_id = f"img{i:03d}"
        gts = [
            (random_box(rng), rng.choice(classes)) for _ in range(rng.randint(0, max_gt))
        ]
        dets: list[Detection] = []
        for _ in range(rng.randint(0, max_preds)):
            if gts and rng.random() < 0.6:
                base, cls = gts[rng.randrange(len(gts))]
                box = jitter_box(rng, base)
            else:
                box = random_box(rng)
                cls = rng.choice(classes)
            dets.append(Detection(box=box, class_id=cls, confidence=round(rng.random(), 3)))
        truths[image_id] = gts
        preds[image_id] = dets
    return preds, truths
