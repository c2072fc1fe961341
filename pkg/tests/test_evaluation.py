import random

import pytest

from smokewatch.evaluation import (
    MatchOutcome,
    average_precision,
    evaluate,
    f1,
    f1_curve,
    match_detections,
    pr_curve,
)
from smokewatch.geometry import BoxXYXY, Detection

from helpers import random_scene
from oracles import brute_best_f1, brute_evaluate, brute_f1_at, brute_match

TRUTH_BOX = BoxXYXY(0, 0, 10, 10)


def det(conf: float, box: BoxXYXY = TRUTH_BOX, cls: int = 0) -> Detection:
    return Detection(box=box, class_id=cls, confidence=conf)


def outcome(conf: float, tp: bool, image_id: str = "img", cls: int = 0) -> MatchOutcome:
    return MatchOutcome(
        image_id=image_id,
        class_id=cls,
        confidence=conf,
        box=TRUTH_BOX,
        is_tp=tp,
        truth_index=0 if tp else None,
    )


class TestMatching:
    def test_perfect_match(self):
        outcomes = match_detections({"img": [det(0.9)]}, {"img": [(TRUTH_BOX, 0)]}, 0.5)
        assert len(outcomes) == 1
        assert outcomes[0].is_tp and outcomes[0].truth_index == 0

    def test_no_predictions(self):
        outcomes = match_detections({}, {"img": [(TRUTH_BOX, 0), (BoxXYXY(20, 20, 30, 30), 0)]}, 0.5)
        assert outcomes == []

    def test_greedy_order_beats_better_iou(self):
        # Higher-confidence prediction takes the truth first even though the
        # lower-confidence one overlaps it more.
        pred_a = det(0.9, BoxXYXY(0, 0, 10, 6))  # IoU 0.6
        pred_b = det(0.8, BoxXYXY(0, 0, 10, 9))  # IoU 0.9
        outcomes = match_detections({"img": [pred_a, pred_b]}, {"img": [(TRUTH_BOX, 0)]}, 0.5)
        by_conf = {o.confidence: o.is_tp for o in outcomes}
        assert by_conf[0.9] is True
        assert by_conf[0.8] is False

    def test_class_mismatch_is_fp(self):
        outcomes = match_detections({"img": [det(0.9, cls=1)]}, {"img": [(TRUTH_BOX, 0)]}, 0.5)
        assert not outcomes[0].is_tp

    def test_each_truth_matched_once(self):
        preds = {"img": [det(0.9), det(0.8), det(0.7)]}
        outcomes = match_detections(preds, {"img": [(TRUTH_BOX, 0)]}, 0.5)
        assert sum(o.is_tp for o in outcomes) == 1

    def test_matches_brute_oracle(self):
        rng = random.Random(53)
        for _ in range(50):
            preds, truths = random_scene(rng, n_images=6, classes=(0, 1))
            got = match_detections(preds, truths, 0.5)
            want = brute_match(preds, truths, 0.5)
            assert len(got) == len(want)
            for g, w in zip(got, want):
                assert (g.image_id, g.class_id, g.confidence, g.is_tp, g.truth_index) == (
                    w["image_id"],
                    w["class_id"],
                    w["confidence"],
                    w["tp"],
                    w["truth_index"],
                )

    def test_rejects_bad_threshold(self):
        with pytest.raises(ValueError):
            match_detections({}, {}, 0.0)


class TestPRCurve:
    def test_single_tp(self):
        curve = pr_curve([outcome(0.9, True)], total_gt=1)
        assert curve.points[0].recall == 1.0
        assert curve.points[0].precision == 1.0

    def test_all_fp(self):
        curve = pr_curve([outcome(0.9, False), outcome(0.8, False)], total_gt=1)
        assert all(p.precision == 0.0 for p in curve.points)

    def test_prefix_arithmetic(self):
        curve = pr_curve(
            [outcome(0.9, True), outcome(0.8, False), outcome(0.7, True)], total_gt=2
        )
        got = [(p.recall, p.precision) for p in curve.points]
        assert got == [(0.5, 1.0), (0.5, 0.5), (1.0, 2 / 3)]

    def test_empty(self):
        curve = pr_curve([], total_gt=0)
        assert curve.points == ()

    def test_recalls_non_decreasing(self):
        rng = random.Random(61)
        outcomes = [outcome(round(rng.random(), 2), rng.random() < 0.5) for _ in range(50)]
        curve = pr_curve(outcomes, total_gt=30)
        recalls = [p.recall for p in curve.points]
        assert recalls == sorted(recalls)


class TestAveragePrecision:
    def test_perfect(self):
        assert average_precision(pr_curve([outcome(0.9, True)], 1)) == 1.0

    def test_all_wrong(self):
        assert average_precision(pr_curve([outcome(0.9, False)], 1)) == 0.0

    def test_envelope_case(self):
        curve = pr_curve(
            [outcome(0.9, True), outcome(0.8, False), outcome(0.7, True)], total_gt=2
        )
        assert average_precision(curve) == pytest.approx(5 / 6, abs=1e-12)

    def test_monotone_confidence_rescale_invariant(self):
        rng = random.Random(67)
        outcomes = [outcome(round(rng.random(), 3), rng.random() < 0.4) for _ in range(80)]
        base = average_precision(pr_curve(outcomes, 40))
        rescaled = [
            MatchOutcome(o.image_id, o.class_id, o.confidence**3 * 0.5, o.box, o.is_tp, o.truth_index)
            for o in outcomes
        ]
        assert average_precision(pr_curve(rescaled, 40)) == pytest.approx(base, abs=1e-12)

    def test_trailing_fp_never_increases_ap(self):
        rng = random.Random(71)
        outcomes = [outcome(round(rng.uniform(0.3, 1.0), 3), rng.random() < 0.5) for _ in range(30)]
        base = average_precision(pr_curve(outcomes, 20))
        extended = outcomes + [outcome(0.01, False)]
        assert average_precision(pr_curve(extended, 20)) <= base + 1e-15


class TestF1:
    def test_equal_inputs(self):
        for x in (0.0, 0.25, 0.5, 1.0):
            assert f1(x, x) == pytest.approx(x, abs=1e-15)

    def test_degenerate(self):
        assert f1(0.0, 0.0) == 0.0

    def test_hand_value(self):
        assert f1(0.8, 0.6) == pytest.approx(2 * 0.48 / 1.4, abs=1e-12)

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            f1(1.2, 0.5)


class TestF1Curve:
    def test_single_correct_prediction(self):
        curve = f1_curve({"img": [det(0.7)]}, {"img": [(TRUTH_BOX, 0)]}, 0.5)
        best_t, best_f = curve.best
        assert best_f == 1.0
        assert best_t <= 0.7

    def test_no_predictions(self):
        curve = f1_curve({}, {"img": [(TRUTH_BOX, 0)]}, 0.5)
        assert curve.best == (0.0, 0.0)

    def test_scripted_fixture_matches_enumeration(self):
        # 6 predictions over 4 ground truths across two images.
        truths = {
            "a": [(BoxXYXY(0, 0, 10, 10), 0), (BoxXYXY(30, 30, 40, 40), 0)],
            "b": [(BoxXYXY(0, 0, 20, 20), 0), (BoxXYXY(50, 50, 70, 70), 0)],
        }
        preds = {
            "a": [
                det(0.95, BoxXYXY(0, 0, 10, 10)),
                det(0.60, BoxXYXY(31, 30, 41, 40)),
                det(0.55, BoxXYXY(100, 100, 110, 110)),
            ],
            "b": [
                det(0.80, BoxXYXY(1, 0, 21, 20)),
                det(0.40, BoxXYXY(50, 50, 70, 70)),
                det(0.30, BoxXYXY(200, 200, 220, 220)),
            ],
        }
        curve = f1_curve(preds, truths, 0.5)
        confs = {d.confidence for dets in preds.values() for d in dets}
        want = brute_best_f1(preds, truths, 0.5, {0.0} | confs)
        assert curve.best == want

    def test_every_point_matches_rematching(self):
        rng = random.Random(73)
        for _ in range(20):
            preds, truths = random_scene(rng, n_images=5)
            curve = f1_curve(preds, truths, 0.5)
            for point in curve.points:
                assert point.f1 == brute_f1_at(preds, truths, 0.5, point.threshold)

    def test_points_sorted_by_threshold(self):
        rng = random.Random(79)
        preds, truths = random_scene(rng, n_images=4)
        curve = f1_curve(preds, truths, 0.5)
        ts = [p.threshold for p in curve.points]
        assert ts == sorted(ts)
        assert ts[0] == 0.0


class TestEvaluate:
    def test_perfect_detector(self):
        truths = {"img": [(TRUTH_BOX, 0), (BoxXYXY(50, 50, 80, 80), 0)]}
        preds = {"img": [det(0.9), det(0.8, BoxXYXY(50, 50, 80, 80))]}
        report = evaluate(preds, truths)
        assert report.mean_ap == 1.0
        assert report.f1_curve.best[1] == 1.0
        assert report.counts.tps == 2 and report.counts.fps == 0

    def test_single_class_map_equals_ap(self):
        rng = random.Random(83)
        preds, truths = random_scene(rng, n_images=8)
        report = evaluate(preds, truths)
        if report.per_class_ap:
            assert report.mean_ap == report.per_class_ap[0]

    def test_matches_brute_oracle_small(self):
        rng = random.Random(89)
        for _ in range(30):
            preds, truths = random_scene(rng, n_images=10, classes=(0, 1))
            report = evaluate(preds, truths, 0.5)
            per_class, mean_ap, tps, fps = brute_evaluate(preds, truths, 0.5)
            assert report.counts.tps == tps
            assert report.counts.fps == fps
            assert report.mean_ap == pytest.approx(mean_ap, abs=1e-9)
            for cls, ap in per_class.items():
                assert report.per_class_ap[cls] == pytest.approx(ap, abs=1e-9)

    def test_class_without_gt_excluded_from_map(self):
        truths = {"img": [(TRUTH_BOX, 0)]}
        preds = {"img": [det(0.9), det(0.8, cls=7)]}  # class 7 has no ground truth
        report = evaluate(preds, truths)
        assert set(report.per_class_ap) == {0}
        assert report.counts.fps == 1
