"""Detection metric tests: matching, AP, operating points, JSONL interchange."""

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from motionstack.det_metrics import (
    IOU_GRID,
    Detection,
    GroundTruth,
    ap_101,
    average_precision,
    evaluate,
    f1_operating_point,
    iou,
    load_detections_jsonl,
    load_ground_truth_jsonl,
    match_detections,
    score_order,
    write_detections_jsonl,
    write_ground_truth_jsonl,
)
from motionstack.errors import DataValidationError

int_boxes = st.builds(
    lambda x, y, w, h: (x, y, x + w, y + h),
    st.integers(0, 20),
    st.integers(0, 20),
    st.integers(1, 15),
    st.integers(1, 15),
)


def _random_instance(seed):
    """A small evaluation instance with deliberate score ties and label overlap."""
    import random

    rng = random.Random(seed)
    gts = []
    for _ in range(rng.randint(0, 5)):
        x, y = rng.randint(0, 20), rng.randint(0, 20)
        w, h = rng.randint(1, 10), rng.randint(1, 10)
        gts.append(
            GroundTruth(frame=rng.randint(0, 1), bbox=(x, y, x + w, y + h), label=rng.randint(0, 2))
        )
    dets = []
    for _ in range(rng.randint(0, 7)):
        x, y = rng.randint(0, 20), rng.randint(0, 20)
        w, h = rng.randint(1, 10), rng.randint(1, 10)
        dets.append(
            Detection(
                frame=rng.randint(0, 1),
                bbox=(x, y, x + w, y + h),
                score=rng.choice([0.2, 0.4, 0.4, 0.6, 0.8, 1.0]),
                label=rng.randint(0, 2),
            )
        )
    return dets, gts


class TestIou:
    @settings(max_examples=80, deadline=None)
    @given(int_boxes, int_boxes)
    def test_symmetric_and_bounded(self, a, b):
        value = iou(a, b)
        assert value == iou(b, a)
        assert 0.0 <= value <= 1.0

    @settings(max_examples=40, deadline=None)
    @given(int_boxes)
    def test_self_iou_is_one(self, a):
        assert iou(a, a) == 1.0

    def test_disjoint_and_touching(self):
        assert iou((0, 0, 10, 10), (10, 0, 20, 10)) == 0.0  # shared edge, zero-area overlap
        assert iou((0, 0, 10, 10), (30, 30, 40, 40)) == 0.0

    def test_exact_rational_value(self):
        # inter 75, union 125: every operand is exactly representable.
        assert iou((0, 0, 10, 10), (0, 2.5, 10, 12.5)) == 0.6

    def test_grid(self):
        assert IOU_GRID == (0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95)


class TestScoreOrder:
    def test_descending_with_frame_then_position_ties(self):
        dets = [
            Detection(frame=3, bbox=(0, 0, 1, 1), score=0.5, label=0),
            Detection(frame=1, bbox=(0, 0, 1, 1), score=0.5, label=0),
            Detection(frame=1, bbox=(0, 0, 1, 1), score=0.9, label=0),
            Detection(frame=1, bbox=(0, 0, 1, 1), score=0.5, label=0),
        ]
        assert score_order(dets) == [2, 1, 3, 0]

    def test_matches_selection_oracle(self):
        for seed in range(20):
            dets, _ = _random_instance(seed)
            assert score_order(dets) == oracles.selection_order(dets)


class TestMatching:
    def test_hand_case(self):
        gts = [
            GroundTruth(frame=0, bbox=(0, 0, 10, 10), label=0),
            GroundTruth(frame=0, bbox=(20, 0, 30, 10), label=0),
        ]
        dets = [
            Detection(frame=0, bbox=(0, 0, 10, 10), score=0.9, label=0),
            Detection(frame=0, bbox=(0, 0, 10, 10), score=0.8, label=0),
            Detection(frame=0, bbox=(19, 0, 29, 10), score=0.7, label=0),
        ]
        result = match_detections(dets, gts, 0.5)
        assert result.order == [0, 1, 2]
        assert result.flags == [True, False, True]
        assert result.matched_gt == [0, None, 1]
        assert result.fn_by_frame == {}

    def test_iou_tie_prefers_earliest_ground_truth(self):
        gts = [
            GroundTruth(frame=0, bbox=(0, 0, 10, 10), label=0),
            GroundTruth(frame=0, bbox=(0, 0, 10, 10), label=0),
        ]
        dets = [Detection(frame=0, bbox=(0, 0, 10, 10), score=1.0, label=0)]
        result = match_detections(dets, gts, 0.5)
        assert result.matched_gt == [0]
        assert result.fn_by_frame == {0: 1}

    def test_threshold_is_inclusive(self):
        gts = [GroundTruth(frame=0, bbox=(0, 0, 10, 10), label=0)]
        dets = [Detection(frame=0, bbox=(0, 2.5, 10, 12.5), score=1.0, label=0)]  # IoU 0.6 exactly
        assert match_detections(dets, gts, 0.6).flags == [True]
        assert match_detections(dets, gts, 0.6000000001).flags == [False]

    def test_frame_and_class_isolation(self):
        gts = [GroundTruth(frame=0, bbox=(0, 0, 10, 10), label=0)]
        wrong_frame = [Detection(frame=1, bbox=(0, 0, 10, 10), score=1.0, label=0)]
        wrong_class = [Detection(frame=0, bbox=(0, 0, 10, 10), score=1.0, label=1)]
        assert match_detections(wrong_frame, gts, 0.5).flags == [False]
        assert match_detections(wrong_class, gts, 0.5).flags == [False]

    def test_matches_scan_oracle(self):
        for seed in range(40):
            dets, gts = _random_instance(seed)
            for thr in (0.3, 0.5, 0.75):
                result = match_detections(dets, gts, thr)
                assert result.flags == oracles.greedy_flags(dets, gts, thr)


class TestAp101:
    def test_empty_ground_truth(self):
        assert ap_101([], 0) == 0.0
        assert ap_101([False, False], 0) == 0.0

    def test_perfect_run(self):
        assert ap_101([True, True, True], 3) == 1.0

    def test_no_true_positives(self):
        assert ap_101([False] * 5, 3) == 0.0

    def test_matches_textbook_oracle_bitwise(self):
        import random

        rng = random.Random(0)
        for _ in range(100):
            num_gt = rng.randint(1, 8)
            flags = [rng.random() < 0.5 for _ in range(rng.randint(0, 12))]
            while sum(flags) > num_gt:
                flags[flags.index(True)] = False
            assert ap_101(flags, num_gt) == oracles.interp_ap_101(flags, num_gt)

    def test_average_precision_wrapper(self):
        dets, gts = _random_instance(5)
        label_dets = [d for d in dets if d.label == 0]
        label_gts = [g for g in gts if g.label == 0]
        want = oracles.interp_ap_101(
            oracles.greedy_flags(label_dets, label_gts, 0.5), len(label_gts)
        )
        assert average_precision(label_dets, label_gts, 0.5) == want


class TestF1OperatingPoint:
    def test_tie_keeps_shortest_prefix(self):
        # Flags [T, F, F, T] with 2 ground truths: F1 is 2/3 at k=1 and k=4.
        gts = [
            GroundTruth(frame=0, bbox=(0, 0, 10, 10), label=0),
            GroundTruth(frame=0, bbox=(50, 0, 60, 10), label=0),
        ]
        dets = [
            Detection(frame=0, bbox=(0, 0, 10, 10), score=0.9, label=0),
            Detection(frame=0, bbox=(100, 0, 110, 10), score=0.8, label=0),
            Detection(frame=0, bbox=(100, 20, 110, 30), score=0.7, label=0),
            Detection(frame=0, bbox=(50, 0, 60, 10), score=0.6, label=0),
        ]
        point = f1_operating_point(dets, gts)
        assert point["k"] == 1
        assert point["precision"] == 1.0
        assert point["recall"] == 0.5
        assert point["score_threshold"] == 0.9

    def test_empty_detections(self):
        gts = [GroundTruth(frame=0, bbox=(0, 0, 1, 1), label=0)]
        point = f1_operating_point([], gts)
        assert point == {
            "k": 0,
            "precision": 0.0,
            "recall": 0.0,
            "f1": 0.0,
            "score_threshold": None,
        }

    def test_matches_prefix_oracle(self):
        for seed in range(30):
            dets, gts = _random_instance(seed)
            got = f1_operating_point(dets, gts, 0.5)
            want = oracles.best_f1_prefix(dets, gts, 0.5)
            assert {key: got[key] for key in want} == want


class TestEvaluate:
    def test_matches_oracle_mirror_exactly(self):
        for seed in range(60):
            dets, gts = _random_instance(seed)
            report = evaluate(dets, gts)
            want = oracles.evaluate_oracle(dets, gts, IOU_GRID)
            assert report["ap_per_threshold"] == want["ap_per_threshold"]
            assert report["map50"] == want["map50"]
            assert report["map5095"] == want["map5095"]
            assert report["precision"] == want["precision"]
            assert report["recall"] == want["recall"]
            assert set(report["per_class"]) == set(want["per_class"])
            for key, sweep in want["per_class"].items():
                assert report["per_class"][key]["ap_per_threshold"] == sweep

    def test_perfect_detections_score_one(self):
        gts = [
            GroundTruth(frame=f, bbox=(10 * f, 0, 10 * f + 5, 5), label=f % 2) for f in range(4)
        ]
        dets = [Detection(frame=g.frame, bbox=g.bbox, score=1.0, label=g.label) for g in gts]
        report = evaluate(dets, gts)
        assert report["map50"] == 1.0
        assert report["map5095"] == 1.0
        assert report["precision"] == 1.0
        assert report["recall"] == 1.0
        assert all(value == 1.0 for value in report["ap_per_threshold"])

    def test_detection_only_class_scores_zero_but_counts(self):
        gts = [GroundTruth(frame=0, bbox=(0, 0, 10, 10), label=0)]
        dets = [
            Detection(frame=0, bbox=(0, 0, 10, 10), score=0.9, label=0),
            Detection(frame=0, bbox=(0, 0, 10, 10), score=0.8, label=7),
        ]
        report = evaluate(dets, gts)
        assert set(report["per_class"]) == {"0", "7"}
        assert report["per_class"]["7"]["ap_per_threshold"] == [0.0] * 10
        assert report["per_class"]["7"]["num_gt"] == 0
        assert report["map50"] == 0.5  # class 0 at 1.0, class 7 at 0.0

    def test_empty_inputs(self):
        report = evaluate([], [])
        assert report["ap_per_threshold"] == [0.0] * 10
        assert report["map50"] == 0.0
        assert report["map5095"] == 0.0
        assert report["per_class"] == {}
        assert report["num_detections"] == 0
        assert report["num_ground_truth"] == 0

    def test_report_is_json_ready(self):
        dets, gts = _random_instance(3)
        report = evaluate(dets, gts)
        assert json.loads(json.dumps(report)) == report


class TestJsonl:
    def test_round_trip(self, tmp_path):
        dets, gts = _random_instance(9)
        det_path = tmp_path / "dets.jsonl"
        gt_path = tmp_path / "gt.jsonl"
        write_detections_jsonl(dets, det_path)
        write_ground_truth_jsonl(gts, gt_path)
        assert load_detections_jsonl(det_path) == [
            Detection(d.frame, tuple(float(v) for v in d.bbox), d.score, d.label) for d in dets
        ]
        assert load_ground_truth_jsonl(gt_path) == [
            GroundTruth(g.frame, tuple(float(v) for v in g.bbox), g.label) for g in gts
        ]

    def test_wire_key_is_class(self, tmp_path):
        path = tmp_path / "dets.jsonl"
        write_detections_jsonl([Detection(frame=0, bbox=(0, 0, 1, 1), score=0.5, label=3)], path)
        record = json.loads(path.read_text().splitlines()[0])
        assert record["class"] == 3
        assert "label" not in record

    def test_blank_lines_skipped(self, tmp_path):
        path = tmp_path / "gt.jsonl"
        path.write_text('\n{"frame": 0, "bbox": [0, 0, 1, 1], "class": 0}\n\n')
        assert len(load_ground_truth_jsonl(path)) == 1

    def test_errors_carry_line_numbers(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"frame": 0, "bbox": [0, 0, 1, 1], "class": 0}\nnot json\n')
        with pytest.raises(DataValidationError, match=r"bad\.jsonl:2: invalid JSON"):
            load_ground_truth_jsonl(path)

    @pytest.mark.parametrize(
        "line,pattern",
        [
            ('[1, 2]', "expected an object"),
            ('{"frame": 0, "bbox": [0, 0, 1, 1]}', "missing 'class'"),
            ('{"frame": 0, "bbox": [0, 0, 1, 1], "class": true}', "class must be an integer"),
            ('{"frame": 0.5, "bbox": [0, 0, 1, 1], "class": 0}', "frame must be an integer"),
            ('{"frame": 0, "bbox": [0, 0, 1], "class": 0}', r"bbox must be \[x1, y1, x2, y2\]"),
            ('{"frame": 0, "bbox": [0, 0, "a", 1], "class": 0}', "non-numeric bbox"),
            ('{"frame": 0, "bbox": [0, 0, Infinity, 1], "class": 0}', "non-finite bbox"),
            ('{"frame": 0, "bbox": [5, 0, 5, 1], "class": 0}', "x2 > x1"),
            ('{"frame": 0, "bbox": [0, 3, 1, 2], "class": 0}', "y2 > y1"),
        ],
    )
    def test_ground_truth_validation(self, tmp_path, line, pattern):
        path = tmp_path / "gt.jsonl"
        path.write_text(line + "\n")
        with pytest.raises(DataValidationError, match=pattern):
            load_ground_truth_jsonl(path)

    @pytest.mark.parametrize(
        "line,pattern",
        [
            ('{"frame": 0, "bbox": [0, 0, 1, 1], "class": 0}', "score must be a finite number"),
            (
                '{"frame": 0, "bbox": [0, 0, 1, 1], "score": 1.5, "class": 0}',
                r"score must lie in \[0, 1\]",
            ),
            (
                '{"frame": 0, "bbox": [0, 0, 1, 1], "score": true, "class": 0}',
                "score must be a finite number",
            ),
            (
                '{"frame": 0, "bbox": [0, 0, 1, 1], "score": NaN, "class": 0}',
                "score must be a finite number",
            ),
        ],
    )
    def test_detection_validation(self, tmp_path, line, pattern):
        path = tmp_path / "dets.jsonl"
        path.write_text(line + "\n")
        with pytest.raises(DataValidationError, match=pattern):
            load_detections_jsonl(path)
