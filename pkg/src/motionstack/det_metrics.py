"""Detection quality metrics: greedy matching, interpolated AP, operating points.

Detections and ground truth travel as JSON Lines, one object per line:

* detections:   ``{"frame": int, "bbox": [x1, y1, x2, y2], "score": float, "class": label}``
* ground truth: ``{"frame": int, "bbox": [x1, y1, x2, y2], "class": label}``

Matching is the usual greedy sweep: detections ordered by descending score
(ties by frame, then input order), each one claiming the not-yet-matched
ground-truth box of the same frame and class with the highest IoU, provided
that IoU clears the threshold. Average precision is 101-point interpolated
(recall grid 0.00, 0.01, ..., 1.00 with the monotone precision envelope),
and the headline number averages AP over IoU thresholds 0.50 to 0.95 in
steps of 0.05. The operating point picks the score cutoff maximizing F1,
preferring the shortest prefix on ties.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from math import isfinite
from pathlib import Path
from typing import Any, Iterable, Sequence

from .errors import DataValidationError

IOU_GRID = tuple((50 + 5 * i) / 100.0 for i in range(10))


@dataclass(frozen=True)
class Detection:
    frame: int
    bbox: tuple[float, float, float, float]
    score: float
    label: int


@dataclass(frozen=True)
class GroundTruth:
    frame: int
    bbox: tuple[float, float, float, float]
    label: int


def _check_bbox(raw: Any, where: str) -> tuple[float, float, float, float]:
    if not isinstance(raw, (list, tuple)) or len(raw) != 4:
        raise DataValidationError(f"{where}: bbox must be [x1, y1, x2, y2], got {raw!r}")
    try:
        x1, y1, x2, y2 = (float(v) for v in raw)
    except (TypeError, ValueError):
        raise DataValidationError(f"{where}: non-numeric bbox {raw!r}") from None
    if not all(isfinite(v) for v in (x1, y1, x2, y2)):
        raise DataValidationError(f"{where}: non-finite bbox {raw!r}")
    if x2 <= x1 or y2 <= y1:
        raise DataValidationError(f"{where}: bbox must satisfy x2 > x1 and y2 > y1, got {raw!r}")
    return (x1, y1, x2, y2)


def _check_frame(raw: Any, where: str) -> int:
    if not isinstance(raw, int) or isinstance(raw, bool):
        raise DataValidationError(f"{where}: frame must be an integer, got {raw!r}")
    return raw


def _check_label(record: dict, where: str) -> int:
    if "class" not in record:
        raise DataValidationError(f"{where}: missing 'class'")
    label = record["class"]
    if not isinstance(label, int) or isinstance(label, bool):
        raise DataValidationError(f"{where}: class must be an integer, got {label!r}")
    return label


def _iter_jsonl(path: str | Path) -> Iterable[tuple[int, dict]]:
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataValidationError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            if not isinstance(record, dict):
                raise DataValidationError(f"{path}:{lineno}: expected an object, got {type(record).__name__}")
            yield lineno, record


def load_detections_jsonl(path: str | Path) -> list[Detection]:
    out = []
    for lineno, record in _iter_jsonl(path):
        where = f"{path}:{lineno}"
        score = record.get("score")
        if not isinstance(score, (int, float)) or isinstance(score, bool) or not isfinite(score):
            raise DataValidationError(f"{where}: score must be a finite number, got {score!r}")
        if not 0.0 <= score <= 1.0:
            raise DataValidationError(f"{where}: score must lie in [0, 1], got {score!r}")
        out.append(
            Detection(
                frame=_check_frame(record.get("frame"), where),
                bbox=_check_bbox(record.get("bbox"), where),
                score=float(score),
                label=_check_label(record, where),
            )
        )
    return out


def load_ground_truth_jsonl(path: str | Path) -> list[GroundTruth]:
    out = []
    for lineno, record in _iter_jsonl(path):
        where = f"{path}:{lineno}"
        out.append(
            GroundTruth(
                frame=_check_frame(record.get("frame"), where),
                bbox=_check_bbox(record.get("bbox"), where),
                label=_check_label(record, where),
            )
        )
    return out


def write_detections_jsonl(dets: Iterable[Detection], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for d in dets:
            fh.write(
                json.dumps(
                    {"frame": d.frame, "bbox": list(d.bbox), "score": d.score, "class": d.label}
                )
                + "\n"
            )


def write_ground_truth_jsonl(gts: Iterable[GroundTruth], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for g in gts:
            fh.write(json.dumps({"frame": g.frame, "bbox": list(g.bbox), "class": g.label}) + "\n")


def iou(a: Sequence[float], b: Sequence[float]) -> float:
    """Intersection over union of two [x1, y1, x2, y2] boxes; 0.0 when the union is empty."""
    ix = min(a[2], b[2]) - max(a[0], b[0])
    iy = min(a[3], b[3]) - max(a[1], b[1])
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter
    if union <= 0:
        return 0.0
    return inter / union


def score_order(dets: Sequence[Detection]) -> list[int]:
    """Evaluation order: descending score, ties by (frame, input position)."""
    return sorted(range(len(dets)), key=lambda i: (-dets[i].score, dets[i].frame, i))


@dataclass
class MatchResult:
    """Greedy matching outcome, aligned with ``order``."""

    order: list[int]           # detection indices in evaluation order
    flags: list[bool]          # True where the detection matched a ground-truth box
    matched_gt: list[int | None]  # index of the claimed ground-truth box, or None
    fn_by_frame: dict[int, int]   # unmatched ground-truth boxes per frame


def match_detections(
    dets: Sequence[Detection], gts: Sequence[GroundTruth], iou_threshold: float
) -> MatchResult:
    """Greedily assign detections to ground truth at one IoU threshold.

    A detection may only claim an unmatched box from its own frame and class,
    takes the highest-IoU candidate, and on IoU ties the earliest box in
    input order wins.
    """
    by_slot: dict[tuple[int, int], list[int]] = {}
    for j, g in enumerate(gts):
        by_slot.setdefault((g.frame, g.label), []).append(j)

    order = score_order(dets)
    taken = [False] * len(gts)
    flags: list[bool] = []
    matched: list[int | None] = []
    for i in order:
        d = dets[i]
        best_j = None
        best_iou = 0.0
        for j in by_slot.get((d.frame, d.label), ()):
            if taken[j]:
                continue
            value = iou(d.bbox, gts[j].bbox)
            if value >= iou_threshold and value > best_iou:
                best_iou = value
                best_j = j
        if best_j is None:
            flags.append(False)
            matched.append(None)
        else:
            taken[best_j] = True
            flags.append(True)
            matched.append(best_j)

    fn_by_frame: dict[int, int] = {}
    for j, g in enumerate(gts):
        if not taken[j]:
            fn_by_frame[g.frame] = fn_by_frame.get(g.frame, 0) + 1
    return MatchResult(order=order, flags=flags, matched_gt=matched, fn_by_frame=fn_by_frame)


def ap_101(flags: Sequence[bool], num_gt: int) -> float:
    """101-point interpolated average precision from ordered match flags."""
    if num_gt <= 0:
        return 0.0
    recalls: list[float] = []
    precisions: list[float] = []
    tp = 0
    fp = 0
    for is_tp in flags:
        if is_tp:
            tp += 1
        else:
            fp += 1
        recalls.append(tp / num_gt)
        precisions.append(tp / (tp + fp))

    # Monotone envelope: env[i] = best precision at or beyond curve point i.
    env = [0.0] * len(precisions)
    best = 0.0
    for i in range(len(precisions) - 1, -1, -1):
        if precisions[i] > best:
            best = precisions[i]
        env[i] = best

    values: list[float] = []
    j = 0
    for i in range(101):
        r = i / 100.0
        while j < len(recalls) and recalls[j] < r:
            j += 1
        values.append(env[j] if j < len(recalls) else 0.0)
    return sum(values) / 101.0


def average_precision(
    dets: Sequence[Detection], gts: Sequence[GroundTruth], iou_threshold: float
) -> float:
    """AP of one class at one IoU threshold."""
    result = match_detections(dets, gts, iou_threshold)
    return ap_101(result.flags, len(gts))


def f1_operating_point(
    dets: Sequence[Detection], gts: Sequence[GroundTruth], iou_threshold: float = 0.5
) -> dict:
    """Best-F1 score cutoff over the pooled detection list.

    F1 of the length-k prefix is 2*tp/(k + num_gt); ties prefer the shorter
    prefix, and an empty prefix reports precision and recall of 0.
    """
    result = match_detections(dets, gts, iou_threshold)
    num_gt = len(gts)
    best_k = 0
    best_f1 = 0.0
    tp = 0
    for k, is_tp in enumerate(result.flags, start=1):
        if is_tp:
            tp += 1
        denom = k + num_gt
        f1 = 2.0 * tp / denom if denom > 0 else 0.0
        if f1 > best_f1:
            best_f1 = f1
            best_k = k
    tp_at_best = sum(result.flags[:best_k])
    return {
        "k": best_k,
        "precision": tp_at_best / best_k if best_k > 0 else 0.0,
        "recall": tp_at_best / num_gt if num_gt > 0 else 0.0,
        "f1": best_f1,
        "score_threshold": dets[result.order[best_k - 1]].score if best_k > 0 else None,
    }


def evaluate(
    dets: Sequence[Detection],
    gts: Sequence[GroundTruth],
    iou_thresholds: Sequence[float] = IOU_GRID,
    operating_iou: float = 0.5,
) -> dict:
    """Full evaluation summary.

    ``ap_per_threshold[i]`` is the class-mean AP at the i-th IoU threshold,
    so ``map50 == ap_per_threshold[0]`` and ``map5095`` is their mean. The
    class universe is every class appearing in the ground truth or in the
    detections (a class with detections but no ground truth scores 0);
    classes appearing in neither are absent. Top-level precision/recall are
    the best-F1 operating point on the pooled IoU-0.5 matching. Returns
    plain Python types ready for JSON.
    """
    classes = sorted({g.label for g in gts} | {d.label for d in dets})
    per_class: dict[str, dict] = {}
    sweeps: list[list[float]] = []
    for label in classes:
        class_dets = [d for d in dets if d.label == label]
        class_gts = [g for g in gts if g.label == label]
        sweep = [average_precision(class_dets, class_gts, thr) for thr in iou_thresholds]
        per_class[str(label)] = {
            "ap_per_threshold": sweep,
            "ap50": sweep[0] if sweep else 0.0,
            "num_gt": len(class_gts),
            "num_detections": len(class_dets),
        }
        sweeps.append(sweep)

    n_classes = len(classes)
    if n_classes:
        ap_per_threshold = [
            sum(sweep[i] for sweep in sweeps) / n_classes for i in range(len(iou_thresholds))
        ]
    else:
        ap_per_threshold = [0.0] * len(iou_thresholds)
    operating = f1_operating_point(dets, gts, operating_iou)
    return {
        "precision": operating["precision"],
        "recall": operating["recall"],
        "ap_per_threshold": ap_per_threshold,
        "map50": ap_per_threshold[0] if ap_per_threshold else 0.0,
        "map5095": sum(ap_per_threshold) / len(ap_per_threshold) if ap_per_threshold else 0.0,
        "operating_point": operating,
        "per_class": per_class,
        "num_detections": len(dets),
        "num_ground_truth": len(gts),
    }
