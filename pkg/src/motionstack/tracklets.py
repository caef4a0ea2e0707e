"""Tracklet model: per-object box runs over closed frame intervals.

A tracklet is one object's detection run: an integer id, a closed frame
interval [start, end], and one box per frame of the interval (so runs are
contiguous by construction). Tracklets serialize as a single JSON
document::

    {"tracklets": [{"id": 0, "start": 12, "end": 40,
                    "boxes": [[x1, y1, x2, y2], ...],
                    "feature_rows": [5, 6, ...]}, ...]}

with ``boxes`` holding exactly ``end - start + 1`` entries. The optional
``feature_rows`` list maps each frame to a row of an external feature
matrix; when absent, consumers fall back to enumeration order (file order,
frames ascending). Identity maps, used to state which tracklet ids belong
to the same physical object, are::

    {"groups": [[1, 17], [15, 21], ...]}

Two tracklets overlap in time when their closed intervals intersect:
``a.start <= b.end and b.start <= a.end``. Runs shorter than
``MIN_TRACKLET_LEN`` frames are dropped before any mining.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from math import isfinite
from pathlib import Path
from typing import Iterable, Sequence

from .errors import DataValidationError

MIN_TRACKLET_LEN = 16


@dataclass
class Tracklet:
    id: int
    start: int
    end: int
    boxes: list[tuple[float, float, float, float]] = field(repr=False)
    feature_rows: list[int] | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if not isinstance(self.id, int) or self.id < 0:
            raise DataValidationError(f"tracklet id must be a nonnegative integer, got {self.id!r}")
        if self.start > self.end:
            raise DataValidationError(f"tracklet {self.id}: start {self.start} > end {self.end}")
        if len(self.boxes) != len(self):
            raise DataValidationError(
                f"tracklet {self.id}: {len(self.boxes)} boxes for {len(self)} frames"
            )
        if self.feature_rows is not None and len(self.feature_rows) != len(self):
            raise DataValidationError(
                f"tracklet {self.id}: {len(self.feature_rows)} feature rows for {len(self)} frames"
            )

    def __len__(self) -> int:
        return self.end - self.start + 1

    @property
    def frames(self) -> range:
        return range(self.start, self.end + 1)

    def box_at(self, frame: int) -> tuple[float, float, float, float]:
        if not self.start <= frame <= self.end:
            raise DataValidationError(
                f"tracklet {self.id}: frame {frame} outside [{self.start}, {self.end}]"
            )
        return self.boxes[frame - self.start]


def temporal_overlap(a: Tracklet, b: Tracklet) -> bool:
    """Whether the two closed frame intervals share at least one frame."""
    return a.start <= b.end and b.start <= a.end


def filter_min_length(tracklets: Iterable[Tracklet], min_len: int = MIN_TRACKLET_LEN) -> list[Tracklet]:
    """Keep tracklets spanning at least ``min_len`` frames."""
    if min_len < 1:
        raise ValueError(f"min_len must be >= 1, got {min_len}")
    return [t for t in tracklets if len(t) >= min_len]


def overlap_graph(tracklets: Sequence[Tracklet]) -> dict[int, set[int]]:
    """Adjacency by tracklet id: which other tracklets coexist in time.

    Symmetric, no self-edges; exactly the pairs eligible as anchor/negative
    tracklets in triplet mining.
    """
    graph: dict[int, set[int]] = {t.id: set() for t in tracklets}
    for i, a in enumerate(tracklets):
        for b in tracklets[i + 1 :]:
            if temporal_overlap(a, b):
                graph[a.id].add(b.id)
                graph[b.id].add(a.id)
    return graph


def enumerate_keys(tracklets: Sequence[Tracklet]) -> list[tuple[int, int]]:
    """Canonical (id, frame) row order: file order, frames ascending.

    Feature tables stored as [T, D] tensors line their rows up with
    tracklet frames through this enumeration when no explicit
    ``feature_rows`` are given.
    """
    keys: list[tuple[int, int]] = []
    for t in tracklets:
        keys.extend((t.id, f) for f in t.frames)
    return keys


def _check_box(raw, where: str) -> tuple[float, float, float, float]:
    if not isinstance(raw, (list, tuple)) or len(raw) != 4:
        raise DataValidationError(f"{where}: box must be [x1, y1, x2, y2], got {raw!r}")
    try:
        x1, y1, x2, y2 = (float(v) for v in raw)
    except (TypeError, ValueError):
        raise DataValidationError(f"{where}: non-numeric box {raw!r}") from None
    if not all(isfinite(v) for v in (x1, y1, x2, y2)):
        raise DataValidationError(f"{where}: non-finite box {raw!r}")
    if x2 <= x1 or y2 <= y1:
        raise DataValidationError(f"{where}: box must satisfy x2 > x1 and y2 > y1, got {raw!r}")
    return (x1, y1, x2, y2)


def _require_int(value, where: str) -> int:
    if not isinstance(value, int) or isinstance(value, bool):
        raise DataValidationError(f"{where}: expected an integer, got {value!r}")
    return value


def load_tracklets_json(path: str | Path) -> list[Tracklet]:
    """Read and validate a tracklet document; ids must be unique."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataValidationError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("tracklets"), list):
        raise DataValidationError(f"{path}: expected an object with a 'tracklets' list")
    out: list[Tracklet] = []
    seen: set[int] = set()
    for pos, entry in enumerate(doc["tracklets"]):
        where = f"{path}: tracklets[{pos}]"
        if not isinstance(entry, dict):
            raise DataValidationError(f"{where}: expected an object")
        tid = _require_int(entry.get("id"), f"{where}.id")
        if tid in seen:
            raise DataValidationError(f"{where}: duplicate tracklet id {tid}")
        seen.add(tid)
        start = _require_int(entry.get("start"), f"{where}.start")
        end = _require_int(entry.get("end"), f"{where}.end")
        raw_boxes = entry.get("boxes")
        if not isinstance(raw_boxes, list):
            raise DataValidationError(f"{where}: 'boxes' must be a list")
        boxes = [_check_box(b, f"{where}.boxes[{k}]") for k, b in enumerate(raw_boxes)]
        feature_rows = None
        if "feature_rows" in entry and entry["feature_rows"] is not None:
            raw_rows = entry["feature_rows"]
            if not isinstance(raw_rows, list):
                raise DataValidationError(f"{where}: 'feature_rows' must be a list")
            feature_rows = [
                _require_int(r, f"{where}.feature_rows[{k}]") for k, r in enumerate(raw_rows)
            ]
            if any(r < 0 for r in feature_rows):
                raise DataValidationError(f"{where}: negative feature row index")
        out.append(Tracklet(id=tid, start=start, end=end, boxes=boxes, feature_rows=feature_rows))
    return out


def write_tracklets_json(tracklets: Sequence[Tracklet], path: str | Path) -> None:
    entries = []
    for t in tracklets:
        entry: dict = {"id": t.id, "start": t.start, "end": t.end, "boxes": [list(b) for b in t.boxes]}
        if t.feature_rows is not None:
            entry["feature_rows"] = list(t.feature_rows)
        entries.append(entry)
    Path(path).write_text(json.dumps({"tracklets": entries}, indent=2) + "\n", encoding="utf-8")


def load_identity_map(path: str | Path) -> list[list[int]]:
    """Read a {"groups": [[id, ...], ...]} document; an id may appear once."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataValidationError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("groups"), list):
        raise DataValidationError(f"{path}: expected an object with a 'groups' list")
    groups: list[list[int]] = []
    seen: set[int] = set()
    for pos, raw in enumerate(doc["groups"]):
        where = f"{path}: groups[{pos}]"
        if not isinstance(raw, list) or not raw:
            raise DataValidationError(f"{where}: expected a nonempty list of ids")
        group = [_require_int(v, where) for v in raw]
        for tid in group:
            if tid in seen:
                raise DataValidationError(f"{where}: id {tid} appears in more than one group")
            seen.add(tid)
        groups.append(group)
    return groups


def write_identity_map(groups: Sequence[Sequence[int]], path: str | Path) -> None:
    doc = {"groups": [list(g) for g in groups]}
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
