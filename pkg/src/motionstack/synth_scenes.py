"""Deterministic synthetic scenes for desk-scale end-to-end verification.

``generate`` renders colored filled-circle blobs moving with constant
velocity and wall bounce over a flat or checkerboard background, and emits
every artifact the rest of the pipeline consumes: PPM frames, per-frame
ground-truth boxes (class 0), tracklets (ground-truth trajectories split at
injected id switches, later fragments receiving fresh sequential ids), the
true identity grouping, and per-(object, frame) feature vectors built as
well-separated identity prototypes plus seeded Gaussian noise.

``perturb_detections`` degrades ground truth into a detection set with
controlled drop-outs, corner jitter, and low-scoring false positives, which
gives the evaluation metrics something imperfect to measure.

Everything is bit-deterministic for a fixed seed. Spawn-time draws come
from one stream keyed on the seed; all per-frame randomness comes from
streams keyed on (seed, frame), so the output cannot depend on how frames
are distributed over workers.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .det_metrics import Detection, GroundTruth, write_detections_jsonl, write_ground_truth_jsonl
from .errors import DataValidationError
from .tensor_io import ImageFrame, write_ppm, write_tensor
from .tracklets import Tracklet, write_identity_map, write_tracklets_json

BACKGROUND_MODES = ("flat", "textured")
NOISE_SIGMA = 0.1
# Prototype scale 1.2 puts distinct prototypes 1.2*sqrt(2) apart, safely
# above the required 10 sigma, while keeping raw feature distances small
# enough that an untrained encoder still sees active triplet hinges.
PROTOTYPE_SCALE = 1.2
DEFAULT_FEATURE_DIM = 32

_FLAT_BG = (32, 32, 32)
_CHECKER_BG = ((24, 26, 30), (44, 46, 52))
_CHECKER_CELL = 8


@dataclass
class SceneConfig:
    """Geometry, motion, and identity layout of a synthetic scene."""

    width: int = 96
    height: int = 72
    num_frames: int = 64
    num_objects: int = 3
    radius_range: tuple[int, int] = (4, 7)
    velocity_range: tuple[float, float] = (1.0, 2.5)
    id_switch_events: tuple[tuple[int, int], ...] = ()
    seed: int = 0
    background: str = "flat"
    feature_dim: int = DEFAULT_FEATURE_DIM

    def __post_init__(self) -> None:
        if self.num_frames < 1:
            raise DataValidationError(f"num_frames must be >= 1, got {self.num_frames}")
        if self.num_objects < 1:
            raise DataValidationError(f"num_objects must be >= 1, got {self.num_objects}")
        r_min, r_max = self.radius_range
        if not (isinstance(r_min, int) and isinstance(r_max, int)) or r_min < 1 or r_min > r_max:
            raise DataValidationError(f"radius_range must be integers 1 <= min <= max, got {self.radius_range}")
        v_min, v_max = self.velocity_range
        if not (0 <= v_min <= v_max) or not (math.isfinite(v_min) and math.isfinite(v_max)):
            raise DataValidationError(f"velocity_range must satisfy 0 <= min <= max, got {self.velocity_range}")
        # Spawn interval for a blob center is [r, size-1-r]; it must be nonempty.
        if min(self.width, self.height) <= 2 * r_max + 1:
            raise DataValidationError(
                f"canvas {self.width}x{self.height} cannot fit a radius-{r_max} blob"
            )
        if self.background not in BACKGROUND_MODES:
            raise DataValidationError(
                f"background must be one of {BACKGROUND_MODES}, got {self.background!r}"
            )
        if self.feature_dim < self.num_objects:
            raise DataValidationError(
                f"feature_dim {self.feature_dim} cannot host {self.num_objects} orthogonal prototypes"
            )
        events = [tuple(e) for e in self.id_switch_events]
        seen: set[tuple[int, int]] = set()
        for obj, frame in events:
            if not (isinstance(obj, int) and isinstance(frame, int)):
                raise DataValidationError(f"id switch events must be (object, frame) integers, got {(obj, frame)!r}")
            if not 0 <= obj < self.num_objects:
                raise DataValidationError(f"id switch object {obj} outside 0..{self.num_objects - 1}")
            if not 1 <= frame <= self.num_frames - 1:
                raise DataValidationError(
                    f"id switch frame {frame} outside 1..{self.num_frames - 1}"
                )
            if (obj, frame) in seen:
                raise DataValidationError(f"duplicate id switch event {(obj, frame)}")
            seen.add((obj, frame))
        self.id_switch_events = tuple(events)

    def to_dict(self) -> dict:
        return {
            "width": self.width,
            "height": self.height,
            "num_frames": self.num_frames,
            "num_objects": self.num_objects,
            "radius_range": list(self.radius_range),
            "velocity_range": list(self.velocity_range),
            "id_switch_events": [list(e) for e in self.id_switch_events],
            "seed": self.seed,
            "background": self.background,
            "feature_dim": self.feature_dim,
        }


@dataclass
class _Blob:
    radius: int
    cx: float
    cy: float
    vx: float
    vy: float
    color: tuple[int, int, int]


def _spawn_blobs(config: SceneConfig) -> list[_Blob]:
    rng = np.random.default_rng([config.seed, 0])
    blobs = []
    for _ in range(config.num_objects):
        radius = int(rng.integers(config.radius_range[0], config.radius_range[1] + 1))
        cx = float(rng.uniform(radius, config.width - 1 - radius))
        cy = float(rng.uniform(radius, config.height - 1 - radius))
        speed = float(rng.uniform(*config.velocity_range))
        angle = float(rng.uniform(0.0, 2.0 * math.pi))
        color = tuple(int(v) for v in rng.integers(64, 256, size=3))
        blobs.append(_Blob(radius, cx, cy, speed * math.cos(angle), speed * math.sin(angle), color))
    return blobs


def _step(blob: _Blob, width: int, height: int) -> None:
    # Advance one frame, reflecting off walls so the blob stays inside.
    blob.cx += blob.vx
    blob.cy += blob.vy
    lo_x, hi_x = float(blob.radius), float(width - 1 - blob.radius)
    lo_y, hi_y = float(blob.radius), float(height - 1 - blob.radius)
    if blob.cx < lo_x:
        blob.cx = 2 * lo_x - blob.cx
        blob.vx = -blob.vx
    elif blob.cx > hi_x:
        blob.cx = 2 * hi_x - blob.cx
        blob.vx = -blob.vx
    if blob.cy < lo_y:
        blob.cy = 2 * lo_y - blob.cy
        blob.vy = -blob.vy
    elif blob.cy > hi_y:
        blob.cy = 2 * hi_y - blob.cy
        blob.vy = -blob.vy


def _background(config: SceneConfig) -> np.ndarray:
    canvas = np.empty((config.height, config.width, 3), dtype=np.uint8)
    if config.background == "flat":
        canvas[:] = _FLAT_BG
    else:
        ys = np.arange(config.height)[:, None] // _CHECKER_CELL
        xs = np.arange(config.width)[None, :] // _CHECKER_CELL
        parity = (ys + xs) % 2
        canvas[:] = _CHECKER_BG[0]
        canvas[parity == 1] = _CHECKER_BG[1]
    return canvas


def _render(config: SceneConfig, background: np.ndarray, blobs: Sequence[_Blob]) -> np.ndarray:
    frame = background.copy()
    ys = np.arange(config.height, dtype=np.float64)[:, None]
    xs = np.arange(config.width, dtype=np.float64)[None, :]
    for blob in blobs:
        mask = (xs - blob.cx) ** 2 + (ys - blob.cy) ** 2 <= float(blob.radius) ** 2
        frame[mask] = blob.color
    return frame


def _blob_box(blob: _Blob) -> tuple[float, float, float, float]:
    r = float(blob.radius)
    return (blob.cx - r, blob.cy - r, blob.cx + r, blob.cy + r)


def _split_tracklets(
    config: SceneConfig, boxes: dict[int, list[tuple[float, float, float, float]]]
) -> tuple[list[Tracklet], list[list[int]]]:
    # Fresh ids follow generation order of the events sorted by (frame, object).
    fresh: dict[tuple[int, int], int] = {}
    next_id = config.num_objects
    for frame, obj in sorted((f, o) for o, f in config.id_switch_events):
        fresh[(obj, frame)] = next_id
        next_id += 1

    tracklets: list[Tracklet] = []
    groups: list[list[int]] = []
    for obj in range(config.num_objects):
        cuts = sorted(f for o, f in config.id_switch_events if o == obj)
        starts = [0, *cuts]
        ends = [*(c - 1 for c in cuts), config.num_frames - 1]
        group = []
        for start, end in zip(starts, ends):
            tid = obj if start == 0 else fresh[(obj, start)]
            group.append(tid)
            tracklets.append(
                Tracklet(
                    id=tid,
                    start=start,
                    end=end,
                    boxes=boxes[obj][start : end + 1],
                    feature_rows=[f * config.num_objects + obj for f in range(start, end + 1)],
                )
            )
        groups.append(group)
    tracklets.sort(key=lambda t: t.id)
    return tracklets, groups


def generate(config: SceneConfig, out_dir: str | Path) -> dict:
    """Render a scene and write every artifact; returns a manifest of paths.

    Layout under ``out_dir``: ``frames/frame_%06d.ppm``, ``gt.jsonl``,
    ``tracklets.json``, ``identity_map.json``, ``features.mten`` ([T, D]
    float32, row ``frame * num_objects + object``), and ``scene.json``
    recording the config and relative artifact paths.
    """
    out_dir = Path(out_dir)
    frames_dir = out_dir / "frames"
    frames_dir.mkdir(parents=True, exist_ok=True)

    blobs = _spawn_blobs(config)
    background = _background(config)
    prototypes = np.zeros((config.num_objects, config.feature_dim), dtype=np.float64)
    for obj in range(config.num_objects):
        prototypes[obj, obj] = PROTOTYPE_SCALE

    gts: list[GroundTruth] = []
    boxes: dict[int, list[tuple[float, float, float, float]]] = {o: [] for o in range(config.num_objects)}
    features = np.zeros((config.num_frames * config.num_objects, config.feature_dim), dtype=np.float64)
    for frame in range(config.num_frames):
        if frame > 0:
            for blob in blobs:
                _step(blob, config.width, config.height)
        canvas = _render(config, background, blobs)
        write_ppm(
            ImageFrame(width=config.width, height=config.height, pixels=canvas, frame_index=frame),
            frames_dir / f"frame_{frame:06d}.ppm",
        )
        noise = np.random.default_rng([config.seed, 1, frame]).normal(
            0.0, 1.0, size=(config.num_objects, config.feature_dim)
        )
        for obj, blob in enumerate(blobs):
            box = _blob_box(blob)
            boxes[obj].append(box)
            gts.append(GroundTruth(frame=frame, bbox=box, label=0))
            features[frame * config.num_objects + obj] = prototypes[obj] + NOISE_SIGMA * noise[obj]

    tracklets, groups = _split_tracklets(config, boxes)

    write_ground_truth_jsonl(gts, out_dir / "gt.jsonl")
    write_tracklets_json(tracklets, out_dir / "tracklets.json")
    write_identity_map(groups, out_dir / "identity_map.json")
    write_tensor(features.astype(np.float32), out_dir / "features.mten")
    manifest = {
        "config": config.to_dict(),
        "frames_dir": "frames",
        "frame_files": [f"frame_{f:06d}.ppm" for f in range(config.num_frames)],
        "gt": "gt.jsonl",
        "tracklets": "tracklets.json",
        "identity_map": "identity_map.json",
        "features": "features.mten",
    }
    (out_dir / "scene.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return {
        "frames_dir": frames_dir,
        "gt": out_dir / "gt.jsonl",
        "tracklets": out_dir / "tracklets.json",
        "identity_map": out_dir / "identity_map.json",
        "features": out_dir / "features.mten",
        "scene": out_dir / "scene.json",
        "num_frames": config.num_frames,
        "num_tracklets": len(tracklets),
        "num_ground_truth": len(gts),
    }


def perturb_detections(
    gts: Sequence[GroundTruth],
    drop_rate: float,
    jitter_px: float,
    fp_rate: float,
    seed: int = 0,
    canvas: tuple[int, int] | None = None,
) -> list[Detection]:
    """Degrade ground truth into detections with controlled imperfection.

    Each box survives with probability ``1 - drop_rate`` (score 1.0), its
    corners shifted independently by uniform offsets in [-jitter_px,
    jitter_px] (collapsed boxes are re-expanded minimally). Each frame then
    receives one false positive with probability ``fp_rate``, scored
    strictly below every true score. ``canvas`` bounds false-positive
    boxes; by default it is inferred from the ground-truth extents.
    """
    for name, rate in (("drop_rate", drop_rate), ("fp_rate", fp_rate)):
        if not 0.0 <= rate <= 1.0:
            raise DataValidationError(f"{name} must be in [0, 1], got {rate}")
    if jitter_px < 0:
        raise DataValidationError(f"jitter_px must be nonnegative, got {jitter_px}")
    if canvas is not None:
        width, height = canvas
    elif gts:
        width = int(math.ceil(max(g.bbox[2] for g in gts))) + 1
        height = int(math.ceil(max(g.bbox[3] for g in gts))) + 1
    else:
        width, height = 64, 64

    rng = np.random.default_rng(seed)
    dets: list[Detection] = []
    for g in gts:
        if float(rng.uniform()) < drop_rate:
            continue
        dx1, dy1, dx2, dy2 = (float(v) * jitter_px for v in rng.uniform(-1.0, 1.0, size=4))
        x1, y1, x2, y2 = g.bbox
        x1, y1, x2, y2 = x1 + dx1, y1 + dy1, x2 + dx2, y2 + dy2
        # Jitter can invert a small box; keep it valid around its center.
        if x2 <= x1:
            mid = (x1 + x2) / 2.0
            x1, x2 = mid - 0.5, mid + 0.5
        if y2 <= y1:
            mid = (y1 + y2) / 2.0
            y1, y2 = mid - 0.5, mid + 0.5
        dets.append(Detection(frame=g.frame, bbox=(x1, y1, x2, y2), score=1.0, label=g.label))

    min_true = min((d.score for d in dets), default=1.0)
    for frame in sorted({g.frame for g in gts}):
        if float(rng.uniform()) >= fp_rate:
            continue
        w = float(rng.uniform(3.0, max(4.0, width / 4.0)))
        h = float(rng.uniform(3.0, max(4.0, height / 4.0)))
        x1 = float(rng.uniform(0.0, max(1.0, width - w)))
        y1 = float(rng.uniform(0.0, max(1.0, height - h)))
        score = float(rng.uniform(0.05, 0.95)) * min_true * 0.999
        dets.append(Detection(frame=frame, bbox=(x1, y1, x1 + w, y1 + h), score=score, label=0))
    return dets


def write_perturbed(dets: Sequence[Detection], path: str | Path) -> None:
    write_detections_jsonl(dets, path)
