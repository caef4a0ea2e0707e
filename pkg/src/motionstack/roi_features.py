"""RoI feature pooling over convolutional feature maps.

Boxes live in image coordinates and are projected onto a [C, Hf, Wf]
feature map with a half-pixel shift, ``coord * spatial_scale - 0.5``, so
that pixel centers line up across resolutions. Each output bin averages
``sampling_ratio`` x ``sampling_ratio`` bilinear samples placed on a
regular grid inside the bin. Sample points are clamped into the valid map
rectangle before interpolation, so boxes hanging over the edge reuse
border values instead of fading to zero. Averaging the pooled grid per
channel turns a box into a fixed-length descriptor.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataValidationError

OUT_SIZE = 7
SAMPLING_RATIO = 2


@dataclass(eq=False)
class FeatureMap:
    """A [C, Hf, Wf] float map plus its feature-pixels-per-image-pixel ratio."""

    tensor: np.ndarray = field(repr=False)
    spatial_scale: float = 1.0

    def __post_init__(self) -> None:
        self.tensor = np.asarray(self.tensor)
        if self.tensor.ndim != 3:
            raise ValueError(f"feature map must be [C, Hf, Wf], got shape {self.tensor.shape}")
        if not self.spatial_scale > 0:
            raise ValueError(f"spatial_scale must be positive, got {self.spatial_scale}")


def _map64(fmap: FeatureMap | np.ndarray) -> np.ndarray:
    arr = fmap.tensor if isinstance(fmap, FeatureMap) else np.asarray(fmap)
    if arr.ndim != 3:
        raise ValueError(f"feature map must be [C, Hf, Wf], got shape {arr.shape}")
    return arr.astype(np.float64, copy=False)


def bilinear_sample(fmap: FeatureMap | np.ndarray, x: float, y: float) -> np.ndarray:
    """Interpolate all channels at one continuous (x, y) feature coordinate.

    Pixel centers sit at integer coordinates; out-of-range points clamp to
    the valid rectangle. Returns a float64 [C] vector.
    """
    arr = _map64(fmap)
    _, h, w = arr.shape
    x = min(max(float(x), 0.0), w - 1.0)
    y = min(max(float(y), 0.0), h - 1.0)
    x0 = int(np.floor(x))
    y0 = int(np.floor(y))
    x1 = min(x0 + 1, w - 1)
    y1 = min(y0 + 1, h - 1)
    lx = x - x0
    ly = y - y0
    return (
        arr[:, y0, x0] * (1.0 - ly) * (1.0 - lx)
        + arr[:, y0, x1] * (1.0 - ly) * lx
        + arr[:, y1, x0] * ly * (1.0 - lx)
        + arr[:, y1, x1] * ly * lx
    )


def _grid_1d(start: float, bin_size: float, bins: int, ratio: int) -> np.ndarray:
    # Sample s of bin p sits at start + (p + (s + 0.5) / ratio) * bin_size.
    p = np.arange(bins, dtype=np.float64)[:, None]
    s = np.arange(ratio, dtype=np.float64)[None, :]
    return (start + (p + (s + 0.5) / ratio) * bin_size).reshape(-1)


def _gather_bilinear(arr: np.ndarray, ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
    # arr [C, H, W], ys [Sy], xs [Sx] -> [C, Sy, Sx] interpolated values.
    _, h, w = arr.shape
    y = np.clip(ys, 0.0, h - 1.0)
    x = np.clip(xs, 0.0, w - 1.0)
    y0 = np.floor(y).astype(np.intp)
    x0 = np.floor(x).astype(np.intp)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    ly = (y - y0)[:, None]
    lx = (x - x0)[None, :]
    top = arr[:, y0, :]
    bottom = arr[:, y1, :]
    return (
        top[:, :, x0] * (1.0 - ly) * (1.0 - lx)
        + top[:, :, x1] * (1.0 - ly) * lx
        + bottom[:, :, x0] * ly * (1.0 - lx)
        + bottom[:, :, x1] * ly * lx
    )


def _align_one(
    arr: np.ndarray,
    spatial_scale: float,
    box,
    out_h: int,
    out_w: int,
    sampling_ratio: int,
) -> np.ndarray:
    x1, y1, x2, y2 = (float(v) for v in box)
    # Half-pixel alignment into feature-map coordinates.
    fx1 = x1 * spatial_scale - 0.5
    fy1 = y1 * spatial_scale - 0.5
    fx2 = x2 * spatial_scale - 0.5
    fy2 = y2 * spatial_scale - 0.5
    if fx2 - fx1 <= 0 or fy2 - fy1 <= 0:
        raise DataValidationError(
            f"box {[x1, y1, x2, y2]} degenerates to zero area at spatial_scale {spatial_scale}"
        )
    c = arr.shape[0]
    ys = _grid_1d(fy1, (fy2 - fy1) / out_h, out_h, sampling_ratio)
    xs = _grid_1d(fx1, (fx2 - fx1) / out_w, out_w, sampling_ratio)
    sampled = _gather_bilinear(arr, ys, xs)
    blocks = sampled.reshape(c, out_h, sampling_ratio, out_w, sampling_ratio)
    return blocks.mean(axis=(2, 4))


def _check_pool_params(out_h: int, out_w: int, sampling_ratio: int) -> None:
    if out_h < 1 or out_w < 1:
        raise ValueError(f"output size must be positive, got {out_h}x{out_w}")
    if sampling_ratio < 1:
        raise ValueError(f"sampling_ratio must be >= 1, got {sampling_ratio}")


def roi_align(
    fmap: FeatureMap,
    box,
    out_h: int = OUT_SIZE,
    out_w: int = OUT_SIZE,
    sampling_ratio: int = SAMPLING_RATIO,
) -> np.ndarray:
    """Pool one [x1, y1, x2, y2] image-coordinate box to float32 [C, out_h, out_w].

    The box must have positive area after scaling. Interpolation runs in
    float64.
    """
    _check_pool_params(out_h, out_w, sampling_ratio)
    arr = _map64(fmap)
    pooled = _align_one(arr, fmap.spatial_scale, box, out_h, out_w, sampling_ratio)
    return pooled.astype(np.float32)


def pool_to_vector(pooled: np.ndarray) -> np.ndarray:
    """Collapse a [C, oh, ow] pooled grid to a per-channel mean, float32 [C]."""
    pooled = np.asarray(pooled)
    if pooled.ndim != 3:
        raise ValueError(f"pooled grid must be [C, oh, ow], got shape {pooled.shape}")
    return pooled.astype(np.float64, copy=False).mean(axis=(1, 2)).astype(np.float32)


def pool_boxes(
    fmap: FeatureMap,
    boxes,
    out_h: int = OUT_SIZE,
    out_w: int = OUT_SIZE,
    sampling_ratio: int = SAMPLING_RATIO,
) -> np.ndarray:
    """RoI-align every box and average over space: float32 [N, C] descriptors."""
    _check_pool_params(out_h, out_w, sampling_ratio)
    arr = _map64(fmap)
    boxes = np.asarray(boxes, dtype=np.float64)
    if boxes.ndim != 2 or boxes.shape[1] != 4:
        raise ValueError(f"boxes must be [N, 4], got shape {boxes.shape}")
    out = np.empty((len(boxes), arr.shape[0]), dtype=np.float64)
    for i, box in enumerate(boxes):
        out[i] = _align_one(arr, fmap.spatial_scale, box, out_h, out_w, sampling_ratio).mean(axis=(1, 2))
    return out.astype(np.float32)
