"""First-layer weight surgery for stacked multi-frame inputs.

A detector pretrained on single RGB images has a first conv layer shaped
[c_out, 3, kh, kw]. Feeding it an N-frame stack needs [c_out, 3N, kh, kw],
and there are two ways to get there:

* replication: tile the pretrained filters N times along the input-channel
  axis and scale each copy by 1/N. Convolving the result with a stack
  holding N copies of one image reproduces the original layer's response,
  so the surgery is drop-in on static content. The bias is untouched.
* random: re-draw the widened layer from scratch, uniform on [-b, b] with
  b = 1/sqrt(fan_in), zero bias.

Weights are float32 and interchange as an MTENSOR file plus a JSON sidecar
``{"c_out","c_in","kh","kw","bias"}`` (bias, when present, in a second
MTENSOR next to the weight file). ``conv2d_reference`` is the plain
cross-correlation used to verify the replication identity.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DataValidationError
from .tensor_io import read_tensor, write_tensor

MODES = ("replicate", "random")


@dataclass(eq=False)
class ConvLayerWeights:
    """A conv layer's float32 weight [c_out, c_in, kh, kw] and optional bias [c_out]."""

    weight: np.ndarray = field(repr=False)
    bias: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        self.weight = np.asarray(self.weight)
        if self.weight.ndim != 4:
            raise ValueError(f"conv weight must be [c_out, c_in, kh, kw], got shape {self.weight.shape}")
        if self.weight.dtype != np.float32:
            raise ValueError(f"conv weight must be float32, got {self.weight.dtype}")
        if self.bias is not None:
            self.bias = np.asarray(self.bias)
            if self.bias.dtype != np.float32:
                raise ValueError(f"conv bias must be float32, got {self.bias.dtype}")
            if self.bias.shape != (self.weight.shape[0],):
                raise ValueError(
                    f"conv bias must have shape ({self.weight.shape[0]},), got {self.bias.shape}"
                )

    @property
    def c_out(self) -> int:
        return self.weight.shape[0]

    @property
    def c_in(self) -> int:
        return self.weight.shape[1]

    @property
    def kernel(self) -> tuple[int, int]:
        return (self.weight.shape[2], self.weight.shape[3])


def replicate_init(layer: ConvLayerWeights, n: int) -> ConvLayerWeights:
    """Tile the filters ``n`` times along c_in and scale each copy by 1/n.

    [c_out, c_in, kh, kw] becomes [c_out, n*c_in, kh, kw]; the bias carries
    over unchanged. With n=1 the weights come back byte-identical.
    """
    if n < 1:
        raise ValueError(f"replication factor must be >= 1, got {n}")
    bias = None if layer.bias is None else layer.bias.copy()
    if n == 1:
        return ConvLayerWeights(weight=layer.weight.copy(), bias=bias)
    tiled = np.tile(layer.weight, (1, n, 1, 1))
    return ConvLayerWeights(weight=np.ascontiguousarray(tiled / np.float32(n)), bias=bias)


def random_init_first_layer(c_out: int, c_in: int, kh: int, kw: int, seed: int) -> ConvLayerWeights:
    """Fresh first-layer weights, uniform on [-b, b] with b = 1/sqrt(c_in*kh*kw), zero bias."""
    for name, value in (("c_out", c_out), ("c_in", c_in), ("kh", kh), ("kw", kw)):
        if value < 1:
            raise ValueError(f"{name} must be >= 1, got {value}")
    bound = 1.0 / np.sqrt(c_in * kh * kw)
    rng = np.random.default_rng(seed)
    weight = rng.uniform(-bound, bound, size=(c_out, c_in, kh, kw)).astype(np.float32)
    return ConvLayerWeights(weight=weight, bias=np.zeros(c_out, dtype=np.float32))


def expand_first_layer(layer: ConvLayerWeights, n: int, mode: str, seed: int = 0) -> ConvLayerWeights:
    """Widen a layer to n times its input channels by either surgery mode."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if mode == "replicate":
        return replicate_init(layer, n)
    if mode == "random":
        kh, kw = layer.kernel
        return random_init_first_layer(layer.c_out, n * layer.c_in, kh, kw, seed)
    raise ValueError(f"unknown surgery mode {mode!r}; expected one of {', '.join(MODES)}")


def conv2d_reference(
    image: np.ndarray, layer: ConvLayerWeights, stride: int = 1, pad: int = 0
) -> np.ndarray:
    """Direct cross-correlation of a [c_in, H, W] input with the layer.

    Zero padding of ``pad`` on each spatial edge; output is float32
    [c_out, floor((H + 2*pad - kh) / stride) + 1, ...likewise W].
    """
    image = np.asarray(image)
    if image.ndim != 3:
        raise ValueError(f"image must be [c_in, H, W], got shape {image.shape}")
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    if pad < 0:
        raise ValueError(f"pad must be >= 0, got {pad}")
    kh, kw = layer.kernel
    if image.shape[0] != layer.c_in:
        raise ValueError(f"image has {image.shape[0]} channels, weights expect {layer.c_in}")
    image = image.astype(np.float32, copy=False)
    if pad:
        image = np.pad(image, ((0, 0), (pad, pad), (pad, pad)))
    if image.shape[1] < kh or image.shape[2] < kw:
        raise ValueError(f"kernel {(kh, kw)} larger than padded input {image.shape[1:]}")
    # [c_in, H', W', kh, kw] patches at the requested stride, then contract
    # channel and kernel axes in one shot.
    patches = sliding_window_view(image, (kh, kw), axis=(1, 2))[:, ::stride, ::stride]
    out = np.einsum("oikl,ihwkl->ohw", layer.weight, patches, optimize=True).astype(np.float32)
    if layer.bias is not None:
        out = out + layer.bias[:, None, None]
    return np.ascontiguousarray(out)


def _sidecar_path(weight_path: Path) -> Path:
    return weight_path.with_suffix(".json")


def _bias_path(weight_path: Path) -> Path:
    return weight_path.with_suffix(".bias.mten")


def save_conv_layer(layer: ConvLayerWeights, path: str | Path) -> None:
    """Write the weight tensor, its JSON sidecar, and the bias tensor if any."""
    path = Path(path)
    write_tensor(layer.weight, path)
    kh, kw = layer.kernel
    meta = {
        "c_out": layer.c_out,
        "c_in": layer.c_in,
        "kh": kh,
        "kw": kw,
        "bias": layer.bias is not None,
    }
    _sidecar_path(path).write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    if layer.bias is not None:
        write_tensor(layer.bias, _bias_path(path))


def load_conv_layer(path: str | Path) -> ConvLayerWeights:
    """Read a weight file back, honoring the sidecar when present.

    Without a sidecar the shape alone describes the layer and no bias is
    looked for.
    """
    path = Path(path)
    weight = read_tensor(path)
    if weight.ndim != 4 or weight.dtype != np.float32:
        raise DataValidationError(
            f"{path}: expected a float32 [c_out, c_in, kh, kw] tensor, got {weight.dtype} {weight.shape}"
        )
    sidecar = _sidecar_path(path)
    bias = None
    if sidecar.exists():
        try:
            meta = json.loads(sidecar.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise DataValidationError(f"{sidecar}: invalid JSON: {exc}") from exc
        declared = (meta.get("c_out"), meta.get("c_in"), meta.get("kh"), meta.get("kw"))
        if tuple(weight.shape) != declared:
            raise DataValidationError(
                f"{sidecar}: declares shape {declared}, tensor has {tuple(weight.shape)}"
            )
        if meta.get("bias"):
            bias_file = _bias_path(path)
            if not bias_file.exists():
                raise DataValidationError(f"{sidecar}: declares a bias but {bias_file} is missing")
            bias = read_tensor(bias_file)
    return ConvLayerWeights(weight=weight, bias=bias)
