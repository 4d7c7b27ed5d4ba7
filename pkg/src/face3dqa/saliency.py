"""Distortion-aware saliency maps from click annotations.

Click points become binary fixation maps; Gaussian smoothing turns those into
continuous grayscale saliency maps. Two file formats are provided: binary PGM
(P5) for visualization and a raw float32 grid ("G3DS") for lossless metric
input.
"""

from __future__ import annotations

import enum
import math
import struct
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .core import FixationAnnotation, PointOutOfBoundsError


class DimensionMismatchError(ValueError):
    pass


class ZeroVarianceMapError(ValueError):
    pass


class NormMode(enum.Enum):
    RAW = "raw"
    MAX_ONE = "max"
    SUM_ONE = "sum"
    Z_STANDARDIZED = "z"


_NORM_CODES = {NormMode.RAW: 0, NormMode.MAX_ONE: 1, NormMode.SUM_ONE: 2, NormMode.Z_STANDARDIZED: 3}
_CODE_NORMS = {v: k for k, v in _NORM_CODES.items()}

G3DS_MAGIC = b"G3DS"


@dataclass(frozen=True)
class FixationMap:
    """Binary map with ones exactly at annotated pixels (row-major grid)."""

    width: int
    height: int
    grid: np.ndarray  # shape (height, width), uint8 in {0, 1}

    @property
    def n_fixations(self) -> int:
        return int(self.grid.sum())


@dataclass(frozen=True)
class SaliencyMap:
    """Continuous saliency grid plus the normalization it carries.

    ``degenerate`` flags an all-zero input that a MAX_ONE / SUM_ONE
    normalization passed through unchanged.
    """

    width: int
    height: int
    grid: np.ndarray  # shape (height, width), float64
    norm: NormMode = NormMode.RAW
    degenerate: bool = False


def build_fixation_map(ann: FixationAnnotation) -> FixationMap:
    """Binary map from one annotation; duplicate points collapse to one."""
    grid = np.zeros((ann.image_height, ann.image_width), dtype=np.uint8)
    for x, y in ann.points:
        if not (0 <= x < ann.image_width and 0 <= y < ann.image_height):
            raise PointOutOfBoundsError(f"point ({x},{y}) out of bounds")
        grid[y, x] = 1
    return FixationMap(ann.image_width, ann.image_height, grid)


def merge_annotations(anns: list[FixationAnnotation]) -> FixationMap:
    """Union of several annotators' points for one item."""
    if not anns:
        raise ValueError("need at least one annotation to merge")
    w, h = anns[0].image_width, anns[0].image_height
    for ann in anns[1:]:
        if (ann.image_width, ann.image_height) != (w, h):
            raise DimensionMismatchError(
                f"annotation dimensions differ: {ann.image_width}x{ann.image_height} vs {w}x{h}"
            )
    grid = np.zeros((h, w), dtype=np.uint8)
    for ann in anns:
        for x, y in ann.points:
            grid[y, x] = 1
    return FixationMap(w, h, grid)


def gaussian_kernel(sigma: float) -> np.ndarray:
    """1-D Gaussian kernel truncated at radius ceil(3*sigma), renormalized to sum 1."""
    if sigma <= 0:
        raise ValueError("sigma must be > 0")
    radius = math.ceil(3.0 * sigma)
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-(offsets**2) / (2.0 * sigma * sigma))
    return kernel / kernel.sum()


def _convolve_zero_padded(signal: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    # centered slice of the full convolution; np.convolve(mode="same") would
    # return the wrong length whenever the kernel outgrows the signal
    radius = (kernel.size - 1) // 2
    return np.convolve(signal, kernel)[radius:radius + signal.size]


def gaussian_blur(fmap: FixationMap, sigma: float = 5.0) -> SaliencyMap:
    """Separable Gaussian smoothing with zero padding outside the image."""
    kernel = gaussian_kernel(sigma)
    src = fmap.grid.astype(np.float64)
    tmp = np.empty_like(src)
    for i in range(fmap.height):
        tmp[i, :] = _convolve_zero_padded(src[i, :], kernel)
    out = np.empty_like(src)
    for j in range(fmap.width):
        out[:, j] = _convolve_zero_padded(tmp[:, j], kernel)
    return SaliencyMap(fmap.width, fmap.height, out, NormMode.RAW)


def normalize(smap: SaliencyMap, target: NormMode) -> SaliencyMap:
    """Renormalize a map; all-zero inputs pass through flagged (except Z)."""
    grid = smap.grid
    if target is NormMode.RAW:
        return replace(smap, norm=NormMode.RAW)
    if target is NormMode.MAX_ONE:
        peak = float(grid.max(initial=0.0))
        if peak == 0.0:
            return replace(smap, norm=target, degenerate=True)
        return SaliencyMap(smap.width, smap.height, grid / peak, target)
    if target is NormMode.SUM_ONE:
        total = float(grid.sum())
        if total == 0.0:
            return replace(smap, norm=target, degenerate=True)
        return SaliencyMap(smap.width, smap.height, grid / total, target)
    std = float(grid.std())
    if std == 0.0:
        raise ZeroVarianceMapError("cannot z-standardize a constant map")
    return SaliencyMap(smap.width, smap.height, (grid - grid.mean()) / std, target)


# -- file formats -----------------------------------------------------------


def write_pgm(smap: SaliencyMap, path: str | Path) -> None:
    """8-bit binary PGM; input is max-normalized first, values quantized by round(255*v)."""
    if smap.norm is not NormMode.MAX_ONE:
        smap = normalize(smap, NormMode.MAX_ONE)
    data = np.rint(255.0 * smap.grid).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{smap.width} {smap.height}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


def read_pgm(path: str | Path) -> np.ndarray:
    with open(path, "rb") as fh:
        if fh.readline().strip() != b"P5":
            raise ValueError(f"{path}: not a binary PGM")
        dims = fh.readline().split()
        width, height = int(dims[0]), int(dims[1])
        maxval = int(fh.readline())
        if maxval != 255:
            raise ValueError(f"{path}: expected maxval 255, got {maxval}")
        data = np.frombuffer(fh.read(width * height), dtype=np.uint8)
    return data.reshape(height, width)


def write_g3ds(smap: SaliencyMap, path: str | Path) -> None:
    """Raw little-endian float32 grid with a 16-byte header."""
    header = G3DS_MAGIC + struct.pack("<III", smap.width, smap.height, _NORM_CODES[smap.norm])
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(smap.grid.astype("<f4").tobytes())


def read_g3ds(path: str | Path) -> SaliencyMap:
    with open(path, "rb") as fh:
        header = fh.read(16)
        if len(header) != 16 or header[:4] != G3DS_MAGIC:
            raise ValueError(f"{path}: not a G3DS saliency map")
        width, height, code = struct.unpack("<III", header[4:])
        if code not in _CODE_NORMS:
            raise ValueError(f"{path}: unknown norm code {code}")
        payload = fh.read(4 * width * height)
    if len(payload) != 4 * width * height:
        raise ValueError(f"{path}: truncated G3DS payload")
    grid = np.frombuffer(payload, dtype="<f4").reshape(height, width).astype(np.float64)
    return SaliencyMap(width, height, grid, _CODE_NORMS[code])
