"""Mask and box primitives shared by every other module.

Masks are dense binary numpy arrays (row-major ``(height, width)`` uint8
grids) or run-length encoded in the COCO uncompressed convention:
column-major pixel order, first run counts background pixels. Boxes are
corner-form ``(x1, y1, x2, y2)``; the COCO ``[x, y, w, h]`` disk form is
converted at the I/O boundary only.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "BinaryMask",
    "RleMask",
    "Box",
    "ScoredBox",
    "MalformedRleError",
    "rle_encode",
    "rle_decode",
    "mask_iou",
    "box_iou",
    "box_giou",
    "box_from_xywh",
    "box_to_xywh",
    "mask_bbox",
]

BinaryMask = np.ndarray  # dtype uint8/bool, shape (height, width)


class MalformedRleError(ValueError):
    """Run lengths do not describe a mask of the declared size."""


def as_mask(a) -> BinaryMask:
    """Coerce array-like input to a validated uint8 binary mask."""
    m = np.asarray(a)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise ValueError(f"mask must be 2-D and non-empty, got shape {m.shape}")
    return (m != 0).astype(np.uint8)


@dataclass(frozen=True)
class RleMask:
    """Uncompressed COCO-style RLE: alternating run lengths, background first."""

    height: int
    width: int
    counts: tuple[int, ...]

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise MalformedRleError(f"bad size {self.height}x{self.width}")
        if any(c < 0 for c in self.counts):
            raise MalformedRleError("negative run length")
        total = sum(self.counts)
        if total != self.height * self.width:
            raise MalformedRleError(
                f"runs sum to {total}, expected {self.height * self.width}"
            )


@dataclass(frozen=True)
class Box:
    """Axis-aligned box in corner form, real pixel coordinates."""

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        if self.x1 > self.x2 or self.y1 > self.y2:
            raise ValueError(f"inverted box {self}")

    @property
    def area(self) -> float:
        return (self.x2 - self.x1) * (self.y2 - self.y1)

    def as_array(self) -> np.ndarray:
        return np.array([self.x1, self.y1, self.x2, self.y2], dtype=np.float64)


@dataclass(frozen=True)
class ScoredBox:
    box: Box
    score: float = field(default=1.0)

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score {self.score} outside [0, 1]")


def box_from_xywh(xywh) -> Box:
    x, y, w, h = (float(v) for v in xywh)
    return Box(x, y, x + w, y + h)


def box_to_xywh(box: Box) -> list[float]:
    return [box.x1, box.y1, box.x2 - box.x1, box.y2 - box.y1]


def rle_encode(mask: BinaryMask) -> RleMask:
    """Encode a binary mask as background-first, column-major run lengths."""
    m = as_mask(mask)
    h, w = m.shape
    flat = m.ravel(order="F")
    # boundaries of runs of equal value
    change = np.flatnonzero(np.diff(flat)) + 1
    edges = np.concatenate(([0], change, [flat.size]))
    counts = np.diff(edges).tolist()
    if flat[0] == 1:  # convention: first run counts background pixels
        counts = [0] + counts
    return RleMask(height=h, width=w, counts=tuple(int(c) for c in counts))


def rle_decode(rle: RleMask) -> BinaryMask:
    """Expand run lengths back to a dense mask (inverse of rle_encode)."""
    n = rle.height * rle.width
    flat = np.zeros(n, dtype=np.uint8)
    pos = 0
    value = 0
    for c in rle.counts:
        if value:
            flat[pos : pos + c] = 1
        pos += c
        value ^= 1
    return flat.reshape((rle.height, rle.width), order="F")


def mask_iou(a: BinaryMask, b: BinaryMask) -> float:
    """Pixel IoU of two equally sized masks; both empty counts as 1.0."""
    ma, mb = as_mask(a), as_mask(b)
    if ma.shape != mb.shape:
        raise ValueError(f"mask shapes differ: {ma.shape} vs {mb.shape}")
    inter = int(np.count_nonzero(ma & mb))
    union = int(np.count_nonzero(ma | mb))
    if union == 0:
        return 1.0
    return inter / union


def mask_intersection_union(a: BinaryMask, b: BinaryMask) -> tuple[int, int]:
    """Pixel counts of intersection and union, for cumulative aggregation."""
    ma, mb = as_mask(a), as_mask(b)
    if ma.shape != mb.shape:
        raise ValueError(f"mask shapes differ: {ma.shape} vs {mb.shape}")
    return int(np.count_nonzero(ma & mb)), int(np.count_nonzero(ma | mb))


def _intersection_area(a: Box, b: Box) -> float:
    iw = min(a.x2, b.x2) - max(a.x1, b.x1)
    ih = min(a.y2, b.y2) - max(a.y1, b.y1)
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    return iw * ih


def box_iou(a: Box, b: Box) -> float:
    """Area IoU of two boxes; a zero-area union yields 0."""
    inter = _intersection_area(a, b)
    union = a.area + b.area - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def box_giou(a: Box, b: Box) -> float:
    """Generalized box IoU: IoU minus the enclosing-box slack, in [-1, 1]."""
    inter = _intersection_area(a, b)
    union = a.area + b.area - inter
    ex1, ey1 = min(a.x1, b.x1), min(a.y1, b.y1)
    ex2, ey2 = max(a.x2, b.x2), max(a.y2, b.y2)
    enclose = (ex2 - ex1) * (ey2 - ey1)
    iou = inter / union if union > 0.0 else 0.0
    if enclose <= 0.0:
        return iou
    return iou - (enclose - union) / enclose


def mask_bbox(mask: BinaryMask) -> Box | None:
    """Tight bounding box of the mask foreground, or None for an empty mask."""
    m = as_mask(mask)
    ys, xs = np.nonzero(m)
    if ys.size == 0:
        return None
    return Box(float(xs.min()), float(ys.min()), float(xs.max() + 1), float(ys.max() + 1))
