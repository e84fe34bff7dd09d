"""Output selection strategies: raw per-region predictions -> final outputs.

Every region proposes a box scored by its region probability. The
strategy decides which proposals survive and whether the mask is kept:

  threshold(tau)  boxes with score >= tau
  top_k(k)        the k highest-scoring boxes, always exactly k
  count_driven    the count head picks: class 0 empties mask and boxes,
                  classes 1..5 keep the top-c boxes, class 5+ falls back
                  to the threshold rule and clears sub-50-pixel masks
  fifty_pixel     clears the mask when it has fewer than 50 foreground
                  pixels; boxes untouched
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..geometry import BinaryMask, ScoredBox
from .config import ModelConfig
from .losses import normalized_cxcywh_to_box
from .network import ModelOutput

__all__ = ["Strategy", "select_outputs", "base_mask", "scored_boxes"]

MIN_PIXELS = 50


@dataclass(frozen=True)
class Strategy:
    kind: str  # threshold | top_k | count_driven | fifty_pixel
    tau: float = 0.7
    k: int = 1

    VALID = ("threshold", "top_k", "count_driven", "fifty_pixel")

    def __post_init__(self):
        if self.kind not in self.VALID:
            raise ValueError(f"unknown strategy {self.kind!r}, expected one of {self.VALID}")

    @classmethod
    def parse(cls, spec: str, tau: float = 0.7) -> "Strategy":
        """Parse CLI-style specs: "threshold", "top-3", "count", "50pix"."""
        s = spec.replace("_", "-").lower()
        if s.startswith("top-"):
            return cls("top_k", k=int(s[4:]))
        if s in ("count", "count-driven"):
            return cls("count_driven", tau=tau)
        if s in ("threshold",):
            return cls("threshold", tau=tau)
        if s in ("50pix", "fifty-pixel"):
            return cls("fifty_pixel", tau=tau)
        raise ValueError(f"unknown strategy {spec!r}")


def base_mask(output: ModelOutput, config: ModelConfig) -> BinaryMask:
    """Binarized mask at image resolution (sigmoid(logits) > 0.5)."""
    factor = config.image_size // config.mask_size
    logits = np.asarray(output.mask_logits.data)
    if factor > 1:
        logits = logits.repeat(factor, axis=0).repeat(factor, axis=1)
    return (logits > 0.0).astype(np.uint8)  # sigmoid(z) > 0.5  <=>  z > 0


def scored_boxes(output: ModelOutput, config: ModelConfig) -> list[ScoredBox]:
    """All per-region boxes in pixel coordinates, scored by region probability."""
    scores = np.asarray(output.xr.data)
    boxes = np.asarray(output.boxes.data)
    return [
        ScoredBox(normalized_cxcywh_to_box(boxes[n], config.image_size), float(scores[n]))
        for n in range(len(scores))
    ]


def _top_k(candidates: list[ScoredBox], k: int) -> list[ScoredBox]:
    order = np.argsort([-sb.score for sb in candidates], kind="stable")
    return [candidates[i] for i in order[:k]]


def select_outputs(
    output: ModelOutput, strategy: Strategy, config: ModelConfig
) -> tuple[BinaryMask, list[ScoredBox]]:
    """Apply a strategy; returns (final mask, final boxes)."""
    mask = base_mask(output, config)
    candidates = scored_boxes(output, config)

    if strategy.kind == "threshold":
        return mask, [sb for sb in candidates if sb.score >= strategy.tau]

    if strategy.kind == "top_k":
        return mask, _top_k(candidates, strategy.k)

    if strategy.kind == "fifty_pixel":
        if int(mask.sum()) < MIN_PIXELS:
            mask = np.zeros_like(mask)
        return mask, candidates

    # count_driven
    cls = int(np.argmax(output.count_logits.data))
    if cls == 0:
        return np.zeros_like(mask), []
    if cls <= 5:
        return mask, _top_k(candidates, cls)
    # 5+: threshold fallback for boxes, sub-50-pixel cleanup for the mask
    if int(mask.sum()) < MIN_PIXELS:
        mask = np.zeros_like(mask)
    return mask, [sb for sb in candidates if sb.score >= strategy.tau]
