"""Segmentation evaluation with explicit no-target rules.

Per-sample IoU: a no-target ground truth scores 1.0 when the predicted
mask has no foreground pixel and 0.0 otherwise; target samples score
plain pixel IoU. The dataset-level numbers are

  gIoU   mean of per-sample IoU over all samples,
  cIoU   total intersection / total union pixels (no-target samples with
         an empty prediction add nothing to either sum; stray foreground
         on a no-target sample does enter the union sum),
  Pr@X   fraction of samples with per-sample IoU strictly above X,
  N-acc  recall of empty predictions on no-target samples,
  T-acc  fraction of target samples with a non-empty prediction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import GrexSample
from .geometry import BinaryMask, as_mask, mask_intersection_union

__all__ = [
    "SegPrediction",
    "SegReport",
    "PR_THRESHOLDS",
    "per_sample_iou",
    "evaluate_gres",
]

PR_THRESHOLDS = (0.5, 0.6, 0.7, 0.8, 0.9)


@dataclass
class SegPrediction:
    """A predicted mask, optionally backed by a dedicated no-target flag.

    A truthy ``declared_no_target`` zeroes the mask at construction, so
    emptiness checks downstream need only count foreground pixels.
    """

    mask: BinaryMask
    declared_no_target: bool | None = None

    def __post_init__(self):
        self.mask = as_mask(self.mask)
        if self.declared_no_target:
            self.mask = np.zeros_like(self.mask)

    @property
    def is_empty(self) -> bool:
        return not self.mask.any()


@dataclass
class SegReport:
    giou: float
    ciou: float
    pr_at: dict[float, float]
    n_acc: float | None
    t_acc: float | None
    per_sample_iou: list[float]
    ciou_degenerate: bool = False
    counts: dict[str, int] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "gIoU": self.giou,
            "cIoU": self.ciou,
            "cIoU_degenerate": self.ciou_degenerate,
            "Pr": {f"{t:.1f}": v for t, v in self.pr_at.items()},
            "N_acc": self.n_acc,
            "T_acc": self.t_acc,
            "counts": self.counts,
        }


def per_sample_iou(pred: SegPrediction, gt: GrexSample) -> float:
    """IoU of one prediction; applies the no-target scoring convention."""
    if pred.mask.shape != gt.gt_mask.shape:
        raise ValueError(
            f"ref {gt.ref_id}: prediction shape {pred.mask.shape} != "
            f"ground truth {gt.gt_mask.shape}"
        )
    if gt.no_target:
        return 1.0 if pred.is_empty else 0.0
    inter, union = mask_intersection_union(pred.mask, gt.gt_mask)
    return inter / union if union else 1.0


def evaluate_gres(
    pairs: list[tuple[SegPrediction, GrexSample]],
    thresholds: tuple[float, ...] = PR_THRESHOLDS,
) -> SegReport:
    """Aggregate GRES metrics over aligned (prediction, sample) pairs."""
    if not pairs:
        raise ValueError("empty evaluation set")

    ious = []
    inter_sum = 0
    union_sum = 0
    nt_tp = nt_fn = 0  # no-target samples: empty vs non-empty prediction
    tg_tn = tg_fp = 0  # target samples: non-empty vs empty prediction

    for pred, gt in pairs:
        iou = per_sample_iou(pred, gt)
        ious.append(iou)
        inter, union = mask_intersection_union(pred.mask, gt.gt_mask)
        inter_sum += inter
        union_sum += union
        if gt.no_target:
            if pred.is_empty:
                nt_tp += 1
            else:
                nt_fn += 1
        else:
            if pred.is_empty:
                tg_fp += 1
            else:
                tg_tn += 1

    degenerate = union_sum == 0
    ciou = 0.0 if degenerate else inter_sum / union_sum
    n_nt = nt_tp + nt_fn
    n_tg = tg_tn + tg_fp
    return SegReport(
        giou=float(np.mean(ious)),
        ciou=ciou,
        pr_at={t: sum(v > t for v in ious) / len(ious) for t in thresholds},
        n_acc=nt_tp / n_nt if n_nt else None,
        t_acc=tg_tn / n_tg if n_tg else None,
        per_sample_iou=ious,
        ciou_degenerate=degenerate,
        counts={"total": len(pairs), "no_target": n_nt, "target": n_tg},
    )
