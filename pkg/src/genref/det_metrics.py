"""Detection evaluation: F1-based sample success, N-acc/T-acc, and AP.

A sample counts as successful when greedy IoU matching of its predicted
boxes against the ground-truth boxes leaves neither false positives nor
false negatives (no-target samples succeed exactly when the prediction
is empty). Pr@F1 is the fraction of successful samples at IoU 0.5.

Matching is greedy by descending IoU over all (prediction, ground
truth) pairs at or above the threshold; each side is used at most once.
Ties break on the lower prediction index, then the lower ground-truth
index, so results are deterministic.

AP follows the COCO threshold range 0.50:0.05:0.95: per threshold the
dataset's predictions are ranked by score, matched greedily within
their own sample, and the area under the precision-recall curve is
computed with all-point interpolation (precision envelope); AP is the
mean over thresholds.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import GrexSample
from .geometry import Box, ScoredBox, box_iou

__all__ = [
    "DetPrediction",
    "MatchResult",
    "DetReport",
    "AP_THRESHOLDS",
    "match_boxes",
    "sample_success",
    "evaluate_grec",
    "average_precision",
]

AP_THRESHOLDS = tuple(round(0.5 + 0.05 * i, 2) for i in range(10))


@dataclass
class DetPrediction:
    boxes: list[ScoredBox] = field(default_factory=list)

    @property
    def is_empty(self) -> bool:
        return len(self.boxes) == 0


@dataclass
class MatchResult:
    tp_pairs: list[tuple[int, int, float]]  # (pred index, gt index, iou)
    fp_preds: list[int]
    fn_gts: list[int]

    @property
    def success(self) -> bool:
        return not self.fp_preds and not self.fn_gts


@dataclass
class DetReport:
    pr_f1: float
    n_acc: float | None
    t_acc: float | None
    ap: float | None
    counts: dict[str, int] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "Pr_F1": self.pr_f1,
            "N_acc": self.n_acc,
            "T_acc": self.t_acc,
            "AP": self.ap,
            "counts": self.counts,
        }


def match_boxes(preds: list[Box], gts: list[Box], iou_threshold: float = 0.5) -> MatchResult:
    """Greedy one-to-one matching by descending IoU at the threshold."""
    if not 0.0 < iou_threshold <= 1.0:
        raise ValueError(f"iou_threshold {iou_threshold} outside (0, 1]")
    candidates = []
    for i, p in enumerate(preds):
        for j, g in enumerate(gts):
            iou = box_iou(p, g)
            if iou >= iou_threshold:
                candidates.append((-iou, i, j))
    candidates.sort()

    pred_used = [False] * len(preds)
    gt_used = [False] * len(gts)
    tp_pairs = []
    for neg_iou, i, j in candidates:
        if pred_used[i] or gt_used[j]:
            continue
        pred_used[i] = True
        gt_used[j] = True
        tp_pairs.append((i, j, -neg_iou))
    return MatchResult(
        tp_pairs=tp_pairs,
        fp_preds=[i for i, used in enumerate(pred_used) if not used],
        fn_gts=[j for j, used in enumerate(gt_used) if not used],
    )


def sample_success(pred: DetPrediction, gt: GrexSample, iou_threshold: float = 0.5) -> bool:
    """Zero-FP, zero-FN criterion; empty output succeeds on no-target."""
    if gt.no_target:
        return pred.is_empty
    boxes = [sb.box for sb in pred.boxes]
    return match_boxes(boxes, list(gt.gt_boxes), iou_threshold).success


def evaluate_grec(
    pairs: list[tuple[DetPrediction, GrexSample]],
    iou_threshold: float = 0.5,
    with_ap: bool = False,
) -> DetReport:
    """Aggregate GREC metrics over aligned (prediction, sample) pairs."""
    if not pairs:
        raise ValueError("empty evaluation set")
    successes = 0
    nt_tp = nt_fn = 0
    tg_tn = tg_fp = 0
    for pred, gt in pairs:
        if sample_success(pred, gt, iou_threshold):
            successes += 1
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
    n_nt = nt_tp + nt_fn
    n_tg = tg_tn + tg_fp
    return DetReport(
        pr_f1=successes / len(pairs),
        n_acc=nt_tp / n_nt if n_nt else None,
        t_acc=tg_tn / n_tg if n_tg else None,
        ap=average_precision(pairs) if with_ap else None,
        counts={"total": len(pairs), "no_target": n_nt, "target": n_tg},
    )


def _ap_at_threshold(pairs, threshold: float) -> float:
    """AP at one IoU threshold over the whole dataset's scored boxes."""
    total_gt = sum(len(gt.gt_boxes) for _, gt in pairs)
    ranked = []  # (score, sample index, pred index)
    for s, (pred, _gt) in enumerate(pairs):
        for k, sb in enumerate(pred.boxes):
            ranked.append((-sb.score, s, k))
    ranked.sort()
    if total_gt == 0 or not ranked:
        return 0.0

    gt_used = {s: [False] * len(gt.gt_boxes) for s, (_p, gt) in enumerate(pairs)}
    tp_flags = []
    for _neg_score, s, k in ranked:
        pred, gt = pairs[s]
        box = pred.boxes[k].box
        best_iou, best_j = 0.0, -1
        for j, g in enumerate(gt.gt_boxes):
            if gt_used[s][j]:
                continue
            iou = box_iou(box, g)
            if iou > best_iou:
                best_iou, best_j = iou, j
        if best_j >= 0 and best_iou >= threshold:
            gt_used[s][best_j] = True
            tp_flags.append(True)
        else:
            tp_flags.append(False)

    tp_cum = np.cumsum(tp_flags)
    ranks = np.arange(1, len(tp_flags) + 1)
    precision = tp_cum / ranks
    recall = tp_cum / total_gt

    # all-point interpolation: running max of precision from the right
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    ap = 0.0
    prev_recall = 0.0
    for p, r in zip(envelope, recall):
        if r > prev_recall:
            ap += (r - prev_recall) * p
            prev_recall = r
    return float(ap)


def average_precision(pairs, thresholds: tuple[float, ...] = AP_THRESHOLDS) -> float:
    """Mean AP over the COCO IoU threshold range."""
    if not pairs:
        raise ValueError("empty evaluation set")
    for pred, gt in pairs:
        for sb in pred.boxes:
            if sb.score is None:
                raise ValueError(f"ref {gt.ref_id}: scored boxes required for AP")
    return float(np.mean([_ap_at_threshold(pairs, t) for t in thresholds]))
