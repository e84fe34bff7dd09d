"""Multi-task loss: mask BCE, matched box regression, minimap BCE, count CE.

Boxes are supervised through a one-to-one Hungarian assignment between
the per-region box predictions and the ground-truth boxes, with
assignment cost L1 + (1 - GIoU) in normalized center-size coordinates.
Unassigned regions receive no box loss; the assignment itself is
treated as a constant during backpropagation.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import linear_sum_assignment

from ..autodiff import Tensor, absval, bce_with_logits, maximum, minimum, relu, softmax_cross_entropy, tensor, upsample_nearest
from ..data import GrexSample
from ..geometry import Box
from .config import ModelConfig
from .network import ModelOutput, minimap_target

__all__ = [
    "box_to_normalized_cxcywh",
    "normalized_cxcywh_to_box",
    "match_for_box_loss",
    "box_pair_cost",
    "compute_loss",
    "count_class_for",
]


def box_to_normalized_cxcywh(box: Box, image_size: int) -> np.ndarray:
    w = box.x2 - box.x1
    h = box.y2 - box.y1
    return np.array(
        [
            (box.x1 + w / 2) / image_size,
            (box.y1 + h / 2) / image_size,
            w / image_size,
            h / image_size,
        ]
    )


def normalized_cxcywh_to_box(v: np.ndarray, image_size: int) -> Box:
    cx, cy, w, h = (float(x) * image_size for x in v)
    return Box(cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2)


def _giou_cxcywh(a: np.ndarray, b: np.ndarray) -> float:
    """GIoU of two (cx, cy, w, h) boxes, plain numpy (for matching costs)."""
    ax1, ay1 = a[0] - a[2] / 2, a[1] - a[3] / 2
    ax2, ay2 = a[0] + a[2] / 2, a[1] + a[3] / 2
    bx1, by1 = b[0] - b[2] / 2, b[1] - b[3] / 2
    bx2, by2 = b[0] + b[2] / 2, b[1] + b[3] / 2
    iw = max(0.0, min(ax2, bx2) - max(ax1, bx1))
    ih = max(0.0, min(ay2, by2) - max(ay1, by1))
    inter = iw * ih
    union = a[2] * a[3] + b[2] * b[3] - inter
    ex = max(ax2, bx2) - min(ax1, bx1)
    ey = max(ay2, by2) - min(ay1, by1)
    enclose = ex * ey
    iou = inter / union if union > 0 else 0.0
    if enclose <= 0:
        return iou
    return iou - (enclose - union) / enclose


def box_pair_cost(pred: np.ndarray, gt: np.ndarray) -> float:
    """Assignment cost of one (prediction, ground-truth) pair."""
    return float(np.abs(pred - gt).sum()) + (1.0 - _giou_cxcywh(pred, gt))


def match_for_box_loss(pred_boxes: np.ndarray, gt_boxes: np.ndarray) -> list[tuple[int, int]]:
    """Optimal one-to-one assignment of regions to ground-truth boxes.

    Both arguments are (n, 4) arrays of normalized (cx, cy, w, h).
    Returns (region index, gt index) pairs; every gt is assigned.
    """
    n_pred, n_gt = len(pred_boxes), len(gt_boxes)
    if n_gt == 0:
        return []
    if n_gt > n_pred:
        raise ValueError(f"{n_gt} ground-truth boxes exceed {n_pred} candidate regions")
    cost = np.zeros((n_pred, n_gt))
    for i in range(n_pred):
        for j in range(n_gt):
            cost[i, j] = box_pair_cost(pred_boxes[i], gt_boxes[j])
    if not np.isfinite(cost).all():
        raise FloatingPointError("non-finite box matching costs")
    rows, cols = linear_sum_assignment(cost)
    return sorted(zip(rows.tolist(), cols.tolist()), key=lambda rc: rc[1])


def _giou_tensor(pred: Tensor, gt: np.ndarray) -> Tensor:
    """Differentiable GIoU of a predicted (4,) tensor vs a constant gt box."""
    px1 = pred[0] - pred[2] * 0.5
    py1 = pred[1] - pred[3] * 0.5
    px2 = pred[0] + pred[2] * 0.5
    py2 = pred[1] + pred[3] * 0.5
    gx1, gy1 = gt[0] - gt[2] / 2, gt[1] - gt[3] / 2
    gx2, gy2 = gt[0] + gt[2] / 2, gt[1] + gt[3] / 2

    iw = relu(minimum(px2, tensor(gx2)) - maximum(px1, tensor(gx1)))
    ih = relu(minimum(py2, tensor(gy2)) - maximum(py1, tensor(gy1)))
    inter = iw * ih
    union = pred[2] * pred[3] + float(gt[2] * gt[3]) - inter

    ew = maximum(px2, tensor(gx2)) - minimum(px1, tensor(gx1))
    eh = maximum(py2, tensor(gy2)) - minimum(py1, tensor(gy1))
    enclose = ew * eh
    return inter / union - (enclose - union) / enclose


def count_class_for(n_targets: int) -> int:
    """Map a target count onto the classes 0..5 and 5+ (index 6)."""
    return n_targets if n_targets <= 5 else 6


def compute_loss(
    output: ModelOutput,
    gt: GrexSample,
    config: ModelConfig,
) -> tuple[Tensor, dict[str, float]]:
    """Weighted total loss and its per-term breakdown."""
    lam_m, lam_b, lam_xr, lam_no = config.loss_weights

    factor = config.image_size // config.mask_size
    full_logits = output.mask_logits if factor == 1 else upsample_nearest(output.mask_logits, factor)
    loss_mask = bce_with_logits(full_logits, np.asarray(gt.gt_mask, dtype=np.float64))

    if gt.gt_boxes:
        gt_arr = np.stack(
            [box_to_normalized_cxcywh(b, config.image_size) for b in gt.gt_boxes]
        )
        pairs = match_for_box_loss(output.boxes.data, gt_arr)
        terms = []
        for region, j in pairs:
            pred_row = output.boxes[region]
            gt_row = gt_arr[j]
            l1 = absval(pred_row - gt_row).sum()
            terms.append(l1 + (1.0 - _giou_tensor(pred_row, gt_row)))
        total_box = terms[0]
        for t in terms[1:]:
            total_box = total_box + t
        loss_box = total_box * (1.0 / len(terms))
    else:
        loss_box = tensor(0.0)

    # summed over cells (not averaged): the per-region probabilities are
    # the box-ranking signal and P^2 averaging starves them of gradient
    occupancy = minimap_target(gt.gt_mask, config.regions_per_side)
    loss_region = bce_with_logits(output.xr_logits, occupancy) * float(config.num_regions)

    loss_count = softmax_cross_entropy(output.count_logits, count_class_for(len(gt.target_ids)))

    total = (
        loss_mask * lam_m + loss_box * lam_b + loss_region * lam_xr + loss_count * lam_no
    )
    breakdown = {
        "mask": float(loss_mask.data),
        "box": float(loss_box.data),
        "region": float(loss_region.data),
        "count": float(loss_count.data),
        "total": float(total.data),
    }
    return total, breakdown
