"""Segmentation metrics and the no-target scoring rules.

Builds a tiny evaluation set by hand and walks through gIoU vs cIoU,
the precision-at-threshold curve, and no-target accuracy. The last
section reproduces the size bias that motivates gIoU: one big perfect
mask plus several small failures makes cumulative IoU look great while
the per-sample mean tells the truth.
"""

import numpy as np

from genref.data import GrexSample
from genref.geometry import mask_bbox
from genref.seg_metrics import SegPrediction, evaluate_gres


def sample(ref_id, gt, no_target=False):
    gt = np.asarray(gt, dtype=np.uint8)
    return GrexSample(
        ref_id=ref_id, image_id=ref_id, image_size=gt.shape, expression="demo",
        target_ids=() if no_target else (ref_id,), gt_mask=gt,
        gt_boxes=() if no_target else (mask_bbox(gt),),
        no_target=no_target, split="val",
    )


def band(h, w, lo, hi):
    m = np.zeros((h, w), dtype=np.uint8)
    m[lo:hi] = 1
    return m


pairs = [
    # perfect target prediction
    (SegPrediction(band(8, 8, 0, 4)), sample(1, band(8, 8, 0, 4))),
    # half-overlapping prediction: IoU 2/6
    (SegPrediction(band(8, 8, 2, 6)), sample(2, band(8, 8, 0, 4))),
    # no-target sample, correctly empty: counts as IoU 1.0
    (SegPrediction(np.zeros((8, 8))), sample(3, np.zeros((8, 8)), no_target=True)),
    # no-target sample with stray foreground: counts as IoU 0.0
    (SegPrediction(band(8, 8, 0, 1)), sample(4, np.zeros((8, 8)), no_target=True)),
]

report = evaluate_gres(pairs)
print("per-sample IoU:", [round(v, 4) for v in report.per_sample_iou])
print(f"gIoU {report.giou:.4f}   cIoU {report.ciou:.4f}")
print("Pr@X:", {t: round(v, 2) for t, v in report.pr_at.items()})
print(f"N-acc {report.n_acc:.2f}   T-acc {report.t_acc:.2f}")

# The size bias: cumulative IoU is dominated by the one huge object.
big = np.ones((64, 64), dtype=np.uint8)
biased = [(SegPrediction(big), sample(10, big))]
for i in range(4):
    gt = band(8, 8, 0, 1)
    wrong = band(8, 8, 7, 8)
    biased.append((SegPrediction(wrong), sample(20 + i, gt)))
r = evaluate_gres(biased)
print(f"\nsize-bias fixture: cIoU {r.ciou:.3f} vs gIoU {r.giou:.3f} "
      f"(four of five samples are complete failures)")
