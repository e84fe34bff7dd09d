"""Detection metrics: sample-level F1 success versus ranked AP.

Shows the greedy one-to-one matching, why one redundant box fails an
otherwise perfect sample under the F1 criterion, and how averaged AP
barely notices the same redundancy, the property that makes the strict
per-sample metric the headline number for this task.
"""

import numpy as np

from genref.data import GrexSample
from genref.det_metrics import (
    DetPrediction,
    average_precision,
    evaluate_grec,
    match_boxes,
)
from genref.geometry import Box, ScoredBox


def sample(ref_id, boxes):
    mask = np.zeros((64, 64), dtype=np.uint8)
    for b in boxes:
        mask[int(b.y1) : int(b.y2), int(b.x1) : int(b.x2)] = 1
    return GrexSample(
        ref_id=ref_id, image_id=ref_id, image_size=(64, 64), expression="demo",
        target_ids=tuple(range(len(boxes))), gt_mask=mask, gt_boxes=tuple(boxes),
        no_target=len(boxes) == 0, split="val",
    )


gts = [Box(4, 4, 16, 16), Box(30, 30, 44, 44)]

# Greedy matching: two predictions near one ground truth; only the
# higher-IoU one becomes a true positive.
preds = [Box(4, 4, 16, 14), Box(4, 4, 16, 10), Box(30, 30, 44, 42)]
result = match_boxes(preds, gts, 0.5)
print("matched pairs (pred, gt, IoU):", [(i, j, round(v, 2)) for i, j, v in result.tp_pairs])
print("false positives:", result.fp_preds, "  false negatives:", result.fn_gts)

# A perfect sample, then the same with one low-confidence extra box.
perfect = [(DetPrediction([ScoredBox(g, 0.9) for g in gts]), sample(1, gts))]
noisy = [
    (
        DetPrediction([ScoredBox(g, 0.9) for g in gts] + [ScoredBox(Box(50, 2, 58, 10), 0.05)]),
        sample(1, gts),
    )
]
print(f"\nPr@F1 perfect: {evaluate_grec(perfect).pr_f1:.2f}")
print(f"Pr@F1 with one stray low-score box: {evaluate_grec(noisy).pr_f1:.2f}")
print(f"AP    perfect: {average_precision(perfect):.3f}")
print(f"AP    with the stray box: {average_precision(noisy):.3f}   (barely moves)")

# No-target samples succeed only with empty output.
nt = sample(2, [])
print(f"\nno-target, empty output:  success -> Pr@F1 "
      f"{evaluate_grec([(DetPrediction([]), nt)]).pr_f1:.2f}")
print(f"no-target, one box:       failure -> Pr@F1 "
      f"{evaluate_grec([(DetPrediction([ScoredBox(gts[0], 0.9)]), nt)]).pr_f1:.2f}")
