"""Prediction file formats consumed and produced by the eval commands.

Segmentation predictions: a JSON array of
    {"ref_id": int, "segmentation": {"counts": [...], "size": [h, w]},
     "declared_no_target": bool?}

Detection predictions: a JSON array of
    {"ref_id": int, "boxes": [{"bbox": [x, y, w, h], "score": float}]}
"""

from __future__ import annotations

import json
from pathlib import Path

from .det_metrics import DetPrediction
from .geometry import BinaryMask, RleMask, ScoredBox, box_from_xywh, box_to_xywh, rle_decode, rle_encode
from .seg_metrics import SegPrediction

__all__ = [
    "write_seg_predictions",
    "load_seg_predictions",
    "write_det_predictions",
    "load_det_predictions",
]


def write_seg_predictions(path: str | Path, entries: dict[int, SegPrediction]) -> None:
    records = []
    for ref_id in sorted(entries):
        pred = entries[ref_id]
        rle = rle_encode(pred.mask)
        records.append(
            {
                "ref_id": ref_id,
                "segmentation": {"counts": list(rle.counts), "size": [rle.height, rle.width]},
                "declared_no_target": bool(pred.declared_no_target)
                if pred.declared_no_target is not None
                else None,
            }
        )
    Path(path).write_text(json.dumps(records, indent=1))


def load_seg_predictions(path: str | Path) -> dict[int, SegPrediction]:
    out: dict[int, SegPrediction] = {}
    for rec in json.loads(Path(path).read_text()):
        seg = rec["segmentation"]
        mask = rle_decode(
            RleMask(height=seg["size"][0], width=seg["size"][1], counts=tuple(seg["counts"]))
        )
        out[int(rec["ref_id"])] = SegPrediction(
            mask=mask, declared_no_target=rec.get("declared_no_target")
        )
    return out


def write_det_predictions(path: str | Path, entries: dict[int, DetPrediction]) -> None:
    records = []
    for ref_id in sorted(entries):
        pred = entries[ref_id]
        records.append(
            {
                "ref_id": ref_id,
                "boxes": [
                    {"bbox": box_to_xywh(sb.box), "score": sb.score} for sb in pred.boxes
                ],
            }
        )
    Path(path).write_text(json.dumps(records, indent=1))


def load_det_predictions(path: str | Path, require_scores: bool = False) -> dict[int, DetPrediction]:
    """Read detection predictions; boxes without scores default to 1.0.

    With ``require_scores`` (needed for AP), records lacking a score
    raise instead, listing the offending ref_ids.
    """
    out: dict[int, DetPrediction] = {}
    unscored: list[int] = []
    for rec in json.loads(Path(path).read_text()):
        ref_id = int(rec["ref_id"])
        boxes = []
        for b in rec["boxes"]:
            if "score" not in b or b["score"] is None:
                if require_scores:
                    unscored.append(ref_id)
                boxes.append(ScoredBox(box_from_xywh(b["bbox"]), 1.0))
            else:
                boxes.append(ScoredBox(box_from_xywh(b["bbox"]), float(b["score"])))
        out[ref_id] = DetPrediction(boxes)
    if unscored:
        raise ValueError(f"scores required but missing for ref_ids {sorted(set(unscored))}")
    return out
