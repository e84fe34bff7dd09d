"""Dataset records, file I/O, taxonomy, and corpus statistics.

On disk a dataset root holds one reference file per split plus a shared
COCO-style instance file:

    root/
      refs_train.json       # [{ref_id, image_id, split, sentence, ann_ids,
      refs_val.json         #   segmentation?}, ...]
      ...
      instances.json        # {"images": [{id, height, width}],
                            #  "annotations": [{ann_id, image_id, category,
                            #    bbox: [x, y, w, h],
                            #    segmentation: {counts, size}}]}
      images/<image_id>.png # optional pixel data

A reference with an empty ``ann_ids`` list is a no-target sample. The
optional per-reference ``segmentation`` stores the union mask of the
targets; when present it must agree with the union recomputed from the
instance annotations.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .geometry import (
    BinaryMask,
    Box,
    RleMask,
    box_from_xywh,
    box_to_xywh,
    mask_bbox,
    rle_decode,
    rle_encode,
)
from .text import tokenize

__all__ = [
    "SPLITS",
    "SampleKind",
    "GrexSample",
    "InstanceRecord",
    "SchemaError",
    "classify_sample",
    "load_dataset",
    "load_instances",
    "save_dataset",
    "vocab_stats",
    "check_split_hygiene",
    "refs_path",
    "instances_path",
]

SPLITS = ("train", "val", "testA", "testB")

EVAL_SPLITS = ("val", "testA", "testB")


class SchemaError(ValueError):
    """A dataset file violates the schema; carries the record location."""

    def __init__(self, location: str, message: str):
        self.location = location
        super().__init__(f"{location}: {message}")


@dataclass(frozen=True)
class InstanceRecord:
    """One segmented object instance of an image."""

    ann_id: int
    image_id: int
    mask: RleMask
    box: Box
    category: str


class SampleKind(Enum):
    single_target = "single_target"
    multi_target = "multi_target"
    no_target = "no_target"


@dataclass
class GrexSample:
    """One (image, expression, target set) record."""

    ref_id: int
    image_id: int
    image_size: tuple[int, int]  # (height, width)
    expression: str
    target_ids: tuple[int, ...]
    gt_mask: BinaryMask
    gt_boxes: tuple[Box, ...]
    no_target: bool
    split: str

    def __post_init__(self):
        empty = len(self.target_ids) == 0
        if self.no_target != empty:
            raise ValueError(f"ref {self.ref_id}: no_target flag disagrees with target_ids")
        if empty != (len(self.gt_boxes) == 0):
            raise ValueError(f"ref {self.ref_id}: gt_boxes disagree with target_ids")
        if empty != (not self.gt_mask.any()):
            raise ValueError(f"ref {self.ref_id}: gt_mask emptiness disagrees with target_ids")
        if self.gt_mask.shape != self.image_size:
            raise ValueError(f"ref {self.ref_id}: gt_mask shape {self.gt_mask.shape} != image_size")


def classify_sample(sample: GrexSample) -> SampleKind:
    if len(sample.target_ids) == 0:
        return SampleKind.no_target
    if len(sample.target_ids) == 1:
        return SampleKind.single_target
    return SampleKind.multi_target


def refs_path(root: str | Path, split: str) -> Path:
    return Path(root) / f"refs_{split}.json"


def instances_path(root: str | Path) -> Path:
    return Path(root) / "instances.json"


def _require_split(split: str) -> None:
    if split not in SPLITS:
        raise ValueError(f"unknown split {split!r}, expected one of {SPLITS}")


def _rle_from_json(obj, location: str) -> RleMask:
    try:
        h, w = obj["size"]
        return RleMask(height=int(h), width=int(w), counts=tuple(int(c) for c in obj["counts"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(location, f"bad RLE segmentation: {exc}") from exc


def _rle_to_json(rle: RleMask) -> dict:
    return {"counts": list(rle.counts), "size": [rle.height, rle.width]}


def load_instances(root: str | Path) -> tuple[dict[int, tuple[int, int]], dict[int, InstanceRecord]]:
    """Read the instance file; returns (image sizes, annotations by ann_id)."""
    path = instances_path(root)
    if not path.exists():
        raise FileNotFoundError(f"instance file missing: {path}")
    doc = json.loads(path.read_text())

    image_sizes: dict[int, tuple[int, int]] = {}
    for i, img in enumerate(doc.get("images", [])):
        loc = f"{path}: images[{i}]"
        try:
            image_sizes[int(img["id"])] = (int(img["height"]), int(img["width"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(loc, f"bad image record: {exc}") from exc

    instances: dict[int, InstanceRecord] = {}
    for i, ann in enumerate(doc.get("annotations", [])):
        loc = f"{path}: annotations[{i}]"
        try:
            ann_id = int(ann["ann_id"])
            image_id = int(ann["image_id"])
            category = str(ann["category"])
            box = box_from_xywh(ann["bbox"])
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(loc, f"bad annotation record: {exc}") from exc
        rle = _rle_from_json(ann["segmentation"], loc)
        if image_id in image_sizes and (rle.height, rle.width) != image_sizes[image_id]:
            raise SchemaError(loc, "segmentation size disagrees with image size")
        _check_tight_box(rle, box, loc)
        instances[ann_id] = InstanceRecord(ann_id, image_id, rle, box, category)
    return image_sizes, instances


def _check_tight_box(rle: RleMask, box: Box, location: str) -> None:
    tight = mask_bbox(rle_decode(rle))
    if tight is None:
        raise SchemaError(location, "instance mask has no foreground")
    slack = max(
        abs(tight.x1 - box.x1), abs(tight.y1 - box.y1),
        abs(tight.x2 - box.x2), abs(tight.y2 - box.y2),
    )
    if slack > 1.0:
        raise SchemaError(location, f"box is {slack:.1f}px away from the mask's tight bounds")


def load_dataset(root: str | Path, split: str) -> list[GrexSample]:
    """Load all references of one split as fully materialized samples."""
    _require_split(split)
    path = refs_path(root, split)
    if not path.exists():
        raise FileNotFoundError(f"reference file missing: {path}")
    image_sizes, instances = load_instances(root)

    refs = json.loads(path.read_text())
    samples = []
    for i, ref in enumerate(refs):
        loc = f"{path}: refs[{i}]"
        try:
            ref_id = int(ref["ref_id"])
            image_id = int(ref["image_id"])
            ref_split = str(ref["split"])
            sentence = str(ref["sentence"])
            ann_ids = tuple(int(a) for a in ref["ann_ids"])
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(loc, f"bad reference record: {exc}") from exc
        if ref_split != split:
            raise SchemaError(loc, f"record claims split {ref_split!r} inside {split!r} file")
        if image_id not in image_sizes:
            raise SchemaError(loc, f"unknown image_id {image_id}")
        size = image_sizes[image_id]

        gt_mask = np.zeros(size, dtype=np.uint8)
        boxes = []
        for ann_id in ann_ids:
            if ann_id not in instances:
                raise SchemaError(loc, f"unknown ann_id {ann_id}")
            inst = instances[ann_id]
            if inst.image_id != image_id:
                raise SchemaError(loc, f"ann {ann_id} belongs to image {inst.image_id}")
            gt_mask |= rle_decode(inst.mask)
            boxes.append(inst.box)

        if "segmentation" in ref and ref["segmentation"] is not None:
            stored = rle_decode(_rle_from_json(ref["segmentation"], loc))
            if stored.shape != gt_mask.shape or not (stored == gt_mask).all():
                raise SchemaError(loc, "stored union mask disagrees with per-instance union")

        samples.append(
            GrexSample(
                ref_id=ref_id,
                image_id=image_id,
                image_size=size,
                expression=sentence,
                target_ids=ann_ids,
                gt_mask=gt_mask,
                gt_boxes=tuple(boxes),
                no_target=len(ann_ids) == 0,
                split=split,
            )
        )
    return samples


def save_dataset(
    root: str | Path,
    refs_by_split: dict[str, list[dict]],
    image_sizes: dict[int, tuple[int, int]],
    instances: dict[int, InstanceRecord] | list[InstanceRecord],
) -> None:
    """Write reference files and the instance file; creates root."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    if isinstance(instances, dict):
        instances = list(instances.values())

    doc = {
        "images": [
            {"id": img_id, "height": h, "width": w}
            for img_id, (h, w) in sorted(image_sizes.items())
        ],
        "annotations": [
            {
                "ann_id": inst.ann_id,
                "image_id": inst.image_id,
                "category": inst.category,
                "bbox": box_to_xywh(inst.box),
                "segmentation": _rle_to_json(inst.mask),
            }
            for inst in sorted(instances, key=lambda r: r.ann_id)
        ],
    }
    instances_path(root).write_text(json.dumps(doc, indent=1, sort_keys=True))

    for split, refs in refs_by_split.items():
        _require_split(split)
        refs_path(root, split).write_text(json.dumps(refs, indent=1, sort_keys=True))


def sample_to_ref_json(sample: GrexSample, store_union: bool = True) -> dict:
    ref = {
        "ref_id": sample.ref_id,
        "image_id": sample.image_id,
        "split": sample.split,
        "sentence": sample.expression,
        "ann_ids": list(sample.target_ids),
    }
    if store_union and not sample.no_target:
        ref["segmentation"] = _rle_to_json(rle_encode(sample.gt_mask))
    return ref


def vocab_stats(samples_or_texts, normalized: bool = True) -> list[tuple[str, int, float]]:
    """Ranked (word, count, frequency) over all expressions.

    Frequency is count / total tokens; ties broken alphabetically so the
    ranking is deterministic.
    """
    counts: Counter[str] = Counter()
    for item in samples_or_texts:
        text = item.expression if isinstance(item, GrexSample) else item
        counts.update(tokenize(text))
    total = sum(counts.values())
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return [(w, c, c / total if (normalized and total) else 0.0) for w, c in ranked]


def check_split_hygiene(root: str | Path) -> None:
    """Fail if an image id appears in more than one held-out split."""
    seen: dict[int, str] = {}
    for split in EVAL_SPLITS:
        path = refs_path(root, split)
        if not path.exists():
            continue
        for ref in json.loads(path.read_text()):
            img = int(ref["image_id"])
            prev = seen.get(img)
            if prev is not None and prev != split:
                raise SchemaError(
                    str(path), f"image {img} appears in both {prev!r} and {split!r}"
                )
            seen[img] = split
