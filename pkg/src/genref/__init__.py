"""genref: a desk-scale toolkit for generalized referring expressions.

Grounding free-form phrases to zero, one, or many objects: evaluation
metrics for segmentation, box grounding, and expression generation;
gRefCOCO-style dataset tooling with a synthetic scene generator; a toy
region-attention model with a verified-gradient trainer; and a
two-player annotation/validation service.

>>> import genref
>>> ds = genref.generate_synthetic(seed=7)
>>> report = genref.evaluate_gres(
...     [(genref.SegPrediction(s.gt_mask), s) for s in ds.samples]
... )
>>> report.giou
1.0
"""

__version__ = "0.1.0"

from .data import (
    GrexSample,
    InstanceRecord,
    SampleKind,
    SchemaError,
    check_split_hygiene,
    classify_sample,
    load_dataset,
    save_dataset,
    vocab_stats,
)
from .det_metrics import (
    DetPrediction,
    DetReport,
    MatchResult,
    average_precision,
    evaluate_grec,
    match_boxes,
    sample_success,
)
from .gen_metrics import CaptionPair, GregReport, cider, evaluate_greg, meteor
from .geometry import (
    BinaryMask,
    Box,
    RleMask,
    ScoredBox,
    box_giou,
    box_iou,
    mask_iou,
    rle_decode,
    rle_encode,
)
from .seg_metrics import SegPrediction, SegReport, evaluate_gres, per_sample_iou
from .synth import SceneConfig, SyntheticDataset, generate_synthetic, resolve_expression
from .text import tokenize

__all__ = [
    "__version__",
    # geometry
    "BinaryMask", "Box", "RleMask", "ScoredBox",
    "box_giou", "box_iou", "mask_iou", "rle_decode", "rle_encode",
    # data
    "GrexSample", "InstanceRecord", "SampleKind", "SchemaError",
    "check_split_hygiene", "classify_sample", "load_dataset", "save_dataset",
    "vocab_stats",
    # synthetic scenes
    "SceneConfig", "SyntheticDataset", "generate_synthetic", "resolve_expression",
    # metrics
    "SegPrediction", "SegReport", "evaluate_gres", "per_sample_iou",
    "DetPrediction", "DetReport", "MatchResult",
    "average_precision", "evaluate_grec", "match_boxes", "sample_success",
    "CaptionPair", "GregReport", "cider", "evaluate_greg", "meteor",
    "tokenize",
]
