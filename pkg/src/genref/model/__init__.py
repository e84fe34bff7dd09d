"""Toy region-attention model for segmentation and box grounding."""

from .config import TINY_CONFIG, ModelConfig, default_vocab
from .infer import Strategy, select_outputs
from .losses import compute_loss, count_class_for, match_for_box_loss
from .network import (
    ModelOutput,
    aggregate_mask,
    decode_heads,
    encode_image,
    encode_text,
    forward,
    init_params,
    minimap_target,
    ria_forward,
    rla_forward,
)
from .train import Adam, TrainResult, TrainingDivergedError, load_checkpoint, save_checkpoint, train_toy

__all__ = [
    "ModelConfig", "TINY_CONFIG", "default_vocab",
    "Strategy", "select_outputs",
    "compute_loss", "count_class_for", "match_for_box_loss",
    "ModelOutput", "aggregate_mask", "decode_heads", "encode_image",
    "encode_text", "forward", "init_params", "minimap_target",
    "ria_forward", "rla_forward",
    "Adam", "TrainResult", "TrainingDivergedError",
    "load_checkpoint", "save_checkpoint", "train_toy",
]
