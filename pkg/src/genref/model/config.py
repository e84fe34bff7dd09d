"""Configuration for the toy region-attention model."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from ..synth import PALETTE, SHAPE_NAMES
from ..text import tokenize

PAD_TOKEN = "<pad>"

COUNT_CLASSES = ("0", "1", "2", "3", "4", "5", "5+")


def default_vocab() -> tuple[str, ...]:
    """Vocabulary covering the synthetic expression grammar."""
    words = {PAD_TOKEN}
    words |= set(PALETTE)
    for s in SHAPE_NAMES:
        words |= {s, s + "s"}
    words |= {
        "shape", "shapes", "one", "ones", "the", "all", "and", "except",
        "on", "left", "right", "top", "bottom",
        "two", "three", "four", "five",
    }
    return tuple(sorted(words))


@dataclass(frozen=True)
class ModelConfig:
    channels: int = 64  # feature width C
    mask_channels: int = 32  # mask feature width (slimmer: it covers every pixel)
    regions_per_side: int = 4  # grid side P
    image_size: int = 64
    text_len: int = 8  # token positions N_t
    vocab: tuple[str, ...] = field(default_factory=default_vocab)
    lambda_mask: float = 2.0
    lambda_box: float = 5.0
    lambda_region: float = 0.2
    lambda_count: float = 1.0
    threshold: float = 0.7  # default box-score cut for the threshold strategy

    # encoder downsamples x4; two x2 upsampling blocks restore full resolution
    @property
    def feature_size(self) -> int:
        return self.image_size // 4

    @property
    def mask_size(self) -> int:
        return self.image_size

    @property
    def num_regions(self) -> int:
        return self.regions_per_side**2

    @property
    def count_classes(self) -> int:
        return len(COUNT_CLASSES)

    def __post_init__(self):
        if self.regions_per_side < 1:
            raise ValueError("regions_per_side must be >= 1")
        if self.image_size % 4 != 0:
            raise ValueError("image_size must be divisible by 4")
        if self.feature_size < self.regions_per_side:
            raise ValueError("feature grid must be at least regions_per_side wide")
        if self.text_len < 1:
            raise ValueError("text_len must be >= 1")
        if min(self.lambda_mask, self.lambda_box, self.lambda_region, self.lambda_count) < 0:
            raise ValueError("loss weights must be non-negative")
        if PAD_TOKEN not in self.vocab:
            raise ValueError(f"vocab must contain {PAD_TOKEN!r}")

    @property
    def loss_weights(self) -> tuple[float, float, float, float]:
        return (self.lambda_mask, self.lambda_box, self.lambda_region, self.lambda_count)

    def encode_tokens(self, expression: str) -> list[int]:
        """Token ids of an expression, padded or truncated to text_len."""
        index = {w: i for i, w in enumerate(self.vocab)}
        ids = []
        for word in tokenize(expression):
            if word not in index:
                raise ValueError(f"token {word!r} not in model vocabulary")
            ids.append(index[word])
        ids = ids[: self.text_len]
        pad = index[PAD_TOKEN]
        return ids + [pad] * (self.text_len - len(ids))

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ModelConfig":
        raw = json.loads(text)
        raw["vocab"] = tuple(raw["vocab"])
        return cls(**raw)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path: str | Path) -> "ModelConfig":
        return cls.from_json(Path(path).read_text())


TINY_CONFIG = ModelConfig(channels=8, mask_channels=8, regions_per_side=2, image_size=32, text_len=4)
