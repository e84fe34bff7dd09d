"""Toy region-attention network: encoders, attention blocks, heads.

The image encoder is a three-stage convolution stack written as a
space-to-depth rearrangement followed by channel matmuls (one 4x4
stride-4 stage, then two 1x1 stages), taking an image down to a feature
grid a quarter of its side. The text encoder is a learned embedding
plus positional embedding and a mixing layer. A pixel decoder restores
full resolution with two x2 upsampling blocks, yielding the mask
feature every output pixel is scored against.

Region decoding follows the region-attention design: learnable
per-region queries cross-attend into the image feature, the resulting
region features interact through self-attention and word-level cross
attention, and per-region heads emit a mask filter, a region
probability, a box, and (pooled) a target-count distribution. The
output mask is the probability-weighted sum of per-region mask logits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..autodiff import Tensor, gather_rows, gelu, sigmoid, softmax, tensor
from ..geometry import BinaryMask
from .config import ModelConfig

__all__ = [
    "ModelOutput",
    "init_params",
    "encode_image",
    "encode_text",
    "pixel_decoder",
    "ria_forward",
    "rla_forward",
    "decode_heads",
    "forward",
    "aggregate_mask",
    "minimap_target",
    "region_anchors",
]


@dataclass
class ModelOutput:
    """Raw per-sample outputs; fields are graph Tensors during training."""

    mask_logits: Tensor  # (mask_size, mask_size)
    region_masks: Tensor  # (P^2, mask_size, mask_size)
    xr_logits: Tensor  # (P^2,)
    xr: Tensor  # (P^2,) probabilities
    boxes: Tensor  # (P^2, 4) normalized (cx, cy, w, h) in (0, 1)
    count_logits: Tensor  # (count_classes,)

    def numpy(self) -> "ModelOutput":
        return ModelOutput(
            *(Tensor(f.data.copy()) for f in (
                self.mask_logits, self.region_masks, self.xr_logits,
                self.xr, self.boxes, self.count_logits,
            ))
        )


def region_anchors(p: int) -> np.ndarray:
    """Initial normalized (cx, cy, w, h) box per region: its grid cell."""
    anchors = np.zeros((p * p, 4))
    for n in range(p * p):
        row, col = divmod(n, p)
        anchors[n] = [(col + 0.5) / p, (row + 0.5) / p, 1.0 / p, 1.0 / p]
    return anchors


def _logit(v: np.ndarray) -> np.ndarray:
    return np.log(v / (1.0 - v))


def _cell_attention_bias(p: int, feature_size: int, strength: float = 3.0) -> np.ndarray:
    """(P^2, HW) logit bias: +strength on positions inside the region's cell."""
    bias = np.zeros((p * p, feature_size * feature_size))
    edges = (np.arange(p + 1) * feature_size) // p
    for n in range(p * p):
        row, col = divmod(n, p)
        cell = np.zeros((feature_size, feature_size))
        cell[edges[row] : edges[row + 1], edges[col] : edges[col + 1]] = strength
        bias[n] = cell.ravel()
    return bias


def init_params(config: ModelConfig, seed: int = 0) -> dict[str, Tensor]:
    """Seeded parameter initialization; box biases start at region anchors."""
    rng = np.random.default_rng(seed)
    c = config.channels
    p2 = config.num_regions

    def w(name, shape, std=None):
        std = std if std is not None else 1.0 / math.sqrt(shape[0])
        params[name] = Tensor(rng.normal(0.0, std, shape), requires_grad=True)

    def b(name, size):
        params[name] = Tensor(np.zeros(size), requires_grad=True)

    params: dict[str, Tensor] = {}
    cm = config.mask_channels
    # image encoder
    w("enc1_w", (48, c)); b("enc1_b", c)
    w("enc2_w", (c, c)); b("enc2_b", c)
    w("enc3_w", (c, c)); b("enc3_b", c)
    # text encoder
    w("tok_emb", (len(config.vocab), c), std=1.0)
    w("pos_emb", (config.text_len, c), std=0.5)
    w("txt_w", (c, c)); b("txt_b", c)
    # pixel decoder (subpixel blocks: channels carry the 2x2 neighborhood)
    w("pix1_w", (c, 4 * c)); b("pix1_b", 4 * c)
    w("pix2_w", (c, 4 * cm)); b("pix2_b", 4 * cm)
    # region-image attention; the logit bias starts peaked on each
    # query's own grid cell so queries carry a spatial identity from
    # the first step (the minimap supervision keeps it there)
    w("q_r", (p2, c), std=1.0)
    w("w_ik", (c, c))
    w("w_iv", (c, c))
    params["ria_bias"] = Tensor(
        _cell_attention_bias(config.regions_per_side, config.feature_size),
        requires_grad=True,
    )
    # region-language attention
    w("w_sq", (c, c)); w("w_sk", (c, c)); w("w_sv", (c, c))
    w("w_lq", (c, c)); w("w_lk", (c, c))
    w("mlp1_w", (c, c)); b("mlp1_b", c)
    w("mlp2_w", (c, c)); b("mlp2_b", c)
    # heads; the region-probability bias starts at a low base rate so
    # training spends its time separating regions, not recalibrating
    w("filter_w", (c, cm)); b("filter_b", cm)
    w("xr_w", (c, 1))
    params["xr_b"] = Tensor(np.full(1, -2.2), requires_grad=True)
    w("box1_w", (c, c)); b("box1_b", c)
    w("box2_w", (c, 4), std=0.01)
    params["box2_b"] = Tensor(
        _logit(np.clip(region_anchors(config.regions_per_side), 1e-4, 1 - 1e-4)),
        requires_grad=True,
    )
    w("cnt1_w", (c, c)); b("cnt1_b", c)
    w("cnt2_w", (c, config.count_classes)); b("cnt2_b", config.count_classes)
    return params


def _space_to_depth(x: Tensor, factor: int) -> Tensor:
    h, w, c = x.shape
    x = x.reshape(h // factor, factor, w // factor, factor, c)
    x = x.transpose(0, 2, 1, 3, 4)
    return x.reshape(h // factor, w // factor, factor * factor * c)


def _depth_to_space(x: Tensor, factor: int) -> Tensor:
    h, w, fc = x.shape
    c = fc // (factor * factor)
    x = x.reshape(h, w, factor, factor, c)
    x = x.transpose(0, 2, 1, 3, 4)
    return x.reshape(h * factor, w * factor, c)


def encode_image(image: np.ndarray, params: dict[str, Tensor], config: ModelConfig) -> Tensor:
    """Image (H, W, 3) uint8 or float -> feature grid (H/4, W/4, C).

    Stage 1 is a 4x4 stride-4 convolution (space-to-depth + matmul);
    stages 2 and 3 are 1x1 convolutions at feature resolution.
    """
    if image.shape != (config.image_size, config.image_size, 3):
        raise ValueError(
            f"image shape {image.shape} != ({config.image_size}, {config.image_size}, 3)"
        )
    x = tensor(np.asarray(image, dtype=np.float64) / 255.0)
    f = config.feature_size
    c = config.channels
    x = gelu(_space_to_depth(x, 4).reshape(-1, 48) @ params["enc1_w"] + params["enc1_b"])
    x = gelu(x @ params["enc2_w"] + params["enc2_b"])
    x = gelu(x @ params["enc3_w"] + params["enc3_b"])
    return x.reshape(f, f, c)


def encode_text(token_ids, params: dict[str, Tensor], config: ModelConfig) -> Tensor:
    """Token ids (length N_t) -> text feature (N_t, C)."""
    ids = np.asarray(token_ids, dtype=np.int64)
    if ids.shape != (config.text_len,):
        raise ValueError(f"expected {config.text_len} token ids, got shape {ids.shape}")
    if ids.min() < 0 or ids.max() >= len(config.vocab):
        raise ValueError("token id outside vocabulary")
    emb = gather_rows(params["tok_emb"], ids) + params["pos_emb"]
    return gelu(emb @ params["txt_w"] + params["txt_b"])


def pixel_decoder(f_i: Tensor, params: dict[str, Tensor], config: ModelConfig) -> Tensor:
    """Image feature -> mask feature, two x2 subpixel upsampling blocks.

    Each block predicts a 2x2 neighborhood per position (channel
    expansion + depth-to-space), so every output pixel gets independent
    features rather than a nearest-copy of its low-resolution parent.
    """
    f = config.feature_size
    c = config.channels
    x = gelu(f_i.reshape(-1, c) @ params["pix1_w"] + params["pix1_b"])
    x = _depth_to_space(x.reshape(f, f, 4 * c), 2)
    x = gelu(x.reshape(-1, c) @ params["pix2_w"] + params["pix2_b"])
    x = _depth_to_space(x.reshape(2 * f, 2 * f, 4 * config.mask_channels), 2)
    return x


def ria_forward(f_i: Tensor, q_r: Tensor, params: dict[str, Tensor]) -> tuple[Tensor, Tensor]:
    """Region-image cross attention: (attention (P^2, HW), features (P^2, C)).

    Attention logits carry a learnable per-region position bias (as in
    windowed-attention backbones) on top of the query-key product.
    """
    h, w, c = f_i.shape
    flat = f_i.reshape(h * w, c)
    keys = gelu(flat @ params["w_ik"])
    values = gelu(flat @ params["w_iv"])
    logits = q_r @ keys.T
    if "ria_bias" in params:
        logits = logits + params["ria_bias"]
    attention = softmax(logits, axis=-1)
    return attention, attention @ values


def region_self_attention(f_r_img: Tensor, params: dict[str, Tensor]) -> tuple[Tensor, Tensor]:
    """Scaled dot-product self-attention over region features."""
    c = f_r_img.shape[1]
    scale = 1.0 / math.sqrt(c)
    sq = f_r_img @ params["w_sq"]
    sk = f_r_img @ params["w_sk"]
    sv = f_r_img @ params["w_sv"]
    attention = softmax((sq @ sk.T) * scale, axis=-1)
    return attention, attention @ sv


def language_attention(f_r_img: Tensor, f_t: Tensor, params: dict[str, Tensor]) -> tuple[Tensor, Tensor]:
    """Word-level cross attention: (attention (P^2, N_t), features (P^2, C))."""
    a_l = softmax(gelu(f_r_img @ params["w_lq"]) @ gelu(f_t @ params["w_lk"]).T, axis=-1)
    return a_l, a_l @ f_t


def rla_forward(f_r_img: Tensor, f_t: Tensor, params: dict[str, Tensor]) -> Tensor:
    """Region-language block: self-attention + word attention + fusion MLP."""
    _, f_r1 = region_self_attention(f_r_img, params)
    _, f_r2 = language_attention(f_r_img, f_t, params)
    fused = f_r_img + f_r1 + f_r2
    return gelu(fused @ params["mlp1_w"] + params["mlp1_b"]) @ params["mlp2_w"] + params["mlp2_b"]


def decode_heads(
    f_r: Tensor, f_m: Tensor, params: dict[str, Tensor], config: ModelConfig
) -> ModelOutput:
    """Per-region heads plus the aggregated output mask."""
    m = config.mask_size
    p2 = config.num_regions

    f_f = f_r @ params["filter_w"] + params["filter_b"]
    region_masks = (f_m.reshape(m * m, -1) @ f_f.T).transpose(1, 0)  # (P^2, m*m)

    xr_logits = (f_r @ params["xr_w"] + params["xr_b"]).reshape(p2)
    xr = sigmoid(xr_logits)

    mask_logits = (xr.reshape(p2, 1) * region_masks).sum(axis=0)

    boxes = sigmoid(gelu(f_r @ params["box1_w"] + params["box1_b"]) @ params["box2_w"] + params["box2_b"])
    pooled = f_r.mean(axis=0).reshape(1, -1)
    count_logits = (
        gelu(pooled @ params["cnt1_w"] + params["cnt1_b"]) @ params["cnt2_w"] + params["cnt2_b"]
    ).reshape(config.count_classes)

    return ModelOutput(
        mask_logits=mask_logits.reshape(m, m),
        region_masks=region_masks.reshape(p2, m, m),
        xr_logits=xr_logits,
        xr=xr,
        boxes=boxes,
        count_logits=count_logits,
    )


def forward(
    params: dict[str, Tensor],
    image: np.ndarray,
    token_ids,
    config: ModelConfig,
) -> ModelOutput:
    """Full forward pass for one (image, expression) pair."""
    f_i = encode_image(image, params, config)
    f_t = encode_text(token_ids, params, config)
    f_m = pixel_decoder(f_i, params, config)
    _, f_r_img = ria_forward(f_i, params["q_r"], params)
    f_r = rla_forward(f_r_img, f_t, params)
    return decode_heads(f_r, f_m, params, config)


def aggregate_mask(xr: np.ndarray, region_masks: np.ndarray) -> np.ndarray:
    """Weighted sum of per-region mask logits: sum_n xr[n] * M[n]."""
    xr = np.asarray(xr, dtype=np.float64)
    region_masks = np.asarray(region_masks, dtype=np.float64)
    if xr.shape[0] != region_masks.shape[0]:
        raise ValueError("one weight per region mask required")
    return np.einsum("n,nhw->hw", xr, region_masks)


def minimap_target(gt_mask: BinaryMask, p: int) -> np.ndarray:
    """P x P occupancy map: foreground fraction per grid cell."""
    mask = np.asarray(gt_mask)
    h, w = mask.shape
    rows = (np.arange(p + 1) * h) // p
    cols = (np.arange(p + 1) * w) // p
    out = np.zeros(p * p)
    for r in range(p):
        for c in range(p):
            cell = mask[rows[r] : rows[r + 1], cols[c] : cols[c + 1]]
            out[r * p + c] = float(np.count_nonzero(cell)) / cell.size
    return out
