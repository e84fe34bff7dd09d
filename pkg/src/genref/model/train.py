"""Full-batch Adam trainer for the toy model, with metric tracing.

Training is deterministic for a fixed seed: parameter init, data order,
and every update use seeded numpy generators. The trace records the
per-term loss means each iteration and, periodically, segmentation and
detection metrics computed with the evaluation modules.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..autodiff import Tensor
from ..data import GrexSample
from ..det_metrics import DetPrediction, evaluate_grec
from ..seg_metrics import SegPrediction, evaluate_gres
from .config import ModelConfig
from .infer import Strategy, select_outputs
from .losses import compute_loss
from .network import forward

__all__ = [
    "Adam",
    "TrainResult",
    "TrainingDivergedError",
    "train_toy",
    "save_checkpoint",
    "load_checkpoint",
]

CHECKPOINT_FORMAT_VERSION = 1


class TrainingDivergedError(RuntimeError):
    def __init__(self, iteration: int, term: str):
        self.iteration = iteration
        super().__init__(f"non-finite {term} loss at iteration {iteration}")


class Adam:
    """Standard Adam over a named parameter dict."""

    def __init__(self, params: dict[str, Tensor], lr: float = 1e-3,
                 betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}

    def zero_grad(self):
        for p in self.params.values():
            p.zero_grad()

    def step(self):
        self.t += 1
        bc1 = 1.0 - self.b1**self.t
        bc2 = 1.0 - self.b2**self.t
        for k, p in self.params.items():
            g = p.grad
            if g is None:
                continue
            self.m[k] = self.b1 * self.m[k] + (1.0 - self.b1) * g
            self.v[k] = self.b2 * self.v[k] + (1.0 - self.b2) * g * g
            p.data -= self.lr * (self.m[k] / bc1) / (np.sqrt(self.v[k] / bc2) + self.eps)


@dataclass
class TrainResult:
    params: dict[str, Tensor]
    config: ModelConfig
    trace: list[dict] = field(default_factory=list)
    metric_trace: list[dict] = field(default_factory=list)

    @property
    def final_loss(self) -> float:
        return self.trace[-1]["total"] if self.trace else float("nan")


def _encode_all(samples, images, config):
    encoded = []
    for s in samples:
        encoded.append((images[s.image_id], config.encode_tokens(s.expression), s))
    return encoded


def evaluate_on(params, encoded, config, strategy) -> dict:
    """GRES + GREC metrics of the current parameters on encoded samples."""
    seg_pairs = []
    det_pairs = []
    for image, token_ids, sample in encoded:
        out = forward(params, image, token_ids, config)
        mask, boxes = select_outputs(out, strategy, config)
        seg_pairs.append((SegPrediction(mask), sample))
        det_pairs.append((DetPrediction(boxes), sample))
    seg = evaluate_gres(seg_pairs)
    det = evaluate_grec(det_pairs)
    return {"gIoU": seg.giou, "cIoU": seg.ciou, "Pr_F1": det.pr_f1,
            "N_acc": seg.n_acc, "T_acc": seg.t_acc}


def train_toy(
    samples: list[GrexSample],
    images: dict[int, np.ndarray],
    config: ModelConfig,
    iterations: int = 2000,
    lr: float = 2e-3,
    seed: int = 0,
    eval_every: int | None = None,
    strategy: Strategy | None = None,
    init_params_override: dict[str, Tensor] | None = None,
    stop_fn=None,
) -> TrainResult:
    """Overfit-scale training loop: full batch, fixed seed, loss trace.

    ``stop_fn``, if given, sees each periodic metric dict and may return
    True to stop early (the budget in ``iterations`` is an upper bound).
    """
    from .network import init_params

    if not samples:
        raise ValueError("no training samples")
    strategy = strategy or Strategy("count_driven", tau=config.threshold)
    params = init_params_override or init_params(config, seed=seed)
    optimizer = Adam(params, lr=lr)
    encoded = _encode_all(samples, images, config)
    result = TrainResult(params=params, config=config)
    decay_points = {int(iterations * 0.6), int(iterations * 0.85)}

    for it in range(iterations):
        if it in decay_points:
            optimizer.lr *= 0.3
        optimizer.zero_grad()
        sums: dict[str, float] = {}
        total = None
        for image, token_ids, sample in encoded:
            out = forward(params, image, token_ids, config)
            try:
                loss, breakdown = compute_loss(out, sample, config)
            except FloatingPointError:
                raise TrainingDivergedError(it, "box") from None
            total = loss if total is None else total + loss
            for k, v in breakdown.items():
                sums[k] = sums.get(k, 0.0) + v
        mean_loss = total * (1.0 / len(encoded))
        entry = {k: v / len(encoded) for k, v in sums.items()}
        entry["iteration"] = it
        if not np.isfinite(entry["total"]):
            worst = max(
                (k for k in ("mask", "box", "region", "count")),
                key=lambda k: 0.0 if np.isfinite(entry[k]) else 1.0,
            )
            raise TrainingDivergedError(it, worst)
        result.trace.append(entry)

        mean_loss.backward()
        optimizer.step()

        if eval_every and (it + 1) % eval_every == 0:
            metrics = evaluate_on(params, encoded, config, strategy)
            metrics["iteration"] = it + 1
            result.metric_trace.append(metrics)
            if stop_fn is not None and stop_fn(metrics):
                break
    return result


def save_checkpoint(path: str | Path, params: dict[str, Tensor], config: ModelConfig) -> None:
    """Versioned binary container of named arrays plus the config."""
    arrays = {f"param/{k}": p.data for k, p in params.items()}
    np.savez(
        path,
        __format_version__=np.int64(CHECKPOINT_FORMAT_VERSION),
        __config__=np.frombuffer(config.to_json().encode(), dtype=np.uint8),
        **arrays,
    )


def load_checkpoint(path: str | Path) -> tuple[dict[str, Tensor], ModelConfig]:
    with np.load(path) as archive:
        version = int(archive["__format_version__"])
        if version != CHECKPOINT_FORMAT_VERSION:
            raise ValueError(f"unsupported checkpoint format version {version}")
        config = ModelConfig.from_json(bytes(archive["__config__"]).decode())
        params = {
            key[len("param/") :]: Tensor(archive[key].copy(), requires_grad=True)
            for key in archive.files
            if key.startswith("param/")
        }
    return params, config
