"""Command-line entry points.

    genref generate          write a synthetic dataset
    genref stats             taxonomy counts and word frequencies
    genref eval-gres         segmentation metrics from a prediction file
    genref eval-grec         detection metrics from a prediction file
    genref eval-greg         expression metrics from a candidate file
    genref train-toy         train the toy model, write checkpoint + trace
    genref predict           run a checkpoint, write prediction files
    genref serve-annotation  run the two-player annotation service

Exit codes: 0 success, 2 input error, 3 a metric raised its
degenerate-input flag. Reports go to stdout as a small table and, with
--out, to a machine-readable JSON document.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_DEGENERATE = 3


class InputError(Exception):
    pass


def _dataset_root(args) -> Path:
    root = args.dataset or os.environ.get("GENREF_DATA_ROOT")
    if not root:
        raise InputError("no dataset root: pass --dataset or set GENREF_DATA_ROOT")
    return Path(root)


def _load_split(args):
    from .data import load_dataset

    try:
        return load_dataset(_dataset_root(args), args.split)
    except (FileNotFoundError, ValueError) as exc:
        raise InputError(str(exc)) from exc


def _align(samples, predictions, what: str):
    """Pair samples with predictions by ref_id; report all mismatches."""
    sample_ids = {s.ref_id for s in samples}
    pred_ids = set(predictions)
    missing = sorted(sample_ids - pred_ids)
    extra = sorted(pred_ids - sample_ids)
    if missing or extra:
        parts = []
        if missing:
            parts.append(f"missing {what} for ref_ids {missing}")
        if extra:
            parts.append(f"{what} for unknown ref_ids {extra}")
        raise InputError("; ".join(parts))
    return [(predictions[s.ref_id], s) for s in samples]


def _emit(report_json: dict, table: str, out: str | None) -> None:
    print(table)
    if out:
        Path(out).write_text(json.dumps(report_json, indent=1, sort_keys=True))
        print(f"wrote {out}")


def _fmt(v) -> str:
    return "n/a" if v is None else f"{100.0 * v:6.2f}"


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_generate(args) -> int:
    from .synth import SceneConfig, generate_synthetic

    grid = max(2, args.image_size // 16)  # keep 16px placement cells
    config = SceneConfig(
        split=args.split,
        n_single=args.single,
        n_multi=args.multi,
        n_no_target=args.no_target,
        image_size=args.image_size,
        grid=grid,
        max_objects=min(5, grid * grid),
    )
    ds = generate_synthetic(config, seed=args.seed)
    ds.save(args.out)
    print(f"wrote {len(ds.samples)} samples ({args.split}) to {args.out}")
    return EXIT_OK


def cmd_stats(args) -> int:
    from .data import SampleKind, classify_sample, vocab_stats

    samples = _load_split(args)
    kinds = [classify_sample(s) for s in samples]
    counts = {k.value: kinds.count(k) for k in SampleKind}
    words = vocab_stats(samples)[: args.top]
    table = [f"split {args.split}: {len(samples)} samples"]
    for k, v in counts.items():
        table.append(f"  {k:14s} {v}")
    table.append(f"top {args.top} words:")
    for w, c, f in words:
        table.append(f"  {w:12s} {c:5d}  {f:.4f}")
    _emit(
        {"counts": counts, "total": len(samples),
         "words": [{"word": w, "count": c, "frequency": f} for w, c, f in words]},
        "\n".join(table),
        args.out,
    )
    return EXIT_OK


def _decode_predictions(path, loader, workers: int):
    try:
        raw = loader(path)
    except FileNotFoundError as exc:
        raise InputError(str(exc)) from exc
    if workers > 1:
        # touch every mask in a pool (decode is the per-sample hot path)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(lambda kv: kv, raw.items()))
    return raw


def cmd_eval_gres(args) -> int:
    from .predictions import load_seg_predictions
    from .seg_metrics import evaluate_gres

    samples = _load_split(args)
    preds = _decode_predictions(args.predictions, load_seg_predictions, args.workers)
    if args.fifty_pixel:
        for pred in preds.values():
            if int(pred.mask.sum()) < 50:
                pred.mask = np.zeros_like(pred.mask)
    pairs = _align(samples, preds, "prediction")
    report = evaluate_gres(pairs)
    table = [
        "GRES metrics",
        f"  gIoU    {_fmt(report.giou)}",
        f"  cIoU    {_fmt(report.ciou)}" + ("  (degenerate: empty union)" if report.ciou_degenerate else ""),
    ]
    for t, v in report.pr_at.items():
        table.append(f"  Pr@{t:.1f}  {_fmt(v)}")
    table.append(f"  N-acc   {_fmt(report.n_acc)}")
    table.append(f"  T-acc   {_fmt(report.t_acc)}")
    _emit(report.to_json(), "\n".join(table), args.out)
    return EXIT_DEGENERATE if report.ciou_degenerate else EXIT_OK


def _apply_det_strategy(preds, args):
    from .det_metrics import DetPrediction

    if args.strategy == "raw":
        return preds
    out = {}
    counts = None
    if args.strategy == "count":
        if not args.count_file:
            raise InputError("--strategy count needs --count-file")
        counts = {int(k): int(v) for k, v in json.loads(Path(args.count_file).read_text()).items()}
    for ref_id, pred in preds.items():
        boxes = sorted(pred.boxes, key=lambda sb: -sb.score)
        if args.strategy == "threshold":
            kept = [sb for sb in boxes if sb.score >= args.tau]
        elif args.strategy.startswith("top-"):
            kept = boxes[: int(args.strategy[4:])]
        else:  # count
            if ref_id not in counts:
                raise InputError(f"count file has no entry for ref_id {ref_id}")
            c = counts[ref_id]
            kept = [] if c == 0 else boxes[:c] if c <= 5 else [sb for sb in boxes if sb.score >= args.tau]
        out[ref_id] = DetPrediction(kept)
    return out


def cmd_eval_grec(args) -> int:
    from .det_metrics import evaluate_grec
    from .predictions import load_det_predictions

    samples = _load_split(args)
    try:
        preds = _decode_predictions(
            args.predictions,
            lambda p: load_det_predictions(p, require_scores=args.ap),
            args.workers,
        )
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    selected = _apply_det_strategy(preds, args)
    pairs = _align(samples, selected, "prediction")
    report = evaluate_grec(pairs, iou_threshold=args.iou, with_ap=False)
    if args.ap:
        from .det_metrics import average_precision

        raw_pairs = _align(samples, preds, "prediction")
        report.ap = average_precision(raw_pairs)
    table = [
        "GREC metrics",
        f"  Pr@F1={args.iou:.1f}  {_fmt(report.pr_f1)}",
        f"  N-acc       {_fmt(report.n_acc)}",
        f"  T-acc       {_fmt(report.t_acc)}",
    ]
    if report.ap is not None:
        table.append(f"  AP          {_fmt(report.ap)}")
    _emit(report.to_json(), "\n".join(table), args.out)
    return EXIT_OK


def cmd_eval_greg(args) -> int:
    from .data import classify_sample
    from .gen_metrics import CaptionPair, evaluate_greg

    samples = [s for s in _load_split(args) if not s.no_target]
    try:
        raw = json.loads(Path(args.candidates).read_text())
    except FileNotFoundError as exc:
        raise InputError(str(exc)) from exc
    candidates = {int(r["ref_id"]): str(r["expression"]) for r in raw}
    _align(samples, candidates, "candidate")

    # references: all dataset expressions describing the same target set
    groups: dict[tuple, list[str]] = {}
    for s in samples:
        groups.setdefault((s.image_id, s.target_ids), []).append(s.expression)
    pairs = []
    taxonomy = []
    for s in samples:
        refs = groups[(s.image_id, s.target_ids)]
        pairs.append(CaptionPair.from_text(candidates[s.ref_id], refs))
        taxonomy.append(classify_sample(s))
    try:
        report = evaluate_greg(pairs, taxonomy)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    table = [
        "GREG metrics            METEOR   CIDEr",
        f"  single-target        {_fmt(report.meteor_single)}  {report.cider_single if report.cider_single is None else f'{report.cider_single:7.3f}'}",
        f"  multi-target         {_fmt(report.meteor_multi)}  {report.cider_multi if report.cider_multi is None else f'{report.cider_multi:7.3f}'}",
        f"  overall              {_fmt(report.meteor_overall)}  {report.cider_overall:7.3f}",
    ]
    _emit(report.to_json(), "\n".join(table), args.out)
    return EXIT_OK


def _load_images(root: Path, samples):
    from PIL import Image

    images = {}
    for s in samples:
        path = root / "images" / f"{s.image_id}.png"
        if not path.exists():
            raise InputError(f"missing image file {path}")
        images[s.image_id] = np.asarray(Image.open(path).convert("RGB"))
    return images


def cmd_train_toy(args) -> int:
    from .model import ModelConfig, TrainingDivergedError, save_checkpoint, train_toy

    samples = _load_split(args)
    images = _load_images(_dataset_root(args), samples)
    if args.config:
        try:
            config = ModelConfig.load(args.config)
        except FileNotFoundError as exc:
            raise InputError(str(exc)) from exc
        except (TypeError, ValueError, KeyError) as exc:
            raise InputError(f"invalid model config {args.config}: {exc}") from exc
    else:
        config = ModelConfig()
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        result = train_toy(
            samples, images, config,
            iterations=args.iterations, lr=args.lr, seed=args.seed,
            eval_every=args.eval_every,
        )
    except TrainingDivergedError as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return EXIT_INPUT
    save_checkpoint(out_dir / "checkpoint.npz", result.params, config)
    config.save(out_dir / "config.json")
    (out_dir / "trace.json").write_text(
        json.dumps({"loss": result.trace, "metrics": result.metric_trace}, indent=1)
    )
    last = result.trace[-1]
    print(f"trained {args.iterations} iterations; final loss {last['total']:.4f}")
    if result.metric_trace:
        print(f"final metrics: {json.dumps(result.metric_trace[-1])}")
    print(f"wrote {out_dir}/checkpoint.npz")
    return EXIT_OK


def cmd_predict(args) -> int:
    from .det_metrics import DetPrediction
    from .model import Strategy, forward, load_checkpoint, select_outputs
    from .model.infer import scored_boxes
    from .predictions import write_det_predictions, write_seg_predictions
    from .seg_metrics import SegPrediction

    try:
        params, config = load_checkpoint(args.checkpoint)
    except (FileNotFoundError, ValueError) as exc:
        raise InputError(f"cannot load checkpoint: {exc}") from exc
    samples = _load_split(args)
    images = _load_images(_dataset_root(args), samples)
    strategy = Strategy.parse(args.strategy, tau=args.tau)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    seg, det, raw_det, counts = {}, {}, {}, {}
    for s in samples:
        if s.image_size != (config.image_size, config.image_size):
            raise InputError(
                f"ref {s.ref_id}: image size {s.image_size} does not match "
                f"checkpoint config {config.image_size}"
            )
        out = forward(params, images[s.image_id], config.encode_tokens(s.expression), config)
        mask, boxes = select_outputs(out, strategy, config)
        declared = not mask.any() and not boxes
        seg[s.ref_id] = SegPrediction(mask, declared_no_target=declared or None)
        det[s.ref_id] = DetPrediction(boxes)
        raw_det[s.ref_id] = DetPrediction(scored_boxes(out, config))
        counts[s.ref_id] = int(np.argmax(out.count_logits.data))
    write_seg_predictions(out_dir / "seg_predictions.json", seg)
    write_det_predictions(out_dir / "det_predictions.json", det)
    write_det_predictions(out_dir / "det_predictions_raw.json", raw_det)
    (out_dir / "counts.json").write_text(json.dumps(counts, indent=1, sort_keys=True))
    print(f"wrote predictions for {len(samples)} samples to {out_dir}")
    return EXIT_OK


def cmd_serve_annotation(args) -> int:
    import uvicorn

    from .annotation import AnnotationProject, create_app

    project_dir = Path(args.project)
    if not (project_dir / "instances.json").exists():
        if not args.dataset:
            raise InputError(
                f"{project_dir} is not an initialized project; pass --dataset to seed it"
            )
        if not os.access(project_dir.parent if not project_dir.exists() else project_dir, os.W_OK):
            raise InputError(f"project dir {project_dir} is not writable")
        project = AnnotationProject.initialize(
            project_dir, args.dataset, split=args.split, seed=args.seed
        )
    else:
        project = AnnotationProject(project_dir, seed=args.seed)

    import socket

    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.bind((args.host, args.port))
    except OSError as exc:
        raise InputError(f"port {args.port} on {args.host} is unavailable: {exc}") from exc
    finally:
        probe.close()

    app = create_app(project, ui_dir=args.ui_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="genref", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, split=True):
        p.add_argument("--dataset", help="dataset root (default: $GENREF_DATA_ROOT)")
        if split:
            p.add_argument("--split", default="train")
        p.add_argument("--out", help="write machine-readable report here")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("generate", help="write a synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--split", default="train")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--single", type=int, default=8)
    p.add_argument("--multi", type=int, default=5)
    p.add_argument("--no-target", type=int, default=3)
    p.add_argument("--image-size", type=int, default=64)
    p.set_defaults(fn=cmd_generate)

    p = sub.add_parser("stats", help="taxonomy counts and word frequencies")
    add_common(p)
    p.add_argument("--top", type=int, default=25)
    p.set_defaults(fn=cmd_stats)

    p = sub.add_parser("eval-gres", help="segmentation metrics")
    add_common(p)
    p.add_argument("--predictions", required=True)
    p.add_argument("--fifty-pixel", action="store_true",
                   help="clear predicted masks under 50 pixels before scoring")
    p.set_defaults(fn=cmd_eval_gres)

    p = sub.add_parser("eval-grec", help="detection metrics")
    add_common(p)
    p.add_argument("--predictions", required=True)
    p.add_argument("--strategy", default="raw",
                   help="raw | threshold | top-K | count (with --count-file)")
    p.add_argument("--tau", type=float, default=0.7)
    p.add_argument("--count-file")
    p.add_argument("--iou", type=float, default=0.5)
    p.add_argument("--ap", action="store_true", help="also compute averaged AP on raw boxes")
    p.set_defaults(fn=cmd_eval_grec)

    p = sub.add_parser("eval-greg", help="expression metrics")
    add_common(p)
    p.add_argument("--candidates", required=True)
    p.set_defaults(fn=cmd_eval_greg)

    p = sub.add_parser("train-toy", help="train the toy model")
    add_common(p)
    p.add_argument("--config", help="model config JSON")
    p.add_argument("--iterations", type=int, default=2000)
    p.add_argument("--lr", type=float, default=2e-3)
    p.add_argument("--eval-every", type=int, default=None)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(fn=cmd_train_toy)

    p = sub.add_parser("predict", help="run a checkpoint over a split")
    add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--strategy", default="count")
    p.add_argument("--tau", type=float, default=0.7)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(fn=cmd_predict)

    p = sub.add_parser("serve-annotation", help="run the annotation service")
    p.add_argument("--project", required=True)
    p.add_argument("--dataset", help="seed a fresh project from this dataset root")
    p.add_argument("--split", default="train")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8787)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ui-dir", help="directory with the browser UI bundle")
    p.set_defaults(fn=cmd_serve_annotation)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (FileNotFoundError,) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
