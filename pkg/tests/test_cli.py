import json

import numpy as np
import pytest

from genref.cli import EXIT_DEGENERATE, EXIT_INPUT, EXIT_OK, main
from genref.data import load_dataset
from genref.det_metrics import DetPrediction
from genref.geometry import ScoredBox
from genref.predictions import (
    load_det_predictions,
    load_seg_predictions,
    write_det_predictions,
    write_seg_predictions,
)
from genref.seg_metrics import SegPrediction
from genref.synth import SceneConfig, generate_synthetic


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("data")
    ds = generate_synthetic(SceneConfig(n_single=4, n_multi=3, n_no_target=2, split="val"), seed=6)
    ds.save(root)
    return root, ds


def perfect_seg_file(tmp_path, ds):
    path = tmp_path / "seg.json"
    write_seg_predictions(
        path,
        {s.ref_id: SegPrediction(s.gt_mask, declared_no_target=s.no_target or None) for s in ds.samples},
    )
    return path


def perfect_det_file(tmp_path, ds):
    path = tmp_path / "det.json"
    write_det_predictions(
        path,
        {
            s.ref_id: DetPrediction([ScoredBox(b, 0.9) for b in s.gt_boxes])
            for s in ds.samples
        },
    )
    return path


class TestEvalGres:
    def test_perfect_predictions_all_ones(self, dataset, tmp_path, capsys):
        root, ds = dataset
        path = perfect_seg_file(tmp_path, ds)
        out = tmp_path / "report.json"
        code = main([
            "eval-gres", "--dataset", str(root), "--split", "val",
            "--predictions", str(path), "--out", str(out),
        ])
        assert code == EXIT_OK
        report = json.loads(out.read_text())
        assert report["gIoU"] == 1.0
        assert report["cIoU"] == 1.0
        assert report["N_acc"] == 1.0
        assert report["T_acc"] == 1.0
        assert all(v == 1.0 for v in report["Pr"].values())

    def test_missing_ref_listed(self, dataset, tmp_path, capsys):
        root, ds = dataset
        preds = {
            s.ref_id: SegPrediction(s.gt_mask, declared_no_target=s.no_target or None)
            for s in ds.samples[1:]
        }
        path = tmp_path / "partial.json"
        write_seg_predictions(path, preds)
        code = main([
            "eval-gres", "--dataset", str(root), "--split", "val",
            "--predictions", str(path),
        ])
        assert code == EXIT_INPUT
        err = capsys.readouterr().err
        assert str(ds.samples[0].ref_id) in err

    def test_fifty_pixel_flag(self, dataset, tmp_path):
        root, ds = dataset
        preds = {}
        for s in ds.samples:
            if s.no_target:
                speck = np.zeros(s.image_size, dtype=np.uint8)
                speck[0, :10] = 1  # under 50 pixels: cleared by the flag
                preds[s.ref_id] = SegPrediction(speck)
            else:
                preds[s.ref_id] = SegPrediction(s.gt_mask)
        path = tmp_path / "speckled.json"
        write_seg_predictions(path, preds)
        out = tmp_path / "r.json"
        code = main([
            "eval-gres", "--dataset", str(root), "--split", "val",
            "--predictions", str(path), "--fifty-pixel", "--out", str(out),
        ])
        assert code == EXIT_OK
        assert json.loads(out.read_text())["N_acc"] == 1.0

    def test_degenerate_exit_code(self, tmp_path):
        root = tmp_path / "nt"
        ds = generate_synthetic(
            SceneConfig(n_single=0, n_multi=0, n_no_target=3, split="val"), seed=1
        )
        ds.save(root)
        path = tmp_path / "empty.json"
        write_seg_predictions(
            path,
            {s.ref_id: SegPrediction(np.zeros(s.image_size)) for s in ds.samples},
        )
        code = main([
            "eval-gres", "--dataset", str(root), "--split", "val",
            "--predictions", str(path),
        ])
        assert code == EXIT_DEGENERATE


class TestEvalGrec:
    def test_perfect(self, dataset, tmp_path):
        root, ds = dataset
        path = perfect_det_file(tmp_path, ds)
        out = tmp_path / "r.json"
        code = main([
            "eval-grec", "--dataset", str(root), "--split", "val",
            "--predictions", str(path), "--ap", "--out", str(out),
        ])
        assert code == EXIT_OK
        report = json.loads(out.read_text())
        assert report["Pr_F1"] == 1.0
        assert report["AP"] == 1.0

    def test_top1_strategy_on_multi_no_target(self, tmp_path):
        root = tmp_path / "mn"
        ds = generate_synthetic(
            SceneConfig(n_single=0, n_multi=4, n_no_target=3, split="val"), seed=2
        )
        ds.save(root)
        preds = {}
        for s in ds.samples:
            boxes = [ScoredBox(b, 0.9) for b in s.gt_boxes]
            if not boxes:
                from genref.geometry import Box

                boxes = [ScoredBox(Box(0, 0, 10, 10), 0.9)]
            preds[s.ref_id] = DetPrediction(boxes)
        path = tmp_path / "det.json"
        write_det_predictions(path, preds)
        out = tmp_path / "r.json"
        code = main([
            "eval-grec", "--dataset", str(root), "--split", "val",
            "--predictions", str(path), "--strategy", "top-1", "--out", str(out),
        ])
        assert code == EXIT_OK
        report = json.loads(out.read_text())
        assert report["Pr_F1"] == 0.0
        assert report["N_acc"] == 0.0
        assert report["T_acc"] == 1.0

    def test_threshold_strategy(self, dataset, tmp_path):
        root, ds = dataset
        preds = {}
        for s in ds.samples:
            boxes = [ScoredBox(b, 0.9) for b in s.gt_boxes]
            from genref.geometry import Box

            boxes.append(ScoredBox(Box(0, 0, 5, 5), 0.1))  # low-score extra
            preds[s.ref_id] = DetPrediction(boxes)
        path = tmp_path / "det.json"
        write_det_predictions(path, preds)
        out = tmp_path / "r.json"
        code = main([
            "eval-grec", "--dataset", str(root), "--split", "val",
            "--predictions", str(path), "--strategy", "threshold", "--tau", "0.5",
            "--out", str(out),
        ])
        assert code == EXIT_OK
        assert json.loads(out.read_text())["Pr_F1"] == 1.0

    def test_count_strategy(self, dataset, tmp_path):
        root, ds = dataset
        preds = {}
        counts = {}
        for s in ds.samples:
            boxes = [ScoredBox(b, 0.9 - 0.01 * i) for i, b in enumerate(s.gt_boxes)]
            from genref.geometry import Box

            boxes.append(ScoredBox(Box(1, 1, 6, 6), 0.05))
            preds[s.ref_id] = DetPrediction(boxes)
            counts[s.ref_id] = len(s.gt_boxes)
        path = tmp_path / "det.json"
        write_det_predictions(path, preds)
        count_file = tmp_path / "counts.json"
        count_file.write_text(json.dumps({str(k): v for k, v in counts.items()}))
        out = tmp_path / "r.json"
        code = main([
            "eval-grec", "--dataset", str(root), "--split", "val",
            "--predictions", str(path), "--strategy", "count",
            "--count-file", str(count_file), "--out", str(out),
        ])
        assert code == EXIT_OK
        assert json.loads(out.read_text())["Pr_F1"] == 1.0


class TestEvalGreg:
    def test_echo_candidates(self, dataset, tmp_path):
        root, ds = dataset
        cands = [
            {"ref_id": s.ref_id, "expression": s.expression}
            for s in ds.samples
            if not s.no_target
        ]
        path = tmp_path / "cands.json"
        path.write_text(json.dumps(cands))
        out = tmp_path / "r.json"
        code = main([
            "eval-greg", "--dataset", str(root), "--split", "val",
            "--candidates", str(path), "--out", str(out),
        ])
        assert code == EXIT_OK
        report = json.loads(out.read_text())
        assert report["meteor"]["overall"] > 0.9
        assert report["cider"]["overall"] > 5.0

    def test_empty_candidates(self, dataset, tmp_path):
        root, ds = dataset
        cands = [
            {"ref_id": s.ref_id, "expression": ""} for s in ds.samples if not s.no_target
        ]
        path = tmp_path / "cands.json"
        path.write_text(json.dumps(cands))
        out = tmp_path / "r.json"
        code = main([
            "eval-greg", "--dataset", str(root), "--split", "val",
            "--candidates", str(path), "--out", str(out),
        ])
        assert code == EXIT_OK
        report = json.loads(out.read_text())
        assert report["meteor"]["overall"] == 0.0
        assert report["cider"]["overall"] == 0.0

    def test_misaligned(self, dataset, tmp_path):
        root, _ = dataset
        path = tmp_path / "cands.json"
        path.write_text(json.dumps([{"ref_id": 1, "expression": "x"}]))
        assert main([
            "eval-greg", "--dataset", str(root), "--split", "val",
            "--candidates", str(path),
        ]) == EXIT_INPUT


class TestStatsAndGenerate:
    def test_generate_then_stats(self, tmp_path, capsys):
        root = tmp_path / "gen"
        assert main([
            "generate", "--out", str(root), "--seed", "3",
            "--single", "3", "--multi", "2", "--no-target", "1",
        ]) == EXIT_OK
        out = tmp_path / "stats.json"
        assert main([
            "stats", "--dataset", str(root), "--split", "train", "--out", str(out),
        ]) == EXIT_OK
        stats = json.loads(out.read_text())
        assert stats["counts"]["single_target"] == 3
        assert stats["counts"]["multi_target"] == 2
        assert stats["counts"]["no_target"] == 1
        assert stats["total"] == 6

    def test_multi_rich_fixture_surfaces_counting_words(self, tmp_path):
        root = tmp_path / "multi"
        main(["generate", "--out", str(root), "--seed", "9",
              "--single", "0", "--multi", "10", "--no-target", "0"])
        out = tmp_path / "stats.json"
        main(["stats", "--dataset", str(root), "--split", "train", "--out", str(out)])
        words = {w["word"] for w in json.loads(out.read_text())["words"]}
        assert words & {"and", "two", "three", "all", "except"}

    def test_generate_determinism(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            main(["generate", "--out", str(out), "--seed", "11"])
        assert (a / "instances.json").read_bytes() == (b / "instances.json").read_bytes()
        assert (a / "refs_train.json").read_bytes() == (b / "refs_train.json").read_bytes()

    def test_unknown_split(self, dataset):
        root, _ = dataset
        assert main(["stats", "--dataset", str(root), "--split", "bogus"]) == EXIT_INPUT

    def test_byte_stable_reports(self, dataset, tmp_path):
        root, ds = dataset
        path = perfect_seg_file(tmp_path, ds)
        outs = []
        for name in ("r1.json", "r2.json"):
            out = tmp_path / name
            main([
                "eval-gres", "--dataset", str(root), "--split", "val",
                "--predictions", str(path), "--out", str(out),
            ])
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]


class TestPredictionRoundTrip:
    def test_seg_file_round_trip(self, dataset, tmp_path):
        _, ds = dataset
        path = tmp_path / "seg.json"
        entries = {
            s.ref_id: SegPrediction(s.gt_mask, declared_no_target=s.no_target or None)
            for s in ds.samples
        }
        write_seg_predictions(path, entries)
        loaded = load_seg_predictions(path)
        assert set(loaded) == set(entries)
        for ref_id, pred in entries.items():
            assert (loaded[ref_id].mask == pred.mask).all()

    def test_det_file_round_trip(self, dataset, tmp_path):
        _, ds = dataset
        path = tmp_path / "det.json"
        entries = {
            s.ref_id: DetPrediction([ScoredBox(b, 0.25) for b in s.gt_boxes])
            for s in ds.samples
        }
        write_det_predictions(path, entries)
        loaded = load_det_predictions(path)
        for ref_id, pred in entries.items():
            assert loaded[ref_id].boxes == pred.boxes


class TestModelPipeline:
    """generate -> train-toy -> predict -> eval, end to end through the CLI."""

    def test_train_predict_eval(self, tmp_path):
        root = tmp_path / "data"
        assert main([
            "generate", "--out", str(root), "--seed", "5", "--image-size", "32",
            "--single", "3", "--multi", "1", "--no-target", "1",
        ]) == EXIT_OK

        from genref.model import ModelConfig

        config = ModelConfig(channels=16, mask_channels=8, regions_per_side=2,
                             image_size=32, text_len=6)
        config.save(tmp_path / "config.json")
        run_dir = tmp_path / "run"
        assert main([
            "train-toy", "--dataset", str(root), "--split", "train",
            "--config", str(tmp_path / "config.json"),
            "--iterations", "40", "--seed", "0", "--eval-every", "20",
            "--out-dir", str(run_dir),
        ]) == EXIT_OK
        assert (run_dir / "checkpoint.npz").exists()
        trace = json.loads((run_dir / "trace.json").read_text())
        assert len(trace["loss"]) == 40
        assert trace["loss"][-1]["total"] < trace["loss"][0]["total"]

        pred_dir = tmp_path / "preds"
        assert main([
            "predict", "--dataset", str(root), "--split", "train",
            "--checkpoint", str(run_dir / "checkpoint.npz"),
            "--strategy", "count", "--out-dir", str(pred_dir),
        ]) == EXIT_OK
        for name in ("seg_predictions.json", "det_predictions.json",
                     "det_predictions_raw.json", "counts.json"):
            assert (pred_dir / name).exists()

        seg_report = tmp_path / "seg.json"
        code = main([
            "eval-gres", "--dataset", str(root), "--split", "train",
            "--predictions", str(pred_dir / "seg_predictions.json"),
            "--out", str(seg_report),
        ])
        assert code in (EXIT_OK, EXIT_DEGENERATE)
        assert 0.0 <= json.loads(seg_report.read_text())["gIoU"] <= 1.0

        det_report = tmp_path / "det.json"
        assert main([
            "eval-grec", "--dataset", str(root), "--split", "train",
            "--predictions", str(pred_dir / "det_predictions_raw.json"),
            "--strategy", "count", "--count-file", str(pred_dir / "counts.json"),
            "--ap", "--out", str(det_report),
        ]) == EXIT_OK
        report = json.loads(det_report.read_text())
        assert 0.0 <= report["Pr_F1"] <= 1.0
        assert report["AP"] is not None

    def test_predict_checkpoint_mismatch(self, tmp_path):
        root64 = tmp_path / "d64"
        main(["generate", "--out", str(root64), "--seed", "1"])
        from genref.model import ModelConfig, init_params, save_checkpoint

        cfg = ModelConfig(channels=16, mask_channels=8, regions_per_side=2,
                          image_size=32, text_len=6)
        save_checkpoint(tmp_path / "c.npz", init_params(cfg, 0), cfg)
        assert main([
            "predict", "--dataset", str(root64), "--split", "train",
            "--checkpoint", str(tmp_path / "c.npz"),
            "--out-dir", str(tmp_path / "p"),
        ]) == EXIT_INPUT


class TestScoreRequirements:
    def test_ap_without_scores_errors(self, dataset, tmp_path, capsys):
        root, ds = dataset
        records = []
        for s in ds.samples:
            boxes = [{"bbox": [b.x1, b.y1, b.x2 - b.x1, b.y2 - b.y1]} for b in s.gt_boxes]
            records.append({"ref_id": s.ref_id, "boxes": boxes})
        path = tmp_path / "unscored.json"
        path.write_text(json.dumps(records))
        code = main([
            "eval-grec", "--dataset", str(root), "--split", "val",
            "--predictions", str(path), "--ap",
        ])
        assert code == EXIT_INPUT
        assert "scores required" in capsys.readouterr().err

    def test_prf1_without_scores_is_fine(self, dataset, tmp_path):
        root, ds = dataset
        records = []
        for s in ds.samples:
            boxes = [{"bbox": [b.x1, b.y1, b.x2 - b.x1, b.y2 - b.y1]} for b in s.gt_boxes]
            records.append({"ref_id": s.ref_id, "boxes": boxes})
        path = tmp_path / "unscored.json"
        path.write_text(json.dumps(records))
        out = tmp_path / "r.json"
        assert main([
            "eval-grec", "--dataset", str(root), "--split", "val",
            "--predictions", str(path), "--out", str(out),
        ]) == EXIT_OK
        assert json.loads(out.read_text())["Pr_F1"] == 1.0


class TestConfigValidation:
    def test_invalid_config_rejected_with_field_name(self, dataset, tmp_path, capsys):
        root, _ = dataset
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"channels": 16, "vocab": ["<pad>", "a"],
                                   "regions_per_side": 0}))
        code = main([
            "train-toy", "--dataset", str(root), "--split", "val",
            "--config", str(bad), "--iterations", "1",
            "--out-dir", str(tmp_path / "run"),
        ])
        assert code == EXIT_INPUT
        assert "regions_per_side" in capsys.readouterr().err

    def test_unknown_config_field_rejected(self, dataset, tmp_path, capsys):
        root, _ = dataset
        bad = tmp_path / "bad2.json"
        bad.write_text(json.dumps({"vocab": ["<pad>"], "warp_factor": 9}))
        code = main([
            "train-toy", "--dataset", str(root), "--split", "val",
            "--config", str(bad), "--iterations", "1",
            "--out-dir", str(tmp_path / "run"),
        ])
        assert code == EXIT_INPUT
        assert "warp_factor" in capsys.readouterr().err
