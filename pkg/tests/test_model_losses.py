import numpy as np
import pytest

from genref.autodiff import Tensor, finite_difference_check
from genref.data import GrexSample
from genref.geometry import Box
from genref.model import (
    TINY_CONFIG,
    ModelOutput,
    compute_loss,
    count_class_for,
    forward,
    init_params,
    match_for_box_loss,
    minimap_target,
)
from genref.model.losses import box_pair_cost, box_to_normalized_cxcywh, normalized_cxcywh_to_box
from genref.synth import SceneConfig, generate_synthetic

from oracles import min_cost_assignment

TINY_SCENES = SceneConfig(
    image_size=32, grid=2, min_objects=2, max_objects=3,
    shape_size=(8, 10), jitter=1, n_single=1, n_multi=1, n_no_target=1,
)


@pytest.fixture(scope="module")
def tiny_data():
    return generate_synthetic(TINY_SCENES, seed=3)


def make_sample(boxes, image_size=32, ref_id=1):
    mask = np.zeros((image_size, image_size), dtype=np.uint8)
    for b in boxes:
        mask[int(b.y1) : int(b.y2), int(b.x1) : int(b.x2)] = 1
    return GrexSample(
        ref_id=ref_id, image_id=ref_id, image_size=(image_size, image_size),
        expression="x", target_ids=tuple(range(len(boxes))), gt_mask=mask,
        gt_boxes=tuple(boxes), no_target=not boxes, split="train",
    )


class TestBoxMatching:
    def test_exact_box_assigned_with_near_zero_cost(self):
        gt = np.array([[0.5, 0.5, 0.25, 0.25]])
        preds = np.array([[0.2, 0.2, 0.1, 0.1], [0.5, 0.5, 0.25, 0.25], [0.8, 0.8, 0.1, 0.1]])
        pairs = match_for_box_loss(preds, gt)
        assert pairs == [(1, 0)]
        assert box_pair_cost(preds[1], gt[0]) == pytest.approx(0.0, abs=1e-12)

    def test_perfect_pair_found_among_noise(self):
        rng = np.random.default_rng(0)
        gt = np.array([[0.25, 0.25, 0.2, 0.2], [0.75, 0.75, 0.2, 0.2]])
        preds = rng.uniform(0.05, 0.95, (16, 4)) * np.array([1, 1, 0.3, 0.3])
        preds[3] = gt[0]
        preds[11] = gt[1]
        pairs = dict(match_for_box_loss(preds, gt))
        # dict maps region -> gt; invert
        assigned = {j: i for i, j in pairs.items()}
        assert assigned[0] == 3
        assert assigned[1] == 11

    def test_empty_gt(self):
        assert match_for_box_loss(np.zeros((4, 4)), np.zeros((0, 4))) == []

    def test_too_many_gts(self):
        with pytest.raises(ValueError, match="exceed"):
            match_for_box_loss(np.zeros((2, 4)), np.ones((3, 4)) * 0.5)

    def test_matches_exhaustive_min_cost(self):
        rng = np.random.default_rng(7)
        for _ in range(60):
            n_pred = int(rng.integers(1, 7))
            n_gt = int(rng.integers(1, min(n_pred, 4) + 1))
            preds = rng.uniform(0.1, 0.9, (n_pred, 4)) * np.array([1, 1, 0.4, 0.4])
            gts = rng.uniform(0.1, 0.9, (n_gt, 4)) * np.array([1, 1, 0.4, 0.4])
            cost = np.array(
                [[box_pair_cost(p, g) for g in gts] for p in preds]
            )
            pairs = match_for_box_loss(preds, gts)
            total = sum(cost[i, j] for i, j in pairs)
            best_cost, _ = min_cost_assignment(cost)
            assert total == pytest.approx(best_cost, abs=1e-12)

    def test_box_coordinate_round_trip(self):
        b = Box(4, 8, 20, 28)
        v = box_to_normalized_cxcywh(b, 32)
        assert normalized_cxcywh_to_box(v, 32) == b


class TestCountClass:
    def test_total_over_range(self):
        for n in range(51):
            c = count_class_for(n)
            assert 0 <= c <= 6
            assert c == (n if n <= 5 else 6)


class TestComputeLoss:
    def test_no_target_box_term_exactly_zero(self, tiny_data):
        cfg = TINY_CONFIG
        params = init_params(cfg, seed=0)
        sample = next(s for s in tiny_data.samples if s.no_target)
        out = forward(params, tiny_data.images[sample.image_id],
                      cfg.encode_tokens(sample.expression), cfg)
        total, breakdown = compute_loss(out, sample, cfg)
        assert breakdown["box"] == 0.0
        assert np.isfinite(breakdown["total"])

    def test_default_loss_weights(self):
        assert TINY_CONFIG.loss_weights == (2.0, 5.0, 0.2, 1.0)

    def test_perfect_outputs_reach_loss_floor(self):
        cfg = TINY_CONFIG
        gt_box = Box(0, 0, 16, 16)  # exactly the top-left quadrant
        sample = make_sample([gt_box], image_size=cfg.image_size)
        gt_full = sample.gt_mask.astype(np.float64)
        saturation = 30.0
        region_masks = np.tile((gt_full * 2 - 1) * saturation, (cfg.num_regions, 1, 1))
        xr_target = minimap_target(sample.gt_mask, cfg.regions_per_side)
        xr_logits = (xr_target * 2 - 1) * saturation
        boxes = np.tile(
            box_to_normalized_cxcywh(gt_box, cfg.image_size), (cfg.num_regions, 1)
        )
        count_logits = np.full(7, -saturation)
        count_logits[1] = saturation
        xr = 1.0 / (1.0 + np.exp(-xr_logits))
        out = ModelOutput(
            mask_logits=Tensor(region_masks[0]),
            region_masks=Tensor(region_masks),
            xr_logits=Tensor(xr_logits),
            xr=Tensor(xr),
            boxes=Tensor(boxes),
            count_logits=Tensor(count_logits),
        )
        _, breakdown = compute_loss(out, sample, cfg)
        for term in ("mask", "box", "region", "count"):
            assert breakdown[term] < 1e-3, (term, breakdown)

    def test_gradient_check_full_model(self, tiny_data):
        cfg = TINY_CONFIG
        sample = next(s for s in tiny_data.samples if len(s.target_ids) >= 2)
        image = tiny_data.images[sample.image_id]
        ids = cfg.encode_tokens(sample.expression)
        params = init_params(cfg, seed=1)

        def loss_fn():
            out = forward(params, image, ids, cfg)
            return compute_loss(out, sample, cfg)[0]

        errors = finite_difference_check(loss_fn, params, h=1e-4)
        assert set(errors) == set(params)
        worst = max(errors.values())
        assert worst < 1e-4, {k: v for k, v in errors.items() if v >= 1e-4}
