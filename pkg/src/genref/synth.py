"""Synthetic desk-scale scenes with exactly groundable expressions.

Scenes are colored shapes on a white canvas, one shape per cell of a
placement grid so instances never overlap. Every expression is rendered
from a small query grammar and can be re-parsed and re-grounded against
the scene's object list (`resolve_expression`), which makes the
generator its own exactness oracle. Multi-target expressions cover
counting ("the two circles on the left"), compound ("the squares and
the red circle"), shared attributes ("all red shapes"), and exclusion
("all shapes except the blue one"); no-target expressions are deceptive
in that every attribute they mention exists somewhere in the scene.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .data import GrexSample, InstanceRecord, save_dataset, sample_to_ref_json
from .geometry import BinaryMask, mask_bbox, rle_encode

__all__ = [
    "PALETTE",
    "SHAPE_NAMES",
    "SceneConfig",
    "SceneObject",
    "SyntheticDataset",
    "InfeasibleConfigError",
    "UngroundableExpressionError",
    "generate_synthetic",
    "resolve_expression",
    "render_scene",
]

PALETTE: dict[str, tuple[int, int, int]] = {
    "red": (220, 40, 40),
    "green": (40, 170, 60),
    "blue": (50, 90, 220),
    "yellow": (230, 210, 50),
    "purple": (150, 60, 190),
    "orange": (240, 140, 40),
}

SHAPE_NAMES = ("circle", "square", "triangle")

SIDES = ("left", "right", "top", "bottom")

_NUMBER_WORDS = {2: "two", 3: "three", 4: "four", 5: "five"}
_WORD_NUMBERS = {w: n for n, w in _NUMBER_WORDS.items()}

_SPLIT_IMAGE_BASE = {"train": 100000, "val": 200000, "testA": 300000, "testB": 400000}


class InfeasibleConfigError(ValueError):
    """The scene configuration cannot produce the requested samples."""


class UngroundableExpressionError(ValueError):
    """An expression does not ground cleanly against the scene."""


@dataclass(frozen=True)
class SceneConfig:
    image_size: int = 64
    grid: int = 4  # placement grid side; capacity grid**2 objects
    colors: tuple[str, ...] = ("red", "green", "blue", "yellow")
    shapes: tuple[str, ...] = SHAPE_NAMES
    shape_size: tuple[int, int] = (9, 12)  # min/max extent in pixels
    jitter: int = 2
    min_objects: int = 2
    max_objects: int = 5
    n_single: int = 8
    n_multi: int = 5
    n_no_target: int = 3
    split: str = "train"
    image_id_start: int | None = None

    def validate(self) -> None:
        cell = self.image_size // self.grid
        if self.max_objects > self.grid**2:
            raise InfeasibleConfigError(
                f"{self.max_objects} objects do not fit a {self.grid}x{self.grid} grid"
            )
        if not 1 <= self.min_objects <= self.max_objects:
            raise InfeasibleConfigError("need 1 <= min_objects <= max_objects")
        if self.shape_size[1] + 2 * self.jitter > cell:
            raise InfeasibleConfigError(
                f"shapes up to {self.shape_size[1]}px with jitter {self.jitter} "
                f"overflow {cell}px grid cells"
            )
        unknown = set(self.colors) - PALETTE.keys()
        if unknown:
            raise InfeasibleConfigError(f"unknown colors {sorted(unknown)}")
        if set(self.shapes) - set(SHAPE_NAMES):
            raise InfeasibleConfigError(f"unknown shapes {self.shapes}")
        if min(self.n_single, self.n_multi, self.n_no_target) < 0:
            raise InfeasibleConfigError("negative sample counts")
        if self.n_multi > 0 and self.min_objects < 2:
            raise InfeasibleConfigError("multi-target samples need min_objects >= 2")


@dataclass(frozen=True)
class SceneObject:
    ann_id: int
    shape: str
    color: str
    center: tuple[float, float]  # (cx, cy) in pixels
    size: int


# ---------------------------------------------------------------------------
# Query grammar: build, render, parse, evaluate
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AttrQuery:
    color: str | None = None
    shape: str | None = None
    side: str | None = None
    count: int | None = None  # exact-cardinality constraint (counting phrases)


@dataclass(frozen=True)
class CompoundQuery:
    parts: tuple[AttrQuery, ...]


@dataclass(frozen=True)
class ExceptQuery:
    base: AttrQuery
    minus: AttrQuery


Query = AttrQuery | CompoundQuery | ExceptQuery


def _on_side(obj: SceneObject, side: str, image_size: int) -> bool:
    cx, cy = obj.center
    half = image_size / 2
    if side == "left":
        return cx < half
    if side == "right":
        return cx > half
    if side == "top":
        return cy < half
    return cy > half


def _attr_matches(q: AttrQuery, objects, image_size: int) -> frozenset[int]:
    out = []
    for obj in objects:
        if q.color is not None and obj.color != q.color:
            continue
        if q.shape is not None and obj.shape != q.shape:
            continue
        if q.side is not None and not _on_side(obj, q.side, image_size):
            continue
        out.append(obj.ann_id)
    return frozenset(out)


def evaluate_query(query: Query, objects, image_size: int) -> frozenset[int]:
    if isinstance(query, AttrQuery):
        matches = _attr_matches(query, objects, image_size)
        if query.count is not None and len(matches) != query.count:
            raise UngroundableExpressionError(
                f"counting phrase expects {query.count} matches, found {len(matches)}"
            )
        return matches
    if isinstance(query, CompoundQuery):
        out: frozenset[int] = frozenset()
        for part in query.parts:
            out |= evaluate_query(part, objects, image_size)
        return out
    if isinstance(query, ExceptQuery):
        base = evaluate_query(query.base, objects, image_size)
        minus = evaluate_query(query.minus, objects, image_size)
        return base - minus
    raise TypeError(f"not a query: {query!r}")


def _shape_word(shape: str | None, plural: bool, generic: str = "shape") -> str:
    if shape is None:
        return generic + "s" if plural else generic
    return shape + "s" if plural else shape


def _render_attr(q: AttrQuery, plural: bool, universal: bool = False,
                 generic: str = "shape") -> str:
    words = ["all"] if universal else ["the"]
    if q.count is not None:
        words.append(_NUMBER_WORDS[q.count])
        plural = True
    if q.color is not None:
        words.append(q.color)
    words.append(_shape_word(q.shape, plural, generic))
    if q.side is not None:
        words += ["on", "the", q.side]
    return " ".join(words)


def render_query(query: Query, part_cardinalities: tuple[int, ...] = ()) -> str:
    """Render a query to its canonical surface form."""
    if isinstance(query, AttrQuery):
        if query.count is not None:
            return _render_attr(query, plural=True)
        return _render_attr(query, plural=False)
    if isinstance(query, CompoundQuery):
        rendered = []
        for i, part in enumerate(query.parts):
            n = part_cardinalities[i] if i < len(part_cardinalities) else 1
            rendered.append(_render_attr(part, plural=n > 1))
        return " and ".join(rendered)
    if isinstance(query, ExceptQuery):
        base = _render_attr(query.base, plural=True, universal=True)
        generic = "one" if query.minus.shape is None else "shape"
        minus = _render_attr(query.minus, plural=False, generic=generic)
        return f"{base} except {minus}"
    raise TypeError(f"not a query: {query!r}")


def parse_expression(text: str) -> Query:
    """Parse a generated expression back into its query."""
    tokens = text.lower().split()
    if "except" in tokens:
        k = tokens.index("except")
        base = _parse_attr(tokens[:k])
        minus = _parse_attr(tokens[k + 1 :])
        return ExceptQuery(base, minus)
    if "and" in tokens:
        parts = []
        start = 0
        for i, tok in enumerate(tokens):
            if tok == "and":
                parts.append(_parse_attr(tokens[start:i]))
                start = i + 1
        parts.append(_parse_attr(tokens[start:]))
        return CompoundQuery(tuple(parts))
    return _parse_attr(tokens)


def _parse_attr(tokens: list[str]) -> AttrQuery:
    color = shape = side = None
    count = None
    i = 0
    n = len(tokens)
    while i < n:
        tok = tokens[i]
        if tok in ("the", "all"):
            i += 1
        elif tok in _WORD_NUMBERS:
            count = _WORD_NUMBERS[tok]
            i += 1
        elif tok in PALETTE:
            color = tok
            i += 1
        elif tok.rstrip("s") in SHAPE_NAMES:
            shape = tok.rstrip("s")
            i += 1
        elif tok in ("shape", "shapes", "one", "ones"):
            i += 1
        elif tok == "on" and i + 2 < n and tokens[i + 1] == "the" and tokens[i + 2] in SIDES:
            side = tokens[i + 2]
            i += 3
        else:
            raise UngroundableExpressionError(f"cannot parse token {tok!r} in {tokens}")
    return AttrQuery(color=color, shape=shape, side=side, count=count)


def resolve_expression(text: str, objects, image_size: int) -> frozenset[int]:
    """Ground an expression against a scene: parse then evaluate."""
    return evaluate_query(parse_expression(text), objects, image_size)


# ---------------------------------------------------------------------------
# Rendering scenes to pixels
# ---------------------------------------------------------------------------


def _shape_mask(obj: SceneObject, image_size: int) -> BinaryMask:
    mask = np.zeros((image_size, image_size), dtype=np.uint8)
    cx, cy = obj.center
    s = obj.size
    ys, xs = np.ogrid[:image_size, :image_size]
    if obj.shape == "circle":
        r = s / 2
        mask[(xs - cx) ** 2 + (ys - cy) ** 2 <= r**2] = 1
    elif obj.shape == "square":
        half = s / 2
        mask[(np.abs(xs - cx) <= half) & (np.abs(ys - cy) <= half)] = 1
    else:  # upward triangle inside an s x s extent
        half = s / 2
        rel_y = (ys - (cy - half)) / s  # 0 at apex row, 1 at base row
        inside_rows = (rel_y >= 0) & (rel_y <= 1)
        mask[inside_rows & (np.abs(xs - cx) <= rel_y * half)] = 1
    return mask


def render_scene(objects, image_size: int) -> tuple[np.ndarray, dict[int, BinaryMask]]:
    """Rasterize objects onto a white canvas; returns (image, per-instance masks)."""
    image = np.full((image_size, image_size, 3), 255, dtype=np.uint8)
    masks: dict[int, BinaryMask] = {}
    for obj in objects:
        mask = _shape_mask(obj, image_size)
        image[mask == 1] = PALETTE[obj.color]
        masks[obj.ann_id] = mask
    return image, masks


# ---------------------------------------------------------------------------
# Generator
# ---------------------------------------------------------------------------


@dataclass
class SyntheticDataset:
    config: SceneConfig
    seed: int
    samples: list[GrexSample]
    instances: dict[int, InstanceRecord]
    image_sizes: dict[int, tuple[int, int]]
    images: dict[int, np.ndarray]
    scene_objects: dict[int, tuple[SceneObject, ...]] = field(default_factory=dict)

    def save(self, root: str | Path) -> None:
        root = Path(root)
        refs = [sample_to_ref_json(s) for s in self.samples]
        save_dataset(root, {self.config.split: refs}, self.image_sizes, self.instances)
        img_dir = root / "images"
        img_dir.mkdir(exist_ok=True)
        from PIL import Image

        for image_id, arr in self.images.items():
            Image.fromarray(arr).save(img_dir / f"{image_id}.png")
        scenes = {
            str(img): [
                {
                    "ann_id": o.ann_id,
                    "shape": o.shape,
                    "color": o.color,
                    "center": list(o.center),
                    "size": o.size,
                }
                for o in objs
            ]
            for img, objs in self.scene_objects.items()
        }
        (root / "scenes.json").write_text(json.dumps(scenes, indent=1, sort_keys=True))


def _make_scene(rng, config: SceneConfig, image_id: int) -> tuple[SceneObject, ...]:
    n = int(rng.integers(config.min_objects, config.max_objects + 1))
    cells = rng.choice(config.grid**2, size=n, replace=False)
    cell_px = config.image_size // config.grid
    objects = []
    for k, cell in enumerate(sorted(int(c) for c in cells)):
        row, col = divmod(cell, config.grid)
        size = int(rng.integers(config.shape_size[0], config.shape_size[1] + 1))
        jx, jy = rng.integers(-config.jitter, config.jitter + 1, size=2)
        cx = col * cell_px + cell_px / 2 + float(jx)
        cy = row * cell_px + cell_px / 2 + float(jy)
        objects.append(
            SceneObject(
                ann_id=image_id * 100 + k,
                shape=str(rng.choice(config.shapes)),
                color=str(rng.choice(config.colors)),
                center=(cx, cy),
                size=size,
            )
        )
    return tuple(objects)


def _attr_combos(obj: SceneObject, sides: list[str]):
    combos = [
        AttrQuery(color=obj.color, shape=obj.shape),
        AttrQuery(shape=obj.shape),
        AttrQuery(color=obj.color),
    ]
    for side in sides:
        combos.append(AttrQuery(shape=obj.shape, side=side))
        combos.append(AttrQuery(color=obj.color, shape=obj.shape, side=side))
        combos.append(AttrQuery(color=obj.color, side=side))
    return combos


def _object_sides(obj: SceneObject, image_size: int) -> list[str]:
    return [s for s in SIDES if _on_side(obj, s, image_size)]


def _try_single(rng, objects, image_size: int):
    order = list(rng.permutation(len(objects)))
    for idx in order:
        obj = objects[idx]
        combos = _attr_combos(obj, _object_sides(obj, image_size))
        for j in rng.permutation(len(combos)):
            q = combos[j]
            matches = _attr_matches(q, objects, image_size)
            if matches == frozenset({obj.ann_id}):
                return q, render_query(q), matches
    return None


def _group_queries(objects, image_size: int):
    """Candidate attribute queries paired with their match sets."""
    seen = {}
    for obj in objects:
        for q in _attr_combos(obj, _object_sides(obj, image_size)):
            if q not in seen:
                seen[q] = _attr_matches(q, objects, image_size)
    return seen


def _try_multi(rng, objects, image_size: int):
    groups = _group_queries(objects, image_size)
    templates = list(rng.permutation(["counting", "shared", "compound", "exclusion"]))
    for template in templates:
        if template == "counting":
            cands = [
                (replace(q, count=len(m)), m)
                for q, m in groups.items()
                if 2 <= len(m) <= max(_NUMBER_WORDS) and (q.shape or q.color)
            ]
            if cands:
                q, m = cands[int(rng.integers(len(cands)))]
                return q, render_query(q), m
        elif template == "shared":
            cands = [(q, m) for q, m in groups.items() if len(m) >= 2 and q.side is None]
            if cands:
                q, m = cands[int(rng.integers(len(cands)))]
                return q, _render_attr(q, plural=True, universal=True), m
        elif template == "compound":
            simple = [(q, m) for q, m in groups.items() if q.side is None and m]
            cands = []
            for i, (qa, ma) in enumerate(simple):
                for qb, mb in simple[i + 1 :]:
                    if ma & mb or not (ma and mb):
                        continue
                    if len(ma | mb) >= 2:
                        cands.append((qa, ma, qb, mb))
            if cands:
                qa, ma, qb, mb = cands[int(rng.integers(len(cands)))]
                query = CompoundQuery((qa, qb))
                text = render_query(query, part_cardinalities=(len(ma), len(mb)))
                return query, text, ma | mb
        else:  # exclusion
            singles = [q for q, m in groups.items() if len(m) == 1 and q.side is None]
            if len(objects) >= 3 and singles:
                minus = singles[int(rng.integers(len(singles)))]
                query = ExceptQuery(AttrQuery(), minus)
                m = evaluate_query(query, objects, image_size)
                if len(m) >= 2:
                    return query, render_query(query), m
    return None


def _try_no_target(rng, objects, image_size: int):
    colors_present = {o.color for o in objects}
    shapes_present = {o.shape for o in objects}
    cands = []
    for color in sorted(colors_present):
        for shape in sorted(shapes_present):
            q = AttrQuery(color=color, shape=shape)
            if not _attr_matches(q, objects, image_size):
                cands.append(q)
    if not cands:
        return None
    q = cands[int(rng.integers(len(cands)))]
    return q, render_query(q), frozenset()


_BUILDERS = {"single": _try_single, "multi": _try_multi, "no_target": _try_no_target}


def generate_synthetic(config: SceneConfig | None = None, seed: int = 0) -> SyntheticDataset:
    """Generate a deterministic synthetic dataset for one split."""
    config = config or SceneConfig()
    config.validate()
    rng = np.random.default_rng(seed)

    base = config.image_id_start
    if base is None:
        base = _SPLIT_IMAGE_BASE.get(config.split, 900000)

    kinds = (
        ["single"] * config.n_single
        + ["multi"] * config.n_multi
        + ["no_target"] * config.n_no_target
    )
    ds = SyntheticDataset(config, seed, [], {}, {}, {})
    for idx, kind in enumerate(kinds):
        image_id = base + idx
        built = None
        for _ in range(200):
            objects = _make_scene(rng, config, image_id)
            built = _BUILDERS[kind](rng, objects, config.image_size)
            if built is not None:
                break
        if built is None:
            raise InfeasibleConfigError(
                f"could not build a {kind} expression with config {config}"
            )
        _query, text, target_set = built

        image, masks = render_scene(objects, config.image_size)
        ds.images[image_id] = image
        ds.image_sizes[image_id] = (config.image_size, config.image_size)
        ds.scene_objects[image_id] = objects
        for obj in objects:
            mask = masks[obj.ann_id]
            ds.instances[obj.ann_id] = InstanceRecord(
                ann_id=obj.ann_id,
                image_id=image_id,
                mask=rle_encode(mask),
                box=mask_bbox(mask),
                category=f"{obj.color} {obj.shape}",
            )

        targets = tuple(sorted(target_set))
        gt_mask = np.zeros((config.image_size, config.image_size), dtype=np.uint8)
        for ann_id in targets:
            gt_mask |= masks[ann_id]
        ds.samples.append(
            GrexSample(
                ref_id=image_id * 10,
                image_id=image_id,
                image_size=(config.image_size, config.image_size),
                expression=text,
                target_ids=targets,
                gt_mask=gt_mask,
                gt_boxes=tuple(ds.instances[a].box for a in targets),
                no_target=len(targets) == 0,
                split=config.split,
            )
        )
    return ds
