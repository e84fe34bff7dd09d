"""Synthetic scenes with exactly groundable referring expressions.

Generates a small dataset of colored shapes, shows the expression
taxonomy (single-target, multi-target, no-target), and demonstrates the
symbolic resolver recovering every expression's target set from the
scene description alone.
"""

from collections import Counter

from genref.data import classify_sample
from genref.synth import SceneConfig, generate_synthetic, resolve_expression

config = SceneConfig(n_single=6, n_multi=6, n_no_target=4)
ds = generate_synthetic(config, seed=7)

kinds = Counter(classify_sample(s).value for s in ds.samples)
print(f"generated {len(ds.samples)} samples: {dict(kinds)}\n")

for sample in ds.samples:
    objects = ds.scene_objects[sample.image_id]
    scene = ", ".join(f"{o.color} {o.shape}" for o in objects)
    print(f"[{classify_sample(sample).value:13s}] {sample.expression!r}")
    print(f"    scene: {scene}")
    # The resolver re-parses the expression and grounds it against the
    # object list; on generated data it recovers the target set exactly.
    grounded = resolve_expression(sample.expression, objects, config.image_size)
    assert grounded == frozenset(sample.target_ids)
print("\nresolver recovered every target set exactly")

# Datasets are deterministic in the seed and serializable in the
# gRefCOCO-style layout (refs_<split>.json + instances.json + images/).
import tempfile
from pathlib import Path

from genref.data import load_dataset

with tempfile.TemporaryDirectory() as tmp:
    ds.save(tmp)
    reloaded = load_dataset(tmp, "train")
    print(f"saved and reloaded {len(reloaded)} samples from {sorted(p.name for p in Path(tmp).iterdir())}")
