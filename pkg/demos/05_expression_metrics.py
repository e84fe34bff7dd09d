"""Expression metrics: METEOR alignment and CIDEr consensus.

Scores a few candidate expressions against reference sets, showing the
fragmentation penalty on scrambled word order, the stem-matching stage,
and how CIDEr's TF-IDF weighting rewards informative n-grams instead of
boilerplate.
"""

from genref.gen_metrics import CaptionPair, cider, meteor
from genref.text import tokenize

print("METEOR")
for cand, refs in [
    ("the red box", ["the red box"]),                # exact echo
    ("the box red", ["the red box"]),                # scrambled: penalty bites
    ("two running dogs", ["the two dogs run"]),      # stem stage matches run/running
    ("a cat", ["the red box"]),                      # nothing aligns
]:
    score = meteor(CaptionPair.from_text(cand, refs))
    print(f"  {cand!r:24s} vs {refs[0]!r:22s} -> {score:.4f}")

print("\nCIDEr")
candidates = [
    tokenize("the two red circles on the left"),
    tokenize("the shapes"),  # generic: low-idf grams only
    tokenize("a green square"),
]
references = [
    [tokenize("the two red circles on the left"), tokenize("both red circles")],
    [tokenize("the yellow triangle"), tokenize("the triangle at the top")],
    [tokenize("a green square"), tokenize("the green square on the right")],
]
scores, mean = cider(candidates, references)
for cand, score in zip(candidates, scores):
    print(f"  {' '.join(cand)!r:36s} -> {score:.3f}")
print(f"  corpus mean: {mean:.3f}")
