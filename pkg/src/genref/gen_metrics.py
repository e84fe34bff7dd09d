"""Expression-generation metrics: METEOR and CIDEr.

METEOR aligns candidate and reference unigrams in two stages (exact
match, then stem match), scores the alignment with the recall-weighted
harmonic mean F = 10PR / (R + 9P), and applies the fragmentation
penalty 0.5 * (chunks / matches)^3; with several references the best
per-reference score wins. There is no synonym stage: that would need an
external lexical database.

CIDEr is the base TF-IDF n-gram consensus score: per n in 1..4, the
cosine similarity between candidate and reference TF-IDF vectors is
averaged over an item's references, then over n, and scaled by 10.
Term frequencies are raw counts and the IDF of an n-gram unseen in the
reference corpus falls back to log(N) (document frequency clipped to 1),
matching the widely used reference implementation. The length-penalty
variant (CIDEr-D) is intentionally not implemented.
"""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass

from .data import SampleKind
from .text import porter_stem, tokenize

__all__ = [
    "CaptionPair",
    "NGramVector",
    "GregReport",
    "meteor",
    "cider",
    "evaluate_greg",
    "tokenize",
]

NGRAM_ORDERS = (1, 2, 3, 4)


@dataclass(frozen=True)
class CaptionPair:
    candidate: tuple[str, ...]
    references: tuple[tuple[str, ...], ...]

    def __post_init__(self):
        if not self.references:
            raise ValueError("at least one reference is required")

    @classmethod
    def from_text(cls, candidate: str, references: list[str]) -> "CaptionPair":
        return cls(tuple(tokenize(candidate)), tuple(tuple(tokenize(r)) for r in references))


@dataclass
class NGramVector:
    """Sparse TF-IDF weights of one sentence at one n-gram order."""

    n: int
    weights: dict[tuple[str, ...], float]

    @property
    def norm(self) -> float:
        return math.sqrt(sum(w * w for w in self.weights.values()))


# ---------------------------------------------------------------------------
# METEOR
# ---------------------------------------------------------------------------


def _align_stage(cand_tokens, ref_tokens, cand_free, ref_free, key):
    """Greedy unigram alignment for one matching stage.

    Scans candidate positions left to right; prefers the reference
    position that continues the previous matched pair (keeping chunks
    long), otherwise the leftmost available one.
    """
    by_key: dict[str, list[int]] = defaultdict(list)
    for j in ref_free:
        by_key[key(ref_tokens[j])].append(j)
    pairs = []
    prev_ref = None
    for i in sorted(cand_free):
        slots = by_key.get(key(cand_tokens[i]))
        if not slots:
            continue
        if prev_ref is not None and prev_ref + 1 in slots:
            j = prev_ref + 1
        else:
            j = slots[0]
        slots.remove(j)
        pairs.append((i, j))
        prev_ref = j
    return pairs


def _count_chunks(pairs) -> int:
    """Number of maximal runs contiguous in both sentences."""
    chunks = 0
    prev = None
    for i, j in sorted(pairs):
        if prev is None or i != prev[0] + 1 or j != prev[1] + 1:
            chunks += 1
        prev = (i, j)
    return chunks


def _meteor_single(candidate, reference) -> float:
    if not candidate or not reference:
        return 0.0
    cand_free = set(range(len(candidate)))
    ref_free = set(range(len(reference)))

    pairs = _align_stage(candidate, reference, cand_free, ref_free, key=lambda t: t)
    for i, j in pairs:
        cand_free.discard(i)
        ref_free.discard(j)
    pairs += _align_stage(candidate, reference, cand_free, ref_free, key=porter_stem)

    m = len(pairs)
    if m == 0:
        return 0.0
    precision = m / len(candidate)
    recall = m / len(reference)
    f_mean = 10 * precision * recall / (recall + 9 * precision)
    penalty = 0.5 * (_count_chunks(pairs) / m) ** 3
    return f_mean * (1.0 - penalty)


def meteor(pair: CaptionPair) -> float:
    """METEOR score of a candidate: best score over its references."""
    return max(_meteor_single(pair.candidate, ref) for ref in pair.references)


# ---------------------------------------------------------------------------
# CIDEr
# ---------------------------------------------------------------------------


def _ngrams(tokens, n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _document_frequencies(reference_corpus) -> tuple[dict, int]:
    df: dict[tuple[str, ...], int] = defaultdict(int)
    for references in reference_corpus:
        grams = set()
        for ref in references:
            for n in NGRAM_ORDERS:
                grams.update(_ngrams(ref, n))
        for g in grams:
            df[g] += 1
    return df, len(reference_corpus)


def _tfidf(tokens, n: int, df, log_n_docs: float) -> NGramVector:
    weights = {}
    for gram, count in _ngrams(tokens, n).items():
        idf = log_n_docs - math.log(max(1.0, df.get(gram, 0.0)))
        weights[gram] = count * idf
    return NGramVector(n, weights)


def _cosine(a: NGramVector, b: NGramVector) -> float:
    if not a.weights or not b.weights:
        return 0.0
    na, nb = a.norm, b.norm
    if na == 0.0 or nb == 0.0:
        return 0.0
    small, large = (a.weights, b.weights) if len(a.weights) < len(b.weights) else (b.weights, a.weights)
    dot = sum(w * large.get(g, 0.0) for g, w in small.items())
    return dot / (na * nb)


def cider(candidates, reference_corpus) -> tuple[list[float], float]:
    """Score candidates against their reference sets.

    ``reference_corpus[i]`` is the list of reference token lists for
    ``candidates[i]``; the corpus doubles as the IDF document
    population, one document per reference set. Returns per-candidate
    scores and their mean.
    """
    if len(reference_corpus) < 2:
        raise ValueError("CIDEr needs a corpus of at least 2 reference sets for IDF")
    if len(candidates) != len(reference_corpus):
        raise ValueError("candidates and reference sets must align")
    df, n_docs = _document_frequencies(reference_corpus)
    log_n_docs = math.log(n_docs)

    scores = []
    for cand, references in zip(candidates, reference_corpus):
        per_n = []
        for n in NGRAM_ORDERS:
            cand_vec = _tfidf(cand, n, df, log_n_docs)
            sims = [_cosine(cand_vec, _tfidf(ref, n, df, log_n_docs)) for ref in references]
            per_n.append(sum(sims) / len(sims))
        scores.append(10.0 * sum(per_n) / len(NGRAM_ORDERS))
    return scores, sum(scores) / len(scores) if scores else 0.0


# ---------------------------------------------------------------------------
# GREG evaluation, split by sample taxonomy
# ---------------------------------------------------------------------------


@dataclass
class GregReport:
    meteor_single: float | None
    meteor_multi: float | None
    meteor_overall: float
    cider_single: float | None
    cider_multi: float | None
    cider_overall: float
    counts: dict[str, int]

    def to_json(self) -> dict:
        return {
            "meteor": {
                "single": self.meteor_single,
                "multi": self.meteor_multi,
                "overall": self.meteor_overall,
            },
            "cider": {
                "single": self.cider_single,
                "multi": self.cider_multi,
                "overall": self.cider_overall,
            },
            "counts": self.counts,
        }


def _subset_mean(values, mask):
    chosen = [v for v, keep in zip(values, mask) if keep]
    if not chosen:
        return None
    return sum(chosen) / len(chosen)


def evaluate_greg(pairs: list[CaptionPair], taxonomy: list[SampleKind]) -> GregReport:
    """METEOR and CIDEr for single-target, multi-target, and all items."""
    if len(pairs) != len(taxonomy):
        raise ValueError("pairs and taxonomy must align")
    if not pairs:
        raise ValueError("empty evaluation set")
    meteor_scores = [meteor(p) for p in pairs]
    cider_scores, cider_mean = cider(
        [p.candidate for p in pairs], [list(p.references) for p in pairs]
    )
    single = [k == SampleKind.single_target for k in taxonomy]
    multi = [k == SampleKind.multi_target for k in taxonomy]
    return GregReport(
        meteor_single=_subset_mean(meteor_scores, single),
        meteor_multi=_subset_mean(meteor_scores, multi),
        meteor_overall=sum(meteor_scores) / len(meteor_scores),
        cider_single=_subset_mean(cider_scores, single),
        cider_multi=_subset_mean(cider_scores, multi),
        cider_overall=cider_mean,
        counts={
            "single": sum(single),
            "multi": sum(multi),
            "total": len(pairs),
        },
    )
