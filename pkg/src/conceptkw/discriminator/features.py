"""Pairwise features for query-keyword synonymy."""

from __future__ import annotations

import math
import zlib
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..conceptualizer import Pattern, conceptualize
from ..knowledge_base import KnowledgeBase, Tokens

DENSE_FEATURES = (
    "jaccard",
    "edit_similarity",
    "pattern_equal",
    "slot_agreement",
    "slot_disagreement",
    "length_diff",
    "bow_cosine",
)
DEFAULT_PATTERN_BUCKETS = 1024


def feature_names(pattern_buckets: int = DEFAULT_PATTERN_BUCKETS) -> tuple[str, ...]:
    return DENSE_FEATURES + tuple(f"pattern_pair_{i:04d}" for i in range(pattern_buckets))


@dataclass(frozen=True)
class FeatureVector:
    names: tuple[str, ...]
    values: np.ndarray

    def __getitem__(self, name: str) -> float:
        return float(self.values[self.names.index(name)])

    def as_dict(self) -> dict[str, float]:
        return {n: float(v) for n, v in zip(self.names, self.values)}


def levenshtein(a: str, b: str) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def edit_similarity(a: str, b: str) -> float:
    if not a and not b:
        return 1.0
    return 1.0 - levenshtein(a, b) / max(len(a), len(b))


def aligned_slots(q: Pattern, k: Pattern) -> list[tuple[int, int]]:
    """Index pairs (query slot, keyword slot) matching the k-th slot of each concept."""
    def keyed(p: Pattern):
        return {(s.concept, s.occurrence): i for i, s in enumerate(p.slots)}
    qk, kk = keyed(q), keyed(k)
    return sorted((qk[key], kk[key]) for key in qk.keys() & kk.keys())


def slot_agreement(q: Pattern, k: Pattern) -> tuple[float, float]:
    """(fraction of aligned slots with equal entity ids, any-disagreement indicator).

    With no aligned slots the fraction is vacuously 1.0.
    """
    pairs = aligned_slots(q, k)
    if not pairs:
        return 1.0, 0.0
    same = sum(q.slot_values[i].entity_id == k.slot_values[j].entity_id for i, j in pairs)
    return same / len(pairs), float(same < len(pairs))


def _pattern_bucket(q: Pattern, k: Pattern, buckets: int) -> int:
    a, b = sorted((q.text, k.text))
    return zlib.crc32(f"{a}\x1f{b}".encode("utf-8")) % buckets


def extract_features(query: Sequence[str], keyword: Sequence[str], kb: KnowledgeBase,
                     pattern_buckets: int = DEFAULT_PATTERN_BUCKETS) -> FeatureVector:
    return FeatureVector(feature_names(pattern_buckets),
                         _features(tuple(query), tuple(keyword), kb, pattern_buckets))


def _features(query: Tokens, keyword: Tokens, kb: KnowledgeBase, buckets: int) -> np.ndarray:
    qp, kp = conceptualize(query, kb), conceptualize(keyword, kb)
    qs, ks = set(query), set(keyword)
    jaccard = len(qs & ks) / len(qs | ks) if qs | ks else 1.0
    qc, kc = Counter(query), Counter(keyword)
    dot = sum(qc[t] * kc[t] for t in qc)
    norm = math.sqrt(sum(v * v for v in qc.values()) * sum(v * v for v in kc.values()))
    agree, disagree = slot_agreement(qp, kp)
    vec = np.zeros(len(DENSE_FEATURES) + buckets)
    vec[:len(DENSE_FEATURES)] = (
        jaccard,
        edit_similarity(" ".join(query), " ".join(keyword)),
        float(qp.tokens == kp.tokens),
        agree,
        disagree,
        abs(len(query) - len(keyword)) / max(len(query), len(keyword), 1),
        dot / norm if norm else 0.0,
    )
    if buckets:
        vec[len(DENSE_FEATURES) + _pattern_bucket(qp, kp, buckets)] = 1.0
    return vec


def feature_matrix(pairs, kb: KnowledgeBase,
                   pattern_buckets: int = DEFAULT_PATTERN_BUCKETS) -> np.ndarray:
    """Stack features for an iterable of objects with ``query`` and ``keyword``."""
    rows = [_features(tuple(p.query), tuple(p.keyword), kb, pattern_buckets) for p in pairs]
    if not rows:
        return np.zeros((0, len(DENSE_FEATURES) + pattern_buckets))
    return np.vstack(rows)
