"""Concept-slot entity replacement for discriminator training data.

Positive pairs yield a positive variant (aligned slots get the same rare
entity on both sides) and a negative variant (a literally confusable, different
rare entity on the keyword side). Negative pairs get the same rare entity or
different rare entities with equal probability and stay negative.
"""

from __future__ import annotations

import logging
import math
import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional, Sequence

from ..conceptualizer import Pattern, conceptualize, render
from ..knowledge_base import Entity, KnowledgeBase, Tokens
from .data import LabeledPair
from .features import aligned_slots, levenshtein

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AugmentationConfig:
    rare_frequency_threshold: int = 2
    proportion: float = 0.12
    confusable_max_edit: int = 2
    confusable_min_overlap: float = 0.5
    negative_same_entity_prob: float = 0.5

    def __post_init__(self):
        # 0 disables augmentation; otherwise the proportion must lie in (0, 0.5]
        if not 0.0 <= self.proportion <= 0.5:
            raise ValueError(f"proportion must be in (0, 0.5], got {self.proportion}")


@dataclass
class AugmentationReport:
    budget: int = 0
    emitted: int = 0
    skipped: Counter = field(default_factory=Counter)


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def entity_frequencies(pairs: Sequence[LabeledPair], kb: KnowledgeBase) -> Counter:
    """Mentions per entity id over both sides of every pair."""
    freq: Counter = Counter()
    for p in pairs:
        for side in (p.query, p.keyword):
            for v in conceptualize(side, kb).slot_values:
                freq[v.entity_id] += 1
    return freq


def char_overlap(a: str, b: str) -> float:
    a, b = a.replace(" ", ""), b.replace(" ", "")
    if not a or not b:
        return 0.0
    return sum((Counter(a) & Counter(b)).values()) / max(len(a), len(b))


def is_confusable(a: Entity, b: Entity, cfg: AugmentationConfig) -> bool:
    sa, sb = " ".join(a.canonical_surface), " ".join(b.canonical_surface)
    return (levenshtein(sa, sb) <= cfg.confusable_max_edit
            or char_overlap(sa, sb) >= cfg.confusable_min_overlap)


class _RarePool:
    def __init__(self, kb: KnowledgeBase, freq: Counter, cfg: AugmentationConfig):
        self.kb = kb
        self.cfg = cfg
        self.by_concept: dict[str, list[Entity]] = {}
        for e in sorted(kb.lexicon, key=lambda e: e.entity_id):
            core = kb.coarse_concept_of(e.refined_concept)
            if core is not None and freq.get(e.entity_id, 0) <= cfg.rare_frequency_threshold:
                self.by_concept.setdefault(core, []).append(e)
        self._confusable: dict[str, list[Entity]] = {}

    def pick(self, concept: str, rng: random.Random) -> Optional[Entity]:
        pool = self.by_concept.get(concept)
        return rng.choice(pool) if pool else None

    def pick_other(self, concept: str, original: Entity, rng: random.Random) -> Optional[Entity]:
        pool = [e for e in self.by_concept.get(concept, ()) if e.entity_id != original.entity_id]
        if not pool:
            return None
        conf = self._confusable.get(original.entity_id)
        if conf is None:
            conf = [e for e in pool if is_confusable(original, e, self.cfg)]
            self._confusable[original.entity_id] = conf
        return rng.choice(conf or pool)


def _replace(pattern: Pattern, replacements: dict[int, Entity]) -> Tokens:
    surfaces = [replacements[i].canonical_surface if i in replacements else v.surface
                for i, v in enumerate(pattern.slot_values)]
    return render(pattern, surfaces)


def _verify(kb: KnowledgeBase, sentence: Tokens, pattern: Pattern, replacements: dict[int, Entity]) -> bool:
    """The rewritten sentence must conceptualize back to the same pattern and entities."""
    again = conceptualize(sentence, kb)
    if again.tokens != pattern.tokens:
        return False
    return all(again.slot_values[i].entity_id == e.entity_id for i, e in replacements.items())


def augment_dataset(train: Sequence[LabeledPair], kb: KnowledgeBase, cfg: AugmentationConfig = AugmentationConfig(),
                    seed: int = 0, report: Optional[AugmentationReport] = None) -> list[LabeledPair]:
    """Return exactly round(proportion * len(train)) augmented pairs when possible.

    Positive and negative source pairs are visited in seeded shuffled order
    (cycling if the budget exceeds the eligible pool), so a smaller budget
    yields a prefix of each stream of a larger one under the same seed.
    """
    report = report if report is not None else AugmentationReport()
    budget = round_half_up(cfg.proportion * len(train))
    report.budget = budget
    if budget == 0:
        return []
    freq = entity_frequencies(train, kb)
    pool = _RarePool(kb, freq, cfg)

    eligible = {1: [], 0: []}
    for idx, p in enumerate(train):
        qp, kp = conceptualize(p.query, kb), conceptualize(p.keyword, kb)
        aligned = aligned_slots(qp, kp)
        if aligned:
            eligible[p.label].append((idx, p, qp, kp, aligned))
    n_pos, n_neg = len(eligible[1]), len(eligible[0])
    if n_pos + n_neg == 0:
        report.skipped["no-aligned-slots"] += 1
        return []
    neg_budget = round_half_up(budget * n_neg / (n_pos + n_neg))
    pos_budget = budget - neg_budget

    base = random.Random(f"augment:{seed}")
    pos_order = base.sample(eligible[1], n_pos)
    neg_order = base.sample(eligible[0], n_neg)

    out_pos = _stream(pos_order, pos_budget, seed, "pos", pool, kb, cfg, report, positive=True)
    out_neg = _stream(neg_order, neg_budget, seed, "neg", pool, kb, cfg, report, positive=False)
    out = out_pos + out_neg
    report.emitted = len(out)
    if len(out) < budget:
        logger.warning("augmentation emitted %d of %d pairs (%s)", len(out), budget, dict(report.skipped))
    return out


def _stream(order, budget, seed, tag, pool: _RarePool, kb, cfg, report, positive: bool):
    out: list[LabeledPair] = []
    if not order:
        if budget:
            report.skipped[f"no-eligible-{tag}"] += budget
        return out
    k = 0
    misses = 0
    while len(out) < budget and misses < len(order):
        idx, p, qp, kp, aligned = order[k % len(order)]
        rng = random.Random(f"augment:{seed}:{tag}:{k}")
        k += 1
        variants = (_positive_variants if positive else _negative_variant)(p, qp, kp, aligned, pool, kb, cfg, rng, report)
        if not variants:
            misses += 1
            continue
        misses = 0
        out.extend(variants[:budget - len(out)])
    return out


def _same_entity_map(qp, aligned, pool, rng, report):
    q_rep, k_rep = {}, {}
    for qi, ki in aligned:
        concept = qp.slot_values[qi].concept
        e = pool.pick(concept, rng)
        if e is None:
            report.skipped[f"no-rare-entity:{concept}"] += 1
            return None
        q_rep[qi] = e
        k_rep[ki] = e
    return q_rep, k_rep


def _build(p, qp, kp, q_rep, k_rep, kb, label, report) -> Optional[LabeledPair]:
    q = _replace(qp, q_rep)
    k = _replace(kp, k_rep)
    if not (_verify(kb, q, qp, q_rep) and _verify(kb, k, kp, k_rep)):
        report.skipped["retag-mismatch"] += 1
        return None
    return LabeledPair(q, k, label, p.match_type, "augmented")


def _positive_variants(p, qp, kp, aligned, pool, kb, cfg, rng, report):
    maps = _same_entity_map(qp, aligned, pool, rng, report)
    if maps is None:
        return []
    q_rep, k_rep = maps
    pos = _build(p, qp, kp, q_rep, k_rep, kb, 1, report)
    if pos is None:
        return []
    qi, ki = aligned[0]
    original = q_rep[qi]
    other = pool.pick_other(qp.slot_values[qi].concept, original, rng)
    if other is None:
        report.skipped["no-second-rare-entity"] += 1
        return [pos]
    neg = _build(p, qp, kp, q_rep, {**k_rep, ki: other}, kb, 0, report)
    return [pos] if neg is None else [pos, neg]


def _negative_variant(p, qp, kp, aligned, pool, kb, cfg, rng, report):
    maps = _same_entity_map(qp, aligned, pool, rng, report)
    if maps is None:
        return []
    q_rep, k_rep = maps
    if rng.random() >= cfg.negative_same_entity_prob:
        qi, ki = aligned[0]
        other = pool.pick_other(qp.slot_values[qi].concept, q_rep[qi], rng)
        if other is None:
            report.skipped["no-second-rare-entity"] += 1
            return []
        k_rep = {**k_rep, ki: other}
    neg = _build(p, qp, kp, q_rep, k_rep, kb, 0, report)
    return [] if neg is None else [neg]
