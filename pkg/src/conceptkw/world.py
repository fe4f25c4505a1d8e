"""Seeded synthetic world: knowledge base, templates, corpora and a synonymy oracle.

Synonymy is decidable by construction. Templates are grouped into synonymous
groups; two sentences are synonymous iff their patterns belong to the same
group and carry the same slot entities (aliases resolve to their entity).
"""

from __future__ import annotations

import json
import logging
import random
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Optional, Sequence

from .conceptualizer import Pattern, conceptualize, slot_token
from .discriminator.augment import char_overlap
from .discriminator.data import LabeledPair, write_labeled_pairs
from .discriminator.features import levenshtein
from .knowledge_base import (ConceptTaxonomy, Entity, EntityLexicon, KnowledgeBase, Tokens,
                             load_kb_dir, save_kb_dir)
from .pattern_corpus import ParaphrasePair, read_paraphrases, write_paraphrases
from .repository import write_keywords

logger = logging.getLogger(__name__)

CONCEPT_NAMES = ("brand", "food", "location", "surgery", "medicine", "course",
                 "device", "service", "garment", "plant", "game", "pet")
_ONSETS = "b c d f g h j k l m n p r s t v z".split() + ["ch", "sh", "tr", "br", "kl"]
_VOWELS = "a e i o u".split() + ["ai", "ou"]


class WorldConfigError(ValueError):
    pass


@dataclass(frozen=True)
class WorldConfig:
    n_concepts: int = 6
    n_entities: int = 420
    n_templates: int = 48
    group_size: int = 4
    alias_rate: float = 0.3
    zipf_exponent: float = 1.5
    seed: int = 7
    n_pairs: int = 10_000
    two_slot_rate: float = 0.25
    drift_rate: float = 0.15
    n_keywords: int = 3000
    n_k2k: int = 400
    n_queries: int = 3000
    n_dis_train: int = 2000
    n_dis_dev: int = 600
    n_dis_test: int = 1000
    n_longtail_test: int = 1000
    mismatch_negative_rate: float = 0.0

    def validate(self) -> None:
        for name in ("n_concepts", "n_entities", "n_templates", "group_size", "n_pairs"):
            if getattr(self, name) < 1:
                raise WorldConfigError(f"{name} must be >= 1")
        if self.n_concepts > self.n_entities:
            raise WorldConfigError("need at least one entity per concept")
        for name in ("alias_rate", "two_slot_rate", "drift_rate", "mismatch_negative_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise WorldConfigError(f"{name} must lie in [0, 1]")

    @classmethod
    def from_dict(cls, d: dict) -> "WorldConfig":
        known = {f.name: f.type for f in fields(cls)}
        out = {}
        for k, v in d.items():
            if k not in known:
                raise WorldConfigError(f"unknown world option {k!r}")
            out[k] = float(v) if "float" in str(known[k]) else int(v)
        return cls(**out)


@dataclass
class Template:
    group: int
    pattern: Pattern

    @property
    def text(self) -> str:
        return self.pattern.text


class World:
    """In-memory synthetic world; :func:`gen_world` writes it to disk."""

    def __init__(self, config: WorldConfig):
        config.validate()
        self.config = config
        self.rng = random.Random(f"world:{config.seed}")
        self._used_words: set[str] = set()
        self._build_kb()
        self._build_templates()
        self.popularity: dict[str, float] = {}
        self._rank_entities()

    # -- vocabulary -------------------------------------------------------
    def _word(self, syllables: Optional[int] = None) -> str:
        for _ in range(1000):
            n = syllables or self.rng.choice((2, 2, 3))
            w = "".join(self.rng.choice(_ONSETS) + self.rng.choice(_VOWELS) for _ in range(n))
            if w not in self._used_words:
                self._used_words.add(w)
                return w
        raise RuntimeError("vocabulary exhausted")

    def _mutate(self, word: str) -> Optional[str]:
        for _ in range(50):
            i = self.rng.randrange(len(word))
            pool = "aeiou" if word[i] in "aeiou" else "bcdfghjklmnprstvz"
            w = word[:i] + self.rng.choice(pool) + word[i + 1:]
            if w != word and w not in self._used_words:
                self._used_words.add(w)
                return w
        return None

    # -- knowledge base -----------------------------------------------------
    def _build_kb(self) -> None:
        cfg = self.config
        self.core_concepts = [CONCEPT_NAMES[i] if i < len(CONCEPT_NAMES) else f"concept{i}"
                              for i in range(cfg.n_concepts)]
        concepts = set(self.core_concepts) | {"modifier"}
        edges: dict[str, list[str]] = {}
        self.refined: dict[str, list[str]] = {}
        heads: dict[str, str] = {}
        for c in self.core_concepts:
            subs = [f"{c}_{k}" for k in ("a", "b")]
            self.refined[c] = subs
            for s in subs:
                concepts.add(s)
                edges[s] = [c]
                heads[s] = self._word(2)

        entities: list[Entity] = []
        per_concept = [cfg.n_entities // cfg.n_concepts + (i < cfg.n_entities % cfg.n_concepts)
                       for i in range(cfg.n_concepts)]
        surfaces: set[Tokens] = set()
        eid = 0
        self.entities_by_concept: dict[str, list[str]] = {}
        for c, count in zip(self.core_concepts, per_concept):
            ids = self.entities_by_concept[c] = []
            names: list[tuple[str, str]] = []
            while len(names) < count:
                # families of literally confusable names share a refined concept
                sub = self.rng.choice(self.refined[c])
                base = self._word()
                family = [base]
                for _ in range(self.rng.choice((0, 1, 2))):
                    m = self._mutate(base)
                    if m:
                        family.append(m)
                names.extend((n, sub) for n in family)
            for name, sub in names[:count]:
                canonical: Tokens = (name, heads[sub]) if self.rng.random() < 0.4 else (name,)
                aliases: list[Tokens] = []
                if self.rng.random() < cfg.alias_rate:
                    alias = (name,) if len(canonical) == 2 else (self._word(2),)
                    if alias not in surfaces and alias != canonical:
                        aliases.append(alias)
                surfaces.add(canonical)
                surfaces.update(aliases)
                e = Entity(f"e{eid:05d}", canonical, sub, tuple(aliases))
                eid += 1
                entities.append(e)
                ids.append(e.entity_id)
        # heads must never match alone, so they are reserved words, not surfaces
        self.modifiers = [self._word(2) for _ in range(3)]
        for m in self.modifiers:
            entities.append(Entity(f"m{len(entities):05d}", (m,), "modifier", ()))
        taxonomy = ConceptTaxonomy.build(concepts, edges, self.core_concepts)
        self.kb = KnowledgeBase.from_parts(taxonomy, EntityLexicon(entities))

    def _rank_entities(self) -> None:
        s = self.config.zipf_exponent
        for c in self.core_concepts:
            ids = list(self.entities_by_concept[c])
            self.rng.shuffle(ids)
            for r, e in enumerate(ids, 1):
                self.popularity[e] = 1.0 / r ** s
            self.entities_by_concept[c] = ids  # popularity order

    # -- templates ------------------------------------------------------------
    def _build_templates(self) -> None:
        cfg = self.config
        function_words = [self._word(1) for _ in range(6)]
        n_groups = max(1, cfg.n_templates // cfg.group_size)
        sizes = [cfg.n_templates // n_groups + (g < cfg.n_templates % n_groups) for g in range(n_groups)]
        self.templates: list[Template] = []
        self.groups: list[list[Template]] = []
        seen: set[Tokens] = set()
        for g, size in enumerate(sizes):
            c1 = self.core_concepts[g % len(self.core_concepts)]
            signature = [c1]
            if len(self.core_concepts) > 1 and self.rng.random() < cfg.two_slot_rate:
                signature.append(self.rng.choice([c for c in self.core_concepts if c != c1]))
            intent = [self._word() for _ in range(5)]
            group: list[Template] = []
            attempts = 0
            while len(group) < size and attempts < 500:
                attempts += 1
                n_lit = self.rng.randint(2, 4)
                words = self.rng.sample(intent, min(n_lit, len(intent)))
                if self.rng.random() < 0.5:
                    words.insert(self.rng.randrange(len(words) + 1), self.rng.choice(function_words))
                if self.rng.random() < 0.1:
                    words.insert(self.rng.randrange(len(words) + 1), self.rng.choice(self.modifiers))
                toks = list(words)
                for c in signature:
                    toks.insert(self.rng.randrange(len(toks) + 1), slot_token(c))
                toks = tuple(toks)
                if toks in seen:
                    continue
                seen.add(toks)
                t = Template(g, Pattern.from_tokens(toks))
                group.append(t)
            self.groups.append(group)
            self.templates.extend(group)
        self.group_of = {t.pattern.tokens: t.group for t in self.templates}

    # -- sampling helpers -----------------------------------------------------
    def sample_entity(self, concept: str, rng: random.Random, uniform: bool = False) -> str:
        ids = self.entities_by_concept[concept]
        if uniform:
            return rng.choice(ids)
        return rng.choices(ids, weights=[self.popularity[e] for e in ids])[0]

    def surface(self, entity_id: str, rng: random.Random, alias_prob: float = 0.5) -> Tokens:
        e = self.kb.lexicon.get(entity_id)
        if e.aliases and rng.random() < alias_prob:
            return rng.choice(e.aliases)
        return e.canonical_surface

    def render(self, template: Template, entity_ids: Sequence[str], rng: random.Random,
               alias_prob: float = 0.5) -> Tokens:
        it = iter(entity_ids)
        out: list[str] = []
        for seg in template.pattern.segments:
            if hasattr(seg, "concept"):
                out.extend(self.surface(next(it), rng, alias_prob))
            else:
                out.append(seg.token)
        return tuple(out)

    def _two_templates(self, rng: random.Random, group: Optional[int] = None):
        g = self.groups[group if group is not None else rng.randrange(len(self.groups))]
        if len(g) == 1:
            return g[0], g[0]
        a, b = rng.sample(g, 2)
        return a, b

    def sample_entities(self, template: Template, rng: random.Random, uniform: bool = False) -> list[str]:
        return [self.sample_entity(c, rng, uniform) for c in template.pattern.slot_concepts()]

    # -- corpora ----------------------------------------------------------------
    def paraphrase_pairs(self) -> list[ParaphrasePair]:
        """Mined paraphrase pairs; a ``drift_rate`` share swaps one target entity
        for a popular same-concept entity, as mined logs do."""
        rng = random.Random(f"pairs:{self.config.seed}")
        out = []
        for _ in range(self.config.n_pairs):
            t1, t2 = self._two_templates(rng)
            ents = self.sample_entities(t1, rng)
            tgt_ents = list(ents)
            if ents and rng.random() < self.config.drift_rate:
                k = rng.randrange(len(ents))
                concept = t1.pattern.slot_concepts()[k]
                if len(self.entities_by_concept[concept]) > 1:
                    while tgt_ents[k] == ents[k]:
                        tgt_ents[k] = self.sample_entity(concept, rng)
            tgt_ents = _reorder_for(t1, t2, tgt_ents)
            out.append(ParaphrasePair(self.render(t1, ents, rng, self.config.alias_rate),
                                      self.render(t2, tgt_ents, rng, self.config.alias_rate)))
        return out

    def query_log(self, n: Optional[int] = None, seed_tag: str = "queries") -> list[Tokens]:
        rng = random.Random(f"{seed_tag}:{self.config.seed}")
        out = []
        for _ in range(n if n is not None else self.config.n_queries):
            t = rng.choice(self.templates)
            out.append(self.render(t, self.sample_entities(t, rng), rng, self.config.alias_rate))
        return out

    def keywords(self) -> list[Tokens]:
        rng = random.Random(f"keywords:{self.config.seed}")
        out, seen = [], set()
        for _ in range(self.config.n_keywords):
            t = rng.choice(self.templates)
            kw = self.render(t, self.sample_entities(t, rng, uniform=rng.random() < 0.5), rng,
                             self.config.alias_rate)
            if kw not in seen:
                seen.add(kw)
                out.append(kw)
        return out

    def k2k_pairs(self, keywords: Sequence[Tokens]) -> list[tuple[Tokens, Tokens]]:
        rng = random.Random(f"k2k:{self.config.seed}")
        by_meaning: dict = {}
        for kw in keywords:
            key = self.meaning(kw)
            if key is not None:
                by_meaning.setdefault(key, []).append(kw)
        groups = [g for _, g in sorted(by_meaning.items(), key=lambda kv: repr(kv[0])) if len(g) > 1]
        out = []
        for _ in range(self.config.n_k2k):
            if not groups:
                break
            g = rng.choice(groups)
            a, b = rng.sample(g, 2)
            out.append((a, b))
        return out

    def meaning(self, tokens: Sequence[str]):
        """(group, sorted slot entities) or None when the sentence is not a template instance."""
        pat = conceptualize(tuple(tokens), self.kb)
        g = self.group_of.get(pat.tokens)
        if g is None:
            return None
        return (g, tuple(pat.value_multiset()))

    def synonymous(self, a: Sequence[str], b: Sequence[str]) -> bool:
        ma = self.meaning(a)
        return ma is not None and ma == self.meaning(b)

    def gen_test_queries(self) -> list[Tokens]:
        """Every single-slot template rendered with every entity of its concept."""
        out = []
        for t in self.templates:
            concepts = t.pattern.slot_concepts()
            if len(concepts) != 1:
                continue
            for e in sorted(self.entities_by_concept[concepts[0]]):
                out.append(self.render(t, [e], random.Random(0), alias_prob=0.0))
        return out

    # -- discriminator data -------------------------------------------------------
    def labeled_pairs(self, n: int, seed_tag: str) -> list[LabeledPair]:
        rng = random.Random(f"{seed_tag}:{self.config.seed}")
        out = []
        for _ in range(n):
            mt = rng.choice(("exact", "exact", "phrase", "broad"))
            p_pos = {"exact": 0.7, "phrase": 0.5, "broad": 0.3}[mt]
            t1, t2 = self._two_templates(rng)
            ents = self.sample_entities(t1, rng)
            if rng.random() < p_pos:
                q = self.render(t1, ents, rng)
                k = self.render(t2, _reorder_for(t1, t2, ents), rng)
                out.append(LabeledPair(q, k, 1, mt))
                continue
            q = self.render(t1, ents, rng)
            if rng.random() < self.config.mismatch_negative_rate:
                swapped = list(ents)
                concept = t1.pattern.slot_concepts()[0]
                if len(self.entities_by_concept[concept]) > 1:
                    while swapped[0] == ents[0]:
                        swapped[0] = self.sample_entity(concept, rng)
                k = self.render(t2, _reorder_for(t1, t2, swapped), rng)
            else:
                k = self._other_group_keyword(t1, ents, rng)
            out.append(LabeledPair(q, k, 0, mt))
        return out

    def _other_group_keyword(self, t1: Template, ents: Sequence[str], rng: random.Random) -> Tokens:
        """A non-synonymous template, reusing the query entities where the concepts allow."""
        others = [t for t in self.templates if t.group != t1.group]
        if not others:
            swapped = list(ents)
            concept = t1.pattern.slot_concepts()[0] if ents else None
            if concept and len(self.entities_by_concept[concept]) > 1:
                while swapped[0] == ents[0]:
                    swapped[0] = self.sample_entity(concept, rng)
            return self.render(t1, swapped, rng)
        t2 = rng.choice(others)
        pool = {}
        for c, e in zip(t1.pattern.slot_concepts(), ents):
            pool.setdefault(c, []).append(e)
        chosen = []
        for c in t2.pattern.slot_concepts():
            chosen.append(pool[c].pop(0) if pool.get(c) else self.sample_entity(c, rng))
        return self.render(t2, chosen, rng)

    def longtail_pairs(self, n: int, train: Sequence[LabeledPair], rare_threshold: int = 2,
                       seed_tag: str = "longtail") -> list[LabeledPair]:
        """Long-tail test cases over entities seen at most ``rare_threshold`` times in ``train``.

        Half are synonymous rewrites, a fifth keep the entity under a
        non-synonymous template, and the rest swap in a literally confusable
        rare entity under a synonymous template.
        """
        from .discriminator.augment import entity_frequencies

        rng = random.Random(f"{seed_tag}:{self.config.seed}")
        freq = entity_frequencies(train, self.kb)
        rare = {c: [e for e in sorted(ids) if freq.get(e, 0) <= rare_threshold]
                for c, ids in self.entities_by_concept.items()}
        single = [t for t in self.templates if len(t.pattern.slots) == 1
                  and len(rare[t.pattern.slot_concepts()[0]]) > 1]
        if not single:
            return []
        out = []
        for i in range(n):
            t1 = rng.choice(single)
            g = self.groups[t1.group]
            t2 = rng.choice([t for t in g if t is not t1] or [t1])
            concept = t1.pattern.slot_concepts()[0]
            e = rng.choice(rare[concept])
            q = self.render(t1, [e], rng)
            r = rng.random()
            mt = rng.choice(("exact", "exact", "phrase", "broad"))
            if r < 0.5:
                out.append(LabeledPair(q, self.render(t2, [e], rng), 1, mt))
            elif r < 0.7:
                out.append(LabeledPair(q, self._other_group_keyword(t1, [e], rng), 0, mt))
            else:
                other = self.confusable(e, rare[concept], rng)
                out.append(LabeledPair(q, self.render(t2, [other], rng), 0, mt))
        return out

    def confusable(self, entity_id: str, pool: Sequence[str], rng: random.Random) -> str:
        base = " ".join(self.kb.lexicon.get(entity_id).canonical_surface)
        cands = []
        for e in pool:
            if e == entity_id:
                continue
            s = " ".join(self.kb.lexicon.get(e).canonical_surface)
            if levenshtein(base, s) <= 2 or char_overlap(base, s) >= 0.5:
                cands.append(e)
        return rng.choice(cands or [e for e in pool if e != entity_id])


def _reorder_for(t1: Template, t2: Template, ents: Sequence[str]) -> list[str]:
    """Map entities bound to t1's slots onto t2's slot order (by concept occurrence)."""
    pool: dict[str, list[str]] = {}
    for c, e in zip(t1.pattern.slot_concepts(), ents):
        pool.setdefault(c, []).append(e)
    return [pool[c].pop(0) for c in t2.pattern.slot_concepts()]


# -- on-disk fixture -----------------------------------------------------------

def gen_world(config: WorldConfig, out_dir: str | Path) -> Path:
    """Write a complete fixture directory; byte-identical for identical configs."""
    world = World(config)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_kb_dir(world.kb, out / "kb")
    write_paraphrases(world.paraphrase_pairs(), out / "paraphrases.tsv")
    keywords = world.keywords()
    write_keywords(keywords, out / "keywords.txt")
    with open(out / "k2k-pairs.tsv", "w", encoding="utf-8") as fh:
        for a, b in world.k2k_pairs(keywords):
            fh.write(f"{' '.join(a)}\t{' '.join(b)}\n")
    write_keywords(world.query_log(), out / "queries.txt")
    write_keywords(world.gen_test_queries(), out / "gen-test-queries.txt")
    train = world.labeled_pairs(config.n_dis_train, "dis-train")
    write_labeled_pairs(train, out / "dis-train.tsv")
    write_labeled_pairs(world.labeled_pairs(config.n_dis_dev, "dis-dev"), out / "dis-dev.tsv")
    write_labeled_pairs(world.labeled_pairs(config.n_dis_test, "dis-test"), out / "dis-test.tsv")
    write_labeled_pairs(world.longtail_pairs(config.n_longtail_test, train), out / "dis-longtail.tsv")
    with open(out / "oracle.tsv", "w", encoding="utf-8") as fh:
        fh.write("# group_id\tpattern\n")
        for t in world.templates:
            fh.write(f"{t.group}\t{t.text}\n")
    with open(out / "world.json", "w", encoding="utf-8") as fh:
        json.dump(asdict(config), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return out


class Oracle:
    """Ground-truth synonymy judge loaded from a fixture's ``oracle.tsv``."""

    def __init__(self, kb: KnowledgeBase, group_of: dict[Tokens, int]):
        self.kb = kb
        self.group_of = group_of

    @classmethod
    def from_world(cls, world: World) -> "Oracle":
        return cls(world.kb, dict(world.group_of))

    @classmethod
    def load(cls, fixture_dir: str | Path) -> "Oracle":
        d = Path(fixture_dir)
        group_of = {}
        with open(d / "oracle.tsv", encoding="utf-8") as fh:
            for line in fh:
                if line.startswith("#") or not line.strip():
                    continue
                g, pat = line.rstrip("\n").split("\t")
                group_of[tuple(pat.split())] = int(g)
        return cls(load_kb_dir(d / "kb"), group_of)

    def meaning(self, tokens: Sequence[str]):
        pat = conceptualize(tuple(tokens), self.kb)
        g = self.group_of.get(pat.tokens)
        return None if g is None else (g, tuple(pat.value_multiset()))

    def synonymous(self, a: Sequence[str], b: Sequence[str]) -> bool:
        ma = self.meaning(a)
        return ma is not None and ma == self.meaning(b)


def load_paraphrases(fixture_dir: str | Path) -> list[ParaphrasePair]:
    return read_paraphrases(Path(fixture_dir) / "paraphrases.tsv")
