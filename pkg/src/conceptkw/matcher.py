"""Query-to-keyword retrieval through conceptual patterns."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

from .conceptualizer import (MAX_INSTANTIATIONS, Pattern, bindings_by_concept, conceptualize,
                             instantiate)
from .knowledge_base import KnowledgeBase, Tokens
from .repository import (CacheHolder, KeywordRepository, LookupCache, SynonymClusters,
                         expand_clusters, join_filter)
from .translation.decoder import DEFAULT_BEAM, DEFAULT_STACK_SIZE, decode_constrained
from .translation.model import TranslationModel
from .trie import PatternTrie

logger = logging.getLogger(__name__)

MAX_CANDIDATES = 200
STAGE_JOIN = "join"
STAGE_EXPAND = "expand"


@dataclass(frozen=True)
class MatchConfig:
    beam: int = DEFAULT_BEAM
    stack_size: int = DEFAULT_STACK_SIZE
    use_cache: bool = False
    max_candidates: int = MAX_CANDIDATES
    max_instantiations: int = MAX_INSTANTIATIONS


@dataclass
class MatchTrace:
    query: Tokens
    query_pattern: Optional[Pattern] = None
    cache_hit: Optional[bool] = None
    retrieved: list[tuple[Tokens, float]] = field(default_factory=list)
    skipped_patterns: list[Tokens] = field(default_factory=list)
    instantiated: list[tuple[Tokens, Tokens, float]] = field(default_factory=list)
    joined: list[Tokens] = field(default_factory=list)
    expanded: list[Tokens] = field(default_factory=list)
    candidates: list[tuple[Tokens, float, str]] = field(default_factory=list)
    timing: dict[str, float] = field(default_factory=dict)

    def final_keywords(self) -> list[Tokens]:
        return [k for k, _, _ in self.candidates]

    def to_dict(self, include_timing: bool = True, precision: int = 6) -> dict[str, Any]:
        j = " ".join
        pat = self.query_pattern
        d: dict[str, Any] = {
            "query": j(self.query),
            "query_pattern": pat.text if pat else None,
            "slot_values": [
                {"concept": v.concept, "entity_id": v.entity_id, "surface": j(v.surface)}
                for v in (pat.slot_values if pat else ())],
            "cache_hit": self.cache_hit,
            "retrieved_patterns": [{"pattern": j(p), "score": round(s, precision)}
                                   for p, s in self.retrieved],
            "skipped_patterns": [j(p) for p in self.skipped_patterns],
            "instantiated": [{"sentence": j(sent), "pattern": j(p), "score": round(s, precision)}
                             for sent, p, s in self.instantiated],
            "joined": [j(k) for k in self.joined],
            "expanded": [j(k) for k in self.expanded],
            "candidates": [{"keyword": j(k), "score": round(s, precision), "stage": st}
                           for k, s, st in self.candidates],
        }
        if include_timing:
            d["timing_ms"] = {k: round(v * 1000, 3) for k, v in self.timing.items()}
        return d

    def to_json(self, include_timing: bool = True) -> str:
        return json.dumps(self.to_dict(include_timing), indent=2, ensure_ascii=False) + "\n"


@dataclass
class Matcher:
    kb: KnowledgeBase
    model: TranslationModel
    repo: KeywordRepository
    trie: PatternTrie
    clusters: SynonymClusters = field(default_factory=SynonymClusters)
    config: MatchConfig = field(default_factory=MatchConfig)
    cache: CacheHolder = field(default_factory=CacheHolder)

    def retrieve(self, query: Sequence[str]) -> MatchTrace:
        return self._run(tuple(query), self.cache.current if self.config.use_cache else None)

    def retrieve_online(self, query: Sequence[str]) -> MatchTrace:
        return self._run(tuple(query), self.cache.current)

    def _run(self, query: Tokens, cache: Optional[LookupCache]) -> MatchTrace:
        trace = MatchTrace(query)
        clock = time.perf_counter
        t0 = clock()
        pattern = conceptualize(query, self.kb)
        trace.query_pattern = pattern
        t1 = clock()
        trace.timing["conceptualize"] = t1 - t0

        cached = cache.get(pattern.tokens) if cache is not None else None
        if cached is not None:
            trace.cache_hit = True
            trace.retrieved = [(e.target, e.score) for e in cached]
        else:
            if cache is not None:
                trace.cache_hit = False
            result = decode_constrained(self.model, pattern.tokens, self.trie,
                                        beam=self.config.beam, stack_size=self.config.stack_size)
            trace.retrieved = [(c.tokens, c.score) for c in result]
        t2 = clock()
        trace.timing["pattern_match"] = t2 - t1

        per_concept: dict[str, list[list[Tokens]]] = {}
        for v in pattern.slot_values:
            per_concept.setdefault(v.concept, []).append(self.kb.aliases_of(v.entity_id))
        best_score: dict[Tokens, float] = {}
        for target, score in trace.retrieved:
            target_pat = Pattern.from_tokens(target)
            bindings = bindings_by_concept(target_pat, per_concept)
            if bindings is None:
                trace.skipped_patterns.append(target)
                logger.debug("skipping %r: query lacks a requested concept", " ".join(target))
                continue
            for sent in instantiate(target_pat, bindings, self.config.max_instantiations):
                trace.instantiated.append((sent, target, score))
                if sent not in best_score:
                    best_score[sent] = score
        t3 = clock()
        trace.timing["instantiate"] = t3 - t2

        trace.joined = join_filter((s for s, _, _ in trace.instantiated), self.repo)
        t4 = clock()
        trace.timing["join"] = t4 - t3

        trace.expanded = expand_clusters(trace.joined, self.clusters)
        ranked = []
        joined = set(trace.joined)
        for pos, kw in enumerate(trace.joined):
            ranked.append((-best_score[kw], 0, pos, kw, STAGE_JOIN))
        for pos, kw in enumerate(trace.expanded):
            if kw in joined:
                continue
            source = next(k for k in trace.joined if kw in self.clusters.cluster(k))
            ranked.append((-best_score[source], 1, pos, kw, STAGE_EXPAND))
        ranked.sort(key=lambda r: r[:3])
        trace.candidates = [(kw, -neg, stage) for neg, _, _, kw, stage
                            in ranked[:self.config.max_candidates]]
        trace.timing["expand"] = clock() - t4
        return trace


def retrieve(query: Sequence[str], kb: KnowledgeBase, model: TranslationModel,
             repo: KeywordRepository, trie: PatternTrie, clusters: SynonymClusters,
             config: MatchConfig = MatchConfig()) -> MatchTrace:
    return Matcher(kb, model, repo, trie, clusters, config).retrieve(query)


def retrieve_online(query: Sequence[str], cache: LookupCache, kb: KnowledgeBase,
                    model: TranslationModel, repo: KeywordRepository, trie: PatternTrie,
                    clusters: SynonymClusters, config: MatchConfig = MatchConfig()) -> MatchTrace:
    return Matcher(kb, model, repo, trie, clusters, config, CacheHolder(cache)).retrieve_online(query)
