"""Keyword inventory: pattern repository, prefix trie, synonym clusters, lookup cache."""

from __future__ import annotations

import logging
import threading
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .conceptualizer import Pattern, conceptualize
from .knowledge_base import KnowledgeBase, Tokens, tokenize
from .translation.decoder import DEFAULT_BEAM, DEFAULT_STACK_SIZE, decode_constrained
from .translation.model import TranslationModel
from .trie import PatternTrie

logger = logging.getLogger(__name__)

DEFAULT_CACHE_TOP_K = 10_000


class KeywordRepository:
    def __init__(self, keywords: Iterable[Tokens], kb: KnowledgeBase):
        self.keywords: list[Tokens] = []
        self._order: dict[Tokens, int] = {}
        self.pattern_index: dict[Tokens, list[Tokens]] = {}
        self.patterns: dict[Tokens, Pattern] = {}
        for kw in keywords:
            kw = tuple(kw)
            if not kw or kw in self._order:
                continue
            self._order[kw] = len(self.keywords)
            self.keywords.append(kw)
            pat = conceptualize(kw, kb)
            self.pattern_index.setdefault(pat.tokens, []).append(kw)
            self.patterns[kw] = pat

    def __contains__(self, keyword: Sequence[str]) -> bool:
        return tuple(keyword) in self._order

    def __len__(self) -> int:
        return len(self.keywords)

    def rank(self, keyword: Tokens) -> int:
        return self._order[keyword]

    def pattern_set(self) -> set[Tokens]:
        return set(self.pattern_index)


def read_keywords(path: str | Path) -> list[Tokens]:
    with open(path, encoding="utf-8") as fh:
        return [t for t in (tokenize(line) for line in fh if not line.startswith("#")) if t]


def write_keywords(keywords: Iterable[Tokens], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for kw in keywords:
            fh.write(" ".join(kw) + "\n")


def build_repository(keywords: str | Path | Iterable[Tokens],
                     kb: KnowledgeBase) -> tuple[KeywordRepository, PatternTrie]:
    if isinstance(keywords, (str, Path)):
        keywords = read_keywords(keywords)
    repo = KeywordRepository(keywords, kb)
    return repo, PatternTrie(repo.pattern_index)


class UnionFind:
    def __init__(self):
        self.parent: dict = {}

    def add(self, x) -> None:
        self.parent.setdefault(x, x)

    def find(self, x):
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a, b) -> None:
        self.add(a)
        self.add(b)
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


@dataclass
class SynonymClusters:
    """Disjoint keyword clusters; members are kept in repository order."""
    cluster_of: dict[Tokens, int] = field(default_factory=dict)
    members: list[list[Tokens]] = field(default_factory=list)
    dropped: list[tuple[Tokens, Tokens]] = field(default_factory=list)

    def cluster(self, keyword: Sequence[str]) -> list[Tokens]:
        cid = self.cluster_of.get(tuple(keyword))
        return self.members[cid] if cid is not None else [tuple(keyword)]

    def multi_member(self) -> list[list[Tokens]]:
        return [m for m in self.members if len(m) > 1]


def build_clusters(pairs: str | Path | Iterable[tuple[Tokens, Tokens]],
                   repo: KeywordRepository) -> SynonymClusters:
    """Transitive closure of keyword-keyword synonym pairs.

    Pairs mentioning a keyword outside the repository are dropped and listed
    in ``dropped``.
    """
    if isinstance(pairs, (str, Path)):
        pairs = read_k2k_pairs(pairs)
    uf = UnionFind()
    dropped = []
    for a, b in pairs:
        a, b = tuple(a), tuple(b)
        if a not in repo or b not in repo:
            dropped.append((a, b))
            continue
        uf.union(a, b)
    if dropped:
        logger.warning("dropped %d synonym pairs with keywords outside the repository", len(dropped))
    groups: dict = {}
    for kw in uf.parent:
        groups.setdefault(uf.find(kw), []).append(kw)
    clusters = SynonymClusters(dropped=dropped)
    for members in sorted(groups.values(), key=lambda m: min(repo.rank(k) for k in m)):
        members.sort(key=repo.rank)
        cid = len(clusters.members)
        clusters.members.append(members)
        for k in members:
            clusters.cluster_of[k] = cid
    return clusters


def read_k2k_pairs(path: str | Path) -> list[tuple[Tokens, Tokens]]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            cols = line.split("\t")
            if len(cols) != 2:
                raise ValueError(f"{path}:{lineno}: expected kw1<TAB>kw2")
            out.append((tokenize(cols[0]), tokenize(cols[1])))
    return out


def join_filter(candidates: Iterable[Sequence[str]], repo: KeywordRepository) -> list[Tokens]:
    """Candidates that are real keywords, in input order, without duplicates."""
    out, seen = [], set()
    for c in candidates:
        c = tuple(c)
        if c in repo and c not in seen:
            seen.add(c)
            out.append(c)
    return out


def expand_clusters(keywords: Iterable[Sequence[str]], clusters: SynonymClusters) -> list[Tokens]:
    keywords = [tuple(k) for k in keywords]
    out, seen = [], set()
    for k in keywords:
        if k not in seen:
            seen.add(k)
            out.append(k)
    for k in keywords:
        for m in clusters.cluster(k):
            if m not in seen:
                seen.add(m)
                out.append(m)
    return out


@dataclass(frozen=True)
class CacheEntry:
    target: Tokens
    score: float


class LookupCache:
    """Immutable snapshot of precomputed keyword patterns for frequent query patterns."""

    def __init__(self, entries: Optional[dict[Tokens, list[CacheEntry]]] = None, generation: int = 0):
        self._entries: dict[Tokens, tuple[CacheEntry, ...]] = {
            k: tuple(v) for k, v in (entries or {}).items()}
        self.generation = generation

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, pattern: Sequence[str]) -> bool:
        return tuple(pattern) in self._entries

    def get(self, pattern: Sequence[str]) -> Optional[tuple[CacheEntry, ...]]:
        return self._entries.get(tuple(pattern))

    def items(self):
        return self._entries.items()

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"# generation={self.generation}\n")
            for pat in sorted(self._entries):
                ranked = " ||| ".join(f"{e.score!r} {' '.join(e.target)}" for e in self._entries[pat])
                fh.write(f"{' '.join(pat)}\t{ranked}\n")

    @classmethod
    def load(cls, path: str | Path) -> "LookupCache":
        entries: dict[Tokens, list[CacheEntry]] = {}
        generation = 0
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.rstrip("\n")
                if line.startswith("# generation="):
                    generation = int(line.split("=", 1)[1])
                    continue
                if not line or line.startswith("#"):
                    continue
                pat, _, ranked = line.partition("\t")
                items = []
                for chunk in filter(None, (c.strip() for c in ranked.split("|||"))):
                    score, _, target = chunk.partition(" ")
                    items.append(CacheEntry(tuple(target.split()), float(score)))
                entries[tuple(pat.split())] = items
        return cls(entries, generation)


def frequent_patterns(queries: Iterable[Tokens], kb: KnowledgeBase,
                      top_k: int = DEFAULT_CACHE_TOP_K) -> list[Tokens]:
    """Top-k query patterns by frequency; ties broken by pattern text."""
    counts = Counter(conceptualize(q, kb).tokens for q in queries if q)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return [p for p, _ in ranked[:top_k]]


def build_cache(query_log: Iterable[Tokens], kb: KnowledgeBase, model: TranslationModel,
                trie: PatternTrie, top_k: int = DEFAULT_CACHE_TOP_K, beam: int = DEFAULT_BEAM,
                stack_size: int = DEFAULT_STACK_SIZE, generation: int = 1) -> LookupCache:
    entries = {}
    for pat in frequent_patterns(query_log, kb, top_k):
        result = decode_constrained(model, pat, trie, beam=beam, stack_size=stack_size)
        entries[pat] = [CacheEntry(c.tokens, c.score) for c in result]
    return LookupCache(entries, generation)


class CacheHolder:
    """Readers see one complete snapshot; ``swap`` replaces it atomically."""

    def __init__(self, cache: Optional[LookupCache] = None):
        self._cache = cache if cache is not None else LookupCache()
        self._lock = threading.Lock()

    @property
    def current(self) -> LookupCache:
        return self._cache

    def swap(self, cache: LookupCache) -> LookupCache:
        with self._lock:
            old, self._cache = self._cache, cache
        return old
