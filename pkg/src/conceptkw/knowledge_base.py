"""Concept taxonomy, entity lexicon and the surface-form mention index."""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Optional

Tokens = tuple[str, ...]


class KnowledgeBaseError(ValueError):
    """Raised for malformed or inconsistent knowledge-base input."""


class UnknownConceptError(KeyError):
    pass


class UnknownEntityError(KeyError):
    pass


def tokenize(text: str) -> Tokens:
    """Whitespace tokenization with case folding."""
    return tuple(text.casefold().split())


@dataclass(frozen=True)
class ConceptTaxonomy:
    concepts: frozenset[str]
    hypernym_edges: dict[str, tuple[str, ...]]
    core_concepts: frozenset[str]
    _coarse: dict[str, Optional[str]] = field(default_factory=dict, repr=False, compare=False)

    @classmethod
    def build(cls, concepts: Iterable[str], edges: dict[str, Iterable[str]],
              core: Iterable[str]) -> "ConceptTaxonomy":
        concepts = frozenset(concepts)
        core = frozenset(core)
        norm_edges = {c: tuple(sorted(set(ps))) for c, ps in edges.items() if ps}
        for child, parents in norm_edges.items():
            for p in (child, *parents):
                if p not in concepts:
                    raise KnowledgeBaseError(f"dangling concept reference: {p!r}")
        missing = core - concepts
        if missing:
            raise KnowledgeBaseError(f"core concepts not in taxonomy: {sorted(missing)}")
        _check_acyclic(concepts, norm_edges)
        tax = cls(concepts, norm_edges, core)
        for c in sorted(concepts):
            tax._coarse[c] = tax._roll_up(c)
        return tax

    def parents(self, concept: str) -> tuple[str, ...]:
        return self.hypernym_edges.get(concept, ())

    def _roll_up(self, concept: str) -> Optional[str]:
        # Dijkstra on unit edges: (distance, concept id) gives the min-edge,
        # then lexicographically smallest, core ancestor.
        heap = [(0, concept)]
        seen = set()
        while heap:
            dist, c = heapq.heappop(heap)
            if c in seen:
                continue
            seen.add(c)
            if c in self.core_concepts:
                return c
            for p in self.parents(c):
                if p not in seen:
                    heapq.heappush(heap, (dist + 1, p))
        return None

    def coarse_concept_of(self, concept: str) -> Optional[str]:
        if concept not in self.concepts:
            raise UnknownConceptError(concept)
        return self._coarse[concept]


def _check_acyclic(concepts: frozenset[str], edges: dict[str, tuple[str, ...]]) -> None:
    WHITE, GREY, BLACK = 0, 1, 2
    color = dict.fromkeys(concepts, WHITE)
    for start in sorted(concepts):
        if color[start] != WHITE:
            continue
        stack = [(start, iter(edges.get(start, ())))]
        color[start] = GREY
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                color[node] = BLACK
                stack.pop()
            elif color[nxt] == GREY:
                raise KnowledgeBaseError(f"cycle in taxonomy through {nxt!r}")
            elif color[nxt] == WHITE:
                color[nxt] = GREY
                stack.append((nxt, iter(edges.get(nxt, ()))))


@dataclass(frozen=True)
class Entity:
    entity_id: str
    canonical_surface: Tokens
    refined_concept: str
    aliases: tuple[Tokens, ...] = ()

    @property
    def surfaces(self) -> tuple[Tokens, ...]:
        return (self.canonical_surface, *self.aliases)


class EntityLexicon:
    def __init__(self, entities: Iterable[Entity] = ()):
        self.entities: list[Entity] = list(entities)
        self._by_id: dict[str, Entity] = {}
        for e in self.entities:
            if e.entity_id in self._by_id:
                raise KnowledgeBaseError(f"duplicate entity id {e.entity_id!r}")
            if not e.canonical_surface:
                raise KnowledgeBaseError(f"entity {e.entity_id!r} has an empty surface")
            if e.canonical_surface in e.aliases:
                raise KnowledgeBaseError(f"entity {e.entity_id!r} lists its canonical surface as an alias")
            self._by_id[e.entity_id] = e

    def __len__(self) -> int:
        return len(self.entities)

    def __iter__(self) -> Iterator[Entity]:
        return iter(self.entities)

    def __contains__(self, entity_id: str) -> bool:
        return entity_id in self._by_id

    def get(self, entity_id: str) -> Entity:
        try:
            return self._by_id[entity_id]
        except KeyError:
            raise UnknownEntityError(entity_id) from None

    def aliases_of(self, entity_id: str) -> list[Tokens]:
        """Canonical surface first, then aliases in lexicon order."""
        return list(self.get(entity_id).surfaces)


class MentionIndex:
    """Token trie over every entity surface, used for longest-match scans."""

    _END = "\x00end"

    def __init__(self, lexicon: EntityLexicon):
        self._root: dict = {}
        self._surfaces: dict[Tokens, list[str]] = {}
        for e in lexicon:
            for s in e.surfaces:
                ids = self._surfaces.setdefault(s, [])
                if e.entity_id not in ids:
                    ids.append(e.entity_id)
        for s, ids in self._surfaces.items():
            ids.sort()
            node = self._root
            for tok in s:
                node = node.setdefault(tok, {})
            node[self._END] = tuple(ids)

    def __len__(self) -> int:
        return len(self._surfaces)

    def surfaces(self) -> dict[Tokens, tuple[str, ...]]:
        return {s: tuple(ids) for s, ids in self._surfaces.items()}

    def lookup(self, surface: Tokens) -> tuple[str, ...]:
        return tuple(self._surfaces.get(tuple(surface), ()))

    def longest_at(self, tokens: Tokens, start: int) -> Optional[tuple[int, tuple[str, ...]]]:
        """Longest surface starting at ``start``: (end, sorted entity ids) or None."""
        node = self._root
        best = None
        for i in range(start, len(tokens)):
            node = node.get(tokens[i])
            if node is None:
                break
            ids = node.get(self._END)
            if ids:
                best = (i + 1, ids)
        return best

    def all_matches(self, tokens: Tokens) -> list[tuple[int, int, tuple[str, ...]]]:
        """Every (start, end, ids) occurrence of any surface, overlapping ones included."""
        out = []
        for start in range(len(tokens)):
            node = self._root
            for i in range(start, len(tokens)):
                node = node.get(tokens[i])
                if node is None:
                    break
                ids = node.get(self._END)
                if ids:
                    out.append((start, i + 1, ids))
        return out


@dataclass(frozen=True)
class KnowledgeBase:
    taxonomy: ConceptTaxonomy
    lexicon: EntityLexicon
    index: MentionIndex

    @classmethod
    def from_parts(cls, taxonomy: ConceptTaxonomy, lexicon: EntityLexicon) -> "KnowledgeBase":
        for e in lexicon:
            if e.refined_concept not in taxonomy.concepts:
                raise KnowledgeBaseError(
                    f"entity {e.entity_id!r} references unknown concept {e.refined_concept!r}")
        return cls(taxonomy, lexicon, MentionIndex(lexicon))

    def coarse_concept_of(self, concept: str) -> Optional[str]:
        return self.taxonomy.coarse_concept_of(concept)

    def aliases_of(self, entity_id: str) -> list[Tokens]:
        return self.lexicon.aliases_of(entity_id)

    def core_concept_of_entity(self, entity_id: str) -> Optional[str]:
        return self.taxonomy.coarse_concept_of(self.lexicon.get(entity_id).refined_concept)


def coarse_concept_of(concept: str, taxonomy: ConceptTaxonomy) -> Optional[str]:
    return taxonomy.coarse_concept_of(concept)


def _data_lines(path: Path) -> Iterator[tuple[int, str]]:
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            yield lineno, line


def read_taxonomy(path: str | Path) -> ConceptTaxonomy:
    path = Path(path)
    concepts: set[str] = set()
    edges: dict[str, set[str]] = {}
    core_flag: dict[str, bool] = {}
    for lineno, line in _data_lines(path):
        cols = line.split("\t")
        if len(cols) != 3:
            raise KnowledgeBaseError(f"{path}:{lineno}: expected 3 tab-separated columns, got {len(cols)}")
        concept, parent, flag = (c.strip() for c in cols)
        if not concept:
            raise KnowledgeBaseError(f"{path}:{lineno}: empty concept id")
        if flag not in ("0", "1"):
            raise KnowledgeBaseError(f"{path}:{lineno}: core flag must be 0 or 1, got {flag!r}")
        is_core = flag == "1"
        if concept in core_flag and core_flag[concept] != is_core:
            raise KnowledgeBaseError(f"{path}:{lineno}: conflicting core flag for {concept!r}")
        core_flag[concept] = is_core
        concepts.add(concept)
        if parent and parent != "-":
            edges.setdefault(concept, set()).add(parent)
    # parents only mentioned as parents are still concepts, but must be declared
    for child, parents in edges.items():
        for p in parents:
            if p not in concepts:
                raise KnowledgeBaseError(f"{path}: dangling parent concept {p!r} (child {child!r})")
    return ConceptTaxonomy.build(concepts, edges, [c for c, f in core_flag.items() if f])


def read_entities(path: str | Path) -> EntityLexicon:
    path = Path(path)
    entities = []
    seen = set()
    for lineno, line in _data_lines(path):
        cols = line.split("\t")
        if len(cols) == 3:
            cols.append("")
        if len(cols) != 4:
            raise KnowledgeBaseError(f"{path}:{lineno}: expected 4 tab-separated columns, got {len(cols)}")
        eid, surface, concept, alias_field = (c.strip() for c in cols)
        canonical = tokenize(surface)
        if not eid or not canonical or not concept:
            raise KnowledgeBaseError(f"{path}:{lineno}: empty entity id, surface or concept")
        if eid in seen:
            raise KnowledgeBaseError(f"{path}:{lineno}: duplicate entity id {eid!r}")
        seen.add(eid)
        aliases: list[Tokens] = []
        for a in alias_field.split("|"):
            toks = tokenize(a)
            if toks and toks != canonical and toks not in aliases:
                aliases.append(toks)
        entities.append(Entity(eid, canonical, concept, tuple(aliases)))
    return EntityLexicon(entities)


def load_knowledge_base(taxonomy_file: str | Path, entities_file: str | Path) -> KnowledgeBase:
    taxonomy = read_taxonomy(taxonomy_file)
    lexicon = read_entities(entities_file)
    for e in lexicon:
        if e.refined_concept not in taxonomy.concepts:
            raise KnowledgeBaseError(
                f"{entities_file}: entity {e.entity_id!r} references unknown concept {e.refined_concept!r}")
    return KnowledgeBase.from_parts(taxonomy, lexicon)


def load_kb_dir(kb_dir: str | Path) -> KnowledgeBase:
    kb_dir = Path(kb_dir)
    return load_knowledge_base(kb_dir / "taxonomy.tsv", kb_dir / "entities.tsv")


def write_taxonomy(taxonomy: ConceptTaxonomy, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# concept_id\tparent\tcore\n")
        for c in sorted(taxonomy.concepts):
            flag = "1" if c in taxonomy.core_concepts else "0"
            parents = taxonomy.parents(c) or ("-",)
            for p in parents:
                fh.write(f"{c}\t{p}\t{flag}\n")


def write_entities(lexicon: EntityLexicon, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for e in lexicon:
            aliases = "|".join(" ".join(a) for a in e.aliases)
            fh.write(f"{e.entity_id}\t{' '.join(e.canonical_surface)}\t{e.refined_concept}\t{aliases}\n")


def save_kb_dir(kb: KnowledgeBase, kb_dir: str | Path) -> None:
    kb_dir = Path(kb_dir)
    kb_dir.mkdir(parents=True, exist_ok=True)
    write_taxonomy(kb.taxonomy, kb_dir / "taxonomy.tsv")
    write_entities(kb.lexicon, kb_dir / "entities.tsv")
