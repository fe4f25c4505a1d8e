"""Concept tagging, pattern abstraction and pattern instantiation."""

from __future__ import annotations

import itertools
import logging
import re
from dataclasses import dataclass
from typing import Optional, Sequence, Union

from .knowledge_base import KnowledgeBase, Tokens

logger = logging.getLogger(__name__)

MAX_INSTANTIATIONS = 64

_SLOT_RE = re.compile(r"^\[(.+)\]$")


class MissingBindingError(ValueError):
    pass


@dataclass(frozen=True)
class Literal:
    token: str


@dataclass(frozen=True)
class Slot:
    concept: str
    occurrence: int

    @property
    def token(self) -> str:
        return slot_token(self.concept)


Segment = Union[Literal, Slot]


@dataclass(frozen=True)
class SlotValue:
    concept: str
    entity_id: str
    surface: Tokens


@dataclass(frozen=True)
class Mention:
    start: int
    end: int
    entity_id: str
    refined_concept: str
    core_concept: Optional[str]

    @property
    def span(self) -> tuple[int, int]:
        return (self.start, self.end)


def slot_token(concept: str) -> str:
    return f"[{concept}]"


def slot_concept(token: str) -> Optional[str]:
    m = _SLOT_RE.match(token)
    return m.group(1) if m else None


@dataclass(frozen=True)
class Pattern:
    segments: tuple[Segment, ...]
    slot_values: tuple[SlotValue, ...] = ()

    @property
    def tokens(self) -> Tokens:
        return tuple(s.token for s in self.segments)

    @property
    def text(self) -> str:
        return " ".join(self.tokens)

    @property
    def slots(self) -> list[Slot]:
        return [s for s in self.segments if isinstance(s, Slot)]

    def slot_concepts(self) -> list[str]:
        return [s.concept for s in self.slots]

    def value_multiset(self) -> list[tuple[str, str]]:
        return sorted((v.concept, v.entity_id) for v in self.slot_values)

    def __str__(self) -> str:
        return self.text

    @classmethod
    def from_tokens(cls, tokens: Sequence[str], slot_values: Sequence[SlotValue] = ()) -> "Pattern":
        """Parse rendered pattern tokens; ``[concept]`` tokens become slots."""
        seen: dict[str, int] = {}
        segs: list[Segment] = []
        for tok in tokens:
            c = slot_concept(tok)
            if c is None:
                segs.append(Literal(tok))
            else:
                seen[c] = seen.get(c, 0) + 1
                segs.append(Slot(c, seen[c]))
        pat = cls(tuple(segs), tuple(slot_values))
        if slot_values and len(slot_values) != len(pat.slots):
            raise ValueError("slot_values must align 1:1 with slots")
        return pat

    @classmethod
    def parse(cls, text: str) -> "Pattern":
        return cls.from_tokens(text.split())


def tag_sentence(tokens: Sequence[str], kb: KnowledgeBase,
                 diagnostics: Optional[list[str]] = None) -> list[Mention]:
    """Leftmost-longest gazetteer tagging.

    Among equally long matches at the same start the smallest entity id wins.
    Surfaces shared by entities of different core concepts are reported in
    ``diagnostics`` when a list is supplied.
    """
    tokens = tuple(tokens)
    mentions = []
    i = 0
    while i < len(tokens):
        hit = kb.index.longest_at(tokens, i)
        if hit is None:
            i += 1
            continue
        end, ids = hit
        eid = ids[0]
        if diagnostics is not None and len(ids) > 1:
            cores = {kb.core_concept_of_entity(x) for x in ids}
            if len(cores) > 1:
                diagnostics.append(
                    f"ambiguous surface {' '.join(tokens[i:end])!r}: entities {list(ids)} "
                    f"span core concepts {sorted(map(str, cores))}; chose {eid}")
        ent = kb.lexicon.get(eid)
        mentions.append(Mention(i, end, eid, ent.refined_concept,
                                kb.coarse_concept_of(ent.refined_concept)))
        i = end
    return mentions


def conceptualize(tokens: Sequence[str], kb: KnowledgeBase,
                  diagnostics: Optional[list[str]] = None) -> Pattern:
    tokens = tuple(tokens)
    mentions = tag_sentence(tokens, kb, diagnostics)
    segs: list[Segment] = []
    values: list[SlotValue] = []
    counts: dict[str, int] = {}
    pos = 0
    for m in mentions:
        segs.extend(Literal(t) for t in tokens[pos:m.start])
        if m.core_concept is None:
            # non-core concepts stay as plain text
            segs.extend(Literal(t) for t in tokens[m.start:m.end])
        else:
            counts[m.core_concept] = counts.get(m.core_concept, 0) + 1
            segs.append(Slot(m.core_concept, counts[m.core_concept]))
            values.append(SlotValue(m.core_concept, m.entity_id, tokens[m.start:m.end]))
        pos = m.end
    segs.extend(Literal(t) for t in tokens[pos:])
    return Pattern(tuple(segs), tuple(values))


def render(pattern: Pattern, surfaces: Sequence[Tokens]) -> Tokens:
    """Substitute one surface per slot, left to right."""
    out: list[str] = []
    it = iter(surfaces)
    for seg in pattern.segments:
        if isinstance(seg, Slot):
            out.extend(next(it))
        else:
            out.append(seg.token)
    return tuple(out)


def instantiate(pattern: Pattern, bindings: Sequence[Sequence[Tokens]],
                cap: int = MAX_INSTANTIATIONS) -> list[Tokens]:
    """Cartesian product of per-slot surfaces, leftmost slot varying slowest.

    ``bindings[k]`` lists the candidate surfaces of the k-th slot (left to
    right). Duplicate sentences are dropped and at most ``cap`` are returned.
    """
    slots = pattern.slots
    if len(bindings) < len(slots):
        raise MissingBindingError(f"pattern {pattern.text!r} has {len(slots)} slots, "
                                  f"got {len(bindings)} bindings")
    for k, (slot, cands) in enumerate(zip(slots, bindings)):
        if not cands:
            raise MissingBindingError(f"no surface bound to slot {k} ({slot.token})")
    out: list[Tokens] = []
    seen = set()
    for combo in itertools.product(*[list(b) for b in bindings[:len(slots)]]):
        sent = render(pattern, combo)
        if sent in seen:
            continue
        seen.add(sent)
        out.append(sent)
        if len(out) >= cap:
            break
    return out


def bindings_by_concept(pattern: Pattern,
                        per_concept: dict[str, list[list[Tokens]]]) -> Optional[list[list[Tokens]]]:
    """Bind the k-th slot of concept c to ``per_concept[c][k-1]``.

    Returns None when the pattern asks for a concept occurrence that has no
    binding.
    """
    out = []
    for slot in pattern.slots:
        lists = per_concept.get(slot.concept, [])
        if slot.occurrence > len(lists):
            return None
        out.append(lists[slot.occurrence - 1])
    return out


def format_slot_values(values: Sequence[SlotValue]) -> str:
    return ";".join(f"{v.concept}:{v.entity_id}:{' '.join(v.surface)}" for v in values)


def parse_slot_values(text: str) -> tuple[SlotValue, ...]:
    if not text.strip():
        return ()
    out = []
    for item in text.split(";"):
        concept, eid, surface = item.split(":", 2)
        out.append(SlotValue(concept, eid, tuple(surface.split())))
    return tuple(out)
