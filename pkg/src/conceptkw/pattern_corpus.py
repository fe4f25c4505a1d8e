"""Parallel pattern corpus construction with strict slot alignment cleaning."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .conceptualizer import Pattern, conceptualize, format_slot_values, parse_slot_values
from .knowledge_base import KnowledgeBase, Tokens, tokenize

SLOT_COUNT_MISMATCH = "slot-count-mismatch"
ENTITY_MISMATCH = "entity-mismatch"


@dataclass(frozen=True)
class ParaphrasePair:
    source_tokens: Tokens
    target_tokens: Tokens

    def __post_init__(self):
        if not self.source_tokens or not self.target_tokens:
            raise ValueError("paraphrase sides must be non-empty")


@dataclass(frozen=True)
class PatternPair:
    source_pattern: Pattern
    target_pattern: Pattern


@dataclass
class CorpusDiagnostics:
    total: int = 0
    kept: int = 0
    rejected: Counter = field(default_factory=Counter)


def strict_alignment_filter(pair: PatternPair) -> Optional[str]:
    """Return None to keep the pair, or the rejection reason.

    Both sides must carry the same multiset of (core concept, entity id) slot
    values; slot order is irrelevant.
    """
    src, tgt = pair.source_pattern.slot_values, pair.target_pattern.slot_values
    if len(src) != len(tgt):
        return SLOT_COUNT_MISMATCH
    if pair.source_pattern.value_multiset() != pair.target_pattern.value_multiset():
        return ENTITY_MISMATCH
    return None


def build_parallel_patterns(pairs: Iterable[ParaphrasePair], kb: KnowledgeBase,
                            diagnostics: Optional[CorpusDiagnostics] = None) -> list[PatternPair]:
    diag = diagnostics if diagnostics is not None else CorpusDiagnostics()
    kept = []
    for p in pairs:
        diag.total += 1
        cand = PatternPair(conceptualize(p.source_tokens, kb), conceptualize(p.target_tokens, kb))
        reason = strict_alignment_filter(cand)
        if reason is None:
            kept.append(cand)
            diag.kept += 1
        else:
            diag.rejected[reason] += 1
    return kept


def read_paraphrases(path: str | Path) -> list[ParaphrasePair]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            cols = line.split("\t")
            if len(cols) < 2:
                raise ValueError(f"{path}:{lineno}: expected source<TAB>target")
            src, tgt = tokenize(cols[0]), tokenize(cols[1])
            if not src or not tgt:
                raise ValueError(f"{path}:{lineno}: empty side")
            out.append(ParaphrasePair(src, tgt))
    return out


def write_paraphrases(pairs: Sequence[ParaphrasePair], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for p in pairs:
            fh.write(f"{' '.join(p.source_tokens)}\t{' '.join(p.target_tokens)}\n")


def write_pattern_pairs(pairs: Sequence[PatternPair], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for p in pairs:
            fh.write(f"{p.source_pattern.text}\t{p.target_pattern.text}\t"
                     f"{format_slot_values(p.source_pattern.slot_values)}\n")


def read_pattern_pairs(path: str | Path) -> list[PatternPair]:
    """Read ``source <TAB> target <TAB> slot_values``.

    The slot values column holds the source side's values; the target side is
    given the same values re-ordered to its own slot order, which is valid
    because retained pairs have equal value multisets.
    """
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            cols = line.split("\t")
            if len(cols) < 2:
                raise ValueError(f"{path}:{lineno}: expected source<TAB>target[<TAB>slot_values]")
            values = parse_slot_values(cols[2]) if len(cols) > 2 else ()
            src = Pattern.from_tokens(cols[0].split())
            tgt = Pattern.from_tokens(cols[1].split())
            if values:
                src = Pattern(src.segments, values)
                tgt = Pattern(tgt.segments, _reorder(values, tgt))
            out.append(PatternPair(src, tgt))
    return out


def _reorder(values, pattern: Pattern):
    pool = list(values)
    ordered = []
    for slot in pattern.slots:
        for i, v in enumerate(pool):
            if v.concept == slot.concept:
                ordered.append(pool.pop(i))
                break
        else:
            return ()
    return tuple(ordered)
