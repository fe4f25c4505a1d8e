from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from ..knowledge_base import Tokens, tokenize

MATCH_TYPES = ("exact", "phrase", "broad")


@dataclass(frozen=True)
class LabeledPair:
    query: Tokens
    keyword: Tokens
    label: int
    match_type: str = "exact"
    origin: str = "original"

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label!r}")
        if self.match_type not in MATCH_TYPES:
            raise ValueError(f"unknown match type {self.match_type!r}")
        if self.origin not in ("original", "augmented"):
            raise ValueError(f"unknown origin {self.origin!r}")


def read_labeled_pairs(path: str | Path) -> list[LabeledPair]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            cols = line.split("\t")
            if len(cols) not in (3, 4):
                raise ValueError(f"{path}:{lineno}: expected query<TAB>keyword<TAB>label[<TAB>match_type]")
            try:
                out.append(LabeledPair(tokenize(cols[0]), tokenize(cols[1]), int(cols[2]),
                                       cols[3].strip() if len(cols) == 4 else "exact"))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    return out


def write_labeled_pairs(pairs: Iterable[LabeledPair], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for p in pairs:
            fh.write(f"{' '.join(p.query)}\t{' '.join(p.keyword)}\t{p.label}\t{p.match_type}\n")
