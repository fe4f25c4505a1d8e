"""Phrase-based pattern-to-pattern translation model."""

from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence, Union

from ..pattern_corpus import PatternPair
from .alignment import extract_phrases, grow_diag, train_ibm1, viterbi_align
from .lm import NgramLM

logger = logging.getLogger(__name__)

Phrase = tuple[str, ...]


@dataclass(frozen=True)
class Weights:
    tm_fwd: float = 1.0
    tm_rev: float = 1.0
    lm: float = 1.0
    word_penalty: float = -0.3


@dataclass(frozen=True)
class PhraseEntry:
    target: Phrase
    p_fwd: float
    p_rev: float


@dataclass(frozen=True)
class TrainConfig:
    ngram: int = 3
    max_phrase_len: int = 4
    em_iterations: int = 5


@dataclass
class TranslationModel:
    phrase_table: dict[Phrase, list[PhraseEntry]]
    lm: NgramLM
    weights: Weights = field(default_factory=Weights)
    max_phrase_len: int = 4

    def options(self, source: Phrase) -> list[PhraseEntry]:
        return self.phrase_table.get(source, [])

    def with_weights(self, weights: Weights) -> "TranslationModel":
        return TranslationModel(self.phrase_table, self.lm, weights, self.max_phrase_len)

    def save(self, out_dir: str | Path) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_phrase_table(self.phrase_table, out / "phrase-table.tsv")
        self.lm.save(out / "lm.tsv")
        with open(out / "config.json", "w", encoding="utf-8") as fh:
            json.dump({"weights": asdict(self.weights), "max_phrase_len": self.max_phrase_len,
                       "ngram": self.lm.order}, fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, model_dir: str | Path) -> "TranslationModel":
        d = Path(model_dir)
        with open(d / "config.json", encoding="utf-8") as fh:
            cfg = json.load(fh)
        return cls(read_phrase_table(d / "phrase-table.tsv"), NgramLM.load(d / "lm.tsv"),
                   Weights(**cfg.get("weights", {})), int(cfg.get("max_phrase_len", 4)))


class EmptyCorpusError(ValueError):
    pass


Bitext = Sequence[tuple[Sequence[str], Sequence[str]]]


def _as_bitext(corpus: Iterable[Union[PatternPair, tuple]]) -> list[tuple[Phrase, Phrase]]:
    out = []
    for item in corpus:
        if isinstance(item, PatternPair):
            out.append((item.source_pattern.tokens, item.target_pattern.tokens))
        else:
            src, tgt = item
            out.append((tuple(src), tuple(tgt)))
    return out


def train_model(corpus: Iterable[Union[PatternPair, tuple]], config: TrainConfig = TrainConfig(),
                weights: Weights = Weights()) -> TranslationModel:
    """Align both directions, symmetrise, extract phrases and fit the target LM.

    ``corpus`` holds PatternPairs, or plain (source tokens, target tokens)
    pairs for a model over raw sentences.
    """
    bitext = _as_bitext(corpus)
    if not bitext:
        raise EmptyCorpusError("cannot train a translation model on an empty corpus")
    fwd_t = train_ibm1(bitext, config.em_iterations)
    rev_t = train_ibm1([(t, s) for s, t in bitext], config.em_iterations)
    fwd_default = 0.0 if fwd_t else 1.0
    rev_default = 0.0 if rev_t else 1.0

    pair_counts: Counter = Counter()
    for src, tgt in bitext:
        a_fwd = viterbi_align(src, tgt, fwd_t, fwd_default)
        a_rev = {(i, j) for j, i in viterbi_align(tgt, src, rev_t, rev_default)}
        alignment = grow_diag(a_fwd, a_rev)
        pair_counts.update(extract_phrases(src, tgt, alignment, config.max_phrase_len))

    src_counts: Counter = Counter()
    tgt_counts: Counter = Counter()
    for (s, t), c in pair_counts.items():
        src_counts[s] += c
        tgt_counts[t] += c
    table: dict[Phrase, list[PhraseEntry]] = {}
    for (s, t), c in pair_counts.items():
        table.setdefault(s, []).append(PhraseEntry(t, c / src_counts[s], c / tgt_counts[t]))
    for entries in table.values():
        entries.sort(key=lambda e: (-e.p_fwd, -e.p_rev, e.target))
    lm = NgramLM.train((tgt for _, tgt in bitext), order=config.ngram)
    logger.info("trained translation model: %d source phrases, %d phrase pairs",
                len(table), len(pair_counts))
    return TranslationModel(table, lm, weights, config.max_phrase_len)


def write_phrase_table(table: dict[Phrase, list[PhraseEntry]], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for src in sorted(table):
            for e in table[src]:
                fh.write(f"{' '.join(src)}\t{' '.join(e.target)}\t{e.p_fwd!r}\t{e.p_rev!r}\n")


def read_phrase_table(path: str | Path) -> dict[Phrase, list[PhraseEntry]]:
    table: dict[Phrase, list[PhraseEntry]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            cols = line.split("\t")
            if len(cols) != 4:
                raise ValueError(f"{path}:{lineno}: expected 4 tab-separated columns")
            p_fwd, p_rev = float(cols[2]), float(cols[3])
            if not (0.0 < p_fwd <= 1.0 and 0.0 < p_rev <= 1.0):
                raise ValueError(f"{path}:{lineno}: probabilities must lie in (0, 1]")
            table.setdefault(tuple(cols[0].split()), []).append(
                PhraseEntry(tuple(cols[1].split()), p_fwd, p_rev))
    for entries in table.values():
        entries.sort(key=lambda e: (-e.p_fwd, -e.p_rev, e.target))
    return table
