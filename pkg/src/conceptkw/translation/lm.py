"""Stupid-backoff n-gram language model over pattern tokens."""

from __future__ import annotations

import math
from collections import Counter
from pathlib import Path
from typing import Iterable, Sequence

BOS = "<s>"
EOS = "</s>"
BACKOFF = 0.4
UNK_LOGPROB = -10.0


class NgramLM:
    """Relative-frequency n-gram scores with stupid backoff.

    ``logprobs`` maps each observed n-gram (order 1..n) to
    log(count(ngram) / count(history)); unigrams are normalised by the total
    token count, ``</s>`` included and ``<s>`` excluded.
    """

    def __init__(self, order: int, logprobs: dict[tuple[str, ...], float],
                 backoff: float = BACKOFF, unk_logprob: float = UNK_LOGPROB):
        if order < 1:
            raise ValueError("order must be >= 1")
        self.order = order
        self.logprobs = logprobs
        self.backoff = backoff
        self.unk_logprob = unk_logprob
        self._log_backoff = math.log(backoff)
        self._cache: dict[tuple[tuple[str, ...], str], float] = {}

    @classmethod
    def train(cls, sentences: Iterable[Sequence[str]], order: int = 3,
              backoff: float = BACKOFF, unk_logprob: float = UNK_LOGPROB) -> "NgramLM":
        counts: Counter = Counter()
        for sent in sentences:
            padded = (BOS, *sent, EOS)
            for k in range(1, order + 1):
                for i in range(len(padded) - k + 1):
                    counts[padded[i:i + k]] += 1
        total = sum(c for g, c in counts.items() if len(g) == 1 and g[0] != BOS)
        logprobs = {}
        for gram, c in counts.items():
            if len(gram) == 1:
                if gram[0] == BOS:
                    continue
                logprobs[gram] = math.log(c / total)
            elif gram[-1] != BOS:
                logprobs[gram] = math.log(c / counts[gram[:-1]])
        return cls(order, logprobs, backoff, unk_logprob)

    def vocab(self) -> set[str]:
        return {g[0] for g in self.logprobs if len(g) == 1}

    def word_logprob(self, history: Sequence[str], word: str) -> float:
        """Score ``word`` after ``history`` (only the last order-1 tokens matter)."""
        hist = tuple(history[-(self.order - 1):]) if self.order > 1 else ()
        key = (hist, word)
        cached = self._cache.get(key)
        if cached is not None:
            return cached
        penalty = 0.0
        result = None
        for k in range(len(hist), -1, -1):
            gram = (*hist[len(hist) - k:], word)
            lp = self.logprobs.get(gram)
            if lp is not None:
                result = penalty + lp
                break
            penalty += self._log_backoff
        if result is None:
            result = self.unk_logprob
        self._cache[key] = result
        return result

    def score_continuation(self, context: Sequence[str], words: Sequence[str],
                           final: bool = False) -> float:
        """Log-score of ``words`` following ``context`` (which starts with ``<s>``)."""
        hist = list(context[-(self.order - 1):]) if self.order > 1 else []
        total = 0.0
        for w in words:
            total += self.word_logprob(hist, w)
            if self.order > 1:
                hist.append(w)
                if len(hist) > self.order - 1:
                    del hist[0]
        if final:
            total += self.word_logprob(hist, EOS)
        return total

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"# n={self.order} backoff={self.backoff!r} unk_logprob={self.unk_logprob!r}\n")
            for gram in sorted(self.logprobs, key=lambda g: (len(g), g)):
                fh.write(f"{' '.join(gram)}\t{self.logprobs[gram]!r}\n")

    @classmethod
    def load(cls, path: str | Path) -> "NgramLM":
        order, backoff, unk = 3, BACKOFF, UNK_LOGPROB
        logprobs = {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.rstrip("\n")
                if line.startswith("#"):
                    for item in line[1:].split():
                        key, _, val = item.partition("=")
                        if key == "n":
                            order = int(val)
                        elif key == "backoff":
                            backoff = float(val)
                        elif key == "unk_logprob":
                            unk = float(val)
                    continue
                if not line:
                    continue
                gram, lp = line.split("\t")
                logprobs[tuple(gram.split(" "))] = float(lp)
        return cls(order, logprobs, backoff, unk)


def lm_logprob(lm: NgramLM, tokens: Sequence[str]) -> float:
    """Sentence log-probability including the end-of-sentence transition."""
    return lm.score_continuation((BOS,), tuple(tokens), final=True)
