"""Monotone stack decoding, optionally constrained to a pattern trie."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

from ..trie import PatternTrie, TrieNode
from .lm import BOS, lm_logprob
from .model import Phrase, PhraseEntry, TranslationModel

DEFAULT_BEAM = 50
DEFAULT_STACK_SIZE = 100
TTABLE_LIMIT = 20


@dataclass(frozen=True)
class Step:
    """One phrase application: source span [start, end) rendered as ``entry``."""
    start: int
    end: int
    entry: PhraseEntry
    passthrough: bool = False


@dataclass(frozen=True)
class Candidate:
    tokens: Phrase
    score: float
    derivation: tuple[Step, ...]

    @property
    def text(self) -> str:
        return " ".join(self.tokens)


class _Hyp:
    __slots__ = ("score", "target", "node", "prev", "step")

    def __init__(self, score, target, node, prev, step):
        self.score = score
        self.target = target
        self.node = node
        self.prev = prev
        self.step = step

    def derivation(self) -> tuple[Step, ...]:
        steps = []
        h = self
        while h.step is not None:
            steps.append(h.step)
            h = h.prev
        return tuple(reversed(steps))


def translation_options(model: TranslationModel, source: Sequence[str],
                        ttable_limit: int = TTABLE_LIMIT) -> dict[tuple[int, int], list[Step]]:
    """All phrase applications for every span of ``source``.

    A token with no single-token entry in the phrase table is passed through
    unchanged with unit translation probabilities.
    """
    n = len(source)
    opts: dict[tuple[int, int], list[Step]] = {}
    for i in range(n):
        for j in range(i + 1, min(n, i + model.max_phrase_len) + 1):
            entries = model.options(tuple(source[i:j]))[:ttable_limit]
            if entries:
                opts[(i, j)] = [Step(i, j, e) for e in entries]
        if (i, i + 1) not in opts:
            opts[(i, i + 1)] = [Step(i, i + 1, PhraseEntry((source[i],), 1.0, 1.0), True)]
    return opts


def step_score(model: TranslationModel, step: Step) -> float:
    w = model.weights
    e = step.entry
    return (w.tm_fwd * math.log(e.p_fwd) + w.tm_rev * math.log(e.p_rev)
            + w.word_penalty * len(e.target))


def score_derivation(model: TranslationModel, derivation: Sequence[Step]) -> float:
    """Re-score a derivation from scratch: phrase features plus whole-sentence LM."""
    target = tuple(tok for s in derivation for tok in s.entry.target)
    return (sum(step_score(model, s) for s in derivation)
            + model.weights.lm * lm_logprob(model.lm, target))


def decode(model: TranslationModel, source: Sequence[str], beam: int = DEFAULT_BEAM,
           stack_size: int = DEFAULT_STACK_SIZE, trie: Optional[PatternTrie] = None,
           ttable_limit: int = TTABLE_LIMIT) -> list[Candidate]:
    """Translate ``source`` monotonically; return at most ``beam`` ranked candidates.

    Stack ``i`` holds hypotheses covering the first ``i`` source tokens and is
    pruned to ``stack_size`` entries. Hypotheses with the same target string
    are recombined, keeping the best derivation. With ``trie`` set every
    emitted token must extend a trie path and complete hypotheses must end on
    a trie end marker. Ties rank by target tokens.
    """
    if beam < 1:
        raise ValueError("beam must be >= 1")
    if stack_size < 1:
        raise ValueError("stack_size must be >= 1")
    source = tuple(source)
    n = len(source)
    opts = translation_options(model, source, ttable_limit)
    lm = model.lm
    w_lm = model.weights.lm
    tm_cost = {id(s): step_score(model, s) for steps in opts.values() for s in steps}

    root: Optional[TrieNode] = trie.root if trie is not None else None
    stacks: list[dict[Phrase, _Hyp]] = [dict() for _ in range(n + 1)]
    if n == 0:
        if root is not None and not root.is_end:
            return []
        return [Candidate((), w_lm * lm_logprob(lm, ()), ())]
    stacks[0][()] = _Hyp(0.0, (), root, None, None)

    for i in range(n):
        stack = stacks[i]
        if not stack:
            continue
        hyps = sorted(stack.values(), key=lambda h: (-h.score, h.target))[:stack_size]
        for h in hyps:
            context = (BOS, *h.target)
            for j in range(i + 1, min(n, i + model.max_phrase_len) + 1):
                steps = opts.get((i, j))
                if not steps:
                    continue
                final = j == n
                target_stack = stacks[j]
                for step in steps:
                    phrase = step.entry.target
                    node = h.node
                    if node is not None:
                        for tok in phrase:
                            node = node.children.get(tok)
                            if node is None:
                                break
                        if node is None or (final and not node.is_end):
                            continue
                    new_target = h.target + phrase
                    score = (h.score + tm_cost[id(step)]
                             + w_lm * lm.score_continuation(context, phrase, final))
                    old = target_stack.get(new_target)
                    if old is None or score > old.score:
                        target_stack[new_target] = _Hyp(score, new_target, node, h, step)

    done = sorted(stacks[n].values(), key=lambda h: (-h.score, h.target))[:beam]
    return [Candidate(h.target, h.score, h.derivation()) for h in done]


def decode_constrained(model: TranslationModel, source: Sequence[str], trie: PatternTrie,
                       beam: int = DEFAULT_BEAM, stack_size: int = DEFAULT_STACK_SIZE,
                       ttable_limit: int = TTABLE_LIMIT) -> list[Candidate]:
    return decode(model, source, beam, stack_size, trie, ttable_limit)
