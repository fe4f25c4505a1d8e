"""Lexical alignment (IBM Model 1 EM), symmetrisation and phrase extraction."""

from __future__ import annotations

from collections import defaultdict
from typing import Sequence

NULL = "<null>"

Alignment = set[tuple[int, int]]


def train_ibm1(bitext: Sequence[tuple[Sequence[str], Sequence[str]]],
               iterations: int = 5) -> dict[tuple[str, str], float]:
    """Estimate t(target | source) with EM; a NULL source word is prepended.

    With zero iterations the table stays uniform, represented as an empty
    dict that :func:`viterbi_align` reads through its default.
    """
    t: dict[tuple[str, str], float] = {}
    tgt_vocab = {w for _, tgt in bitext for w in tgt}
    uniform = 1.0 / max(1, len(tgt_vocab))
    for _ in range(iterations):
        count: dict[tuple[str, str], float] = defaultdict(float)
        total: dict[str, float] = defaultdict(float)
        for src, tgt in bitext:
            src_n = (NULL, *src)
            for w in tgt:
                probs = [t.get((w, s), uniform) for s in src_n]
                z = sum(probs)
                for s, p in zip(src_n, probs):
                    c = p / z
                    count[(w, s)] += c
                    total[s] += c
        t = {(w, s): c / total[s] for (w, s), c in count.items()}
    return t


def viterbi_align(src: Sequence[str], tgt: Sequence[str],
                  t: dict[tuple[str, str], float], default: float) -> Alignment:
    """Best source position for every target word, as (src_idx, tgt_idx) points.

    Ties go to the source position nearest the diagonal; NULL loses ties.
    """
    points = set()
    n, m = len(src), len(tgt)
    for j, w in enumerate(tgt):
        diag = (j + 0.5) * n / m - 0.5
        best_key = (t.get((w, NULL), default), float("-inf"))
        best = -1
        for i, s in enumerate(src):
            key = (t.get((w, s), default), -abs(i - diag))
            if key > best_key:
                best_key, best = key, i
        if best >= 0:
            points.add((best, j))
    return points


_NEIGHBOURS = ((-1, 0), (0, -1), (1, 0), (0, 1), (-1, -1), (-1, 1), (1, -1), (1, 1))


def grow_diag(forward: Alignment, reverse: Alignment) -> Alignment:
    """Intersection of both directions grown into the union along neighbours."""
    alignment = set(forward & reverse)
    union = forward | reverse
    src_aligned = {i for i, _ in alignment}
    tgt_aligned = {j for _, j in alignment}
    added = True
    while added:
        added = False
        for i, j in sorted(alignment):
            for di, dj in _NEIGHBOURS:
                p = (i + di, j + dj)
                if p in union and p not in alignment and (
                        p[0] not in src_aligned or p[1] not in tgt_aligned):
                    alignment.add(p)
                    src_aligned.add(p[0])
                    tgt_aligned.add(p[1])
                    added = True
    return alignment


def extract_phrases(src: Sequence[str], tgt: Sequence[str], alignment: Alignment,
                    max_len: int) -> list[tuple[tuple[str, ...], tuple[str, ...]]]:
    """Alignment-consistent phrase pairs, extended over unaligned target words."""
    n, m = len(src), len(tgt)
    tgt_aligned = {j for _, j in alignment}
    by_src: dict[int, list[int]] = defaultdict(list)
    for i, j in alignment:
        by_src[i].append(j)
    out = []
    for s1 in range(n):
        for s2 in range(s1, min(n, s1 + max_len)):
            tpos = [j for i in range(s1, s2 + 1) for j in by_src.get(i, ())]
            if not tpos:
                continue
            t1, t2 = min(tpos), max(tpos)
            if t2 - t1 + 1 > max_len:
                continue
            if any(t1 <= j <= t2 and not s1 <= i <= s2 for i, j in alignment):
                continue
            ts = t1
            while True:
                te = t2
                while True:
                    out.append((tuple(src[s1:s2 + 1]), tuple(tgt[ts:te + 1])))
                    te += 1
                    if te >= m or te in tgt_aligned or te - ts + 1 > max_len:
                        break
                ts -= 1
                if ts < 0 or ts in tgt_aligned or t2 - ts + 1 > max_len:
                    break
    return out
