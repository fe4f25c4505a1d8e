"""Long-tail evaluation: frequency buckets, generation accuracy, AUC and recall@precision."""

from __future__ import annotations

import bisect
import json
import logging
import time
from collections import Counter
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Optional, Sequence

from .conceptualizer import MissingBindingError, Pattern, conceptualize, instantiate, tag_sentence
from .discriminator.augment import AugmentationConfig, augment_dataset
from .discriminator.classifier import TrainHyper, UnattainablePrecision, threshold_at_precision, train_classifier
from .knowledge_base import KnowledgeBase, Tokens
from .pattern_corpus import CorpusDiagnostics, ParaphrasePair, build_parallel_patterns
from .repository import build_repository
from .translation.decoder import decode, decode_constrained
from .translation.model import TrainConfig, TranslationModel, train_model
from .world import Oracle, World, WorldConfig

logger = logging.getLogger(__name__)

BUCKETS = (1, 2, 3, 4)
BUCKET_LABELS = {1: "1-10", 2: "10-100", 3: "100-1000", 4: "1000+"}
SWEEP_PROPORTIONS = (0.08, 0.10, 0.12, 0.16)


class SingleClassError(ValueError):
    pass


def bucket_of(freq: int) -> Optional[int]:
    """1: 1<=f<=10, 2: 10<f<=100, 3: 100<f<=1000, 4: f>1000; None for f == 0."""
    if freq < 1:
        return None
    if freq <= 10:
        return 1
    if freq <= 100:
        return 2
    if freq <= 1000:
        return 3
    return 4


@dataclass
class FrequencyBuckets:
    buckets: dict[int, list[Tokens]] = field(default_factory=lambda: {b: [] for b in BUCKETS})
    entity: dict[Tokens, str] = field(default_factory=dict)
    frequency: dict[Tokens, int] = field(default_factory=dict)
    excluded: list[tuple[Tokens, str]] = field(default_factory=list)

    def sizes(self) -> dict[int, int]:
        return {b: len(q) for b, q in self.buckets.items()}

    def bucket_index(self) -> dict[Tokens, int]:
        return {q: b for b, qs in self.buckets.items() for q in qs}


def corpus_entity_frequencies(sentences, kb: KnowledgeBase) -> Counter:
    """Entity mention counts, aliases counted toward their entity."""
    freq: Counter = Counter()
    for s in sentences:
        for m in tag_sentence(tuple(s), kb):
            freq[m.entity_id] += 1
    return freq


def _training_sentences(train_corpus):
    for item in train_corpus:
        if isinstance(item, ParaphrasePair):
            yield item.source_tokens
            yield item.target_tokens
        else:
            yield tuple(item)


def bucket_test_set(test_queries: Sequence[Sequence[str]], train_corpus, kb: KnowledgeBase,
                    freq: Optional[Counter] = None) -> FrequencyBuckets:
    """Bucket single-entity queries by how often their entity occurs in training.

    ``train_corpus`` holds ParaphrasePairs (both sides count) or plain token
    sequences. Queries whose tagging yields other than exactly one core entity,
    or whose entity never occurs in training, are excluded.
    """
    if freq is None:
        freq = corpus_entity_frequencies(_training_sentences(train_corpus), kb)
    out = FrequencyBuckets()
    for q in test_queries:
        q = tuple(q)
        values = conceptualize(q, kb).slot_values
        if len(values) != 1:
            out.excluded.append((q, f"{len(values)}-entities"))
            continue
        eid = values[0].entity_id
        f = freq.get(eid, 0)
        b = bucket_of(f)
        if b is None:
            out.excluded.append((q, "unseen-entity"))
            continue
        out.buckets[b].append(q)
        out.entity[q] = eid
        out.frequency[q] = f
    return out


def auc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """P(random positive outranks random negative), ties counted half."""
    pos = [float(s) for s, y in zip(scores, labels) if y == 1]
    neg = sorted(float(s) for s, y in zip(scores, labels) if y != 1)
    if not pos or not neg:
        raise SingleClassError("AUC needs both labels")
    # integer numerator keeps the result identical to pairwise counting
    twice = 0
    for s in pos:
        lo = bisect.bisect_left(neg, s)
        hi = bisect.bisect_right(neg, s)
        twice += 2 * lo + (hi - lo)
    return (twice / 2) / (len(pos) * len(neg))


@dataclass(frozen=True)
class RecallResult:
    recall: float
    threshold: Optional[float]
    attainable: bool


def recall_at_precision(scores: Sequence[float], labels: Sequence[int], precision_target: float) -> RecallResult:
    labels = list(labels)
    if not any(y == 1 for y in labels) or all(y == 1 for y in labels):
        raise SingleClassError("recall@precision needs both labels")
    try:
        t, _, recall = threshold_at_precision(scores, labels, precision_target)
    except UnattainablePrecision:
        return RecallResult(0.0, None, False)
    return RecallResult(recall, t, True)


# -- generation accuracy ---------------------------------------------------------

def stratified_sample(buckets: FrequencyBuckets, kb: KnowledgeBase, per_template: int,
                      seed: int = 0) -> dict[int, list[Tokens]]:
    """Up to ``per_template`` queries per (bucket, query pattern).

    Every pattern gets the same weight in every bucket, so bucket accuracies
    differ only through entity frequency.
    """
    import random
    rng = random.Random(f"stratify:{seed}")
    out = {}
    for b, queries in buckets.buckets.items():
        by_pattern: dict[Tokens, list[Tokens]] = {}
        for q in queries:
            by_pattern.setdefault(conceptualize(q, kb).tokens, []).append(q)
        chosen = []
        for pat in sorted(by_pattern):
            qs = by_pattern[pat]
            chosen.extend(rng.sample(qs, min(per_template, len(qs))))
        out[b] = chosen
    return out


def raw_top1(model: TranslationModel, query: Tokens, beam: int, stack_size: int) -> Optional[Tokens]:
    result = decode(model, query, beam=beam, stack_size=stack_size)
    return result[0].tokens if result else None


def conceptual_top1(model: TranslationModel, query: Tokens, kb: KnowledgeBase, beam: int,
                    stack_size: int) -> Optional[Tokens]:
    pat = conceptualize(query, kb)
    result = decode(model, pat.tokens, beam=beam, stack_size=stack_size)
    if not result:
        return None
    out = Pattern.from_tokens(result[0].tokens)
    per_concept: dict[str, list] = {}
    for v in pat.slot_values:
        per_concept.setdefault(v.concept, []).append([v.surface])
    bindings = []
    for slot in out.slots:
        lists = per_concept.get(slot.concept, [])
        if slot.occurrence > len(lists):
            return None
        bindings.append(lists[slot.occurrence - 1])
    try:
        return instantiate(out, bindings)[0]
    except MissingBindingError:
        return None


def generation_accuracy(outputs: dict[int, list[tuple[Tokens, Optional[Tokens]]]],
                        oracle: Oracle) -> dict[int, float]:
    acc = {}
    for b, rows in outputs.items():
        ok = sum(1 for q, out in rows if out is not None and oracle.synonymous(q, out))
        acc[b] = ok / len(rows) if rows else float("nan")
    return acc


# -- experiment driver -------------------------------------------------------------

@dataclass(frozen=True)
class EvalConfig:
    seed: int = 7
    beam: int = 50
    stack_size: int = 100
    gen_stack_size: int = 30
    per_template: int = 5
    ngram: int = 3
    max_phrase_len: int = 4
    em_iterations: int = 5
    augment_proportion: float = 0.12
    augment_seed: int = 7
    rare_frequency_threshold: int = 2
    learning_rate: float = 0.5
    epochs: int = 400
    l2: float = 1e-4
    precision_global: float = 0.95
    precision_longtail: float = 0.70
    sweep: tuple[float, ...] = SWEEP_PROPORTIONS
    throughput_queries: int = 200
    run_generation: bool = True
    run_discrimination: bool = True
    world: WorldConfig = field(default_factory=WorldConfig)

    @classmethod
    def from_file(cls, path: str | Path) -> "EvalConfig":
        """Flat ``key = value`` file; unknown keys are world options."""
        own = {f.name: f for f in fields(cls) if f.name != "world"}
        eval_kw: dict[str, Any] = {}
        world_kw: dict[str, Any] = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ValueError(f"{path}:{lineno}: expected key = value")
                key, val = (x.strip() for x in line.split("=", 1))
                if key in own:
                    eval_kw[key] = _coerce(own[key].type, val)
                else:
                    world_kw[key] = val
        if "seed" in eval_kw and "seed" not in world_kw:
            world_kw["seed"] = eval_kw["seed"]
        return cls(**eval_kw, world=WorldConfig.from_dict(world_kw))


def _coerce(type_name: str, val: str):
    t = str(type_name)
    if t.startswith("tuple"):
        return tuple(float(x) for x in val.replace(",", " ").split())
    if t == "bool":
        return val.lower() in ("1", "true", "yes", "on")
    if t == "float":
        return float(val)
    return int(val)


@dataclass
class EvalReport:
    config: dict[str, Any]
    bucket_sizes: dict[str, int] = field(default_factory=dict)
    accuracy_raw: dict[str, float] = field(default_factory=dict)
    accuracy_conceptual: dict[str, float] = field(default_factory=dict)
    corpus: dict[str, Any] = field(default_factory=dict)
    discrimination: dict[str, dict[str, float]] = field(default_factory=dict)
    sweep: list[dict[str, float]] = field(default_factory=list)
    throughput: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def save(self, out_dir: str | Path) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "report.json", "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        (out / "report.md").write_text(self.to_markdown(), encoding="utf-8")

    def to_markdown(self) -> str:
        lines = ["# Evaluation report", ""]
        if self.accuracy_raw:
            lines += ["## Top-1 synonymy accuracy by entity frequency", "",
                      "| frequency | queries | raw model | conceptual model |", "|---|---|---|---|"]
            for b in BUCKETS:
                k = BUCKET_LABELS[b]
                lines.append(f"| {k} | {self.bucket_sizes.get(k, 0)} | {_pct(self.accuracy_raw.get(k))} "
                             f"| {_pct(self.accuracy_conceptual.get(k))} |")
            lines.append("")
        if self.discrimination:
            lines += ["## Discriminator", "",
                      "| model | AUC-G | Recall-G | AUC-L | Recall-L |", "|---|---|---|---|---|"]
            for name, m in self.discrimination.items():
                lines.append(f"| {name} | {_pct(m['auc_g'])} | {_pct(m['recall_g'])} | "
                             f"{_pct(m['auc_l'])} | {_pct(m['recall_l'])} |")
            lines.append("")
        if self.sweep:
            lines += ["## Augmentation proportion sweep", "",
                      "| proportion | Recall-G | Recall-L |", "|---|---|---|"]
            for row in self.sweep:
                lines.append(f"| {row['proportion']:.0%} | {_pct(row['recall_g'])} | {_pct(row['recall_l'])} |")
            lines.append("")
        if self.throughput:
            lines += ["## Decoding throughput", ""]
            lines += [f"- {k}: {v:.3f}" for k, v in sorted(self.throughput.items())]
            lines.append("")
        return "\n".join(lines)


def _pct(x) -> str:
    return "n/a" if x is None or x != x else f"{100 * x:.2f}%"


def run_generation_experiment(world: World, cfg: EvalConfig, report: EvalReport) -> None:
    kb = world.kb
    pairs = world.paraphrase_pairs()
    diag = CorpusDiagnostics()
    pattern_pairs = build_parallel_patterns(pairs, kb, diag)
    report.corpus = {"paraphrase_pairs": diag.total, "pattern_pairs": diag.kept,
                     "rejected": dict(diag.rejected)}
    tc = TrainConfig(cfg.ngram, cfg.max_phrase_len, cfg.em_iterations)
    raw_model = train_model([(p.source_tokens, p.target_tokens) for p in pairs], tc)
    concept_model = train_model(pattern_pairs, tc)

    buckets = bucket_test_set(world.gen_test_queries(), pairs, kb)
    sample = stratified_sample(buckets, kb, cfg.per_template, cfg.seed)
    oracle = Oracle.from_world(world)
    raw_out, concept_out = {}, {}
    for b, queries in sample.items():
        raw_out[b] = [(q, raw_top1(raw_model, q, cfg.beam, cfg.gen_stack_size)) for q in queries]
        concept_out[b] = [(q, conceptual_top1(concept_model, q, kb, cfg.beam, cfg.gen_stack_size))
                          for q in queries]
    raw_acc = generation_accuracy(raw_out, oracle)
    con_acc = generation_accuracy(concept_out, oracle)
    report.bucket_sizes = {BUCKET_LABELS[b]: len(sample[b]) for b in BUCKETS}
    report.accuracy_raw = {BUCKET_LABELS[b]: raw_acc[b] for b in BUCKETS}
    report.accuracy_conceptual = {BUCKET_LABELS[b]: con_acc[b] for b in BUCKETS}

    repo, trie = build_repository(world.keywords(), kb)
    queries = [conceptualize(q, kb).tokens for q in world.query_log(cfg.throughput_queries, "throughput")]
    t0 = time.perf_counter()
    n_out = sum(len(decode_constrained(concept_model, q, trie, cfg.beam, cfg.stack_size)) for q in queries)
    elapsed = time.perf_counter() - t0
    report.throughput = {
        "queries": float(len(queries)),
        "seconds": elapsed,
        "queries_per_second": len(queries) / elapsed if elapsed else float("inf"),
        "patterns_per_query": n_out / max(1, len(queries)),
        "ms_per_query": 1000 * elapsed / max(1, len(queries)),
    }


def _discriminator_metrics(model, kb, test_g, test_l, cfg: EvalConfig) -> dict[str, float]:
    sg = model.score_pairs(test_g, kb)
    sl = model.score_pairs(test_l, kb)
    yg = [p.label for p in test_g]
    yl = [p.label for p in test_l]
    rg = recall_at_precision(sg, yg, cfg.precision_global)
    rl = recall_at_precision(sl, yl, cfg.precision_longtail)
    return {"auc_g": auc(sg, yg), "recall_g": rg.recall, "auc_l": auc(sl, yl), "recall_l": rl.recall}


def run_discrimination_experiment(world: World, cfg: EvalConfig, report: EvalReport) -> None:
    kb = world.kb
    wc = world.config
    train = world.labeled_pairs(wc.n_dis_train, "dis-train")
    test_g = world.labeled_pairs(wc.n_dis_test, "dis-test")
    test_l = world.longtail_pairs(wc.n_longtail_test, train, cfg.rare_frequency_threshold)
    hyper = TrainHyper(cfg.learning_rate, cfg.epochs, None, cfg.l2, cfg.seed)
    baseline = train_classifier(train, kb, hyper)
    report.discrimination["baseline"] = _discriminator_metrics(baseline, kb, test_g, test_l, cfg)

    def augmented(proportion):
        acfg = AugmentationConfig(cfg.rare_frequency_threshold, proportion)
        extra = augment_dataset(train, kb, acfg, cfg.augment_seed)
        return train_classifier(list(train) + extra, kb, hyper)

    report.discrimination["augmented"] = _discriminator_metrics(
        augmented(cfg.augment_proportion), kb, test_g, test_l, cfg)
    for p in cfg.sweep:
        if abs(p - cfg.augment_proportion) < 1e-12:
            m = report.discrimination["augmented"]
        else:
            m = _discriminator_metrics(augmented(p), kb, test_g, test_l, cfg)
        report.sweep.append({"proportion": p, "recall_g": m["recall_g"], "recall_l": m["recall_l"]})


def run_experiments(cfg: EvalConfig = EvalConfig()) -> EvalReport:
    world = World(cfg.world)
    report = EvalReport(config={**{k: v for k, v in asdict(cfg).items() if k != "world"},
                                "world": asdict(cfg.world)})
    if cfg.run_generation:
        run_generation_experiment(world, cfg, report)
    if cfg.run_discrimination:
        run_discrimination_experiment(world, cfg, report)
    return report
