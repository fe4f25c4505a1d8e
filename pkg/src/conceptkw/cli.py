"""Command-line entry point: ``conceptkw <subcommand> [flags]``.

Exit codes: 0 success, 1 usage error, 2 data or validation error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections import Counter
from pathlib import Path
from typing import Optional, Sequence

from .conceptualizer import conceptualize, format_slot_values
from .discriminator import (AugmentationConfig, AugmentationReport, ClassifierModel, TrainHyper,
                            augment_dataset, calibrate_threshold, read_labeled_pairs, train_classifier)
from .knowledge_base import KnowledgeBaseError, load_kb_dir, tokenize
from .matcher import Matcher, MatchConfig
from .pattern_corpus import (CorpusDiagnostics, build_parallel_patterns, read_paraphrases, read_pattern_pairs,
                             write_pattern_pairs)
from .repository import (CacheHolder, LookupCache, SynonymClusters, build_cache, build_clusters,
                         build_repository)
from .translation.model import TrainConfig, TranslationModel, train_model

logger = logging.getLogger("conceptkw")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}\n{self.format_usage()}")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--verbose", "-v", action="store_true")
    p.add_argument("--kb-dir", type=Path, help="directory holding taxonomy.tsv and entities.tsv")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="conceptkw", description="Concept-based keyword matching pipeline.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    common = [_common()]

    p = sub.add_parser("validate-kb", parents=common, help="load and check a knowledge base")

    p = sub.add_parser("conceptualize", parents=common, help="sentences to conceptual patterns")
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--output", type=Path)

    p = sub.add_parser("build-corpus", parents=common, help="paraphrase pairs to filtered pattern pairs")
    p.add_argument("--pairs", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("train-translator", parents=common, help="train the phrase-based pattern translator")
    p.add_argument("--pairs", type=Path, required=True, help="pattern-pairs.tsv")
    p.add_argument("--out", type=Path, required=True, help="model directory")
    p.add_argument("--ngram", type=int, default=3)
    p.add_argument("--max-phrase-len", type=int, default=4)
    p.add_argument("--em-iters", type=int, default=5)

    p = sub.add_parser("build-repo", parents=common, help="index keywords and synonym clusters")
    p.add_argument("--keywords", type=Path, required=True)
    p.add_argument("--k2k", type=Path)
    p.add_argument("--out", type=Path, help="write distinct keyword patterns here")

    p = sub.add_parser("build-cache", parents=common, help="precompute patterns for frequent queries")
    p.add_argument("--model-dir", type=Path, required=True)
    p.add_argument("--repo", type=Path, required=True)
    p.add_argument("--queries", type=Path, required=True)
    p.add_argument("--top-k", type=int, default=10000)
    p.add_argument("--beam", type=int, default=50)
    p.add_argument("--stack-size", type=int, default=100)
    p.add_argument("--generation", type=int, default=1)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("match", parents=common, help="retrieve synonymous keywords for queries")
    p.add_argument("--model-dir", type=Path, required=True)
    p.add_argument("--repo", type=Path, required=True)
    p.add_argument("--clusters", type=Path)
    p.add_argument("--cache", type=Path)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--query")
    group.add_argument("--input", type=Path)
    p.add_argument("--output", type=Path)
    p.add_argument("--trace", choices=("json",))
    p.add_argument("--no-timing", action="store_true", help="omit timing from traces")
    p.add_argument("--beam", type=int, default=50)
    p.add_argument("--stack-size", type=int, default=100)
    p.add_argument("--max-candidates", type=int, default=200)

    p = sub.add_parser("train-discriminator", parents=common, help="train the synonymy classifier")
    p.add_argument("--pairs", type=Path, required=True)
    p.add_argument("--dev", type=Path, help="labeled pairs for threshold calibration")
    p.add_argument("--precision", type=float, action="append", help="calibration target (repeatable)")
    p.add_argument("--augment-proportion", type=float, default=0.12)
    p.add_argument("--rare-threshold", type=int, default=2)
    p.add_argument("--learning-rate", type=float, default=0.5)
    p.add_argument("--epochs", type=int, default=400)
    p.add_argument("--l2", type=float, default=1e-4)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("score", parents=common, help="score query-keyword pairs")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--pairs", type=Path, required=True, help="query<TAB>keyword[<TAB>...] per line")
    p.add_argument("--precision", type=float, help="emit a decision at this calibrated target")
    p.add_argument("--output", type=Path)

    p = sub.add_parser("evaluate", parents=common, help="run the long-tail experiments")
    p.add_argument("--config", type=Path, help="flat key = value file")
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("gen-world", parents=common, help="write a synthetic fixture directory")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--n-concepts", type=int)
    p.add_argument("--n-entities", type=int)
    p.add_argument("--n-templates", type=int)
    p.add_argument("--n-pairs", type=int)
    p.add_argument("--alias-rate", type=float)
    p.add_argument("--zipf-exponent", type=float)
    return parser


def _kb(args):
    if args.kb_dir is None:
        raise UsageError(f"{args.command}: --kb-dir is required")
    return load_kb_dir(args.kb_dir)


def _open_out(path: Optional[Path]):
    return open(path, "w", encoding="utf-8") if path else _NoClose(sys.stdout)


class _NoClose:
    def __init__(self, fh):
        self.fh = fh

    def __enter__(self):
        return self.fh

    def __exit__(self, *exc):
        self.fh.flush()


def _read_lines(path: Path) -> list[tuple[str, ...]]:
    with open(path, encoding="utf-8") as fh:
        return [tokenize(line) for line in fh if line.strip()]


# -- subcommands ---------------------------------------------------------------

def cmd_validate_kb(args) -> int:
    kb = _kb(args)
    tax = kb.taxonomy
    per_core = Counter(kb.core_concept_of_entity(e.entity_id) for e in kb.lexicon)
    print(f"concepts\t{len(tax.concepts)}")
    print(f"core_concepts\t{len(tax.core_concepts)}")
    print(f"entities\t{len(kb.lexicon)}")
    print(f"surfaces\t{len(kb.index.surfaces())}")
    for core in sorted(c for c in per_core if c is not None):
        print(f"entities[{core}]\t{per_core[core]}")
    print(f"entities[no-core]\t{per_core.get(None, 0)}")
    return 0


def cmd_conceptualize(args) -> int:
    kb = _kb(args)
    with _open_out(args.output) as out:
        for tokens in _read_lines(args.input):
            pat = conceptualize(tokens, kb)
            out.write(f"{pat.text}\t{format_slot_values(pat.slot_values)}\n")
    return 0


def cmd_build_corpus(args) -> int:
    kb = _kb(args)
    diag = CorpusDiagnostics()
    pairs = build_parallel_patterns(read_paraphrases(args.pairs), kb, diag)
    write_pattern_pairs(pairs, args.out)
    print(f"pairs={diag.total} kept={diag.kept} rejected={dict(sorted(diag.rejected.items()))}",
          file=sys.stderr)
    return 0


def cmd_train_translator(args) -> int:
    cfg = TrainConfig(args.ngram, args.max_phrase_len, args.em_iters)
    model = train_model(read_pattern_pairs(args.pairs), cfg)
    model.save(args.out)
    print(f"phrase_entries={sum(len(v) for v in model.phrase_table.values())} "
          f"source_phrases={len(model.phrase_table)}", file=sys.stderr)
    return 0


def cmd_build_repo(args) -> int:
    kb = _kb(args)
    repo, trie = build_repository(args.keywords, kb)
    clusters = build_clusters(args.k2k, repo) if args.k2k else SynonymClusters()
    print(f"keywords\t{len(repo.keywords)}")
    print(f"patterns\t{len(trie)}")
    print(f"multi_member_clusters\t{len(clusters.multi_member())}")
    if clusters.dropped:
        print(f"dropped {len(clusters.dropped)} synonym pairs with keywords outside the repository",
              file=sys.stderr)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            for pat in trie:
                fh.write(" ".join(pat) + "\n")
    return 0


def cmd_build_cache(args) -> int:
    kb = _kb(args)
    model = TranslationModel.load(args.model_dir)
    _, trie = build_repository(args.repo, kb)
    queries = _read_lines(args.queries)
    cache = build_cache(queries, kb, model, trie, args.top_k, args.beam, args.stack_size, args.generation)
    cache.save(args.out)
    print(f"cached_patterns={len(cache)} generation={cache.generation}", file=sys.stderr)
    return 0


def cmd_match(args) -> int:
    kb = _kb(args)
    model = TranslationModel.load(args.model_dir)
    repo, trie = build_repository(args.repo, kb)
    clusters = build_clusters(args.clusters, repo) if args.clusters else SynonymClusters()
    config = MatchConfig(beam=args.beam, stack_size=args.stack_size, use_cache=args.cache is not None,
                         max_candidates=args.max_candidates)
    cache = CacheHolder(LookupCache.load(args.cache)) if args.cache else CacheHolder()
    matcher = Matcher(kb, model, repo, trie, clusters, config, cache)
    timing = not args.no_timing

    if args.query is not None:
        trace = matcher.retrieve(tokenize(args.query))
        with _open_out(args.output) as out:
            if args.trace == "json":
                out.write(trace.to_json(include_timing=timing))
            else:
                for kw, score, stage in trace.candidates:
                    out.write(f"{' '.join(kw)}\t{score:.6f}\t{stage}\n")
        return 0

    with _open_out(args.output) as out:
        for q in _read_lines(args.input):
            trace = matcher.retrieve(q)
            if args.trace == "json":
                out.write(json.dumps(trace.to_dict(include_timing=timing), sort_keys=True) + "\n")
                continue
            for kw, score, stage in trace.candidates:
                out.write(f"{' '.join(q)}\t{' '.join(kw)}\t{score:.6f}\t{stage}\n")
    return 0


def cmd_train_discriminator(args) -> int:
    kb = _kb(args)
    train = read_labeled_pairs(args.pairs)
    report = AugmentationReport()
    extra = []
    if args.augment_proportion > 0:
        cfg = AugmentationConfig(args.rare_threshold, args.augment_proportion)
        extra = augment_dataset(train, kb, cfg, args.seed, report)
    hyper = TrainHyper(args.learning_rate, args.epochs, None, args.l2, args.seed)
    model = train_classifier(list(train) + extra, kb, hyper)
    print(f"train={len(train)} augmented={len(extra)} budget={report.budget} "
          f"final_loss={model.loss_history[-1]:.6f}", file=sys.stderr)
    if args.dev:
        dev = read_labeled_pairs(args.dev)
        for target in args.precision or (0.95,):
            t = calibrate_threshold(model, dev, kb, target)
            if t is None:
                print(f"precision {target} unattainable on dev; no threshold stored", file=sys.stderr)
            else:
                print(f"threshold@{target}={t:.6f}", file=sys.stderr)
    model.save(args.out)
    return 0


def cmd_score(args) -> int:
    kb = _kb(args)
    model = ClassifierModel.load(args.model)
    threshold = None
    if args.precision is not None:
        threshold = model.thresholds.get(args.precision)
        if threshold is None:
            raise ValueError(f"model has no calibrated threshold for precision {args.precision}")
    rows = []
    with open(args.pairs, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip() or line.startswith("#"):
                continue
            cols = line.rstrip("\n").split("\t")
            if len(cols) < 2:
                raise ValueError(f"{args.pairs}:{lineno}: expected query<TAB>keyword")
            rows.append((tokenize(cols[0]), tokenize(cols[1])))

    class _P:
        __slots__ = ("query", "keyword")

        def __init__(self, q, k):
            self.query, self.keyword = q, k

    scores = model.score_pairs([_P(q, k) for q, k in rows], kb) if rows else []
    with _open_out(args.output) as out:
        for (q, k), s in zip(rows, scores):
            line = f"{' '.join(q)}\t{' '.join(k)}\t{s:.6f}"
            if threshold is not None:
                line += f"\t{int(s >= threshold)}"
            out.write(line + "\n")
    return 0


def cmd_evaluate(args) -> int:
    from .evaluation import EvalConfig, run_experiments
    from .world import WorldConfig
    cfg = EvalConfig.from_file(args.config) if args.config else EvalConfig(
        seed=args.seed, augment_seed=args.seed, world=WorldConfig(seed=args.seed))
    print(f"evaluation config: {json.dumps(_jsonable(cfg), sort_keys=True)}", file=sys.stderr)
    report = run_experiments(cfg)
    report.save(args.out)
    sys.stdout.write(report.to_markdown())
    return 0


def cmd_gen_world(args) -> int:
    from .world import WorldConfig, gen_world
    overrides = {k: getattr(args, k) for k in ("n_concepts", "n_entities", "n_templates", "n_pairs",
                                               "alias_rate", "zipf_exponent")
                 if getattr(args, k) is not None}
    cfg = WorldConfig.from_dict({"seed": args.seed, **overrides})
    out = gen_world(cfg, args.out)
    print(str(out))
    return 0


COMMANDS = {
    "validate-kb": cmd_validate_kb,
    "conceptualize": cmd_conceptualize,
    "build-corpus": cmd_build_corpus,
    "train-translator": cmd_train_translator,
    "build-repo": cmd_build_repo,
    "build-cache": cmd_build_cache,
    "match": cmd_match,
    "train-discriminator": cmd_train_discriminator,
    "score": cmd_score,
    "evaluate": cmd_evaluate,
    "gen-world": cmd_gen_world,
}


def _jsonable(obj):
    if hasattr(obj, "__dataclass_fields__"):
        return {k: _jsonable(getattr(obj, k)) for k in obj.__dataclass_fields__}
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, Path):
        return str(obj)
    return obj


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_help())
    except UsageError as e:
        print(str(e).rstrip(), file=sys.stderr)
        return 1
    except SystemExit as e:  # --help
        return int(e.code or 0)

    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    print(f"config: {json.dumps(_jsonable(vars(args)), sort_keys=True)}", file=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except UsageError as e:
        print(str(e), file=sys.stderr)
        return 1
    except FileNotFoundError as e:
        print(f"error: file not found: {e.filename}", file=sys.stderr)
        return 2
    except (KnowledgeBaseError, ValueError, KeyError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
