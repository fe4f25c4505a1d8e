import filecmp

import pytest

from conceptkw.discriminator.features import levenshtein
from conceptkw.evaluation import bucket_test_set
from conceptkw.knowledge_base import load_kb_dir
from conceptkw.world import Oracle, World, WorldConfig, WorldConfigError, gen_world


def test_default_world_is_zipfian(world_artifacts):
    w = world_artifacts.world
    pairs = w.paraphrase_pairs()
    assert len(pairs) >= 5000
    sizes = bucket_test_set(w.gen_test_queries(), pairs, w.kb).sizes()
    assert all(sizes[b] > 0 for b in (1, 2, 3, 4))


def test_paraphrase_drift(world_artifacts):
    from conceptkw.conceptualizer import conceptualize
    from conceptkw.pattern_corpus import PatternPair, strict_alignment_filter
    w = world_artifacts.world
    pairs = w.paraphrase_pairs()[:2000]
    bad = [p for p in pairs if not w.synonymous(p.source_tokens, p.target_tokens)]
    # drift only swaps entities, so the template groups still agree
    for p in bad:
        assert w.meaning(p.source_tokens)[0] == w.meaning(p.target_tokens)[0]
    assert 0.05 < len(bad) / len(pairs) < 0.25
    for p in pairs:
        cand = PatternPair(conceptualize(p.source_tokens, w.kb), conceptualize(p.target_tokens, w.kb))
        assert (strict_alignment_filter(cand) is None) == w.synonymous(p.source_tokens, p.target_tokens)


def test_labeled_pairs_match_oracle(world_artifacts):
    w = world_artifacts.world
    for p in w.labeled_pairs(300, "oracle-check"):
        assert w.synonymous(p.query, p.keyword) == bool(p.label)


def test_longtail_pairs_use_rare_entities(world_artifacts):
    from conceptkw.discriminator.augment import entity_frequencies
    from conceptkw.conceptualizer import conceptualize
    w = world_artifacts.world
    train = w.labeled_pairs(500, "lt-train")
    freq = entity_frequencies(train, w.kb)
    lt = w.longtail_pairs(200, train)
    assert {p.label for p in lt} == {0, 1}
    for p in lt:
        assert w.synonymous(p.query, p.keyword) == bool(p.label)
        e = conceptualize(p.query, w.kb).slot_values[0].entity_id
        assert freq.get(e, 0) <= 2


def test_single_template_world():
    w = World(WorldConfig(n_templates=1, n_pairs=50, n_entities=20, n_keywords=20, n_k2k=5, n_queries=10))
    assert len(w.templates) == 1
    assert len(w.paraphrase_pairs()) == 50


@pytest.mark.parametrize("kw", [dict(n_pairs=0), dict(n_concepts=10, n_entities=5), dict(alias_rate=1.5)])
def test_validate(kw):
    with pytest.raises(WorldConfigError):
        World(WorldConfig(**kw))


def test_unknown_option():
    with pytest.raises(WorldConfigError):
        WorldConfig.from_dict({"nope": 1})


def test_gen_world_byte_identical(tmp_path):
    cfg = WorldConfig(n_entities=60, n_templates=8, n_pairs=300, n_keywords=100, n_k2k=20, n_queries=100,
                      n_dis_train=100, n_dis_dev=50, n_dis_test=50, n_longtail_test=50)
    a, b = gen_world(cfg, tmp_path / "a"), gen_world(cfg, tmp_path / "b")
    cmp = filecmp.dircmp(a, b)
    assert not cmp.diff_files and not cmp.left_only and not cmp.right_only
    assert not filecmp.dircmp(a / "kb", b / "kb").diff_files
    kb = load_kb_dir(a / "kb")
    core = [e for e in kb.lexicon if kb.core_concept_of_entity(e.entity_id) is not None]
    assert len(core) == 60
    oracle = Oracle.load(a)
    w = World(cfg)
    for p in w.paraphrase_pairs()[:50]:
        assert oracle.synonymous(p.source_tokens, p.target_tokens) == w.synonymous(p.source_tokens, p.target_tokens)
    c = gen_world(WorldConfig(**{**cfg.__dict__, "seed": 8}), tmp_path / "c")
    assert (c / "paraphrases.tsv").read_bytes() != (a / "paraphrases.tsv").read_bytes()


def test_confusable_prefers_similar(world_artifacts):
    import random
    w = world_artifacts.world
    from conceptkw.discriminator.augment import char_overlap
    w = world_artifacts.world
    surface = lambda e: " ".join(w.kb.lexicon.get(e).canonical_surface)
    close = lambda a, b: levenshtein(surface(a), surface(b)) <= 2 or char_overlap(surface(a), surface(b)) >= 0.5
    ids = sorted(w.entities_by_concept[w.core_concepts[0]])
    checked = 0
    for e in ids[:40]:
        other = w.confusable(e, ids, random.Random(0))
        assert other != e
        if any(close(e, x) for x in ids if x != e):
            assert close(e, other)
            checked += 1
    assert checked
