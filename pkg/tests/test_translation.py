import math

import pytest
from hypothesis import given, settings, strategies as st

from conceptkw.conceptualizer import Pattern
from conceptkw.pattern_corpus import PatternPair
from conceptkw.translation import (Candidate, NgramLM, PhraseEntry, TranslationModel, Weights,
                                   decode, decode_constrained, lm_logprob, score_derivation, train_model)
from conceptkw.translation.alignment import extract_phrases, grow_diag, train_ibm1, viterbi_align
from conceptkw.translation.model import EmptyCorpusError, TrainConfig, read_phrase_table, write_phrase_table
from conceptkw.trie import PatternTrie

from oracles import assert_matches_oracle, brute_force_decode, random_instance, random_trie


# -- language model --------------------------------------------------------------

def test_lm_single_sentence_bigram():
    lm = NgramLM.train([["a", "b", "a", "c"]], order=2)
    # p(a|<s>)=1, p(b|a)=1/2, p(a|b)=1, p(c|a)=1/2, p(</s>|c)=1
    assert lm_logprob(lm, ["a", "b", "a", "c"]) == pytest.approx(math.log(0.25), abs=1e-12)


def test_lm_empty_sequence_scores_end_marker():
    lm = NgramLM.train([["a", "b", "a", "c"]], order=2)
    # (<s>, </s>) unseen: back off once to unigram </s>, 1 of 5 counted tokens
    assert lm_logprob(lm, []) == pytest.approx(math.log(0.4) + math.log(1 / 5), abs=1e-12)


def test_lm_unknown_tokens_finite():
    lm = NgramLM.train([["a"]], order=3)
    v = lm_logprob(lm, ["zz", "yy"])
    assert math.isfinite(v) and v < -19


def test_lm_backoff_trigram_to_bigram():
    lm = NgramLM.train([["a", "b"], ["c", "b"]], order=3)
    # trigram (x, a, b) never seen with history (c, a): back off once to p(b|a)=1
    assert lm.word_logprob(["c", "a"], "b") == pytest.approx(math.log(0.4), abs=1e-12)


def test_lm_save_load(tmp_path):
    lm = NgramLM.train([["a", "b", "c"], ["a", "c"]], order=3)
    lm.save(tmp_path / "lm.tsv")
    again = NgramLM.load(tmp_path / "lm.tsv")
    assert again.order == 3 and again.logprobs == lm.logprobs
    assert lm_logprob(again, ["a", "x", "c"]) == lm_logprob(lm, ["a", "x", "c"])


# -- alignment and phrase extraction -------------------------------------------------

def test_ibm1_learns_identity_pairs():
    bitext = [(["a", "b"], ["x", "y"]), (["a", "c"], ["x", "z"]), (["b", "c"], ["y", "z"])]
    t = train_ibm1(bitext, 10)
    assert t[("x", "a")] > t[("y", "a")]
    assert viterbi_align(["a", "b"], ["x", "y"], t, 0.0) == {(0, 0), (1, 1)}


def test_ibm1_zero_iterations_uniform():
    assert train_ibm1([(["a"], ["x"])], 0) == {}
    # uniform table: ties resolved along the diagonal
    assert viterbi_align(["a", "b"], ["x", "y"], {}, 1.0) == {(0, 0), (1, 1)}


def test_grow_diag_adds_neighbours_from_union():
    fwd = {(0, 0), (1, 1)}
    rev = {(0, 0), (1, 1), (1, 2)}
    assert grow_diag(fwd, rev) == {(0, 0), (1, 1), (1, 2)}
    assert grow_diag({(0, 0)}, {(1, 1)}) == set()


def test_extract_phrases_consistency():
    src, tgt = ["price", "of", "a"], ["a", "price"]
    pairs = extract_phrases(src, tgt, {(0, 1), (2, 0)}, 4)
    assert (("price", "of"), ("price",)) in pairs
    assert (("a",), ("a",)) in pairs
    # "of a" -> "a" would split the price alignment only if it crossed; it does not
    assert (("of", "a"), ("a",)) in pairs
    # every extracted pair respects the alignment
    for s, t in pairs:
        assert 1 <= len(s) <= 4 and 1 <= len(t) <= 4


def test_toy_price_of_corpus():
    corpus = [(("price", "of", x), (x, "price")) for x in "abcd"]
    model = train_model(corpus)
    entry = {e.target: e for e in model.options(("price", "of"))}[("price",)]
    assert entry.p_fwd == 1.0


def test_forward_probabilities_normalised():
    corpus = [(("a", "b", "c"), ("x", "y", "z")), (("a", "c"), ("x", "z")), (("b", "a"), ("y", "x"))]
    model = train_model(corpus)
    for entries in model.phrase_table.values():
        assert sum(e.p_fwd for e in entries) <= 1 + 1e-9
        assert all(0 < e.p_fwd <= 1 and 0 < e.p_rev <= 1 for e in entries)


def test_slot_tokens_are_vocabulary():
    texts = [("how much does [s] cost in [l]", "the price of [s] in [l]"),
             ("[s] cost", "price of [s]"), ("[s] in [l]", "[s] at [l]"), ("cheap [s]", "low cost [s]")]
    model = train_model([PatternPair(Pattern.parse(a), Pattern.parse(b)) for a, b in texts])
    assert ("[s]",) in model.phrase_table
    assert "[l]" in model.lm.vocab()


def test_identity_corpus_decodes_to_source():
    sents = [("a", "b", "c"), ("b", "c"), ("c", "a", "d")]
    model = train_model([(s, s) for s in sents])
    for s in sents:
        assert decode(model, s)[0].tokens == s


def test_em_zero_iterations_completes():
    model = train_model([(("a", "b"), ("x", "y"))], TrainConfig(em_iterations=0))
    assert model.phrase_table


def test_empty_corpus():
    with pytest.raises(EmptyCorpusError):
        train_model([])


def test_model_save_load(tmp_path):
    model = train_model([(("a", "b"), ("x", "y")), (("a",), ("x",))], weights=Weights(0.5, 1, 1, -0.1))
    model.save(tmp_path / "m")
    again = TranslationModel.load(tmp_path / "m")
    assert again.phrase_table == model.phrase_table
    assert again.weights == model.weights
    assert decode(again, ("a", "b")) == decode(model, ("a", "b"))


def test_phrase_table_rejects_bad_probability(tmp_path):
    (tmp_path / "pt.tsv").write_text("a\tx\t1.5\t0.5\n")
    with pytest.raises(ValueError):
        read_phrase_table(tmp_path / "pt.tsv")


# -- decoder --------------------------------------------------------------------------

def toy_model(weights=Weights()):
    table = {("a",): [PhraseEntry(("x",), 1.0, 1.0)], ("b",): [PhraseEntry(("y",), 1.0, 1.0)],
             ("a", "b"): [PhraseEntry(("z",), 1.0, 1.0)]}
    lm = NgramLM.train([["x", "y"], ["z"]], order=2)
    return TranslationModel(table, lm, weights, 4)


def test_toy_table_candidates():
    model = toy_model()
    got = decode(model, ("a", "b"), beam=3)
    assert {c.tokens for c in got} == {("z",), ("x", "y")}
    oracle = brute_force_decode(model.phrase_table, model.lm, model.weights, 4, ("a", "b"), 3)
    assert [(c.tokens, c.score) for c in got] == pytest.approx(oracle)


def test_identity_table_top1():
    table = {(w,): [PhraseEntry((w,), 1.0, 1.0)] for w in "abc"}
    model = TranslationModel(table, NgramLM.train([["a", "b", "c"]]), Weights(), 4)
    assert decode(model, ("c", "a", "b"))[0].tokens == ("c", "a", "b")


def test_oov_passthrough():
    got = decode(toy_model(), ("a", "qqq", "b"))
    assert all("qqq" in c.tokens for c in got)
    assert got[0].tokens == ("x", "qqq", "y")


def test_constrained_empty_trie():
    assert decode_constrained(toy_model(), ("a", "b"), PatternTrie()) == []


def test_constrained_identity():
    table = {(w,): [PhraseEntry((w,), 1.0, 1.0)] for w in "ab"}
    model = TranslationModel(table, NgramLM.train([["a", "b"]]), Weights(), 4)
    assert decode_constrained(model, ("a", "b"), PatternTrie([("a", "b")]))[0].tokens == ("a", "b")


def test_constrained_fig2_both_patterns(fig2):
    model = TranslationModel.load(fig2 / "model")
    trie = PatternTrie([tuple("the price of [aesthetic_surgery] in [location]".split()),
                        tuple("what is the price of [aesthetic_surgery] in [location]".split())])
    got = decode_constrained(model, tuple("how much does [aesthetic_surgery] cost in [location]".split()), trie)
    assert {c.tokens for c in got} == set(trie)


def test_beam_and_stack_validation():
    with pytest.raises(ValueError):
        decode(toy_model(), ("a",), beam=0)
    with pytest.raises(ValueError):
        decode(toy_model(), ("a",), stack_size=0)


@pytest.mark.parametrize("seed", range(40))
def test_decoder_matches_brute_force(seed):
    model, source = random_instance(seed)
    got = decode(model, source, beam=8, stack_size=10_000)
    oracle = brute_force_decode(model.phrase_table, model.lm, model.weights, model.max_phrase_len,
                                source, 10_000)
    assert_matches_oracle(got, oracle, 8)


@pytest.mark.parametrize("seed", range(40))
def test_constrained_matches_brute_force(seed):
    model, source = random_instance(seed)
    trie = random_trie(model, source, seed)
    got = decode_constrained(model, source, trie, beam=8, stack_size=10_000)
    oracle = brute_force_decode(model.phrase_table, model.lm, model.weights, model.max_phrase_len,
                                source, 10_000, trie=trie)
    assert_matches_oracle(got, oracle, 8)
    assert all(c.tokens in trie for c in got)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 4))
def test_reported_score_equals_rescoring(seed, stack):
    model, source = random_instance(seed)
    for c in decode(model, source, beam=10, stack_size=stack):
        assert tuple(t for s in c.derivation for t in s.entry.target) == c.tokens
        assert abs(score_derivation(model, c.derivation) - c.score) <= 1e-9


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 3))
def test_larger_stack_never_scores_worse(seed, small):
    model, source = random_instance(seed)
    k = 5
    a = decode(model, source, beam=k, stack_size=small)
    b = decode(model, source, beam=k, stack_size=10_000)
    assert len(b) >= len(a)
    for x, y in zip(a, b):
        assert y.score >= x.score - 1e-12


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000))
def test_results_sorted_and_bounded(seed):
    model, source = random_instance(seed)
    got = decode(model, source, beam=4, stack_size=3)
    assert 1 <= len(got) <= 4
    keys = [(-c.score, c.tokens) for c in got]
    assert keys == sorted(keys)


def test_candidate_text():
    assert Candidate(("a", "b"), 0.0, ()).text == "a b"
