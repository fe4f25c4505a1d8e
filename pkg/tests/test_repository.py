import threading

from hypothesis import given, settings, strategies as st

from conceptkw.conceptualizer import conceptualize
from conceptkw.knowledge_base import tokenize
from conceptkw.repository import (CacheEntry, CacheHolder, LookupCache, UnionFind, build_cache, build_clusters,
                                  build_repository, expand_clusters, frequent_patterns, join_filter,
                                  read_k2k_pairs, read_keywords, write_keywords)
from conceptkw.translation import decode_constrained


def kws(*texts):
    return [tokenize(t) for t in texts]


def test_fig2_keyword_indexed(surgery_kb):
    repo, trie = build_repository(kws("the price of liposuction in new york"), surgery_kb)
    pat = tokenize("the price of [aesthetic_surgery] in [location]")
    assert pat in trie
    assert repo.pattern_index[pat] == kws("the price of liposuction in new york")


def test_empty_repository(tmp_path, surgery_kb):
    (tmp_path / "k.txt").write_text("")
    repo, trie = build_repository(tmp_path / "k.txt", surgery_kb)
    assert len(repo) == 0 and len(trie) == 0


def test_shared_pattern_and_dedup(surgery_kb):
    repo, trie = build_repository(kws("liposuction in denver", "rhinoplasty in los angeles",
                                      "liposuction in denver"), surgery_kb)
    assert len(repo) == 2 and len(trie) == 1
    assert repo.pattern_index[tokenize("[aesthetic_surgery] in [location]")] == \
        kws("liposuction in denver", "rhinoplasty in los angeles")


def test_trie_equals_index(world_artifacts):
    assert set(world_artifacts.trie) == set(world_artifacts.repo.pattern_index)
    for kw in world_artifacts.repo.keywords[:200]:
        assert conceptualize(kw, world_artifacts.kb).tokens in world_artifacts.repo.pattern_index


def test_keyword_io(tmp_path):
    write_keywords(kws("a b", "c"), tmp_path / "k.txt")
    assert read_keywords(tmp_path / "k.txt") == kws("a b", "c")


def _repo(surgery_kb, n):
    return build_repository([(f"k{i}",) for i in range(n)], surgery_kb)[0]


def test_clusters_transitive(surgery_kb):
    repo = _repo(surgery_kb, 3)
    c = build_clusters([(("k0",), ("k1",)), (("k1",), ("k2",))], repo)
    assert c.multi_member() == [[("k0",), ("k1",), ("k2",)]]


def test_clusters_none(surgery_kb):
    c = build_clusters([], _repo(surgery_kb, 3))
    assert c.multi_member() == [] and c.cluster(("k1",)) == [("k1",)]


def test_two_components(surgery_kb):
    c = build_clusters([(("k0",), ("k1",)), (("k2",), ("k3",)), (("k3",), ("k4",))], _repo(surgery_kb, 5))
    assert len(c.multi_member()) == 2


def test_unknown_keywords_dropped(surgery_kb):
    c = build_clusters([(("k0",), ("zz",))], _repo(surgery_kb, 2))
    assert c.dropped == [(("k0",), ("zz",))] and c.multi_member() == []


def test_k2k_io(tmp_path):
    (tmp_path / "p.tsv").write_text("a b\tc\n# x\n")
    assert read_k2k_pairs(tmp_path / "p.tsv") == [(("a", "b"), ("c",))]


def test_join_filter(surgery_kb):
    repo = build_repository(kws("the price of liposuction in new york"), surgery_kb)[0]
    cands = kws("the price of liposuction in new york", "what is the price of liposuction in new york")
    assert join_filter(cands, repo) == kws("the price of liposuction in new york")
    assert join_filter([], repo) == []
    assert join_filter(cands[:1] * 3, repo) == cands[:1]


def test_expand_clusters(surgery_kb):
    repo = _repo(surgery_kb, 5)
    c = build_clusters([(("k0",), ("k1",)), (("k1",), ("k2",))], repo)
    assert expand_clusters([("k0",)], c) == [("k0",), ("k1",), ("k2",)]
    assert expand_clusters([("k4",)], c) == [("k4",)]
    assert expand_clusters([("k2",), ("k0",)], c) == [("k2",), ("k0",), ("k1",)]


@st.composite
def pair_graphs(draw):
    n = draw(st.integers(1, 12))
    pairs = draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=15))
    return n, pairs


def components(n, pairs):
    adj = {i: set() for i in range(n)}
    for a, b in pairs:
        adj[a].add(b)
        adj[b].add(a)
    seen, comps = set(), []
    for i in range(n):
        if i in seen:
            continue
        stack, comp = [i], set()
        while stack:
            x = stack.pop()
            if x in comp:
                continue
            comp.add(x)
            stack.extend(adj[x])
        seen |= comp
        comps.append(comp)
    return comps


@settings(max_examples=200, deadline=None)
@given(pair_graphs())
def test_clusters_equal_connected_components(surgery_kb, graph):
    n, pairs = graph
    repo = _repo(surgery_kb, n)
    c = build_clusters([((f"k{a}",), (f"k{b}",)) for a, b in pairs], repo)
    expected = {frozenset((f"k{i}",) for i in comp) for comp in components(n, pairs) if len(comp) > 1}
    assert {frozenset(m) for m in c.multi_member()} == expected
    # disjoint cover
    seen = [k for m in c.members for k in m]
    assert len(seen) == len(set(seen))


@settings(max_examples=200, deadline=None)
@given(pair_graphs(), st.lists(st.integers(0, 11), max_size=6))
def test_expand_idempotent_and_join_subset(surgery_kb, graph, picks):
    n, pairs = graph
    repo = _repo(surgery_kb, n)
    c = build_clusters([((f"k{a}",), (f"k{b}",)) for a, b in pairs], repo)
    inp = [(f"k{i % n}",) for i in picks]
    once = expand_clusters(inp, c)
    assert expand_clusters(once, c) == once
    assert len(once) == len(set(once))
    assert set(join_filter(inp + [("nope",)], repo)) <= set(repo.keywords)


def test_union_find_path_compression():
    uf = UnionFind()
    for i in range(5):
        uf.union(i, i + 1)
    assert len({uf.find(i) for i in range(6)}) == 1


# -- cache ------------------------------------------------------------------------

def test_cache_round_trip(tmp_path):
    cache = LookupCache({("a", "[x]"): [CacheEntry(("b",), -1.25), CacheEntry(("c", "d"), -2.0)],
                         ("e",): []}, generation=4)
    cache.save(tmp_path / "c.tsv")
    again = LookupCache.load(tmp_path / "c.tsv")
    assert again.generation == 4
    assert again.get(("a", "[x]")) == cache.get(("a", "[x]"))
    assert again.get(("e",)) == ()
    assert again.get(("zz",)) is None


def test_frequent_patterns_ranked(surgery_kb):
    qs = kws("liposuction in denver", "rhinoplasty in denver", "cheap flights", "cheap flights", "cheap flights",
             "x")
    assert frequent_patterns(qs, surgery_kb, 2) == [tokenize("cheap flights"),
                                                    tokenize("[aesthetic_surgery] in [location]")]


def test_cache_coherent_with_decoder(world_artifacts):
    a = world_artifacts
    log = a.world.query_log(300, "cache-test")
    cache = build_cache(log, a.kb, a.model, a.trie, top_k=25)
    assert len(cache) == 25
    for pat, entries in cache.items():
        fresh = decode_constrained(a.model, pat, a.trie)
        assert [(e.target, e.score) for e in entries] == [(c.tokens, c.score) for c in fresh]


def test_cache_holder_swap_is_atomic():
    old = LookupCache({("a",): [CacheEntry(("x",), 0.0)]}, 1)
    new = LookupCache({("a",): [CacheEntry(("y",), 0.0)]}, 2)
    holder = CacheHolder(old)
    seen = []

    def reader():
        for _ in range(2000):
            c = holder.current
            seen.append((c.generation, c.get(("a",))[0].target))

    t = threading.Thread(target=reader)
    t.start()
    assert holder.swap(new) is old
    t.join()
    assert set(seen) <= {(1, ("x",)), (2, ("y",))}
    assert holder.current.generation == 2
