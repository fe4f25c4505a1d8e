import pytest

from conceptkw.data import fig2_dir
from conceptkw.knowledge_base import ConceptTaxonomy, Entity, EntityLexicon, KnowledgeBase, load_kb_dir


def make_kb(concepts, edges, core, entities):
    """entities: (id, surface, concept, [aliases])"""
    tax = ConceptTaxonomy.build(concepts, edges, core)
    lex = EntityLexicon(Entity(eid, tuple(s.split()), c, tuple(tuple(a.split()) for a in aliases))
                        for eid, s, c, aliases in entities)
    return KnowledgeBase.from_parts(tax, lex)


@pytest.fixture(scope="session")
def surgery_kb():
    return make_kb(
        ["aesthetic_surgery", "eye_plastic", "body_contouring", "location", "city", "brand"],
        {"eye_plastic": ["aesthetic_surgery"], "body_contouring": ["aesthetic_surgery"], "city": ["location"]},
        ["aesthetic_surgery", "location"],
        [
            ("e_dbl_eyelid", "double eyelid surgery", "eye_plastic", ["double-fold eyelid operation"]),
            ("e_lipo", "liposuction", "body_contouring", ["lipo"]),
            ("e_rhino", "rhinoplasty", "aesthetic_surgery", []),
            ("e_denver", "denver", "city", []),
            ("e_la", "los angeles", "city", []),
            ("e_ny", "new york", "city", []),
            ("e_nyc", "new york city", "city", []),
            ("e_dodge", "dodge", "brand", []),
        ],
    )


@pytest.fixture(scope="session")
def fig2():
    return fig2_dir()


@pytest.fixture(scope="session")
def fig2_kb(fig2):
    return load_kb_dir(fig2 / "kb")


class WorldArtifacts:
    """Default synthetic world with a trained conceptual model and repository."""

    def __init__(self, seed=7):
        from conceptkw.pattern_corpus import build_parallel_patterns
        from conceptkw.repository import build_clusters, build_repository
        from conceptkw.translation import train_model
        from conceptkw.world import World, WorldConfig

        self.world = World(WorldConfig(seed=seed))
        self.kb = self.world.kb
        self.pattern_pairs = build_parallel_patterns(self.world.paraphrase_pairs(), self.kb)
        self.model = train_model(self.pattern_pairs)
        keywords = self.world.keywords()
        self.repo, self.trie = build_repository(keywords, self.kb)
        self.clusters = build_clusters(self.world.k2k_pairs(keywords), self.repo)


@pytest.fixture(scope="session")
def world_artifacts():
    return WorldArtifacts()


# -- acceptance summary -------------------------------------------------------------

ACCEPTANCE_RESULTS: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def acceptance():
    """Record one criterion outcome; the line is printed in the terminal summary."""
    def record(number: int, passed: bool, detail: str) -> None:
        ACCEPTANCE_RESULTS[number] = (passed, detail)
        print(f"criterion {number}: {'PASS' if passed else 'FAIL'} {detail}")
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_RESULTS):
        passed, detail = ACCEPTANCE_RESULTS[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
