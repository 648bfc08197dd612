"""Shared fixtures: random corpora for oracle comparisons and a planted-relevance
corpus where true relevance is known by construction."""

from __future__ import annotations

import random
from dataclasses import dataclass

import pytest

from vertsearch.corpus import Passage, PassageField
from vertsearch.index import SearchIndex, build_index

WORD_POOL = [
    "virus", "protein", "cell", "therapy", "vaccine", "antibody", "trial",
    "patient", "dose", "gene", "receptor", "infection", "immune", "clinical",
    "lung", "blood", "tumor", "risk", "acute", "chronic", "the", "of", "in",
]


def make_passage(pid: str, doc_id: str, text: str, ordinal: int = 0) -> Passage:
    return Passage(
        passage_id=pid, doc_id=doc_id, text=text, ordinal=ordinal, field=PassageField.ABSTRACT
    )


def random_passages(rng: random.Random, n: int, words=WORD_POOL, min_len=3, max_len=25) -> list[Passage]:
    passages = []
    for i in range(n):
        length = rng.randint(min_len, max_len)
        text = " ".join(rng.choice(words) for _ in range(length))
        doc_id = f"doc{i // 2}"  # two passages per doc exercises co-location
        passages.append(make_passage(f"{doc_id}#{i % 2}", doc_id, text, ordinal=i % 2))
    return passages


def random_query_terms(rng: random.Random, words=WORD_POOL, max_terms=4) -> list[str]:
    return [rng.choice(words) for _ in range(rng.randint(1, max_terms))]


def texts_of(passages: list[Passage]) -> list[tuple[str, str]]:
    return [(p.passage_id, p.text) for p in passages]


# --- Planted-relevance corpus -------------------------------------------------
#
# Each query is three topic words "a b c".  Its relevant passages contain the
# phrase contiguously, exactly once per word.  Its hard negatives repeat two of
# the three words with inflated term frequency, scattered between fillers, so
# BM25 ranks them above the truly relevant passages while overlap/span features
# separate them cleanly.

FILLERS = ["alpha", "beta", "gamma", "delta", "epsilon", "zeta", "eta", "theta"]


@dataclass
class PlantedCorpus:
    passages: list[Passage]
    queries: dict[str, str]            # qid -> query text
    positives: dict[str, set[str]]     # qid -> relevant passage ids
    index: SearchIndex
    topic_words: list[str]


def build_planted_corpus(seed: int = 7, num_queries: int = 24, num_shards: int = 2) -> PlantedCorpus:
    rng = random.Random(seed)
    passages: list[Passage] = []
    queries: dict[str, str] = {}
    positives: dict[str, set[str]] = {}
    topic_words: list[str] = []

    def filler_words(n: int) -> list[str]:
        return [rng.choice(FILLERS) for _ in range(n)]

    counter = 0
    for q in range(num_queries):
        a, b, c = (f"t{q}a", f"t{q}b", f"t{q}c")
        topic_words += [a, b, c]
        qid = f"q{q}"
        queries[qid] = f"{a} {b} {c}"
        positives[qid] = set()
        for _ in range(2):
            words = filler_words(8) + [a, b, c] + filler_words(8)
            pid = f"p{counter}"
            counter += 1
            passages.append(make_passage(pid, pid, " ".join(words)))
            positives[qid].add(pid)
        for _ in range(4):
            words: list[str] = []
            for _ in range(5):
                words += [a] + filler_words(1) + [b] + filler_words(1)
            pid = f"p{counter}"
            counter += 1
            passages.append(make_passage(pid, pid, " ".join(words)))
    for _ in range(30):
        pid = f"p{counter}"
        counter += 1
        passages.append(make_passage(pid, pid, " ".join(filler_words(15))))

    index = build_index(passages, num_shards=num_shards)
    return PlantedCorpus(passages, queries, positives, index, topic_words)


@pytest.fixture(scope="session")
def planted() -> PlantedCorpus:
    return build_planted_corpus()
