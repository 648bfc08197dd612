"""Self-supervised training triples: lexicon-filtered queries, annotated
positives, BM25-mined hard negatives, balanced 1:1.

The generator never needs human labels for the target domain: an existing
broad-coverage query set is filtered down to queries containing at least one
domain-lexicon phrase, their annotated relevant passages become positives,
and the top BM25 hits that are *not* annotated relevant become hard
negatives -- passages with heavy keyword overlap that a reranker must learn
to push below the truly relevant ones.
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import Passage, PassageField
from .index import SearchIndex, build_index
from .retrieval import retrieve
from .textproc import Analyzer

logger = logging.getLogger(__name__)

DEFAULT_TOP_N = 100
DEFAULT_SEED = 13


@dataclass
class DomainLexicon:
    """Set of analyzed domain phrases; multiword entries match contiguously."""

    entries: set[tuple[str, ...]] = field(default_factory=set)
    _by_first: dict[str, list[tuple[str, ...]]] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        self._reindex()

    def _reindex(self) -> None:
        self._by_first = {}
        for entry in self.entries:
            if entry:
                self._by_first.setdefault(entry[0], []).append(entry)

    def __len__(self) -> int:
        return len(self.entries)

    def matches(self, terms: Sequence[str]) -> bool:
        for i, term in enumerate(terms):
            for entry in self._by_first.get(term, ()):
                if tuple(terms[i : i + len(entry)]) == entry:
                    return True
        return False

    @classmethod
    def from_phrases(cls, phrases: Iterable[str], analyzer: Analyzer | None = None) -> "DomainLexicon":
        analyzer = analyzer or Analyzer()
        entries = set()
        for phrase in phrases:
            terms = tuple(analyzer.analyze(phrase))
            if terms:
                entries.add(terms)
        return cls(entries=entries)


def load_lexicon(path: str | Path, analyzer: Analyzer | None = None) -> DomainLexicon:
    with open(path, encoding="utf-8") as fh:
        return DomainLexicon.from_phrases((line.strip() for line in fh if line.strip()), analyzer)


@dataclass
class RelevancePair:
    query_id: str
    query_text: str
    positives: set[str] = field(default_factory=set)


@dataclass(frozen=True)
class TrainingTriple:
    query_id: str
    passage_id: str
    label: int


def filter_queries(
    queries: Iterable[tuple[str, str]],
    lexicon: DomainLexicon,
    analyzer: Analyzer | None = None,
) -> list[tuple[str, str]]:
    """Keep queries whose analyzed term sequence contains a lexicon entry as a
    contiguous subsequence (case-insensitive via the analyzer)."""
    if not lexicon.entries:
        raise ValueError("lexicon must be non-empty")
    analyzer = analyzer or Analyzer()
    return [(qid, text) for qid, text in queries if lexicon.matches(analyzer.analyze(text))]


def mine_negatives(pair: RelevancePair, index: SearchIndex, top_n: int = DEFAULT_TOP_N) -> list[str]:
    """Top BM25 hits excluding the query's positives, best first.

    Retrieves top_n + |positives| so that removing the positives still leaves
    the exact BM25 top-``top_n`` of the non-relevant passages.
    """
    hits = retrieve(index, pair.query_text, k=top_n + len(pair.positives))
    negatives = [c.passage_id for c in hits.candidates if c.passage_id not in pair.positives]
    return negatives[:top_n]


def balance_and_emit(
    pairs: Sequence[RelevancePair],
    negatives_by_query: dict[str, list[str]],
    seed: int = DEFAULT_SEED,
) -> list[TrainingTriple]:
    """Emit every positive with label 1 plus per-query seeded negative samples
    matching the positive count (or fewer if the mined list runs out),
    globally shuffled with the same seed.  Identical inputs and seed produce a
    byte-identical dataset."""
    triples: list[TrainingTriple] = []
    for pair in pairs:
        for pid in sorted(pair.positives):
            triples.append(TrainingTriple(pair.query_id, pid, 1))
        pool = negatives_by_query.get(pair.query_id, [])
        need = len(pair.positives)
        rng = random.Random(f"{seed}:{pair.query_id}")
        if len(pool) <= need:
            sampled = list(pool)
            if len(sampled) < need:
                logger.warning(
                    "query %s imbalanced: %d positives but only %d mined negatives",
                    pair.query_id, need, len(sampled),
                )
        else:
            sampled = rng.sample(pool, need)
        for pid in sampled:
            triples.append(TrainingTriple(pair.query_id, pid, 0))
    random.Random(seed).shuffle(triples)
    return triples


def write_triples(triples: Sequence[TrainingTriple], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for t in triples:
            fh.write(f"{t.query_id}\t{t.passage_id}\t{t.label}\n")


def read_triples(path: str | Path) -> list[TrainingTriple]:
    triples = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3 or parts[2] not in ("0", "1"):
                raise ValueError(f"{path}:{lineno}: expected 'qid<TAB>pid<TAB>label'")
            triples.append(TrainingTriple(parts[0], parts[1], int(parts[2])))
    return triples


# ---------------------------------------------------------------------------
# MARCO-style file plumbing for the end-to-end generator.
# ---------------------------------------------------------------------------


def read_id_text_tsv(path: str | Path) -> list[tuple[str, str]]:
    """Two-column ``id<TAB>text`` reader shared by query and collection files."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t", 1)
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'id<TAB>text'")
            rows.append((parts[0], parts[1]))
    return rows


def read_qrels_tsv(path: str | Path) -> dict[str, set[str]]:
    """``qid<TAB>0<TAB>pid<TAB>rel`` -> positives (rel > 0) per query."""
    positives: dict[str, set[str]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise ValueError(f"{path}:{lineno}: expected 'qid<TAB>0<TAB>pid<TAB>rel'")
            qid, _, pid, rel = parts
            if int(rel) > 0:
                positives.setdefault(qid, set()).add(pid)
    return positives


def collection_to_passages(collection: Iterable[tuple[str, str]]) -> list[Passage]:
    """Wrap an external (pid, text) collection as standalone single-passage docs."""
    return [
        Passage(passage_id=pid, doc_id=pid, text=text, ordinal=0, field=PassageField.ABSTRACT)
        for pid, text in collection
    ]


def generate_training_data(
    queries_path: str | Path,
    collection_path: str | Path,
    qrels_path: str | Path,
    lexicon_path: str | Path,
    out_path: str | Path,
    negatives: int = DEFAULT_TOP_N,
    seed: int = DEFAULT_SEED,
    num_shards: int = 1,
    analyzer: Analyzer | None = None,
) -> list[TrainingTriple]:
    """End-to-end generator: filter -> mine -> balance -> write triples TSV."""
    analyzer = analyzer or Analyzer()
    lexicon = load_lexicon(lexicon_path, analyzer)
    queries = read_id_text_tsv(queries_path)
    positives = read_qrels_tsv(qrels_path)
    collection = read_id_text_tsv(collection_path)

    retained = filter_queries(queries, lexicon, analyzer)
    pairs = [
        RelevancePair(qid, text, positives[qid])
        for qid, text in retained
        if positives.get(qid)
    ]
    logger.info(
        "retained %d/%d queries via lexicon, %d with annotated positives",
        len(retained), len(queries), len(pairs),
    )

    index = build_index(collection_to_passages(collection), num_shards=num_shards, analyzer=analyzer)
    negatives_by_query = {p.query_id: mine_negatives(p, index, top_n=negatives) for p in pairs}
    triples = balance_and_emit(pairs, negatives_by_query, seed=seed)
    write_triples(triples, out_path)
    return triples
