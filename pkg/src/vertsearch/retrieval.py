"""First-stage retrieval: BM25 top-K candidates, optionally fused with a
static per-document saliency table.

Plain retrieval keeps only passages that matched at least one query term
(BM25 gives every match a strictly positive score), so a query whose terms
appear nowhere yields an empty candidate set rather than arbitrary padding.

Fusion mirrors an external importance-ranked source: the top documents by
saliency -- gated on having at least one query-term match -- each contribute
their best-BM25 passage, and that set is unioned with the plain BM25 top list
(BM25 provenance wins on overlap).  The downstream reranker owns the final
order of the union.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .index import SearchIndex, _score_matches

DEFAULT_K = 60
DEFAULT_K_BM25 = 30
DEFAULT_K_SALIENCY = 30


class Provenance(str, Enum):
    BM25 = "bm25"
    SALIENCY = "saliency"


@dataclass(frozen=True)
class Candidate:
    passage_id: str
    l1_score: float
    provenance: Provenance = Provenance.BM25


@dataclass
class CandidateSet:
    query: str
    candidates: list[Candidate] = field(default_factory=list)
    k_requested: int = DEFAULT_K

    def __len__(self) -> int:
        return len(self.candidates)

    def passage_ids(self) -> list[str]:
        return [c.passage_id for c in self.candidates]


@dataclass
class SaliencyTable:
    """Static per-document saliency scores; a missing doc id means no saliency."""

    scores: dict[str, float] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.scores)

    def get(self, doc_id: str) -> float | None:
        return self.scores.get(doc_id)


def load_saliency(path: str | Path) -> SaliencyTable:
    """Read a two-column ``doc_id<TAB>score`` file."""
    scores: dict[str, float] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'doc_id<TAB>score'")
            try:
                scores[parts[0]] = float(parts[1])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: bad score {parts[1]!r}") from exc
    return SaliencyTable(scores)


def retrieve(index: SearchIndex, query: str, k: int = DEFAULT_K) -> CandidateSet:
    """BM25 top-k candidates for a query; empty analyzed query yields no candidates."""
    if k < 1:
        raise ValueError("k must be >= 1")
    terms = index.meta.analyzer.analyze(query)
    if not terms:
        return CandidateSet(query=query, k_requested=k)
    hits = index.search(terms, k)
    candidates = [Candidate(pid, score) for pid, score in hits if score > 0.0]
    return CandidateSet(query=query, candidates=candidates, k_requested=k)


def _all_matches(index: SearchIndex, terms: list[str]) -> list[tuple[str, str, float]]:
    """Every matching passage across shards as (passage_id, doc_id, score)."""
    out: list[tuple[str, str, float]] = []
    for shard in index.shards:
        for local_id, score in _score_matches(shard, index.meta, terms).items():
            stored = shard.passages[local_id]
            out.append((stored.passage_id, stored.doc_id, score))
    return out


def retrieve_fused(
    index: SearchIndex,
    saliency: SaliencyTable,
    query: str,
    k_bm25: int = DEFAULT_K_BM25,
    k_saliency: int = DEFAULT_K_SALIENCY,
) -> CandidateSet:
    """Union of the BM25 top-k with the best passages of the most salient
    query-matching documents.

    Order: BM25 block first (its own ranking), then the saliency remainder by
    descending saliency (ties by ascending doc id).
    """
    base = retrieve(index, query, k_bm25)
    k_total = k_bm25 + k_saliency
    terms = index.meta.analyzer.analyze(query)
    if not terms or not saliency.scores:
        return CandidateSet(query=query, candidates=list(base.candidates), k_requested=k_total)

    best_per_doc: dict[str, tuple[float, str]] = {}
    for pid, doc_id, score in _all_matches(index, terms):
        cur = best_per_doc.get(doc_id)
        if cur is None or score > cur[0] or (score == cur[0] and pid < cur[1]):
            best_per_doc[doc_id] = (score, pid)

    eligible = [doc_id for doc_id in best_per_doc if saliency.get(doc_id) is not None]
    eligible.sort(key=lambda d: (-saliency.scores[d], d))
    top_salient = eligible[:k_saliency]

    fused = list(base.candidates)
    present = {c.passage_id for c in fused}
    for doc_id in top_salient:
        score, pid = best_per_doc[doc_id]
        if pid in present:
            continue  # BM25 provenance wins on overlap
        fused.append(Candidate(pid, score, Provenance.SALIENCY))
        present.add(pid)
    return CandidateSet(query=query, candidates=fused, k_requested=k_total)
