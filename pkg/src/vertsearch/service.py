"""Serving pipeline: cache -> L1 retrieval -> L2 rerank -> document grouping
-> optional answer extraction.

The service owns the only mutable shared state (the LRU query cache); the
index, scorer and saliency table are immutable, so concurrent requests only
synchronize on the cache's short critical sections.  Responses are
deterministic for a fixed index/model/config: the payload (everything except
timing) is byte-stable and identical whether or not it was served from cache.
"""

from __future__ import annotations

import logging
import re
import threading
import time
import uuid
from collections import OrderedDict
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

from .index import SearchIndex
from .rerank import (
    CrossScorer,
    ExternalScorerEndpoint,
    MODEL_FILE_HEADER,
    RemoteScorerError,
    remote_score,
    rerank,
)
from .retrieval import CandidateSet, SaliencyTable, retrieve, retrieve_fused
from .textproc import Analyzer, BpeVocabulary

logger = logging.getLogger(__name__)

DEFAULT_K = 60
MAX_K = 200
DEFAULT_CACHE_CAPACITY = 256
DEFAULT_ABSTAIN_THRESHOLD = 0.5
MAX_PASSAGES_PER_DOC = 3

_SENTENCE_RE = re.compile(r"(?<=[.!?])\s+")


class RequestError(ValueError):
    """Client-side error (HTTP 400 class)."""


class ServiceError(RuntimeError):
    """Internal failure (HTTP 500 class) with an opaque id for log correlation."""

    def __init__(self, message: str):
        self.error_id = uuid.uuid4().hex[:8]
        super().__init__(message)


@dataclass
class SearchRequest:
    query: str
    k: int = DEFAULT_K
    fusion: bool = False
    answers: bool = False
    no_cache: bool = False

    def validate(self) -> None:
        if not isinstance(self.query, str):
            raise RequestError("query must be a string")
        if not 1 <= self.k <= MAX_K:
            raise RequestError(f"k must be between 1 and {MAX_K}")


@dataclass(frozen=True)
class PassageHit:
    passage_id: str
    text: str
    l1_score: float
    l2_score: float

    def to_dict(self) -> dict:
        return {
            "passage_id": self.passage_id,
            "text": self.text,
            "l1_score": self.l1_score,
            "l2_score": self.l2_score,
        }


@dataclass(frozen=True)
class DocumentGroup:
    doc_id: str
    title: str
    passages: tuple[PassageHit, ...]

    def to_dict(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "title": self.title,
            "passages": [p.to_dict() for p in self.passages],
        }


@dataclass(frozen=True)
class Answer:
    passage_id: str
    start: int
    end: int
    confidence: float

    def to_dict(self) -> dict:
        return {
            "passage_id": self.passage_id,
            "start": self.start,
            "end": self.end,
            "confidence": self.confidence,
        }


@dataclass
class Timing:
    cache_hit: bool = False
    l1_ms: float = 0.0
    l2_ms: float = 0.0
    total_ms: float = 0.0

    def to_dict(self) -> dict:
        return {
            "cache_hit": self.cache_hit,
            "l1_ms": self.l1_ms,
            "l2_ms": self.l2_ms,
            "total_ms": self.total_ms,
        }


@dataclass
class SearchResult:
    query: str
    results: list[DocumentGroup]
    answer: Answer | None = None
    timing: Timing = field(default_factory=Timing)

    def payload_dict(self) -> dict:
        """Everything except timing; this is what caching must preserve exactly."""
        return {
            "query": self.query,
            "results": [g.to_dict() for g in self.results],
            "answer": self.answer.to_dict() if self.answer else None,
        }

    def to_dict(self) -> dict:
        payload = self.payload_dict()
        payload["timing"] = self.timing.to_dict()
        return payload


class LruCache:
    """Thread-safe LRU map; get refreshes recency, put evicts the oldest entry."""

    def __init__(self, capacity: int):
        if capacity < 0:
            raise ValueError("capacity must be >= 0")
        self.capacity = capacity
        self._data: OrderedDict[str, object] = OrderedDict()
        self._lock = threading.Lock()

    def __len__(self) -> int:
        with self._lock:
            return len(self._data)

    def get(self, key: str):
        with self._lock:
            if key not in self._data:
                return None
            self._data.move_to_end(key)
            return self._data[key]

    def put(self, key: str, value) -> None:
        if self.capacity == 0:
            return
        with self._lock:
            if key in self._data:
                self._data.move_to_end(key)
            self._data[key] = value
            while len(self._data) > self.capacity:
                self._data.popitem(last=False)

    def clear(self) -> None:
        with self._lock:
            self._data.clear()


def split_sentence_spans(text: str) -> list[tuple[int, int]]:
    """Character spans [start, end) of sentences in ``text``; spans never
    include the inter-sentence whitespace."""
    spans: list[tuple[int, int]] = []
    start = 0
    for match in _SENTENCE_RE.finditer(text):
        if text[start : match.start()].strip():
            spans.append((start, match.start()))
        start = match.end()
    if text[start:].strip():
        spans.append((start, len(text)))
    return spans


def extract_answer(
    query: str,
    passage_text: str,
    abstain_threshold: float,
    idf: Callable[[str], float] | None = None,
    analyzer=None,
) -> tuple[tuple[int, int], float] | None:
    """Baseline extractive answerer with an abstain option.

    Scores each sentence by idf-weighted query-term overlap in [0, 1] and
    returns the best sentence's char span plus its confidence, or None when
    the confidence does not exceed ``abstain_threshold``.  An external reading
    comprehension scorer can replace this behind the same contract.
    """
    analyzer = analyzer or Analyzer()
    idf = idf or (lambda _t: 1.0)
    q_terms = list(dict.fromkeys(analyzer.analyze(query)))
    if not passage_text:
        raise ValueError("passage text must be non-empty")
    total = sum(idf(t) for t in q_terms)
    best: tuple[tuple[int, int], float] | None = None
    for start, end in split_sentence_spans(passage_text):
        sentence_terms = set(analyzer.analyze(passage_text[start:end]))
        matched = sum(idf(t) for t in q_terms if t in sentence_terms)
        confidence = matched / total if total > 0 else 0.0
        if best is None or confidence > best[1]:
            best = ((start, end), confidence)
    if best is None or best[1] <= abstain_threshold:
        return None
    return best


@dataclass
class ServiceCounters:
    """Instrumentation: what the pipeline actually asked of the L1 layer."""

    l1_requests: list[dict] = field(default_factory=list)

    def record_plain(self, k: int) -> None:
        self.l1_requests.append({"mode": "bm25", "k": k})

    def record_fused(self, k_bm25: int, k_saliency: int) -> None:
        self.l1_requests.append({"mode": "fused", "k_bm25": k_bm25, "k_saliency": k_saliency})


class SearchService:
    """Backend pipeline behind the HTTP API; see module docstring."""

    def __init__(
        self,
        index: SearchIndex,
        scorer: CrossScorer | None = None,
        vocab: BpeVocabulary | None = None,
        saliency: SaliencyTable | None = None,
        cache_capacity: int = DEFAULT_CACHE_CAPACITY,
        abstain_threshold: float = DEFAULT_ABSTAIN_THRESHOLD,
        remote: ExternalScorerEndpoint | None = None,
        remote_fallback: bool = True,
        answer_extractor: Callable | None = None,
    ):
        if scorer is None and remote is None:
            raise ValueError("service needs a local scorer, a remote endpoint, or both")
        self.index = index
        self.scorer = scorer
        self.vocab = vocab
        self.saliency = saliency or SaliencyTable()
        self.cache = LruCache(cache_capacity)
        self.abstain_threshold = abstain_threshold
        self.remote = remote
        self.remote_fallback = remote_fallback
        self.answer_extractor = answer_extractor or extract_answer
        self.counters = ServiceCounters()

    # -- cache key ----------------------------------------------------------

    def cache_key(self, req: SearchRequest) -> str:
        terms = self.index.meta.analyzer.analyze(req.query)
        return f"{' '.join(terms)}|k={req.k}|f={int(req.fusion)}|a={int(req.answers)}"

    # -- pipeline stages ----------------------------------------------------

    def _l1(self, req: SearchRequest) -> CandidateSet:
        if req.fusion:
            k_bm25 = req.k // 2
            k_saliency = req.k - k_bm25
            self.counters.record_fused(k_bm25, k_saliency)
            return retrieve_fused(self.index, self.saliency, req.query, k_bm25, k_saliency)
        self.counters.record_plain(req.k)
        return retrieve(self.index, req.query, req.k)

    def _l2(self, req: SearchRequest, candidates: CandidateSet) -> list[tuple[str, float]]:
        if self.remote is not None:
            try:
                return self._l2_remote(req.query, candidates)
            except RemoteScorerError as exc:
                if not (self.remote_fallback and self.scorer is not None):
                    raise ServiceError(f"external scorer failed: {exc}") from exc
                logger.warning("external scorer failed (%s); falling back to local model", exc)
        assert self.scorer is not None
        return rerank(self.scorer, req.query, candidates, self.index, self.vocab)

    def _l2_remote(self, query: str, candidates: CandidateSet) -> list[tuple[str, float]]:
        assert self.remote is not None
        pids = candidates.passage_ids()
        pairs = []
        for pid in pids:
            passage = self.index.get_passage(pid)
            if passage is None:
                raise ServiceError(f"candidate passage not in index: {pid}")
            pairs.append((query, passage.text))
        scores: list[float] = []
        for start in range(0, len(pairs), self.remote.batch_limit):
            scores.extend(remote_score(self.remote, pairs[start : start + self.remote.batch_limit]))
        ranked = list(zip(pids, scores))
        ranked.sort(key=lambda item: (-item[1], item[0]))
        return ranked

    def _group(self, candidates: CandidateSet, ranked: list[tuple[str, float]]) -> list[DocumentGroup]:
        l1_by_pid = {c.passage_id: c.l1_score for c in candidates.candidates}
        groups: dict[str, list[PassageHit]] = {}
        order: list[str] = []
        for pid, l2 in ranked:
            passage = self.index.get_passage(pid)
            assert passage is not None
            hits = groups.setdefault(passage.doc_id, [])
            if not hits:
                order.append(passage.doc_id)
            if len(hits) < MAX_PASSAGES_PER_DOC:
                hits.append(PassageHit(pid, passage.text, l1_by_pid.get(pid, 0.0), l2))
        return [
            DocumentGroup(doc_id, self.index.doc_title(doc_id), tuple(groups[doc_id]))
            for doc_id in order
        ]

    def _answer(self, req: SearchRequest, ranked: list[tuple[str, float]]) -> Answer | None:
        if not req.answers or not ranked:
            return None
        top_pid = ranked[0][0]
        passage = self.index.get_passage(top_pid)
        assert passage is not None
        found = self.answer_extractor(
            req.query,
            passage.text,
            self.abstain_threshold,
            idf=self.index.meta.idf,
            analyzer=self.index.meta.analyzer,
        )
        if found is None:
            return None
        (start, end), confidence = found
        return Answer(top_pid, start, end, confidence)

    # -- entry point --------------------------------------------------------

    def handle_search(self, req: SearchRequest) -> SearchResult:
        req.validate()
        t_start = time.perf_counter()

        key = self.cache_key(req)
        if not req.no_cache:
            cached = self.cache.get(key)
            if cached is not None:
                assert isinstance(cached, SearchResult)
                total_ms = (time.perf_counter() - t_start) * 1000.0
                return replace(cached, timing=Timing(cache_hit=True, total_ms=total_ms))

        t0 = time.perf_counter()
        candidates = self._l1(req)
        l1_ms = (time.perf_counter() - t0) * 1000.0

        t0 = time.perf_counter()
        ranked = self._l2(req, candidates)
        l2_ms = (time.perf_counter() - t0) * 1000.0

        groups = self._group(candidates, ranked)
        answer = self._answer(req, ranked)
        total_ms = (time.perf_counter() - t_start) * 1000.0
        result = SearchResult(
            query=req.query,
            results=groups,
            answer=answer,
            timing=Timing(cache_hit=False, l1_ms=l1_ms, l2_ms=l2_ms, total_ms=total_ms),
        )
        self.cache.put(key, result)
        return result

    def health(self) -> dict:
        return {
            "index_generation": self.index.generation_id,
            "num_shards": self.index.meta.num_shards,
            "num_passages": self.index.meta.N,
            "model_version": MODEL_FILE_HEADER if self.scorer is not None else "remote",
            "cache_size": len(self.cache),
        }


# ---------------------------------------------------------------------------
# Service configuration (key=value text file).
# ---------------------------------------------------------------------------


@dataclass
class ServiceConfig:
    index_dir: str = ""
    model_path: str = ""
    saliency_path: str = ""
    vocab_path: str = ""
    cache_capacity: int = DEFAULT_CACHE_CAPACITY
    abstain_threshold: float = DEFAULT_ABSTAIN_THRESHOLD
    external_scorer_url: str = ""
    port: int = 8080


def load_config(path: str | Path) -> ServiceConfig:
    config = ServiceConfig()
    casts = {"cache_capacity": int, "port": int, "abstain_threshold": float}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            key = key.strip()
            if not sep or not hasattr(config, key):
                raise ValueError(f"{path}:{lineno}: unknown config line {line!r}")
            setattr(config, key, casts.get(key, str)(value.strip()))
    return config


def build_service(config: ServiceConfig) -> SearchService:
    from .index import load_index
    from .rerank import load_model
    from .retrieval import load_saliency
    from .textproc import load_vocab

    index = load_index(config.index_dir)
    scorer = load_model(config.model_path) if config.model_path else None
    saliency = load_saliency(config.saliency_path) if config.saliency_path else None
    vocab = load_vocab(config.vocab_path) if config.vocab_path else None
    remote = (
        ExternalScorerEndpoint(config.external_scorer_url) if config.external_scorer_url else None
    )
    return SearchService(
        index,
        scorer=scorer,
        vocab=vocab,
        saliency=saliency,
        cache_capacity=config.cache_capacity,
        abstain_threshold=config.abstain_threshold,
        remote=remote,
    )
