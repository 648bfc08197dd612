"""Sharded inverted index over passages with BM25 scoring.

Each passage lives in exactly one shard, assigned by a stable hash of its
parent document id so all passages of a document are co-located.  Global
statistics (passage count, document frequencies, average length) are computed
in a finalize pass and shared by every shard, which makes multi-shard and
single-shard builds score identically: a scatter-gather search merges
per-shard top-k lists into the exact global top-k.

Scoring is Okapi BM25 with the non-negative idf variant::

    idf(t)  = ln(1 + (N - df + 0.5) / (df + 0.5))
    score   = sum over unique query terms of
              idf(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * dl / avgdl))

Ranking is total: ties are broken by ascending passage id, and when k exceeds
the number of matching passages the remainder is filled with zero-score
passages in ascending passage-id order.
"""

from __future__ import annotations

import hashlib
import json
import math
import uuid
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from .corpus import Passage, PassageField, encode_passage_id
from .textproc import Analyzer

DEFAULT_K1 = 1.2
DEFAULT_B = 0.75
DEFAULT_NUM_SHARDS = 30

INDEX_FILE_VERSION = "v1"
_META_MAGIC = "vertsearch-index"
_CHECKSUM_PREFIX = "checksum "


class IndexBuildError(ValueError):
    pass


class IndexLoadError(ValueError):
    pass


class ShardSearchError(RuntimeError):
    """One or more shards failed during scatter-gather."""

    def __init__(self, failed_shards: list[int], causes: list[Exception] | None = None):
        self.failed_shards = failed_shards
        self.causes = causes or []
        super().__init__(f"shard search failed for shards {failed_shards}")


def stable_doc_hash(doc_id: str) -> int:
    """Process-independent 64-bit hash used for shard assignment."""
    digest = hashlib.blake2b(doc_id.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def shard_for_doc(doc_id: str, num_shards: int) -> int:
    return stable_doc_hash(doc_id) % num_shards


@dataclass(frozen=True)
class StoredPassage:
    passage_id: str
    doc_id: str
    field: str
    dl: int
    text: str


@dataclass
class PostingList:
    term: str
    entries: list[tuple[int, int]] = field(default_factory=list)  # (local id, tf), id-sorted
    df: int = 0  # global document frequency, set at finalize


@dataclass
class IndexMeta:
    """Global statistics shared by all shards."""

    N: int = 0
    avgdl: float = 0.0
    dl: dict[str, int] = field(default_factory=dict)
    df: dict[str, int] = field(default_factory=dict)
    k1: float = DEFAULT_K1
    b: float = DEFAULT_B
    num_shards: int = 1
    analyzer: Analyzer = field(default_factory=Analyzer)

    def idf(self, term: str) -> float:
        df = self.df.get(term, 0)
        return math.log(1.0 + (self.N - df + 0.5) / (df + 0.5))


class IndexShard:
    """One disjoint partition of the index: postings plus the passage store."""

    def __init__(self, shard_id: int):
        self.shard_id = shard_id
        self.postings: dict[str, PostingList] = {}
        self.passages: list[StoredPassage] = []
        self._by_pid: dict[str, int] = {}
        self._sorted_pids: list[str] | None = None

    def __len__(self) -> int:
        return len(self.passages)

    def add(self, passage: Passage, terms: Sequence[str]) -> None:
        local_id = len(self.passages)
        stored = StoredPassage(
            passage_id=passage.passage_id,
            doc_id=passage.doc_id,
            field=passage.field.value if isinstance(passage.field, PassageField) else str(passage.field),
            dl=len(terms),
            text=passage.text,
        )
        self.passages.append(stored)
        self._by_pid[passage.passage_id] = local_id
        for term, tf in sorted(Counter(terms).items()):
            self.postings.setdefault(term, PostingList(term)).entries.append((local_id, tf))

    def finalize(self) -> None:
        self._sorted_pids = sorted(p.passage_id for p in self.passages)

    def get(self, passage_id: str) -> StoredPassage | None:
        local = self._by_pid.get(passage_id)
        return self.passages[local] if local is not None else None

    @property
    def sorted_pids(self) -> list[str]:
        if self._sorted_pids is None:
            self.finalize()
        return self._sorted_pids  # type: ignore[return-value]


def _unique_terms(query_terms: Sequence[str]) -> list[str]:
    return list(dict.fromkeys(query_terms))


def bm25_score(meta: IndexMeta, query_terms: Sequence[str], passage: StoredPassage) -> float:
    """BM25 score of one indexed passage; repeated query terms count once."""
    if meta.avgdl <= 0:
        return 0.0
    tf_map = Counter(meta.analyzer.analyze(passage.text))
    norm = meta.k1 * (1.0 - meta.b + meta.b * passage.dl / meta.avgdl)
    score = 0.0
    for term in _unique_terms(query_terms):
        tf = tf_map.get(term, 0)
        if tf == 0:
            continue
        score += meta.idf(term) * tf * (meta.k1 + 1.0) / (tf + norm)
    return score


def _score_matches(shard: IndexShard, meta: IndexMeta, query_terms: Sequence[str]) -> dict[int, float]:
    """BM25 scores of every matching passage in the shard, keyed by local id.

    Contributions accumulate in unique-query-term order so the floating-point
    result is identical to :func:`bm25_score` evaluated passage by passage.
    """
    scores: dict[int, float] = {}
    k1, b, avgdl = meta.k1, meta.b, meta.avgdl
    for term in _unique_terms(query_terms):
        plist = shard.postings.get(term)
        if plist is None:
            continue
        idf = meta.idf(term)
        for local_id, tf in plist.entries:
            dl = shard.passages[local_id].dl
            norm = k1 * (1.0 - b + b * dl / avgdl)
            contribution = idf * tf * (k1 + 1.0) / (tf + norm)
            scores[local_id] = scores.get(local_id, 0.0) + contribution
    return scores


def shard_search(
    shard: IndexShard, meta: IndexMeta, query_terms: Sequence[str], k: int
) -> list[tuple[str, float]]:
    """Exact top-k of one shard: score descending, ties by ascending passage id.

    When fewer than k passages match, the list is padded with zero-score
    passages in ascending passage-id order, so k >= shard size returns the
    whole shard fully ordered.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    scores = _score_matches(shard, meta, query_terms)
    ranked = sorted(
        ((shard.passages[lid].passage_id, s) for lid, s in scores.items()),
        key=lambda item: (-item[1], item[0]),
    )[:k]
    if len(ranked) < k:
        # Zero-score padding: any matched passage scores > 0, so padding sorts
        # strictly after every match.
        matched = {shard.passages[lid].passage_id for lid in scores}
        fill = k - len(ranked)
        for pid in shard.sorted_pids:
            if fill == 0:
                break
            if pid not in matched:
                ranked.append((pid, 0.0))
                fill -= 1
    return ranked


def scatter_gather(
    shards: Sequence[IndexShard],
    meta: IndexMeta,
    query_terms: Sequence[str],
    k: int,
    parallel: bool = True,
) -> list[tuple[str, float]]:
    """Fan a query out to every shard and merge into the exact global top-k.

    Raises :class:`ShardSearchError` naming every failed shard; there are no
    silent partial results.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    results: list[list[tuple[str, float]]] = [[] for _ in shards]
    failures: list[tuple[int, Exception]] = []
    if parallel and len(shards) > 1:
        with ThreadPoolExecutor(max_workers=min(len(shards), 16)) as pool:
            futures = {
                pool.submit(shard_search, shard, meta, query_terms, k): i
                for i, shard in enumerate(shards)
            }
            for future, i in futures.items():
                try:
                    results[i] = future.result()
                except Exception as exc:  # noqa: BLE001 - collected and re-raised
                    failures.append((shards[i].shard_id, exc))
    else:
        for i, shard in enumerate(shards):
            try:
                results[i] = shard_search(shard, meta, query_terms, k)
            except Exception as exc:  # noqa: BLE001
                failures.append((shard.shard_id, exc))
    if failures:
        failures.sort(key=lambda f: f[0])
        raise ShardSearchError([sid for sid, _ in failures], [e for _, e in failures])
    merged = [hit for shard_hits in results for hit in shard_hits]
    merged.sort(key=lambda item: (-item[1], item[0]))
    return merged[:k]


class SearchIndex:
    """Immutable searchable index: shared meta plus shards, with O(1) passage lookup."""

    def __init__(self, meta: IndexMeta, shards: list[IndexShard]):
        self.meta = meta
        self.shards = shards
        self.generation_id = uuid.uuid4().hex[:12]

    def search(self, query_terms: Sequence[str], k: int, parallel: bool = True) -> list[tuple[str, float]]:
        return scatter_gather(self.shards, self.meta, query_terms, k, parallel=parallel)

    def shard_of(self, doc_id: str) -> IndexShard:
        return self.shards[shard_for_doc(doc_id, len(self.shards))]

    def get_passage(self, passage_id: str) -> StoredPassage | None:
        doc_id = passage_id.rpartition("#")[0] or passage_id
        stored = self.shard_of(doc_id).get(passage_id)
        if stored is None:
            # Ids that do not follow the doc#ordinal convention hash by themselves.
            stored = self.shard_of(passage_id).get(passage_id)
        return stored

    def doc_title(self, doc_id: str) -> str:
        first = self.shard_of(doc_id).get(encode_passage_id(doc_id, 0))
        if first is not None and first.field == PassageField.TITLE.value:
            return first.text
        return ""

    def all_passages(self) -> Iterator[StoredPassage]:
        for shard in self.shards:
            yield from shard.passages


def build_index(
    passages: Iterable[Passage],
    num_shards: int = 1,
    analyzer: Analyzer | None = None,
    k1: float = DEFAULT_K1,
    b: float = DEFAULT_B,
) -> SearchIndex:
    """Index a passage stream into ``num_shards`` shards and finalize global stats.

    Raises :class:`IndexBuildError` on a duplicate passage id.
    """
    if num_shards < 1:
        raise IndexBuildError("num_shards must be >= 1")
    analyzer = analyzer or Analyzer()
    shards = [IndexShard(i) for i in range(num_shards)]
    meta = IndexMeta(k1=k1, b=b, num_shards=num_shards, analyzer=analyzer)

    seen: set[str] = set()
    total_dl = 0
    for passage in passages:
        if passage.passage_id in seen:
            raise IndexBuildError(f"duplicate passage id: {passage.passage_id}")
        seen.add(passage.passage_id)
        terms = analyzer.analyze(passage.text)
        shards[shard_for_doc(passage.doc_id, num_shards)].add(passage, terms)
        meta.dl[passage.passage_id] = len(terms)
        total_dl += len(terms)

    meta.N = len(seen)
    meta.avgdl = total_dl / meta.N if meta.N else 0.0
    df: dict[str, int] = {}
    for shard in shards:
        shard.finalize()
        for term, plist in shard.postings.items():
            df[term] = df.get(term, 0) + len(plist.entries)
    meta.df = df
    for shard in shards:
        for term, plist in shard.postings.items():
            plist.df = df[term]
    return SearchIndex(meta, shards)


# ---------------------------------------------------------------------------
# Persistence: text files, each ending in a `checksum <hex>` line over the
# preceding bytes (blake2b-64).  Version tag checked before anything loads.
# ---------------------------------------------------------------------------


def _checksum(payload: str) -> str:
    return hashlib.blake2b(payload.encode("utf-8"), digest_size=8).hexdigest()


def _write_checksummed(path: Path, payload: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(payload)
        fh.write(f"{_CHECKSUM_PREFIX}{_checksum(payload)}\n")


def _read_checksummed(path: Path) -> str:
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IndexLoadError(f"cannot read {path}: {exc}") from exc
    head, sep, tail = raw.rstrip("\n").rpartition("\n")
    last_line = tail if sep else raw.rstrip("\n")
    payload = head + "\n" if sep else ""
    if not last_line.startswith(_CHECKSUM_PREFIX):
        raise IndexLoadError(f"{path}: missing checksum line")
    expected = last_line[len(_CHECKSUM_PREFIX):]
    if _checksum(payload) != expected:
        raise IndexLoadError(f"{path}: checksum mismatch")
    return payload


def save_index(index: SearchIndex, directory: str | Path) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    meta = index.meta
    stopwords = ",".join(sorted(meta.analyzer.stopwords))
    meta_lines = [
        f"{_META_MAGIC} {INDEX_FILE_VERSION}",
        f"N {meta.N}",
        f"avgdl {meta.avgdl!r}",
        f"k1 {meta.k1!r}",
        f"b {meta.b!r}",
        f"num_shards {meta.num_shards}",
        f"analyzer lowercase={int(meta.analyzer.lowercase)} stopwords={stopwords}",
    ]
    _write_checksummed(directory / "meta", "\n".join(meta_lines) + "\n")

    for shard in index.shards:
        post_lines = [f"shard {shard.shard_id}"]
        for term in sorted(shard.postings):
            plist = shard.postings[term]
            entries = ",".join(f"{lid}:{tf}" for lid, tf in plist.entries)
            post_lines.append(f"{term}\t{plist.df}\t{entries}")
        _write_checksummed(
            directory / f"shard-{shard.shard_id}.postings", "\n".join(post_lines) + "\n"
        )

        store_lines = [f"shard {shard.shard_id}"]
        for lid, p in enumerate(shard.passages):
            store_lines.append(
                json.dumps([lid, p.passage_id, p.doc_id, p.field, p.dl, p.text], ensure_ascii=False)
            )
        _write_checksummed(
            directory / f"shard-{shard.shard_id}.store", "\n".join(store_lines) + "\n"
        )


def load_index(directory: str | Path) -> SearchIndex:
    """Load an index directory; result reproduces search output bit-for-bit."""
    directory = Path(directory)
    meta_payload = _read_checksummed(directory / "meta")
    lines = meta_payload.splitlines()
    if not lines:
        raise IndexLoadError(f"{directory / 'meta'}: empty")
    magic = lines[0].split()
    if len(magic) != 2 or magic[0] != _META_MAGIC:
        raise IndexLoadError(f"{directory / 'meta'}: not an index meta file")
    if magic[1] != INDEX_FILE_VERSION:
        raise IndexLoadError(
            f"{directory / 'meta'}: unsupported index version {magic[1]!r}"
        )
    fields = dict(line.split(" ", 1) for line in lines[1:])
    lowercase = True
    stopwords: frozenset[str] = frozenset()
    for part in fields.get("analyzer", "").split():
        key, _, value = part.partition("=")
        if key == "lowercase":
            lowercase = value == "1"
        elif key == "stopwords" and value:
            stopwords = frozenset(value.split(","))
    meta = IndexMeta(
        N=int(fields["N"]),
        avgdl=float(fields["avgdl"]),
        k1=float(fields["k1"]),
        b=float(fields["b"]),
        num_shards=int(fields["num_shards"]),
        analyzer=Analyzer(lowercase=lowercase, stopwords=stopwords),
    )

    shards: list[IndexShard] = []
    for shard_id in range(meta.num_shards):
        shard = IndexShard(shard_id)
        store_payload = _read_checksummed(directory / f"shard-{shard_id}.store")
        store_lines = store_payload.splitlines()
        if not store_lines or store_lines[0] != f"shard {shard_id}":
            raise IndexLoadError(f"shard-{shard_id}.store: bad shard header")
        for line in store_lines[1:]:
            lid, passage_id, doc_id, fld, dl, text = json.loads(line)
            stored = StoredPassage(passage_id, doc_id, fld, dl, text)
            if lid != len(shard.passages):
                raise IndexLoadError(f"shard-{shard_id}.store: out-of-order local ids")
            shard.passages.append(stored)
            shard._by_pid[passage_id] = lid
            meta.dl[passage_id] = dl

        post_payload = _read_checksummed(directory / f"shard-{shard_id}.postings")
        post_lines = post_payload.splitlines()
        if not post_lines or post_lines[0] != f"shard {shard_id}":
            raise IndexLoadError(f"shard-{shard_id}.postings: bad shard header")
        for line in post_lines[1:]:
            term, df_str, entries_str = line.split("\t")
            plist = PostingList(term, df=int(df_str))
            if entries_str:
                for pair in entries_str.split(","):
                    lid_str, tf_str = pair.split(":")
                    plist.entries.append((int(lid_str), int(tf_str)))
            shard.postings[term] = plist
            meta.df[term] = plist.df
        shard.finalize()
        shards.append(shard)
    return SearchIndex(meta, shards)
