"""Independent reference implementations used to check the package.

Everything here is deliberately brute-force and shares no code path with the
package beyond the Analyzer contract (token rules are part of the public
interface).  Statistics are re-counted from raw text, rankings are produced
by scoring every passage, metrics come straight from their defining formulas.
"""

from __future__ import annotations

import math
import re
from collections import Counter

from vertsearch.textproc import Analyzer


# --- BM25: score-all-then-sort over raw (pid, text) pairs -------------------


def bm25_rank_all(
    texts: list[tuple[str, str]],
    query_terms: list[str],
    k1: float = 1.2,
    b: float = 0.75,
    analyzer: Analyzer | None = None,
) -> list[tuple[str, float]]:
    """Exhaustive BM25 ranking of every passage (zero scores included)."""
    analyzer = analyzer or Analyzer()
    tokenized = {pid: analyzer.analyze(text) for pid, text in texts}
    n = len(texts)
    if n == 0:
        return []
    avgdl = sum(len(t) for t in tokenized.values()) / n
    df: Counter = Counter()
    for terms in tokenized.values():
        df.update(set(terms))

    unique_q = list(dict.fromkeys(query_terms))
    scored = []
    for pid, _ in texts:
        terms = tokenized[pid]
        tf = Counter(terms)
        dl = len(terms)
        norm = k1 * (1.0 - b + b * dl / avgdl)
        score = 0.0
        for t in unique_q:
            if tf[t] == 0:
                continue
            idf = math.log(1.0 + (n - df[t] + 0.5) / (df[t] + 0.5))
            score += idf * tf[t] * (k1 + 1.0) / (tf[t] + norm)
        scored.append((pid, score))
    scored.sort(key=lambda item: (-item[1], item[0]))
    return scored


def bm25_top_k(texts, query_terms, k, **kw) -> list[tuple[str, float]]:
    return bm25_rank_all(texts, query_terms, **kw)[:k]


def bm25_matching_top_k(texts, query_terms, k, **kw) -> list[tuple[str, float]]:
    """Top-k restricted to passages that matched at least one query term."""
    return [hit for hit in bm25_rank_all(texts, query_terms, **kw) if hit[1] > 0.0][:k]


# --- BPE: pair-frequency training and step-by-step merge application --------


def bpe_train_reference(
    word_freqs: dict[str, int], max_merges: int, end_marker: str = "</w>"
) -> list[tuple[str, str]]:
    """Greedy merge list computed with from-scratch pair recounting each step."""
    table: list[tuple[list[str], int]] = []
    for word, freq in word_freqs.items():
        symbols = list(word)
        symbols[-1] += end_marker
        table.append((symbols, freq))

    merges: list[tuple[str, str]] = []
    while len(merges) < max_merges:
        counts: Counter = Counter()
        for symbols, freq in table:
            for a, b in zip(symbols, symbols[1:]):
                counts[(a, b)] += freq
        if not counts:
            break
        top = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[0]
        if top[1] < 2:
            break
        pair = top[0]
        merges.append(pair)
        merged_token = pair[0] + pair[1]
        new_table = []
        for symbols, freq in table:
            out = []
            i = 0
            while i < len(symbols):
                if i + 1 < len(symbols) and (symbols[i], symbols[i + 1]) == pair:
                    out.append(merged_token)
                    i += 2
                else:
                    out.append(symbols[i])
                    i += 1
            new_table.append((out, freq))
        table = new_table
    return merges


def bpe_apply_reference(word: str, merges: list[tuple[str, str]], end_marker: str = "</w>") -> list[str]:
    """Apply merges in training order, one full left-to-right pass per merge."""
    symbols = list(word)
    if not symbols:
        return []
    symbols[-1] += end_marker
    for a, b in merges:
        i = 0
        while i < len(symbols) - 1:
            if symbols[i] == a and symbols[i + 1] == b:
                symbols[i : i + 2] = [a + b]
            else:
                i += 1
    return symbols


# --- Greedy sentence packing for passage segmentation -----------------------

_SENT_BOUNDARY = re.compile(r"(?<=[.!?])\s+")


def greedy_split_reference(paragraph: str, max_terms: int, analyzer: Analyzer | None = None) -> list[str]:
    """Pack sentences left to right; a chunk closes when the next sentence
    would push it past max_terms, and a lone oversize sentence stays whole."""
    analyzer = analyzer or Analyzer()
    sentences = [s for s in _SENT_BOUNDARY.split(paragraph) if s.strip()]
    lengths = [len(analyzer.analyze(s)) for s in sentences]
    chunks: list[str] = []
    i = 0
    while i < len(sentences):
        j = i + 1
        total = lengths[i]
        while j < len(sentences) and total + lengths[j] <= max_terms:
            total += lengths[j]
            j += 1
        chunks.append(" ".join(sentences[i:j]))
        i = j
    return chunks


# --- Ranking metrics straight from the formulas ------------------------------


def dcg_reference(rels: list[int], k: int) -> float:
    return sum(rel / math.log2(rank + 1) for rank, rel in enumerate(rels[:k], start=1))


def ndcg_reference(ranked_ids: list[str], judged: dict[str, int], k: int) -> float | None:
    """None when the topic has no relevant judged item (excluded from means)."""
    ideal = sorted(judged.values(), reverse=True)
    idcg = dcg_reference(ideal, k)
    if idcg == 0:
        return None
    gains = [judged.get(item, 0) for item in ranked_ids]
    return dcg_reference(gains, k) / idcg


def precision_reference(ranked_ids: list[str], judged: dict[str, int], k: int) -> float:
    return sum(1 for item in ranked_ids[:k] if judged.get(item, 0) >= 1) / k


# --- Pairwise ranking AUC -----------------------------------------------------


def auc_reference(scored_labels: list[tuple[float, int]]) -> float | None:
    """P(score_pos > score_neg) over all positive/negative pairs; ties 0.5."""
    positives = [s for s, y in scored_labels if y == 1]
    negatives = [s for s, y in scored_labels if y == 0]
    if not positives or not negatives:
        return None
    wins = 0.0
    for p in positives:
        for n in negatives:
            if p > n:
                wins += 1.0
            elif p == n:
                wins += 0.5
    return wins / (len(positives) * len(negatives))


# --- LRU cache model ----------------------------------------------------------


class LruModel:
    """Plain dict + recency list; the slow obvious version of an LRU map."""

    def __init__(self, capacity: int):
        self.capacity = capacity
        self.values: dict[str, object] = {}
        self.recency: list[str] = []  # least recent first

    def get(self, key: str):
        if key not in self.values:
            return None
        self.recency.remove(key)
        self.recency.append(key)
        return self.values[key]

    def put(self, key: str, value) -> None:
        if self.capacity == 0:
            return
        if key in self.values:
            self.recency.remove(key)
        self.values[key] = value
        self.recency.append(key)
        while len(self.recency) > self.capacity:
            evicted = self.recency.pop(0)
            del self.values[evicted]

    def __len__(self) -> int:
        return len(self.values)


# --- Contiguous phrase matching ------------------------------------------------


def contains_contiguous(haystack: list[str], needle: tuple[str, ...]) -> bool:
    if not needle:
        return False
    joined = "\x00" + "\x00".join(haystack) + "\x00"
    target = "\x00" + "\x00".join(needle) + "\x00"
    return target in joined
