"""TREC-style retrieval evaluation: qrels and run-file I/O, NDCG@k and P@k.

Conventions (stated in every report header so comparisons are explicit):
linear gain, rel_i / log2(i+1) discounting, unjudged items count as
non-relevant, and topics with no relevant judged item are excluded from the
means.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

GAIN_CONVENTION = "linear"

Qrels = dict[str, dict[str, int]]


class RunFormatError(ValueError):
    pass


@dataclass(frozen=True)
class RunEntry:
    item_id: str
    rank: int
    score: float
    tag: str = "run"


Run = dict[str, list[RunEntry]]


def read_qrels(path: str | Path) -> Qrels:
    """``topic_id 0 id rel`` space-separated, one judgment per line."""
    qrels: Qrels = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 4:
                raise RunFormatError(f"{path}:{lineno}: expected 4 columns, got {len(parts)}")
            topic, _, item_id, rel_str = parts
            try:
                rel = int(rel_str)
            except ValueError as exc:
                raise RunFormatError(f"{path}:{lineno}: bad relevance {rel_str!r}") from exc
            if rel < 0:
                raise RunFormatError(f"{path}:{lineno}: negative relevance")
            qrels.setdefault(topic, {})[item_id] = rel
    return qrels


def _validate_topic(topic: str, entries: list[RunEntry], where: str) -> list[RunEntry]:
    entries = sorted(entries, key=lambda e: e.rank)
    for i, entry in enumerate(entries, start=1):
        if entry.rank != i:
            raise RunFormatError(f"{where}: topic {topic}: ranks not contiguous from 1")
    for prev, cur in zip(entries, entries[1:]):
        if cur.score > prev.score:
            raise RunFormatError(f"{where}: topic {topic}: scores increase with rank")
    return entries


def read_run(path: str | Path) -> Run:
    """``topic_id Q0 id rank score tag`` space-separated, one result per line."""
    raw: dict[str, list[RunEntry]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 6:
                raise RunFormatError(f"{path}:{lineno}: expected 6 columns, got {len(parts)}")
            topic, _, item_id, rank_str, score_str, tag = parts
            try:
                rank = int(rank_str)
                score = float(score_str)
            except ValueError as exc:
                raise RunFormatError(f"{path}:{lineno}: bad rank/score") from exc
            raw.setdefault(topic, []).append(RunEntry(item_id, rank, score, tag))
    return {topic: _validate_topic(topic, entries, str(path)) for topic, entries in raw.items()}


def write_run(run: Run, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for topic, entries in run.items():
            for e in sorted(entries, key=lambda e: e.rank):
                fh.write(f"{topic} Q0 {e.item_id} {e.rank} {e.score!r} {e.tag}\n")


def run_from_ranking(topic: str, ranked: Sequence[tuple[str, float]], tag: str = "run") -> list[RunEntry]:
    """Convenience: turn a (id, score) ranking into validated run entries."""
    return [RunEntry(pid, i, score, tag) for i, (pid, score) in enumerate(ranked, start=1)]


def _relevant_topics(qrels: Qrels) -> list[str]:
    return [t for t, judged in qrels.items() if any(r > 0 for r in judged.values())]


def ndcg_at_k(run: Run, qrels: Qrels, k: int = 10) -> tuple[dict[str, float], float]:
    """Per-topic NDCG@k plus the mean over topics with >= 1 relevant judgment.

    DCG@k sums rel_i / log2(i+1) over the run order, with unjudged items at
    relevance 0; IDCG@k uses the judged relevances sorted descending.  Topics
    judged but missing from the run score 0.
    """
    per_topic: dict[str, float] = {}
    for topic in _relevant_topics(qrels):
        judged = qrels[topic]
        ideal = sorted(judged.values(), reverse=True)[:k]
        idcg = sum(rel / math.log2(i + 2) for i, rel in enumerate(ideal))
        entries = run.get(topic, [])[:k]
        dcg = sum(
            judged.get(e.item_id, 0) / math.log2(i + 2) for i, e in enumerate(entries)
        )
        per_topic[topic] = dcg / idcg
    mean = sum(per_topic.values()) / len(per_topic) if per_topic else 0.0
    return per_topic, mean


def precision_at_k(run: Run, qrels: Qrels, k: int = 5) -> tuple[dict[str, float], float]:
    """Fraction of the top-k run items with relevance >= 1; short runs treat
    missing slots as non-relevant."""
    per_topic: dict[str, float] = {}
    for topic in _relevant_topics(qrels):
        judged = qrels[topic]
        entries = run.get(topic, [])[:k]
        hits = sum(1 for e in entries if judged.get(e.item_id, 0) >= 1)
        per_topic[topic] = hits / k
    mean = sum(per_topic.values()) / len(per_topic) if per_topic else 0.0
    return per_topic, mean


@dataclass
class MetricReport:
    k_ndcg: int = 10
    k_p: int = 5
    ndcg: dict[str, float] = field(default_factory=dict)
    precision: dict[str, float] = field(default_factory=dict)
    mean_ndcg: float = 0.0
    mean_precision: float = 0.0
    gain: str = GAIN_CONVENTION

    def format(self) -> str:
        lines = [
            f"# gain={self.gain} discount=log2(rank+1) unjudged=non-relevant",
            f"# topics={len(self.ndcg)} (topics without relevant judgments excluded)",
            f"{'topic':<16} NDCG@{self.k_ndcg:<4} P@{self.k_p}",
        ]
        for topic in sorted(self.ndcg):
            lines.append(f"{topic:<16} {self.ndcg[topic]:<9.4f} {self.precision[topic]:.4f}")
        lines.append(f"{'mean':<16} {self.mean_ndcg:<9.4f} {self.mean_precision:.4f}")
        return "\n".join(lines)


def evaluate(run: Run, qrels: Qrels, k_ndcg: int = 10, k_p: int = 5) -> MetricReport:
    ndcg, mean_ndcg = ndcg_at_k(run, qrels, k_ndcg)
    precision, mean_precision = precision_at_k(run, qrels, k_p)
    return MetricReport(
        k_ndcg=k_ndcg,
        k_p=k_p,
        ndcg=ndcg,
        precision=precision,
        mean_ndcg=mean_ndcg,
        mean_precision=mean_precision,
    )
