"""Second-stage reranking: a trainable feature-based cross-scorer plus a wire
client for an external neural scorer.

The local scorer is logistic-linear over a fixed 7-feature view of a (query,
passage) pair.  It keeps the pipeline's trainable-reranker contract cheap
enough to run anywhere: one-epoch seeded SGD on binary cross-entropy, exact
analytic gradients, bit-reproducible given a seed.  A production deployment
can swap in a heavyweight neural scorer behind :func:`remote_score` without
touching the pipeline; the conventional fine-tuning learning rate for such
models is recorded as :data:`EXTERNAL_SCORER_LEARNING_RATE`.
"""

from __future__ import annotations

import json
import logging
import random
import urllib.error
import urllib.request
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .index import IndexMeta, SearchIndex, StoredPassage, bm25_score
from .retrieval import CandidateSet
from .textproc import BpeVocabulary, subword_fertility
from .training_data import TrainingTriple

logger = logging.getLogger(__name__)

FEATURE_NAMES = (
    "bm25",
    "term_overlap",
    "idf_overlap",
    "span_coverage",
    "length_ratio",
    "subword_fertility",
    "bias",
)
FEATURE_DIM = len(FEATURE_NAMES)

# Fine-tuning default for transformer-class external scorers; the local
# linear model uses TrainConfig.learning_rate instead.
EXTERNAL_SCORER_LEARNING_RATE = 2e-5

MODEL_FILE_HEADER = f"xscorer v1 {FEATURE_DIM}"


def featurize(
    query: str,
    passage: StoredPassage,
    meta: IndexMeta,
    vocab: BpeVocabulary | None = None,
) -> np.ndarray:
    """Fixed-order feature vector of a (query, passage) pair.

    Features: BM25 score (identical to the index module's scorer), fraction of
    unique query terms present in the passage, idf-weighted version of the
    same, longest contiguous run of query terms in the passage as a fraction
    of query length, passage length over corpus average, mean BPE subwords per
    query term (1.0 without a vocabulary), and a constant bias.
    """
    q_terms = meta.analyzer.analyze(query)
    uniq_q = list(dict.fromkeys(q_terms))
    p_terms = meta.analyzer.analyze(passage.text)
    p_set = set(p_terms)

    bm25 = bm25_score(meta, q_terms, passage)

    if uniq_q:
        matched = [t for t in uniq_q if t in p_set]
        overlap = len(matched) / len(uniq_q)
        total_idf = sum(meta.idf(t) for t in uniq_q)
        idf_overlap = sum(meta.idf(t) for t in matched) / total_idf if total_idf > 0 else 0.0
    else:
        overlap = 0.0
        idf_overlap = 0.0

    if q_terms:
        q_set = set(q_terms)
        longest = 0
        run = 0
        for t in p_terms:
            run = run + 1 if t in q_set else 0
            longest = max(longest, run)
        span_coverage = min(1.0, longest / len(q_terms))
    else:
        span_coverage = 0.0

    length_ratio = passage.dl / meta.avgdl if meta.avgdl > 0 else 0.0
    fertility = subword_fertility(vocab, q_terms) if vocab is not None and q_terms else 1.0

    return np.array(
        [bm25, overlap, idf_overlap, span_coverage, length_ratio, fertility, 1.0],
        dtype=np.float64,
    )


def _sigmoid(z: np.ndarray | float) -> np.ndarray | float:
    return np.exp(-np.logaddexp(0.0, -z))


def bce_loss(weights: np.ndarray, features: np.ndarray, labels: np.ndarray) -> float:
    """Mean binary cross-entropy of the logistic scorer, numerically stable."""
    z = features @ weights
    # -[y log s(z) + (1-y) log(1 - s(z))] == softplus(z) - y*z
    return float(np.mean(np.logaddexp(0.0, z) - labels * z))


def bce_gradient(weights: np.ndarray, features: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Exact gradient of :func:`bce_loss` with respect to the weights."""
    z = features @ weights
    return features.T @ (_sigmoid(z) - labels) / len(labels)


@dataclass
class CrossScorer:
    """Logistic-linear relevance scorer over the fixed feature vector."""

    weights: np.ndarray

    def __post_init__(self) -> None:
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.shape != (FEATURE_DIM,):
            raise ValueError(f"weights must have shape ({FEATURE_DIM},)")
        if not np.all(np.isfinite(self.weights)):
            raise ValueError("weights must be finite")

    @classmethod
    def zeros(cls) -> "CrossScorer":
        return cls(np.zeros(FEATURE_DIM))

    def score_features(self, features: np.ndarray) -> float:
        return float(_sigmoid(float(features @ self.weights)))

    def score(
        self,
        query: str,
        passage: StoredPassage,
        meta: IndexMeta,
        vocab: BpeVocabulary | None = None,
    ) -> float:
        return self.score_features(featurize(query, passage, meta, vocab))


@dataclass
class TrainConfig:
    learning_rate: float = 0.1
    epochs: int = 1
    seed: int = 0
    batch_size: int = 32

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


def build_feature_matrix(
    triples: Sequence[TrainingTriple],
    resolve_query: Callable[[str], str],
    resolve_passage: Callable[[str], StoredPassage],
    meta: IndexMeta,
    vocab: BpeVocabulary | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    features = np.empty((len(triples), FEATURE_DIM), dtype=np.float64)
    labels = np.empty(len(triples), dtype=np.float64)
    for i, t in enumerate(triples):
        features[i] = featurize(resolve_query(t.query_id), resolve_passage(t.passage_id), meta, vocab)
        labels[i] = t.label
    return features, labels


def train(
    triples: Sequence[TrainingTriple],
    resolve_query: Callable[[str], str],
    resolve_passage: Callable[[str], StoredPassage],
    meta: IndexMeta,
    config: TrainConfig | None = None,
    vocab: BpeVocabulary | None = None,
) -> CrossScorer:
    """Fit scorer weights with plain SGD on mean binary cross-entropy.

    Examples are visited in a seeded-shuffle order, reshuffled each epoch from
    one RNG stream, so the same triples, config and seed always produce
    bit-identical weights.
    """
    if not triples:
        raise ValueError("cannot train on an empty triple list")
    config = config or TrainConfig()
    labels_seen = {t.label for t in triples}
    if labels_seen - {0, 1}:
        raise ValueError(f"labels must be 0 or 1, got {sorted(labels_seen)}")
    if len(labels_seen) < 2:
        logger.warning("training data is single-class (%s); scorer will be degenerate", labels_seen)

    features, labels = build_feature_matrix(triples, resolve_query, resolve_passage, meta, vocab)
    weights = np.zeros(FEATURE_DIM, dtype=np.float64)
    rng = random.Random(config.seed)
    order = list(range(len(triples)))
    for epoch in range(config.epochs):
        rng.shuffle(order)
        epoch_loss = 0.0
        batches = 0
        for start in range(0, len(order), config.batch_size):
            idx = order[start : start + config.batch_size]
            fb, lb = features[idx], labels[idx]
            epoch_loss += bce_loss(weights, fb, lb)
            batches += 1
            weights = weights - config.learning_rate * bce_gradient(weights, fb, lb)
        logger.info("epoch %d: mean batch loss %.6f", epoch + 1, epoch_loss / batches)
    return CrossScorer(weights)


def rerank(
    scorer: CrossScorer,
    query: str,
    candidates: CandidateSet,
    index: SearchIndex,
    vocab: BpeVocabulary | None = None,
) -> list[tuple[str, float]]:
    """Score every candidate and sort by score descending, ties by passage id.

    The output is a full ordering independent of the candidate input order.
    """
    scored: list[tuple[str, float]] = []
    for candidate in candidates.candidates:
        passage = index.get_passage(candidate.passage_id)
        if passage is None:
            raise KeyError(f"candidate passage not in index: {candidate.passage_id}")
        scored.append((candidate.passage_id, scorer.score(query, passage, index.meta, vocab)))
    scored.sort(key=lambda item: (-item[1], item[0]))
    return scored


def save_model(scorer: CrossScorer, path: str | Path) -> None:
    """Text model file: header line then one decimal weight per line."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(MODEL_FILE_HEADER + "\n")
        for w in scorer.weights:
            fh.write(f"{float(w)!r}\n")


def load_model(path: str | Path) -> CrossScorer:
    with open(path, encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0] != MODEL_FILE_HEADER:
        raise ValueError(f"{path}: expected header {MODEL_FILE_HEADER!r}")
    if len(lines) != 1 + FEATURE_DIM:
        raise ValueError(f"{path}: expected {FEATURE_DIM} weights, got {len(lines) - 1}")
    return CrossScorer(np.array([float(x) for x in lines[1:]], dtype=np.float64))


# ---------------------------------------------------------------------------
# External scorer wire client.
# ---------------------------------------------------------------------------


class RemoteScorerError(RuntimeError):
    pass


@dataclass
class ExternalScorerEndpoint:
    base_url: str
    timeout: float = 10.0
    batch_limit: int = 32

    def __post_init__(self) -> None:
        if self.batch_limit < 1:
            raise ValueError("batch_limit must be >= 1")
        self.base_url = self.base_url.rstrip("/")


def remote_score(endpoint: ExternalScorerEndpoint, pairs: Sequence[tuple[str, str]]) -> list[float]:
    """POST /score with {"pairs": [{"query", "passage"}...]}; returns one score
    per pair, order preserved.

    Raises :class:`RemoteScorerError` on timeout, non-2xx status, malformed
    response, or a score-count mismatch.
    """
    if len(pairs) > endpoint.batch_limit:
        raise ValueError(f"batch of {len(pairs)} exceeds limit {endpoint.batch_limit}")
    body = json.dumps({"pairs": [{"query": q, "passage": p} for q, p in pairs]}).encode("utf-8")
    request = urllib.request.Request(
        endpoint.base_url + "/score",
        data=body,
        headers={"Content-Type": "application/json"},
        method="POST",
    )
    try:
        with urllib.request.urlopen(request, timeout=endpoint.timeout) as resp:
            if not 200 <= resp.status < 300:
                raise RemoteScorerError(f"scorer returned status {resp.status}")
            payload = json.loads(resp.read().decode("utf-8"))
    except urllib.error.HTTPError as exc:
        raise RemoteScorerError(f"scorer returned status {exc.code}") from exc
    except (urllib.error.URLError, TimeoutError, OSError) as exc:
        raise RemoteScorerError(f"scorer request failed: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise RemoteScorerError(f"malformed scorer response: {exc}") from exc

    scores = payload.get("scores") if isinstance(payload, dict) else None
    if not isinstance(scores, list) or not all(isinstance(s, (int, float)) for s in scores):
        raise RemoteScorerError("malformed scorer response: missing 'scores' array")
    if len(scores) != len(pairs):
        raise RemoteScorerError(f"scorer returned {len(scores)} scores for {len(pairs)} pairs")
    return [float(s) for s in scores]
