"""Feature extraction, trainer gradients, reranking, and the remote scorer client."""

import json
import math
import random
import threading
import time
from collections import Counter
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
import pytest

from conftest import make_passage, random_passages
from oracles import auc_reference, ndcg_reference
from vertsearch.index import bm25_score, build_index
from vertsearch.rerank import (
    CrossScorer,
    ExternalScorerEndpoint,
    FEATURE_DIM,
    RemoteScorerError,
    TrainConfig,
    bce_gradient,
    bce_loss,
    build_feature_matrix,
    featurize,
    load_model,
    remote_score,
    rerank,
    save_model,
    train,
)
from vertsearch.retrieval import retrieve
from vertsearch.textproc import train_bpe
from vertsearch.training_data import RelevancePair, TrainingTriple, balance_and_emit, mine_negatives


@pytest.fixture(scope="module")
def feature_index():
    passages = [
        make_passage("a#0", "a", "spike protein binds the cell receptor"),
        make_passage("b#0", "b", "unrelated words entirely different topic"),
        make_passage("c#0", "c", "spike spike protein cell cell cell"),
    ]
    return build_index(passages, num_shards=1)


class TestFeaturize:
    def test_dimension_and_bias(self, feature_index):
        f = featurize("spike protein", feature_index.get_passage("a#0"), feature_index.meta)
        assert f.shape == (FEATURE_DIM,)
        assert f[-1] == 1.0
        assert np.all(np.isfinite(f))

    def test_passage_equal_to_query_has_full_overlap(self, feature_index):
        passage = feature_index.get_passage("a#0")
        f = featurize(passage.text, passage, feature_index.meta)
        assert f[1] == 1.0  # unique-term overlap
        assert f[2] == 1.0  # idf-weighted overlap
        assert f[3] == 1.0  # span coverage

    def test_disjoint_pair_zeroes_match_features(self, feature_index):
        f = featurize("spike protein", feature_index.get_passage("b#0"), feature_index.meta)
        assert f[0] == 0.0 and f[1] == 0.0 and f[2] == 0.0 and f[3] == 0.0

    def test_bm25_feature_identical_to_index_scorer(self, feature_index):
        meta = feature_index.meta
        for pid in ("a#0", "b#0", "c#0"):
            passage = feature_index.get_passage(pid)
            f = featurize("spike cell receptor", passage, meta)
            assert f[0] == bm25_score(meta, meta.analyzer.analyze("spike cell receptor"), passage)

    def test_each_feature_matches_reference_recomputation(self):
        rng = random.Random(17)
        passages = random_passages(rng, 120)
        index = build_index(passages, num_shards=2)
        meta = index.meta
        vocab = train_bpe([p.text for p in passages], vocab_size=80)
        for _ in range(40):
            query = " ".join(rng.choice(["virus", "cell", "dose", "the", "zz"]) for _ in range(rng.randint(1, 4)))
            passage = index.get_passage(rng.choice(passages).passage_id)
            f = featurize(query, passage, meta, vocab)

            q_terms = meta.analyzer.analyze(query)
            p_terms = meta.analyzer.analyze(passage.text)
            uniq_q = list(dict.fromkeys(q_terms))
            # unique-term overlap fraction
            assert f[1] == sum(1 for t in set(uniq_q) if t in set(p_terms)) / len(uniq_q)
            # idf-weighted overlap
            total = sum(meta.idf(t) for t in uniq_q)
            matched = sum(meta.idf(t) for t in uniq_q if t in set(p_terms))
            assert f[2] == pytest.approx(matched / total, abs=1e-15)
            # longest run of query terms over query length, capped at 1
            best = run = 0
            for t in p_terms:
                run = run + 1 if t in set(q_terms) else 0
                best = max(best, run)
            assert f[3] == min(1.0, best / len(q_terms))
            # length ratio
            assert f[4] == passage.dl / meta.avgdl
            # subword fertility
            assert f[5] == sum(len(vocab.segment_word(t)) for t in q_terms) / len(q_terms)

    def test_deterministic(self, feature_index):
        passage = feature_index.get_passage("c#0")
        f1 = featurize("spike cell", passage, feature_index.meta)
        f2 = featurize("spike cell", passage, feature_index.meta)
        assert np.array_equal(f1, f2)


class TestGradients:
    def finite_diff(self, fn, w, h=1e-6):
        grad = np.zeros_like(w)
        for i in range(len(w)):
            step = np.zeros_like(w)
            step[i] = h
            grad[i] = (fn(w + step) - fn(w - step)) / (2 * h)
        return grad

    @pytest.mark.parametrize("seed", range(10))
    def test_analytic_matches_central_differences(self, seed):
        rng = np.random.default_rng(seed)
        X = rng.uniform(0, 3, size=(16, FEATURE_DIM))
        y = rng.integers(0, 2, size=16).astype(float)
        w = rng.normal(0, 1, size=FEATURE_DIM)
        analytic = bce_gradient(w, X, y)
        numeric = self.finite_diff(lambda v: bce_loss(v, X, y), w)
        assert np.max(np.abs(analytic - numeric)) < 1e-5

    def test_loss_at_zero_weights_is_log2(self):
        X = np.ones((4, FEATURE_DIM))
        y = np.array([0.0, 1.0, 0.0, 1.0])
        assert bce_loss(np.zeros(FEATURE_DIM), X, y) == pytest.approx(math.log(2))


def separable_setup():
    """Positives repeat the query phrase; negatives share nothing."""
    passages = []
    triples = []
    queries = {}
    for i in range(20):
        qid = f"q{i}"
        queries[qid] = f"term{i} word{i}"
        pos = make_passage(f"pos{i}", f"pos{i}", f"term{i} word{i} term{i} word{i}")
        neg = make_passage(f"neg{i}", f"neg{i}", "nothing relevant here at all")
        passages += [pos, neg]
        triples += [TrainingTriple(qid, f"pos{i}", 1), TrainingTriple(qid, f"neg{i}", 0)]
    index = build_index(passages, num_shards=1)
    return index, queries, triples


class TestTrain:
    def test_separable_data_reaches_perfect_accuracy(self):
        index, queries, triples = separable_setup()
        scorer = train(
            triples,
            lambda q: queries[q],
            lambda p: index.get_passage(p),
            index.meta,
            TrainConfig(learning_rate=0.5, epochs=20, seed=0),
        )
        X, y = build_feature_matrix(
            triples, lambda q: queries[q], lambda p: index.get_passage(p), index.meta
        )
        predictions = (X @ scorer.weights) > 0
        assert np.all(predictions == (y == 1))

    def test_same_seed_bit_reproducible(self):
        index, queries, triples = separable_setup()
        kwargs = dict(
            resolve_query=lambda q: queries[q],
            resolve_passage=lambda p: index.get_passage(p),
            meta=index.meta,
        )
        a = train(triples, config=TrainConfig(epochs=1, seed=5), **kwargs)
        b = train(triples, config=TrainConfig(epochs=1, seed=5), **kwargs)
        assert np.array_equal(a.weights, b.weights)

    def test_different_seed_differs(self):
        index, queries, triples = separable_setup()
        kwargs = dict(
            resolve_query=lambda q: queries[q],
            resolve_passage=lambda p: index.get_passage(p),
            meta=index.meta,
        )
        a = train(triples, config=TrainConfig(epochs=2, seed=5, batch_size=4), **kwargs)
        b = train(triples, config=TrainConfig(epochs=2, seed=6, batch_size=4), **kwargs)
        assert not np.array_equal(a.weights, b.weights)

    def test_single_class_warns_but_trains(self, caplog):
        index, queries, triples = separable_setup()
        only_pos = [t for t in triples if t.label == 1]
        with caplog.at_level("WARNING"):
            scorer = train(
                only_pos,
                lambda q: queries[q],
                lambda p: index.get_passage(p),
                index.meta,
            )
        assert any("single-class" in rec.message for rec in caplog.records)
        assert np.all(np.isfinite(scorer.weights))

    def test_empty_triples_rejected(self):
        with pytest.raises(ValueError):
            train([], lambda q: "", lambda p: None, None)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            TrainConfig(learning_rate=0)
        with pytest.raises(ValueError):
            TrainConfig(epochs=0)


class TestMonotoneScore:
    def test_score_strictly_increases_with_bm25_feature(self):
        scorer = CrossScorer(np.array([0.8, 0.2, 0.1, 0.3, -0.1, 0.05, -0.2]))
        assert scorer.weights[0] > 0
        base = np.array([1.0, 0.5, 0.4, 0.3, 1.1, 1.2, 1.0])
        previous = scorer.score_features(base)
        for bump in (0.5, 1.0, 2.0, 5.0):
            features = base.copy()
            features[0] += bump
            current = scorer.score_features(features)
            assert current > previous
            previous = current


class TestLearningSignal:
    """Relevance planted via term overlap: the trained scorer must beat raw BM25."""

    def test_heldout_auc_and_ndcg(self, planted):
        train_qids = [f"q{i}" for i in range(16)]
        held_qids = [f"q{i}" for i in range(16, 24)]
        pairs = [RelevancePair(q, planted.queries[q], planted.positives[q]) for q in train_qids]
        negatives = {p.query_id: mine_negatives(p, planted.index, top_n=100) for p in pairs}
        triples = balance_and_emit(pairs, negatives, seed=13)
        scorer = train(
            triples,
            lambda q: planted.queries[q],
            lambda p: planted.index.get_passage(p),
            planted.index.meta,
            TrainConfig(learning_rate=0.1, epochs=5, seed=0),
        )

        aucs, ndcg_rerank, ndcg_bm25 = [], [], []
        for qid in held_qids:
            candidates = retrieve(planted.index, planted.queries[qid], k=60)
            judged = {p: 1 for p in planted.positives[qid]}
            bm25_order = [c.passage_id for c in candidates.candidates]
            reranked = rerank(scorer, planted.queries[qid], candidates, planted.index)
            ndcg_bm25.append(ndcg_reference(bm25_order, judged, 10))
            ndcg_rerank.append(ndcg_reference([pid for pid, _ in reranked], judged, 10))
            auc = auc_reference(
                [(s, 1 if pid in planted.positives[qid] else 0) for pid, s in reranked]
            )
            if auc is not None:
                aucs.append(auc)

        mean_auc = sum(aucs) / len(aucs)
        assert mean_auc > 0.9
        assert sum(ndcg_rerank) / len(ndcg_rerank) > sum(ndcg_bm25) / len(ndcg_bm25)


class TestRerank:
    def test_singleton(self, planted):
        candidates = retrieve(planted.index, planted.queries["q0"], k=60)
        candidates.candidates = candidates.candidates[:1]
        scorer = CrossScorer.zeros()
        out = rerank(scorer, planted.queries["q0"], candidates, planted.index)
        assert len(out) == 1
        assert out[0][0] == candidates.candidates[0].passage_id

    def test_order_invariant_under_permutation(self, planted):
        rng = random.Random(3)
        scorer = CrossScorer(np.array([0.1, 1.0, 0.5, 2.0, -0.1, 0.0, 0.0]))
        candidates = retrieve(planted.index, planted.queries["q1"], k=60)
        baseline = rerank(scorer, planted.queries["q1"], candidates, planted.index)
        for _ in range(5):
            rng.shuffle(candidates.candidates)
            assert rerank(scorer, planted.queries["q1"], candidates, planted.index) == baseline

    def test_matches_score_then_sort_oracle(self, planted):
        scorer = CrossScorer(np.array([0.2, 1.5, 0.3, 1.0, -0.2, 0.1, 0.05]))
        query = planted.queries["q2"]
        candidates = retrieve(planted.index, query, k=60)
        got = rerank(scorer, query, candidates, planted.index)
        want = []
        for c in candidates.candidates:
            passage = planted.index.get_passage(c.passage_id)
            z = float(featurize(query, passage, planted.index.meta) @ scorer.weights)
            want.append((c.passage_id, 1.0 / (1.0 + math.exp(-z))))
        want.sort(key=lambda item: (-item[1], item[0]))
        assert [p for p, _ in got] == [p for p, _ in want]
        assert got == pytest.approx(want)

    def test_unknown_candidate_rejected(self, planted):
        from vertsearch.retrieval import Candidate, CandidateSet

        scorer = CrossScorer.zeros()
        candidates = CandidateSet(query="x", candidates=[Candidate("missing#0", 1.0)])
        with pytest.raises(KeyError):
            rerank(scorer, "x", candidates, planted.index)


class TestModelFile:
    def test_round_trip(self, tmp_path):
        scorer = CrossScorer(np.array([0.5, -1.25, 3.0, 0.0, 2e-5, 7.5, -0.125]))
        path = tmp_path / "model.txt"
        save_model(scorer, path)
        loaded = load_model(path)
        assert np.array_equal(loaded.weights, scorer.weights)
        assert path.read_text(encoding="utf-8").splitlines()[0] == "xscorer v1 7"

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "model.txt"
        path.write_text("other v1 7\n" + "0.0\n" * 7, encoding="utf-8")
        with pytest.raises(ValueError):
            load_model(path)

    def test_wrong_weight_count_rejected(self, tmp_path):
        path = tmp_path / "model.txt"
        path.write_text("xscorer v1 7\n" + "0.0\n" * 6, encoding="utf-8")
        with pytest.raises(ValueError):
            load_model(path)


class MockScorerServer:
    """Configurable POST /score stub."""

    def __init__(self, behavior="echo", delay=0.0, value=0.5):
        behavior_ = behavior
        delay_ = delay
        value_ = value

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                time.sleep(delay_)
                length = int(self.headers.get("Content-Length", 0))
                body = json.loads(self.rfile.read(length))
                n = len(body["pairs"])
                if behavior_ == "echo":
                    scores = [value_] * n
                elif behavior_ == "short":
                    scores = [value_] * (n - 1)
                elif behavior_ == "malformed":
                    self._respond(200, b"not json")
                    return
                elif behavior_ == "error":
                    self._respond(500, b"{}")
                    return
                self._respond(200, json.dumps({"scores": scores}).encode())

            def _respond(self, status, payload):
                self.send_response(status)
                self.send_header("Content-Length", str(len(payload)))
                self.end_headers()
                self.wfile.write(payload)

            def log_message(self, *args):
                pass

        self.server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)

    @property
    def url(self):
        return f"http://127.0.0.1:{self.server.server_address[1]}"

    def __enter__(self):
        self.thread.start()
        return self

    def __exit__(self, *exc):
        self.server.shutdown()
        self.server.server_close()


class TestRemoteScore:
    def test_echo_in_order(self):
        with MockScorerServer("echo", value=0.5) as mock:
            endpoint = ExternalScorerEndpoint(mock.url)
            scores = remote_score(endpoint, [("q1", "p1"), ("q2", "p2"), ("q3", "p3")])
            assert scores == [0.5, 0.5, 0.5]

    def test_count_mismatch_raises(self):
        with MockScorerServer("short") as mock:
            endpoint = ExternalScorerEndpoint(mock.url)
            with pytest.raises(RemoteScorerError, match="2 scores for 3 pairs"):
                remote_score(endpoint, [("a", "b"), ("c", "d"), ("e", "f")])

    def test_timeout_raises(self):
        with MockScorerServer("echo", delay=0.6) as mock:
            endpoint = ExternalScorerEndpoint(mock.url, timeout=0.15)
            with pytest.raises(RemoteScorerError):
                remote_score(endpoint, [("a", "b")])

    def test_http_error_raises(self):
        with MockScorerServer("error") as mock:
            endpoint = ExternalScorerEndpoint(mock.url)
            with pytest.raises(RemoteScorerError, match="500"):
                remote_score(endpoint, [("a", "b")])

    def test_malformed_response_raises(self):
        with MockScorerServer("malformed") as mock:
            endpoint = ExternalScorerEndpoint(mock.url)
            with pytest.raises(RemoteScorerError, match="malformed"):
                remote_score(endpoint, [("a", "b")])

    def test_batch_limit_enforced(self):
        endpoint = ExternalScorerEndpoint("http://example.invalid", batch_limit=2)
        with pytest.raises(ValueError):
            remote_score(endpoint, [("a", "b")] * 3)
