# Training the reranker and beating BM25
#
# BM25 rewards raw term frequency, so a passage stuffed with two of three
# query words can outrank the passage that actually answers the query.  This
# demo plants that failure mode, mines it as hard negatives, trains the
# logistic cross-scorer, and shows the reranker fixing the order.

import random

from vertsearch import build_index, retrieve, rerank, train
from vertsearch.corpus import Passage, PassageField
from vertsearch.rerank import TrainConfig, featurize, FEATURE_NAMES
from vertsearch.training_data import RelevancePair, mine_negatives, balance_and_emit

rng = random.Random(1)
fillers = ["alpha", "beta", "gamma", "delta", "epsilon"]

passages, queries, positives = [], {}, {}
counter = 0
for q in range(12):
    a, b, c = f"t{q}a", f"t{q}b", f"t{q}c"
    queries[f"q{q}"] = f"{a} {b} {c}"
    positives[f"q{q}"] = set()
    for _ in range(2):  # relevant: the full phrase, once, in context
        words = [rng.choice(fillers) for _ in range(8)] + [a, b, c] + [rng.choice(fillers) for _ in range(8)]
        pid = f"p{counter}"; counter += 1
        passages.append(Passage(pid, pid, " ".join(words), 0, PassageField.ABSTRACT))
        positives[f"q{q}"].add(pid)
    for _ in range(4):  # keyword-stuffed decoys: two words, five times each
        words = []
        for _ in range(5):
            words += [a, rng.choice(fillers), b, rng.choice(fillers)]
        pid = f"p{counter}"; counter += 1
        passages.append(Passage(pid, pid, " ".join(words), 0, PassageField.ABSTRACT))

index = build_index(passages, num_shards=2)

# BM25 alone puts the decoys first.
qid = "q0"
print(f"query: {queries[qid]!r}")
print("BM25 order (label, l1 score):")
candidates = retrieve(index, queries[qid], k=60)
for c in candidates.candidates[:6]:
    label = "+" if c.passage_id in positives[qid] else "-"
    print(f"  {label} {c.passage_id:<6} {c.l1_score:.3f}")
print()

# The feature view separates them even though BM25 does not.
print("features:", ", ".join(FEATURE_NAMES))
for pid in list(positives[qid])[:1] + [candidates.candidates[0].passage_id]:
    f = featurize(queries[qid], index.get_passage(pid), index.meta)
    label = "+" if pid in positives[qid] else "-"
    print(f"  {label} {pid:<6} {[round(x, 2) for x in f]}")
print()

# Train on triples generated by the self-supervision pipeline itself.
train_qids = [f"q{i}" for i in range(8)]
pairs = [RelevancePair(q, queries[q], positives[q]) for q in train_qids]
negatives = {p.query_id: mine_negatives(p, index, top_n=100) for p in pairs}
triples = balance_and_emit(pairs, negatives, seed=13)
scorer = train(
    triples,
    lambda q: queries[q],
    lambda p: index.get_passage(p),
    index.meta,
    TrainConfig(learning_rate=0.1, epochs=5, seed=0),
)
print(f"trained on {len(triples)} triples; weights:")
for name, w in zip(FEATURE_NAMES, scorer.weights):
    print(f"  {name:<18} {w:+.3f}")
print()

# Held-out queries: the reranker puts the true positives back on top.
print("reranked order on held-out q10:")
held = retrieve(index, queries["q10"], k=60)
for pid, score in rerank(scorer, queries["q10"], held, index)[:6]:
    label = "+" if pid in positives["q10"] else "-"
    print(f"  {label} {pid:<6} {score:.3f}")
