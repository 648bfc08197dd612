# Self-supervised training data
#
# No human labels for the target domain: take a broad query/passage dataset
# with annotated relevance, keep only queries containing a domain-lexicon
# phrase, use their annotated passages as positives, and mine hard negatives
# with BM25 -- top-scoring passages that are NOT annotated relevant.  Balance
# 1:1 per query with a seeded sample so the output file is reproducible.

import random

from vertsearch import build_index, filter_queries, mine_negatives, balance_and_emit
from vertsearch.training_data import DomainLexicon, RelevancePair, collection_to_passages

rng = random.Random(3)
medical = ["diabetes", "insulin", "glucose", "cardiac", "sepsis"]
general = ["weather", "music", "travel", "recipe", "football"]

# A MARCO-style collection: half in-domain, half not.
collection = []
for i in range(300):
    pool = medical if i % 2 == 0 else general
    collection.append((f"p{i}", " ".join(rng.choice(pool + ["the", "of"]) for _ in range(10))))

queries = [
    ("q0", "diabetes insulin dosing"),
    ("q1", "glucose monitoring for diabetes"),
    ("q2", "best travel camera"),          # no lexicon term -> dropped
    ("q3", "cardiac sepsis risk factors"),
]

# 1. Lexicon filter: keep queries containing at least one domain phrase
#    (multiword phrases must appear contiguously).
lexicon = DomainLexicon.from_phrases(medical + ["cardiac sepsis"])
kept = filter_queries(queries, lexicon)
print("kept queries:", [qid for qid, _ in kept])

# 2. Annotated positives come with the dataset.
positives = {"q0": {"p0", "p2"}, "q1": {"p4"}, "q3": {"p6", "p8"}}
pairs = [RelevancePair(qid, text, positives[qid]) for qid, text in kept]

# 3. Mine hard negatives: BM25 top 100 minus the positives.
index = build_index(collection_to_passages(collection), num_shards=1)
negatives = {p.query_id: mine_negatives(p, index, top_n=100) for p in pairs}
for pair in pairs:
    print(f"  {pair.query_id}: {len(pair.positives)} positives, "
          f"{len(negatives[pair.query_id])} mined negatives")
print()

# 4. Balance 1:1 per query and shuffle with the same seed.
triples = balance_and_emit(pairs, negatives, seed=13)
label_counts = {0: 0, 1: 0}
for t in triples:
    label_counts[t.label] += 1
print(f"emitted {len(triples)} triples: {label_counts[1]} positive / {label_counts[0]} negative")
print("first five:")
for t in triples[:5]:
    print(f"  {t.query_id}\t{t.passage_id}\t{t.label}")

# The same pipeline runs end to end from TSV files via:
#   vertsearch gen-train --queries queries.tsv --collection collection.tsv \
#       --qrels qrels.tsv --lexicon lexicon.txt --negatives 100 --seed 13 \
#       --out triples.tsv
