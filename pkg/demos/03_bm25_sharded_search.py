# Sharded BM25 retrieval
#
# Passages are hashed to shards by document id (all passages of a document
# co-locate).  Global statistics are computed in a finalize pass and shared by
# every shard, so a multi-shard scatter-gather returns exactly what one big
# shard would: same scores, same order, bit for bit.

import random
import tempfile

from vertsearch import build_index, save_index, load_index, retrieve
from vertsearch.corpus import Passage, PassageField

rng = random.Random(7)
words = ["virus", "spike", "protein", "cell", "vaccine", "trial", "dose", "the", "of"]

passages = []
for d in range(200):
    for ordinal in range(2):
        text = " ".join(rng.choice(words) for _ in range(rng.randint(6, 18)))
        passages.append(
            Passage(f"doc{d}#{ordinal}", f"doc{d}", text, ordinal, PassageField.ABSTRACT)
        )

single = build_index(passages, num_shards=1)
sharded = build_index(passages, num_shards=5)

print(f"indexed {sharded.meta.N} passages, avgdl {sharded.meta.avgdl:.2f}")
print(f"shard sizes: {[len(s) for s in sharded.shards]}")
print()

# Scatter-gather equals the single-shard ranking exactly.
query = "spike protein vaccine"
terms = sharded.meta.analyzer.analyze(query)
assert sharded.search(terms, 60) == single.search(terms, 60)
print(f"top 5 for {query!r} (5-shard build == 1-shard build):")
for pid, score in sharded.search(terms, 5):
    print(f"  {score:7.3f}  {pid:<10} {sharded.get_passage(pid).text[:50]}")
print()

# The L1 layer wraps this as candidate generation: top 60 by default, only
# passages that matched at least one query term.
candidates = retrieve(sharded, query)  # k defaults to 60
print(f"retrieve() produced {len(candidates)} candidates (k={candidates.k_requested})")
print()

# The index persists to a versioned, checksummed directory and reloads
# bit-for-bit: same stats, same rankings.
outdir = tempfile.mkdtemp(prefix="vertsearch-demo-") + "/index"
save_index(sharded, outdir)
reloaded = load_index(outdir)
assert reloaded.search(terms, 60) == sharded.search(terms, 60)
print(f"saved to {outdir} and reloaded: rankings identical")
