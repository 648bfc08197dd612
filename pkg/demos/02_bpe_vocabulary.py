# Byte-pair-encoding subword vocabulary
#
# The word analyzer feeds BM25; the BPE vocabulary serves the reranker's
# subword-fertility feature and gives a compact fixed-size vocabulary for any
# downstream neural scorer.  Training is greedy most-frequent-pair merging
# over the word frequency table, ties broken lexicographically, so the result
# is deterministic and independent of corpus order.

import tempfile
from pathlib import Path

from vertsearch import analyze, train_bpe, save_vocab, load_vocab
from vertsearch.textproc import bpe_encode, bpe_decode, subword_fertility

corpus = [
    "the spike protein binds the receptor",
    "spike proteins bind receptors",
    "protein binding affinity",
    "the binding site of the spike",
] * 3

# The analyzer lowercases and keeps maximal letter/digit runs.
print("analyzed:", analyze("COVID-19 Spike-Protein αβ"))
print()

vocab = train_bpe(corpus, vocab_size=40)
print(f"vocab size {vocab.vocab_size}: {len(vocab.alphabet)} base symbols, "
      f"{len(vocab.specials)} specials, {len(vocab.merges)} merges")
print("first merges:", vocab.merges[:6])
print()

# Frequent words collapse to few subwords; rare ones stay fragmented.
for word in ["the", "spike", "protein", "receptor", "ribosome"]:
    print(f"  {word:<10} -> {vocab.segment_word(word)}")
print()

# Encoding round-trips up to analyzer normalization; unknown characters map
# to the reserved unknown id.
text = "the spike binds"
ids = bpe_encode(vocab, text)
print(f"encode({text!r}) = {ids}")
print(f"decode -> {bpe_decode(vocab, ids)!r}")
print()

# Subword fertility: mean subwords per term, a cheap proxy for how familiar
# query vocabulary is to the trained domain.
for query in ["spike protein", "zygomorphic flowers"]:
    print(f"  fertility({query!r}) = {subword_fertility(vocab, analyze(query)):.2f}")
print()

# The merge list is the whole artifact; it serializes to a small text file.
path = Path(tempfile.mkdtemp(prefix="vertsearch-demo-")) / "vocab.bpe"
save_vocab(vocab, path)
reloaded = load_vocab(path)
assert reloaded.merges == vocab.merges
print(f"saved and reloaded {path} ({path.stat().st_size} bytes)")
