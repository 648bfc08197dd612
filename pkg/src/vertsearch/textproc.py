"""Text analysis for sparse retrieval plus a byte-pair-encoding subword vocabulary.

Two distinct tokenizations live here and they serve different consumers:

* :class:`Analyzer` produces the word-level term stream used by the BM25
  index, the query pipeline and the training-data generator.
* :class:`BpeVocabulary` is a greedy pair-merging subword vocabulary.  It is
  not used for sparse retrieval; it backs the reranker's subword-fertility
  feature and the optional domain-vocabulary report.

BPE training operates on the analyzed word frequency table: every word is
split into characters with an end-of-word marker fused onto the last
character, and the most frequent adjacent symbol pair is merged repeatedly.
Ties between equally frequent pairs are broken by lexicographic pair order so
training is fully deterministic and independent of corpus stream order.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Iterator

# Maximal runs of Unicode letters/digits. \w minus underscore.
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

END_OF_WORD = "</w>"
UNKNOWN_TOKEN = "<unk>"
SEPARATOR_TOKEN = "<sep>"
DEFAULT_SPECIALS = (UNKNOWN_TOKEN, SEPARATOR_TOKEN)

VOCAB_FILE_MAGIC = "bpe"
VOCAB_FILE_VERSION = "v1"


@dataclass(frozen=True)
class Analyzer:
    """Deterministic word-level analyzer: letter/digit runs, optional lowercasing,
    optional stopword removal."""

    lowercase: bool = True
    stopwords: frozenset[str] = frozenset()

    def analyze(self, text: str) -> list[str]:
        terms = _TOKEN_RE.findall(text)
        if self.lowercase:
            terms = [t.lower() for t in terms]
        if self.stopwords:
            terms = [t for t in terms if t not in self.stopwords]
        return terms


def analyze(text: str, analyzer: Analyzer | None = None) -> list[str]:
    """Analyze ``text`` with ``analyzer`` (default analyzer when omitted)."""
    return (analyzer or Analyzer()).analyze(text)


class BpeError(ValueError):
    pass


def _split_word(word: str) -> tuple[str, ...]:
    """Initial symbol sequence of a word: characters, end marker fused on the last."""
    if not word:
        return ()
    chars = list(word)
    chars[-1] = chars[-1] + END_OF_WORD
    return tuple(chars)


@dataclass
class BpeVocabulary:
    """Ordered merge list plus token-id table.

    Ids are assigned deterministically: specials first, then the sorted base
    alphabet, then one id per merge in training order.
    """

    merges: list[tuple[str, str]]
    alphabet: tuple[str, ...]
    specials: tuple[str, ...] = DEFAULT_SPECIALS
    token_to_id: dict[str, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.token_to_id:
            self.token_to_id = self._build_table()

    def _build_table(self) -> dict[str, int]:
        table: dict[str, int] = {}
        for tok in self.specials:
            table[tok] = len(table)
        for sym in self.alphabet:
            if sym not in table:
                table[sym] = len(table)
        for a, b in self.merges:
            merged = a + b
            if merged not in table:
                table[merged] = len(table)
        return table

    @property
    def vocab_size(self) -> int:
        return len(self.token_to_id)

    @property
    def unknown_id(self) -> int:
        return self.token_to_id[UNKNOWN_TOKEN]

    def segment_word(self, word: str) -> list[str]:
        """Apply merges in training order to one word; returns subword symbols."""
        symbols = list(_split_word(word))
        if not symbols:
            return []
        for a, b in self.merges:
            if len(symbols) < 2:
                break
            out: list[str] = []
            i = 0
            while i < len(symbols):
                if i + 1 < len(symbols) and symbols[i] == a and symbols[i + 1] == b:
                    out.append(a + b)
                    i += 2
                else:
                    out.append(symbols[i])
                    i += 1
            symbols = out
        return symbols

    def encode_word(self, word: str) -> list[int]:
        return [self.token_to_id.get(s, self.unknown_id) for s in self.segment_word(word)]

    def encode(self, text: str, analyzer: Analyzer | None = None) -> list[int]:
        """Analyze ``text`` and encode each term; terms are concatenated in order."""
        ids: list[int] = []
        for term in analyze(text, analyzer):
            ids.extend(self.encode_word(term))
        return ids

    def decode(self, ids: Iterable[int]) -> str:
        """Inverse of :meth:`encode` up to analyzer normalization.

        Unknown ids decode to the unknown marker so round-trips stay aligned.
        """
        id_to_token = {i: t for t, i in self.token_to_id.items()}
        words: list[str] = []
        current: list[str] = []
        for i in ids:
            tok = id_to_token.get(i, UNKNOWN_TOKEN)
            if tok.endswith(END_OF_WORD):
                current.append(tok[: -len(END_OF_WORD)])
                words.append("".join(current))
                current = []
            else:
                current.append(tok)
        if current:
            words.append("".join(current))
        return " ".join(words)


def _pair_counts(word_freqs: dict[tuple[str, ...], int]) -> Counter:
    counts: Counter = Counter()
    for symbols, freq in word_freqs.items():
        for i in range(len(symbols) - 1):
            counts[(symbols[i], symbols[i + 1])] += freq
    return counts


def _merge_word(symbols: tuple[str, ...], pair: tuple[str, str]) -> tuple[str, ...]:
    a, b = pair
    out: list[str] = []
    i = 0
    while i < len(symbols):
        if i + 1 < len(symbols) and symbols[i] == a and symbols[i + 1] == b:
            out.append(a + b)
            i += 2
        else:
            out.append(symbols[i])
            i += 1
    return tuple(out)


def train_bpe(
    corpus: Iterable[str],
    vocab_size: int,
    analyzer: Analyzer | None = None,
    specials: tuple[str, ...] = DEFAULT_SPECIALS,
) -> BpeVocabulary:
    """Train a BPE vocabulary by greedy most-frequent-pair merging.

    ``corpus`` is any stream of texts; only the per-word frequency table
    matters, so permuting the stream cannot change the result.  Merging stops
    once ``vocab_size`` tokens exist (specials + alphabet + merges) or when no
    adjacent pair occurs at least twice.

    Raises :class:`BpeError` on an empty corpus or when ``vocab_size`` leaves
    no room for at least one merge.
    """
    word_freqs: Counter = Counter()
    for text in corpus:
        for term in analyze(text, analyzer):
            word_freqs[term] += 1
    if not word_freqs:
        raise BpeError("cannot train BPE on an empty corpus")

    split_freqs: dict[tuple[str, ...], int] = {}
    alphabet_set: set[str] = set()
    for word, freq in word_freqs.items():
        symbols = _split_word(word)
        split_freqs[symbols] = split_freqs.get(symbols, 0) + freq
        alphabet_set.update(symbols)

    base_count = len(alphabet_set) + len(specials)
    if vocab_size <= base_count:
        raise BpeError(
            f"vocab_size {vocab_size} must exceed base symbols + specials ({base_count})"
        )

    merges: list[tuple[str, str]] = []
    max_merges = vocab_size - base_count
    while len(merges) < max_merges:
        counts = _pair_counts(split_freqs)
        if not counts:
            break
        # Most frequent pair; ties by lexicographic pair order.
        best = min(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        pair, freq = best
        if freq < 2:
            break
        merges.append(pair)
        split_freqs = {_merge_word(sym, pair): f for sym, f in split_freqs.items()}

    return BpeVocabulary(merges=merges, alphabet=tuple(sorted(alphabet_set)), specials=specials)


def save_vocab(vocab: BpeVocabulary, path: str) -> None:
    """Write the merge list: header ``bpe v1 <vocab_size>`` then one pair per line."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{VOCAB_FILE_MAGIC} {VOCAB_FILE_VERSION} {vocab.vocab_size}\n")
        for a, b in vocab.merges:
            fh.write(f"{a} {b}\n")


def load_vocab(path: str, specials: tuple[str, ...] = DEFAULT_SPECIALS) -> BpeVocabulary:
    """Load a vocabulary file written by :func:`save_vocab`.

    The file format carries the merges only; the base alphabet is
    reconstructed from the symbols the merges reference.  Alphabet symbols
    that never participated in a merge are not recoverable and will encode to
    the unknown id after a reload.
    """
    with open(path, encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines:
        raise BpeError(f"{path}: empty vocabulary file")
    header = lines[0].split()
    if len(header) != 3 or header[0] != VOCAB_FILE_MAGIC:
        raise BpeError(f"{path}: bad header {lines[0]!r}")
    if header[1] != VOCAB_FILE_VERSION:
        raise BpeError(f"{path}: unsupported vocabulary version {header[1]!r}")
    merges: list[tuple[str, str]] = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        parts = line.split(" ")
        if len(parts) != 2:
            raise BpeError(f"{path}:{lineno}: expected 'left right' merge pair")
        merges.append((parts[0], parts[1]))

    produced: set[str] = set()
    alphabet: set[str] = set()
    for a, b in merges:
        for sym in (a, b):
            if sym not in produced:
                alphabet.add(sym)
        produced.add(a + b)
    return BpeVocabulary(merges=merges, alphabet=tuple(sorted(alphabet)), specials=specials)


def bpe_encode(vocab: BpeVocabulary, text: str, analyzer: Analyzer | None = None) -> list[int]:
    """Encode analyzed ``text`` into subword ids with a trained vocabulary."""
    return vocab.encode(text, analyzer)


def bpe_decode(vocab: BpeVocabulary, ids: Iterable[int]) -> str:
    return vocab.decode(ids)


def subword_fertility(vocab: BpeVocabulary, terms: Iterator[str] | list[str]) -> float:
    """Mean number of BPE subwords per term; 1.0 for an empty term list."""
    terms = list(terms)
    if not terms:
        return 1.0
    total = sum(len(vocab.segment_word(t)) for t in terms)
    return total / len(terms)
