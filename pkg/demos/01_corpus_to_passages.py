# Corpus ingestion and passage segmentation
#
# The retrieval unit of the whole system is the passage: a paragraph of a
# document with a stable, reversible id (doc_id "#" ordinal).  This walk-through
# writes a tiny corpus file, streams it back in, and segments every document.

import json
import tempfile
from pathlib import Path

from vertsearch import load_corpus, segment_corpus, segment_passages, decode_passage_id
from vertsearch.corpus import Document

workdir = Path(tempfile.mkdtemp(prefix="vertsearch-demo-"))
corpus_path = workdir / "corpus.jsonl"

# One JSON record per line: id (required), title, abstract, body (array), date.
records = [
    {
        "id": "pmid-1001",
        "title": "Spike protein binding in coronaviruses",
        "abstract": (
            "The spike protein mediates cell entry. It binds a host receptor.\n\n"
            "Binding affinity varies across variants and hosts."
        ),
        "date": "2020-07-14",
    },
    {
        "id": "pmid-1002",
        "title": "Vaccine trial outcomes",
        "abstract": "A randomized trial enrolled 4000 patients.",
        "body": ["Methods were pre-registered. Dosing followed a two-shot schedule."],
    },
    "this line is not valid JSON",  # counted and skipped in lenient mode
]
with open(corpus_path, "w", encoding="utf-8") as fh:
    for record in records:
        fh.write((record if isinstance(record, str) else json.dumps(record)) + "\n")

# Stream the documents back.  The reader is lenient by default: malformed
# lines are counted, not fatal (strict=True turns them into parse errors).
reader = load_corpus(corpus_path)
passages, stats = segment_corpus(reader)

print(f"documents: {stats.num_documents}")
print(f"passages: {stats.num_passages}")
print(f"avg length (analyzed terms): {stats.avg_passage_length:.1f}")
print(f"malformed lines skipped: {reader.skipped}")
print()

# Titles become ordinal 0; blank lines split paragraphs; each passage id
# decodes back to its (doc_id, ordinal).
for passage in passages:
    doc_id, ordinal = decode_passage_id(passage.passage_id)
    assert (doc_id, ordinal) == (passage.doc_id, passage.ordinal)
    print(f"  {passage.passage_id:<12} [{passage.field.value:<8}] {passage.text[:60]}")
print()

# Long paragraphs split greedily at sentence boundaries, never exceeding the
# term budget unless a single sentence is itself oversize.
long_doc = Document(
    doc_id="long-1",
    abstract=" ".join(f"Sentence number {i} has exactly six terms." for i in range(12)),
)
for p in segment_passages(long_doc, max_terms=20):
    print(f"  {p.passage_id}: {len(p.text.split())} words -> {p.text[:50]}...")
