"""Corpus ingestion: line-delimited document records segmented into passages.

The passage is the retrieval unit of the whole system.  Segmentation is
deterministic and lossless: every non-whitespace character of a document's
title/abstract/body fields lands in exactly one passage, and passage ids are
reversible (``doc_id#ordinal``).
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from datetime import date
from enum import Enum
from pathlib import Path
from typing import Iterator

from .textproc import Analyzer, analyze

DEFAULT_MAX_TERMS = 128

_PARAGRAPH_RE = re.compile(r"\n\s*\n")
_SENTENCE_RE = re.compile(r"(?<=[.!?])\s+")
_ID_SEP = "#"


class CorpusError(ValueError):
    """Malformed corpus record in strict mode, or unusable loader input."""


class SourceKind(str, Enum):
    ABSTRACT_ONLY = "abstract-only"
    FULL_TEXT = "full-text"


class PassageField(str, Enum):
    TITLE = "title"
    ABSTRACT = "abstract"
    BODY = "body"


@dataclass
class Document:
    doc_id: str
    title: str = ""
    abstract: str = ""
    body: list[str] = field(default_factory=list)
    date: date | None = None

    @property
    def source(self) -> SourceKind:
        return SourceKind.FULL_TEXT if self.body else SourceKind.ABSTRACT_ONLY


@dataclass(frozen=True)
class Passage:
    passage_id: str
    doc_id: str
    text: str
    ordinal: int
    field: PassageField


@dataclass
class CorpusStats:
    num_documents: int = 0
    num_passages: int = 0
    avg_passage_length: float = 0.0


def encode_passage_id(doc_id: str, ordinal: int) -> str:
    return f"{doc_id}{_ID_SEP}{ordinal}"


def decode_passage_id(passage_id: str) -> tuple[str, int]:
    """Inverse of :func:`encode_passage_id`; doc ids may themselves contain '#'."""
    doc_id, _, ordinal = passage_id.rpartition(_ID_SEP)
    if not doc_id or not ordinal.isdigit():
        raise ValueError(f"not a passage id: {passage_id!r}")
    return doc_id, int(ordinal)


def _parse_record(line: str) -> Document:
    try:
        raw = json.loads(line)
    except json.JSONDecodeError as exc:
        raise CorpusError(f"invalid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise CorpusError("record is not an object")
    doc_id = raw.get("id")
    if not isinstance(doc_id, str) or not doc_id:
        raise CorpusError("missing or empty 'id'")
    title = raw.get("title", "")
    abstract = raw.get("abstract", "")
    body = raw.get("body", [])
    if not isinstance(title, str) or not isinstance(abstract, str):
        raise CorpusError("'title'/'abstract' must be strings")
    if not isinstance(body, list) or not all(isinstance(s, str) for s in body):
        raise CorpusError("'body' must be an array of strings")
    parsed_date: date | None = None
    raw_date = raw.get("date")
    if raw_date is not None:
        if not isinstance(raw_date, str):
            raise CorpusError("'date' must be an ISO-8601 string")
        try:
            parsed_date = date.fromisoformat(raw_date)
        except ValueError as exc:
            raise CorpusError(f"bad date {raw_date!r}") from exc
    if not (title.strip() or abstract.strip() or any(s.strip() for s in body)):
        raise CorpusError("document has no content in title/abstract/body")
    return Document(doc_id=doc_id, title=title, abstract=abstract, body=list(body), date=parsed_date)


class CorpusReader:
    """Streaming reader over a line-delimited corpus file.

    Lenient mode counts and skips malformed lines (``skipped`` attribute);
    strict mode raises :class:`CorpusError` with the offending line number.
    Duplicate doc ids are treated as malformed.
    """

    def __init__(self, path: str | Path, strict: bool = False):
        self.path = Path(path)
        self.strict = strict
        self.skipped = 0
        if not self.path.is_file():
            raise FileNotFoundError(self.path)

    def __iter__(self) -> Iterator[Document]:
        seen: set[str] = set()
        with open(self.path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    doc = _parse_record(line)
                    if doc.doc_id in seen:
                        raise CorpusError(f"duplicate doc id {doc.doc_id!r}")
                    seen.add(doc.doc_id)
                except CorpusError as exc:
                    if self.strict:
                        raise CorpusError(f"{self.path}:{lineno}: {exc}") from exc
                    self.skipped += 1
                    continue
                yield doc


def load_corpus(path: str | Path, strict: bool = False) -> CorpusReader:
    return CorpusReader(path, strict=strict)


def _normalize(text: str) -> str:
    return " ".join(text.split())


def _split_sentences(paragraph: str) -> list[str]:
    return [s for s in _SENTENCE_RE.split(paragraph) if s.strip()]


def _greedy_chunks(paragraph: str, max_terms: int, analyzer: Analyzer) -> list[str]:
    """Split an oversize paragraph at sentence boundaries, greedily filling up
    to ``max_terms`` analyzed terms per chunk.  A single sentence longer than
    the budget is kept whole."""
    sentences = _split_sentences(paragraph)
    chunks: list[str] = []
    current: list[str] = []
    current_terms = 0
    for sentence in sentences:
        n = len(analyzer.analyze(sentence))
        if current and current_terms + n > max_terms:
            chunks.append(" ".join(current))
            current = []
            current_terms = 0
        current.append(sentence)
        current_terms += n
        if current_terms > max_terms:
            # Single oversize sentence (it started its own chunk): emit whole.
            chunks.append(" ".join(current))
            current = []
            current_terms = 0
    if current:
        chunks.append(" ".join(current))
    return chunks


def segment_passages(
    doc: Document,
    max_terms: int = DEFAULT_MAX_TERMS,
    analyzer: Analyzer | None = None,
) -> list[Passage]:
    """Segment a document into passages.

    The title, when non-empty, becomes ordinal 0.  The abstract and each body
    section are split on blank-line paragraph boundaries; paragraphs exceeding
    ``max_terms`` analyzed terms are further split at sentence boundaries.
    """
    if max_terms < 8:
        raise ValueError("max_terms must be at least 8")
    analyzer = analyzer or Analyzer()

    pieces: list[tuple[str, PassageField]] = []
    title = _normalize(doc.title)
    if title:
        pieces.append((title, PassageField.TITLE))
    for source_text, fld in [(doc.abstract, PassageField.ABSTRACT)] + [
        (section, PassageField.BODY) for section in doc.body
    ]:
        for paragraph in _PARAGRAPH_RE.split(source_text):
            paragraph = _normalize(paragraph)
            if not paragraph:
                continue
            if len(analyzer.analyze(paragraph)) <= max_terms:
                pieces.append((paragraph, fld))
            else:
                for chunk in _greedy_chunks(paragraph, max_terms, analyzer):
                    pieces.append((chunk, fld))

    return [
        Passage(
            passage_id=encode_passage_id(doc.doc_id, ordinal),
            doc_id=doc.doc_id,
            text=text,
            ordinal=ordinal,
            field=fld,
        )
        for ordinal, (text, fld) in enumerate(pieces)
    ]


def segment_corpus(
    reader: CorpusReader | Iterator[Document],
    max_terms: int = DEFAULT_MAX_TERMS,
    analyzer: Analyzer | None = None,
) -> tuple[list[Passage], CorpusStats]:
    """Segment every document of a corpus; returns passages plus corpus stats."""
    analyzer = analyzer or Analyzer()
    passages: list[Passage] = []
    num_docs = 0
    total_terms = 0
    for doc in reader:
        num_docs += 1
        for passage in segment_passages(doc, max_terms=max_terms, analyzer=analyzer):
            passages.append(passage)
            total_terms += len(analyze(passage.text, analyzer))
    stats = CorpusStats(
        num_documents=num_docs,
        num_passages=len(passages),
        avg_passage_length=(total_terms / len(passages)) if passages else 0.0,
    )
    return passages, stats
