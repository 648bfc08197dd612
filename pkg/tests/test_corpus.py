"""Corpus loading and passage segmentation."""

import json
from collections import Counter

import pytest
from hypothesis import given, strategies as st

from oracles import greedy_split_reference
from vertsearch.corpus import (
    CorpusError,
    Document,
    PassageField,
    decode_passage_id,
    encode_passage_id,
    load_corpus,
    segment_corpus,
    segment_passages,
)
from vertsearch.textproc import Analyzer


def write_corpus(tmp_path, records):
    path = tmp_path / "corpus.jsonl"
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write((record if isinstance(record, str) else json.dumps(record)) + "\n")
    return path


class TestLoader:
    def test_two_wellformed_lines(self, tmp_path):
        path = write_corpus(
            tmp_path,
            [{"id": "a", "title": "First"}, {"id": "b", "abstract": "Second."}],
        )
        docs = list(load_corpus(path))
        assert [d.doc_id for d in docs] == ["a", "b"]

    def test_lenient_skips_malformed(self, tmp_path):
        path = write_corpus(tmp_path, [{"id": "a", "title": "Ok"}, "{not json"])
        reader = load_corpus(path)
        docs = list(reader)
        assert [d.doc_id for d in docs] == ["a"]
        assert reader.skipped == 1

    def test_strict_raises_with_line_number(self, tmp_path):
        path = write_corpus(tmp_path, [{"id": "a", "title": "Ok"}, "{not json"])
        with pytest.raises(CorpusError, match=":2:"):
            list(load_corpus(path, strict=True))

    def test_empty_file(self, tmp_path):
        path = write_corpus(tmp_path, [])
        reader = load_corpus(path)
        passages, stats = segment_corpus(reader)
        assert passages == []
        assert (stats.num_documents, stats.num_passages, stats.avg_passage_length) == (0, 0, 0.0)

    def test_missing_file_is_fatal(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_corpus(tmp_path / "nope.jsonl")

    def test_duplicate_id_counts_as_malformed(self, tmp_path):
        path = write_corpus(tmp_path, [{"id": "a", "title": "x"}, {"id": "a", "title": "y"}])
        reader = load_corpus(path)
        assert len(list(reader)) == 1
        assert reader.skipped == 1

    def test_contentless_record_is_malformed(self, tmp_path):
        path = write_corpus(tmp_path, [{"id": "a"}])
        reader = load_corpus(path)
        assert list(reader) == []
        assert reader.skipped == 1

    def test_bad_date_is_malformed(self, tmp_path):
        path = write_corpus(tmp_path, [{"id": "a", "title": "x", "date": "not-a-date"}])
        with pytest.raises(CorpusError, match="date"):
            list(load_corpus(path, strict=True))

    def test_source_kind_derived_from_body(self):
        assert Document(doc_id="d", abstract="a").source.value == "abstract-only"
        assert Document(doc_id="d", body=["text"]).source.value == "full-text"


class TestSegmentation:
    def test_title_is_ordinal_zero(self):
        doc = Document(doc_id="d", title="T", abstract="A.")
        passages = segment_passages(doc)
        assert [(p.text, p.ordinal, p.field) for p in passages] == [
            ("T", 0, PassageField.TITLE),
            ("A.", 1, PassageField.ABSTRACT),
        ]

    def test_blank_line_paragraph_boundary(self):
        doc = Document(doc_id="d", title="T", abstract="First para.\n\nSecond para.")
        texts = [p.text for p in segment_passages(doc)]
        assert texts == ["T", "First para.", "Second para."]

    def test_body_sections_follow_abstract(self):
        doc = Document(doc_id="d", title="T", abstract="A.", body=["S1 text.", "S2 text."])
        passages = segment_passages(doc)
        assert [p.field for p in passages] == [
            PassageField.TITLE,
            PassageField.ABSTRACT,
            PassageField.BODY,
            PassageField.BODY,
        ]
        assert [p.ordinal for p in passages] == [0, 1, 2, 3]

    def test_empty_document_yields_nothing(self):
        assert segment_passages(Document(doc_id="d")) == []

    def test_max_terms_precondition(self):
        with pytest.raises(ValueError):
            segment_passages(Document(doc_id="d", title="T"), max_terms=7)

    def test_oversize_sentence_kept_whole(self):
        sentence = " ".join(f"w{i}" for i in range(20)) + "."
        doc = Document(doc_id="d", abstract=sentence)
        passages = segment_passages(doc, max_terms=8)
        assert len(passages) == 1
        assert passages[0].text == sentence

    def test_greedy_split_matches_reference(self):
        # 3 sentences of 100 terms each, budget 128: greedy packs 1+1+1.
        sentences = [" ".join(f"s{i}w{j}" for j in range(100)) + "." for i in range(3)]
        paragraph = " ".join(sentences)
        doc = Document(doc_id="d", abstract=paragraph)
        got = [p.text for p in segment_passages(doc, max_terms=128)]
        assert got == greedy_split_reference(paragraph, 128)
        assert len(got) == 3

    @pytest.mark.parametrize("max_terms", [8, 16, 33, 128])
    def test_greedy_split_random_paragraphs(self, max_terms):
        import random

        rng = random.Random(max_terms)
        for _ in range(25):
            sentences = []
            for _ in range(rng.randint(1, 12)):
                n = rng.randint(1, 40)
                sentences.append(" ".join(f"w{rng.randint(0, 50)}" for _ in range(n)) + ".")
            paragraph = " ".join(sentences)
            doc = Document(doc_id="d", abstract=paragraph)
            got = [p.text for p in segment_passages(doc, max_terms=max_terms)]
            assert got == greedy_split_reference(paragraph, max_terms)

    def test_chunks_never_exceed_budget_except_lone_oversize(self):
        analyzer = Analyzer()
        sentences = ["short one.", " ".join(f"x{i}" for i in range(30)) + ".", "tail bit."]
        doc = Document(doc_id="d", abstract=" ".join(sentences))
        for p in segment_passages(doc, max_terms=10):
            n = len(analyzer.analyze(p.text))
            if n > 10:
                assert len([s for s in p.text.split(".") if s.strip()]) == 1

    def test_determinism(self):
        doc = Document(doc_id="d", title="T", abstract="A one. B two.\n\nC three.", body=["D."])
        assert segment_passages(doc) == segment_passages(doc)


def non_ws_multiset(*texts: str) -> Counter:
    return Counter(ch for text in texts for ch in text if not ch.isspace())


class TestLosslessness:
    def test_simple_document(self):
        doc = Document(doc_id="d", title="A  title", abstract="One. Two!\n\n Three?  ", body=["B  ody."])
        passages = segment_passages(doc, max_terms=8)
        assert non_ws_multiset(*(p.text for p in passages)) == non_ws_multiset(
            doc.title, doc.abstract, *doc.body
        )

    @given(
        title=st.text(max_size=40),
        abstract=st.text(max_size=300),
        body=st.lists(st.text(max_size=120), max_size=3),
    )
    def test_property(self, title, abstract, body):
        doc = Document(doc_id="d", title=title, abstract=abstract, body=body)
        passages = segment_passages(doc, max_terms=8)
        assert non_ws_multiset(*(p.text for p in passages)) == non_ws_multiset(
            title, abstract, *body
        )
        assert [p.ordinal for p in passages] == list(range(len(passages)))
        assert all(p.text.strip() for p in passages)


class TestPassageIds:
    def test_round_trip(self):
        assert decode_passage_id(encode_passage_id("doc1", 4)) == ("doc1", 4)

    @given(doc_id=st.text(min_size=1, max_size=30), ordinal=st.integers(0, 10**6))
    def test_round_trip_property(self, doc_id, ordinal):
        assert decode_passage_id(encode_passage_id(doc_id, ordinal)) == (doc_id, ordinal)

    def test_doc_id_containing_separator(self):
        assert decode_passage_id(encode_passage_id("a#b#c", 2)) == ("a#b#c", 2)

    def test_invalid_id_rejected(self):
        with pytest.raises(ValueError):
            decode_passage_id("no-ordinal")
