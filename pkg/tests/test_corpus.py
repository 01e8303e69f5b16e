"""Tests for corpus loading, vocabularies and segmentation."""

import logging

import pytest
from conftest import write_lines

from discourse_risk.corpus import (
    BOS_ID,
    DOC_SEPARATOR,
    EOS_ID,
    PAD_ID,
    UNK_ID,
    Document,
    ParallelDocument,
    Sentence,
    Side,
    Vocabulary,
    build_vocab,
    load_corpus,
    make_batches,
    make_segments,
    tokenize,
    write_corpus,
)
from discourse_risk.errors import AlignmentError, CorpusError, EmptySentence


def _doc(doc_id, k):
    src = tuple(Sentence((f"s{i}",), i) for i in range(k))
    tgt = tuple(Sentence((f"t{i}",), i) for i in range(k))
    return ParallelDocument(Document(doc_id, src, Side.SOURCE), Document(doc_id, tgt, Side.TARGET))


def test_tokenize_lowercases_and_splits_punctuation():
    """Test that tokenize lowercases and splits punctuation off words."""
    assert tokenize("The cat, sat.").tokens == ("the", "cat", ",", "sat", ".")
    assert tokenize("a").tokens == ("a",)


def test_tokenize_keeps_reserved_tokens_whole():
    """Test that reserved surfaces survive tokenization as single tokens."""
    assert tokenize("<unk> x <unk>").tokens == ("<unk>", "x", "<unk>")
    assert tokenize("<s> A </s> <pad>").tokens == ("<s>", "a", "</s>", "<pad>")
    assert tokenize("a<b").tokens == ("a", "<", "b")
    assert tokenize("<UNK>,").tokens == ("<unk>", ",")


def test_tokenize_rejects_blank_lines():
    """Test that whitespace-only lines are rejected."""
    with pytest.raises(EmptySentence):
        tokenize("  \t ")


def test_load_corpus_splits_documents(corpus_files):
    """Test that separator lines split both sides into aligned documents."""
    src, tgt = corpus_files(
        ["a b", "c", "d", DOC_SEPARATOR, "e", "f g"],
        ["A B", "C", "D", DOC_SEPARATOR, "E", "F G"],
    )
    docs = load_corpus(src, tgt)
    assert [d.id for d in docs] == ["doc0", "doc1"]
    assert [d.k for d in docs] == [3, 2]
    assert docs[1].target.sentences[1].tokens == ("f", "g")
    assert [s.doc_position for s in docs[0].source.sentences] == [0, 1, 2]
    print(f"✓ Loaded {len(docs)} documents")


def test_load_corpus_single_sentence_document(corpus_files):
    """Test that a one-sentence corpus yields a single k=1 document."""
    src, tgt = corpus_files(["hello"], ["bonjour"])
    docs = load_corpus(src, tgt)
    assert len(docs) == 1 and docs[0].k == 1


def test_load_corpus_ignores_edge_separators(corpus_files):
    """Test that leading and trailing separators do not create empty documents."""
    src, tgt = corpus_files(
        [DOC_SEPARATOR, "a", DOC_SEPARATOR, "b", DOC_SEPARATOR],
        [DOC_SEPARATOR, "x", DOC_SEPARATOR, "y", DOC_SEPARATOR],
    )
    assert [d.k for d in load_corpus(src, tgt)] == [1, 1]


def test_load_corpus_document_count_mismatch(corpus_files):
    """Test that differing document counts raise AlignmentError."""
    src, tgt = corpus_files(
        ["a", DOC_SEPARATOR, "b", DOC_SEPARATOR, "c"],
        ["a", DOC_SEPARATOR, "b", "c"],
    )
    with pytest.raises(AlignmentError):
        load_corpus(src, tgt)


def test_load_corpus_sentence_count_mismatch(corpus_files):
    """Test that per-document sentence counts must agree."""
    src, tgt = corpus_files(["a", "b", DOC_SEPARATOR, "c"], ["a", DOC_SEPARATOR, "b", "c"])
    with pytest.raises(AlignmentError):
        load_corpus(src, tgt)


def test_load_corpus_blank_line_reports_line_number(corpus_files):
    """Test that a blank sentence line is rejected with its location."""
    src, tgt = corpus_files(["a", "", "c"], ["a", "b", "c"])
    with pytest.raises(EmptySentence, match=r"c\.src:2"):
        load_corpus(src, tgt)


def test_load_corpus_missing_file(tmp_path):
    """Test that a missing corpus file raises FileNotFoundError."""
    src = write_lines(tmp_path / "x.src", ["a"])
    with pytest.raises(FileNotFoundError):
        load_corpus(src, tmp_path / "missing.tgt")


def test_load_corpus_truncates_long_sentences(corpus_files, caplog):
    """Test that sentences beyond max_len are truncated with a warning."""
    src, tgt = corpus_files(["a b c d e"], ["a b"])
    with caplog.at_level(logging.WARNING, logger="discourse_risk.corpus"):
        docs = load_corpus(src, tgt, max_len=3)
    assert docs[0].source.sentences[0].tokens == ("a", "b", "c")
    assert "truncating" in caplog.text


def test_write_corpus_round_trip(tmp_path):
    """Test that written documents load back unchanged."""
    docs = [_doc("doc0", 2), _doc("doc1", 3)]
    write_corpus(docs, tmp_path / "w.src", tmp_path / "w.tgt")
    assert (tmp_path / "w.src").read_text().count(DOC_SEPARATOR) == 1
    assert load_corpus(tmp_path / "w.src", tmp_path / "w.tgt") == docs


def test_vocabulary_reserved_ids_and_unknown_lookup():
    """Test that reserved tokens occupy ids 0..3 and unknown words map to UNK."""
    vocab = Vocabulary(["cat", "dog"])
    assert [vocab.surface(i) for i in (PAD_ID, BOS_ID, EOS_ID, UNK_ID)] == [
        "<pad>", "<s>", "</s>", "<unk>",
    ]
    assert vocab.id("cat") == 4
    assert vocab.lookup("zebra").id == UNK_ID
    ids = vocab.encode(["dog", "cat"])
    assert vocab.encode(vocab.decode(ids)) == ids


def test_vocabulary_from_list_validates():
    """Test that from_list requires the reserved prefix and unique entries."""
    good = Vocabulary(["x", "y"])
    assert Vocabulary.from_list(good.to_list()) == good
    assert Vocabulary.from_list(good.to_list()).digest() == good.digest()
    with pytest.raises(CorpusError):
        Vocabulary.from_list(["x", "y"])
    with pytest.raises(CorpusError):
        Vocabulary.from_list([*good.to_list(), "x"])


def test_build_vocab_frequency_and_min_freq(corpus_files):
    """Test that build_vocab keeps frequent tokens above min_freq."""
    src, tgt = corpus_files(["a a a b b c"], ["a a a b b c"])
    vocab = build_vocab(load_corpus(src, tgt), max_size=6, min_freq=2)
    assert vocab.to_list() == ["<pad>", "<s>", "</s>", "<unk>", "a", "b"]


def test_build_vocab_breaks_ties_lexicographically(corpus_files):
    """Test that equally frequent tokens are ordered lexicographically."""
    src, tgt = corpus_files(["b a b a"], ["b a b a"])
    vocab = build_vocab(load_corpus(src, tgt), max_size=5)
    assert vocab.to_list()[4:] == ["a"]


def test_build_vocab_empty_and_too_small():
    """Test the empty corpus and the minimum size."""
    assert len(build_vocab([], max_size=5)) == 4
    with pytest.raises(CorpusError):
        build_vocab([], max_size=4)


def test_build_vocab_sides(corpus_files):
    """Test that source and target vocabularies are built separately."""
    src, tgt = corpus_files(["x y"], ["u v"])
    docs = load_corpus(src, tgt)
    assert "x" in build_vocab(docs, 10, side=Side.SOURCE)
    assert "x" not in build_vocab(docs, 10, side=Side.TARGET)


@pytest.mark.parametrize("k, sizes", [(31, [15, 15, 1]), (15, [15]), (1, [1])])
def test_make_segments_sizes(k, sizes):
    """Test segment sizes for a 15-sentence limit."""
    segments = make_segments(_doc("d", k), 15)
    assert [len(s) for s in segments] == sizes
    assert [s.origin_doc_offset for s in segments] == [15 * i for i in range(len(sizes))]


def test_make_segments_partition_and_context():
    """Test that segments partition the document and carry the preceding source."""
    doc = _doc("d", 7)
    segments = make_segments(doc, 3)
    pairs = [p for s in segments for p in s.sentence_pairs]
    assert pairs == doc.pairs()
    assert segments[0].preceding_source is None
    assert segments[1].preceding_source == doc.source.sentences[2]
    assert segments[1].contexts()[1] == doc.source.sentences[3]
    with pytest.raises(CorpusError):
        make_segments(doc, 0)


def test_make_batches_packing_splits_at_documents():
    """Test that packed batches hold one segment per document and never mix them."""
    docs = [_doc("d0", 3), _doc("d1", 4)]
    unpacked = make_batches(docs, 2)
    assert [[len(s) for s in b] for b in unpacked] == [[2], [1], [2], [2]]

    packed = make_batches(docs, 4, pack_documents=True)
    assert [[(s.doc_id, len(s)) for s in b] for b in packed] == [
        [("d0", 3), ("d1", 1)],
        [("d1", 3)],
    ]
    assert packed[1][0].origin_doc_offset == 1
    assert packed[1][0].preceding_source == docs[1].source.sentences[0]
