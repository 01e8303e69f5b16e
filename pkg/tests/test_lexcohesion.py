"""Tests for the relation database and the LC metric."""

import itertools
import logging

import numpy as np
import pytest
from conftest import sentences, write_lines

from discourse_risk.corpus import Sentence
from discourse_risk.errors import ConfigError, ResourceParseError, UnknownLabel
from discourse_risk.lexcohesion import (
    ALL_LABELS,
    RelationDb,
    RelationLabel,
    StopList,
    is_content_token,
    lexical_cohesion,
    load_relation_db,
    load_stoplist,
    parse_labels,
)

SYN = RelationLabel.SYNONYM
MER = RelationLabel.MERONYM


def brute_force_devices(tokens, db, stop, labels=ALL_LABELS):
    """Check every earlier position for every content token."""
    content = [t for t in tokens if is_content_token(t, stop)]
    devices = 0
    for j, tok in enumerate(content):
        if any(prev == tok or db.are_related(tok, prev, labels) for prev in content[:j]):
            devices += 1
    return devices, len(content)


def component_devices(tokens, db, stop):
    """Content tokens minus connected components of the relation graph on the block."""
    content = [t for t in tokens if is_content_token(t, stop)]
    parent = list(range(len(content)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, j in itertools.combinations(range(len(content)), 2):
        a, b = content[i], content[j]
        if a == b or db.are_related(a, b):
            parent[find(i)] = find(j)
    components = len({find(i) for i in range(len(content))})
    return len(content) - components, len(content)


def random_block(rng, words, max_sents=5, max_tokens=20):
    block = []
    budget = int(rng.integers(1, max_tokens + 1))
    k = int(rng.integers(1, max_sents + 1))
    for i in range(k):
        length = max(1, budget // k)
        block.append(Sentence(tuple(rng.choice(words, size=length).tolist()), i))
    return block


def test_load_relation_db_symmetric_closure(tmp_path):
    """Test that every loaded edge is also stored in reverse."""
    path = write_lines(tmp_path / "rel.tsv", ["# comment", "car\tsynonym\tautomobile", ""])
    db = load_relation_db(path)
    assert ("car", SYN) in db.related("automobile")
    assert ("automobile", SYN) in db.related("car")
    print(f"✓ Loaded relation db with {len(db)} words")


def test_load_relation_db_unknown_label(tmp_path):
    """Test that unknown labels are rejected with the line number."""
    path = write_lines(tmp_path / "rel.tsv", ["car\tsynonym\tauto", "cat\tfriend\tdog"])
    with pytest.raises(UnknownLabel) as info:
        load_relation_db(path)
    assert info.value.line == 2


def test_load_relation_db_malformed_line(tmp_path):
    """Test that lines without three fields raise ResourceParseError."""
    path = write_lines(tmp_path / "rel.tsv", ["car synonym auto"])
    with pytest.raises(ResourceParseError) as info:
        load_relation_db(path)
    assert info.value.line == 1


def test_load_relation_db_empty_file(tmp_path):
    """Test that an empty file gives an empty database."""
    path = tmp_path / "empty.tsv"
    path.write_text("", encoding="utf-8")
    assert len(load_relation_db(path)) == 0


def test_self_relations_are_dropped(caplog):
    """Test that self-relations are dropped with a warning."""
    with caplog.at_level(logging.WARNING):
        db = RelationDb.from_triples([("cat", SYN, "cat")])
    assert len(db) == 0
    assert "self-relation" in caplog.text


def test_load_stoplist(tmp_path):
    """Test that the stoplist is lowercased and skips comments."""
    stop = load_stoplist(write_lines(tmp_path / "stop.txt", ["# words", "The", "of"]))
    assert "the" in stop and "of" in stop and len(stop) == 2


def test_lc_repetition_across_sentences():
    """Test that a repeated word in a later sentence is a device."""
    score = lexical_cohesion(sentences("cat sat", "cat ran"), RelationDb())
    assert (score.devices, score.content_tokens) == (1, 4)
    assert score.value == pytest.approx(0.25)


def test_lc_unrelated_tokens():
    """Test that tokens with no repetition or relation score zero."""
    db = RelationDb.from_triples([("car", SYN, "automobile")])
    assert lexical_cohesion(sentences("car road"), db).value == 0.0


def test_lc_synonym_and_meronym():
    """Test that relations to any earlier token count."""
    db = RelationDb.from_triples([("car", SYN, "automobile"), ("car", MER, "wheel")])
    score = lexical_cohesion(sentences("car automobile wheel"), db)
    assert score.devices == 2
    assert score.value == pytest.approx(2 / 3)


def test_lc_stopwords_punctuation_and_reserved_are_not_content():
    """Test the content-token filter."""
    stop = StopList.of(["the"])
    score = lexical_cohesion(sentences("the cat .", "the cat <unk> ."), RelationDb(), stop)
    assert (score.devices, score.content_tokens) == (1, 2)


def test_lc_all_stopwords():
    """Test that a block without content tokens scores zero."""
    score = lexical_cohesion(sentences("the of", "."), RelationDb(), StopList.of(["the", "of"]))
    assert (score.value, score.content_tokens, score.devices) == (0.0, 0, 0)


def test_lc_label_restriction_and_denominator():
    """Test that disabled labels stop counting while repetition always counts."""
    db = RelationDb.from_triples([("car", SYN, "automobile")])
    block = sentences("car automobile car ,")
    assert lexical_cohesion(block, db).devices == 2
    assert lexical_cohesion(block, db, labels=frozenset({MER})).devices == 1
    all_words = lexical_cohesion(block, db, denominator="all")
    assert all_words.value == pytest.approx(2 / 4)
    with pytest.raises(ConfigError):
        lexical_cohesion(block, db, denominator="tokens")


def test_parse_labels():
    """Test label list parsing."""
    assert parse_labels("") == ALL_LABELS
    assert parse_labels("synonym, hypernym") == {SYN, RelationLabel.HYPERNYM}
    with pytest.raises(ConfigError):
        parse_labels("friend")


def test_lc_matches_pairwise_oracle_on_random_relations():
    """Test that LC matches brute-force pairwise enumeration with arbitrary relations."""
    rng = np.random.default_rng(11)
    words = ["w0", "w1", "w2", "w3", "w4", "w5", "the", ","]
    stop = StopList.of(["the"])
    for _ in range(100):
        pairs = [
            (a, SYN, b)
            for a, b in itertools.combinations(words[:6], 2)
            if rng.random() < 0.2
        ]
        db = RelationDb.from_triples(pairs)
        block = random_block(rng, words)
        tokens = [t for s in block for t in s.tokens]
        score = lexical_cohesion(block, db, stop)
        assert (score.devices, score.content_tokens) == brute_force_devices(tokens, db, stop)


def test_lc_matches_component_oracle_on_clique_relations():
    """Test devices == content tokens - connected components for transitive relations."""
    rng = np.random.default_rng(5)
    groups = [["w0", "w1", "w2"], ["w3", "w4"], ["w5"], ["w6"]]
    db = RelationDb.from_triples(
        (a, SYN, b) for group in groups for a, b in itertools.combinations(group, 2)
    )
    words = [w for g in groups for w in g] + ["the", "."]
    stop = StopList.of(["the"])
    for _ in range(500):
        block = random_block(rng, words)
        tokens = [t for s in block for t in s.tokens]
        score = lexical_cohesion(block, db, stop)
        devices, content = component_devices(tokens, db, stop)
        assert score.devices == devices
        assert abs(score.value - devices / max(content, 1)) <= 1e-12
        # order does not matter when the relation is transitive
        shuffled = [Sentence(tuple(rng.permutation(tokens).tolist()), 0)]
        assert lexical_cohesion(shuffled, db, stop).devices == devices


def test_lc_properties():
    """Test the value range and the effect of appending a repetition."""
    rng = np.random.default_rng(2)
    words = ["a", "b", "c", "d", "e"]
    for _ in range(50):
        block = random_block(rng, words)
        score = lexical_cohesion(block, RelationDb())
        assert 0.0 <= score.value < 1.0
        repeat = block[0].tokens[0]
        extended = block + [Sentence((repeat,), len(block))]
        assert lexical_cohesion(extended, RelationDb()).devices == score.devices + 1
        assert lexical_cohesion(block, RelationDb()) == score
