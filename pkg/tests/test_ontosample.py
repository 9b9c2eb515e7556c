import logging
from collections import Counter
from pathlib import Path

import pytest

from el_mimic.kb import KBParseError, Kind, KnowledgeBase, Name, Signature, Sub, is_connected
from el_mimic.ontosample import (
    OntologyLoadError,
    SamplingError,
    load_ontology,
    sample_connected,
    sample_many,
)
from el_mimic.reasoner import saturate
from el_mimic.syngen import GenConfig, generate


def _chain(length: int) -> KnowledgeBase:
    labels = {Name(Kind.CONCEPT, i): f"node {i}" for i in range(1, length + 2)}
    axioms = tuple(Sub(i, i + 1) for i in range(1, length + 1))
    return KnowledgeBase(Signature(length + 1, 1), axioms, labels)


def _write(tmp_path: Path, text: str) -> Path:
    path = tmp_path / "onto.txt"
    path.write_text(text, encoding="utf-8")
    return path


def test_load_ontology_reads_canonical_file(tmp_path: Path) -> None:
    path = _write(tmp_path, "sig 10 2\nC1 < C2\nC2 < R1 . C3\nR1 < R2\n")

    loaded = load_ontology(path)

    assert len(loaded.kb) == 3
    assert loaded.skipped == 0
    assert loaded.kb.signature == Signature(10, 2)


def test_load_ontology_skips_self_restriction(
    tmp_path: Path, caplog: pytest.LogCaptureFixture
) -> None:
    path = _write(tmp_path, "C1 < C2\nTop < R1 . Self\nC2 < C3\n")

    with caplog.at_level(logging.INFO, logger="el_mimic"):
        loaded = load_ontology(path)

    assert loaded.kb.axioms == (Sub(1, 2), Sub(2, 3))
    assert loaded.skipped == 1
    assert "line 2: skipped" in caplog.text


def test_load_ontology_normalizes_general_axioms(tmp_path: Path) -> None:
    path = _write(tmp_path, "# anatomy excerpt\nC1 = C2 & C3\nC4 < R1 . (C1 & C5)\n")

    loaded = load_ontology(path)

    assert loaded.kb.signature.max_concepts == 6
    assert Sub(1, 2) in loaded.kb
    assert all(n.index <= 6 for a in loaded.kb for n in a.names())


def test_load_ontology_axiom_count_matches_content_lines(tmp_path: Path) -> None:
    lines = [f"C{i} < C{i + 1}" for i in range(1, 200)]
    lines[10:10] = ["# comment", "", "C3 < R2 . Self"]
    path = _write(tmp_path, "\n".join(lines) + "\n")

    loaded = load_ontology(path)

    assert len(loaded.kb) == len(lines) - 2 - loaded.skipped
    assert loaded.skipped == 1


def test_load_ontology_keeps_labels_inside_signature(
    tmp_path: Path, caplog: pytest.LogCaptureFixture
) -> None:
    path = _write(tmp_path, "C1 < C2\nlabel C1 atrium\nlabel C9 unused\n")

    with caplog.at_level(logging.WARNING, logger="el_mimic"):
        loaded = load_ontology(path)

    assert loaded.kb.labels == {Name(Kind.CONCEPT, 1): "atrium"}
    assert "label for C9 dropped" in caplog.text


def test_load_ontology_reports_syntax_errors_with_line(tmp_path: Path) -> None:
    path = _write(tmp_path, "C1 < C2\nC1 <\n")

    with pytest.raises(KBParseError) as exc_info:
        load_ontology(path)

    assert exc_info.value.line_number == 2


def test_load_ontology_fails_without_usable_axioms(tmp_path: Path) -> None:
    path = _write(tmp_path, "# nothing\nTop < R1 . Self\n")

    with pytest.raises(OntologyLoadError, match="1 skipped"):
        load_ontology(path)


def test_load_ontology_fails_on_missing_file(tmp_path: Path) -> None:
    with pytest.raises(OntologyLoadError, match="cannot read"):
        load_ontology(tmp_path / "missing.txt")


def test_sample_whole_connected_kb_is_an_anonymized_copy() -> None:
    kb = _chain(6)

    sample = sample_connected(kb, size=6, min_steps=0, seed=1)

    assert len(sample.kb) == 6
    assert Counter(type(a) for a in sample.kb) == Counter(type(a) for a in kb)
    assert {sample.original_axiom(a) for a in sample.kb} == set(kb.axioms)
    assert sample.kb.labels == {}
    for name, text in sample.labels.items():
        assert kb.labels[sample.original_name(name)] == text


def test_sample_single_axiom() -> None:
    sample = sample_connected(_chain(6), size=1, min_steps=0, seed=4)

    assert len(sample.kb) == 1
    assert sample.kb.signature == Signature(2, 1)


def test_sample_meets_step_bound_and_stays_connected() -> None:
    kb = _chain(40)

    for seed in range(5):
        sample = sample_connected(kb, size=20, min_steps=3, seed=seed)

        assert len(sample.kb) == 20
        assert is_connected(sample.kb)
        assert len(saturate(sample.kb)) == sample.steps >= 3


def test_sample_from_synthetic_kb() -> None:
    kb = generate(GenConfig(iterations=5, random_axioms=160, seed=2))

    sample = sample_connected(kb, size=20, min_steps=1, seed=0)

    assert len(kb) == 200
    assert is_connected(sample.kb)
    assert len(saturate(sample.kb)) >= 1
    assert sample.kb.signature.max_concepts <= 60


def test_sample_reports_best_activity_when_exhausted() -> None:
    with pytest.raises(SamplingError) as exc_info:
        sample_connected(_chain(12), size=5, min_steps=10, seed=0, max_retries=20)

    assert exc_info.value.best_steps == 3


def test_sample_fails_when_no_component_is_large_enough() -> None:
    kb = KnowledgeBase(Signature(4, 1), (Sub(1, 2), Sub(3, 4)))

    with pytest.raises(SamplingError):
        sample_connected(kb, size=2, min_steps=0, seed=0, max_retries=5)


@pytest.mark.parametrize(("size", "min_steps"), [(0, 0), (13, 0), (3, -1)])
def test_sample_rejects_bad_arguments(size: int, min_steps: int) -> None:
    with pytest.raises(ValueError):
        sample_connected(_chain(12), size=size, min_steps=min_steps, seed=0)


def test_sample_many_is_deterministic_across_thread_counts() -> None:
    kb = _chain(30)

    serial = sample_many(kb, 4, size=8, min_steps=2, seed=5)
    threaded = sample_many(kb, 4, size=8, min_steps=2, seed=5, threads=3)

    assert [s.kb for s in serial] == [s.kb for s in threaded]
    assert [s.origin for s in serial] == [s.origin for s in threaded]
