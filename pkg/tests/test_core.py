import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from segshap.core import (
    AttributionResult,
    Coalition,
    FeaturePartition,
    InputDocument,
    Mode,
    Task,
    assemble,
    assemble_mask,
    read_dataset,
    write_dataset,
)
from segshap.errors import ContractViolation

texts = st.lists(st.text(min_size=1, max_size=12), min_size=1, max_size=8)


def test_task_aliases():
    assert Task.parse("codegen") is Task.CODE_GENERATION
    assert Task.parse("codesum") is Task.CODE_SUMMARIZATION
    assert Task.parse("code_generation") is Task.CODE_GENERATION
    with pytest.raises(ValueError):
        Task.parse("translate")


def test_mode_alias():
    assert Mode.parse("mc") is Mode.MONTE_CARLO
    assert Mode.parse(Mode.EXACT) is Mode.EXACT


def test_document_rejects_empty_text():
    with pytest.raises(ContractViolation):
        InputDocument("a", Task.CODE_GENERATION, "")


def test_dataset_roundtrip(tmp_path):
    docs = [
        InputDocument("a", Task.CODE_GENERATION, "Sort a list."),
        InputDocument("b", Task.CODE_SUMMARIZATION, "def f():\n    return 1\n", "python"),
    ]
    path = tmp_path / "d.jsonl"
    write_dataset(docs, path)
    assert read_dataset(path) == docs


def test_dataset_duplicate_ids(tmp_path):
    path = tmp_path / "d.jsonl"
    row = json.dumps({"id": "x", "task": "codegen", "text": "t"})
    path.write_text(row + "\n" + row + "\n")
    with pytest.raises(ContractViolation, match="duplicate"):
        read_dataset(path)


def test_partition_offsets_are_utf8_bytes():
    p = FeaturePartition.from_texts("d", ["héllo ", "wörld"], "nl_rule")
    assert [(f.byte_start, f.byte_end) for f in p] == [(0, 7), (7, 13)]
    assert p.text == "héllo wörld"


def test_partition_rejects_gaps_and_empty_features():
    with pytest.raises(ContractViolation):
        FeaturePartition.from_texts("d", ["a", "", "b"], "x")
    good = FeaturePartition.from_texts("d", ["ab", "cd"], "x")
    f0, f1 = good.features
    with pytest.raises(ContractViolation):
        FeaturePartition("d", (f0, type(f1)(1, "cd", 3, 5)), "x")


@given(texts)
def test_full_coalition_reproduces_input(parts):
    p = FeaturePartition.from_texts("d", parts, "x")
    assert assemble(p, Coalition.full(len(p))) == "".join(parts)


@given(texts, st.data())
def test_assemble_keeps_order_and_matches_mask_path(parts, data):
    p = FeaturePartition.from_texts("d", parts, "x")
    mask = data.draw(st.integers(0, (1 << len(parts)) - 1))
    c = Coalition.from_mask(mask)
    assert c.mask == mask
    expected = "".join(t for i, t in enumerate(parts) if i in c.kept)
    assert assemble(p, c) == expected == assemble_mask(parts, mask)


def test_assemble_out_of_range():
    p = FeaturePartition.from_texts("d", ["a", "b"], "x")
    with pytest.raises(ContractViolation):
        assemble(p, Coalition(frozenset({2})))
    with pytest.raises(ContractViolation):
        assemble_mask(["a", "b"], 0b100)


def _result(display, raw=None):
    p = FeaturePartition.from_texts("d", ["a ", "b ", "c"], "x")
    return AttributionResult(p, raw or (0.1, 0.2, 0.3), display, Mode.EXACT, 1.0, 0, 7)


def test_result_validates_display():
    _result((0.2, 0.3, 0.5))
    with pytest.raises(ContractViolation):
        _result((0.2, 0.3, 0.4))
    with pytest.raises(ContractViolation):
        _result((-0.1, 0.6, 0.5))
    with pytest.raises(ContractViolation):
        _result((0.5, 0.5))
