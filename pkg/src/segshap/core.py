"""Shared data model: documents, features, partitions, coalitions, outputs.

All byte offsets refer to the UTF-8 encoding of the document text.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from .errors import ContractViolation


class Task(str, Enum):
    CODE_GENERATION = "code_generation"
    CODE_SUMMARIZATION = "code_summarization"

    @classmethod
    def parse(cls, value: str | Task) -> Task:
        if isinstance(value, Task):
            return value
        aliases = {"codegen": cls.CODE_GENERATION, "codesum": cls.CODE_SUMMARIZATION}
        if value in aliases:
            return aliases[value]
        return cls(value)


@dataclass(frozen=True)
class InputDocument:
    id: str
    task: Task
    text: str
    language_hint: str | None = None

    def __post_init__(self) -> None:
        if not self.text:
            raise ContractViolation(f"document {self.id!r} has empty text")
        object.__setattr__(self, "task", Task.parse(self.task))

    def to_dict(self) -> dict:
        d = {"id": self.id, "task": self.task.value, "text": self.text}
        if self.language_hint is not None:
            d["language_hint"] = self.language_hint
        return d

    @classmethod
    def from_dict(cls, d: dict) -> InputDocument:
        return cls(
            id=str(d["id"]),
            task=Task.parse(d["task"]),
            text=d["text"],
            language_hint=d.get("language_hint"),
        )


def read_dataset(path: str | Path) -> list[InputDocument]:
    """Load a JSONL dataset; ids must be unique."""
    docs: list[InputDocument] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                doc = InputDocument.from_dict(json.loads(line))
            except (KeyError, ValueError) as exc:
                raise ContractViolation(f"{path}:{lineno}: {exc}") from exc
            if doc.id in seen:
                raise ContractViolation(f"{path}:{lineno}: duplicate id {doc.id!r}")
            seen.add(doc.id)
            docs.append(doc)
    return docs


def write_dataset(docs: Iterable[InputDocument], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(json.dumps(doc.to_dict(), ensure_ascii=False) + "\n")


@dataclass(frozen=True)
class Feature:
    index: int
    text: str
    byte_start: int
    byte_end: int


@dataclass(frozen=True)
class FeaturePartition:
    """Ordered, contiguous, non-overlapping segmentation of one input."""

    source_id: str
    features: tuple[Feature, ...]
    splitter_name: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "features", tuple(self.features))
        if not self.features:
            raise ContractViolation("a partition needs at least one feature")
        pos = 0
        for i, f in enumerate(self.features):
            if f.index != i:
                raise ContractViolation(f"feature {i} carries index {f.index}")
            if f.byte_start != pos:
                raise ContractViolation(f"feature {i} is not contiguous with its predecessor")
            if f.byte_end - f.byte_start != len(f.text.encode("utf-8")):
                raise ContractViolation(f"feature {i} offsets disagree with its text")
            if f.byte_start >= f.byte_end and len(self.features) > 1:
                raise ContractViolation(f"feature {i} is empty")
            pos = f.byte_end

    @classmethod
    def from_texts(
        cls, source_id: str, texts: Sequence[str], splitter_name: str
    ) -> FeaturePartition:
        features = []
        pos = 0
        for i, t in enumerate(texts):
            end = pos + len(t.encode("utf-8"))
            features.append(Feature(i, t, pos, end))
            pos = end
        return cls(source_id, tuple(features), splitter_name)

    def __len__(self) -> int:
        return len(self.features)

    def __iter__(self) -> Iterator[Feature]:
        return iter(self.features)

    @property
    def texts(self) -> list[str]:
        return [f.text for f in self.features]

    @property
    def text(self) -> str:
        return "".join(f.text for f in self.features)


@dataclass(frozen=True)
class Coalition:
    """Indices of the features kept (unaltered) in a perturbed input."""

    kept: frozenset[int]

    def __post_init__(self) -> None:
        object.__setattr__(self, "kept", frozenset(self.kept))

    @classmethod
    def from_mask(cls, mask: int) -> Coalition:
        return cls(frozenset(i for i in range(mask.bit_length()) if mask >> i & 1))

    @classmethod
    def full(cls, n: int) -> Coalition:
        return cls(frozenset(range(n)))

    @property
    def mask(self) -> int:
        m = 0
        for i in self.kept:
            m |= 1 << i
        return m

    def __len__(self) -> int:
        return len(self.kept)

    def __contains__(self, i: object) -> bool:
        return i in self.kept


def assemble(partition: FeaturePartition, coalition: Coalition) -> str:
    """Concatenate, in order, the kept features; removed ones vanish.

    Removal substitutes the empty string, so no separator is added: features
    already own their trailing whitespace.
    """
    n = len(partition.features)
    for i in coalition.kept:
        if not (isinstance(i, int) and 0 <= i < n):
            raise ContractViolation(f"coalition index {i!r} out of range for {n} features")
    return "".join(f.text for f in partition.features if f.index in coalition.kept)


def assemble_mask(texts: Sequence[str], mask: int) -> str:
    """Bitmask fast path of :func:`assemble` used by the engine."""
    if mask >> len(texts):
        raise ContractViolation(f"mask {mask:#x} out of range for {len(texts)} features")
    return "".join(t for i, t in enumerate(texts) if mask >> i & 1)


@dataclass(frozen=True)
class ModelOutput:
    text: str
    model_id: str
    prompt_hash: str
    from_cache: bool = False


class Mode(str, Enum):
    EXACT = "exact"
    MONTE_CARLO = "monte_carlo"

    @classmethod
    def parse(cls, value: str | Mode) -> Mode:
        if isinstance(value, Mode):
            return value
        if value == "mc":
            return cls.MONTE_CARLO
        return cls(value)


@dataclass(frozen=True)
class AttributionResult:
    partition: FeaturePartition
    raw: tuple[float, ...]
    display: tuple[float, ...]
    mode: Mode
    sampling_ratio: float
    seed: int
    coalition_count: int
    task: str = ""
    model_id: str = ""
    comparator: str = ""
    output_text: str = ""
    extras: dict = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "raw", tuple(float(x) for x in self.raw))
        object.__setattr__(self, "display", tuple(float(x) for x in self.display))
        n = len(self.partition.features)
        if len(self.raw) != n or len(self.display) != n:
            raise ContractViolation("raw/display length must equal the number of features")
        if any(d < 0.0 or d > 1.0 for d in self.display):
            raise ContractViolation("display attributions must lie in [0, 1]")
        if abs(sum(self.display) - 1.0) > 1e-9:
            raise ContractViolation("display attributions must sum to 1")
        if not 0.0 <= self.sampling_ratio <= 1.0:
            raise ContractViolation("sampling_ratio must lie in [0, 1]")
        if self.coalition_count < 1:
            raise ContractViolation("coalition_count must be positive")
