"""Noise injection, output filtering, noise scores and baseline attributors.

Token counts for all length windows are whitespace-delimited tokens.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import FeaturePartition
from .errors import AttributorError, ContractViolation, InjectionError, ProviderError
from .models import Provider

LENGTH_WINDOW = 3


@dataclass(frozen=True)
class NoisePool:
    sentences: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "sentences", tuple(s for s in self.sentences if s.strip()))
        if not self.sentences:
            raise ContractViolation("the noise pool is empty")

    @classmethod
    def default(cls) -> NoisePool:
        text = resources.files("segshap").joinpath("data/nonsense_pool.txt").read_text(encoding="utf-8")
        return cls(tuple(text.splitlines()))

    @classmethod
    def from_file(cls, path: str | Path) -> NoisePool:
        return cls(tuple(Path(path).read_text(encoding="utf-8").splitlines()))


def token_count(text: str) -> int:
    return len(text.split())


def mean_feature_tokens(partition: FeaturePartition) -> float:
    return sum(token_count(f.text) for f in partition) / len(partition)


def within_window(n_tokens: int, mean: float, window: int = LENGTH_WINDOW) -> bool:
    return abs(n_tokens - mean) <= window


def derive_seed(run_seed: int, instance_id: str) -> int:
    """Stable 64-bit per-instance seed."""
    digest = hashlib.sha256(f"{run_seed}:{instance_id}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def is_code_partition(partition: FeaturePartition) -> bool:
    return partition.splitter_name.startswith("code")


_INDENT = re.compile(r"[ \t]*")


def _code_slot(before: str) -> tuple[str, str]:
    """Text to put around a new code line inserted after ``before``.

    Code features end with the indentation of the statement that follows
    them, so the new line goes at that column and re-emits the indentation
    afterwards. If ``before`` stops mid-line the new line is started first.
    """
    tail = before[before.rfind("\n") + 1:]
    if not tail.strip():
        return "", "\n" + tail
    indent = _INDENT.match(tail).group(0)
    return "\n" + indent, "\n" + indent


def _format_noise(text: str, partition: FeaturePartition, position: int, as_comment: bool) -> str:
    before = "".join(partition.texts[:position])
    if as_comment:
        head, tail = _code_slot(before)
        return f"{head}# {text.strip()}{tail}"
    body = text if text[-1:].isspace() else text + " "
    return body if not before or before[-1].isspace() else " " + body


def insert_feature(
    partition: FeaturePartition, text: str, position: int, *, as_comment: bool | None = None
) -> FeaturePartition:
    """Insert ``text`` as a new feature at ``position`` (0..n).

    Prose is separated from its neighbours by whitespace; inside a code
    partition it becomes a comment line indented like its surroundings.
    """
    if not 0 <= position <= len(partition):
        raise ContractViolation(f"position {position} outside 0..{len(partition)}")
    if as_comment is None:
        as_comment = is_code_partition(partition)
    noise = _format_noise(text, partition, position, as_comment)
    texts = partition.texts
    texts.insert(position, noise)
    return FeaturePartition.from_texts(partition.source_id, texts, partition.splitter_name)


def _pick(rng: np.random.Generator, candidates: Sequence[str], n_features: int) -> tuple[str, int]:
    choice = candidates[int(rng.integers(len(candidates)))]
    position = int(rng.integers(n_features + 1))
    return choice, position


def inject_nonsensical(
    partition: FeaturePartition, pool: NoisePool, seed: int
) -> tuple[FeaturePartition, int]:
    """Insert a length-matched nonsense sentence at a random position."""
    mean = mean_feature_tokens(partition)
    candidates = [s for s in pool.sentences if within_window(token_count(s), mean)]
    if not candidates:
        raise InjectionError("no_candidate", f"no pool sentence within {LENGTH_WINDOW} tokens of {mean:.2f}")
    rng = np.random.default_rng(seed)
    sentence, position = _pick(rng, candidates, len(partition))
    return insert_feature(partition, sentence, position), position


def cross_sample_candidates(
    partition: FeaturePartition, dataset: Sequence[FeaturePartition]
) -> list[str]:
    mean = mean_feature_tokens(partition)
    out = []
    for other in dataset:
        if other.source_id == partition.source_id:
            continue
        out.extend(f.text for f in other if within_window(token_count(f.text), mean))
    return out


def inject_cross_sample(
    partition: FeaturePartition, dataset: Sequence[FeaturePartition], seed: int
) -> tuple[FeaturePartition, int]:
    """Insert a length-matched feature borrowed from another instance."""
    candidates = cross_sample_candidates(partition, dataset)
    if not candidates:
        raise InjectionError("no_candidate", f"no foreign feature fits the window for {partition.source_id!r}")
    rng = np.random.default_rng(seed)
    text, position = _pick(rng, candidates, len(partition))
    if is_code_partition(partition):
        head, tail = _code_slot("".join(partition.texts[:position]))
        texts = partition.texts
        texts.insert(position, head + text.rstrip() + tail)
        noisy = FeaturePartition.from_texts(partition.source_id, texts, partition.splitter_name)
        return noisy, position
    return insert_feature(partition, text, position, as_comment=False), position


def filter_unchanged(original_output: str, noisy_output: str) -> bool:
    return original_output.encode("utf-8") == noisy_output.encode("utf-8")


def noise_score(attribution: Sequence[float], noise_index: int) -> float:
    if not 0 <= noise_index < len(attribution):
        raise ContractViolation(f"noise index {noise_index} outside 0..{len(attribution) - 1}")
    return float(attribution[noise_index])


def random_baseline(n: int, seed: int) -> list[float]:
    """Independent U(0, 1) scores divided by their sum."""
    if n < 1:
        raise ContractViolation("n must be positive")
    rng = np.random.default_rng(seed)
    while True:
        draws = rng.random(n)
        total = draws.sum()
        if total > 0:
            return (draws / total).tolist()


# --------------------------------------------------------------------------
# LLM-as-an-attributor

ATTRIBUTOR_SYSTEM_PROMPT = """\
You are a code feature attribution analyst.
Your task is to evaluate the importance of individual features in contributing to a given model output.
Feature attribution scoring measures how much each feature contributes to the meaning captured in the model output.
A higher score (1) indicates that the feature is more essential for understanding what the code does, while a lower score (0)
indicates the feature is less relevant or even misleading.

CRITICAL REQUIREMENTS:
- All attribution scores MUST be between 0.0 and 1.0
- The sum of all attribution scores MUST equal exactly 1.0
- Provide exactly one score per feature"""

ATTRIBUTOR_USER_TEMPLATE = """\
Prompt: {prompt}
Model output: {model_output}
Please assign an attribution score to each of the following features: {features}
Remember that the sum of the feature attribution scores has to be 1."""

SUM_TOLERANCE = 0.01

_FENCE = re.compile(r"^\s*```(?:json)?\s*\n?(.*?)\n?```\s*$", re.DOTALL)


def parse_attribution(response: str, n_features: int) -> list[float]:
    """Extract and validate one score per feature.

    Accepts a JSON list, ``{"scores": [...]}``, or an index-keyed object.
    Scores must lie in [0, 1] and sum to 1 within ``SUM_TOLERANCE``; the
    result is rescaled to sum exactly to 1.
    """
    m = _FENCE.match(response)
    payload = json.loads(m.group(1) if m else response)
    if isinstance(payload, dict):
        if isinstance(payload.get("scores"), list):
            payload = payload["scores"]
        else:
            keys = sorted(payload, key=lambda k: int(k))
            if keys != [str(i) for i in range(len(keys))]:
                raise ValueError("score keys must be 0..n-1")
            payload = [payload[k] for k in keys]
    if not isinstance(payload, list) or len(payload) != n_features:
        raise ValueError(f"expected {n_features} scores")
    if not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in payload):
        raise ValueError("scores must be numbers")
    scores = [float(x) for x in payload]
    if any(not 0.0 <= x <= 1.0 for x in scores):
        raise ValueError("scores must lie in [0, 1]")
    total = sum(scores)
    if abs(total - 1.0) > SUM_TOLERANCE + 1e-9:
        raise ValueError(f"scores sum to {total}")
    return [x / total for x in scores]


def attributor_messages(prompt: str, model_output: str, features: Sequence[str]) -> list[dict[str, str]]:
    user = ATTRIBUTOR_USER_TEMPLATE.format(
        prompt=prompt,
        model_output=model_output,
        features=json.dumps(list(features), ensure_ascii=False),
    )
    return [
        {"role": "system", "content": ATTRIBUTOR_SYSTEM_PROMPT},
        {"role": "user", "content": user},
    ]


def llm_attributor(
    prompt: str,
    model_output: str,
    features: Sequence[str],
    provider: Provider,
    max_retries: int = 3,
) -> list[float]:
    messages = attributor_messages(prompt, model_output, features)
    last = ""
    for attempt in range(max_retries + 1):
        try:
            reply = provider.chat(messages, refresh=attempt > 0).text
        except ProviderError as exc:
            raise AttributorError(f"attributor provider failed: {exc}") from exc
        try:
            return parse_attribution(reply, len(features))
        except (ValueError, TypeError) as exc:
            last = str(exc)
    raise AttributorError(f"no valid attribution after {max_retries + 1} attempts: {last}")


# --------------------------------------------------------------------------
# interchange


@dataclass(frozen=True)
class NoisyInstance:
    instance_id: str
    mode: str
    features: tuple[str, ...]
    noise_index: int
    seed: int
    splitter: str = "nl_rule"

    def partition(self) -> FeaturePartition:
        return FeaturePartition.from_texts(self.instance_id, self.features, self.splitter)

    def to_dict(self) -> dict:
        return {
            "instance_id": self.instance_id,
            "mode": self.mode,
            "features": list(self.features),
            "noise_index": self.noise_index,
            "seed": self.seed,
            "splitter": self.splitter,
        }

    @classmethod
    def from_dict(cls, d: dict) -> NoisyInstance:
        return cls(
            instance_id=str(d["instance_id"]),
            mode=d["mode"],
            features=tuple(d["features"]),
            noise_index=int(d["noise_index"]),
            seed=int(d["seed"]),
            splitter=d.get("splitter", "nl_rule"),
        )


@dataclass
class EvaluationRecord:
    instance_id: str
    mode: str
    noisy_partition: FeaturePartition
    noise_index: int
    original_output: str
    noisy_output: str
    retained: bool
    noise_scores: dict[str, float] = field(default_factory=dict)
    skipped: str = ""

    def __post_init__(self) -> None:
        if self.retained != filter_unchanged(self.original_output, self.noisy_output):
            raise ContractViolation("retained must mirror byte equality of the outputs")
        if not 0 <= self.noise_index < len(self.noisy_partition):
            raise ContractViolation("noise index outside the noisy partition")

    def to_dict(self) -> dict:
        return {
            "instance_id": self.instance_id,
            "mode": self.mode,
            "features": self.noisy_partition.texts,
            "splitter": self.noisy_partition.splitter_name,
            "noise_index": self.noise_index,
            "original_output": self.original_output,
            "noisy_output": self.noisy_output,
            "retained": self.retained,
            "noise_scores": dict(sorted(self.noise_scores.items())),
            "skipped": self.skipped,
        }

    @classmethod
    def from_dict(cls, d: dict) -> EvaluationRecord:
        part = FeaturePartition.from_texts(d["instance_id"], d["features"], d.get("splitter", "nl_rule"))
        return cls(
            instance_id=d["instance_id"],
            mode=d["mode"],
            noisy_partition=part,
            noise_index=d["noise_index"],
            original_output=d["original_output"],
            noisy_output=d["noisy_output"],
            retained=d["retained"],
            noise_scores=dict(d.get("noise_scores", {})),
            skipped=d.get("skipped", ""),
        )
