"""End-to-end attribution: split, perturb, query, compare, Shapley."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Sequence

from .comparators import Comparator, ComparatorKind, make_comparator
from .core import AttributionResult, FeaturePartition, InputDocument, Mode, Task, assemble_mask
from .errors import ComparatorError, ExactModeCap
from .models import Provider
from .sampling import DEFAULT_EXACT_CAP, SamplingPlan, build_plan
from .shapley import ValueTable, exact_shapley, mc_shapley, normalize
from .splitters import SplitterConfig, split

log = logging.getLogger(__name__)


def default_comparator(task: Task | str) -> ComparatorKind:
    """CodeBLEU for generated code, embedding F1 for generated prose."""
    task = Task.parse(task)
    return ComparatorKind.CODEBLEU if task is Task.CODE_GENERATION else ComparatorKind.EMBED_F1


def _query_all(provider: Provider, prompts: Sequence[str], parallelism: int) -> dict[str, str]:
    unique = list(dict.fromkeys(prompts))
    if parallelism <= 1 or len(unique) <= 1:
        return {p: provider.generate(p).text for p in unique}
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        texts = list(pool.map(lambda p: provider.generate(p).text, unique))
    return dict(zip(unique, texts))


def evaluate_plan(
    partition: FeaturePartition,
    plan: SamplingPlan,
    provider: Provider,
    comparator: Comparator,
    original_output: str,
    parallelism: int = 1,
) -> ValueTable:
    """Fill ``v(S) = s(M(assemble(S)), o)`` for every coalition of the plan.

    The full coalition reproduces the original input, so its value is
    ``s(o, o)`` and costs no model call.
    """
    texts = partition.texts
    full = (1 << len(texts)) - 1
    masks = [m for m in plan.masks if m != full]
    prompts = [assemble_mask(texts, m) for m in masks]
    outputs = _query_all(provider, prompts, parallelism)
    candidates = [outputs[p] for p in prompts]
    scores = comparator.batch(original_output, candidates)
    table = ValueTable(len(texts))
    table[full] = comparator.score(original_output, original_output)
    for m, s in zip(masks, scores):
        table[m] = s
    return table


def attribute_partition(
    partition: FeaturePartition,
    provider: Provider,
    comparator: Comparator | str = "tfidf",
    mode: Mode | str = Mode.EXACT,
    ratio: float = 0.0,
    seed: int = 0,
    *,
    original_output: str | None = None,
    exact_cap: int = DEFAULT_EXACT_CAP,
    parallelism: int = 1,
    task: str = "",
) -> AttributionResult:
    if not isinstance(comparator, Comparator):
        comparator = make_comparator(comparator)
    mode = Mode.parse(mode)
    n = len(partition)
    if mode is Mode.EXACT and n > exact_cap:
        raise ExactModeCap(n, exact_cap)
    if original_output is None:
        original_output = provider.generate(partition.text).text
    self_sim = comparator.score(original_output, original_output)
    if self_sim != 1.0:
        raise ComparatorError(
            "reflexivity", f"{comparator.name} scored the original output against itself as {self_sim!r}"
        )
    plan = build_plan(n, mode, ratio, seed, exact_cap)
    table = evaluate_plan(partition, plan, provider, comparator, original_output, parallelism)
    if mode is Mode.EXACT or n == 1:
        # One feature: the estimator has no exclusion side; v(N) - v(empty) is exact.
        raw = exact_shapley(table, exact_cap) if n > 1 else [table.v_full - table.v_empty]
    else:
        raw = mc_shapley(table, plan)
    log.debug("attributed %s: %d coalitions", partition.source_id, len(plan))
    return AttributionResult(
        partition=partition,
        raw=tuple(raw),
        display=tuple(normalize(raw)),
        mode=mode,
        sampling_ratio=1.0 if mode is Mode.EXACT else float(ratio),
        seed=seed,
        coalition_count=len(plan),
        task=task,
        model_id=provider.model_id,
        comparator=comparator.name,
        output_text=original_output,
    )


def attribute(
    doc: InputDocument,
    model: Provider,
    splitter: SplitterConfig,
    comparator: Comparator | str | None = None,
    mode: Mode | str = Mode.EXACT,
    ratio: float = 0.0,
    seed: int = 0,
    *,
    splitter_client: Provider | None = None,
    exact_cap: int = DEFAULT_EXACT_CAP,
    parallelism: int = 1,
) -> AttributionResult:
    """Attribute ``model``'s output on ``doc`` to the features of ``doc``."""
    if comparator is None:
        comparator = make_comparator(default_comparator(doc.task))
    original = model.generate(doc.text).text
    partition = split(doc, splitter, splitter_client or model)
    return attribute_partition(
        partition,
        model,
        comparator,
        mode,
        ratio,
        seed,
        original_output=original,
        exact_cap=exact_cap,
        parallelism=parallelism,
        task=doc.task.value,
    )
