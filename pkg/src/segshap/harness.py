"""Noise-robustness evaluation runs: inject, evaluate, aggregate.

A run directory holds ``records.jsonl`` (one :class:`EvaluationRecord` per
noisy instance) and ``meta.json`` (task, model and run settings). Both are
written with sorted keys and no timestamps so repeated runs are byte-equal.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .comparators import Comparator, make_comparator
from .core import FeaturePartition, InputDocument, Mode, Task
from .engine import attribute_partition, default_comparator
from .errors import AttributorError, ContractViolation, InjectionError
from .models import Provider
from .noise import (
    EvaluationRecord,
    NoisePool,
    NoisyInstance,
    derive_seed,
    filter_unchanged,
    inject_cross_sample,
    inject_nonsensical,
    llm_attributor,
    noise_score,
    random_baseline,
)
from .sampling import DEFAULT_EXACT_CAP
from .splitters import SplitterConfig, SplitterKind, split
from .stats import ResultRow, results_table, write_results_csv

log = logging.getLogger(__name__)

NONSENSICAL = "nonsensical"
CROSS_SAMPLE = "cross_sample"
ATTRIBUTORS = ("featureshap", "random", "llm")


def parse_injection_mode(value: str) -> str:
    value = value.replace("-", "_")
    if value not in (NONSENSICAL, CROSS_SAMPLE):
        raise ContractViolation(f"unknown injection mode {value!r}")
    return value


def default_splitter(task: Task | str) -> SplitterConfig:
    """Prose prompts for generation, code for summarization."""
    kind = SplitterKind.CODE if Task.parse(task) is Task.CODE_SUMMARIZATION else SplitterKind.NL_RULE
    return SplitterConfig(kind=kind)


# --------------------------------------------------------------------------
# injection


def inject_dataset(
    docs: Sequence[InputDocument],
    mode: str,
    seed: int,
    *,
    pool: NoisePool | None = None,
    splitter: SplitterConfig | None = None,
    splitter_client: Provider | None = None,
) -> list[NoisyInstance]:
    """One noisy instance per document that admits a length-matched candidate.

    Documents without any candidate are skipped and logged.
    """
    mode = parse_injection_mode(mode)
    pool = pool or NoisePool.default()
    partitions = [split(d, splitter or default_splitter(d.task), splitter_client) for d in docs]
    out = []
    for part in partitions:
        inst_seed = derive_seed(seed, part.source_id)
        try:
            if mode == NONSENSICAL:
                noisy, idx = inject_nonsensical(part, pool, inst_seed)
            else:
                noisy, idx = inject_cross_sample(part, partitions, inst_seed)
        except InjectionError as exc:
            log.info("skipping %s: %s", part.source_id, exc)
            continue
        out.append(NoisyInstance(part.source_id, mode, tuple(noisy.texts), idx, inst_seed, noisy.splitter_name))
    return out


def write_noisy(instances: Iterable[NoisyInstance], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for inst in instances:
            fh.write(json.dumps(inst.to_dict(), ensure_ascii=False) + "\n")


def read_noisy(path: str | Path) -> list[NoisyInstance]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                out.append(NoisyInstance.from_dict(json.loads(line)))
            except (KeyError, ValueError, TypeError) as exc:
                raise ContractViolation(f"{path}:{lineno}: {exc}") from exc
    return out


# --------------------------------------------------------------------------
# evaluation


@dataclass
class EvalSettings:
    attributors: tuple[str, ...] = ATTRIBUTORS
    comparator: str | None = None
    mode: Mode = Mode.EXACT
    sampling_ratio: float = 0.0
    seed: int = 0
    exact_cap: int = DEFAULT_EXACT_CAP
    parallelism: int = 1

    def __post_init__(self) -> None:
        unknown = set(self.attributors) - set(ATTRIBUTORS)
        if unknown or not self.attributors:
            raise ContractViolation(f"unknown attributors {sorted(unknown)}")
        if "featureshap" not in self.attributors:
            raise ContractViolation("featureshap must be among the attributors")
        self.mode = Mode.parse(self.mode)


def evaluate_instance(
    doc: InputDocument,
    inst: NoisyInstance,
    provider: Provider,
    settings: EvalSettings,
    comparator: Comparator,
    attributor_provider: Provider | None = None,
) -> EvaluationRecord:
    noisy = inst.partition()
    original = provider.generate(doc.text).text
    noisy_output = provider.generate(noisy.text).text
    retained = filter_unchanged(original, noisy_output)
    record = EvaluationRecord(doc.id, inst.mode, noisy, inst.noise_index, original, noisy_output, retained)
    if not retained:
        return record
    if settings.mode is Mode.EXACT and len(noisy) > settings.exact_cap:
        record.skipped = "exact_cap"
        return record
    scores: dict[str, float] = {}
    result = attribute_partition(
        noisy,
        provider,
        comparator,
        settings.mode,
        settings.sampling_ratio,
        derive_seed(settings.seed, doc.id),
        original_output=original,
        exact_cap=settings.exact_cap,
        task=doc.task.value,
    )
    scores["featureshap"] = noise_score(result.display, inst.noise_index)
    if "random" in settings.attributors:
        baseline = random_baseline(len(noisy), derive_seed(settings.seed, f"{doc.id}:random"))
        scores["random"] = noise_score(baseline, inst.noise_index)
    if "llm" in settings.attributors:
        try:
            llm = llm_attributor(noisy.text, original, noisy.texts, attributor_provider or provider)
        except AttributorError as exc:
            log.warning("llm attributor failed on %s: %s", doc.id, exc)
            record.skipped = "llm_attributor"
            return record
        scores["llm"] = noise_score(llm, inst.noise_index)
    record.noise_scores = scores
    return record


def run_evaluation(
    docs: Sequence[InputDocument],
    instances: Sequence[NoisyInstance],
    provider: Provider,
    settings: EvalSettings | None = None,
    *,
    attributor_provider: Provider | None = None,
) -> list[EvaluationRecord]:
    """Evaluate every noisy instance, preserving input order."""
    settings = settings or EvalSettings()
    by_id = {d.id: d for d in docs}
    missing = [i.instance_id for i in instances if i.instance_id not in by_id]
    if missing:
        raise ContractViolation(f"noisy instances without a source document: {missing[:5]}")
    comparators: dict[Task, Comparator] = {}

    def comparator_for(task: Task) -> Comparator:
        if task not in comparators:
            comparators[task] = make_comparator(settings.comparator or default_comparator(task))
        return comparators[task]

    jobs = [(by_id[i.instance_id], i) for i in instances]
    for doc, _ in jobs:
        comparator_for(doc.task)

    def run(job: tuple[InputDocument, NoisyInstance]) -> EvaluationRecord:
        doc, inst = job
        return evaluate_instance(doc, inst, provider, settings, comparators[doc.task], attributor_provider)

    if settings.parallelism <= 1:
        return [run(j) for j in jobs]
    with ThreadPoolExecutor(max_workers=settings.parallelism) as pool:
        return list(pool.map(run, jobs))


def write_run(
    out_dir: str | Path,
    records: Sequence[EvaluationRecord],
    *,
    task: str,
    model_id: str,
    settings: EvalSettings,
) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "records.jsonl", "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r.to_dict(), ensure_ascii=False, sort_keys=True) + "\n")
    meta = {
        "task": task,
        "model": model_id,
        "attributors": list(settings.attributors),
        "comparator": settings.comparator,
        "mode": settings.mode.value,
        "sampling_ratio": settings.sampling_ratio,
        "seed": settings.seed,
        "exact_cap": settings.exact_cap,
        "instances": len(records),
        "retained": sum(r.retained for r in records),
        "scored": sum(bool(r.noise_scores) for r in records),
    }
    (out / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_run(run_dir: str | Path) -> tuple[dict, list[EvaluationRecord]]:
    run = Path(run_dir)
    meta = json.loads((run / "meta.json").read_text(encoding="utf-8"))
    with open(run / "records.jsonl", encoding="utf-8") as fh:
        records = [EvaluationRecord.from_dict(json.loads(line)) for line in fh if line.strip()]
    return meta, records


def paired_scores(records: Iterable[EvaluationRecord]) -> dict[str, list[float]]:
    """Per-attributor noise scores over instances scored by every attributor."""
    scored = [r for r in records if r.retained and not r.skipped and r.noise_scores]
    if not scored:
        return {}
    names = set.intersection(*(set(r.noise_scores) for r in scored))
    return {name: [r.noise_scores[name] for r in scored] for name in sorted(names)}


def find_runs(root: str | Path) -> list[Path]:
    """``root`` itself if it is a run directory, else its run subdirectories."""
    root = Path(root)
    if (root / "meta.json").is_file():
        return [root]
    return sorted(p.parent for p in root.glob("*/meta.json"))


def aggregate(run_dirs: Sequence[str | Path]) -> list[ResultRow]:
    groups = []
    for run in run_dirs:
        meta, records = read_run(run)
        scores = paired_scores(records)
        if scores:
            groups.append((meta["task"], meta["model"], scores))
    return results_table(groups)


def write_stats(rows: Sequence[ResultRow], csv_path: str | Path) -> Path:
    """Write the results table and a JSON sidecar with raw p-values and the
    test method (exact or normal) next to it."""
    csv_path = Path(csv_path)
    write_results_csv(rows, csv_path)
    sidecar = csv_path.with_suffix(".json")
    body = [
        {
            "task": r.task,
            "model": r.model,
            "attributor": r.attributor,
            "mean": r.mean,
            "median": r.median,
            "n": r.n,
            "p_value": r.p_value,
            "p_adjusted": r.p_adjusted,
            "delta": r.delta,
            "magnitude": r.magnitude,
            "method": r.method,
            "n_effective": r.n_effective,
        }
        for r in rows
    ]
    sidecar.write_text(json.dumps(body, indent=2) + "\n", encoding="utf-8")
    return sidecar
