"""Command-line entry point.

Exit codes: 0 success, 2 invalid input or configuration, 3 provider failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

from .comparators import ComparatorKind
from .core import InputDocument, Mode, Task, read_dataset
from .engine import attribute
from .errors import (
    AttributorError,
    ComparatorError,
    ContractViolation,
    ExactModeCap,
    InjectionError,
    PlanInvariantViolated,
    ProviderError,
    ReportError,
    SplitError,
)
from .harness import (
    ATTRIBUTORS,
    EvalSettings,
    aggregate,
    find_runs,
    inject_dataset,
    read_noisy,
    run_evaluation,
    write_noisy,
    write_run,
    write_stats,
)
from .models import (
    ChatCompletionsProvider,
    MockProvider,
    Provider,
    ProviderConfig,
    default_cache_dir,
    load_mock_script,
)
from .noise import NoisePool
from .report import emit_html, emit_json
from .sampling import DEFAULT_EXACT_CAP
from .splitters import SplitterConfig, SplitterKind

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_PROVIDER = 3

VALIDATION_ERRORS = (
    ContractViolation,
    SplitError,
    ExactModeCap,
    InjectionError,
    ComparatorError,
    PlanInvariantViolated,
    ReportError,
    FileNotFoundError,
    json.JSONDecodeError,
)

log = logging.getLogger("segshap")


def make_provider(model: str | None, endpoint: str | None, mock: str | None, *, cache: bool = True) -> Provider:
    if mock:
        script, mock_id = load_mock_script(mock)
        return MockProvider(script, model or mock_id)
    if not model or not endpoint:
        raise ContractViolation("a remote model needs both --model and --endpoint (or use --mock)")
    cfg = ProviderConfig(endpoint_url=endpoint, model_id=model, cache_dir=default_cache_dir() if cache else None)
    return ChatCompletionsProvider(cfg)


def load_input(path: str, task: str, doc_id: str | None) -> InputDocument:
    """A ``.jsonl`` dataset (first record, or the one with ``doc_id``) or a
    plain-text file taken verbatim."""
    p = Path(path)
    if p.suffix in (".jsonl", ".json"):
        docs = read_dataset(p)
        if doc_id is not None:
            docs = [d for d in docs if d.id == doc_id]
        if not docs:
            raise ContractViolation(f"no matching document in {path}")
        d = docs[0]
        return InputDocument(d.id, Task.parse(task), d.text, d.language_hint)
    return InputDocument(doc_id or p.stem, Task.parse(task), p.read_text(encoding="utf-8"))


def _splitter_config(kind: str | None, task: str, model: str | None) -> SplitterConfig:
    if kind is None:
        kind = "code" if Task.parse(task) is Task.CODE_SUMMARIZATION else "nl_rule"
    kind = SplitterKind.parse(kind)
    return SplitterConfig(kind=kind, llm_model_id=(model or "segmenter") if kind is SplitterKind.NL_LLM else None)


def cmd_attribute(args: argparse.Namespace) -> int:
    doc = load_input(args.input, args.task, args.id)
    provider = make_provider(args.model, args.endpoint, args.mock)
    splitter = _splitter_config(args.splitter, args.task, args.model)
    result = attribute(
        doc,
        provider,
        splitter,
        args.comparator,
        args.mode,
        args.sampling_ratio,
        args.seed,
        exact_cap=args.exact_cap,
        parallelism=args.parallelism,
    )
    emit_json(result, args.out)
    if args.html:
        emit_html(result, result.output_text, args.html)
    for f, d in zip(result.partition, result.display):
        head = f.text.strip().splitlines()[0] if f.text.strip() else ""
        print(f"{f.index:>3} {d * 100:6.1f}%  {head[:70]}")
    return EXIT_OK


def cmd_inject(args: argparse.Namespace) -> int:
    docs = read_dataset(args.dataset)
    pool = NoisePool.from_file(args.pool) if args.pool else NoisePool.default()
    splitter = client = None
    if args.splitter:
        splitter = SplitterConfig(
            kind=SplitterKind.parse(args.splitter),
            llm_model_id=(args.model or "segmenter") if SplitterKind.parse(args.splitter) is SplitterKind.NL_LLM else None,
        )
        if splitter.kind is SplitterKind.NL_LLM:
            client = make_provider(args.model, args.endpoint, args.mock)
    instances = inject_dataset(
        docs, args.mode, args.seed, pool=pool, splitter=splitter, splitter_client=client
    )
    write_noisy(instances, args.out)
    print(f"injected {len(instances)}/{len(docs)} instances -> {args.out}")
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    docs = read_dataset(args.dataset)
    instances = read_noisy(args.noisy)
    attributors = tuple(a.strip() for a in args.attributors.split(",") if a.strip())
    provider = make_provider(args.model, args.endpoint, args.mock)
    attributor_provider = None
    if "llm" in attributors and (args.attributor_mock or args.attributor_model):
        attributor_provider = make_provider(
            args.attributor_model, args.attributor_endpoint or args.endpoint, args.attributor_mock
        )
    settings = EvalSettings(
        attributors=attributors,
        comparator=args.comparator,
        mode=Mode.parse(args.mode),
        sampling_ratio=args.sampling_ratio,
        seed=args.seed,
        exact_cap=args.exact_cap,
        parallelism=args.parallelism,
    )
    records = run_evaluation(docs, instances, provider, settings, attributor_provider=attributor_provider)
    tasks = sorted({d.task.value for d in docs if d.id in {i.instance_id for i in instances}})
    write_run(args.out, records, task="+".join(tasks), model_id=provider.model_id, settings=settings)
    kept = sum(r.retained for r in records)
    scored = sum(bool(r.noise_scores) for r in records)
    print(f"{len(records)} instances, {kept} retained, {scored} scored -> {args.out}")
    return EXIT_OK


def cmd_stats(args: argparse.Namespace) -> int:
    runs = [r for d in args.scores for r in find_runs(d)]
    if not runs:
        raise ContractViolation(f"no run directories under {', '.join(args.scores)}")
    rows = aggregate(runs)
    sidecar = write_stats(rows, args.out)
    for r in rows:
        p = "" if r.p_adjusted is None else f" p_adj={r.p_adjusted:.3g} d={r.delta:+.3f}{r.magnitude}"
        print(f"{r.task} {r.model} {r.attributor}: mean={r.mean:.3f} median={r.median:.3f} n={r.n}{p}")
    print(f"-> {args.out} ({sidecar.name})")
    return EXIT_OK


def _ratio(value: str) -> float:
    x = float(value)
    if not 0.0 <= x <= 1.0:
        raise argparse.ArgumentTypeError("must lie in [0, 1]")
    return x


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="segshap", description="Shapley feature attribution for code models.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    comparators = [k.value.replace("_", "-") for k in ComparatorKind] + [k.value for k in ComparatorKind if "_" in k.value]

    a = sub.add_parser("attribute", help="attribute one input")
    a.add_argument("--input", required=True)
    a.add_argument("--id", help="document id when --input is a dataset")
    a.add_argument("--task", required=True, choices=["codegen", "codesum"])
    a.add_argument("--model")
    a.add_argument("--endpoint")
    a.add_argument("--mock", help="JSON mock script instead of a remote model")
    a.add_argument("--splitter", choices=["code", "nl-llm", "nl-rule"])
    a.add_argument("--comparator", choices=comparators)
    a.add_argument("--mode", choices=["exact", "mc"], default="exact")
    a.add_argument("--sampling-ratio", type=_ratio, default=0.0)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--exact-cap", type=int, default=DEFAULT_EXACT_CAP)
    a.add_argument("--parallelism", type=int, default=4)
    a.add_argument("--out", required=True)
    a.add_argument("--html")
    a.set_defaults(func=cmd_attribute)

    i = sub.add_parser("inject", help="inject one noise feature per instance")
    i.add_argument("--dataset", required=True)
    i.add_argument("--mode", required=True, choices=["nonsensical", "cross-sample"])
    i.add_argument("--pool", help="nonsense sentences, one per line")
    i.add_argument("--seed", type=int, default=0)
    i.add_argument("--splitter", choices=["code", "nl-llm", "nl-rule"])
    i.add_argument("--model")
    i.add_argument("--endpoint")
    i.add_argument("--mock")
    i.add_argument("--out", required=True)
    i.set_defaults(func=cmd_inject)

    e = sub.add_parser("evaluate", help="score injected noise with each attributor")
    e.add_argument("--dataset", required=True)
    e.add_argument("--noisy", required=True)
    e.add_argument("--model")
    e.add_argument("--endpoint")
    e.add_argument("--mock")
    e.add_argument("--attributors", default=",".join(ATTRIBUTORS))
    e.add_argument("--attributor-model")
    e.add_argument("--attributor-endpoint")
    e.add_argument("--attributor-mock")
    e.add_argument("--comparator", choices=comparators)
    e.add_argument("--mode", choices=["exact", "mc"], default="exact")
    e.add_argument("--sampling-ratio", type=_ratio, default=0.0)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--exact-cap", type=int, default=DEFAULT_EXACT_CAP)
    e.add_argument("--parallelism", type=int, default=1)
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("stats", help="summaries and paired tests over evaluation runs")
    s.add_argument("--scores", required=True, nargs="+", help="run directory or a directory of runs")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_stats)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ProviderError, AttributorError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PROVIDER
    except VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
