"""Acceptance criteria, one PASS/FAIL line each (collected in the summary)."""

import filecmp
import inspect
import itertools
import json
import random
import time

import numpy as np
import pytest

from segshap import cli
from segshap.comparators import ComparatorKind, make_comparator
from segshap.core import FeaturePartition, InputDocument, Mode, Task, write_dataset
from segshap.engine import attribute_partition
from segshap.errors import ExactModeCap
from segshap.harness import EvalSettings, inject_dataset, run_evaluation
from segshap.models import MockProvider, MockScript
from segshap.noise import NoisePool, random_baseline
from segshap.sampling import sample_mc
from segshap.shapley import ValueTable, exact_shapley, mc_shapley
from segshap.splitters import SplitterConfig, rule_segments, split, verify_lossless
from segshap.stats import cliffs_delta, holm_correction, wilcoxon_signed_rank
from synthetic import VERBS, noise_blind_model, synthetic_docs, synthetic_function, write_mock_script
from test_comparators import CODEBLEU_CASES, codebleu_mismatches
from test_stats import enumerated_p, naive_cliff


def permutation_average(n, values):
    """Mean marginal contribution over all n! orderings, vectorized."""
    perms = np.array(list(itertools.permutations(range(n))))
    bits = 1 << perms
    after = np.cumsum(bits, axis=1)
    gains = values[after] - values[after - bits]
    phi = np.zeros(n)
    np.add.at(phi, perms.ravel(), gains.ravel())
    return phi / len(perms)


# 1 ---------------------------------------------------------------------------


def test_shapley_matches_permutation_oracle(criterion):
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    worst, efficiency_ok = 0.0, True
    for _ in range(200):
        n = int(rng.integers(2, 9))
        values = np.concatenate([[0.0], rng.random((1 << n) - 1)])
        phi = exact_shapley(ValueTable(n, {m: float(values[m]) for m in range(1, 1 << n)}))
        worst = max(worst, float(np.max(np.abs(np.array(phi) - permutation_average(n, values)))))
        efficiency_ok &= abs(sum(phi) - values[-1]) <= 1e-9
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-9 and efficiency_ok and elapsed < 5.0
    criterion(1, "exact Shapley vs permutation oracle", ok,
              f"max |diff| {worst:.2e}, efficiency {'holds' if efficiency_ok else 'broken'}, {elapsed:.2f}s")
    assert ok


# 2 ---------------------------------------------------------------------------


def test_noise_feature_scores_zero(criterion):
    start = time.perf_counter()
    docs = synthetic_docs(50, seed=17, lo=4, hi=8)
    instances = inject_dataset(docs, "nonsensical", seed=5)
    records = run_evaluation(docs, instances, noise_blind_model(), EvalSettings(attributors=("featureshap",)))
    elapsed = time.perf_counter() - start
    scores = [r.noise_scores.get("featureshap") for r in records]
    sizes = sorted({len(r.noisy_partition) for r in records})
    ok = (
        len(records) == 50
        and all(r.retained for r in records)
        and all(s == 0.0 for s in scores)
        and elapsed < 30.0
    )
    criterion(2, "noise feature gets exactly zero", ok,
              f"{sum(s == 0.0 for s in scores)}/{len(records)} zero, noisy sizes {sizes}, {elapsed:.2f}s")
    assert ok


# 3 ---------------------------------------------------------------------------


def test_random_baseline_calibration(criterion):
    draws = np.array([random_baseline(6, seed) for seed in range(10_000)])
    means = draws.mean(axis=0)
    ok = bool(np.all(np.abs(means - 1 / 6) <= 0.01))
    criterion(3, "random baseline calibration", ok,
              "coordinate means " + ", ".join(f"{m:.4f}" for m in means))
    assert ok


# 4 ---------------------------------------------------------------------------


def additive_table(n, w):
    return ValueTable.from_function(n, lambda m: sum(w[i] for i in range(n) if m >> i & 1))


def test_monte_carlo_fidelity(criterion):
    rng = np.random.default_rng(99)
    rank_hits = top_hits = 0
    for trial in range(100):
        n = int(rng.integers(5, 11))
        w = rng.random(n)
        table = additive_table(n, w)
        exact = exact_shapley(table)
        full = mc_shapley(table, sample_mc(n, 1.0, seed=trial))
        rank_hits += list(np.argsort(full)) == list(np.argsort(exact))
        half = mc_shapley(table, sample_mc(n, 0.5, seed=trial))
        top_hits += int(np.argmax(half)) == int(np.argmax(exact))
    ok = rank_hits == 100 and top_hits >= 95
    criterion(4, "Monte Carlo fidelity on additive games", ok,
              f"ratio 1 ranking {rank_hits}/100, ratio 0.5 top-1 {top_hits}/100")
    assert ok


# 5 ---------------------------------------------------------------------------


def mixed_corpus():
    """100 functions and 100 docstrings."""
    rng = random.Random(5)
    docs = []
    for i in range(60):
        src = synthetic_function(rng, rng.randint(1, 10), docstring=i % 2 == 0)
        docs.append(InputDocument(f"fn-{i}", Task.CODE_SUMMARIZATION, src))
    import json as json_mod
    import textwrap

    funcs = [f for m in (json_mod, textwrap, random, inspect) for _, f in inspect.getmembers(m, inspect.isfunction)]
    for f in funcs:
        if len(docs) >= 100:
            break
        try:
            src = textwrap.dedent(inspect.getsource(f))
        except (OSError, TypeError):
            continue
        docs.append(InputDocument(f"lib-{len(docs)}", Task.CODE_SUMMARIZATION, src))
    texts = [f.__doc__ for f in funcs if f.__doc__ and f.__doc__.strip()][:70]
    texts += [d.text for d in synthetic_docs(30, seed=8)]
    for i, text in enumerate(texts[:100]):
        docs.append(InputDocument(f"doc-{i}", Task.CODE_GENERATION, text))
    return docs


def segmenter():
    """Answers with the rule segmentation for most prompts and garbage for
    every seventh, which exercises the fallback path."""
    count = itertools.count()

    def respond(prompt):
        text = prompt.rsplit("Docstring: ", 1)[1]
        if next(count) % 7 == 0:
            return "no json here"
        return json.dumps({str(i): s for i, s in enumerate(rule_segments(text))})

    return MockProvider(MockScript([], respond), "segmenter")


def test_splitters_lossless(criterion):
    docs = mixed_corpus()
    client = segmenter()
    checked = lossless = 0
    names = set()
    for doc in docs:
        if doc.task is Task.CODE_SUMMARIZATION:
            configs = [SplitterConfig(kind="code")]
        else:
            configs = [SplitterConfig(kind="nl_rule"), SplitterConfig(kind="nl_llm", llm_model_id="segmenter")]
        for cfg in configs:
            part = split(doc, cfg, client)
            names.add(part.splitter_name)
            checked += 1
            lossless += verify_lossless(part, doc) and part.text.encode() == doc.text.encode()
    n_fn = sum(d.task is Task.CODE_SUMMARIZATION for d in docs)
    big = FeaturePartition.from_texts("big", [f"Then {v} the rows. " for v in VERBS] + ["Done."], "nl_rule")
    try:
        attribute_partition(big, noise_blind_model(), "tfidf", Mode.EXACT)
        capped = False
    except ExactModeCap:
        capped = True
    ok = len(docs) == 200 and lossless == checked and capped
    criterion(5, "splitter losslessness and exact cap", ok,
              f"{len(docs)} docs ({n_fn} functions), {lossless}/{checked} partitions byte-identical, "
              f"splitters {sorted(names)}, 13-feature exact run {'rejected' if capped else 'accepted'}")
    assert ok


# 6 ---------------------------------------------------------------------------

SNIPPETS = [
    "x = 1\n", "def f(a):\n    return a\n", "for i in range(3):\n    print(i)\n",
    "import os\npath = os.getcwd()\n", "class A:\n    pass\n", "y = [k for k in xs if k]\n",
    "with open(p) as fh:\n    data = fh.read()\n", "def g(:\n", "return", "",
    "Returns the sum of two numbers.", "Sorts the list in place.",
]
ALPHABET = "abcxyz 019_=+-*/()[]{}:.,'\"\n\t#<>éλ"


def random_string(rng):
    kind = rng.random()
    if kind < 0.35:
        return "".join(rng.choice(ALPHABET) for _ in range(rng.randint(0, 40)))
    if kind < 0.7:
        return rng.choice(SNIPPETS)
    return rng.choice(SNIPPETS) + rng.choice(SNIPPETS)


def test_comparator_bounds_and_codebleu_oracle(criterion):
    rng = random.Random(6)
    comparators = [make_comparator(k) for k in ComparatorKind]
    pairs = [(random_string(rng), random_string(rng)) for _ in range(1000)]
    out_of_bounds, not_reflexive = [], []
    for a, b in pairs:
        for cmp_ in comparators:
            s = cmp_.score(a, b)
            if not 0.0 <= s <= 1.0:
                out_of_bounds.append((cmp_.name, a, b, s))
            if a and cmp_.score(a, a) != 1.0:
                not_reflexive.append((cmp_.name, a))
    oracle_misses = {name: codebleu_mismatches(*case) for name, case in CODEBLEU_CASES.items()}
    oracle_misses = {k: v for k, v in oracle_misses.items() if v}
    ok = not out_of_bounds and not not_reflexive and not oracle_misses and len(CODEBLEU_CASES) == 5
    criterion(6, "comparator bounds, reflexivity, CodeBLEU oracle", ok,
              f"{len(pairs)} pairs x {len(comparators)} comparators, {len(out_of_bounds)} out of bounds, "
              f"{len(not_reflexive)} non-reflexive, {5 - len(oracle_misses)}/5 hand pairs within 1e-6")
    assert ok


# 7 ---------------------------------------------------------------------------


def test_statistics_oracles(criterion):
    rng = random.Random(7)
    wilcoxon_bad = cliff_bad = 0
    for _ in range(100):
        n = rng.randint(1, 12)
        a = [rng.randint(0, 4) / 4 for _ in range(n)]
        b = [rng.randint(0, 4) / 4 for _ in range(n)]
        a[0] = b[0] + 0.25  # at least one non-zero difference
        diffs = [x - y for x, y in zip(a, b)]
        if abs(wilcoxon_signed_rank((a, b)) - enumerated_p(diffs)) > 1e-12:
            wilcoxon_bad += 1
        if cliffs_delta(a, b)[0] != naive_cliff(a, b):
            cliff_bad += 1
    holm = holm_correction([0.01, 0.04, 0.03])
    holm_ok = all(abs(x - y) < 1e-12 for x, y in zip(holm, [0.03, 0.06, 0.06]))
    raw = [rng.random() for _ in range(50)]
    holm_ok &= all(r <= h <= 1.0 for r, h in zip(raw, holm_correction(raw)))
    ok = wilcoxon_bad == 0 and cliff_bad == 0 and holm_ok
    criterion(7, "statistics oracles", ok,
              f"Wilcoxon {100 - wilcoxon_bad}/100 match enumeration, Cliff {100 - cliff_bad}/100 exact, "
              f"Holm {[round(h, 12) for h in holm]}")
    assert ok


# 8 ---------------------------------------------------------------------------


def full_run(root, data, mock):
    root.mkdir()
    for mode in ("nonsensical", "cross-sample"):
        noisy = root / f"{mode}.jsonl"
        assert cli.main(["inject", "--dataset", str(data), "--mode", mode, "--seed", "11", "--out", str(noisy)]) == 0
        assert cli.main(["evaluate", "--dataset", str(data), "--noisy", str(noisy), "--mock", str(mock),
                         "--attributors", "featureshap,random", "--seed", "11", "--parallelism", "4",
                         "--out", str(root / "runs" / mode)]) == 0
    assert cli.main(["stats", "--scores", str(root / "runs"), "--out", str(root / "stats.csv")]) == 0
    return sorted(p.relative_to(root) for p in root.rglob("*") if p.is_file())


def test_end_to_end_determinism(tmp_path, criterion):
    data = tmp_path / "data.jsonl"
    write_dataset(synthetic_docs(12, seed=4), data)
    mock = write_mock_script(tmp_path / "mock.json")
    files_a = full_run(tmp_path / "a", data, mock)
    files_b = full_run(tmp_path / "b", data, mock)
    same = files_a == files_b and all(
        filecmp.cmp(tmp_path / "a" / f, tmp_path / "b" / f, shallow=False) for f in files_a
    )
    kinds = sorted({f.suffix for f in files_a})
    ok = same and {".csv", ".json", ".jsonl"} <= set(kinds)
    criterion(8, "end-to-end determinism", ok,
              f"{len(files_a)} files ({', '.join(kinds)}) {'byte-identical' if same else 'differ'}")
    assert ok


# 9 ---------------------------------------------------------------------------


def test_twelve_feature_performance(criterion):
    part = FeaturePartition.from_texts("perf", [f"Then {v} the rows now. " for v in VERBS], "nl_rule")
    provider = noise_blind_model()
    start = time.perf_counter()
    result = attribute_partition(part, provider, "tfidf", Mode.EXACT)
    elapsed = time.perf_counter() - start
    ok = len(part) == 12 and result.coalition_count == 4095 and elapsed < 10.0
    criterion(9, "12-feature exact run time", ok,
              f"{result.coalition_count} coalitions, {provider.calls} model calls, {elapsed:.2f}s")
    assert ok
