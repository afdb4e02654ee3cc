"""Paired nonparametric statistics over per-instance noise scores."""

from __future__ import annotations

import csv
import math
import statistics
from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

from .errors import ContractViolation, DegenerateTest

EXACT_LIMIT = 20


class Magnitude(str, Enum):
    NEGLIGIBLE = "N"
    SMALL = "S"
    MEDIUM = "M"
    LARGE = "L"

    @classmethod
    def of(cls, delta: float) -> Magnitude:
        d = abs(delta)
        if d < 0.147:
            return cls.NEGLIGIBLE
        if d < 0.33:
            return cls.SMALL
        if d < 0.474:
            return cls.MEDIUM
        return cls.LARGE


@dataclass(frozen=True)
class PairedScores:
    a: tuple[float, ...]
    b: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "a", tuple(float(x) for x in self.a))
        object.__setattr__(self, "b", tuple(float(x) for x in self.b))
        if not self.a or len(self.a) != len(self.b):
            raise ContractViolation("paired samples must be non-empty and of equal length")

    @property
    def differences(self) -> list[float]:
        return [x - y for x, y in zip(self.a, self.b)]


@dataclass(frozen=True)
class TestResult:
    p_value: float
    delta: float
    magnitude: Magnitude
    n_effective: int
    method: str = "exact"  # "exact", "normal" or "degenerate"

    __test__ = False  # not a pytest class

    def __post_init__(self) -> None:
        if not 0.0 <= self.p_value <= 1.0:
            raise ContractViolation("p_value must lie in [0, 1]")
        if not -1.0 <= self.delta <= 1.0:
            raise ContractViolation("delta must lie in [-1, 1]")
        if self.magnitude is not Magnitude.of(self.delta):
            raise ContractViolation("magnitude disagrees with delta")


def signed_ranks(diffs: Sequence[float]) -> tuple[list[float], list[float]]:
    """Mid-ranks of |d| over the non-zero differences, and those differences."""
    nz = [d for d in diffs if d != 0]
    order = sorted(range(len(nz)), key=lambda i: abs(nz[i]))
    ranks = [0.0] * len(nz)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and abs(nz[order[j + 1]]) == abs(nz[order[i]]):
            j += 1
        mid = (i + j) / 2 + 1
        for k in range(i, j + 1):
            ranks[order[k]] = mid
        i = j + 1
    return ranks, nz


def _exact_p(ranks: Sequence[float], w_plus: float) -> float:
    # Distribution of W+ over all 2^n sign assignments, on doubled ranks so
    # that mid-ranks stay integral.
    doubled = [round(2 * r) for r in ranks]
    total = sum(doubled)
    counts = [0] * (total + 1)
    counts[0] = 1
    for r in doubled:
        for s in range(total, r - 1, -1):
            counts[s] += counts[s - r]
    observed = round(2 * w_plus)
    mirror = total - observed
    lo, hi = min(observed, mirror), max(observed, mirror)
    tail = sum(counts[: lo + 1]) + sum(counts[hi:])
    if lo == hi:
        tail -= counts[lo]
    return min(1.0, tail / 2 ** len(doubled))


def _normal_p(ranks: Sequence[float], w_plus: float) -> float:
    n = len(ranks)
    mean = n * (n + 1) / 4
    ties: dict[float, int] = {}
    for r in ranks:
        ties[r] = ties.get(r, 0) + 1
    var = n * (n + 1) * (2 * n + 1) / 24 - sum(t**3 - t for t in ties.values()) / 48
    if var <= 0:
        return 1.0
    z = max(0.0, abs(w_plus - mean) - 0.5) / math.sqrt(var)
    return min(1.0, math.erfc(z / math.sqrt(2)))


def _wilcoxon(pairs: PairedScores) -> tuple[float, int, str]:
    ranks, nz = signed_ranks(pairs.differences)
    if not nz:
        raise DegenerateTest("all paired differences are zero")
    w_plus = sum(r for r, d in zip(ranks, nz) if d > 0)
    if len(nz) <= EXACT_LIMIT:
        return _exact_p(ranks, w_plus), len(nz), "exact"
    return _normal_p(ranks, w_plus), len(nz), "normal"


def wilcoxon_signed_rank(pairs: PairedScores | tuple[Sequence[float], Sequence[float]]) -> float:
    """Two-sided p-value of the signed-rank test.

    Zero differences are dropped and tied magnitudes share their mid-rank.
    Up to ``EXACT_LIMIT`` non-zero differences the null distribution is
    enumerated exactly; beyond that a tie- and continuity-corrected normal
    approximation is used. Raises :class:`DegenerateTest` when every
    difference is zero.
    """
    if not isinstance(pairs, PairedScores):
        pairs = PairedScores(*pairs)
    return _wilcoxon(pairs)[0]


def cliffs_delta(a: Sequence[float], b: Sequence[float]) -> tuple[float, Magnitude]:
    if not a or not b:
        raise ContractViolation("both samples must be non-empty")
    sb = sorted(b)
    more = less = 0
    for x in a:
        less += len(sb) - bisect_right(sb, x)
        more += bisect_left(sb, x)
    delta = (more - less) / (len(a) * len(b))
    return delta, Magnitude.of(delta)


def holm_correction(p: Sequence[float]) -> list[float]:
    if any(not 0.0 <= x <= 1.0 for x in p):
        raise ContractViolation("p-values must lie in [0, 1]")
    m = len(p)
    order = sorted(range(m), key=lambda i: p[i])
    out = [0.0] * m
    running = 0.0
    for k, i in enumerate(order):
        running = max(running, min(1.0, (m - k) * p[i]))
        out[i] = running
    return out


def summarize(scores: Sequence[float]) -> tuple[float, float]:
    if not scores:
        raise ContractViolation("cannot summarize an empty sample")
    return statistics.fmean(scores), float(statistics.median(scores))


def compare(a: Sequence[float], b: Sequence[float]) -> TestResult:
    """Signed-rank test plus Cliff's delta of ``a`` against ``b``.

    A degenerate comparison (all differences zero) reports p = 1.
    """
    pairs = PairedScores(a, b)
    delta, mag = cliffs_delta(pairs.a, pairs.b)
    try:
        p, n_eff, method = _wilcoxon(pairs)
    except DegenerateTest:
        p, n_eff, method = DegenerateTest.p_value, 0, "degenerate"
    return TestResult(p, delta, mag, n_eff, method)


# --------------------------------------------------------------------------
# results table

CSV_COLUMNS = ("task", "model", "attributor", "mean", "median", "n", "p_adjusted", "delta", "magnitude")


@dataclass(frozen=True)
class ResultRow:
    task: str
    model: str
    attributor: str
    mean: float
    median: float
    n: int
    p_value: float | None = None
    p_adjusted: float | None = None
    delta: float | None = None
    magnitude: str = ""
    method: str = ""
    n_effective: int | None = None

    def csv_cells(self) -> list[str]:
        def fmt(x: float | None) -> str:
            return "" if x is None else repr(float(x))

        return [
            self.task,
            self.model,
            self.attributor,
            fmt(self.mean),
            fmt(self.median),
            str(self.n),
            fmt(self.p_adjusted),
            fmt(self.delta),
            self.magnitude,
        ]


def results_table(
    groups: Iterable[tuple[str, str, dict[str, Sequence[float]]]], reference: str = "featureshap"
) -> list[ResultRow]:
    """Summaries and reference-vs-baseline tests for each (task, model) group.

    ``groups`` yields ``(task, model, {attributor: paired scores})``. Holm
    correction spans every comparison in the table.
    """
    pending: list[tuple[dict, TestResult | None]] = []
    for task, model, scores in groups:
        ref = scores.get(reference)
        for name in sorted(scores, key=lambda k: (k != reference, k)):
            sample = scores[name]
            if not sample:
                continue
            mean, median = summarize(sample)
            base = dict(task=task, model=model, attributor=name, mean=mean, median=median, n=len(sample))
            test = compare(ref, sample) if ref is not None and name != reference else None
            pending.append((base, test))
    adjusted = iter(holm_correction([t.p_value for _, t in pending if t is not None]))
    rows = []
    for base, test in pending:
        if test is None:
            rows.append(ResultRow(**base))
        else:
            rows.append(
                ResultRow(
                    **base,
                    p_value=test.p_value,
                    p_adjusted=next(adjusted),
                    delta=test.delta,
                    magnitude=test.magnitude.value,
                    method=test.method,
                    n_effective=test.n_effective,
                )
            )
    return rows


def write_results_csv(rows: Sequence[ResultRow], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow(row.csv_cells())
