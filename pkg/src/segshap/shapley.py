"""Shapley value computation over coalition value tables."""

from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial
from typing import Callable, Mapping, Sequence

import numpy as np

from .core import Coalition
from .errors import ContractViolation, IncompleteTable, PlanInvariantViolated
from .sampling import DEFAULT_EXACT_CAP, SamplingPlan


@dataclass
class ValueTable:
    """Coalition payoffs ``v(S)`` keyed by bitmask; ``v(empty) = 0``."""

    n_features: int
    values: dict[int, float] = field(default_factory=dict)
    v_empty: float = 0.0

    def __post_init__(self) -> None:
        if self.n_features < 1:
            raise ContractViolation("n_features must be positive")

    @classmethod
    def from_function(
        cls, n: int, fn: Callable[[int], float], masks: Sequence[int] | None = None
    ) -> ValueTable:
        masks = range(1, 1 << n) if masks is None else masks
        return cls(n, {m: float(fn(m)) for m in masks})

    @classmethod
    def from_coalitions(cls, n: int, values: Mapping[Coalition, float]) -> ValueTable:
        return cls(n, {c.mask: float(v) for c, v in values.items()})

    def __getitem__(self, mask: int) -> float:
        if mask == 0:
            return self.v_empty
        try:
            return self.values[mask]
        except KeyError:
            raise IncompleteTable(f"no value for coalition {Coalition.from_mask(mask).kept}") from None

    def __setitem__(self, mask: int, value: float) -> None:
        if not 0 < mask < 1 << self.n_features:
            raise ContractViolation(f"mask {mask:#x} invalid for {self.n_features} features")
        self.values[mask] = float(value)

    @property
    def v_full(self) -> float:
        return self[(1 << self.n_features) - 1]


def _popcounts(size: int) -> np.ndarray:
    idx = np.arange(size, dtype=np.int64)
    counts = np.zeros(size, dtype=np.int64)
    while idx.any():
        counts += idx & 1
        idx = idx >> 1
    return counts


def exact_shapley(table: ValueTable, cap: int = DEFAULT_EXACT_CAP) -> list[float]:
    """Exact Shapley values with ``v(empty) = 0``.

    phi_i = sum over S without i of |S|!(n-|S|-1)!/n! * (v(S+i) - v(S)).
    """
    n = table.n_features
    if n > cap:
        raise ContractViolation(f"exact Shapley is limited to {cap} features, got {n}")
    size = 1 << n
    missing = size - 1 - sum(1 for m in table.values if 0 < m < size)
    if missing:
        raise IncompleteTable(f"{missing} of {size - 1} coalitions have no value")
    v = np.empty(size, dtype=np.float64)
    v[0] = table.v_empty
    for m, val in table.values.items():
        v[m] = val
    sizes = _popcounts(size)
    weights = np.array(
        [factorial(s) * factorial(n - s - 1) / factorial(n) for s in range(n)]
    )
    masks = np.arange(size, dtype=np.int64)
    phi = []
    for i in range(n):
        without = masks[(masks >> i & 1) == 0]
        gains = v[without | (1 << i)] - v[without]
        phi.append(float(np.dot(weights[sizes[without]], gains)))
    return phi


def mc_shapley(table: ValueTable, plan: SamplingPlan) -> list[float]:
    """Inclusion/exclusion estimate over the sampled coalitions.

    For each feature: mean payoff of sampled coalitions that keep it minus the
    mean payoff of sampled coalitions that drop it.
    """
    n = plan.n_features
    if table.n_features != n:
        raise ContractViolation("table and plan disagree on the number of features")
    masks = np.fromiter(plan.masks, dtype=object if n > 62 else np.int64, count=len(plan.masks))
    vals = np.array([table[m] for m in plan.masks], dtype=np.float64)
    # Centering keeps constant tables at exactly zero despite rounding in mean().
    vals -= vals[0]
    phi = []
    for i in range(n):
        keep = np.array([(int(m) >> i) & 1 for m in masks], dtype=bool)
        if keep.all() or not keep.any():
            raise PlanInvariantViolated(
                f"feature {i} has no sampled coalition on one side of the comparison"
            )
        phi.append(float(vals[keep].mean() - vals[~keep].mean()))
    return phi


def normalize(raw: Sequence[float]) -> list[float]:
    """Clamp negatives to zero and rescale to sum to one (uniform if all zero)."""
    if len(raw) < 1:
        raise ContractViolation("cannot normalize an empty attribution")
    clamped = [max(0.0, float(x)) for x in raw]
    total = sum(clamped)
    if total > 1e-12:
        return [x / total for x in clamped]
    return [1.0 / len(raw)] * len(raw)
