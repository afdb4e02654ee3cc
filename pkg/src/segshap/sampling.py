"""Coalition enumeration and Monte-Carlo coalition sampling.

Coalitions are handled internally as bitmasks (bit ``i`` set means feature
``i`` is kept). The empty coalition is never produced.
"""

from __future__ import annotations

import math
import random
from bisect import bisect_right
from dataclasses import dataclass

import numpy as np

from .core import Coalition, Mode
from .errors import ContractViolation, ExactModeCap

DEFAULT_EXACT_CAP = 12

_SEED_MASK = (1 << 64) - 1


@dataclass(frozen=True)
class SamplingPlan:
    n_features: int
    mode: Mode
    ratio: float
    seed: int
    masks: tuple[int, ...]

    @property
    def coalitions(self) -> list[Coalition]:
        return [Coalition.from_mask(m) for m in self.masks]

    def __len__(self) -> int:
        return len(self.masks)


def enumerate_exact(n: int, cap: int = DEFAULT_EXACT_CAP) -> SamplingPlan:
    """All ``2**n - 1`` nonempty coalitions in binary-counting order."""
    if n < 1:
        raise ContractViolation("n must be positive")
    if n > cap:
        raise ExactModeCap(n, cap)
    return SamplingPlan(n, Mode.EXACT, 1.0, 0, tuple(range(1, 1 << n)))


def essential_masks(n: int) -> list[int]:
    """The full coalition followed by every single-omission coalition."""
    full = (1 << n) - 1
    return [full] + [full ^ (1 << i) for i in range(n) if full ^ (1 << i)]


def extra_count(n: int, ratio: float) -> int:
    return math.ceil(ratio * max(0, (1 << n) - n - 2))


def sample_mc(n: int, ratio: float, seed: int) -> SamplingPlan:
    """Essential coalitions plus a seeded uniform sample of the rest.

    The plan holds N, the ``n`` single omissions, and
    ``ceil(ratio * (2**n - n - 2))`` further proper nonempty subsets drawn
    without replacement.
    """
    if n < 1:
        raise ContractViolation("n must be positive")
    if not 0.0 <= ratio <= 1.0:
        raise ContractViolation(f"sampling ratio must lie in [0, 1], got {ratio}")
    core = essential_masks(n)
    k = extra_count(n, ratio)
    extras: list[int] = []
    if k:
        rng = np.random.default_rng(seed & _SEED_MASK)
        # Remaining population: masks 1 .. 2**n - 2 minus the single omissions.
        skipped = sorted(core[1:])
        population = (1 << n) - 2 - len(skipped)
        if k >= population:
            picks = range(population)
        elif n <= 62:
            picks = rng.choice(population, size=k, replace=False).tolist()
        else:
            picks = _sample_big(rng, population, k)
        extras = [_nth_remaining(j, skipped) for j in picks]
    masks = tuple(core + sorted(extras))
    return SamplingPlan(n, Mode.MONTE_CARLO, float(ratio), seed, masks)


def _nth_remaining(j: int, skipped: list[int]) -> int:
    """The ``j``-th (0-based) mask in ``1..`` after removing ``skipped``."""
    mask = j + 1
    # Each skipped value at or below the candidate pushes it one further.
    shift = 0
    while True:
        s = bisect_right(skipped, mask + shift)
        if s == shift:
            return mask + shift
        shift = s


def _sample_big(rng: np.random.Generator, population: int, k: int) -> list[int]:
    # numpy integers are 64-bit; the stdlib generator handles arbitrary ranges.
    r = random.Random(int(rng.integers(0, 1 << 63)))
    chosen: set[int] = set()
    while len(chosen) < k:
        chosen.add(r.randrange(population))
    return sorted(chosen)


def build_plan(
    n: int, mode: Mode | str, ratio: float = 0.0, seed: int = 0, cap: int = DEFAULT_EXACT_CAP
) -> SamplingPlan:
    mode = Mode.parse(mode)
    if mode is Mode.EXACT:
        plan = enumerate_exact(n, cap)
        return SamplingPlan(n, Mode.EXACT, 1.0, seed, plan.masks)
    return sample_mc(n, ratio, seed)
