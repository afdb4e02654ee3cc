import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from segshap.core import Mode
from segshap.errors import ContractViolation, ExactModeCap
from segshap.sampling import build_plan, enumerate_exact, sample_mc


def test_exact_n2_binary_order():
    plan = enumerate_exact(2)
    assert [sorted(c.kept) for c in plan.coalitions] == [[0], [1], [0, 1]]


def test_exact_sizes_and_cap():
    assert len(enumerate_exact(3)) == 7
    assert len(enumerate_exact(12)) == 4095
    with pytest.raises(ExactModeCap) as info:
        enumerate_exact(13)
    assert info.value.cap == 12 and "12" in str(info.value)
    assert len(enumerate_exact(13, cap=13)) == 8191


def test_ratio_zero_is_essential_only():
    plan = sample_mc(5, 0.0, seed=1)
    full = 0b11111
    assert set(plan.masks) == {full} | {full ^ (1 << i) for i in range(5)}
    assert len(plan) == 6


def test_ratio_one_covers_everything():
    assert set(sample_mc(5, 1.0, seed=9).masks) == set(range(1, 32))


def test_seeded_determinism():
    assert sample_mc(8, 0.5, seed=42) == sample_mc(8, 0.5, seed=42)
    assert sample_mc(8, 0.5, seed=42).masks != sample_mc(8, 0.5, seed=43).masks


def test_ratio_out_of_range():
    with pytest.raises(ContractViolation):
        sample_mc(4, 1.5, 0)
    with pytest.raises(ContractViolation):
        sample_mc(0, 0.5, 0)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 14), st.floats(0, 1), st.integers(0, 2**64 - 1))
def test_mc_plan_invariants(n, ratio, seed):
    plan = sample_mc(n, ratio, seed)
    masks = plan.masks
    full = (1 << n) - 1
    assert len(set(masks)) == len(masks)
    assert 0 not in masks
    assert all(0 < m <= full for m in masks)
    assert full in masks
    for i in range(n):
        if n > 1:
            assert full ^ (1 << i) in masks
    expected = min((1 << n) - 1, n + 1 + math.ceil(ratio * max(0, (1 << n) - n - 2)))
    if n == 1:
        expected = 1
    assert len(masks) == expected


def test_large_n_sampling():
    plan = sample_mc(70, 1e-19, seed=3)
    assert len(plan) == 71 + math.ceil(1e-19 * ((1 << 70) - 72))
    assert len(set(plan.masks)) == len(plan)


def test_build_plan_dispatch():
    assert build_plan(3, "exact").mode is Mode.EXACT
    assert build_plan(3, "mc", 0.0).mode is Mode.MONTE_CARLO
    assert build_plan(3, "exact").ratio == 1.0
