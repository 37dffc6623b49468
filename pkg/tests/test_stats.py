import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from webteleop.assess.stats import DegenerateSample, wilcoxon_signed_rank

from oracles import wilcoxon_brute_force


def test_all_positive_n15_gives_max_w():
    x = list(range(1, 16))
    res = wilcoxon_signed_rank(x, [0] * 15)
    assert res.w == 120            # n(n+1)/2
    assert res.p_exact == pytest.approx(1 / 2 ** 15)
    assert res.p_exact == pytest.approx(3.1e-5, rel=0.02)
    # the approximate value is convention-dependent and larger here
    assert res.p_approx == pytest.approx(3.6e-4, rel=0.1)


def test_three_positive_diffs_enumeration():
    res = wilcoxon_signed_rank([1.0, 2.0, 3.0], [0.0, 0.0, 0.0])
    assert res.w == 6
    assert res.p_exact == pytest.approx(0.125)    # 1/2^3


def test_identical_samples_degenerate():
    with pytest.raises(DegenerateSample):
        wilcoxon_signed_rank([1.0, 2.0], [1.0, 2.0])


def test_one_sample_form_against_constant():
    res = wilcoxon_signed_rank([6, 7, 5, 6.5], mu=5.5)
    # |d| = .5, 1.5, .5, 1.0 has a tie: exact must be withheld
    assert res.ties and res.p_exact is None
    assert res.w == 1.5 + 4 + 3    # mid-ranks: (1+2)/2 for the two 0.5s


def test_unequal_lengths_rejected():
    with pytest.raises(ValueError):
        wilcoxon_signed_rank([1, 2, 3], [1, 2])


def test_exact_matches_brute_force_exhaustive_small_n():
    """All sign patterns for n <= 8 with distinct magnitudes."""
    for n in range(1, 9):
        mags = [i + 1 for i in range(n)]
        for mask in range(2 ** n):
            diffs = [m if mask >> i & 1 else -m for i, m in enumerate(mags)]
            res = wilcoxon_signed_rank(diffs, [0.0] * n)
            w_oracle, p_oracle = wilcoxon_brute_force(diffs)
            assert res.w == w_oracle
            assert res.p_exact == pytest.approx(p_oracle, abs=1e-12), (n, mask)


def test_exact_matches_brute_force_random_n9_12():
    rng = np.random.default_rng(2024)
    for _ in range(200):
        n = int(rng.integers(9, 13))
        mags = rng.permutation(np.arange(1, 40))[:n] + rng.uniform(0, 0.3, n)
        signs = rng.choice([-1.0, 1.0], n)
        diffs = signs * mags
        res = wilcoxon_signed_rank(diffs, [0.0] * n)
        w_oracle, p_oracle = wilcoxon_brute_force(list(diffs))
        assert res.w == pytest.approx(w_oracle)
        assert res.p_exact == pytest.approx(p_oracle, abs=1e-12)


def test_less_tail_matches_brute_force():
    rng = np.random.default_rng(5)
    for _ in range(50):
        n = int(rng.integers(3, 9))
        mags = rng.permutation(np.arange(1, 20))[:n] + rng.uniform(0, 0.2, n)
        diffs = rng.choice([-1.0, 1.0], n) * mags
        res = wilcoxon_signed_rank(diffs, [0.0] * n, tail="less")
        w_oracle, p_oracle = wilcoxon_brute_force(list(diffs), tail="less")
        assert res.p_exact == pytest.approx(p_oracle, abs=1e-12)


@given(st.lists(st.integers(-50, 50), min_size=1, max_size=15))
@settings(max_examples=200, deadline=None)
def test_property_p_in_unit_interval_and_w_bounds(diffs):
    if all(d == 0 for d in diffs):
        with pytest.raises(DegenerateSample):
            wilcoxon_signed_rank(diffs, [0] * len(diffs))
        return
    res = wilcoxon_signed_rank(diffs, [0] * len(diffs))
    n = res.n
    assert 0 <= res.w <= n * (n + 1) / 2
    assert 0.0 < res.p_approx <= 1.0
    if res.p_exact is not None:
        assert 0.0 < res.p_exact <= 1.0


def test_zeros_dropped_before_ranking():
    res = wilcoxon_signed_rank([0.0, 1.0, 2.0], [0.0, 0.0, 0.0])
    assert res.n == 2
    assert res.w == 3.0


def test_summary_reports_both_p_values_and_convention_note():
    res = wilcoxon_signed_rank(list(range(1, 16)), [0] * 15)
    text = res.summary()
    assert "exact p" in text and "approximate p" in text
    assert "convention" in text
