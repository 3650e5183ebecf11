import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from pairstream.rff import (FourierMap, approx_kernel, approx_kernel_cos, approx_pairwise_kernel,
                            gauss_kernel, pairwise_kernel, rff_count, sample_map)


def fixed_map(freqs, gamma=1.0):
    return FourierMap(np.asarray(freqs, dtype=float), gamma, 0)


def test_sample_map_deterministic():
    a = sample_map(2, 4, 0.5, seed=7)
    b = sample_map(2, 4, 0.5, seed=7)
    assert np.array_equal(a.freqs, b.freqs)
    assert a.freqs.shape == (2, 2) and a.n_features == 4


@pytest.mark.parametrize("D", [3, 0, 1])
def test_sample_map_rejects_bad_D(D):
    with pytest.raises(ValueError):
        sample_map(2, D, 1.0)


def test_sample_map_rejects_bad_gamma_and_d():
    with pytest.raises(ValueError):
        sample_map(2, 4, 0.0)
    with pytest.raises(ValueError):
        sample_map(0, 4, 1.0)


@pytest.mark.slow
def test_frequency_moments_match_gaussian():
    # 10^6 rows, d=1: entries ~ N(0, 2 gamma)
    gamma = 0.5
    q = sample_map(1, 2 * 10**6, gamma, seed=1).freqs.ravel()
    se = math.sqrt(2 * gamma / q.size)
    assert abs(q.mean()) <= 3 * se
    assert abs(q.var() - 2 * gamma) <= 3 * 2 * gamma * math.sqrt(2 / q.size)


def test_map_zero_frequency():
    fm = fixed_map([[0.0, 0.0]])
    np.testing.assert_array_equal(fm.map([0.3, -2.0]), [1.0, 0.0])


def test_map_hand_evaluated():
    fm = fixed_map([[math.pi / 2, 0.0], [0.0, 0.0]])
    r = fm.map([1.0, 0.0])
    h = math.sqrt(0.5)
    # cos(pi/2), sin(pi/2), cos 0, sin 0, all times sqrt(2/4)
    np.testing.assert_allclose(r, [0.0, h, h, 0.0], atol=1e-12)


def test_map_dimension_rules():
    fm = sample_map(3, 8, 1.0)
    np.testing.assert_array_equal(fm.map([1.0, 2.0]), fm.map([1.0, 2.0, 0.0]))
    with pytest.raises(ValueError):
        fm.map(np.ones(4))


def test_map_batch_matches_rows(rng):
    fm = sample_map(5, 16, 0.2, seed=3)
    X = rng.standard_normal((7, 5))
    np.testing.assert_allclose(fm.map(X), np.stack([fm.map(x) for x in X]), rtol=0, atol=1e-14)


@given(arrays(float, 4, elements=st.floats(-100, 100)), st.integers(0, 1000))
@settings(max_examples=50)
def test_map_has_unit_norm(x, seed):
    r = sample_map(4, 32, 0.25, seed).map(x)
    assert abs(r @ r - 1.0) <= 1e-12


def test_frozen_matrix():
    fm = sample_map(2, 4, 1.0)
    with pytest.raises(ValueError):
        fm.freqs[0, 0] = 1.0


def test_text_sidecar_round_trip():
    fm = sample_map(3, 10, 0.3, seed=11)
    for full in (False, True):
        back = FourierMap.from_text(fm.to_text(include_matrix=full))
        assert np.array_equal(back.freqs, fm.freqs) and back.gamma == fm.gamma


def test_gauss_kernel_values():
    assert gauss_kernel([1.0, 2.0], [1.0, 2.0], 0.7) == 1.0
    assert gauss_kernel([0.0, 0.0], [1.0, 0.0], 1.0) == pytest.approx(0.367879, abs=1e-6)
    assert gauss_kernel([1, 2], [3, 5], 0.1) == gauss_kernel([3, 5], [1, 2], 0.1)


def test_approx_kernel_forms_agree(rng):
    fm = sample_map(6, 64, 0.5, seed=2)
    for _ in range(20):
        x, x2 = rng.standard_normal((2, 6))
        assert approx_kernel(fm, x, x) == pytest.approx(1.0, abs=1e-12)
        assert approx_kernel(fm, x, x2) == pytest.approx(approx_kernel_cos(fm, x, x2), abs=1e-10)


@pytest.mark.slow
def test_approx_kernel_error_bound_over_seeds(rng):
    # |approx - exact| <= 0.05 in at least 99% of seeds at D=8192, gamma=1
    x, x2 = rng.standard_normal((2, 5))
    x, x2 = x / np.linalg.norm(x), x2 / np.linalg.norm(x2)
    exact = gauss_kernel(x, x2, 1.0)
    errs = [abs(approx_kernel(sample_map(5, 8192, 1.0, s), x, x2) - exact) for s in range(200)]
    assert np.mean(np.array(errs) <= 0.05) >= 0.99


def test_approx_kernel_unbiased_over_seeds(rng):
    x, x2 = rng.standard_normal((2, 3)) * 0.5
    exact = gauss_kernel(x, x2, 1.0)
    est = np.mean([approx_kernel(sample_map(3, 64, 1.0, s), x, x2) for s in range(200)])
    assert abs(est - exact) <= 3 / math.sqrt(200 * 32)


def test_pairwise_kernel_structure(rng):
    a, b, c, d = rng.standard_normal((4, 3))
    g = 0.4
    assert pairwise_kernel(a, a, c, d, g) == 0.0
    assert pairwise_kernel(b, a, c, d, g) == pytest.approx(-pairwise_kernel(a, b, c, d, g))
    diag = pairwise_kernel(a, b, a, b, g)
    assert diag == pytest.approx(2 - 2 * gauss_kernel(a, b, g)) and diag >= 0


def test_approx_pairwise_kernel_structure(rng):
    fm = sample_map(3, 128, 0.4, seed=5)
    a, b, c, d = rng.standard_normal((4, 3))
    assert approx_pairwise_kernel(fm, a, a, c, d) == 0.0
    four = (approx_kernel(fm, a, c) + approx_kernel(fm, b, d)
            - approx_kernel(fm, a, d) - approx_kernel(fm, b, c))
    assert approx_pairwise_kernel(fm, a, b, c, d) == pytest.approx(four, abs=1e-10)
    assert approx_pairwise_kernel(fm, b, a, c, d) == pytest.approx(-approx_pairwise_kernel(fm, a, b, c, d))
    single = max(abs(approx_kernel(fm, u, v) - gauss_kernel(u, v, 0.4))
                 for u, v in [(a, c), (b, d), (a, d), (b, c)])
    err = abs(approx_pairwise_kernel(fm, a, b, c, d) - pairwise_kernel(a, b, c, d, 0.4))
    assert err <= 4 * single + 1e-12


def test_rff_count_values():
    # direct evaluation of the regime formulas
    assert rff_count(10_000) == 922
    assert rff_count(10_000, "geometric") == 86
    assert rff_count(100, "slow_decay") == 2 * math.ceil(5 * 100 * math.log(200) / 2)
    assert rff_count(10_000, "poly_decay", c=1.0) == 922
    assert rff_count(10_000, "poly_decay", c=2.0) == 94  # 10 * ln 1e4 = 92.1 -> 93 -> 94


@given(st.integers(2, 10**6), st.sampled_from(["default", "slow_decay", "poly_decay", "geometric"]))
def test_rff_count_even_at_least_two(T, regime):
    D = rff_count(T, regime)
    assert D >= 2 and D % 2 == 0


def test_rff_count_errors():
    with pytest.raises(ValueError):
        rff_count(100, "poly_decay", c=0)
    with pytest.raises(ValueError):
        rff_count(1)
