import json

import numpy as np
import pytest
import pywt

from wavefeat.common import DataError, InfeasibleTransformError
from wavefeat.wavelet import (Decomposition, SUPPORTED_FILTERS, dwt, filter_bank, filter_residuals, idwt,
                              level_sizes, max_level, mra, polish)

FILTERS = ('haar', 'd4', 'd8', 'd12', 'd16', 'la8', 'la16', 'la20')


@pytest.mark.parametrize('name', SUPPORTED_FILTERS)
def test_filter_bank_is_orthonormal(name):
    f = filter_bank(name)
    g, h = f.scaling, f.wavelet
    assert abs(g.sum() - np.sqrt(2)) < 1e-12
    assert abs((g ** 2).sum() - 1.0) < 1e-12
    assert abs(h.sum()) < 1e-12
    assert abs(np.dot(g, h)) < 1e-12


@pytest.mark.parametrize('name', ['la8', 'la10', 'la12', 'la14', 'la16'])
def test_least_asymmetric_filters_hold_to_machine_precision(name):
    f = filter_bank(name)
    assert abs(f.wavelet.sum()) < 1e-14
    assert np.max(np.abs(filter_residuals(f.scaling))) < 1e-13
    # still the tabulated filter, not another root of the same equations
    table = np.asarray(pywt.Wavelet('sym' + str(f.L // 2)).rec_lo)
    assert np.max(np.abs(f.scaling - table)) < 1e-10


def test_polish_recovers_perturbed_filter():
    exact = filter_bank('d4').scaling
    noisy = exact + 1e-11 * np.random.default_rng(0).standard_normal(4)
    assert np.max(np.abs(filter_residuals(noisy))) > 1e-13
    np.testing.assert_allclose(polish(noisy), exact, atol=1e-13)


def test_filter_lengths_and_aliases():
    assert filter_bank('d4').L == 4
    assert filter_bank('la16').L == 16
    assert filter_bank('D12').L == 12
    assert filter_bank('s16') is filter_bank('la16')
    assert filter_bank('d2') is filter_bank('haar')
    with pytest.raises(InfeasibleTransformError, match='supported'):
        filter_bank('coif3')


def test_haar_level_one():
    d = dwt(np.array([1.0, 2.0, 3.0, 5.0]), 'haar', 1)
    np.testing.assert_allclose(d.details[0], np.array([1.0, 2.0]) / np.sqrt(2), atol=1e-15)
    np.testing.assert_allclose(d.smooth, np.array([3.0, 8.0]) / np.sqrt(2), atol=1e-15)
    assert d.extras == []


def test_periodic_alignment_matches_circular_filtering():
    # W_t = sum_l h_l x[(2t + 1 - l) mod n]
    rng = np.random.default_rng(0)
    x = rng.standard_normal(16)
    f = filter_bank('d4')
    d = dwt(x, f, 1)
    expected = [sum(f.wavelet[l] * x[(2 * t + 1 - l) % 16] for l in range(f.L)) for t in range(8)]
    np.testing.assert_allclose(d.details[0], expected, atol=1e-14)


@pytest.mark.parametrize('name', FILTERS)
@pytest.mark.parametrize('n', [8, 251, 500, 1024])
def test_round_trip_and_energy(name, n):
    rng = np.random.default_rng(n)
    X = rng.standard_normal((100, n))
    for J0 in range(1, 5):
        if J0 > max_level(n):
            with pytest.raises(InfeasibleTransformError, match='maximum feasible level'):
                dwt(X, name, J0)
            continue
        d = dwt(X, name, J0)
        assert d.coefficient_count() == n
        assert np.max(np.abs(idwt(d) - X)) < 1e-9
        energy = (X ** 2).sum(axis=1)
        assert np.max(np.abs(d.energy() - energy) / energy) < 1e-9


def test_batch_equals_single_record():
    rng = np.random.default_rng(1)
    X = rng.standard_normal((5, 251))
    batch = dwt(X, 'la16', 3)
    single = dwt(X[2], 'la16', 3)
    np.testing.assert_allclose(batch.coefficients()[2], single.coefficients(), atol=1e-13)


def test_extras_are_the_detached_samples():
    x = np.arange(251, dtype=np.float64)
    d = dwt(x, 'd4', 1)
    assert d.extras == [(1, 250.0)]
    assert d.details[0].size == 125 and d.smooth.size == 125


def test_dyadic_lengths_have_no_extras():
    d = dwt(np.random.default_rng(2).standard_normal(1024), 'la16', 4)
    assert d.extra_levels == ()
    assert [w.size for w in d.details] == [512, 256, 128, 64]
    assert d.smooth.size == 64


def test_d4_full_transform_of_251():
    d = dwt(np.random.default_rng(3).standard_normal(251), 'd4', 4)
    assert [w.size for w in d.details] == [125, 62, 31, 15]
    assert d.smooth.size == 15
    assert d.extra_levels == (1, 2, 4)
    # details + smooth, extras aside
    assert sum(w.size for w in d.details) + d.smooth.size == 248


def test_level_sizes_and_max_level():
    assert level_sizes(251, 2) == [(251, True, 125), (125, True, 62)]
    assert max_level(8) == 3
    assert max_level(1024) == 10
    assert max_level(1) == 0
    with pytest.raises(InfeasibleTransformError, match='maximum feasible level is 3'):
        dwt(np.ones(8), 'haar', 4)
    with pytest.raises(InfeasibleTransformError):
        dwt(np.ones(8), 'haar', 0)


def test_long_filter_wraps_on_short_series():
    x = np.random.default_rng(4).standard_normal(8)
    d = dwt(x, 'la20', 2)
    np.testing.assert_allclose(idwt(d), x, atol=1e-12)


@pytest.mark.parametrize('n', [64, 251])
def test_mra_sums_to_signal(n):
    x = np.random.default_rng(n).standard_normal(n)
    d = dwt(x, 'la8', 3)
    series = mra(d)
    assert len(series) == 4
    assert all(s.shape == x.shape for s in series)
    np.testing.assert_allclose(np.sum(series, axis=0), x, atol=1e-10)


def test_decomposition_json_round_trip():
    x = np.random.default_rng(5).standard_normal(37)
    d = dwt(x, 'd8', 2)
    back = Decomposition.from_dict(json.loads(json.dumps(d.to_dict())))
    np.testing.assert_array_equal(back.coefficients(), d.coefficients())
    np.testing.assert_allclose(idwt(back), x, atol=1e-12)


def test_malformed_decomposition_rejected():
    d = dwt(np.ones(16), 'haar', 2).to_dict()
    d['smooth'] = d['smooth'][:-1]
    with pytest.raises(DataError):
        Decomposition.from_dict(d)


def test_dwt_is_linear():
    rng = np.random.default_rng(6)
    x, y = rng.standard_normal((2, 251))
    a, b = 2.5, -0.75
    for name in ('d12', 'la16'):
        combined = dwt(a * x + b * y, name, 3).coefficients()
        separate = a * dwt(x, name, 3).coefficients() + b * dwt(y, name, 3).coefficients()
        np.testing.assert_allclose(combined, separate, atol=1e-12)


def test_zero_decomposition_synthesizes_zero():
    d = dwt(np.random.default_rng(7).standard_normal(37), 'd8', 2)
    zero = d.replace(details=[np.zeros_like(w) for w in d.details], smooth=np.zeros_like(d.smooth),
                     extra_values=np.zeros_like(d.extra_values))
    np.testing.assert_array_equal(idwt(zero), np.zeros(37))


def test_haar_mra_of_constant_signal():
    x = np.full(8, 3.0)
    detail, smooth = mra(dwt(x, 'haar', 1))
    np.testing.assert_allclose(detail, np.zeros(8), atol=1e-15)
    np.testing.assert_allclose(smooth, x, atol=1e-14)


def test_extras_follow_odd_level_lengths():
    # 10 is even, its level-1 smooth of 5 is odd
    x = np.arange(10, dtype=np.float64)
    assert dwt(x, 'haar', 1).extra_levels == ()
    d = dwt(x, 'haar', 2)
    assert d.extra_levels == (2,)
    assert [w.size for w in d.details] == [5, 2] and d.smooth.size == 2
    np.testing.assert_allclose(idwt(d), x, atol=1e-12)
    # an odd length detaches its last sample at level 1
    assert dwt(np.arange(11, dtype=np.float64), 'haar', 1).extra_levels == (1,)
