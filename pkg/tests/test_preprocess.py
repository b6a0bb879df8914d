import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from kftp import synthetic
from kftp.errors import EvenWindowError, WindowTooLargeError, ZeroVarianceError
from kftp.preprocess import (
    FilteredTrace,
    correlation_table,
    estimate_noise,
    lagged_correlation,
    measured_vs_filtered_correlation,
    moving_average_filter,
    noise_histogram,
    pearson,
)
from kftp.trace_io import ThroughputTrace

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
series = arrays(np.float64, st.integers(1, 60), elements=finite)


def brute_filter(x, F):
    h = F // 2
    return np.array([np.mean(x[max(0, i - h): i + h + 1]) for i in range(len(x))])


def test_edge_shrunk_centered_mean():
    f = moving_average_filter([1, 2, 3, 4, 5], 3)
    np.testing.assert_allclose(f.true_throughput, [1.5, 2, 3, 4, 4.5], rtol=0, atol=1e-15)


def test_window_one_is_identity(rng):
    x = rng.normal(size=20)
    f = moving_average_filter(x, 1)
    np.testing.assert_array_equal(f.true_throughput, x)
    assert not f.noise.any()


@pytest.mark.parametrize("F", [1, 3, 5, 7])
def test_constant_series(F):
    f = moving_average_filter(np.full(12, 0.37), F)
    np.testing.assert_allclose(f.true_throughput, 0.37, rtol=1e-15)


@pytest.mark.parametrize("F", [0, 2, 4, -3])
def test_even_or_nonpositive_window(F):
    with pytest.raises(EvenWindowError, match="window"):
        moving_average_filter([1.0] * 10, F)


def test_window_too_large():
    with pytest.raises(WindowTooLargeError):
        moving_average_filter([1.0, 2.0, 3.0], 5)


@given(series, st.sampled_from([1, 3, 5, 7, 9]))
def test_filter_matches_brute_force_and_decomposes(x, F):
    if F > x.size:
        return
    f = moving_average_filter(x, F)
    assert f.true_throughput.shape == x.shape
    np.testing.assert_allclose(f.true_throughput, brute_filter(x, F), rtol=1e-12, atol=1e-9)
    # measured = true + noise to machine precision
    np.testing.assert_allclose(f.true_throughput + f.noise, x, rtol=0, atol=1e-12 * max(1.0, np.abs(x).max()))


@given(arrays(np.float64, st.integers(12, 60), elements=finite), st.sampled_from([3, 5, 7]), st.integers(1, 4))
def test_shift_equivariant_in_interior(x, F, shift):
    a = moving_average_filter(x[shift:], F).true_throughput
    b = moving_average_filter(x, F).true_throughput[shift:]
    h = F // 2
    np.testing.assert_allclose(a[h:-h], b[h:-h], rtol=1e-12, atol=1e-9)


def test_estimate_noise_examples():
    zero = estimate_noise(FilteredTrace(np.zeros(3), np.zeros(3), np.zeros(3), 1))
    assert (zero.sigma2_M, zero.mean) == (0.0, 0.0)
    pm = estimate_noise(FilteredTrace(np.zeros(2), np.array([1.0, -1.0]), np.array([-1.0, 1.0]), 1))
    assert pm.sigma2_M == 1.0 and pm.mean == 0.0 and pm.sigma_M == 1.0


@given(arrays(np.float64, st.integers(1, 80), elements=finite))
def test_noise_variance_two_pass(noise):
    m = estimate_noise(FilteredTrace(noise, np.zeros_like(noise), noise, 1))
    mean = sum(noise) / len(noise)
    var = sum((v - mean) ** 2 for v in noise) / len(noise)
    assert m.sigma2_M >= 0
    assert abs(m.sigma2_M - var) <= 1e-12 * max(1.0, var)


def test_pearson_examples():
    assert pearson([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0, abs=1e-15)
    assert pearson([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0, abs=1e-15)
    with pytest.raises(ZeroVarianceError):
        pearson([1, 1, 1], [1, 2, 3])


@given(
    arrays(np.float64, 20, elements=st.floats(-100, 100)),
    arrays(np.float64, 20, elements=st.floats(-100, 100)),
    st.floats(0.1, 10) | st.floats(-10, -0.1),
    st.floats(-50, 50),
)
def test_pearson_symmetry_and_affine_invariance(x, y, a, b):
    if np.ptp(x) < 1e-3 or np.ptp(y) < 1e-3:
        return
    r = pearson(x, y)
    assert -1.0 <= r <= 1.0
    assert pearson(y, x) == pytest.approx(r, abs=1e-12)
    assert pearson(a * x + b, y) == pytest.approx(np.sign(a) * r, abs=1e-9)


def test_lagged_correlation_of_exact_shift(rng):
    target = rng.normal(size=200)
    L = 4
    feature = np.concatenate([target[L:], rng.normal(size=L)])
    assert lagged_correlation(feature, target, L) == pytest.approx(1.0, abs=1e-12)


def test_independent_white_noise_uncorrelated():
    # sampling sd of rho is ~1/sqrt(N) = 0.01, so 0.05 is a 5-sigma bound
    rng = np.random.default_rng(2024)
    a, b = rng.normal(size=10_000), rng.normal(size=10_000)
    for L in (1, 3, 5):
        assert abs(lagged_correlation(a, b, L)) < 0.05


def test_measured_vs_filtered_decreases_with_window():
    syn = synthetic.linear_gaussian(5000, seed=3, sigma2_M=0.01)
    rhos = [measured_vs_filtered_correlation(syn.measured, F) for F in (1, 3, 5, 7, 9)]
    assert rhos[0] == pytest.approx(1.0, abs=1e-12)
    assert all(a >= b for a, b in zip(rhos, rhos[1:]))


def test_correlation_table_rows():
    syn = synthetic.linear_gaussian(500, seed=1)
    tr = synthetic.to_trace(syn)
    rows = correlation_table(tr, 3, [1, 3, 5])
    assert {r["feature"] for r in rows} == {"rsrp", "sinr", "throughput"}
    assert len(rows) == 9
    assert all(-1 <= r["rho"] <= 1 for r in rows)
    thr = [r["rho"] for r in rows if r["feature"] == "throughput"]
    assert thr == sorted(thr, reverse=True)


def test_correlation_table_constant_feature_is_nan():
    tr = ThroughputTrace.from_arrays(np.arange(10.0) + 1, 1.0, speed=np.zeros(10))
    rows = correlation_table(tr, 1, [1], features=("speed",))
    assert np.isnan(rows[0]["rho"])


def test_noise_histogram_integrates_to_one(rng):
    rows = noise_histogram(rng.normal(size=1000), bins=20)
    assert len(rows) == 20
    assert sum((r - l) * d for l, r, d in rows) == pytest.approx(1.0)
