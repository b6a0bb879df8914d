"""Moving-average denoising, measurement-noise estimation and correlation diagnostics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    EmptyTraceError,
    EvenWindowError,
    LengthMismatchError,
    TraceTooShortError,
    WindowTooLargeError,
    ZeroVarianceError,
)
from .trace_io import ThroughputTrace


@dataclass(frozen=True)
class FilteredTrace:
    measured: np.ndarray
    true_throughput: np.ndarray
    noise: np.ndarray
    filter_window: int

    def __len__(self):
        return self.measured.size


@dataclass(frozen=True)
class NoiseModel:
    sigma2_M: float
    mean: float

    @property
    def sigma_M(self) -> float:
        return float(np.sqrt(self.sigma2_M))


def moving_average_filter(measured, window: int) -> FilteredTrace:
    """Centered moving average, window truncated at both edges.

    ``true[n]`` is the mean of ``measured[max(0, n-h) : min(N, n+h+1)]`` with
    ``h = window // 2``, so every output is defined and there is no phase lag.
    """
    x = np.asarray(measured, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise EmptyTraceError("measured series must be a non-empty 1-D sequence")
    if window < 1 or window % 2 == 0:
        raise EvenWindowError(f"--window must be an odd integer >= 1, got {window}")
    if window > x.size:
        raise WindowTooLargeError(f"--window {window} exceeds series length {x.size}")

    n = x.size
    h = window // 2
    total = np.zeros(n)
    count = np.zeros(n)
    # shifted-copy sums avoid the drift a running cumsum accumulates on long traces
    for k in range(-h, h + 1):
        lo, hi = max(0, -k), min(n, n - k)
        total[lo:hi] += x[lo + k:hi + k]
        count[lo:hi] += 1
    true = total / count
    return FilteredTrace(x, true, x - true, window)


def estimate_noise(filtered: FilteredTrace) -> NoiseModel:
    """Population (1/N) variance and mean of the filter residuals."""
    noise = np.asarray(filtered.noise, dtype=float)
    if noise.size == 0:
        raise EmptyTraceError("noise series is empty")
    return NoiseModel(sigma2_M=float(np.var(noise)), mean=float(np.mean(noise)))


def pearson(x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise LengthMismatchError(f"series lengths differ: {x.size} vs {y.size}")
    if x.size < 2:
        raise TraceTooShortError("pearson needs at least 2 points")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise ZeroVarianceError("pearson correlation undefined for a constant series")
    rho = float(dx @ dy) / np.sqrt(sxx * syy)
    return float(np.clip(rho, -1.0, 1.0))


def lagged_correlation(feature, target, lead: int) -> float:
    """Correlation between ``feature[n]`` and ``target[n + lead]``."""
    feature = np.asarray(feature, dtype=float)
    target = np.asarray(target, dtype=float)
    if feature.shape != target.shape:
        raise LengthMismatchError(f"series lengths differ: {feature.size} vs {target.size}")
    if lead < 1:
        raise TraceTooShortError(f"lead must be >= 1 sample, got {lead}")
    if feature.size - lead < 2:
        raise TraceTooShortError(f"only {max(feature.size - lead, 0)} overlapping samples at lead {lead}")
    return pearson(feature[:-lead], target[lead:])


def measured_vs_filtered_correlation(measured, window: int) -> float:
    f = moving_average_filter(measured, window)
    return pearson(f.measured, f.true_throughput)


def correlation_table(trace: ThroughputTrace, window: int, leads, features=None) -> list[dict]:
    """Rows of (feature, L, rho) between present features and future true throughput.

    The ``throughput`` feature is the present filtered throughput. Radio
    features are used as measured; Pearson's rho ignores affine scaling so
    normalization does not matter here.
    """
    filtered = moving_average_filter(trace.throughput, window)
    if features is None:
        features = (*trace.available_features, "throughput")
    rows = []
    for name in features:
        col = filtered.true_throughput if name == "throughput" else trace.column(name)
        for lead in leads:
            try:
                rho = lagged_correlation(col, filtered.true_throughput, lead)
            except ZeroVarianceError:
                rho = float("nan")
            rows.append({"feature": name, "L": int(lead), "rho": rho})
    return rows


def noise_histogram(noise, bins: int = 50):
    """Histogram of residuals as (bin_left, bin_right, density) rows for external plotting."""
    density, edges = np.histogram(np.asarray(noise, dtype=float), bins=bins, density=True)
    return [(float(edges[i]), float(edges[i + 1]), float(density[i])) for i in range(density.size)]
