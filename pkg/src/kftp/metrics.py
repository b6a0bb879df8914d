"""Accuracy metrics, timing helpers and the channel coherence-time utility."""

from __future__ import annotations

import json
import math
import statistics
import time
from dataclasses import asdict, dataclass

import numpy as np

from .errors import (
    LengthMismatchError,
    NonPositiveBaselineError,
    NonPositiveInputError,
    TraceTooShortError,
    ZeroVarianceError,
)

SPEED_OF_LIGHT = 2.998e8


@dataclass
class EvalReport:
    r2: float
    mae: float
    n_samples: int
    lead_L: int
    filter_F: int
    fit_time: float = 0.0
    predict_time: float = 0.0
    predictor: str = ""
    dataset: str = ""

    def __post_init__(self):
        if self.r2 > 1.0 or self.mae < 0.0 or self.n_samples < 2:
            raise ValueError(f"inconsistent report: r2={self.r2} mae={self.mae} n={self.n_samples}")

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _pair(truth, pred):
    t = np.asarray(truth, dtype=float)
    p = np.asarray(pred, dtype=float)
    if t.shape != p.shape:
        raise LengthMismatchError(f"series lengths differ: {t.size} vs {p.size}")
    return t, p


def r2_score(truth, pred) -> float:
    """``1 - SS_res / SS_tot``."""
    t, p = _pair(truth, pred)
    if t.size < 2:
        raise TraceTooShortError("r2_score needs at least 2 samples")
    ss_tot = float(np.sum((t - t.mean()) ** 2))
    if ss_tot == 0.0:
        raise ZeroVarianceError("r2_score undefined for constant ground truth")
    return 1.0 - float(np.sum((t - p) ** 2)) / ss_tot


def mae(truth, pred) -> float:
    t, p = _pair(truth, pred)
    if t.size < 1:
        raise TraceTooShortError("mae needs at least 1 sample")
    return float(np.mean(np.abs(t - p)))


def r2_gain(kftp_r2: float, mlr_r2: float) -> float:
    """Relative R^2 improvement of KFTP over standalone MLR, in percent."""
    if not mlr_r2 > 0:
        raise NonPositiveBaselineError(f"baseline R^2 must be positive, got {mlr_r2!r}")
    return 100.0 * (kftp_r2 - mlr_r2) / mlr_r2


def bench(func, *args, repetitions: int = 5, **kwargs) -> float:
    """Median wall-clock seconds per call of ``func(*args, **kwargs)``."""
    if repetitions < 3:
        raise ValueError("repetitions must be >= 3")
    times = []
    for _ in range(repetitions):
        t0 = time.perf_counter()
        func(*args, **kwargs)
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def coherence_time(v: float, fc: float) -> float:
    """50% coherence time ``sqrt(9 / (16 pi f_m^2))`` with Doppler ``f_m = v fc / c``.

    ``v`` in m/s, ``fc`` in Hz; returns seconds.
    """
    if not (v > 0 and fc > 0):
        raise NonPositiveInputError(f"speed and carrier frequency must be positive, got v={v!r} fc={fc!r}")
    fm = v / SPEED_OF_LIGHT * fc
    return math.sqrt(9.0 / (16.0 * math.pi * fm * fm))
