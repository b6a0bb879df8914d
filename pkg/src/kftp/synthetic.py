"""Seeded synthetic traces that follow the regression state equation exactly.

True throughput obeys ``x(n+L) = a0 + a_u . u(n) + a_x x(n) + w(n)`` with
``w ~ N(0, sigma2_P)``; the measurement adds ``v ~ N(0, sigma2_M)``. Radio
features are AR(1) processes in the normalized domain.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .trace_io import ThroughputTrace

DEFAULT_COEF = (0.05, 0.05, 0.05, 0.85)
# affine maps from normalized features to plausible physical units
RSRP_RANGE = (-120.0, -70.0)  # dBm
SINR_RANGE = (-5.0, 30.0)  # dB


@dataclass(frozen=True)
class SyntheticTrace:
    true: np.ndarray
    measured: np.ndarray
    features: np.ndarray
    coef: tuple[float, ...]
    lead: int
    sigma2_P: float
    sigma2_M: float

    def __len__(self):
        return self.true.size


def ar1(n: int, rng: np.random.Generator, phi: float = 0.95, mean: float = 0.5, sd: float = 0.05):
    out = np.empty(n)
    out[0] = mean + rng.normal(0.0, sd / np.sqrt(1 - phi * phi))
    for i in range(1, n):
        out[i] = mean + phi * (out[i - 1] - mean) + rng.normal(0.0, sd)
    return out


def linear_gaussian(
    n: int,
    *,
    coef=DEFAULT_COEF,
    lead: int = 1,
    sigma2_P: float = 0.0025,
    sigma2_M: float = 0.0025,
    seed: int | None = 0,
    n_features: int | None = None,
) -> SyntheticTrace:
    coef = tuple(float(a) for a in coef)
    k = len(coef) - 2 if n_features is None else n_features
    if len(coef) != k + 2:
        raise ValueError(f"{len(coef)} coefficients for {k} features")
    rng = np.random.default_rng(seed)
    u = np.column_stack([ar1(n, rng) for _ in range(k)]) if k else np.empty((n, 0))
    a0, au, ax = coef[0], np.asarray(coef[1:-1]), coef[-1]
    drive_mean = a0 + float(au.sum() * 0.5)
    x = np.empty(n)
    x[:lead] = drive_mean / (1 - ax) if ax != 1 else 0.5
    w = rng.normal(0.0, np.sqrt(sigma2_P), n)
    for i in range(n - lead):
        x[i + lead] = a0 + u[i] @ au + ax * x[i] + w[i]
    v = rng.normal(0.0, np.sqrt(sigma2_M), n)
    return SyntheticTrace(x, x + v, u, coef, lead, sigma2_P, sigma2_M)


def to_bps(values, lo: float, hi: float, floor: float = 1e3):
    """Map normalized values onto ``[lo, hi]`` bps, clipped at a small positive floor."""
    return np.maximum(lo + np.asarray(values, dtype=float) * (hi - lo), floor)


def to_trace(syn: SyntheticTrace, lo: float = 10e6, hi: float = 200e6, *, measured: bool = True,
             source_id: str = "synthetic") -> ThroughputTrace:
    """Physical-unit trace: throughput in bps, rsrp in dBm, sinr in dB."""
    thr = to_bps(syn.measured if measured else syn.true, lo, hi)
    feats = {}
    for name, (flo, fhi), col in zip(("rsrp", "sinr"), (RSRP_RANGE, SINR_RANGE), syn.features.T):
        feats[name] = flo + col * (fhi - flo)
    return ThroughputTrace.from_arrays(thr, 1.0, source_id=source_id, **feats)
