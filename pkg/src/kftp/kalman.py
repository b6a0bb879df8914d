"""Kalman prediction-correction loop over the regression state equation.

At every step ``n`` (1-based) the filter

* seeds itself from the measurement while ``n <= L``;
* otherwise corrects the prediction made ``L`` steps earlier::

      S = P(n) + sigma2_M
      K = P(n) / S
      x*(n) = x^(n) + K (x~(n) - x^(n))
      P*(n) = (1 - K) P(n)

* and always projects ``L`` steps ahead from the corrected estimate::

      x^(n+L) = a_x x*(n) + a0 + a_u . u(n)
      P(n+L)  = a_x^2 P*(n) + sigma2_P

``x^`` and ``P`` live in ring buffers of ``L + 1`` slots indexed mod ``L + 1``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import FeatureMismatchError, InvalidLeadError, TraceTooShortError
from .mlr import RegressionModel


@dataclass(frozen=True, slots=True)
class StepOutput:
    n: int
    xstar: float
    predicted_ahead: float
    P_ahead: float
    gain: float
    S: float
    prior: float
    P_prior: float
    Pstar: float
    warmup: bool


class KftpFilter:
    """Single-owner mutable state of the recursion for one stream."""

    __slots__ = ("model", "lead", "_a0", "_au", "_ax", "_s2p", "_s2m", "_k",
                 "xhat", "P", "n", "last")

    def __init__(self, model: RegressionModel):
        if model.lead < 1:
            raise InvalidLeadError(f"lead L must be >= 1, got {model.lead}")
        self.model = model
        self.lead = model.lead
        self._a0 = float(model.bias)
        self._au = tuple(float(a) for a in model.feature_coef)
        self._ax = float(model.throughput_coef)
        self._s2p = float(model.sigma2_P)
        self._s2m = float(model.sigma2_M)
        self._k = len(self._au)
        self.xhat = [0.0] * (self.lead + 1)
        self.P = [0.0] * (self.lead + 1)
        self.n = 0
        self.last: StepOutput | None = None

    def step(self, measured: float, u=()) -> StepOutput:
        if len(u) != self._k:
            raise FeatureMismatchError(
                f"got {len(u)} feature values, model expects {self.model.feature_set}"
            )
        self.n = n = self.n + 1
        slots = self.lead + 1
        here = n % slots
        s2m = self._s2m

        if n <= self.lead:
            xstar = prior = float(measured)
            Pstar = P = K = 0.0
            S = s2m
            warm = True
        else:
            prior = self.xhat[here]
            P = self.P[here]
            S = P + s2m
            # S == 0 only when both variances vanish; trust the prediction
            K = P / S if S > 0.0 else 0.0
            xstar = prior + K * (measured - prior)
            Pstar = (1.0 - K) * P
            warm = False

        drive = self._a0
        for a, v in zip(self._au, u):
            drive += a * v
        ahead = self._ax * xstar + drive
        P_ahead = self._ax * self._ax * Pstar + self._s2p
        out_slot = (n + self.lead) % slots
        self.xhat[out_slot] = ahead
        self.P[out_slot] = P_ahead

        self.last = StepOutput(n, xstar, ahead, P_ahead, K, S, prior, P, Pstar, warm)
        return self.last


@dataclass(frozen=True)
class PredictionSeries:
    """Aligned per-step outputs of a run.

    ``predicted[i]`` is the forecast of sample ``i`` issued ``L`` steps
    earlier; during warm-up it is the measured value itself.
    """

    n: np.ndarray
    measured: np.ndarray
    true: np.ndarray | None
    predicted: np.ndarray
    estimate: np.ndarray
    gain: np.ndarray
    warmup: np.ndarray
    lead: int

    def __len__(self):
        return self.n.size

    def scored(self, include_warmup: bool = False):
        """(truth, prediction) pairs used for metrics."""
        if self.true is None:
            raise ValueError("series has no ground truth")
        mask = np.ones(self.n.size, bool) if include_warmup else ~self.warmup
        return self.true[mask], self.predicted[mask]

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["n", "measured", "true", "predicted", "estimate", "gain", "warmup_flag"])
            for i in range(self.n.size):
                w.writerow([
                    int(self.n[i]), repr(float(self.measured[i])),
                    "" if self.true is None else repr(float(self.true[i])),
                    repr(float(self.predicted[i])), repr(float(self.estimate[i])),
                    repr(float(self.gain[i])), int(self.warmup[i]),
                ])


def run(model: RegressionModel, measured, features=None, true=None) -> PredictionSeries:
    """Fold a fresh :class:`KftpFilter` over a whole measured series."""
    x = np.asarray(measured, dtype=float)
    L = model.lead
    if x.size <= L:
        raise TraceTooShortError(f"trace of {x.size} samples is not longer than the lead L={L}")
    k = len(model.feature_set)
    if features is None:
        if k:
            raise FeatureMismatchError(f"model needs features {model.feature_set}")
        rows = [()] * x.size
    else:
        u = np.asarray(features, dtype=float).reshape(x.size, -1)
        if u.shape[1] != k:
            raise FeatureMismatchError(f"{u.shape[1]} feature columns for model features {model.feature_set}")
        rows = [tuple(r) for r in u.tolist()]

    filt = KftpFilter(model)
    predicted = np.empty(x.size)
    estimate = np.empty(x.size)
    gain = np.empty(x.size)
    for i, (xm, ui) in enumerate(zip(x.tolist(), rows)):
        out = filt.step(xm, ui)
        predicted[i] = out.prior
        estimate[i] = out.xstar
        gain[i] = out.gain
    warm = np.zeros(x.size, bool)
    warm[:L] = True
    return PredictionSeries(
        n=np.arange(1, x.size + 1),
        measured=x,
        true=None if true is None else np.asarray(true, dtype=float),
        predicted=predicted,
        estimate=estimate,
        gain=gain,
        warmup=warm,
        lead=L,
    )
