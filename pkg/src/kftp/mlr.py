"""Multiple linear regression state equation.

The model predicts throughput ``L`` samples ahead as

    x(n+L) ~ a0 + a1*u1(n) + ... + ak*uk(n) + a_x*x(n)

with the bias first and the present throughput coefficient last. All
quantities live in the normalized (min-max) domain.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    FeatureMismatchError,
    InvalidLeadError,
    LengthMismatchError,
    RankDeficientError,
    TooFewRowsError,
)
from .trace_io import NormalizationParams


@dataclass(frozen=True)
class FeatureVector:
    """Regressors at one time step: ``[1, u..., x]``."""

    x: float
    u: tuple[float, ...] = ()
    names: tuple[str, ...] = ()

    bias = 1.0

    def __post_init__(self):
        if len(self.u) != len(self.names):
            raise FeatureMismatchError(f"{len(self.u)} feature values for {len(self.names)} names")
        if not np.all(np.isfinite([self.x, *self.u])):
            raise FeatureMismatchError("feature vector entries must be finite")

    def to_array(self) -> np.ndarray:
        return np.array([1.0, *self.u, self.x])


@dataclass(frozen=True)
class RegressionModel:
    coef: tuple[float, ...]
    lead: int
    sigma2_P: float
    sigma2_M: float
    feature_set: tuple[str, ...] = ()
    normalization: NormalizationParams | None = None
    filter_window: int | None = None
    n_train: int = 0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.lead < 1:
            raise InvalidLeadError(f"lead L must be >= 1, got {self.lead}")
        if len(self.coef) != len(self.feature_set) + 2:
            raise FeatureMismatchError(
                f"{len(self.coef)} coefficients for features {self.feature_set} "
                f"(expected bias + {len(self.feature_set)} + throughput)"
            )
        if self.sigma2_P < 0 or self.sigma2_M < 0:
            raise ValueError("noise variances must be non-negative")

    @property
    def bias(self) -> float:
        return self.coef[0]

    @property
    def feature_coef(self) -> tuple[float, ...]:
        return self.coef[1:-1]

    @property
    def throughput_coef(self) -> float:
        return self.coef[-1]

    def to_dict(self) -> dict:
        return {
            "a": list(self.coef),
            "L": self.lead,
            "sigma2_P": self.sigma2_P,
            "sigma2_M": self.sigma2_M,
            "feature_set": list(self.feature_set),
            "normalization": None if self.normalization is None else self.normalization.to_dict(),
            "filter_window": self.filter_window,
            "n_train": self.n_train,
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> RegressionModel:
        norm = d.get("normalization")
        return cls(
            coef=tuple(float(a) for a in d["a"]),
            lead=int(d["L"]),
            sigma2_P=float(d["sigma2_P"]),
            sigma2_M=float(d["sigma2_M"]),
            feature_set=tuple(d.get("feature_set", ())),
            normalization=None if norm is None else NormalizationParams.from_dict(norm),
            filter_window=d.get("filter_window"),
            n_train=int(d.get("n_train", 0)),
            meta=dict(d.get("meta", {})),
        )

    def to_json(self) -> str:
        # repr-based float formatting round-trips bit-exactly
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> RegressionModel:
        return cls.from_dict(json.loads(text))

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path) -> RegressionModel:
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(fh.read())


def design_matrix(x_true, features=None, lead: int = 1):
    """Aligned regressors ``[1, u(n), x(n)]`` and targets ``x(n+L)``."""
    x = np.asarray(x_true, dtype=float)
    u = np.empty((x.size, 0)) if features is None else np.asarray(features, dtype=float).reshape(x.size, -1)
    if u.shape[0] != x.size:
        raise LengthMismatchError(f"{u.shape[0]} feature rows for {x.size} throughput samples")
    rows = x.size - lead
    X = np.column_stack([np.ones(max(rows, 0)), u[:rows], x[:rows]])
    return X, x[lead:]


def fit(
    x_true,
    features=None,
    lead: int = 1,
    *,
    sigma2_M: float = 0.0,
    feature_names=(),
    normalization: NormalizationParams | None = None,
    filter_window: int | None = None,
) -> RegressionModel:
    """Least-squares fit minimizing the residual sum of squares.

    ``x_true`` is the denoised (filtered) throughput; ``features`` is an
    (N, k) array of radio features aligned with it. Solved with an SVD-based
    least-squares routine, which also exposes the numerical rank.
    """
    if lead < 1:
        raise InvalidLeadError(f"lead L must be >= 1, got {lead}")
    X, y = design_matrix(x_true, features, lead)
    n_coef = X.shape[1]
    if X.shape[0] < n_coef + 1:
        raise TooFewRowsError(
            f"{X.shape[0]} usable rows after a lead of {lead}; need at least {n_coef + 1}"
        )
    names = tuple(feature_names)
    if len(names) != n_coef - 2:
        raise FeatureMismatchError(f"{len(names)} feature names for {n_coef - 2} feature columns")

    # column scaling keeps the rank test meaningful for raw dBm-valued inputs
    scale = np.sqrt((X**2).mean(axis=0))
    scale[scale == 0] = 1.0
    coef, _, rank, sv = np.linalg.lstsq(X / scale, y, rcond=None)
    if rank < n_coef or sv[-1] <= sv[0] * 1e-10:
        raise RankDeficientError(
            f"design matrix is rank deficient (rank {rank} of {n_coef}); "
            f"features {names} are collinear with each other or the bias"
        )
    coef = coef / scale
    resid = y - X @ coef
    return RegressionModel(
        coef=tuple(float(c) for c in coef),
        lead=lead,
        sigma2_P=float(np.var(resid)),
        sigma2_M=float(sigma2_M),
        feature_set=names,
        normalization=normalization,
        filter_window=filter_window,
        n_train=int(X.shape[0]),
    )


def predict(model: RegressionModel, y: FeatureVector) -> float:
    """``a . [1, u, x]`` for one feature vector."""
    if tuple(y.names) != model.feature_set:
        raise FeatureMismatchError(f"vector features {y.names} do not match model features {model.feature_set}")
    a = model.coef
    out = a[0] + a[-1] * y.x
    for ai, ui in zip(a[1:-1], y.u):
        out += ai * ui
    return float(out)


def predict_many(model: RegressionModel, x, features=None) -> np.ndarray:
    """Vectorized prediction of ``x(n+L)`` for every row ``n``."""
    x = np.asarray(x, dtype=float)
    u = np.empty((x.size, 0)) if features is None else np.asarray(features, dtype=float).reshape(x.size, -1)
    if u.shape[1] != len(model.feature_set):
        raise FeatureMismatchError(f"{u.shape[1]} feature columns for model features {model.feature_set}")
    return model.coef[0] + u @ np.asarray(model.feature_coef) + model.throughput_coef * x
