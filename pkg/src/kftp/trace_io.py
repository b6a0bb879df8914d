"""Loading, normalizing and splitting throughput traces."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from datetime import datetime
from pathlib import Path

import numpy as np

from .errors import (
    ConfigError,
    DataError,
    DegenerateRangeError,
    EmptyTraceError,
    MissingColumnError,
    NonUniformSamplingError,
    TraceTooShortError,
)

FEATURES = ("rsrp", "sinr", "rsrq", "speed")
UNIT_SCALE = {"bps": 1.0, "kbps": 1e3, "mbps": 1e6, "gbps": 1e9}
SAMPLING_TOLERANCE = 0.01


@dataclass(frozen=True, slots=True)
class TraceSample:
    timestamp: float
    throughput: float
    rsrp: float | None = None
    sinr: float | None = None
    rsrq: float | None = None
    speed: float | None = None


@dataclass(frozen=True)
class ThroughputTrace:
    """A uniformly sampled throughput series with optional radio features.

    ``normalized`` traces may hold values outside [0, 1] (and below zero)
    when the scaling was fitted on a different trace, so the non-negativity
    check only applies to raw traces.
    """

    samples: tuple[TraceSample, ...]
    sample_period: float
    source_id: str = ""
    normalized: bool = False

    def __post_init__(self):
        if not self.samples:
            raise EmptyTraceError(f"trace {self.source_id!r} has no samples")
        if not self.sample_period > 0:
            raise NonUniformSamplingError("sample_period must be positive")
        t = np.array([s.timestamp for s in self.samples], dtype=float)
        gaps = np.diff(t)
        bad = np.flatnonzero(np.abs(gaps - self.sample_period) > SAMPLING_TOLERANCE * self.sample_period)
        if bad.size:
            i = int(bad[0])
            raise NonUniformSamplingError(
                f"gap {gaps[i]:g}s between samples {i} and {i + 1} "
                f"differs from sample period {self.sample_period:g}s"
            )
        thr = np.array([s.throughput for s in self.samples], dtype=float)
        if not np.all(np.isfinite(thr)):
            raise DataError("throughput values must be finite")
        if not self.normalized and np.any(thr < 0):
            raise DataError("raw throughput values must be >= 0")

    def __len__(self):
        return len(self.samples)

    @property
    def timestamps(self) -> np.ndarray:
        return np.array([s.timestamp for s in self.samples], dtype=float)

    @property
    def throughput(self) -> np.ndarray:
        return np.array([s.throughput for s in self.samples], dtype=float)

    def column(self, name: str) -> np.ndarray:
        """Feature column as floats; absent entries become NaN."""
        if name == "throughput":
            return self.throughput
        if name not in FEATURES:
            raise MissingColumnError(f"unknown feature {name!r}")
        return np.array(
            [np.nan if getattr(s, name) is None else getattr(s, name) for s in self.samples],
            dtype=float,
        )

    @property
    def available_features(self) -> tuple[str, ...]:
        """Features present on every sample, in canonical order."""
        return tuple(
            name for name in FEATURES if all(getattr(s, name) is not None for s in self.samples)
        )

    def features(self, names) -> np.ndarray:
        """Stack the named feature columns into an (N, k) array."""
        if not names:
            return np.empty((len(self), 0))
        missing = [n for n in names if n not in self.available_features]
        if missing:
            raise MissingColumnError(f"features not available on every sample: {missing}")
        return np.column_stack([self.column(n) for n in names])

    @classmethod
    def from_arrays(
        cls,
        throughput,
        sample_period: float = 1.0,
        *,
        start: float = 0.0,
        source_id: str = "",
        normalized: bool = False,
        **features,
    ) -> ThroughputTrace:
        thr = np.asarray(throughput, dtype=float)
        cols = {k: np.asarray(v, dtype=float) for k, v in features.items() if v is not None}
        for k, v in cols.items():
            if k not in FEATURES:
                raise MissingColumnError(f"unknown feature {k!r}")
            if v.shape != thr.shape:
                raise DataError(f"feature {k!r} length {v.size} != throughput length {thr.size}")
        samples = tuple(
            TraceSample(
                timestamp=start + i * sample_period,
                throughput=float(thr[i]),
                **{k: (None if np.isnan(v[i]) else float(v[i])) for k, v in cols.items()},
            )
            for i in range(thr.size)
        )
        return cls(samples, sample_period, source_id, normalized)


@dataclass(frozen=True)
class ColumnMapping:
    """Maps a dataset's CSV headers onto canonical trace fields.

    Loaded from a JSON sidecar such as::

        {"timestamp": "time_s", "throughput": "DL_bitrate",
         "throughput_unit": "Mbps", "rsrp": "RSRP", "sinr": "SNR"}
    """

    timestamp: str
    throughput: str
    throughput_unit: str = "bps"
    rsrp: str | None = None
    sinr: str | None = None
    rsrq: str | None = None
    speed: str | None = None
    timestamp_format: str | None = None
    sample_period: float | None = None
    missing_values: tuple[str, ...] = ("", "NA", "N/A", "nan", "NaN", "-")

    def __post_init__(self):
        if self.throughput_unit.lower() not in UNIT_SCALE:
            raise ConfigError(
                f"throughput_unit must be one of {sorted(UNIT_SCALE)}, got {self.throughput_unit!r}"
            )

    @property
    def unit_scale(self) -> float:
        return UNIT_SCALE[self.throughput_unit.lower()]

    def feature_columns(self) -> dict[str, str]:
        return {name: getattr(self, name) for name in FEATURES if getattr(self, name)}

    @classmethod
    def from_dict(cls, d: dict) -> ColumnMapping:
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown schema keys: {sorted(unknown)}")
        for key in ("timestamp", "throughput"):
            if not d.get(key):
                raise ConfigError(f"schema must map the required column {key!r}")
        d = dict(d)
        if "missing_values" in d:
            d["missing_values"] = tuple(d["missing_values"])
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> ColumnMapping:
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["missing_values"] = list(self.missing_values)
        return {k: v for k, v in d.items() if v is not None}


def _parse_time(raw: str, fmt: str | None) -> float:
    if fmt:
        return datetime.strptime(raw, fmt).timestamp()
    return float(raw)


def load_trace(path, schema: ColumnMapping, source_id: str | None = None) -> ThroughputTrace:
    """Read a comma-delimited UTF-8 trace with a header row.

    Rows whose timestamp or throughput cannot be parsed are rejected; the
    error lists their 1-based line numbers (header is line 1).
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        wanted = {"timestamp": schema.timestamp, "throughput": schema.throughput}
        wanted.update(schema.feature_columns())
        missing = [f"{k} -> {v!r}" for k, v in wanted.items() if v not in header]
        if missing:
            raise MissingColumnError(f"{path}: missing column(s) {', '.join(missing)}")
        rows = list(reader)

    if not rows:
        raise EmptyTraceError(f"{path}: no data rows")

    na = set(schema.missing_values)
    scale = schema.unit_scale
    bad_rows = []
    samples = []
    for lineno, row in enumerate(rows, start=2):
        try:
            t = _parse_time(row[schema.timestamp].strip(), schema.timestamp_format)
            thr = float(row[schema.throughput]) * scale
            if not math.isfinite(t) or not math.isfinite(thr) or thr < 0:
                raise ValueError
        except (ValueError, TypeError, AttributeError):
            bad_rows.append(lineno)
            continue
        feats = {}
        for name, col in schema.feature_columns().items():
            raw = (row[col] or "").strip()
            if raw in na:
                feats[name] = None
                continue
            try:
                value = float(raw)
            except ValueError:
                value = math.nan
            feats[name] = value if math.isfinite(value) else None
        samples.append(TraceSample(t, thr, **feats))

    if bad_rows:
        shown = ", ".join(map(str, bad_rows[:20]))
        more = f" (+{len(bad_rows) - 20} more)" if len(bad_rows) > 20 else ""
        raise DataError(f"{path}: unparseable timestamp/throughput on line(s) {shown}{more}")
    if len(samples) < 2:
        raise TraceTooShortError(f"{path}: need at least 2 samples to infer the sampling period")

    period = schema.sample_period or (samples[1].timestamp - samples[0].timestamp)
    if not period > 0:
        raise NonUniformSamplingError(f"{path}: timestamps must be strictly increasing")
    return ThroughputTrace(tuple(samples), period, source_id or path.stem)


def write_trace(trace: ThroughputTrace, path, unit: str = "bps") -> ColumnMapping:
    """Write a trace as CSV with canonical headers and return a matching schema."""
    scale = UNIT_SCALE[unit.lower()]
    feats = trace.available_features
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["timestamp", "throughput", *feats])
        for s in trace.samples:
            w.writerow([repr(s.timestamp), repr(s.throughput / scale), *(repr(getattr(s, f)) for f in feats)])
    return ColumnMapping(
        timestamp="timestamp", throughput="throughput", throughput_unit=unit, **{f: f for f in feats}
    )


@dataclass(frozen=True)
class NormalizationParams:
    min: float
    max: float
    feature_ranges: dict[str, tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self):
        if not self.max > self.min:
            raise DegenerateRangeError(f"throughput range is degenerate: min={self.min!r} max={self.max!r}")
        for name, (lo, hi) in self.feature_ranges.items():
            if not hi > lo:
                raise DegenerateRangeError(f"feature {name!r} range is degenerate: min={lo!r} max={hi!r}")

    def scale(self, values, name: str = "throughput"):
        lo, hi = self._range(name)
        return (np.asarray(values, dtype=float) - lo) / (hi - lo)

    def unscale(self, values, name: str = "throughput"):
        lo, hi = self._range(name)
        return np.asarray(values, dtype=float) * (hi - lo) + lo

    def _range(self, name):
        if name == "throughput":
            return self.min, self.max
        try:
            return self.feature_ranges[name]
        except KeyError:
            raise MissingColumnError(f"no normalization range for feature {name!r}") from None

    @classmethod
    def fit(cls, trace: ThroughputTrace) -> NormalizationParams:
        thr = trace.throughput
        ranges = {}
        for name in trace.available_features:
            col = trace.column(name)
            ranges[name] = (float(col.min()), float(col.max()))
        return cls(float(thr.min()), float(thr.max()), ranges)

    def to_dict(self) -> dict:
        return {
            "min": self.min,
            "max": self.max,
            "feature_ranges": {k: list(v) for k, v in self.feature_ranges.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> NormalizationParams:
        return cls(
            float(d["min"]),
            float(d["max"]),
            {k: (float(v[0]), float(v[1])) for k, v in d.get("feature_ranges", {}).items()},
        )


def normalize(
    trace: ThroughputTrace, params: NormalizationParams | None = None
) -> tuple[ThroughputTrace, NormalizationParams]:
    """Min-max scale throughput and every feature with a known range.

    With ``params=None`` the ranges are fitted on ``trace`` itself.
    """
    if params is None:
        params = NormalizationParams.fit(trace)
    thr = params.scale(trace.throughput)
    feats = {name: params.scale(trace.column(name), name) for name in trace.available_features
             if name in params.feature_ranges}
    samples = tuple(
        replace(s, throughput=float(thr[i]), **{k: float(v[i]) for k, v in feats.items()})
        for i, s in enumerate(trace.samples)
    )
    return ThroughputTrace(samples, trace.sample_period, trace.source_id, normalized=True), params


def denormalize(values, params: NormalizationParams, name: str = "throughput") -> np.ndarray:
    return params.unscale(values, name)


def split_train_test(trace: ThroughputTrace, train_fraction: float = 0.8):
    """Chronological split: the first floor(N * fraction) samples train."""
    if not 0 < train_fraction < 1:
        raise ConfigError(f"train_fraction must lie in (0, 1), got {train_fraction!r}")
    n = len(trace)
    # guard against 0.8 * 35 == 27.999... style truncation
    n_train = math.floor(n * train_fraction + 1e-9)
    if n_train < 1 or n_train >= n:
        raise TraceTooShortError(
            f"cannot split {n} sample(s) at fraction {train_fraction}: one side would be empty"
        )
    return (
        replace(trace, samples=trace.samples[:n_train]),
        replace(trace, samples=trace.samples[n_train:]),
    )
