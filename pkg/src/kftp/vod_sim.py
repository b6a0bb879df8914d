"""Trace-driven VoD ABR simulation with lookahead (FMPC-style) bitrate selection.

QoE over a session of ``N_v`` chunks::

    QoE = sum R_i - lam * sum |R_{i+1} - R_i| - mu * sum max(zeta R_i / C_i - B_i, 0)

Bitrates are in bps, buffer in seconds, so ``mu`` is bps per second of stall.
"""

from __future__ import annotations

import csv
import itertools
import json
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache

import numpy as np

from .errors import (
    ConfigError,
    EmptyHorizonError,
    LengthMismatchError,
    NonPositiveThroughputError,
    TraceTooShortError,
)
from .predictors import Predictor

MBPS = 1e6
DEFAULT_LADDER = tuple(r * MBPS for r in (20, 40, 60, 80, 110, 160))


@dataclass(frozen=True)
class VodConfig:
    bitrates: tuple[float, ...] = DEFAULT_LADDER
    chunk_len: float = 158 / 157
    n_chunks: int = 157
    lookahead: int = 5
    lam: float = 1.0
    mu: float = 160 * MBPS
    startup_buffer: float | None = None  # defaults to one chunk

    def __post_init__(self):
        b = tuple(float(r) for r in self.bitrates)
        object.__setattr__(self, "bitrates", b)
        if not b or any(r <= 0 for r in b) or any(x >= y for x, y in zip(b, b[1:])):
            raise ConfigError("bitrates must be positive and strictly ascending")
        if self.chunk_len <= 0:
            raise ConfigError("chunk_len must be positive")
        if self.lookahead < 1 or self.n_chunks < self.lookahead:
            raise ConfigError("need 1 <= lookahead <= n_chunks")
        if self.lam < 0 or self.mu < 0:
            raise ConfigError("lam and mu must be non-negative")
        if self.startup_buffer is None:
            object.__setattr__(self, "startup_buffer", self.chunk_len)

    @classmethod
    def from_dict(cls, d: dict) -> VodConfig:
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown VoD config keys: {sorted(unknown)}")
        d = dict(d)
        if "bitrates" in d:
            d["bitrates"] = tuple(d["bitrates"])
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> VodConfig:
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self):
        d = asdict(self)
        d["bitrates"] = list(self.bitrates)
        return d


@dataclass(frozen=True)
class VodSessionState:
    buffer: float = 0.0
    last_bitrate: float | None = None
    chunk_index: int = 0
    stall: float = 0.0


@dataclass
class QoeReport:
    qoe_total: float
    bitrate_sum: float
    fluctuation_sum: float
    stall_sum: float
    lam: float
    mu: float
    per_chunk: list[dict] = field(default_factory=list)
    startup_delay: float = 0.0

    def summary(self) -> dict:
        n = max(len(self.per_chunk), 1)
        return {
            "qoe_total": self.qoe_total,
            "bitrate_sum": self.bitrate_sum,
            "fluctuation_sum": self.fluctuation_sum,
            "stall_sum": self.stall_sum,
            "mean_bitrate": self.bitrate_sum / n,
            "startup_delay": self.startup_delay,
            "n_chunks": len(self.per_chunk),
        }

    def write_events(self, path, trace_id: str = ""):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            _write_chunk_rows(csv.writer(fh), self.per_chunk, trace_id, header=True)


def _write_chunk_rows(w, rows, trace_id, header):
    cols = ["i", "R_i", "C_i", "B_i", "t_D", "stall_i", "startup"]
    if header:
        w.writerow(["trace", *cols])
    for r in rows:
        w.writerow([trace_id, *(r[c] for c in cols)])


def qoe_vod(bitrates, throughput, buffers, config: VodConfig) -> QoeReport:
    """Score a realized session. ``buffers[i]`` is the buffer while chunk ``i`` downloads."""
    R = np.asarray(bitrates, dtype=float)
    C = np.asarray(throughput, dtype=float)
    B = np.asarray(buffers, dtype=float)
    if not (R.shape == C.shape == B.shape) or R.ndim != 1:
        raise LengthMismatchError(f"R, C, B lengths differ: {R.size}, {C.size}, {B.size}")
    if np.any(C <= 0):
        raise NonPositiveThroughputError("throughput must be positive for every chunk")
    t_d = config.chunk_len * R / C
    stall = np.maximum(t_d - B, 0.0)
    bitrate_sum = float(R.sum())
    fluct_sum = float(np.abs(np.diff(R)).sum())
    stall_sum = float(stall.sum())
    per_chunk = [
        {"i": i, "R_i": float(R[i]), "C_i": float(C[i]), "B_i": float(B[i]),
         "t_D": float(t_d[i]), "stall_i": float(stall[i]), "startup": 0}
        for i in range(R.size)
    ]
    return QoeReport(
        qoe_total=bitrate_sum - config.lam * fluct_sum - config.mu * stall_sum,
        bitrate_sum=bitrate_sum,
        fluctuation_sum=fluct_sum,
        stall_sum=stall_sum,
        lam=config.lam,
        mu=config.mu,
        per_chunk=per_chunk,
    )


@lru_cache(maxsize=64)
def _sequences(n_rungs: int, horizon: int) -> np.ndarray:
    """All rung-index sequences in lexicographic order, shape (n_rungs**horizon, horizon)."""
    return np.array(list(itertools.product(range(n_rungs), repeat=horizon)), dtype=np.intp).reshape(-1, horizon)


def fmpc_select(state: VodSessionState, predicted, config: VodConfig) -> float:
    """Exhaustive lookahead choice of the next chunk's bitrate.

    Every ladder sequence over the horizon is played out against the
    predicted throughput; the first bitrate of the best-scoring sequence is
    returned. Lexicographic enumeration plus first-argmax breaks ties toward
    the lower rung.
    """
    C = [float(c) for c in predicted]
    if not C:
        raise EmptyHorizonError("prediction horizon is empty")
    if any(c <= 0 for c in C):
        raise NonPositiveThroughputError("predicted throughput must be positive")
    ladder = np.asarray(config.bitrates)
    seqs = _sequences(ladder.size, len(C))
    rates = ladder[seqs]
    zeta = config.chunk_len

    buf = np.full(seqs.shape[0], float(state.buffer))
    stall = np.zeros(seqs.shape[0])
    for k, c in enumerate(C):
        t_d = zeta * rates[:, k] / c
        stall += np.maximum(t_d - buf, 0.0)
        buf = np.maximum(buf - t_d, 0.0) + zeta

    fluct = np.abs(np.diff(rates, axis=1)).sum(axis=1)
    if state.last_bitrate is not None:
        fluct += np.abs(rates[:, 0] - state.last_bitrate)
    score = rates.sum(axis=1) - config.lam * fluct - config.mu * stall
    return float(rates[int(np.argmax(score)), 0])


def simulate_vod(
    throughput,
    predictor: Predictor,
    config: VodConfig = VodConfig(),
    *,
    measured=None,
    features=None,
) -> QoeReport:
    """Play one session against a per-chunk throughput trace.

    ``throughput[i]`` is the actual rate while chunk ``i`` downloads;
    ``measured[i]`` (default: the same) is what the predictor observes
    afterwards, together with ``features[i]``. Chunks are fetched one at a
    time. The first chunk goes out at the lowest rung since nothing has been
    observed yet, and playback waits until ``startup_buffer`` seconds are
    buffered; those startup chunks carry no stall.
    """
    C = np.asarray(throughput, dtype=float)
    N = config.n_chunks
    if C.size < N:
        raise TraceTooShortError(f"trace has {C.size} samples, session needs {N} chunks")
    if np.any(C[:N] <= 0):
        raise NonPositiveThroughputError("actual throughput must be positive for every chunk")
    seen = C if measured is None else np.asarray(measured, dtype=float)
    U = np.empty((C.size, 0)) if features is None else np.asarray(features, dtype=float).reshape(C.size, -1)

    zeta = config.chunk_len
    state = VodSessionState()
    playing = False
    R = np.empty(N)
    B_eff = np.empty(N)
    rows = []
    startup_delay = 0.0
    for i in range(N):
        if i == 0:
            rate = config.bitrates[0]
        else:
            horizon = min(config.lookahead, N - i)
            rate = fmpc_select(state, predictor.forecast(horizon), config)
        t_d = zeta * rate / C[i]
        buf = state.buffer
        if playing:
            stall = max(t_d - buf, 0.0)
            new_buf = max(buf - t_d, 0.0) + zeta
            B_eff[i] = buf
        else:
            stall = 0.0
            new_buf = buf + zeta
            startup_delay += t_d
            B_eff[i] = np.inf
        R[i] = rate
        rows.append({"i": i, "R_i": rate, "C_i": float(C[i]), "B_i": buf, "t_D": t_d,
                     "stall_i": stall, "startup": int(not playing)})
        state = replace(state, buffer=new_buf, last_bitrate=rate, chunk_index=i + 1,
                        stall=state.stall + stall)
        if not playing and new_buf >= config.startup_buffer:
            playing = True
        predictor.observe(seen[i], tuple(U[i]))

    report = qoe_vod(R, C[:N], B_eff, config)
    report.per_chunk = rows
    report.startup_delay = startup_delay
    return report
