"""Trace-driven live-streaming simulation with MPC-Chunk style bitrate selection.

Per-session QoE::

    QoE = sum_i  w1 Q(R_i) - w2 stall_i - w3 |Q(R_i) - Q(R_prev)| - w4 phi(l_i) - w5 eta_i

with ``Q(r) = ln(r / R_min)`` and the logistic latency penalty
``phi(l) = 1/(1 + e^(omega - l)) - 1/(1 + e^omega)``.

The encoder starts at wall-clock 0 and produces content in real time:
chunk ``j`` of segment ``i`` is complete at ``i*zeta + (j+1)*chunk_len``.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache

import numpy as np

from .errors import (
    BelowMinimumError,
    ConfigError,
    EmptyHorizonError,
    NonPositiveThroughputError,
    TraceTooShortError,
)
from .predictors import Predictor

KBPS = 1e3
DEFAULT_LADDER = tuple(r * KBPS for r in (300, 500, 1000, 2000, 3000, 6000))


@dataclass(frozen=True)
class LiveConfig:
    bitrates: tuple[float, ...] = DEFAULT_LADDER
    segment_len: float = 1.0
    chunks_per_segment: int = 5
    chunk_len: float = 0.2
    n_segments: int = 150
    lookahead: int = 5
    weights: tuple[float, float, float, float, float] = (0.2, 6.0, 1.0, 0.8, 1.2)
    omega: float = 4.0
    l_max: float = 5.0
    playback_threshold: float = 2.0
    alpha: int = 3
    beta: int = 2
    rtt: float = 0.04
    mode: str = "chunk"
    join_time: float | None = None  # defaults to alpha segments after the encoder starts
    R_min: float | None = None

    def __post_init__(self):
        b = tuple(float(r) for r in self.bitrates)
        object.__setattr__(self, "bitrates", b)
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if not b or any(r <= 0 for r in b) or any(x >= y for x, y in zip(b, b[1:])):
            raise ConfigError("bitrates must be positive and strictly ascending")
        if self.R_min is None:
            object.__setattr__(self, "R_min", b[0])
        elif self.R_min != b[0]:
            raise ConfigError(f"R_min {self.R_min} must equal the lowest rung {b[0]}")
        if self.chunks_per_segment < 1 or not math.isclose(
            self.chunks_per_segment * self.chunk_len, self.segment_len, rel_tol=1e-12
        ):
            raise ConfigError("chunks_per_segment * chunk_len must equal segment_len")
        if not self.l_max > self.playback_threshold > 0:
            raise ConfigError("need l_max > playback_threshold > 0")
        if not self.alpha >= self.beta >= 1:
            raise ConfigError("need alpha >= beta >= 1")
        if len(self.weights) != 5 or any(w < 0 for w in self.weights):
            raise ConfigError("weights must be five non-negative numbers")
        if self.lookahead < 1 or self.n_segments < 1:
            raise ConfigError("lookahead and n_segments must be >= 1")
        if self.rtt < 0:
            raise ConfigError("rtt must be non-negative")
        if self.mode not in ("chunk", "segment"):
            raise ConfigError(f"mode must be 'chunk' or 'segment', got {self.mode!r}")
        if self.join_time is None:
            object.__setattr__(self, "join_time", self.alpha * self.segment_len)

    @classmethod
    def from_dict(cls, d: dict) -> LiveConfig:
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown live config keys: {sorted(unknown)}")
        d = dict(d)
        for key in ("bitrates", "weights"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> LiveConfig:
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self):
        d = asdict(self)
        d["bitrates"] = list(self.bitrates)
        d["weights"] = list(self.weights)
        return d


@dataclass(frozen=True)
class LiveSessionState:
    buffer: float = 0.0
    latency: float = 0.0
    last_quality: float | None = None
    segment_index: int = 0
    stall: float = 0.0
    dropped: int = 0
    clock: float = 0.0
    playing: bool = False
    downloaded: int = 0


@dataclass
class LiveQoeReport:
    qoe_total: float
    quality_sum: float
    stall_sum: float
    quality_fluctuation_sum: float
    latency_penalty_sum: float
    drop_sum: int
    weights: tuple
    per_segment: list[dict] = field(default_factory=list)
    chunk_events: list[dict] = field(default_factory=list)

    def recompose(self) -> float:
        w1, w2, w3, w4, w5 = self.weights
        return (w1 * self.quality_sum - w2 * self.stall_sum - w3 * self.quality_fluctuation_sum
                - w4 * self.latency_penalty_sum - w5 * self.drop_sum)

    def summary(self) -> dict:
        played = self.per_segment
        n = max(len(played), 1)
        return {
            "qoe_total": self.qoe_total,
            "quality_sum": self.quality_sum,
            "stall_sum": self.stall_sum,
            "quality_fluctuation_sum": self.quality_fluctuation_sum,
            "latency_penalty_sum": self.latency_penalty_sum,
            "drop_sum": self.drop_sum,
            "mean_bitrate": sum(s["R_i"] for s in played) / n,
            "mean_latency": sum(s["l"] for s in played) / n,
            "n_played": len(played),
        }

    def write_events(self, path, trace_id: str = ""):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            _write_segment_rows(csv.writer(fh), self.per_segment, trace_id, header=True)


SEGMENT_COLUMNS = ["i", "R_i", "C_i", "t_D", "stall", "l", "eta", "delta", "B", "playing"]


def _write_segment_rows(w, rows, trace_id, header):
    if header:
        w.writerow(["trace", *SEGMENT_COLUMNS])
    for r in rows:
        w.writerow([trace_id, *(r[c] for c in SEGMENT_COLUMNS)])


def perceptual_quality(R: float, R_min: float) -> float:
    if not R_min > 0 or R < R_min:
        raise BelowMinimumError(f"bitrate {R!r} is below the minimum {R_min!r}")
    return math.log(R / R_min)


def latency_penalty(latency, omega: float = 4.0):
    """Logistic latency penalty; zero at zero latency, saturating below one."""
    l = np.asarray(latency, dtype=float)
    out = 1.0 / (1.0 + np.exp(omega - l)) - 1.0 / (1.0 + np.exp(omega))
    return float(out) if out.ndim == 0 else out


def download_segment(state: LiveSessionState, R: float, C: float, delta: float, config: LiveConfig):
    """Fetch one whole segment: ``t_D = R*zeta/C + delta``.

    Returns ``(new_state, t_D, t_stall)``. Before playback starts the buffer
    only fills and nothing stalls.
    """
    if not C > 0:
        raise NonPositiveThroughputError(f"throughput must be positive, got {C!r}")
    zeta = config.segment_len
    t_d = R * zeta / C + delta
    if state.playing:
        stall = max(t_d - state.buffer, 0.0)
        buf = max(state.buffer - t_d, 0.0) + zeta
    else:
        stall = 0.0
        buf = state.buffer + zeta
    new = replace(
        state,
        buffer=buf,
        latency=state.latency + stall,
        stall=state.stall + stall,
        clock=state.clock + t_d,
        downloaded=state.downloaded + 1,
    )
    return new, t_d, stall


def drop_segments(state: LiveSessionState, l_max: float, segment_len: float):
    """Skip ``ceil((l - l_max)/zeta)`` upcoming segments when latency exceeds ``l_max``."""
    l = state.latency
    if l <= l_max:
        return state, 0
    eta = math.ceil((l - l_max) / segment_len)
    while l - eta * segment_len > l_max:  # float rounding guard
        eta += 1
    new = replace(
        state,
        latency=max(l - eta * segment_len, 0.0),
        segment_index=state.segment_index + eta,
        dropped=state.dropped + eta,
    )
    return new, eta


@lru_cache(maxsize=64)
def _sequences(n_rungs: int, horizon: int) -> np.ndarray:
    return np.array(list(itertools.product(range(n_rungs), repeat=horizon)), dtype=np.intp).reshape(-1, horizon)


def mpc_chunk_select(state: LiveSessionState, predicted, config: LiveConfig) -> float:
    """Exhaustive horizon search over ladder sequences.

    Each sequence is played out at segment granularity under the predicted
    throughput with ``delta = rtt`` (future idle time is unknown), applying
    stall, latency, drop and latency-penalty dynamics. Ties go to the lower rung.
    """
    C = [float(c) for c in predicted]
    if not C:
        raise EmptyHorizonError("prediction horizon is empty")
    if any(c <= 0 for c in C):
        raise NonPositiveThroughputError("predicted throughput must be positive")
    ladder = np.asarray(config.bitrates)
    quality = np.log(ladder / config.R_min)
    seqs = _sequences(ladder.size, len(C))
    rates = ladder[seqs]
    q = quality[seqs]
    w1, w2, w3, w4, w5 = config.weights
    zeta = config.segment_len
    m = seqs.shape[0]

    buf = np.full(m, float(state.buffer))
    lat = np.full(m, float(state.latency))
    score = np.zeros(m)
    q_prev = np.full(m, state.last_quality if state.last_quality is not None else np.nan)
    playing = state.playing
    downloaded = state.downloaded
    for k, c in enumerate(C):
        t_d = rates[:, k] * zeta / c + config.rtt
        if playing:
            stall = np.maximum(t_d - buf, 0.0)
            buf = np.maximum(buf - t_d, 0.0) + zeta
        else:
            stall = np.zeros(m)
            buf = buf + zeta
        lat = lat + stall
        downloaded += 1
        if not playing and downloaded >= config.beta and buf[0] >= config.playback_threshold:
            playing = True
        over = lat > config.l_max
        eta = np.where(over, np.ceil((lat - config.l_max) / zeta), 0.0)
        lat = np.where(over, np.maximum(lat - eta * zeta, 0.0), lat)
        fluct = np.where(np.isnan(q_prev), 0.0, np.abs(q[:, k] - q_prev))
        score += (w1 * q[:, k] - w2 * stall - w3 * fluct
                  - w4 * latency_penalty(lat, config.omega) - w5 * eta)
        q_prev = q[:, k]
    return float(rates[int(np.argmax(score)), 0])


def simulate_live(
    throughput,
    predictor: Predictor | None,
    config: LiveConfig = LiveConfig(),
    *,
    measured=None,
    features=None,
    schedule=None,
) -> LiveQoeReport:
    """Play one live session against a per-segment throughput trace.

    ``throughput[i]`` is the actual rate for segment ``i``. On joining at
    ``config.join_time`` the client goes back at most ``alpha`` encoded
    segments; playback starts once ``beta`` segments are in and the buffer
    reaches the playback threshold, with latency seeded at ``beta * zeta``.
    In chunk mode each chunk is fetched as soon as the encoder finishes it
    and stalls are accounted per chunk; segment mode waits for the whole
    segment. Waiting on the encoder is folded into ``delta`` together with
    one RTT per segment request.

    ``schedule`` (a bitrate per segment index) overrides the selector, which
    lets two modes be compared under identical decisions.
    """
    C = np.asarray(throughput, dtype=float)
    N = config.n_segments
    if C.size < N:
        raise TraceTooShortError(f"trace has {C.size} samples, session needs {N} segments")
    if np.any(C[:N] <= 0):
        raise NonPositiveThroughputError("actual throughput must be positive for every segment")
    if predictor is None and schedule is None:
        raise ConfigError("need a predictor or a fixed schedule")
    seen = C if measured is None else np.asarray(measured, dtype=float)
    U = np.empty((C.size, 0)) if features is None else np.asarray(features, dtype=float).reshape(C.size, -1)

    zeta = config.segment_len
    cl = config.chunk_len
    w1, w2, w3, w4, w5 = config.weights
    encoded = math.floor(config.join_time / zeta + 1e-9)
    first = max(0, encoded - config.alpha)
    state = LiveSessionState(latency=config.beta * zeta, segment_index=first, clock=config.join_time)

    rows: list[dict] = []
    events: list[dict] = []
    sums = dict(q=0.0, stall=0.0, fluct=0.0, phi=0.0, eta=0)
    observed = 0
    while state.segment_index < N:
        i = state.segment_index
        if schedule is not None:
            rate = float(schedule[i])
        elif observed == 0:
            rate = config.bitrates[0]
        else:
            horizon = min(config.lookahead, N - i)
            rate = mpc_chunk_select(state, predictor.forecast(horizon), config)

        was_playing = state.playing
        buf = state.buffer
        clock = state.clock
        idle = 0.0
        stall = 0.0
        if config.mode == "chunk":
            pieces = [(j, i * zeta + (j + 1) * cl, cl) for j in range(config.chunks_per_segment)]
        else:
            pieces = [(0, (i + 1) * zeta, zeta)]
        for j, ready, size in pieces:
            lag = config.rtt if j == 0 else 0.0
            wait = max(ready - (clock + lag), 0.0)
            start = clock + lag + wait
            transfer = rate * size / C[i]
            d = lag + wait + transfer
            if was_playing:
                s = max(d - buf, 0.0)
                buf = max(buf - d, 0.0) + size
            else:
                s = 0.0
                buf += size
            events.append({"i": i, "chunk": j, "available": ready, "start": start, "finish": start + transfer})
            clock = start + transfer
            idle += wait
            stall += s
        t_d = clock - state.clock
        delta = t_d - rate * zeta / C[i]

        state = replace(
            state,
            buffer=buf,
            latency=state.latency + stall,
            stall=state.stall + stall,
            clock=clock,
            downloaded=state.downloaded + 1,
        )
        if not state.playing and state.downloaded >= config.beta and state.buffer >= config.playback_threshold:
            state = replace(state, playing=True)

        state, eta = drop_segments(state, config.l_max, zeta)
        q = perceptual_quality(rate, config.R_min)
        fluct = 0.0 if state.last_quality is None else abs(q - state.last_quality)
        phi = latency_penalty(state.latency, config.omega)
        sums["q"] += q
        sums["stall"] += stall
        sums["fluct"] += fluct
        sums["phi"] += phi
        sums["eta"] += eta
        rows.append({
            "i": i, "R_i": rate, "C_i": float(C[i]), "t_D": t_d, "stall": stall,
            "l": state.latency, "eta": eta, "delta": delta, "B": state.buffer,
            "playing": int(was_playing),
        })
        state = replace(state, last_quality=q, segment_index=state.segment_index + 1)
        if predictor is not None:
            predictor.observe(seen[i], tuple(U[i]))
            observed += 1

    total = (w1 * sums["q"] - w2 * sums["stall"] - w3 * sums["fluct"]
             - w4 * sums["phi"] - w5 * sums["eta"])
    return LiveQoeReport(
        qoe_total=total,
        quality_sum=sums["q"],
        stall_sum=sums["stall"],
        quality_fluctuation_sum=sums["fluct"],
        latency_penalty_sum=sums["phi"],
        drop_sum=sums["eta"],
        weights=config.weights,
        per_segment=rows,
        chunk_events=events,
    )
