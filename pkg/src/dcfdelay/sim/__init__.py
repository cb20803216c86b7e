"""Slot-synchronous discrete-event simulator of n DCF nodes sending to a root.

The event loop lives in a compiled extension (``_ckernel``) with a pure-Python
twin (``_pykernel``) picked at import time when the extension is unavailable,
or on demand with ``DCFDELAY_BACKEND=python``. Both produce identical output
for identical configurations.

Randomness: every node owns two numpy PCG64 streams, one for inter-arrival
gaps and one for backoff draws, seeded by
``SeedSequence(seed, spawn_key=(replicate, node, stream))``.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from ..delay import TrafficSpec
from ..macmodel import slot_durations
from ..params import MacPhyParams
from . import _pykernel
from ._pykernel import QueueOverflowError

try:
    from . import _ckernel
except ImportError:  # pragma: no cover - depends on the build
    _ckernel = None

__all__ = [
    "BACKEND",
    "GENERATOR_NAME",
    "DegenerateTraceError",
    "InvalidConfigError",
    "QueueOverflowError",
    "SimConfig",
    "SimMetrics",
    "available_backends",
    "default_warmup",
    "jensen_from_trace",
    "occupancy_bound_check",
    "poisson_arrival_stream",
    "read_trace",
    "run_simulation",
]

GENERATOR_NAME = "numpy PCG64 per node and stream, SeedSequence(seed, spawn_key=(replicate, node, stream))"
DEFAULT_QUEUE_CAP = 1_000_000
_ARRIVAL_STREAM, _BACKOFF_STREAM = 0, 1


def available_backends() -> list[str]:
    return (["cython"] if _ckernel is not None else []) + ["python"]


def _pick_backend() -> str:
    wanted = os.environ.get("DCFDELAY_BACKEND", "").strip().lower()
    if wanted == "python" or _ckernel is None:
        return "python"
    return "cython"


BACKEND = _pick_backend()


class InvalidConfigError(ValueError):
    pass


class DegenerateTraceError(ValueError):
    """The trace has no busy time, so busy-time averages are undefined."""


def default_warmup(measure_time: float, params: MacPhyParams) -> float:
    """10% of the measured span or 50,000 idle slots, whichever is longer."""
    return max(0.1 * measure_time, 50_000 * params.slot_time)


@dataclass(frozen=True)
class SimConfig:
    traffic: TrafficSpec
    mac_phy: MacPhyParams = field(default_factory=MacPhyParams)
    measure_time: float = 2000.0
    warmup_time: float | None = None
    seed: int = 0
    replicate: int = 0
    saturated: bool = False
    immediate_access: bool = True
    queue_cap: int = DEFAULT_QUEUE_CAP

    def __post_init__(self):
        if not isinstance(self.traffic, TrafficSpec):
            object.__setattr__(self, "traffic", TrafficSpec(tuple(self.traffic)))
        if not self.measure_time > 0:
            raise InvalidConfigError("measure_time must be > 0")
        if self.warmup_time is not None and self.warmup_time < 0:
            raise InvalidConfigError("warmup_time must be >= 0")
        if self.seed < 0 or self.replicate < 0:
            raise InvalidConfigError("seed and replicate must be non-negative")
        if self.queue_cap < 1:
            raise InvalidConfigError("queue_cap must be >= 1")

    @classmethod
    def homogeneous(cls, n: int, rate: float, **kwargs) -> "SimConfig":
        return cls(TrafficSpec.homogeneous(n, rate), **kwargs)

    @property
    def n_nodes(self) -> int:
        return self.traffic.n

    @property
    def warmup(self) -> float:
        if self.warmup_time is None:
            return default_warmup(self.measure_time, self.mac_phy)
        return self.warmup_time


@dataclass(frozen=True, eq=False)
class SimMetrics:
    """Measurements from one run, restricted to ``[warmup, warmup + measure_time]``.

    ``occupancy`` is the time-weighted distribution of the number of
    non-empty queues; ``delays`` holds per-packet sojourn times for packets
    that arrived after warmup, in departure order, with ``delay_nodes``
    giving the owning node of each.
    """

    config: SimConfig
    delays: np.ndarray
    delay_nodes: np.ndarray
    generated: np.ndarray
    delivered_per_node: np.ndarray
    residual: np.ndarray
    node_successes: np.ndarray
    occupancy_time: np.ndarray
    idle_slots: int
    successes: int
    collisions: int
    window_successes: int
    empty_time: float
    final_time: float
    backend: str

    @property
    def delivered(self) -> int:
        return int(self.delivered_per_node.sum())

    @property
    def mean_delay(self) -> float:
        return float(self.delays.mean()) if self.delays.size else math.nan

    def node_mean_delays(self) -> np.ndarray:
        sums = np.bincount(self.delay_nodes, weights=self.delays, minlength=self.config.n_nodes)
        counts = np.bincount(self.delay_nodes, minlength=self.config.n_nodes)
        with np.errstate(invalid="ignore", divide="ignore"):
            return sums / counts

    @property
    def sim_throughput(self) -> float:
        return self.window_successes / self.config.measure_time

    @property
    def occupancy(self) -> np.ndarray:
        """pi_hat(i), i = 0..n."""
        total = self.occupancy_time.sum()
        return self.occupancy_time / total

    @property
    def busy_fraction(self) -> float:
        return float(1.0 - self.occupancy[0])

    @property
    def mean_occupancy(self) -> float:
        """Time average of N_s over the whole window."""
        return float(np.dot(np.arange(self.occupancy.size), self.occupancy))

    def empirical_m_avg(self, c: float) -> float:
        """Busy-time average of c / N_s."""
        pi = self.occupancy
        busy = pi[1:].sum()
        if busy <= 0:
            raise DegenerateTraceError("no busy time in the measurement window")
        return float(c * np.dot(pi[1:], 1.0 / np.arange(1, pi.size)) / busy)

    def elapsed_accounting(self) -> float:
        """Idle slots, successes, collisions and empty-medium time, summed."""
        t_idle, t_s, t_c = slot_durations(self.config.mac_phy)
        return self.idle_slots * t_idle + self.successes * t_s + self.collisions * t_c + self.empty_time


def _bitgens(config: SimConfig, stream: int) -> list[np.random.PCG64]:
    return [
        np.random.PCG64(np.random.SeedSequence(config.seed, spawn_key=(config.replicate, node, stream)))
        for node in range(config.n_nodes)
    ]


def run_simulation(
    config: SimConfig,
    backend: str | None = None,
    trace: Callable[[float, str, int, int], None] | None = None,
) -> SimMetrics:
    """Simulate one replication of ``config``.

    ``trace`` receives one call per idle slot, success and collision and is
    only supported by the Python backend, which is selected automatically
    when a trace is requested.
    """
    if trace is not None:
        backend = "python"
    backend = backend or BACKEND
    if backend == "cython":
        if _ckernel is None:
            raise InvalidConfigError("compiled kernel is not built")
        kernel = _ckernel.simulate
    elif backend == "python":
        kernel = _pykernel.simulate
    else:
        raise InvalidConfigError(f"unknown backend {backend!r}")

    params = config.mac_phy
    t_idle, t_s, t_c = slot_durations(params)
    warmup = config.warmup
    raw = kernel(
        config.n_nodes,
        list(config.traffic.rates),
        bool(config.saturated),
        t_idle,
        t_s,
        t_c,
        params.w_min,
        params.m_stages,
        warmup,
        warmup + config.measure_time,
        _bitgens(config, _ARRIVAL_STREAM),
        _bitgens(config, _BACKOFF_STREAM),
        config.queue_cap,
        bool(config.immediate_access),
        trace,
    )
    return SimMetrics(
        config=config,
        delays=raw["delays"],
        delay_nodes=raw["delay_nodes"],
        generated=raw["generated"],
        delivered_per_node=raw["delivered"],
        residual=raw["residual"],
        node_successes=raw["node_successes"],
        occupancy_time=raw["occupancy_time"],
        idle_slots=int(raw["idle_slots"]),
        successes=int(raw["successes"]),
        collisions=int(raw["collisions"]),
        window_successes=int(raw["window_successes"]),
        empty_time=float(raw["empty_time"]),
        final_time=float(raw["final_time"]),
        backend=backend,
    )


@dataclass(frozen=True)
class JensenCheck:
    lhs: float
    rhs: float
    holds: bool


# ulp-level slack so the equality case (constant N_s) is not a false failure
_JENSEN_RTOL = 1e-12


def _jensen(pi: np.ndarray, c: float) -> JensenCheck:
    pi = np.asarray(pi, dtype=np.float64)
    busy = pi[1:].sum()
    if busy <= 0:
        raise DegenerateTraceError("no busy time observed")
    counts = np.arange(1, pi.size)
    lhs = c * float(np.dot(pi[1:], 1.0 / counts)) / busy
    rhs = c * busy / float(np.dot(pi[1:], counts))
    return JensenCheck(lhs, rhs, lhs >= rhs * (1.0 - _JENSEN_RTOL))


def occupancy_bound_check(metrics: SimMetrics, c: float) -> JensenCheck:
    """Compare the busy-time mean of c/N_s with c * P(busy) / E[N_s] on a run."""
    return _jensen(metrics.occupancy, c)


def poisson_arrival_stream(rate: float, horizon: float, seed: int) -> np.ndarray:
    """Arrival times of a rate-``rate`` Poisson process on ``[0, horizon)``."""
    if not rate > 0:
        raise ValueError("rate must be > 0")
    rng = np.random.Generator(np.random.PCG64(seed))
    chunk = max(16, int(rate * horizon * 1.1) + 64)
    times: list[np.ndarray] = []
    last = 0.0
    while last < horizon:
        gaps = -np.log1p(-rng.random(chunk)) / rate
        block = last + np.cumsum(gaps)
        times.append(block)
        last = float(block[-1])
    out = np.concatenate(times)
    return out[out < horizon]


# trace file: "time_us, event, winner, n_nonempty" per line

class TraceWriter:
    """Callable trace sink writing the line-oriented slot-event format."""

    def __init__(self, stream):
        self._stream = stream

    def __call__(self, time: float, kind: str, winner: int, n_nonempty: int) -> None:
        self._stream.write(f"{time * 1e6:.3f}, {kind}, {winner}, {n_nonempty}\n")


def read_trace(path: str | Path) -> list[tuple[float, str, int, int]]:
    records = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            t, kind, winner, n_ne = (x.strip() for x in line.split(","))
            records.append((float(t) * 1e-6, kind, int(winner), int(n_ne)))
    return records


def jensen_from_trace(
    records: Sequence[tuple[float, str, int, int]] | Iterable, c: float, n_nodes: int
) -> JensenCheck:
    """Jensen check on the piecewise-constant N_s path sampled by a trace."""
    records = list(records)
    occ = np.zeros(n_nodes + 1)
    for (t0, _, _, k), (t1, _, _, _) in zip(records, records[1:]):
        occ[k] += t1 - t0
    if occ.sum() <= 0:
        raise DegenerateTraceError("trace spans no time")
    return _jensen(occ / occ.sum(), c)
