"""Independent replications and Student-t confidence intervals."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy import stats

from .sim import QueueOverflowError, SimConfig, SimMetrics, occupancy_bound_check, run_simulation


class AllRunsUnstableError(RuntimeError):
    pass


def t_halfwidth(values: Sequence[float], confidence: float = 0.95) -> float:
    """Half-width of the two-sided Student-t interval for the mean of ``values``."""
    x = np.asarray(values, dtype=np.float64)
    if x.size < 2:
        raise ValueError("need at least two values for a confidence interval")
    if not 0 < confidence < 1:
        raise ValueError("confidence must be in (0, 1)")
    sd = float(np.std(x, ddof=1))
    if sd == 0.0:
        return 0.0
    return float(stats.t.ppf(0.5 + confidence / 2, x.size - 1)) * sd / math.sqrt(x.size)


@dataclass(frozen=True)
class ReplicationResult:
    mean_delay: float
    ci_halfwidth: float
    run_means: tuple[float, ...]
    node_means: np.ndarray  # shape (runs, n)
    throughputs: tuple[float, ...]
    jensen_holds: tuple[bool, ...]
    confidence: float
    metrics: tuple[SimMetrics, ...] = ()

    @property
    def runs(self) -> int:
        return len(self.run_means)

    @property
    def mean_throughput(self) -> float:
        return float(np.mean(self.throughputs))

    def node_summary(self) -> list[tuple[float, float]]:
        """Per node: (mean over runs of the node's mean sojourn, t half-width)."""
        out = []
        for col in self.node_means.T:
            col = col[~np.isnan(col)]
            if col.size >= 2:
                out.append((float(col.mean()), t_halfwidth(col, self.confidence)))
            else:
                out.append((float(col.mean()) if col.size else math.nan, math.nan))
        return out


def run_replications(
    configs: Sequence[SimConfig], jobs: int = 1, backend: str | None = None
) -> list[SimMetrics | Exception]:
    """Run configs (possibly in threads) keeping input order; overflow errors are returned, not raised."""

    def one(cfg: SimConfig):
        try:
            return run_simulation(cfg, backend=backend)
        except QueueOverflowError as exc:
            return exc

    if jobs <= 1:
        return [one(c) for c in configs]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(one, configs))


def summarize(
    results: Sequence[SimMetrics | Exception],
    confidence: float = 0.95,
    capacity: float | None = None,
    keep_metrics: bool = False,
) -> ReplicationResult:
    errors = [r for r in results if isinstance(r, Exception)]
    if errors:
        if len(errors) == len(results):
            raise AllRunsUnstableError(f"all {len(results)} runs overflowed: {errors[0]}")
        raise errors[0]
    metrics: list[SimMetrics] = list(results)  # type: ignore[arg-type]
    run_means = [m.mean_delay for m in metrics]
    finite = [x for x in run_means if not math.isnan(x)]
    mean = float(np.mean(finite)) if finite else math.nan
    half = t_halfwidth(finite, confidence) if len(finite) >= 2 else math.nan
    jensen = []
    if capacity is not None:
        for m in metrics:
            if m.busy_fraction > 0:
                jensen.append(occupancy_bound_check(m, capacity).holds)
    return ReplicationResult(
        mean_delay=mean,
        ci_halfwidth=half,
        run_means=tuple(run_means),
        node_means=np.array([m.node_mean_delays() for m in metrics]),
        throughputs=tuple(m.sim_throughput for m in metrics),
        jensen_holds=tuple(jensen),
        confidence=confidence,
        metrics=tuple(metrics) if keep_metrics else (),
    )


def replicate_configs(base: SimConfig, runs: int) -> list[SimConfig]:
    return [replace(base, replicate=k) for k in range(runs)]


def replicate(
    base: SimConfig,
    runs: int = 30,
    confidence: float = 0.95,
    *,
    jobs: int = 1,
    capacity: float | None = None,
    keep_metrics: bool = False,
    backend: str | None = None,
) -> ReplicationResult:
    """Run ``runs`` replications of ``base`` with seeds ``(base.seed, k)``.

    The reported delay is the mean of per-run mean sojourn times, with a
    Student-t half-width on ``runs - 1`` degrees of freedom.
    """
    if runs < 2:
        raise ValueError("replicate needs runs >= 2")
    results = run_replications(replicate_configs(base, runs), jobs=jobs, backend=backend)
    return summarize(results, confidence, capacity, keep_metrics)
