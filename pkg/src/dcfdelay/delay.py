"""Mean sojourn delay under the decoupled M/M/1 approximation.

Each node's queue is treated as an independent M/M/1 queue served at the
long-run average of C/N over busy time, N being the number of non-empty
queues. Convexity of 1/x bounds that average from below; evaluating the
bound at equality gives the service rate and, through the M/M/1 sojourn
formula, the mean delay. All functions here evaluate the bounds at equality.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .macmodel import MAX_BISECTION_ITER, ConvergenceError

DEFAULT_RATE_TOL = 1e-10


class UnstableLoadError(ValueError):
    """Offered load reaches or exceeds the capacity."""


@dataclass(frozen=True)
class TrafficSpec:
    """Per-node Poisson arrival rates in packets/s."""

    rates: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "rates", tuple(float(r) for r in self.rates))
        if not self.rates:
            raise ValueError("traffic needs at least one node")
        if any(r < 0 for r in self.rates):
            raise ValueError("arrival rates must be non-negative")

    @classmethod
    def homogeneous(cls, n: int, rate: float) -> "TrafficSpec":
        return cls((rate,) * n)

    @property
    def n(self) -> int:
        return len(self.rates)

    @property
    def is_homogeneous(self) -> bool:
        return all(r == self.rates[0] for r in self.rates)

    @property
    def total(self) -> float:
        return math.fsum(self.rates)


@dataclass(frozen=True)
class UtilizationReport:
    utilization: float
    stable: bool


@dataclass(frozen=True)
class DelayReport:
    capacity_c: float
    m_avg_bound: float
    p_empty: tuple[float, ...]
    per_node_delay_bound: tuple[float, ...]
    utilization: float


def stability_check(rates: Sequence[float], c: float) -> UtilizationReport:
    rho = math.fsum(rates) / c
    return UtilizationReport(rho, rho < 1.0)


def _require_stable(rates: Sequence[float], c: float) -> None:
    if any(not r > 0 for r in rates):
        raise ValueError("arrival rates must be > 0")
    report = stability_check(rates, c)
    if not report.stable:
        raise UnstableLoadError(f"offered load {math.fsum(rates):g} pkts/s >= capacity {c:g} (utilization {report.utilization:.4f})")


def service_rate_bound_homogeneous(n: int, lam: float, c: float) -> float:
    """Lower bound on the per-queue service rate, ``lam / (1 - (1 - n lam/c)^(1/n))``."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    _require_stable([lam] * n, c)
    if n == 1:
        return c
    return lam / -math.expm1(math.log1p(-n * lam / c) / n)


def empty_probability(lam: float, m_avg: float) -> float:
    """Steady-state probability that an M/M/1 queue is empty."""
    if not 0 < lam < m_avg:
        raise UnstableLoadError(f"need 0 < lambda < service rate, got {lam!r}, {m_avg!r}")
    return 1.0 - lam / m_avg


def mean_delay_homogeneous(n: int, lam: float, c: float) -> float:
    """Upper bound on the mean sojourn time with ``n`` nodes at rate ``lam`` each."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    _require_stable([lam] * n, c)
    if n == 1:
        return 1.0 / (c - lam)
    # (1 - n lam/c)^(-1/n) - 1, kept accurate as lam -> 0
    return math.expm1(-math.log1p(-n * lam / c) / n) / lam


def _empty_system_residual(m_avg: float, rates: Sequence[float], lhs: float) -> float:
    prod = 1.0
    for r in rates:
        prod *= 1.0 - r / m_avg
    return prod - lhs


def solve_service_rate_nonhomogeneous(
    rates: Sequence[float],
    c: float,
    tol: float = DEFAULT_RATE_TOL,
    max_iter: int = MAX_BISECTION_ITER,
) -> float:
    """Service rate M with ``prod(1 - rate_i/M) = 1 - sum(rates)/c``, by bisection.

    The product is increasing in M above ``max(rates)``, so the root is unique.
    Bisection runs until the bracket collapses, then the residual is checked
    against ``tol``.
    """
    rates = [float(r) for r in rates]
    _require_stable(rates, c)
    if len(rates) == 1:
        return c
    lhs = 1.0 - math.fsum(rates) / c
    lo = max(rates) * (1.0 + 1e-12)
    hi = c
    while _empty_system_residual(hi, rates, lhs) <= 0:
        hi *= 2.0
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if _empty_system_residual(mid, rates, lhs) > 0:
            hi = mid
        else:
            lo = mid
    root = 0.5 * (lo + hi)
    if abs(_empty_system_residual(root, rates, lhs)) >= tol:
        raise ConvergenceError(f"service-rate bisection residual above {tol} after {max_iter} iterations")
    return root


def mean_delay_per_node(rates: Sequence[float], c: float) -> list[float]:
    """Per-node mean sojourn bounds ``1/(M - rate_i)``."""
    m_avg = solve_service_rate_nonhomogeneous(rates, c)
    return [1.0 / (m_avg - r) for r in rates]


def analyze(traffic: TrafficSpec | Sequence[float], c: float) -> DelayReport:
    """Full delay report; uses the closed form when all rates are equal."""
    if not isinstance(traffic, TrafficSpec):
        traffic = TrafficSpec(tuple(traffic))
    rates = traffic.rates
    if traffic.is_homogeneous:
        n, lam = traffic.n, rates[0]
        m_avg = service_rate_bound_homogeneous(n, lam, c)
        delays = (mean_delay_homogeneous(n, lam, c),) * n
    else:
        m_avg = solve_service_rate_nonhomogeneous(rates, c)
        delays = tuple(1.0 / (m_avg - r) for r in rates)
    p_empty = tuple(empty_probability(r, m_avg) for r in rates)
    return DelayReport(c, m_avg, p_empty, delays, traffic.total / c)
