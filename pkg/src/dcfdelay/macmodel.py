"""Saturation analysis of 802.11 DCF basic access.

The per-node attempt probability comes from intersecting the backoff-chain
curve (attempt probability as a function of the conditional collision
probability) with the contention curve ``p = 1 - (1 - beta)^(n-1)``.
Slot outcome probabilities and durations then give the saturation
throughput by renewal-reward over generic contention slots.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .params import InvalidParameterError, MacPhyParams

DEFAULT_FIXED_POINT_TOL = 1e-12
MAX_BISECTION_ITER = 200


class ConvergenceError(RuntimeError):
    """A bisection did not meet its residual within the iteration cap."""


@dataclass(frozen=True)
class SlotModel:
    n: int
    beta: float
    p_coll: float
    p_s: float
    p_i: float
    p_c: float
    t_idle: float
    t_success: float
    t_collision: float

    @property
    def throughput(self) -> float:
        mean_slot = self.p_i * self.t_idle + self.p_s * self.t_success + self.p_c * self.t_collision
        return self.p_s / mean_slot


def slot_durations(params: MacPhyParams) -> tuple[float, float, float]:
    """Return ``(t_idle, t_success, t_collision)`` in seconds for basic access.

    A success covers DATA + SIFS + ACK + DIFS with one propagation delay per
    frame; a collision covers DATA + DIFS with no ACK wait.
    """
    data = params.phy_header_time + (params.mac_header_bytes + params.payload_bytes) * 8 / params.data_rate
    ack = params.phy_header_time + params.ack_bytes * 8 / params.data_rate
    t_success = data + params.sifs + ack + params.difs + 2 * params.prop_delay
    t_collision = data + params.difs + params.prop_delay
    return params.slot_time, t_success, t_collision


def _check_probability(p: float) -> None:
    if not 0.0 <= p <= 1.0:
        raise InvalidParameterError(f"probability out of [0, 1]: {p!r}")


def beta_backoff(p: float, w_min: int, m_stages: int) -> float:
    """Attempt probability of a saturated node whose attempts collide w.p. ``p``.

    Evaluates ``2(1-2p) / ((W+1)(1-2p) + pW(1-(2p)^m))`` after cancelling the
    common ``(1-2p)`` factor, which leaves a finite polynomial denominator and
    removes the removable singularity at ``p = 1/2``.
    """
    _check_probability(p)
    two_p = 2.0 * p
    geometric = 0.0
    term = 1.0
    for _ in range(m_stages):
        geometric += term
        term *= two_p
    return 2.0 / ((w_min + 1) + p * w_min * geometric)


def beta_collision(p: float, n: int) -> float:
    """Attempt probability implied by collision probability ``p`` among ``n`` nodes."""
    if n < 2:
        raise InvalidParameterError(f"contention curve needs n >= 2, got {n}")
    _check_probability(p)
    if p == 1.0:
        return 1.0
    return -math.expm1(math.log1p(-p) / (n - 1))


def solve_attempt_probability(
    n: int,
    params: MacPhyParams,
    tol: float = DEFAULT_FIXED_POINT_TOL,
    max_iter: int = MAX_BISECTION_ITER,
) -> tuple[float, float]:
    """Solve the saturation fixed point, returning ``(beta, p_coll)``.

    For ``n == 1`` there is nobody to collide with and the answer is
    ``(2/(W+1), 0)``.
    """
    if n < 1:
        raise InvalidParameterError(f"n must be >= 1, got {n}")
    if not tol > 0:
        raise InvalidParameterError("tol must be > 0")
    w, m = params.w_min, params.m_stages
    if n == 1:
        return beta_backoff(0.0, w, m), 0.0

    def residual(p: float) -> float:
        return beta_backoff(p, w, m) - beta_collision(p, n)

    lo, hi = 0.0, 1.0
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        r = residual(mid)
        if abs(r) < tol:
            return beta_backoff(mid, w, m), mid
        # residual is positive left of the root
        if r > 0:
            lo = mid
        else:
            hi = mid
    raise ConvergenceError(f"fixed point for n={n} not within tol={tol} after {max_iter} bisections")


def slot_probabilities(beta: float, n: int) -> tuple[float, float, float]:
    """Return ``(p_s, p_i, p_c)`` for ``n`` nodes each attempting w.p. ``beta``."""
    _check_probability(beta)
    if n < 1:
        raise InvalidParameterError(f"n must be >= 1, got {n}")
    p_i = (1.0 - beta) ** n
    p_s = n * beta * (1.0 - beta) ** (n - 1)
    p_c = max(0.0, 1.0 - p_s - p_i)
    return p_s, p_i, p_c


def slot_model(n: int, params: MacPhyParams, tol: float = DEFAULT_FIXED_POINT_TOL) -> SlotModel:
    beta, p_coll = solve_attempt_probability(n, params, tol)
    p_s, p_i, p_c = slot_probabilities(beta, n)
    t_idle, t_success, t_collision = slot_durations(params)
    return SlotModel(n, beta, p_coll, p_s, p_i, p_c, t_idle, t_success, t_collision)


def saturation_throughput(n: int, params: MacPhyParams) -> float:
    """Saturation throughput S(n) in packets/s."""
    return slot_model(n, params).throughput


def saturation_capacity(params: MacPhyParams, n_ref: int = 10) -> float:
    """Plateau capacity C, taken as S(n_ref); this is the C used for delay analysis."""
    if n_ref < 2:
        raise InvalidParameterError(f"n_ref must be >= 2, got {n_ref}")
    return saturation_throughput(n_ref, params)
