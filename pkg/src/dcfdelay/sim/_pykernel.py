"""Pure-Python DCF event loop.

Reference implementation and import-time fallback for the compiled kernel in
``_ckernel.pyx``. Both consume the same PCG64 streams in the same order and
perform the same floating-point operations, so their results are identical.
"""

from __future__ import annotations

import math
from collections import deque

import numpy as np

_INF = math.inf
_CHUNK = 1024


class QueueOverflowError(RuntimeError):
    """A node's queue grew past the configured cap; the load is unstable."""


class _Uniforms:
    """Buffered doubles in [0, 1) from one bit generator, in stream order."""

    __slots__ = ("_gen", "_buf", "_pos")

    def __init__(self, bitgen):
        self._gen = np.random.Generator(bitgen)
        self._buf: list[float] = []
        self._pos = 0

    def next(self) -> float:
        if self._pos == len(self._buf):
            self._buf = self._gen.random(_CHUNK).tolist()
            self._pos = 0
        u = self._buf[self._pos]
        self._pos += 1
        return u


def simulate(
    n,
    rates,
    saturated,
    slot,
    t_success,
    t_collision,
    w_min,
    m_stages,
    warmup,
    end,
    arrival_bitgens,
    backoff_bitgens,
    queue_cap,
    immediate_access=True,
    trace=None,
):
    """Run one replication; see ``dcfdelay.sim.run_simulation`` for semantics.

    ``counter[i]`` is the backoff of a contending node, or the remaining
    post-backoff of a node with an empty queue (0 once it has finished).

    ``trace``, if given, is called as ``trace(time, kind, winner, n_nonempty)``
    for every idle slot (``"I"``), success (``"S"``) and collision (``"C"``).
    """
    arr_u = [_Uniforms(b) for b in arrival_bitgens]
    bo_u = [_Uniforms(b) for b in backoff_bitgens]
    log1p = math.log1p

    queues = [deque() for _ in range(n)]
    counter = [0] * n
    stage = [0] * n
    contending = [False] * n
    next_arr = [_INF] * n
    generated = [0] * n
    delivered = [0] * n
    node_success = [0] * n
    occ = [0.0] * (n + 1)
    delays: list[float] = []
    delay_nodes: list[int] = []

    idle_slots = successes = collisions = window_successes = 0
    empty_time = 0.0
    occ_clock = 0.0
    n_nonempty = 0
    t = 0.0

    def integrate(to):
        nonlocal occ_clock
        lo = occ_clock if occ_clock > warmup else warmup
        hi = to if to < end else end
        if hi > lo:
            occ[n_nonempty] += hi - lo
        occ_clock = to

    def push_arrivals(i, upto):
        q = queues[i]
        a = next_arr[i]
        while a <= upto:
            q.append(a)
            if warmup <= a < end:
                generated[i] += 1
            a = a - log1p(-arr_u[i].next()) / rates[i]
            if len(q) > queue_cap:
                raise QueueOverflowError(f"queue of node {i} exceeded {queue_cap} packets at t={t:.6f}s")
        next_arr[i] = a

    def admit(upto, medium_idle):
        # empty nodes whose next arrival is <= upto join contention, in arrival order
        nonlocal n_nonempty
        joined = 0
        while True:
            j = -1
            best = _INF
            for i in range(n):
                if not contending[i] and next_arr[i] < best:
                    best = next_arr[i]
                    j = i
            if j < 0 or best > upto:
                return joined
            integrate(best)
            n_nonempty += 1
            push_arrivals(j, upto)
            contending[j] = True
            stage[j] = 0
            if not immediate_access:
                counter[j] = int(bo_u[j].next() * w_min)
            elif counter[j] == 0 and not medium_idle:
                counter[j] = int(bo_u[j].next() * w_min)
            # else: resume post-backoff, or transmit at once on an idle medium
            joined += 1

    if saturated:
        for i in range(n):
            contending[i] = True
            counter[i] = int(bo_u[i].next() * w_min)
        n_nonempty = n
        n_cont = n
    else:
        for i in range(n):
            if rates[i] > 0:
                next_arr[i] = -log1p(-arr_u[i].next()) / rates[i]
        n_cont = 0

    while True:
        if n_cont == 0:
            j = 0
            for i in range(1, n):
                if next_arr[i] < next_arr[j]:
                    j = i
            a = next_arr[j]
            if a >= end:
                break
            e = math.floor((a - t) / slot)
            for i in range(n):
                c = counter[i] - e
                counter[i] = c if c > 0 else 0
            empty_time += a - t
            t = a
            n_cont += admit(t, True)
            continue

        mu = -1
        a = _INF
        for i in range(n):
            if contending[i]:
                if mu < 0 or counter[i] < mu:
                    mu = counter[i]
            elif next_arr[i] < a:
                a = next_arr[i]
        idle_end = t + mu * slot

        if a < idle_end:
            k = math.ceil((a - t) / slot)
            t_new = t + k * slot
            if t_new > end:
                break
            if trace is not None:
                for s in range(k):
                    trace(t + s * slot, "I", -1, n_nonempty)
            for i in range(n):
                c = counter[i] - k
                counter[i] = c if (contending[i] or c > 0) else 0
            idle_slots += k
            t = t_new
            n_cont += admit(t, True)
            continue

        n_tx = 0
        winner = -1
        for i in range(n):
            if contending[i] and counter[i] == mu:
                n_tx += 1
                winner = i
        t_done = idle_end + (t_success if n_tx == 1 else t_collision)
        if t_done > end:
            break
        if trace is not None:
            for s in range(mu):
                trace(t + s * slot, "I", -1, n_nonempty)
            trace(idle_end, "S" if n_tx == 1 else "C", winner if n_tx == 1 else -1, n_nonempty)
        for i in range(n):
            c = counter[i] - mu
            counter[i] = c if (contending[i] or c > 0) else 0
        idle_slots += mu

        if n_tx == 1:
            successes += 1
            if t_done > warmup:
                window_successes += 1
                node_success[winner] += 1
            stage[winner] = 0
            if saturated:
                counter[winner] = int(bo_u[winner].next() * w_min)
            else:
                n_cont += admit(t_done, False)
                push_arrivals(winner, t_done)
                head = queues[winner].popleft()
                if head >= warmup:
                    delivered[winner] += 1
                    delays.append(t_done - head)
                    delay_nodes.append(winner)
                counter[winner] = int(bo_u[winner].next() * w_min)
                if not queues[winner]:
                    integrate(t_done)
                    n_nonempty -= 1
                    contending[winner] = False
                    n_cont -= 1
        else:
            collisions += 1
            for i in range(n):
                if contending[i] and counter[i] == 0:
                    s = stage[i] + 1 if stage[i] < m_stages else m_stages
                    stage[i] = s
                    counter[i] = int(bo_u[i].next() * (w_min << s))
            if not saturated:
                n_cont += admit(t_done, False)
        t = t_done

    if not saturated:
        admit(end, False)
        for i in range(n):
            push_arrivals(i, end)
    integrate(end)

    residual = [sum(1 for a in q if warmup <= a < end) for q in queues]
    return {
        "delays": np.asarray(delays, dtype=np.float64),
        "delay_nodes": np.asarray(delay_nodes, dtype=np.int64),
        "generated": np.asarray(generated, dtype=np.int64),
        "delivered": np.asarray(delivered, dtype=np.int64),
        "residual": np.asarray(residual, dtype=np.int64),
        "node_successes": np.asarray(node_success, dtype=np.int64),
        "occupancy_time": np.asarray(occ, dtype=np.float64),
        "idle_slots": idle_slots,
        "successes": successes,
        "collisions": collisions,
        "window_successes": window_successes,
        "empty_time": empty_time,
        "final_time": t,
    }
