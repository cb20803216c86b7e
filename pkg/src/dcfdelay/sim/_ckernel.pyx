# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
# distutils: language = c++
"""Compiled DCF event loop; mirrors ``_pykernel.simulate`` operation for operation."""

import numpy as np

from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport ceil, floor, log1p, INFINITY
from libcpp.deque cimport deque
from libcpp.vector cimport vector
from numpy.random cimport bitgen_t

from ._pykernel import QueueOverflowError

ctypedef bitgen_t* bitgen_ptr


cdef struct State:
    int n
    double warmup
    double end
    double occ_clock
    int n_nonempty
    long queue_cap
    int overflow_node
    double* occ
    double* next_arr
    double* rates
    long* counter
    int* stage
    bint* contending
    long* generated
    int w_min
    bint immediate_access
    bitgen_t** arr_rng
    bitgen_t** bo_rng


cdef inline void integrate(State* st, double to) noexcept nogil:
    cdef double lo = st.occ_clock if st.occ_clock > st.warmup else st.warmup
    cdef double hi = to if to < st.end else st.end
    if hi > lo:
        st.occ[st.n_nonempty] += hi - lo
    st.occ_clock = to


cdef inline bint push_arrivals(State* st, deque[double]* q, int i, double upto) noexcept nogil:
    cdef double a = st.next_arr[i]
    cdef bitgen_t* rng = st.arr_rng[i]
    while a <= upto:
        q.push_back(a)
        if a >= st.warmup and a < st.end:
            st.generated[i] += 1
        a = a - log1p(-rng.next_double(rng.state)) / st.rates[i]
        if <long>q.size() > st.queue_cap:
            st.overflow_node = i
            st.next_arr[i] = a
            return False
    st.next_arr[i] = a
    return True


cdef int admit(State* st, vector[deque[double]]* queues, double upto, bint medium_idle) noexcept nogil:
    """Returns the number of nodes that joined, or -1 on queue overflow."""
    cdef int joined = 0
    cdef int i, j
    cdef double best
    cdef bitgen_t* rng
    while True:
        j = -1
        best = INFINITY
        for i in range(st.n):
            if not st.contending[i] and st.next_arr[i] < best:
                best = st.next_arr[i]
                j = i
        if j < 0 or best > upto:
            return joined
        integrate(st, best)
        st.n_nonempty += 1
        if not push_arrivals(st, &queues[0][j], j, upto):
            return -1
        st.contending[j] = True
        st.stage[j] = 0
        rng = st.bo_rng[j]
        if not st.immediate_access:
            st.counter[j] = <long>(rng.next_double(rng.state) * st.w_min)
        elif st.counter[j] == 0 and not medium_idle:
            st.counter[j] = <long>(rng.next_double(rng.state) * st.w_min)
        joined += 1


cdef bitgen_t* _bitgen_ptr(object bitgen) except NULL:
    return <bitgen_t*>PyCapsule_GetPointer(bitgen.capsule, "BitGenerator")


def simulate(
    int n,
    rates,
    bint saturated,
    double slot,
    double t_success,
    double t_collision,
    int w_min,
    int m_stages,
    double warmup,
    double end,
    arrival_bitgens,
    backoff_bitgens,
    long queue_cap,
    bint immediate_access=True,
    trace=None,
):
    if trace is not None:
        raise ValueError("the compiled kernel does not emit traces; use the Python backend")

    keep = list(arrival_bitgens) + list(backoff_bitgens)
    cdef vector[bitgen_ptr] arr_rng = vector[bitgen_ptr](n)
    cdef vector[bitgen_ptr] bo_rng = vector[bitgen_ptr](n)
    cdef int i
    for i in range(n):
        arr_rng[i] = _bitgen_ptr(arrival_bitgens[i])
        bo_rng[i] = _bitgen_ptr(backoff_bitgens[i])

    cdef vector[double] rate_v = vector[double](n)
    for i in range(n):
        rate_v[i] = rates[i]

    cdef vector[deque[double]] queues = vector[deque[double]](n)
    cdef vector[long] counter = vector[long](n, 0)
    cdef vector[int] stage = vector[int](n, 0)
    cdef vector[int] contending_i = vector[int](n, 0)
    cdef bint* contending = <bint*>contending_i.data()
    cdef vector[double] next_arr = vector[double](n, INFINITY)
    cdef vector[long] generated = vector[long](n, 0)
    cdef vector[long] delivered = vector[long](n, 0)
    cdef vector[long] node_success = vector[long](n, 0)
    cdef vector[double] occ = vector[double](n + 1, 0.0)
    cdef vector[double] delays
    cdef vector[long] delay_nodes

    cdef State st
    st.n = n
    st.warmup = warmup
    st.end = end
    st.occ_clock = 0.0
    st.n_nonempty = 0
    st.queue_cap = queue_cap
    st.overflow_node = -1
    st.occ = occ.data()
    st.next_arr = next_arr.data()
    st.rates = rate_v.data()
    st.counter = counter.data()
    st.stage = stage.data()
    st.contending = contending
    st.generated = generated.data()
    st.w_min = w_min
    st.immediate_access = immediate_access
    st.arr_rng = arr_rng.data()
    st.bo_rng = bo_rng.data()

    cdef long idle_slots = 0, successes = 0, collisions = 0, window_successes = 0
    cdef double empty_time = 0.0
    cdef double t = 0.0
    cdef int n_cont = 0
    cdef int j, joined, n_tx, winner, s
    cdef long mu, k, e, c
    cdef double a, idle_end, t_new, t_done, head
    cdef bitgen_t* rng

    with nogil:
        if saturated:
            for i in range(n):
                contending[i] = True
                rng = bo_rng[i]
                counter[i] = <long>(rng.next_double(rng.state) * w_min)
            st.n_nonempty = n
            n_cont = n
        else:
            for i in range(n):
                if rate_v[i] > 0:
                    rng = arr_rng[i]
                    next_arr[i] = -log1p(-rng.next_double(rng.state)) / rate_v[i]

        while True:
            if n_cont == 0:
                j = 0
                for i in range(1, n):
                    if next_arr[i] < next_arr[j]:
                        j = i
                a = next_arr[j]
                if a >= end:
                    break
                e = <long>floor((a - t) / slot)
                for i in range(n):
                    c = counter[i] - e
                    counter[i] = c if c > 0 else 0
                empty_time += a - t
                t = a
                joined = admit(&st, &queues, t, True)
                if joined < 0:
                    break
                n_cont += joined
                continue

            mu = -1
            a = INFINITY
            for i in range(n):
                if contending[i]:
                    if mu < 0 or counter[i] < mu:
                        mu = counter[i]
                elif next_arr[i] < a:
                    a = next_arr[i]
            idle_end = t + mu * slot

            if a < idle_end:
                k = <long>ceil((a - t) / slot)
                t_new = t + k * slot
                if t_new > end:
                    break
                for i in range(n):
                    c = counter[i] - k
                    counter[i] = c if (contending[i] or c > 0) else 0
                idle_slots += k
                t = t_new
                joined = admit(&st, &queues, t, True)
                if joined < 0:
                    break
                n_cont += joined
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
                rng = bo_rng[winner]
                if saturated:
                    counter[winner] = <long>(rng.next_double(rng.state) * w_min)
                else:
                    joined = admit(&st, &queues, t_done, False)
                    if joined < 0:
                        break
                    n_cont += joined
                    if not push_arrivals(&st, &queues[winner], winner, t_done):
                        break
                    head = queues[winner].front()
                    queues[winner].pop_front()
                    if head >= warmup:
                        delivered[winner] += 1
                        delays.push_back(t_done - head)
                        delay_nodes.push_back(winner)
                    counter[winner] = <long>(rng.next_double(rng.state) * w_min)
                    if queues[winner].size() == 0:
                        integrate(&st, t_done)
                        st.n_nonempty -= 1
                        contending[winner] = False
                        n_cont -= 1
            else:
                collisions += 1
                for i in range(n):
                    if contending[i] and counter[i] == 0:
                        s = stage[i] + 1 if stage[i] < m_stages else m_stages
                        stage[i] = s
                        rng = bo_rng[i]
                        counter[i] = <long>(rng.next_double(rng.state) * (w_min << s))
                if not saturated:
                    joined = admit(&st, &queues, t_done, False)
                    if joined < 0:
                        break
                    n_cont += joined
            t = t_done

        if st.overflow_node < 0:
            if not saturated:
                if admit(&st, &queues, end, False) >= 0:
                    for i in range(n):
                        if not push_arrivals(&st, &queues[i], i, end):
                            break
            integrate(&st, end)

    if st.overflow_node >= 0:
        raise QueueOverflowError(
            f"queue of node {st.overflow_node} exceeded {queue_cap} packets at t={t:.6f}s"
        )

    cdef size_t idx
    residual = np.zeros(n, dtype=np.int64)
    for i in range(n):
        for idx in range(queues[i].size()):
            head = queues[i][idx]
            if head >= warmup and head < end:
                residual[i] += 1
    out_delays = np.empty(delays.size(), dtype=np.float64)
    out_nodes = np.empty(delays.size(), dtype=np.int64)
    cdef double[::1] dv = out_delays
    cdef long long[::1] nv = out_nodes
    for idx in range(delays.size()):
        dv[idx] = delays[idx]
        nv[idx] = delay_nodes[idx]
    del keep

    return {
        "delays": out_delays,
        "delay_nodes": out_nodes,
        "generated": np.asarray(generated, dtype=np.int64),
        "delivered": np.asarray(delivered, dtype=np.int64),
        "residual": residual,
        "node_successes": np.asarray(node_success, dtype=np.int64),
        "occupancy_time": np.asarray(occ, dtype=np.float64),
        "idle_slots": idle_slots,
        "successes": successes,
        "collisions": collisions,
        "window_successes": window_successes,
        "empty_time": empty_time,
        "final_time": t,
    }
