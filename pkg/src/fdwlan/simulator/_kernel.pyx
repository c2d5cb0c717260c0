# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled slot loop; mirrors ``_pykernel.run_slots`` draw for draw."""

import numpy as np

cimport numpy as cnp
from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport pow
from libc.stdlib cimport free, malloc
from libc.stdint cimport int64_t, uint8_t
from numpy.random cimport bitgen_t

cnp.import_array()

cdef enum:
    IDLE = 0
    SUCCESS_HD = 1
    SUCCESS_SFD = 2
    SUCCESS_AFD = 3
    COLLISION = 4


cdef inline double _next(bitgen_t *rng) noexcept nogil:
    return rng.next_double(rng.state)


def run_slots(hidden, int W, int m, int window, long long horizon, bint fd,
              int n_batches, gens, trace=None):
    if trace is not None:
        raise ValueError("tracing is only available in the pure-Python kernel")
    cdef cnp.uint8_t[:, ::1] hid = np.ascontiguousarray(hidden, dtype=np.uint8)
    cdef int N = hid.shape[0]
    cdef int n_sta = N - 1
    if len(gens) != N:
        raise ValueError("need one generator per node")

    attempts_a = np.zeros((n_batches, N), dtype=np.int64)
    failures_a = np.zeros((n_batches, N), dtype=np.int64)
    slots_a = np.zeros((n_batches, 5), dtype=np.int64)
    deliveries_a = np.zeros(n_batches, dtype=np.int64)
    cdef int64_t[:, ::1] attempts = attempts_a
    cdef int64_t[:, ::1] failures = failures_a
    cdef int64_t[:, ::1] slots = slots_a
    cdef int64_t[::1] deliveries = deliveries_a

    stage_a = np.zeros(N, dtype=np.int64)
    cnt_a = np.zeros(N, dtype=np.int64)
    att_a = np.zeros(N, dtype=np.int64)
    ok_a = np.zeros(N, dtype=np.uint8)
    tx_a = np.zeros(N, dtype=np.int64)
    cdef int64_t[::1] stage = stage_a
    cdef int64_t[::1] cnt = cnt_a
    cdef int64_t[::1] att_total = att_a
    cdef cnp.uint8_t[::1] ok = ok_a
    cdef int64_t[::1] tx = tx_a

    cdef bitgen_t **rngs = <bitgen_t **> malloc(N * sizeof(bitgen_t *))
    if rngs == NULL:
        raise MemoryError()
    capsules = [g.bit_generator.capsule for g in gens]
    cdef int k
    for k in range(N):
        rngs[k] = <bitgen_t *> PyCapsule_GetPointer(capsules[k], "BitGenerator")

    cdef long long t, batch = 0, batch_end = horizon // n_batches
    cdef int nt, j, s, dest, kind, delivered
    cdef bint good
    cdef double prior = (W + 1) / 2.0
    cdef double tau_j

    try:
        with nogil:
            for k in range(N):
                cnt[k] = <int64_t>(_next(rngs[k]) * W)
            for t in range(horizon):
                while t >= batch_end:
                    batch += 1
                    batch_end = (batch + 1) * horizon // n_batches
                nt = 0
                for k in range(N):
                    ok[k] = 0
                    if cnt[k] == 0:
                        tx[nt] = k
                        nt += 1
                if nt == 0:
                    kind = IDLE
                elif nt == 1:
                    k = tx[0]
                    good = True
                    if k != 0:
                        for j in range(1, N):
                            if hid[k, j]:
                                tau_j = (att_total[j] + 1.0) / (t + prior)
                                if _next(rngs[k]) < 1.0 - pow(1.0 - tau_j, window):
                                    good = False
                                    break
                    ok[k] = good
                    kind = SUCCESS_HD if good else COLLISION
                elif nt == 2 and fd and tx[0] == 0:
                    s = <int>tx[1]
                    ok[s] = 1
                    dest = 1 + <int>(_next(rngs[0]) * n_sta)
                    if dest == s:
                        ok[0] = 1
                        kind = SUCCESS_SFD
                    elif hid[s, dest]:
                        ok[0] = 1
                        kind = SUCCESS_AFD
                    else:
                        kind = SUCCESS_HD
                else:
                    kind = COLLISION

                slots[batch, kind] += 1
                delivered = 0
                for j in range(nt):
                    k = <int>tx[j]
                    attempts[batch, k] += 1
                    if ok[k]:
                        delivered += 1
                    else:
                        failures[batch, k] += 1
                deliveries[batch] += delivered

                for k in range(N):
                    if cnt[k] == 0:
                        att_total[k] += 1
                        if ok[k]:
                            stage[k] = 0
                        elif stage[k] < m:
                            stage[k] += 1
                        cnt[k] = <int64_t>(_next(rngs[k]) * (W << stage[k]))
                    else:
                        cnt[k] -= 1
    finally:
        free(rngs)

    return {"attempts": attempts_a, "failures": failures_a, "slots": slots_a,
            "deliveries": deliveries_a}
