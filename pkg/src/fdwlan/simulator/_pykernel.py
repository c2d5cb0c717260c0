"""Reference slot loop in pure Python.

Consumes the per-node random streams in exactly the same order as the
compiled kernel, so both produce identical counters for identical inputs.
It is also the only path that can emit a per-slot trace.
"""

import numpy as np

IDLE, SUCCESS_HD, SUCCESS_SFD, SUCCESS_AFD, COLLISION = range(5)
SLOT_NAMES = ("idle", "success", "sfd", "afd", "collision")


def run_slots(hidden, W, m, window, horizon, fd, n_batches, gens, trace=None):
    """Simulate ``horizon`` virtual slots.

    Parameters
    ----------
    hidden : numpy.ndarray
        ``N x N`` uint8 matrix, node 0 is the AP.
    gens : sequence of numpy.random.Generator
        One private stream per node.
    trace : list, optional
        Receives ``(slot, slot_type, transmitters, delivered)`` per slot.

    Returns
    -------
    dict
        ``attempts`` and ``failures`` of shape ``(n_batches, N)``, ``slots`` of
        shape ``(n_batches, 5)`` and ``deliveries`` of shape ``(n_batches,)``.
    """
    N = hidden.shape[0]
    n_sta = N - 1
    hid = [[bool(v) for v in row] for row in hidden]
    draw = [g.random for g in gens]
    attempts = np.zeros((n_batches, N), dtype=np.int64)
    failures = np.zeros((n_batches, N), dtype=np.int64)
    slots = np.zeros((n_batches, 5), dtype=np.int64)
    deliveries = np.zeros(n_batches, dtype=np.int64)

    stage = [0] * N
    cnt = [int(draw[k]() * W) for k in range(N)]
    att_total = [0] * N
    prior = (W + 1) / 2.0
    batch = 0
    batch_end = horizon // n_batches

    for t in range(horizon):
        while t >= batch_end:
            batch += 1
            batch_end = (batch + 1) * horizon // n_batches
        tx = [k for k in range(N) if cnt[k] == 0]
        nt = len(tx)
        ok = {}
        if nt == 0:
            kind = IDLE
        elif nt == 1:
            k = tx[0]
            good = True
            if k != 0:
                row = hid[k]
                for j in range(1, N):
                    if row[j]:
                        tau_j = (att_total[j] + 1.0) / (t + prior)
                        if draw[k]() < 1.0 - (1.0 - tau_j) ** window:
                            good = False
                            break
            ok[k] = good
            kind = SUCCESS_HD if good else COLLISION
        elif nt == 2 and fd and tx[0] == 0:
            s = tx[1]
            ok[s] = True
            dest = 1 + int(draw[0]() * n_sta)
            if dest == s:
                ok[0] = True
                kind = SUCCESS_SFD
            elif hid[s][dest]:
                ok[0] = True
                kind = SUCCESS_AFD
            else:
                ok[0] = False
                kind = SUCCESS_HD
        else:
            kind = COLLISION

        slots[batch, kind] += 1
        delivered = 0
        for k in tx:
            attempts[batch, k] += 1
            if ok.get(k, False):
                delivered += 1
            else:
                failures[batch, k] += 1
        deliveries[batch] += delivered
        if trace is not None:
            trace.append((t, kind, tuple(tx), delivered))

        for k in range(N):
            if cnt[k] == 0:
                att_total[k] += 1
                if ok.get(k, False):
                    stage[k] = 0
                elif stage[k] < m:
                    stage[k] += 1
                cnt[k] = int(draw[k]() * (W << stage[k]))
            else:
                cnt[k] -= 1

    return {"attempts": attempts, "failures": failures, "slots": slots, "deliveries": deliveries}
