"""Event-driven kernels for the 4-coupling and the adaptive 4-coupling.

Every phase lives on the grid ``(1/L)Z``: pulls subtract exactly 1/4 or
merge to 0, and flows are common to all nodes, so a run started on that grid
never leaves it.  Times are integer ticks of length ``1/L``.

State arrays (int64, length n): phi, beta in ``[0, L)``; mu1, mu2, mu3, sigma.
The log is an ``(cap, 15)`` int64 array with columns ``LOG_COLUMNS``.
"""

import numpy as np

from ._accel import njit

BLINK, RECEIVED, PULLED, EXCITED, BETA_QUARTER, BETA_ONE, STATE_JUMP = range(7)
KIND_NAMES = ("Blink", "PulseReceived", "Pulled", "Excited", "BetaQuarter", "BetaOne", "StateJump")

LOG_COLUMNS = ("tick", "node", "kind",
               "phi_b", "phi_a", "beta_b", "beta_a",
               "mu1_b", "mu1_a", "mu2_b", "mu2_a", "mu3_b", "mu3_a",
               "sigma_b", "sigma_a")
NCOL = len(LOG_COLUMNS)

# log level bits
LOG_BLINKS = 1
LOG_PULSES = 2
LOG_AUX = 4
LOG_ALL = 7

STATUS_HORIZON, STATUS_LOG_FULL, STATUS_SYNC_STOP = 0, 1, 2

_LEVEL_OF_KIND = np.array([LOG_BLINKS, LOG_PULSES, LOG_PULSES, LOG_PULSES,
                           LOG_AUX, LOG_AUX, LOG_AUX], dtype=np.int64)


# --------------------------------------------------------------------------
# numba backend


@njit
def _write_row(log, k, tick, v, kind, before, phi, beta, mu1, mu2, mu3, sigma):
    log[k, 0] = tick
    log[k, 1] = v
    log[k, 2] = kind
    log[k, 3] = before[0]
    log[k, 4] = phi[v]
    log[k, 5] = before[1]
    log[k, 6] = beta[v]
    log[k, 7] = before[2]
    log[k, 8] = mu1[v]
    log[k, 9] = before[3]
    log[k, 10] = mu2[v]
    log[k, 11] = before[4]
    log[k, 12] = mu3[v]
    log[k, 13] = before[5]
    log[k, 14] = sigma[v]
    return k + 1


@njit
def _all_equal(phi):
    for i in range(1, phi.shape[0]):
        if phi[i] != phi[0]:
            return False
    return True


@njit
def run_numba(indptr, indices, phi, beta, mu1, mu2, mu3, sigma,
              L, adaptive, verbal, t, t_end, sync_stop,
              probes, probe_pos, probe_out, log, log_level, sync_tick):
    """Advance the world from tick ``t``; returns ``(t, n_log, probe_pos, sync_tick, status)``.

    ``sync_stop >= 0`` stops the run that many ticks after the phases first coincide.
    """
    n = phi.shape[0]
    Q = L // 4
    H = L // 2
    cap = log.shape[0]
    k = 0
    blink = np.zeros(n, dtype=np.bool_)
    recv = np.zeros(n, dtype=np.bool_)
    before = np.zeros(6, dtype=np.int64)
    n_probes = probes.shape[0]
    if sync_tick < 0 and n > 0 and _all_equal(phi):
        sync_tick = t
    while True:
        end = t_end
        if sync_stop >= 0 and sync_tick >= 0 and sync_tick + sync_stop < end:
            end = sync_tick + sync_stop
        dt = L
        for v in range(n):
            d = L - phi[v]
            if d < dt:
                dt = d
            if adaptive:
                if beta[v] < Q:
                    d = Q - beta[v]
                else:
                    d = L - beta[v]
                if d < dt:
                    dt = d
        t_next = t + dt
        stop = t_next > end
        target = end if stop else t_next
        if not stop and cap - k < 3 * n:
            return t, k, probe_pos, sync_tick, STATUS_LOG_FULL
        # probes are left-continuous: events at ``target`` are not yet applied
        while probe_pos < n_probes and probes[probe_pos] <= target:
            p = probes[probe_pos]
            if p >= t:
                el = p - t
                for v in range(n):
                    probe_out[probe_pos, v, 0] = (phi[v] + el) % L
                    if adaptive:
                        probe_out[probe_pos, v, 1] = (beta[v] + el) % L
                    else:
                        probe_out[probe_pos, v, 1] = beta[v]
                    probe_out[probe_pos, v, 2] = mu1[v]
                    probe_out[probe_pos, v, 3] = mu2[v]
                    probe_out[probe_pos, v, 4] = mu3[v]
                    probe_out[probe_pos, v, 5] = sigma[v]
            probe_pos += 1
        if stop:
            el = end - t
            for v in range(n):
                phi[v] += el
                if adaptive:
                    beta[v] += el
            status = STATUS_HORIZON
            if sync_stop >= 0 and sync_tick >= 0 and end == sync_tick + sync_stop:
                status = STATUS_SYNC_STOP
            return end, k, probe_pos, sync_tick, status
        t = t_next
        for v in range(n):
            phi[v] += dt
            if adaptive:
                beta[v] += dt
            blink[v] = phi[v] == L
        for v in range(n):
            recv[v] = False
            if not blink[v]:
                for j in range(indptr[v], indptr[v + 1]):
                    if blink[indices[j]]:
                        recv[v] = True
                        break
        # blinkers first
        for v in range(n):
            if not blink[v]:
                continue
            before[0] = L
            before[1] = beta[v]
            before[2] = mu1[v]
            before[3] = mu2[v]
            before[4] = mu3[v]
            before[5] = sigma[v]
            phi[v] = 0
            if adaptive:
                beta[v] = 0
                mu1[v] = 1 if sigma[v] == 2 else 3
                mu2[v] = 0
                mu3[v] = 0
                if sigma[v] != 0:
                    sigma[v] = (sigma[v] + 1) % 3
            if log_level & LOG_BLINKS:
                k = _write_row(log, k, t, v, BLINK, before, phi, beta, mu1, mu2, mu3, sigma)
            if (log_level & LOG_AUX) and sigma[v] != before[5]:
                k = _write_row(log, k, t, v, STATE_JUMP, before, phi, beta, mu1, mu2, mu3, sigma)
        for v in range(n):
            if blink[v]:
                continue
            pv = phi[v]
            pulled = recv[v] and 0 < pv and pv <= H
            beta_one = adaptive and beta[v] == L
            beta_quarter = adaptive and beta[v] == Q
            if not (recv[v] or beta_one or beta_quarter):
                continue
            before[0] = pv
            before[1] = beta[v]
            before[2] = mu1[v]
            before[3] = mu2[v]
            before[4] = mu3[v]
            before[5] = sigma[v]
            excited = False
            if not adaptive:
                if pulled:
                    phi[v] = 0 if pv <= Q else pv - Q
            elif pulled:
                b = beta[v]
                if verbal and b == L:
                    # the window restarts at this instant, then the pull is counted
                    mu2[v] = 1
                    mu3[v] = 0
                if sigma[v] == 0:
                    phi[v] = 0 if pv <= Q else pv - Q
                if sigma[v] == 0 and mu1[v] == mu3[v]:
                    sigma[v] = 1
                    excited = True
                if mu2[v] == 0:
                    mu2[v] = 1 if b == Q else 0
                    mu3[v] = mu2[v]
                else:
                    inc = mu3[v] + (1 if mu3[v] != 3 else 0)
                    if verbal:
                        mu3[v] = inc
                    else:
                        mu3[v] = inc if b == L else 0
                if b == L:
                    beta[v] = 0
            elif beta_one:
                beta[v] = 0
                mu2[v] = 1
                mu3[v] = 0
            elif beta_quarter:
                mu2[v] = 1
            if log_level & LOG_PULSES:
                if recv[v]:
                    k = _write_row(log, k, t, v, RECEIVED, before, phi, beta, mu1, mu2, mu3, sigma)
                if pulled:
                    k = _write_row(log, k, t, v, PULLED, before, phi, beta, mu1, mu2, mu3, sigma)
                if excited:
                    k = _write_row(log, k, t, v, EXCITED, before, phi, beta, mu1, mu2, mu3, sigma)
            if log_level & LOG_AUX and not pulled:
                if beta_one:
                    k = _write_row(log, k, t, v, BETA_ONE, before, phi, beta, mu1, mu2, mu3, sigma)
                elif beta_quarter:
                    k = _write_row(log, k, t, v, BETA_QUARTER, before, phi, beta, mu1, mu2, mu3, sigma)
        if _all_equal(phi):
            if sync_tick < 0:
                sync_tick = t
        else:
            sync_tick = -1


# --------------------------------------------------------------------------
# numpy backend: one vectorized instant at a time


def next_dt(phi, beta, L, adaptive):
    dt = L - phi.max() if phi.size else L
    if adaptive and phi.size:
        Q = L // 4
        d = np.where(beta < Q, Q - beta, L - beta).min()
        dt = min(dt, d)
    return int(dt)


def receivers(blink, indptr, indices):
    n = blink.shape[0]
    if indices.size == 0:
        return np.zeros(n, dtype=bool)
    rows = np.repeat(np.arange(n), np.diff(indptr))
    hit = np.bincount(rows, weights=blink[indices].astype(np.float64), minlength=n) > 0
    return hit & ~blink


def apply_instant_arrays(state, blink, recv, L, adaptive, verbal):
    """Apply the jump map for one instant in place.

    ``state`` is a dict of the six arrays already advanced to the instant
    (blinkers hold phi == L).  Returns the masks ``(pulled, excited,
    beta_one, beta_quarter)`` needed for logging.
    """
    phi, beta, mu1, mu2, mu3, sigma = (state[k] for k in ("phi", "beta", "mu1", "mu2", "mu3", "sigma"))
    Q = L // 4
    H = L // 2
    nb = ~blink
    pulled = recv & (phi > 0) & (phi <= H)
    f0 = np.where(phi <= Q, 0, phi - Q)
    if not adaptive:
        phi[pulled] = f0[pulled]
        phi[blink] = 0
        z = np.zeros_like(blink)
        return pulled, z, z, z
    b = beta.copy()
    beta_one = nb & (b == L)
    beta_quarter = nb & (b == Q)
    # blink branch
    s_old = sigma.copy()
    mu1[blink] = np.where(s_old[blink] == 2, 1, 3)
    mu2[blink] = 0
    mu3[blink] = 0
    beta[blink] = 0
    sigma[blink] = np.where(s_old[blink] != 0, (s_old[blink] + 1) % 3, 0)
    phi[blink] = 0
    # beta = 1 and beta = 1/4 branches
    one = beta_one & ~pulled
    quarter = beta_quarter & ~pulled
    beta[one] = 0
    mu2[one] = 1
    mu3[one] = 0
    mu2[quarter] = 1
    # pull branch
    if verbal:
        wrap = pulled & (b == L)
        mu2[wrap] = 1
        mu3[wrap] = 0
    rested = pulled & (s_old == 0)
    phi[rested] = f0[rested]
    excited = rested & (mu1 == mu3)
    sigma[excited] = 1
    m2zero = pulled & (mu2 == 0)
    m2one = pulled & (mu2 == 1)
    newq = (b == Q).astype(mu2.dtype)
    mu2[m2zero] = newq[m2zero]
    mu3[m2zero] = newq[m2zero]
    inc = mu3 + (mu3 != 3)
    if verbal:
        mu3[m2one] = inc[m2one]
    else:
        mu3[m2one] = np.where(b[m2one] == L, inc[m2one], 0)
    beta[pulled & (b == L)] = 0
    return pulled, excited, beta_one, beta_quarter


def _rows_for_instant(t, before, after, blink, recv, pulled, excited, beta_one, beta_quarter,
                      log_level):
    n = blink.shape[0]
    nodes = np.arange(n)
    parts = []
    sig_jump = blink & (after[5] != before[5])
    masks = [(BLINK, blink), (STATE_JUMP, sig_jump), (RECEIVED, recv), (PULLED, pulled),
             (EXCITED, excited), (BETA_ONE, beta_one & ~pulled),
             (BETA_QUARTER, beta_quarter & ~pulled)]
    for kind, m in masks:
        if not (log_level & _LEVEL_OF_KIND[kind]) or not m.any():
            continue
        idx = nodes[m]
        rows = np.empty((idx.size, NCOL), dtype=np.int64)
        rows[:, 0] = t
        rows[:, 1] = idx
        rows[:, 2] = kind
        for c in range(6):
            rows[:, 3 + 2 * c] = before[c][idx]
            rows[:, 4 + 2 * c] = after[c][idx]
        parts.append(rows)
    if not parts:
        return np.empty((0, NCOL), dtype=np.int64)
    rows = np.concatenate(parts)
    group = (~blink[rows[:, 1]]).astype(np.int64)
    kind_rank = np.where(rows[:, 2] == STATE_JUMP, 1, np.where(rows[:, 2] == BLINK, 0, rows[:, 2]))
    order = np.lexsort((kind_rank, rows[:, 1], group))
    return rows[order]


def run_numpy(indptr, indices, phi, beta, mu1, mu2, mu3, sigma,
              L, adaptive, verbal, t, t_end, sync_stop,
              probes, probe_pos, probe_out, log, log_level, sync_tick):
    """Vectorized twin of :func:`run_numba` with the same contract."""
    n = phi.shape[0]
    state = dict(phi=phi, beta=beta, mu1=mu1, mu2=mu2, mu3=mu3, sigma=sigma)
    cap = log.shape[0]
    k = 0
    n_probes = probes.shape[0]
    if sync_tick < 0 and n > 0 and (phi == phi[0]).all():
        sync_tick = t
    while True:
        end = t_end
        if sync_stop >= 0 and sync_tick >= 0 and sync_tick + sync_stop < end:
            end = sync_tick + sync_stop
        dt = next_dt(phi, beta, L, adaptive) if n else L
        t_next = t + dt
        stop = t_next > end
        target = end if stop else t_next
        if not stop and cap - k < 3 * n:
            return t, k, probe_pos, sync_tick, STATUS_LOG_FULL
        while probe_pos < n_probes and probes[probe_pos] <= target:
            p = probes[probe_pos]
            if p >= t:
                el = p - t
                probe_out[probe_pos, :, 0] = (phi + el) % L
                probe_out[probe_pos, :, 1] = (beta + el) % L if adaptive else beta
                probe_out[probe_pos, :, 2] = mu1
                probe_out[probe_pos, :, 3] = mu2
                probe_out[probe_pos, :, 4] = mu3
                probe_out[probe_pos, :, 5] = sigma
            probe_pos += 1
        if stop:
            el = end - t
            phi += el
            if adaptive:
                beta += el
            status = STATUS_HORIZON
            if sync_stop >= 0 and sync_tick >= 0 and end == sync_tick + sync_stop:
                status = STATUS_SYNC_STOP
            return end, k, probe_pos, sync_tick, status
        t = t_next
        phi += dt
        if adaptive:
            beta += dt
        blink = phi == L
        recv = receivers(blink, indptr, indices)
        before = [a.copy() for a in (phi, beta, mu1, mu2, mu3, sigma)]
        pulled, excited, beta_one, beta_quarter = apply_instant_arrays(
            state, blink, recv, L, adaptive, verbal)
        rows = _rows_for_instant(t, before, (phi, beta, mu1, mu2, mu3, sigma), blink, recv,
                                 pulled, excited, beta_one, beta_quarter, log_level)
        log[k:k + rows.shape[0]] = rows
        k += rows.shape[0]
        if (phi == phi[0]).all():
            if sync_tick < 0:
                sync_tick = t
        else:
            sync_tick = -1
