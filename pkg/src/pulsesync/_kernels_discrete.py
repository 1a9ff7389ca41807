"""Round kernels for the adaptive 4-coupling modulo M.

A round is one beat of every node.  Nodes are processed group by group
(``order[gstart[g]:gstart[g + 1]]``), each group atomically; pulses emitted
by a group are delivered right after it, so later groups of the same round
see them and everyone else sees them next round.

Only CSR entries with ``active[j]`` carry pulses and count towards the
offset, which lets the layered stack run the automaton on an overlay tree.
"""

import numpy as np

from ._accel import njit


@njit
def _beat(v, M, adaptive, verbal, phi, beta, mu1, mu2, mu3, sigma, flag):
    """One beat of node v in place; returns (emitted, rested_pull)."""
    Q = M // 4
    H = M // 2
    p = phi[v]
    b = beta[v]
    old_mu2 = mu2[v]
    if adaptive:
        if mu2[v] == 0 and b < Q:
            mu2[v] = 0
        else:
            mu2[v] = 1
    violation = False
    if flag[v] == 1 and 0 < p and p <= H:
        if not adaptive or sigma[v] == 0:
            phi[v] = p - Q if p > Q else 0
            violation = True
        if adaptive:
            if sigma[v] == 0 and mu1[v] == mu3[v]:
                sigma[v] = 1
            if verbal:
                if old_mu2 == 0:
                    mu3[v] = 1 if b == Q else 0
                else:
                    mu3[v] = mu3[v] + (1 if mu3[v] != 3 else 0)
            else:
                inc = mu3[v] + (1 if (mu3[v] != 3 and mu2[v] == 1) else 0)
                mu3[v] = inc if b == M - 1 else 0
    emitted = False
    if phi[v] == M - 1:
        emitted = True
        if adaptive:
            mu1[v] = 1 if sigma[v] == 2 else 3
            mu2[v] = 0
            mu3[v] = 0
            if sigma[v] != 0:
                sigma[v] = (sigma[v] + 1) % 3
        beta[v] = 0
    else:
        if verbal and adaptive and b == M - 1:
            mu2[v] = 1
            mu3[v] = 0
        beta[v] = (beta[v] + 1) % M
    phi[v] = (phi[v] + 1) % M
    flag[v] = 0
    return emitted, violation


@njit
def _offset(indptr, indices, active, phi, M):
    n = phi.shape[0]
    best = 0
    for v in range(n):
        for j in range(indptr[v], indptr[v + 1]):
            if not active[j]:
                continue
            r = (phi[indices[j]] - phi[v]) % M
            if M - r < r:
                r = M - r
            if r > best:
                best = r
    return best


@njit
def run_numba(indptr, indices, active, order, gstart, M, adaptive, verbal,
              phi, beta, mu1, mu2, mu3, sigma, flag,
              r0, r_end, settle, last_violation,
              offset_end, offset_max, violations, blinks, track_boundaries,
              rec_phi, rec_sigma, rec_emit):
    """Run rounds ``r0 .. r_end - 1``; per-round outputs are indexed by ``r - r0``.

    Stops early once ``settle`` rounds have passed without a rested pull
    (``settle <= 0`` disables).  Returns ``(next_round, last_violation)``.
    """
    n_groups = gstart.shape[0] - 1
    record = rec_phi.shape[0] > 0
    emit = np.zeros(order.shape[0], dtype=np.bool_)
    r = r0
    while r < r_end:
        i = r - r0
        if record:
            for v in range(phi.shape[0]):
                rec_phi[i, v] = phi[v]
                rec_sigma[i, v] = sigma[v]
        n_viol = 0
        n_blink = 0
        worst = 0
        for g in range(n_groups):
            for k in range(gstart[g], gstart[g + 1]):
                v = order[k]
                e, bad = _beat(v, M, adaptive, verbal, phi, beta, mu1, mu2, mu3, sigma, flag)
                emit[k] = e
                if bad:
                    n_viol += 1
                if e:
                    n_blink += 1
                    if record:
                        rec_emit[i, v] = 1
            for k in range(gstart[g], gstart[g + 1]):
                if emit[k]:
                    v = order[k]
                    for j in range(indptr[v], indptr[v + 1]):
                        if active[j]:
                            flag[indices[j]] = 1
            if track_boundaries and g < n_groups - 1:
                o = _offset(indptr, indices, active, phi, M)
                if o > worst:
                    worst = o
        o = _offset(indptr, indices, active, phi, M)
        offset_end[i] = o
        offset_max[i] = o if o > worst else worst
        violations[i] = n_viol
        blinks[i] = n_blink
        if n_viol > 0:
            last_violation = r
        r += 1
        if settle > 0 and r - (last_violation + 1) >= settle:
            break
    return r, last_violation


# --------------------------------------------------------------------------
# numpy backend


def _beat_group(idx, M, adaptive, verbal, phi, beta, mu1, mu2, mu3, sigma, flag):
    Q, H = M // 4, M // 2
    p = phi[idx].copy()
    b = beta[idx].copy()
    old_mu2 = mu2[idx].copy()
    if adaptive:
        mu2[idx] = np.where((old_mu2 == 0) & (b < Q), 0, 1)
    pulled = (flag[idx] == 1) & (p > 0) & (p <= H)
    s = sigma[idx].copy()
    jump = pulled & ((s == 0) if adaptive else True)
    newp = np.where(p > Q, p - Q, 0)
    phi[idx] = np.where(jump, newp, p)
    if adaptive:
        m3 = mu3[idx].copy()
        excite = pulled & (s == 0) & (mu1[idx] == m3)
        sigma[idx] = np.where(excite, 1, s)
        if verbal:
            upd = np.where(old_mu2 == 0, (b == Q).astype(m3.dtype), m3 + (m3 != 3))
        else:
            inc = m3 + ((m3 != 3) & (mu2[idx] == 1))
            upd = np.where(b == M - 1, inc, 0)
        mu3[idx] = np.where(pulled, upd, m3)
    emitted = phi[idx] == M - 1
    if adaptive:
        e = idx[emitted]
        se = sigma[e]
        mu1[e] = np.where(se == 2, 1, 3)
        mu2[e] = 0
        mu3[e] = 0
        sigma[e] = np.where(se != 0, (se + 1) % 3, 0)
        if verbal:
            w = idx[~emitted & (b == M - 1)]
            mu2[w] = 1
            mu3[w] = 0
    beta[idx] = np.where(emitted, 0, (b + 1) % M)
    phi[idx] = (phi[idx] + 1) % M
    flag[idx] = 0
    return emitted, jump


def offset_np(src, dst, phi, M):
    if src.size == 0:
        return 0
    r = (phi[dst] - phi[src]) % M
    return int(np.minimum(r, M - r).max())


def run_numpy(indptr, indices, active, order, gstart, M, adaptive, verbal,
              phi, beta, mu1, mu2, mu3, sigma, flag,
              r0, r_end, settle, last_violation,
              offset_end, offset_max, violations, blinks, track_boundaries,
              rec_phi, rec_sigma, rec_emit):
    """Vectorized twin of :func:`run_numba` with the same contract."""
    n = phi.shape[0]
    rows = np.repeat(np.arange(n), np.diff(indptr))
    act = active.astype(bool)
    src, dst = rows[act], indices[act]
    groups = [order[gstart[g]:gstart[g + 1]] for g in range(gstart.shape[0] - 1)]
    record = rec_phi.shape[0] > 0
    r = r0
    while r < r_end:
        i = r - r0
        if record:
            rec_phi[i] = phi
            rec_sigma[i] = sigma
        n_viol = n_blink = worst = 0
        for gi, idx in enumerate(groups):
            emitted, jump = _beat_group(idx, M, adaptive, verbal, phi, beta, mu1, mu2, mu3, sigma, flag)
            n_viol += int(jump.sum())
            n_blink += int(emitted.sum())
            em = idx[emitted]
            if em.size:
                if record:
                    rec_emit[i, em] = 1
                hit = np.isin(src, em)
                flag[dst[hit]] = 1
            if track_boundaries and gi < len(groups) - 1:
                worst = max(worst, offset_np(src, dst, phi, M))
        o = offset_np(src, dst, phi, M)
        offset_end[i] = o
        offset_max[i] = max(o, worst)
        violations[i] = n_viol
        blinks[i] = n_blink
        if n_viol:
            last_violation = r
        r += 1
        if settle > 0 and r - (last_violation + 1) >= settle:
            break
    return r, last_violation
