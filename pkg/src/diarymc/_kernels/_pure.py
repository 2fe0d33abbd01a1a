"""Pure-Python twin of the compiled kernels.

Every function here consumes the underlying uniform stream in exactly the
same order and count as its compiled counterpart in ``_core``, so a fixed
seed produces bit-identical results on either backend.  All categorical
draws use one uniform and a cumulative walk; exponential durations use one
uniform via -log1p(-u)/rate.

Conventions: ``phase`` is 1 for N episodes, 0 for non-N; ``value`` holds the
0-based latent state (N) or class index (non-N, order S, SB, B); ``event``
is 1 for uncensored episodes; ``cand_mask`` is a bitmask over classes for
censored non-N episodes.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import AllZeroMass

NO_VALUE = -1


def _slot_weights(jj, phase, dur, event, value, cand_mask, tr0,
                  beta_n, lbeta_n, beta_b, lbeta_b,
                  p_to_n, p_to_b, p0_n, p0_b):
    """Unnormalized full-conditional weights for the value of episode jj."""
    n_ep = len(phase)
    is_n = phase[jj] == 1
    if is_n:
        dim = beta_n.shape[1]
        beta_row, lbeta_row = beta_n[tr0], lbeta_n[tr0]
        mask = (1 << dim) - 1
    else:
        dim = 3
        beta_row, lbeta_row = beta_b[tr0], lbeta_b[tr0]
        mask = int(cand_mask[jj])
    x = dur[jj]
    ev = event[jj]

    e = [0.0] * dim
    p = [0.0] * dim
    m = -math.inf
    for c in range(dim):
        if not (mask >> c) & 1:
            continue
        ec = -beta_row[c] * x
        if ev:
            ec += lbeta_row[c]
        e[c] = ec
        if jj <= 1:
            pc = p0_n[tr0, c] if is_n else p0_b[tr0, c]
        elif is_n:
            pc = p_to_n[tr0, value[jj - 1], value[jj - 2], c]
        else:
            pc = p_to_b[tr0, value[jj - 1], value[jj - 2], c]
        if jj + 1 < n_ep and jj + 1 >= 2:
            nxt = value[jj + 1]
            if is_n:
                pc *= p_to_b[tr0, c, value[jj - 1], nxt]
            else:
                pc *= p_to_n[tr0, c, value[jj - 1], nxt]
        if jj + 2 < n_ep:
            nxt2 = value[jj + 2]
            if is_n:
                pc *= p_to_n[tr0, value[jj + 1], c, nxt2]
            else:
                pc *= p_to_b[tr0, value[jj + 1], c, nxt2]
        p[c] = pc
        if pc > 0.0 and ec > m:
            m = ec

    w = np.zeros(dim)
    for c in range(dim):
        if p[c] > 0.0:
            w[c] = p[c] * math.exp(e[c] - m)
    return w


def sweep_subject(phase, dur, event, value, cand_mask, tr0,
                  beta_n, lbeta_n, beta_b, lbeta_b,
                  p_to_n, p_to_b, p0_n, p0_b, rng):
    """One systematic-scan pass resampling every free slot in place.

    Free slots are all N episodes plus censored non-N episodes with at
    least two candidate classes.  One uniform is consumed per free slot.
    """
    n_ep = len(phase)
    for jj in range(n_ep):
        if phase[jj] == 1:
            pass
        elif event[jj] == 0 and _popcount3(int(cand_mask[jj])) >= 2:
            pass
        else:
            continue
        w = _slot_weights(jj, phase, dur, event, value, cand_mask, tr0,
                          beta_n, lbeta_n, beta_b, lbeta_b,
                          p_to_n, p_to_b, p0_n, p0_b)
        total = 0.0
        for c in range(len(w)):
            total += w[c]
        if not total > 0.0:
            raise AllZeroMass(f"episode {jj + 1}: no admissible value")
        u = rng.random() * total
        acc = 0.0
        pick = -1
        for c in range(len(w)):
            if w[c] > 0.0:
                pick = c
                acc += w[c]
                if u < acc:
                    break
        value[jj] = pick


def _popcount3(mask):
    return (mask & 1) + ((mask >> 1) & 1) + ((mask >> 2) & 1)


def tally_subject(phase, dur, event, value, tr0,
                  n_n, t_n, n_b, t_b,
                  cnt_to_n, cnt_to_b, init_n, init_b, start_counts):
    """Accumulate sufficient statistics for one subject in place.

    Exposure totals include censored episodes; event counts do not.
    Episodes 1 and 2 count toward the initial laws, later ones toward the
    transition rows; ``start_counts[tr, i]`` counts first-episode phases.
    """
    n_ep = len(phase)
    start_counts[tr0, phase[0]] += 1.0
    for jj in range(n_ep):
        v = value[jj]
        if phase[jj] == 1:
            t_n[tr0, v] += dur[jj]
            n_n[tr0, v] += event[jj]
        else:
            t_b[tr0, v] += dur[jj]
            n_b[tr0, v] += event[jj]
        if jj <= 1:
            if phase[jj] == 1:
                init_n[tr0, v] += 1.0
            else:
                init_b[tr0, v] += 1.0
        elif phase[jj] == 1:
            cnt_to_n[tr0, value[jj - 1], value[jj - 2], v] += 1.0
        else:
            cnt_to_b[tr0, value[jj - 1], value[jj - 2], v] += 1.0


def _pick(row, u):
    acc = 0.0
    pick = -1
    for c in range(len(row)):
        if row[c] > 0.0:
            pick = c
            acc += row[c]
            if u < acc:
                break
    return pick


def simulate_full(k, tr0, horizon,
                  beta_n, beta_b, p_to_n, p_to_b, p0_n, p0_b, p00,
                  start_phase, start_value, start_prev, rng):
    """Generate one alternating trajectory from the full parameter set.

    ``start_phase`` < 0 starts fresh (phase from p00, first two values from
    the initial laws).  Otherwise the simulation continues an in-progress
    episode of the given phase and value whose residual duration is drawn
    fresh; ``start_prev`` is the value of the episode before it, or -1 when
    the next value draw must still use the initial law.
    """
    cap = 64
    phases = np.empty(cap, dtype=np.int8)
    values = np.empty(cap, dtype=np.int64)
    durs = np.empty(cap, dtype=np.float64)

    if start_phase < 0:
        u = rng.random()
        ph = 1 if u < p00[tr0] else 0
        last = NO_VALUE
        second = NO_VALUE
        pending_value = NO_VALUE
    else:
        ph = start_phase
        # after the in-progress episode the memory shifts to
        # (last, second) = (start_value, start_prev)
        last = start_prev if start_prev >= 0 else NO_VALUE
        second = NO_VALUE
        pending_value = start_value

    t = 0.0
    i = 0
    while t < horizon:
        if pending_value != NO_VALUE:
            v = pending_value
            pending_value = NO_VALUE
        else:
            u = rng.random()
            if ph == 1:
                row = p0_n[tr0] if second == NO_VALUE else p_to_n[tr0, last, second]
            else:
                row = p0_b[tr0] if second == NO_VALUE else p_to_b[tr0, last, second]
            v = _pick(row, u)
        beta = beta_n[tr0, v] if ph == 1 else beta_b[tr0, v]
        u = rng.random()
        x = -math.log1p(-u) / beta
        if i == cap:
            cap *= 2
            phases = np.resize(phases, cap)
            values = np.resize(values, cap)
            durs = np.resize(durs, cap)
        phases[i] = ph
        values[i] = v
        durs[i] = min(x, horizon - t)
        i += 1
        t += x
        second = last
        last = v
        ph = 1 - ph
    return phases[:i].copy(), values[:i].copy(), durs[:i].copy()


def simulate_reduced(k, horizon,
                     beta_n, beta_b, m_n, m_b, p0_n, p0_b, p00,
                     start_phase, start_value, start_other, rng):
    """Generate one trajectory from summary-level (two-step) parameters.

    Each phase runs its own chain: on every return to a phase the next
    value is drawn from that phase's matrix row at its previous value, or
    from its initial law on the first visit.  Arrays here are already the
    single arm's slices.  ``start_other`` seeds the other phase's chain
    when continuing (-1 for none).
    """
    cap = 64
    phases = np.empty(cap, dtype=np.int8)
    values = np.empty(cap, dtype=np.int64)
    durs = np.empty(cap, dtype=np.float64)

    last_n = NO_VALUE
    last_b = NO_VALUE
    if start_phase < 0:
        u = rng.random()
        ph = 1 if u < p00 else 0
        pending_value = NO_VALUE
    else:
        ph = start_phase
        pending_value = start_value
        if ph == 1:
            last_b = start_other if start_other >= 0 else NO_VALUE
        else:
            last_n = start_other if start_other >= 0 else NO_VALUE

    t = 0.0
    i = 0
    while t < horizon:
        if pending_value != NO_VALUE:
            v = pending_value
            pending_value = NO_VALUE
        else:
            u = rng.random()
            if ph == 1:
                row = p0_n if last_n == NO_VALUE else m_n[last_n]
            else:
                row = p0_b if last_b == NO_VALUE else m_b[last_b]
            v = _pick(row, u)
        beta = beta_n[v] if ph == 1 else beta_b[v]
        u = rng.random()
        x = -math.log1p(-u) / beta
        if i == cap:
            cap *= 2
            phases = np.resize(phases, cap)
            values = np.resize(values, cap)
            durs = np.resize(durs, cap)
        phases[i] = ph
        values[i] = v
        durs[i] = min(x, horizon - t)
        i += 1
        t += x
        if ph == 1:
            last_n = v
        else:
            last_b = v
        ph = 1 - ph
    return phases[:i].copy(), values[:i].copy(), durs[:i].copy()
