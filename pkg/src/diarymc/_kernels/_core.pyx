# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: Gibbs sweep, sufficient-statistic tally, simulation.

Mirrors ``_pure`` operation for operation; both consume the generator's
uniform stream in the same order, so results are bit-identical across
backends for a fixed seed.
"""

from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport exp, log1p, INFINITY

import numpy as np

cimport numpy as cnp
from numpy.random cimport bitgen_t

from ..errors import AllZeroMass

cnp.import_array()

cdef int NO_VALUE = -1


cdef inline bitgen_t *_bitgen(object rng):
    return <bitgen_t *> PyCapsule_GetPointer(rng.bit_generator.capsule, "BitGenerator")


cdef inline int _popcount3(int mask) nogil:
    return (mask & 1) + ((mask >> 1) & 1) + ((mask >> 2) & 1)


def sweep_subject(const signed char[:] phase, const double[:] dur,
                  const signed char[:] event, long long[:] value,
                  const unsigned char[:] cand_mask, int tr0,
                  const double[:, :] beta_n, const double[:, :] lbeta_n,
                  const double[:, :] beta_b, const double[:, :] lbeta_b,
                  const double[:, :, :, :] p_to_n, const double[:, :, :, :] p_to_b,
                  const double[:, :] p0_n, const double[:, :] p0_b,
                  object rng):
    cdef bitgen_t *bg = _bitgen(rng)
    cdef int n_ep = phase.shape[0]
    cdef int kdim = beta_n.shape[1]
    cdef int buf_dim = kdim if kdim > 3 else 3
    cdef double[::1] e = np.empty(buf_dim, dtype=np.float64)
    cdef double[::1] p = np.empty(buf_dim, dtype=np.float64)
    cdef double[::1] w = np.empty(buf_dim, dtype=np.float64)
    cdef int jj, c, dim, mask, ev, is_n, pick, nxt, nxt2
    cdef double x, ec, pc, m, total, u, acc

    for jj in range(n_ep):
        is_n = phase[jj] == 1
        if is_n:
            dim = kdim
            mask = (1 << dim) - 1
        else:
            if event[jj] != 0 or _popcount3(cand_mask[jj]) < 2:
                continue
            dim = 3
            mask = cand_mask[jj]
        x = dur[jj]
        ev = event[jj]
        m = -INFINITY
        for c in range(dim):
            p[c] = 0.0
            if not (mask >> c) & 1:
                continue
            if is_n:
                ec = -beta_n[tr0, c] * x
                if ev:
                    ec += lbeta_n[tr0, c]
            else:
                ec = -beta_b[tr0, c] * x
                if ev:
                    ec += lbeta_b[tr0, c]
            e[c] = ec
            if jj <= 1:
                pc = p0_n[tr0, c] if is_n else p0_b[tr0, c]
            elif is_n:
                pc = p_to_n[tr0, value[jj - 1], value[jj - 2], c]
            else:
                pc = p_to_b[tr0, value[jj - 1], value[jj - 2], c]
            if jj + 1 < n_ep and jj + 1 >= 2:
                nxt = <int> value[jj + 1]
                if is_n:
                    pc = pc * p_to_b[tr0, c, value[jj - 1], nxt]
                else:
                    pc = pc * p_to_n[tr0, c, value[jj - 1], nxt]
            if jj + 2 < n_ep:
                nxt2 = <int> value[jj + 2]
                if is_n:
                    pc = pc * p_to_n[tr0, value[jj + 1], c, nxt2]
                else:
                    pc = pc * p_to_b[tr0, value[jj + 1], c, nxt2]
            p[c] = pc
            if pc > 0.0 and ec > m:
                m = ec
        total = 0.0
        for c in range(dim):
            if p[c] > 0.0:
                w[c] = p[c] * exp(e[c] - m)
            else:
                w[c] = 0.0
            total += w[c]
        if not total > 0.0:
            raise AllZeroMass(f"episode {jj + 1}: no admissible value")
        u = bg.next_double(bg.state) * total
        acc = 0.0
        pick = -1
        for c in range(dim):
            if w[c] > 0.0:
                pick = c
                acc += w[c]
                if u < acc:
                    break
        value[jj] = pick


def tally_subject(const signed char[:] phase, const double[:] dur,
                  const signed char[:] event, const long long[:] value, int tr0,
                  double[:, :] n_n, double[:, :] t_n,
                  double[:, :] n_b, double[:, :] t_b,
                  double[:, :, :, :] cnt_to_n, double[:, :, :, :] cnt_to_b,
                  double[:, :] init_n, double[:, :] init_b,
                  double[:, :] start_counts):
    cdef int n_ep = phase.shape[0]
    cdef int jj
    cdef long long v
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


cdef inline int _pick1(const double[:] row, int dim, double u) nogil:
    cdef double acc = 0.0
    cdef int c, pick = -1
    for c in range(dim):
        if row[c] > 0.0:
            pick = c
            acc += row[c]
            if u < acc:
                break
    return pick


def simulate_full(int k, int tr0, double horizon,
                  const double[:, :] beta_n, const double[:, :] beta_b,
                  const double[:, :, :, :] p_to_n, const double[:, :, :, :] p_to_b,
                  const double[:, :] p0_n, const double[:, :] p0_b,
                  const double[:] p00,
                  int start_phase, int start_value, int start_prev,
                  object rng):
    cdef bitgen_t *bg = _bitgen(rng)
    cdef int cap = 64
    phases_arr = np.empty(cap, dtype=np.int8)
    values_arr = np.empty(cap, dtype=np.int64)
    durs_arr = np.empty(cap, dtype=np.float64)
    cdef signed char[:] phases = phases_arr
    cdef long long[:] values = values_arr
    cdef double[:] durs = durs_arr
    cdef int ph, last, second, pending, v, i
    cdef double t, u, x, beta, rem

    if start_phase < 0:
        u = bg.next_double(bg.state)
        ph = 1 if u < p00[tr0] else 0
        last = NO_VALUE
        second = NO_VALUE
        pending = NO_VALUE
    else:
        ph = start_phase
        # after the in-progress episode the memory shifts to
        # (last, second) = (start_value, start_prev)
        last = start_prev if start_prev >= 0 else NO_VALUE
        second = NO_VALUE
        pending = start_value

    t = 0.0
    i = 0
    while t < horizon:
        if pending != NO_VALUE:
            v = pending
            pending = NO_VALUE
        else:
            u = bg.next_double(bg.state)
            if ph == 1:
                if second == NO_VALUE:
                    v = _pick1(p0_n[tr0], k, u)
                else:
                    v = _pick1(p_to_n[tr0, last, second], k, u)
            else:
                if second == NO_VALUE:
                    v = _pick1(p0_b[tr0], 3, u)
                else:
                    v = _pick1(p_to_b[tr0, last, second], 3, u)
        beta = beta_n[tr0, v] if ph == 1 else beta_b[tr0, v]
        u = bg.next_double(bg.state)
        x = -log1p(-u) / beta
        if i == cap:
            cap *= 2
            phases_arr = np.resize(phases_arr, cap)
            values_arr = np.resize(values_arr, cap)
            durs_arr = np.resize(durs_arr, cap)
            phases = phases_arr
            values = values_arr
            durs = durs_arr
        rem = horizon - t
        phases[i] = ph
        values[i] = v
        durs[i] = x if x < rem else rem
        i += 1
        t += x
        second = last
        last = v
        ph = 1 - ph
    return phases_arr[:i].copy(), values_arr[:i].copy(), durs_arr[:i].copy()


def simulate_reduced(int k, double horizon,
                     const double[:] beta_n, const double[:] beta_b,
                     const double[:, :] m_n, const double[:, :] m_b,
                     const double[:] p0_n, const double[:] p0_b, double p00,
                     int start_phase, int start_value, int start_other,
                     object rng):
    cdef bitgen_t *bg = _bitgen(rng)
    cdef int cap = 64
    phases_arr = np.empty(cap, dtype=np.int8)
    values_arr = np.empty(cap, dtype=np.int64)
    durs_arr = np.empty(cap, dtype=np.float64)
    cdef signed char[:] phases = phases_arr
    cdef long long[:] values = values_arr
    cdef double[:] durs = durs_arr
    cdef int ph, last_n, last_b, pending, v, i
    cdef double t, u, x, beta, rem

    last_n = NO_VALUE
    last_b = NO_VALUE
    if start_phase < 0:
        u = bg.next_double(bg.state)
        ph = 1 if u < p00 else 0
        pending = NO_VALUE
    else:
        ph = start_phase
        pending = start_value
        if ph == 1:
            last_b = start_other if start_other >= 0 else NO_VALUE
        else:
            last_n = start_other if start_other >= 0 else NO_VALUE

    t = 0.0
    i = 0
    while t < horizon:
        if pending != NO_VALUE:
            v = pending
            pending = NO_VALUE
        else:
            u = bg.next_double(bg.state)
            if ph == 1:
                if last_n == NO_VALUE:
                    v = _pick1(p0_n, k, u)
                else:
                    v = _pick1(m_n[last_n], k, u)
            else:
                if last_b == NO_VALUE:
                    v = _pick1(p0_b, 3, u)
                else:
                    v = _pick1(m_b[last_b], 3, u)
        beta = beta_n[v] if ph == 1 else beta_b[v]
        u = bg.next_double(bg.state)
        x = -log1p(-u) / beta
        if i == cap:
            cap *= 2
            phases_arr = np.resize(phases_arr, cap)
            values_arr = np.resize(values_arr, cap)
            durs_arr = np.resize(durs_arr, cap)
            phases = phases_arr
            values = values_arr
            durs = durs_arr
        rem = horizon - t
        phases[i] = ph
        values[i] = v
        durs[i] = x if x < rem else rem
        i += 1
        t += x
        if ph == 1:
            last_n = v
        else:
            last_b = v
        ph = 1 - ph
    return phases_arr[:i].copy(), values_arr[:i].copy(), durs_arr[:i].copy()
