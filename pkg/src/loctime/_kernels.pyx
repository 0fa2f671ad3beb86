# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled walk kernels.

Each kernel consumes pre-drawn random chunks (direction bytes in 0..3 and
Exp(1) holding times) and mutates caller-owned state arrays in place, so the
numpy fallback in ``_kernels_py`` can reproduce the same results from the
same chunks.
"""
from libc.stdint cimport int64_t, uint8_t, uint32_t, int32_t

DEF FIXED = 0
DEF HIT = 1
DEF COVER = 2
DEF INVLT = 3
DEF BUDGET = 4

DEF NEED = 0
DEF DONE = 1
DEF FULL = 2


def walk_explicit(const int64_t[:, ::1] nbr, int mode,
                  int64_t[::1] ist, double[::1] fst,
                  double[::1] occ, double[::1] first_visit,
                  const uint8_t[::1] target, double horizon,
                  const uint8_t[::1] dirs, const double[::1] holds):
    """Advance an explicit-holding walk; returns (steps_used, done).

    ist = [pos, nvisited], fst = [elapsed].
    """
    cdef int64_t pos = ist[0]
    cdef int64_t nvis = ist[1]
    cdef int64_t nn = occ.shape[0]
    cdef double el = fst[0]
    cdef double h
    cdef Py_ssize_t k = 0
    cdef Py_ssize_t n = dirs.shape[0]
    cdef int done = 0
    with nogil:
        while k < n:
            h = holds[k]
            if mode == FIXED and el + h >= horizon:
                occ[pos] += horizon - el
                el = horizon
                k += 1
                done = 1
                break
            occ[pos] += h
            el = el + h
            pos = nbr[pos, dirs[k]]
            k += 1
            if first_visit[pos] < 0:
                first_visit[pos] = el
                nvis += 1
                if mode == COVER and nvis == nn:
                    done = 1
                    break
            if mode == HIT and target[pos]:
                done = 1
                break
    ist[0] = pos
    ist[1] = nvis
    fst[0] = el
    return k, done


def walk_skeleton(const int64_t[:, ::1] nbr, int64_t[::1] ist, double[::1] fst,
                  int64_t[::1] visits, int64_t site, double level,
                  const uint8_t[::1] dirs, const double[::1] holds):
    """Skeleton run to the inverse local time at ``site``.

    Holding times are drawn only at ``site``; elsewhere only visits are
    counted.  ist = [pos, dirs_used, holds_used], fst = [local time at site].
    Returns done.
    """
    cdef int64_t pos = ist[0]
    cdef Py_ssize_t di = ist[1]
    cdef Py_ssize_t hi = ist[2]
    cdef Py_ssize_t nd = dirs.shape[0]
    cdef Py_ssize_t nh = holds.shape[0]
    cdef double l0 = fst[0]
    cdef double h
    cdef int done = 0
    with nogil:
        while di < nd:
            if pos == site:
                if hi >= nh:
                    break
                h = holds[hi]
                hi += 1
                visits[pos] += 1
                if l0 + h > level:
                    l0 = level
                    done = 1
                    break
                l0 = l0 + h
            else:
                visits[pos] += 1
            pos = nbr[pos, dirs[di]]
            di += 1
    ist[0] = pos
    ist[1] = di
    ist[2] = hi
    fst[0] = l0
    return done


def excursion_scan(const int64_t[:, ::1] nbr, const uint32_t[::1] bits, int nlev,
                   int64_t center, int64_t site, int mode, double param,
                   int64_t[::1] ist, double[::1] fst,
                   uint8_t[::1] lev_state, int64_t[::1] counts,
                   double[::1] durations, double[::1] deep,
                   const uint8_t[::1] dirs, const double[::1] holds):
    """Online excursion bookkeeping between concentric boundaries.

    ist = [pos, pending, top_taus, deep_active, ndur, ndeep, steps_used]
    fst = [elapsed, prev_tau_time, deep_cur, site_lt]
    Returns NEED, DONE or FULL.
    """
    cdef int64_t pos = ist[0]
    cdef int pending = <int>ist[1]
    cdef int64_t top_taus = ist[2]
    cdef int deep_active = <int>ist[3]
    cdef Py_ssize_t ndur = ist[4]
    cdef Py_ssize_t ndeep = ist[5]
    cdef double el = fst[0]
    cdef double prev = fst[1]
    cdef double deep_cur = fst[2]
    cdef double site_lt = fst[3]
    cdef Py_ssize_t cap_dur = durations.shape[0]
    cdef Py_ssize_t cap_deep = deep.shape[0]
    cdef Py_ssize_t k = 0
    cdef Py_ssize_t n = dirs.shape[0]
    cdef int64_t n0 = <int64_t>param
    cdef uint32_t b
    cdef int l
    cdef int status = NEED
    cdef double h, trunc
    with nogil:
        while True:
            if pending:
                b = bits[pos]
                if b:
                    if ndur >= cap_dur or ndeep >= cap_deep:
                        status = FULL
                        break
                    for l in range(nlev):
                        if lev_state[l] == 0 and (b >> (l + 1)) & 1:
                            lev_state[l] = 1
                            if l == 0:
                                if top_taus > 0:
                                    durations[ndur] = el - prev
                                    ndur += 1
                                prev = el
                                top_taus += 1
                            if l == nlev - 1:
                                deep_active = 1
                                deep_cur = 0.0
                        elif lev_state[l] == 1 and (b >> l) & 1:
                            lev_state[l] = 0
                            counts[l] += 1
                            if l == nlev - 1 and deep_active:
                                deep[ndeep] = deep_cur
                                ndeep += 1
                                deep_active = 0
                pending = 0
                if mode == BUDGET and top_taus == n0 + 1:
                    status = DONE
                    break
            if k >= n:
                break
            h = holds[k]
            if mode == FIXED and el + h >= param:
                trunc = param - el
                if pos == site:
                    site_lt += trunc
                if pos == center and deep_active:
                    deep_cur += trunc
                el = param
                k += 1
                status = DONE
                break
            if mode == INVLT and pos == site and site_lt + h > param:
                trunc = param - site_lt
                site_lt = param
                if pos == center and deep_active:
                    deep_cur += trunc
                el = el + trunc
                k += 1
                status = DONE
                break
            if pos == site:
                site_lt = site_lt + h
            if pos == center and deep_active:
                deep_cur = deep_cur + h
            el = el + h
            pos = nbr[pos, dirs[k]]
            k += 1
            pending = 1
    ist[0] = pos
    ist[1] = pending
    ist[2] = top_taus
    ist[3] = deep_active
    ist[4] = ndur
    ist[5] = ndeep
    ist[6] = k
    fst[0] = el
    fst[1] = prev
    fst[2] = deep_cur
    fst[3] = site_lt
    return status


def census_scan(int64_t N, const int64_t[::1] traj,
                const int64_t[::1] off_i, const int64_t[::1] off_j,
                const uint32_t[::1] off_bits, int nlev,
                const uint8_t[::1] active, uint8_t[::1] done,
                uint8_t[::1] lev_state, int32_t[::1] counts,
                int64_t[::1] taus, int64_t n0):
    """Excursion counts for every active center along one skeleton path.

    A center stops updating once its top level has seen n0 + 1 entries to
    the inner boundary.
    """
    cdef Py_ssize_t T = traj.shape[0]
    cdef Py_ssize_t M = off_i.shape[0]
    cdef Py_ssize_t k, m
    cdef int64_t p, pi, pj, xi, xj, x
    cdef uint32_t b
    cdef int l
    cdef Py_ssize_t base
    with nogil:
        for k in range(T):
            p = traj[k]
            pi = p // N
            pj = p - pi * N
            for m in range(M):
                xi = pi - off_i[m]
                if xi < 0:
                    xi += N
                xj = pj - off_j[m]
                if xj < 0:
                    xj += N
                x = xi * N + xj
                if not active[x] or done[x]:
                    continue
                b = off_bits[m]
                base = x * nlev
                for l in range(nlev):
                    if lev_state[base + l] == 0 and (b >> (l + 1)) & 1:
                        lev_state[base + l] = 1
                        if l == 0:
                            taus[x] += 1
                    elif lev_state[base + l] == 1 and (b >> l) & 1:
                        lev_state[base + l] = 0
                        counts[base + l] += 1
                if taus[x] == n0 + 1:
                    done[x] = 1
