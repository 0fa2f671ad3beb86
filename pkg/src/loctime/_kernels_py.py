"""Numpy fallback for the compiled walk kernels.

Same signatures, same in-place state conventions and the same consumption
of the random chunks as ``_kernels.pyx``; floating-point accumulations are
done in the same order, so both backends agree bit for bit.
"""
from __future__ import annotations

import numpy as np

from .torus import STEPS

FIXED, HIT, COVER, INVLT, BUDGET = 0, 1, 2, 3, 4
NEED, DONE, FULL = 0, 1, 2


def _path(nbr: np.ndarray, pos: int, dirs: np.ndarray) -> np.ndarray:
    """Sites visited by the skeleton: p[0] = pos, p[k+1] after dirs[k]."""
    N = int(round(np.sqrt(nbr.shape[0])))
    di, dj = STEPS[:, 0], STEPS[:, 1]
    i0, j0 = divmod(int(pos), N)
    d = dirs.astype(np.intp)
    ii = np.empty(d.size + 1, dtype=np.int64)
    jj = np.empty(d.size + 1, dtype=np.int64)
    ii[0], jj[0] = i0, j0
    np.cumsum(di[d], out=ii[1:])
    np.cumsum(dj[d], out=jj[1:])
    ii[1:] += i0
    jj[1:] += j0
    return (ii % N) * N + (jj % N)


def _seqsum(start: float, x: np.ndarray) -> np.ndarray:
    """Running sums start, start+x0, (start+x0)+x1, ... in sequential order."""
    out = np.empty(x.size + 1, dtype=np.float64)
    out[0] = start
    out[1:] = x
    return np.cumsum(out)


def walk_explicit(nbr, mode, ist, fst, occ, first_visit, target, horizon, dirs, holds):
    n = dirs.shape[0]
    if n == 0:
        return 0, 0
    pos, nvis = int(ist[0]), int(ist[1])
    el = float(fst[0])
    p = _path(nbr, pos, dirs)
    c = _seqsum(el, holds)
    K = n
    done = 0
    truncated = False
    if mode == FIXED:
        hit = np.flatnonzero(c[1:] >= horizon)
        if hit.size:
            K = int(hit[0]) + 1
            done = 1
            truncated = True
    elif mode == HIT:
        hit = np.flatnonzero(target[p[1:]])
        if hit.size:
            K = int(hit[0]) + 1
            done = 1
    # arrivals are p[1..K], except a truncated final holding does not move
    last_arrival = K - 1 if truncated else K
    arr = p[1:last_arrival + 1]
    sites, first = np.unique(arr, return_index=True)
    fresh = first_visit[sites] < 0
    sites, first = sites[fresh], first[fresh]
    if mode == COVER:
        need = occ.shape[0] - nvis
        if sites.size >= need:
            order = np.argsort(first, kind="stable")
            cut = int(first[order[need - 1]])
            K = cut + 1
            last_arrival = K
            keep = first <= cut
            sites, first = sites[keep], first[keep]
            done = 1
    h = holds[:K]
    if truncated:
        h = h.copy()
        h[-1] = horizon - c[K - 1]
    np.add.at(occ, p[:K], h)
    first_visit[sites] = c[first + 1]
    nvis += int(sites.size)
    ist[0] = p[last_arrival]
    ist[1] = nvis
    fst[0] = horizon if truncated else c[K]
    return K, done


def walk_skeleton(nbr, ist, fst, visits, site, level, dirs, holds):
    pos, di, hi = int(ist[0]), int(ist[1]), int(ist[2])
    d = dirs[di:]
    nd = d.shape[0]
    if nd == 0:
        return 0
    l0 = float(fst[0])
    p = _path(nbr, pos, d)
    at_site = np.flatnonzero(p[:nd] == site)
    avail = holds.shape[0] - hi
    L = nd
    if at_site.size > avail:
        L = int(at_site[avail])
        at_site = at_site[:avail]
    c = _seqsum(l0, holds[hi:hi + at_site.size])[1:]
    over = np.flatnonzero(c > level)
    if over.size:
        j = int(over[0])
        K = int(at_site[j])
        np.add.at(visits, p[:K], 1)
        visits[site] += 1
        ist[0] = site
        ist[1] = di + K
        ist[2] = hi + j + 1
        fst[0] = level
        return 1
    np.add.at(visits, p[:L], 1)
    ist[0] = p[L]
    ist[1] = di + L
    ist[2] = hi + at_site.size
    if at_site.size:
        fst[0] = c[-1]
    return 0


def excursion_scan(nbr, bits, nlev, center, site, mode, param, ist, fst,
                   lev_state, counts, durations, deep, dirs, holds):
    pending = int(ist[1])
    top, deep_active = int(ist[2]), int(ist[3])
    ndur, ndeep = int(ist[4]), int(ist[5])
    prev, deep_cur, site_lt = float(fst[1]), float(fst[2]), float(fst[3])
    n = dirs.shape[0]
    n0 = int(param)
    p = _path(nbr, int(ist[0]), dirs)
    c = _seqsum(float(fst[0]), holds)
    pb = bits[p]
    kstop = n
    if mode == FIXED:
        over = np.flatnonzero(c[1:] >= param)
        if over.size:
            kstop = int(over[0])
    # only arrivals on a boundary and holdings at center/site change state
    ev = pb != 0
    ev[:n] |= (p[:n] == center) | (p[:n] == site)
    ev[kstop] = True
    if not pending:
        ev[0] = ev[0] and (p[0] == center or p[0] == site or kstop == 0)
    status, k_used, el, cur = NEED, n, c[n], int(p[n])
    for k in np.flatnonzero(ev[:kstop + 1]):
        k = int(k)
        here = int(p[k])
        if (k > 0 or pending) and pb[k]:
            if ndur >= durations.shape[0] or ndeep >= deep.shape[0]:
                status, k_used, el, cur, pending = FULL, k, c[k], here, 1
                break
            b = int(pb[k])
            for l in range(nlev):
                if lev_state[l] == 0 and (b >> (l + 1)) & 1:
                    lev_state[l] = 1
                    if l == 0:
                        if top > 0:
                            durations[ndur] = c[k] - prev
                            ndur += 1
                        prev = c[k]
                        top += 1
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
            if mode == BUDGET and top == n0 + 1:
                status, k_used, el, cur, pending = DONE, k, c[k], here, 0
                break
        if k == n:
            break
        h = holds[k]
        if mode == FIXED and k == kstop:
            trunc = param - c[k]
            if here == site:
                site_lt += trunc
            if here == center and deep_active:
                deep_cur += trunc
            status, k_used, el, cur, pending = DONE, k + 1, param, here, 0
            break
        if mode == INVLT and here == site and site_lt + h > param:
            trunc = param - site_lt
            site_lt = param
            if here == center and deep_active:
                deep_cur += trunc
            status, k_used, el, cur, pending = DONE, k + 1, c[k] + trunc, here, 0
            break
        if here == site:
            site_lt = site_lt + h
        if here == center and deep_active:
            deep_cur = deep_cur + h
    if status == NEED:
        pending = 0
    ist[0] = cur
    ist[1] = pending
    ist[2] = top
    ist[3] = deep_active
    ist[4] = ndur
    ist[5] = ndeep
    ist[6] = k_used
    fst[0] = el
    fst[1] = prev
    fst[2] = deep_cur
    fst[3] = site_lt
    return status


def census_scan(N, traj, off_i, off_j, off_bits, nlev, active, done,
                lev_state, counts, taus, n0):
    ring = np.zeros(N * N, dtype=np.uint32)
    ring[off_i * N + off_j] = off_bits
    ti, tj = np.divmod(np.asarray(traj, dtype=np.int64), N)
    for x in np.flatnonzero(active.astype(bool) & ~done.astype(bool)):
        x = int(x)
        xi, xj = divmod(x, N)
        b = ring[((ti - xi) % N) * N + (tj - xj) % N]
        base = x * nlev
        st = lev_state[base:base + nlev]
        ct = counts[base:base + nlev]
        for k in np.flatnonzero(b):
            bk = int(b[k])
            for l in range(nlev):
                if st[l] == 0 and (bk >> (l + 1)) & 1:
                    st[l] = 1
                    if l == 0:
                        taus[x] += 1
                elif st[l] == 1 and (bk >> l) & 1:
                    st[l] = 0
                    ct[l] += 1
            if taus[x] == n0 + 1:
                done[x] = 1
                break
