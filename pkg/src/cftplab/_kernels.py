"""Compiled inner loops for sweeps and coupling from the past.

A window is handed to the kernels as a flat tuple ``W`` (see
``cftp.compile_window``).  States are uint8 arrays over the window's
interior holding spin positions: 0 is the minimal spin, 1 the maximal one.

Arrays are pulled out of ``W`` once per sweep and passed explicitly to the
per-model loops; pulling them out per update costs more than the update.
"""
import numpy as np
from numba import njit

from .rng import STREAM_A, STREAM_B, digit, uniform

TOL = 1e-12

# layout of the window tuple
(W_SITES, W_KIND, W_FINITE, W_ALPHA, W_NBR_PTR, W_NBR_IDX, W_NBR_J, W_H_EXT, W_EX, W_EY,
 W_INC_PTR, W_INC_IDX, W_GHOST, W_PROBS, W_USE_GHOST, W_REAL, W_D, W_SHELL_PTR, W_SHELL_IDX,
 W_DEPTH, W_NV) = range(21)


@njit(cache=True, nogil=True)
def _sort_segment(perm, lo, hi, val, tmp):
    """Stable sort of ``perm[lo:hi]`` by ``val[perm[.]]`` without allocating."""
    n = hi - lo
    if n < 2:
        return
    if n <= 24:
        for a in range(lo + 1, hi):
            x = perm[a]
            vx = val[x]
            b = a - 1
            while b >= lo and val[perm[b]] > vx:
                perm[b + 1] = perm[b]
                b -= 1
            perm[b + 1] = x
        return
    width = 1
    src_is_perm = True
    while width < n:
        for start in range(0, n, 2 * width):
            mid = min(start + width, n)
            end = min(start + 2 * width, n)
            i, j, k = start, mid, start
            while i < mid and j < end:
                if src_is_perm:
                    pi, pj = perm[lo + i], perm[lo + j]
                else:
                    pi, pj = tmp[i], tmp[j]
                if val[pj] < val[pi]:
                    if src_is_perm:
                        tmp[k] = pj
                    else:
                        perm[lo + k] = pj
                    j += 1
                else:
                    if src_is_perm:
                        tmp[k] = pi
                    else:
                        perm[lo + k] = pi
                    i += 1
                k += 1
            while i < mid:
                if src_is_perm:
                    tmp[k] = perm[lo + i]
                else:
                    perm[lo + k] = tmp[i]
                i += 1
                k += 1
            while j < end:
                if src_is_perm:
                    tmp[k] = perm[lo + j]
                else:
                    perm[lo + k] = tmp[j]
                j += 1
                k += 1
        src_is_perm = not src_is_perm
        width *= 2
    if not src_is_perm:
        for a in range(n):
            perm[lo + a] = tmp[a]


@njit(cache=True, nogil=True)
def _real_order(key, t, sites, perm, z, tmp):
    m = sites.shape[0]
    for i in range(m):
        z[i] = uniform(key, sites[i], t, STREAM_B)
        perm[i] = i
    if m <= 24:
        for a in range(1, m):
            x = perm[a]
            vx = z[x]
            b = a - 1
            while b >= 0 and z[perm[b]] > vx:
                perm[b + 1] = perm[b]
                b -= 1
            perm[b + 1] = x
    else:
        _sort_segment(perm, 0, m, z, tmp)
    ties = 0
    for j in range(1, m):
        if z[perm[j]] == z[perm[j - 1]]:
            ties += 1
    return ties


@njit(cache=True, nogil=True)
def _digit_order(key, t, sites, D, shell_ptr, shell_idx, stride, depth, perm, brk, z, tmp):
    """Sort by shell-sum sequences, refining tied runs one shell at a time.

    Returns the number of site pairs still tied after ``depth`` shells; those
    keep increasing site order.
    """
    m = sites.shape[0]
    for i in range(m):
        z[i] = digit(key, sites[i], t, D)
        perm[i] = i
    _sort_segment(perm, 0, m, z, tmp)
    for j in range(m):
        brk[j] = j == 0 or z[perm[j]] != z[perm[j - 1]]
    brk[m] = True
    for k in range(1, depth + 1):
        open_runs = False
        j = 0
        while j < m:
            e = j + 1
            while not brk[e]:
                e += 1
            if e - j > 1:
                open_runs = True
                for q in range(j, e):
                    i = perm[q]
                    base = i * stride + k
                    s = 0
                    for c in range(shell_ptr[base], shell_ptr[base + 1]):
                        s += digit(key, shell_idx[c], t, D)
                    z[i] = s
                _sort_segment(perm, j, e, z, tmp)
                for q in range(j + 1, e):
                    brk[q] = z[perm[q]] != z[perm[q - 1]]
            j = e
        if not open_runs:
            break
    ties = 0
    j = 0
    while j < m:
        e = j + 1
        while not brk[e]:
            e += 1
        ties += (e - j) * (e - j - 1) // 2
        j = e
    return ties


@njit(cache=True, nogil=True)
def window_order(W, key, t, scratch):
    """Update order of the window at time ``t`` into ``scratch[0]``; returns the tie count."""
    perm, brk, z, tmp = scratch[0], scratch[1], scratch[2], scratch[6]
    if W[W_REAL]:
        return _real_order(key, t, W[W_SITES], perm, z, tmp)
    return _digit_order(key, t, W[W_SITES], W[W_D], W[W_SHELL_PTR], W[W_SHELL_IDX],
                        W[W_DEPTH] + 1, W[W_DEPTH], perm, brk, z, tmp)


@njit(cache=True, nogil=True)
def _reach(src, target, skip, state, ex, ey, inc_ptr, inc_idx, ghost, use_ghost, visited, mark, queue):
    # 1: target reached, 2: a ghost vertex reached, 0: neither
    visited[src] = mark
    queue[0] = src
    head, tail = 0, 1
    while head < tail:
        a = queue[head]
        head += 1
        if a == target:
            return 1
        if use_ghost and ghost[a]:
            return 2
        for c in range(inc_ptr[a], inc_ptr[a + 1]):
            f = inc_idx[c]
            if f == skip or state[f] == 0:
                continue
            b = ey[f] if ex[f] == a else ex[f]
            if visited[b] != mark:
                visited[b] = mark
                queue[tail] = b
                tail += 1
    return 0


@njit(cache=True, nogil=True)
def _threshold(key, site, t, finite, A):
    u = uniform(key, site, t, STREAM_A)
    if finite:
        return A[np.searchsorted(A, u)] - TOL
    return u


@njit(cache=True, nogil=True)
def _rc_min_prob(i, state, ex, ey, inc_ptr, inc_idx, ghost, use_ghost, probs, visited, mark, queue):
    mark[0] += 1
    r = _reach(ex[i], ey[i], i, state, ex, ey, inc_ptr, inc_idx, ghost, use_ghost, visited, mark[0], queue)
    if r == 2:
        mark[0] += 1
        r2 = _reach(ey[i], -1, i, state, ex, ey, inc_ptr, inc_idx, ghost, use_ghost, visited, mark[0], queue)
        r = 1 if r2 == 2 else 0
    return probs[0] if r == 1 else probs[1]


@njit(cache=True, nogil=True)
def _field_min_prob(i, state, nbr_ptr, nbr_idx, nbr_J, h_ext):
    h = h_ext[i]
    for c in range(nbr_ptr[i], nbr_ptr[i + 1]):
        h += nbr_J[c] * (2.0 * state[nbr_idx[c]] - 1.0)
    return 1.0 / (1.0 + np.exp(2.0 * h))


@njit(cache=True, nogil=True)
def _sweep_rc(key, t, perm, state, sites, finite, A, ex, ey, inc_ptr, inc_idx, ghost, use_ghost, probs,
              visited, mark, queue):
    # the connectivity search is written out here: a helper call per update
    # costs more than the search itself on small windows
    stamp = mark[0]
    for j in range(sites.shape[0]):
        i = perm[j]
        u = uniform(key, sites[i], t, STREAM_A)
        thresh = A[np.searchsorted(A, u)] - TOL if finite else u
        connected = False
        src, target = ex[i], ey[i]
        for phase in range(2):
            stamp += 1
            visited[src] = stamp
            queue[0] = src
            head, tail = 0, 1
            found = 0  # 1: target reached, 2: ghost reached
            while head < tail:
                a = queue[head]
                head += 1
                if a == target:
                    found = 1
                    break
                if use_ghost and ghost[a]:
                    found = 2
                    break
                for c in range(inc_ptr[a], inc_ptr[a + 1]):
                    f = inc_idx[c]
                    if f == i or state[f] == 0:
                        continue
                    b = ey[f] if ex[f] == a else ex[f]
                    if visited[b] != stamp:
                        visited[b] = stamp
                        queue[tail] = b
                        tail += 1
            if phase == 0:
                if found == 1:
                    connected = True
                if found != 2:
                    break
                # x meets the boundary: connected iff y does too
                src, target = ey[i], -1
            else:
                connected = found == 2
        c = probs[0] if connected else probs[1]
        state[i] = 0 if c >= thresh else 1
    mark[0] = stamp


@njit(cache=True, nogil=True)
def _sweep_field(key, t, perm, state, sites, finite, A, nbr_ptr, nbr_idx, nbr_J, h_ext):
    for j in range(sites.shape[0]):
        i = perm[j]
        u = uniform(key, sites[i], t, STREAM_A)
        thresh = A[np.searchsorted(A, u)] - TOL if finite else u
        h = h_ext[i]
        for c in range(nbr_ptr[i], nbr_ptr[i + 1]):
            h += nbr_J[c] * (2.0 * state[nbr_idx[c]] - 1.0)
        state[i] = 0 if 1.0 / (1.0 + np.exp(2.0 * h)) >= thresh else 1


@njit(cache=True, nogil=True)
def sweep(W, key, t, state, scratch):
    """One sweep at time ``t`` in the order held in ``scratch[0]``, in place."""
    if W[W_KIND] == 0:
        _sweep_field(key, t, scratch[0], state, W[W_SITES], W[W_FINITE], W[W_ALPHA],
                     W[W_NBR_PTR], W[W_NBR_IDX], W[W_NBR_J], W[W_H_EXT])
    else:
        _sweep_rc(key, t, scratch[0], state, W[W_SITES], W[W_FINITE], W[W_ALPHA], W[W_EX], W[W_EY],
                  W[W_INC_PTR], W[W_INC_IDX], W[W_GHOST], W[W_USE_GHOST], W[W_PROBS],
                  scratch[3], scratch[4], scratch[5])


@njit(cache=True, nogil=True)
def make_scratch(W):
    m = W[W_SITES].shape[0]
    nv = max(W[W_NV], 1)
    return (np.empty(max(m, 1), dtype=np.int64), np.empty(m + 1, dtype=np.bool_), np.empty(max(m, 1)),
            np.zeros(nv, dtype=np.int64), np.zeros(1, dtype=np.int64), np.empty(nv, dtype=np.int64),
            np.empty(max(m, 1), dtype=np.int64))


@njit(cache=True, nogil=True)
def min_prob(W, state, i):
    """Conditional probability of the minimal spin at local site ``i``."""
    s = make_scratch(W)
    if W[W_KIND] == 0:
        return _field_min_prob(i, state, W[W_NBR_PTR], W[W_NBR_IDX], W[W_NBR_J], W[W_H_EXT])
    return _rc_min_prob(i, state, W[W_EX], W[W_EY], W[W_INC_PTR], W[W_INC_IDX], W[W_GHOST],
                        W[W_USE_GHOST], W[W_PROBS], s[3], s[4], s[5])


@njit(cache=True, nogil=True)
def trajectory(W, key, n, starts, out):
    """Record every intermediate state of ``f_n`` applied to each start row.

    ``out[j]`` holds the states after the sweeps of times ``n, ..., n-j+1``.
    """
    s = make_scratch(W)
    states = starts.copy()
    out[0] = states
    for j in range(1, n + 1):
        t = n - j + 1
        window_order(W, key, t, s)
        for r in range(states.shape[0]):
            sweep(W, key, t, states[r], s)
        out[j] = states


@njit(cache=True, nogil=True)
def order_of(W, key, t):
    s = make_scratch(W)
    ties = window_order(W, key, t, s)
    return s[0][:W[W_SITES].shape[0]].copy(), ties


@njit(cache=True, nogil=True)
def _cftp_one(W, key, cap, out, s, top, bot):
    m = W[W_SITES].shape[0]
    n = 1
    ties = 0
    while n <= cap:
        top[:] = 1
        bot[:] = 0
        merged = m == 0
        for t in range(n, 0, -1):
            ties += window_order(W, key, t, s)
            sweep(W, key, t, top, s)
            if not merged:
                sweep(W, key, t, bot, s)
                merged = True
                for i in range(m):
                    if top[i] != bot[i]:
                        merged = False
                        break
        if merged:
            out[:] = top
            return n, ties
        n *= 2
    return -1, ties


@njit(cache=True, nogil=True)
def cftp_batch(W, keys, cap, out, horizons, ties):
    """Monotone CFTP for each key; horizon -1 marks a replica that hit the cap."""
    s = make_scratch(W)
    m = W[W_SITES].shape[0]
    top = np.empty(m, dtype=np.uint8)
    bot = np.empty(m, dtype=np.uint8)
    for r in range(keys.shape[0]):
        h, tc = _cftp_one(W, keys[r], cap, out[r], s, top, bot)
        horizons[r] = h
        ties[r] = tc


@njit(cache=True, nogil=True)
def run_batch(W, keys, n, start, out, ties):
    """``f_n`` applied to the constant configuration ``start`` for each key."""
    s = make_scratch(W)
    for r in range(keys.shape[0]):
        st = out[r]
        st[:] = start
        tc = 0
        for t in range(n, 0, -1):
            tc += window_order(W, keys[r], t, s)
            sweep(W, keys[r], t, st, s)
        ties[r] = tc


@njit(cache=True, nogil=True)
def pair_center_batch(Wp, Wm, keys, n, cp, cm, out_p, out_m, ties):
    """Centre spins of ``f_n`` from all-max in ``Wp`` and from all-min in ``Wm``."""
    sp = make_scratch(Wp)
    sm = make_scratch(Wm)
    top = np.empty(Wp[W_SITES].shape[0], dtype=np.uint8)
    bot = np.empty(Wm[W_SITES].shape[0], dtype=np.uint8)
    for r in range(keys.shape[0]):
        top[:] = 1
        bot[:] = 0
        tc = 0
        for t in range(n, 0, -1):
            tc += window_order(Wp, keys[r], t, sp)
            sweep(Wp, keys[r], t, top, sp)
            tc += window_order(Wm, keys[r], t, sm)
            sweep(Wm, keys[r], t, bot, sm)
        out_p[r] = top[cp]
        out_m[r] = bot[cm]
        ties[r] = tc


@njit(cache=True, nogil=True)
def orders_resolved_batch(W, keys, n, depth, out):
    """Whether every pair of window sites is separated within ``depth``
    shells, for the labels of each time ``0..n``."""
    s = make_scratch(W)
    for r in range(keys.shape[0]):
        ok = True
        for t in range(n + 1):
            if _digit_order(keys[r], t, W[W_SITES], W[W_D], W[W_SHELL_PTR], W[W_SHELL_IDX],
                            W[W_DEPTH] + 1, depth, s[0], s[1], s[2], s[6]) > 0:
                ok = False
                break
        out[r] = ok


@njit(cache=True, nogil=True)
def pair_order_radius_batch(keys, u_ptr, u_shells, v_ptr, v_shells, D, out):
    """First shell index where the digit sums around two sites differ, -1 if none."""
    K = u_ptr.shape[0] - 1
    for r in range(keys.shape[0]):
        res = -1
        for k in range(K):
            a = 0
            for c in range(u_ptr[k], u_ptr[k + 1]):
                a += digit(keys[r], u_shells[c], 0, D)
            b = 0
            for c in range(v_ptr[k], v_ptr[k + 1]):
                b += digit(keys[r], v_shells[c], 0, D)
            if a != b:
                res = k
                break
        out[r] = res


@njit(cache=True, nogil=True)
def fused_pair_batch(W, keys, n, center, out_p, out_m, ties):
    """Centre spins of ``f_n`` on one set of sites under both boundary modes.

    ``W`` must be compiled in plus mode.  Chain 0 starts all-max under the
    plus boundary, chain 1 all-min under the minus boundary: for the
    random-cluster model the minus chain ignores the ghost, for pair-field
    models it flips the sign of the exterior field.  Both chains share the
    update order of each time step, as the two windows have the same sites.
    Everything is written out in one body to avoid per-call overheads.
    """
    sites = W[W_SITES]
    m = sites.shape[0]
    kind = W[W_KIND]
    finite = W[W_FINITE]
    A = W[W_ALPHA]
    nbr_ptr, nbr_idx, nbr_J, h_ext = W[W_NBR_PTR], W[W_NBR_IDX], W[W_NBR_J], W[W_H_EXT]
    ex, ey, inc_ptr, inc_idx, ghost, probs = W[W_EX], W[W_EY], W[W_INC_PTR], W[W_INC_IDX], W[W_GHOST], W[W_PROBS]
    real = W[W_REAL]
    s = make_scratch(W)
    perm, brk, z, visited, queue, tmp = s[0], s[1], s[2], s[3], s[5], s[6]
    states = np.empty((2, m), dtype=np.uint8)
    stamp = 0
    for r in range(keys.shape[0]):
        key = keys[r]
        states[0, :] = 1
        states[1, :] = 0
        tc = 0
        for t in range(n, 0, -1):
            if real:
                for i in range(m):
                    z[i] = uniform(key, sites[i], t, STREAM_B)
                    perm[i] = i
                if m <= 24:
                    for a in range(1, m):
                        x = perm[a]
                        vx = z[x]
                        b = a - 1
                        while b >= 0 and z[perm[b]] > vx:
                            perm[b + 1] = perm[b]
                            b -= 1
                        perm[b + 1] = x
                else:
                    _sort_segment(perm, 0, m, z, tmp)
            else:
                tc += _digit_order(key, t, sites, W[W_D], W[W_SHELL_PTR], W[W_SHELL_IDX],
                                   W[W_DEPTH] + 1, W[W_DEPTH], perm, brk, z, tmp)
            for j in range(m):
                i = perm[j]
                u = uniform(key, sites[i], t, STREAM_A)
                thresh = A[np.searchsorted(A, u)] - TOL if finite else u
                for ch in range(2):
                    state = states[ch]
                    if kind == 0:
                        h = h_ext[i] if ch == 0 else -h_ext[i]
                        for c in range(nbr_ptr[i], nbr_ptr[i + 1]):
                            h += nbr_J[c] * (2.0 * state[nbr_idx[c]] - 1.0)
                        cprob = 1.0 / (1.0 + np.exp(2.0 * h))
                    else:
                        use_ghost = ch == 0
                        connected = False
                        src, target = ex[i], ey[i]
                        for phase in range(2):
                            stamp += 1
                            visited[src] = stamp
                            queue[0] = src
                            head, tail = 0, 1
                            found = 0
                            while head < tail:
                                a = queue[head]
                                head += 1
                                if a == target:
                                    found = 1
                                    break
                                if use_ghost and ghost[a]:
                                    found = 2
                                    break
                                for c in range(inc_ptr[a], inc_ptr[a + 1]):
                                    f = inc_idx[c]
                                    if f == i or state[f] == 0:
                                        continue
                                    b = ey[f] if ex[f] == a else ex[f]
                                    if visited[b] != stamp:
                                        visited[b] = stamp
                                        queue[tail] = b
                                        tail += 1
                            if phase == 0:
                                if found == 1:
                                    connected = True
                                if found != 2:
                                    break
                                src, target = ey[i], -1
                            else:
                                connected = found == 2
                        cprob = probs[0] if connected else probs[1]
                    state[i] = 0 if cprob >= thresh else 1
        out_p[r] = states[0, center]
        out_m[r] = states[1, center]
        ties[r] = 2 * tc
