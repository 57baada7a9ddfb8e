"""Compiled inner loops.

All kernels draw their uniforms straight from a ``numpy.random.Generator``
(numba supports ``gen.random()`` in nopython mode) and reject exact zeros, so
every engine consumes exactly the same stream for the same path: one accepted
draw per split. That is what makes pathwise coupling across kernels exact.

Heap layout: a binary max-heap in ``heap[0:size]``. A split replaces the root by
the larger child (sift down) and pushes the smaller child (sift up). Writing
``-1`` into ``heap[size]`` lets the sift-down compare two children without a
bounds branch.
"""
import math

import numba as nb
import numpy as np

LN2 = math.log(2.0)
S0 = 8.0 * LN2 - 5.0
TINY = 1e-300

# weight codes for registrations
W_ONE = 0
W_R = 1       # g(x) = 1 - 2x
W_HALF = 2    # g(x) = 1{x <= 1/2}
W_ID = 3      # g(x) = x
W_SLAB = 4    # g(x) = -w(1/(2x)): on the window (t, 2t] this is -w(t/L)

# istate slots
I_SIZE, I_STEP, I_THR, I_DEGEN, I_DRAWS = 0, 1, 2, 3, 4
# fstate slots
F_MIN, F_RECIP = 0, 1


@nb.njit(cache=True, nogil=True)
def draw(gen, counter):
    u = gen.random()
    counter[0] += 1
    while u == 0.0:
        u = gen.random()
        counter[0] += 1
    return u


@nb.njit(cache=True, nogil=True)
def w_fn(t):
    if t <= 0.5 or t >= 1.0:
        return 0.0
    return 2.0 + (7.0 - 8.0 * LN2) / t - 8.0 * math.log(t) / t - 4.0 / (t * t)


@nb.njit(cache=True, nogil=True)
def weight(code, x):
    if code == W_ONE:
        return 1.0
    if code == W_R:
        return 1.0 - 2.0 * x
    if code == W_HALF:
        return 1.0 if x <= 0.5 else 0.0
    if code == W_ID:
        return x
    return -w_fn(0.5 / x)


@nb.njit(cache=True, nogil=True)
def _heap_split(heap, size, a, b):
    """Pop the root, insert b (larger) in its place and push a. Returns new size."""
    heap[size] = -1.0
    i = 0
    while True:
        c = 2 * i + 1
        if c >= size:
            break
        c += heap[c + 1] > heap[c]
        hc = heap[c]
        if hc <= b:
            break
        heap[i] = hc
        i = c
    heap[i] = b
    i = size
    while i > 0:
        par = (i - 1) >> 1
        if heap[par] >= a:
            break
        heap[i] = heap[par]
        i = par
    heap[i] = a
    return size + 1


@nb.njit(cache=True, nogil=True)
def _heap_split_pos(heap, lefts, size, a, la, b, lb):
    """As _heap_split, carrying left endpoints alongside."""
    heap[size] = -1.0
    i = 0
    while True:
        c = 2 * i + 1
        if c >= size:
            break
        c += heap[c + 1] > heap[c]
        hc = heap[c]
        if hc <= b:
            break
        heap[i] = hc
        lefts[i] = lefts[c]
        i = c
    heap[i] = b
    lefts[i] = lb
    i = size
    while i > 0:
        par = (i - 1) >> 1
        if heap[par] >= a:
            break
        heap[i] = heap[par]
        lefts[i] = lefts[par]
        i = par
    heap[i] = a
    lefts[i] = la
    return size + 1


@nb.njit(cache=True, nogil=True)
def _reg_update(L, sign, reg_s, reg_t, reg_code, reg_count, reg_sum):
    for r in range(reg_s.shape[0]):
        if reg_s[r] < L <= reg_t[r]:
            reg_count[r] += sign
            reg_sum[r] += sign * weight(reg_code[r], L / reg_t[r])


@nb.njit(cache=True, nogil=True)
def _thr_update(top, ist, thr, thr_times):
    p = ist[I_THR]
    while p < thr.shape[0] and top <= thr[p]:
        thr_times[p] = ist[I_STEP]
        p += 1
    ist[I_THR] = p


@nb.njit(cache=True, nogil=True)
def evolve(heap, lefts, positional, ist, fst, n_steps, gen, us, use_gen, stop_below,
           traj, record_traj, thr, thr_times, reg_s, reg_t, reg_code, reg_count, reg_sum):
    """Advance a partition by up to ``n_steps`` splits.

    Stops early once the maximum is <= ``stop_below`` or a gap underflows.
    ``heap`` (and ``lefts``) must have room for ``size + n_steps + 1`` entries;
    ``traj`` for index ``step + n_steps``. ``thr`` is sorted descending.
    Returns the number of splits performed.
    """
    counter = ist[I_DRAWS:I_DRAWS + 1]
    _thr_update(heap[0], ist, thr, thr_times)
    done = 0
    while done < n_steps:
        m = heap[0]
        if m <= stop_below:
            break
        if use_gen:
            u = draw(gen, counter)
        else:
            u = us[done]
        size = ist[I_SIZE]
        x0 = lefts[0] if positional else 0.0
        left_len = u * m
        right_len = (1.0 - u) * m
        fst[F_RECIP] += 1.0 / m
        if right_len < left_len:
            a, b = right_len, left_len
            la, lb = x0 + left_len, x0
        else:
            a, b = left_len, right_len
            la, lb = x0, x0 + left_len
        if positional:
            size = _heap_split_pos(heap, lefts, size, a, la, b, lb)
        else:
            size = _heap_split(heap, size, a, b)
        ist[I_SIZE] = size
        ist[I_STEP] += 1
        done += 1
        if a < fst[F_MIN]:
            fst[F_MIN] = a
        if reg_s.shape[0] > 0:
            _reg_update(m, -1, reg_s, reg_t, reg_code, reg_count, reg_sum)
            _reg_update(a, 1, reg_s, reg_t, reg_code, reg_count, reg_sum)
            _reg_update(b, 1, reg_s, reg_t, reg_code, reg_count, reg_sum)
        if record_traj:
            traj[ist[I_STEP]] = heap[0]
        _thr_update(heap[0], ist, thr, thr_times)
        if a < TINY:
            ist[I_DEGEN] = 1
            break
    return done


# ---------------------------------------------------------------- batch kernels

@nb.njit(cache=True, nogil=True)
def batch_extremes(gen, n, paths, out_max, out_min, out_recip, counter):
    """M_n, m_n and sum_{j<n} 1/M_j for ``paths`` consecutive paths."""
    heap = np.empty(n + 2)
    for p in range(paths):
        heap[0] = 1.0
        size = 1
        mn = 1.0
        rs = 0.0
        for _ in range(n):
            m = heap[0]
            u = draw(gen, counter)
            rs += 1.0 / m
            a = u * m
            b = (1.0 - u) * m
            if a > b:
                a, b = b, a
            if a < mn:
                mn = a
            size = _heap_split(heap, size, a, b)
        out_max[p] = heap[0]
        out_min[p] = mn
        out_recip[p] = rs
    return 0


@nb.njit(cache=True, nogil=True)
def batch_thresholds(gen, thr_desc, paths, out_times, counter):
    """N_t for each t in ``thr_desc`` (descending, > 0) on consecutive paths."""
    nthr = thr_desc.shape[0]
    tmin = thr_desc[nthr - 1]
    cap = int(4.0 / tmin) + 64
    heap = np.empty(cap)
    for p in range(paths):
        heap[0] = 1.0
        size = 1
        step = 0
        k = 0
        while k < nthr and heap[0] <= thr_desc[k]:
            out_times[p, k] = 0
            k += 1
        while k < nthr:
            if size + 2 >= heap.shape[0]:
                bigger = np.empty(2 * heap.shape[0])
                bigger[:size] = heap[:size]
                heap = bigger
            m = heap[0]
            u = draw(gen, counter)
            a = u * m
            b = (1.0 - u) * m
            if a > b:
                a, b = b, a
            size = _heap_split(heap, size, a, b)
            step += 1
            while k < nthr and heap[0] <= thr_desc[k]:
                out_times[p, k] = step
                k += 1
    return 0


@nb.njit(cache=True, nogil=True)
def batch_registered(gen, n, paths, reg_s, reg_t, reg_code, out_count, out_sum,
                     out_max, out_min, counter):
    """Run paths to step n keeping all registered window statistics."""
    heap = np.empty(n + 2)
    nreg = reg_s.shape[0]
    cnt = np.zeros(nreg, dtype=np.int64)
    sm = np.zeros(nreg)
    for p in range(paths):
        heap[0] = 1.0
        size = 1
        mn = 1.0
        cnt[:] = 0
        sm[:] = 0.0
        _reg_update(1.0, 1, reg_s, reg_t, reg_code, cnt, sm)
        for _ in range(n):
            m = heap[0]
            u = draw(gen, counter)
            a = u * m
            b = (1.0 - u) * m
            if a > b:
                a, b = b, a
            if a < mn:
                mn = a
            size = _heap_split(heap, size, a, b)
            _reg_update(m, -1, reg_s, reg_t, reg_code, cnt, sm)
            _reg_update(a, 1, reg_s, reg_t, reg_code, cnt, sm)
            _reg_update(b, 1, reg_s, reg_t, reg_code, cnt, sm)
        out_count[p, :] = cnt
        out_sum[p, :] = sm
        out_max[p] = heap[0]
        out_min[p] = mn
    return 0


@nb.njit(cache=True, nogil=True)
def batch_trajectory_theta(gen, n, paths, s, t, out_direct, out_oracle, counter):
    """Direct K_n(s,t] and one theta-oracle draw per path.

    Each path draws its n splitting uniforms, then n more uniforms for the
    Bernoulli(2(t-s)/M_i) marks against its own max trajectory.
    """
    heap = np.empty(n + 2)
    traj = np.empty(n)
    width = 2.0 * (t - s)
    for p in range(paths):
        heap[0] = 1.0
        size = 1
        k = 0
        for i in range(n):
            m = heap[0]
            traj[i] = m
            u = draw(gen, counter)
            a = u * m
            b = (1.0 - u) * m
            if a > b:
                a, b = b, a
            size = _heap_split(heap, size, a, b)
        for i in range(size):
            if s < heap[i] <= t:
                k += 1
        out_direct[p] = k
        kk = 0
        for i in range(n):
            if draw(gen, counter) < width / traj[i]:
                kk += 1
        out_oracle[p] = kk
    return 0


@nb.njit(cache=True, nogil=True)
def theta_from_traj(gen, traj, s, t, reps, out, counter):
    """``reps`` draws of sum_i Bernoulli(2(t-s)/M_i) for a fixed trajectory."""
    width = 2.0 * (t - s)
    for r in range(reps):
        kk = 0
        for i in range(traj.shape[0]):
            if draw(gen, counter) < width / traj[i]:
                kk += 1
        out[r] = kk
    return 0


@nb.njit(cache=True, nogil=True)
def batch_dirichlet(gen, n, paths, out_max, out_min, counter):
    """Length-biased splitting: drop n uniform points into [0,1]."""
    pts = np.empty(n + 2)
    for p in range(paths):
        pts[0] = 0.0
        pts[1] = 1.0
        size = 2
        for _ in range(n):
            x = draw(gen, counter)
            j = size
            while pts[j - 1] > x:
                pts[j] = pts[j - 1]
                j -= 1
            pts[j] = x
            size += 1
        mx = 0.0
        mn = 1.0
        for i in range(size - 1):
            g = pts[i + 1] - pts[i]
            if g > mx:
                mx = g
            if g < mn:
                mn = g
        out_max[p] = mx
        out_min[p] = mn
    return 0


@nb.njit(cache=True, nogil=True)
def selfsimilar(gen, t, cap, counter):
    """N_t from the recursion N_t = N'_{t/U} + N''_{t/(1-U)} + 1 (0 for t >= 1).

    Returns -1 if more than ``cap`` internal nodes would be visited.
    """
    if t >= 1.0:
        return 0
    stack = np.empty(64)
    stack[0] = t
    sp = 1
    nodes = 0
    while sp > 0:
        sp -= 1
        x = stack[sp]
        nodes += 1
        if nodes > cap:
            return -1
        u = draw(gen, counter)
        if sp + 2 > stack.shape[0]:
            bigger = np.empty(2 * stack.shape[0])
            bigger[:sp] = stack[:sp]
            stack = bigger
        y = x / u
        if y < 1.0:
            stack[sp] = y
            sp += 1
        y = x / (1.0 - u)
        if y < 1.0:
            stack[sp] = y
            sp += 1
    return nodes


@nb.njit(cache=True, nogil=True)
def batch_selfsimilar(gen, t, cap, out, counter):
    for i in range(out.shape[0]):
        out[i] = selfsimilar(gen, t, cap, counter)
    return 0


@nb.njit(cache=True, nogil=True)
def _minheap_split(heap, size, a, b):
    """Min-heap twin of _heap_split: pop the root, sift a (smaller) down, push b."""
    heap[size] = np.inf
    i = 0
    while True:
        c = 2 * i + 1
        if c >= size:
            break
        c += heap[c + 1] < heap[c]
        hc = heap[c]
        if hc >= a:
            break
        heap[i] = hc
        i = c
    heap[i] = a
    i = size
    while i > 0:
        par = (i - 1) >> 1
        if heap[par] <= b:
            break
        heap[i] = heap[par]
        i = par
    heap[i] = b
    return size + 1


@nb.njit(cache=True, nogil=True)
def brw_direct(gen, n, counter):
    """Extremum-driven branching random walk on log(1/length) positions.

    The leftmost particle at x is replaced by x - log U and x - log(1 - U).
    Returns (leftmost, rightmost) after n branching events.
    """
    heap = np.empty(n + 2)
    heap[0] = 0.0
    size = 1
    right = 0.0
    for _ in range(n):
        x = heap[0]
        u = draw(gen, counter)
        pa = x - math.log(u)
        pb = x - math.log(1.0 - u)
        if pa > pb:
            pa, pb = pb, pa
        if pb > right:
            right = pb
        size = _minheap_split(heap, size, pa, pb)
    return heap[0], right


@nb.njit(cache=True, nogil=True)
def parking_direct(gen, x, counter):
    """Zero-length cars at Unif(0,x) park iff the gap they land in exceeds 1."""
    cap = int(4.0 * x) + 64
    pts = np.empty(cap)
    pts[0] = 0.0
    pts[1] = x
    size = 2
    big = 1 if x > 1.0 else 0  # number of gaps longer than 1
    parked = 0
    while big > 0:
        y = x * draw(gen, counter)
        lo = 0
        hi = size - 1
        while hi - lo > 1:
            mid = (lo + hi) >> 1
            if pts[mid] <= y:
                lo = mid
            else:
                hi = mid
        g = pts[hi] - pts[lo]
        if g <= 1.0:
            continue
        if size + 1 >= pts.shape[0]:
            bigger = np.empty(2 * pts.shape[0])
            bigger[:size] = pts[:size]
            pts = bigger
        for j in range(size, hi, -1):
            pts[j] = pts[j - 1]
        pts[hi] = y
        size += 1
        parked += 1
        big -= 1
        if y - pts[lo] > 1.0:
            big += 1
        if pts[hi + 1] - y > 1.0:
            big += 1
    return parked


@nb.njit(cache=True, nogil=True)
def batch_conditional(gen, n, paths, t, out, out_min, counter):
    """Per path: K_t, sum_{L<=t}(1-2L/t), sum_{L<=t} L/t, K(t,2t], sum_{(t,2t]} -w(t/L).

    Only valid when 4 n t < 1: then every split gap exceeds 2t and so does the
    larger child, so only the smaller child can land in (0, 2t].
    """
    heap = np.empty(n + 2)
    t2 = 2.0 * t
    for p in range(paths):
        heap[0] = 1.0
        size = 1
        mn = 1.0
        k1 = 0
        r = 0.0
        sid = 0.0
        k2 = 0
        ws = 0.0
        for _ in range(n):
            m = heap[0]
            u = draw(gen, counter)
            a = u * m
            b = (1.0 - u) * m
            if a > b:
                a, b = b, a
            if a < mn:
                mn = a
            if a <= t2:
                x = a / t
                if a <= t:
                    k1 += 1
                    r += 1.0 - 2.0 * x
                    sid += x
                else:
                    k2 += 1
                    ws -= w_fn(1.0 / x)
            size = _heap_split(heap, size, a, b)
        out[p, 0] = k1
        out[p, 1] = r
        out[p, 2] = sid
        out[p, 3] = k2
        out[p, 4] = ws
        out_min[p] = mn
    return 0
