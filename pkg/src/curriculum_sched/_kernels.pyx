# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled scheduler kernels.

Every routine mirrors ``_pykernels`` operation for operation (sequential
sums, libm ``exp``, identical Fenwick arithmetic) so both backends return
bit-identical results for the same inputs.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp

cnp.import_array()


def categorical_draws(const double[::1] p, const double[::1] u):
    """Inverse-CDF categorical draws, one per uniform in ``u``."""
    cdef Py_ssize_t n = p.shape[0]
    cdef Py_ssize_t k = u.shape[0]
    cdef double[::1] cdf = np.empty(n, dtype=np.float64)
    cdef cnp.int64_t[::1] out = np.empty(k, dtype=np.int64)
    cdef double acc = 0.0
    cdef double target
    cdef Py_ssize_t i, j, lo, hi, mid, last_pos = -1
    for i in range(n):
        acc += p[i]
        cdf[i] = acc
        if p[i] > 0.0:
            last_pos = i
    if last_pos < 0:
        raise ValueError("all probabilities are zero")
    for j in range(k):
        target = u[j] * acc
        # first index with cdf > target (bisect_right)
        lo = 0
        hi = n
        while lo < hi:
            mid = (lo + hi) // 2
            if target < cdf[mid]:
                hi = mid
            else:
                lo = mid + 1
        if lo >= n:
            lo = last_pos
        out[j] = lo
    return np.asarray(out)


cdef inline double _prefix(double[::1] tree, Py_ssize_t n) nogil:
    cdef double s = 0.0
    cdef Py_ssize_t i = n
    while i > 0:
        s += tree[i]
        i -= i & (-i)
    return s


cdef inline void _add(double[::1] tree, Py_ssize_t n, Py_ssize_t pos, double delta) nogil:
    cdef Py_ssize_t i = pos + 1
    while i <= n:
        tree[i] += delta
        i += i & (-i)


cdef inline Py_ssize_t _search(double[::1] tree, Py_ssize_t n, Py_ssize_t top, double target) nogil:
    cdef Py_ssize_t pos = 0
    cdef Py_ssize_t step = top
    cdef Py_ssize_t nxt
    cdef double rem = target
    while step > 0:
        nxt = pos + step
        if nxt <= n and tree[nxt] <= rem:
            pos = nxt
            rem -= tree[nxt]
        step >>= 1
    return pos


cdef void _build(double[::1] tree, const double[::1] w, Py_ssize_t n) nogil:
    cdef Py_ssize_t i, j
    tree[0] = 0.0
    for i in range(1, n + 1):
        tree[i] = w[i - 1]
    for i in range(1, n + 1):
        j = i + (i & (-i))
        if j <= n:
            tree[j] += tree[i]


def weighted_permutation(const double[::1] p, const double[::1] u):
    """Successive weighted draws without replacement.

    Draw ``k`` consumes ``u[k]``. Once the positive mass is exhausted the
    zero-probability items follow in uniformly random order.
    """
    cdef Py_ssize_t n = p.shape[0]
    if u.shape[0] < n:
        raise ValueError("need one uniform per item")
    cdef double[::1] w = np.empty(n, dtype=np.float64)
    cdef double[::1] tree = np.empty(n + 1, dtype=np.float64)
    cdef cnp.int64_t[::1] out = np.empty(n, dtype=np.int64)
    cdef Py_ssize_t i, k, pos, top = 1
    cdef Py_ssize_t n_pos = 0
    cdef double total
    while top * 2 <= n:
        top *= 2
    for i in range(n):
        w[i] = p[i]
        if p[i] > 0.0:
            n_pos += 1
    if n_pos == 0:
        raise ValueError("all probabilities are zero")
    _build(tree, w, n)
    k = 0
    while k < n_pos:
        total = _prefix(tree, n)
        pos = _search(tree, n, top, u[k] * total)
        if pos >= n or w[pos] <= 0.0:
            pos = _nearest_live(w, n, pos)
        out[k] = pos
        _add(tree, n, pos, -w[pos])
        w[pos] = 0.0
        k += 1
    if k < n:
        # remaining zero-mass items: uniform order over the leftovers
        for i in range(n):
            if w[i] == 0.0:
                w[i] = 1.0
            else:
                w[i] = 0.0
        for i in range(k):
            w[out[i]] = 0.0
        _build(tree, w, n)
        while k < n:
            total = _prefix(tree, n)
            pos = _search(tree, n, top, u[k] * total)
            if pos >= n or w[pos] <= 0.0:
                pos = _nearest_live(w, n, pos)
            out[k] = pos
            _add(tree, n, pos, -w[pos])
            w[pos] = 0.0
            k += 1
    return np.asarray(out)


cdef Py_ssize_t _nearest_live(double[::1] w, Py_ssize_t n, Py_ssize_t pos):
    # rounding guard: the search landed past the end or on a removed item
    cdef Py_ssize_t i
    if pos >= n:
        pos = n - 1
    i = pos
    while i >= 0:
        if w[i] > 0.0:
            return i
        i -= 1
    i = pos + 1
    while i < n:
        if w[i] > 0.0:
            return i
        i += 1
    raise RuntimeError("no live item left")


def decay_probabilities(const double[::1] p, const double[::1] counts,
                        double scale, double cap):
    """Return ``(p', sum_q)`` for ``q = p * exp(-min(c^2/scale, cap) + shift)``.

    ``shift`` is the smallest exponent among positive entries; it cancels in
    the normalisation. ``p'`` is ``q / sum_q``.
    """
    cdef Py_ssize_t n = p.shape[0]
    cdef double[::1] a = np.empty(n, dtype=np.float64)
    cdef double[::1] q = np.empty(n, dtype=np.float64)
    cdef double amin = 0.0
    cdef double total = 0.0
    cdef double c
    cdef bint seen = False
    cdef Py_ssize_t i
    for i in range(n):
        c = counts[i]
        a[i] = c * c / scale
        if a[i] > cap:
            a[i] = cap
        if p[i] > 0.0 and (not seen or a[i] < amin):
            amin = a[i]
            seen = True
    for i in range(n):
        if p[i] > 0.0:
            q[i] = p[i] * exp(-(a[i] - amin))
        else:
            q[i] = 0.0
        total += q[i]
    if total > 0.0:
        for i in range(n):
            q[i] = q[i] / total
    return np.asarray(q), total
