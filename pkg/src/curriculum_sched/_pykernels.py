"""Pure-Python scheduler kernels.

Operation-for-operation twin of the compiled ``_kernels`` module. Loops are
kept scalar on purpose: vectorised numpy sums use pairwise addition and would
not round the same way as the compiled code.
"""

from __future__ import annotations

import math
from bisect import bisect_right

import numpy as np


def categorical_draws(p, u):
    p = [float(x) for x in p]
    cdf = []
    acc = 0.0
    last_pos = -1
    for i, pi in enumerate(p):
        acc += pi
        cdf.append(acc)
        if pi > 0.0:
            last_pos = i
    if last_pos < 0:
        raise ValueError("all probabilities are zero")
    n = len(p)
    out = np.empty(len(u), dtype=np.int64)
    for j, uj in enumerate(u):
        idx = bisect_right(cdf, float(uj) * acc)
        out[j] = last_pos if idx >= n else idx
    return out


def _prefix(tree, n):
    s = 0.0
    i = n
    while i > 0:
        s += tree[i]
        i -= i & (-i)
    return s


def _add(tree, n, pos, delta):
    i = pos + 1
    while i <= n:
        tree[i] += delta
        i += i & (-i)


def _search(tree, n, top, target):
    pos = 0
    step = top
    rem = target
    while step > 0:
        nxt = pos + step
        if nxt <= n and tree[nxt] <= rem:
            pos = nxt
            rem -= tree[nxt]
        step >>= 1
    return pos


def _build(w):
    n = len(w)
    tree = [0.0] + list(w)
    for i in range(1, n + 1):
        j = i + (i & (-i))
        if j <= n:
            tree[j] += tree[i]
    return tree


def _nearest_live(w, pos):
    n = len(w)
    if pos >= n:
        pos = n - 1
    for i in range(pos, -1, -1):
        if w[i] > 0.0:
            return i
    for i in range(pos + 1, n):
        if w[i] > 0.0:
            return i
    raise RuntimeError("no live item left")


def _drain(w, u, out, k, stop, top):
    n = len(w)
    tree = _build(w)
    while k < stop:
        total = _prefix(tree, n)
        pos = _search(tree, n, top, float(u[k]) * total)
        if pos >= n or w[pos] <= 0.0:
            pos = _nearest_live(w, pos)
        out[k] = pos
        _add(tree, n, pos, -w[pos])
        w[pos] = 0.0
        k += 1
    return k


def weighted_permutation(p, u):
    n = len(p)
    if len(u) < n:
        raise ValueError("need one uniform per item")
    w = [float(x) for x in p]
    n_pos = sum(1 for x in w if x > 0.0)
    if n_pos == 0:
        raise ValueError("all probabilities are zero")
    top = 1
    while top * 2 <= n:
        top *= 2
    out = np.empty(n, dtype=np.int64)
    k = _drain(w, u, out, 0, n_pos, top)
    if k < n:
        taken = set(int(i) for i in out[:k])
        w = [0.0 if (i in taken or float(p[i]) > 0.0) else 1.0 for i in range(n)]
        _drain(w, u, out, k, n, top)
    return out


def decay_probabilities(p, counts, scale, cap):
    n = len(p)
    a = [0.0] * n
    amin = 0.0
    seen = False
    for i in range(n):
        c = float(counts[i])
        ai = c * c / scale
        if ai > cap:
            ai = cap
        a[i] = ai
        if p[i] > 0.0 and (not seen or ai < amin):
            amin = ai
            seen = True
    q = np.zeros(n, dtype=np.float64)
    total = 0.0
    for i in range(n):
        if p[i] > 0.0:
            q[i] = float(p[i]) * math.exp(-(a[i] - amin))
        total += q[i]
    if total > 0.0:
        for i in range(n):
            q[i] = q[i] / total
    return q, total
