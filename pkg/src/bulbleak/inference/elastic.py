"""Elastic sequence distances: DTW, multidimensional DTW and OSB.

All costs are squared differences (squared Euclidean for vector series).
Kernels are compiled with numba and work on ``(n, d)`` float arrays, so the
scalar and 3-channel cases share one implementation.
"""

from __future__ import annotations

import math
from typing import Optional

import numpy as np
from numba import njit, uint64


NO_BAND = 2 ** 62


class EmptySequence(ValueError):
    pass


@njit(cache=True)
def _cost(a, i, b, j):
    s = 0.0
    for k in range(a.shape[1]):
        d = a[i, k] - b[j, k]
        s += d * d
    return s


@njit(cache=True, fastmath={"nnan", "nsz"})
def _dtw(a, b, w, cutoff, tail):
    """Banded DTW swept by anti-diagonals, abandoned (inf) once it must exceed ``cutoff``.

    Cells on one anti-diagonal are independent, so each sweep vectorizes;
    buffers are indexed by query row. ``tail[j]`` lower-bounds the cost still
    owed by template columns ``j`` onwards; pass zeros when no bound is known.
    """
    n, m, d = a.shape[0], b.shape[0], a.shape[1]
    w = max(w, abs(n - m))
    inf = np.inf
    one = uint64(1)
    rev = b[::-1].copy()  # b[j - 1] is rev[m - j]
    a1 = a[:, 0].copy()
    r1 = rev[:, 0].copy()
    p2 = np.full(n + 2, inf)
    p1 = np.full(n + 2, inf)
    cur = np.full(n + 2, inf)
    p2[0] = 0.0
    for k in range(2, n + m + 1):
        lo = max(1, k - m, (k - w + 1) // 2)
        hi = min(n, k - 1, (k + w) // 2)
        # the live range drifts by at most one row per diagonal, so fencing
        # its edges hides values left from three diagonals back
        cur[lo - 1] = inf
        cur[hi + 1] = inf
        # unsigned indices spare numba's negative-index check, which
        # otherwise keeps the loop from vectorizing
        off = uint64(m - k)
        if d == 1:
            for i in range(uint64(lo), uint64(hi + 1)):
                x = a1[i - one] - r1[off + i]
                cur[i] = min(p2[i - one], p1[i - one], p1[i]) + x * x
        else:
            for i in range(uint64(lo), uint64(hi + 1)):
                c = 0.0
                for k2 in range(d):
                    x = a[i - one, k2] - rev[off + i, k2]
                    c += x * x
                cur[i] = min(p2[i - one], p1[i - one], p1[i]) + c
        if cutoff < inf and (k & 15) == 0:
            # every path crosses diagonal k - 1 or k, and columns past this
            # diagonal are still to be paid for
            lowest = inf
            for i in range(lo - 1, hi + 2):
                v = min(cur[i], p1[i])
                if v < lowest:
                    lowest = v
            if lowest + tail[min(m, k - lo)] > cutoff:
                return inf
        p2, p1, cur = p1, cur, p2
    return p1[n]


@njit(cache=True)
def _osb(q, t, penalty):
    """Order-preserving one-to-one matching of a query subsequence onto the target.

    D[i][j] covers query[:i] against target[:j]; skipping a query element
    costs ``penalty``, skipping a target element is free.
    """
    n, m = q.shape[0], t.shape[0]
    prev = np.zeros(m + 1)
    cur = np.zeros(m + 1)
    for i in range(1, n + 1):
        cur[0] = prev[0] + penalty
        for j in range(1, m + 1):
            v = prev[j] + penalty
            if cur[j - 1] < v:
                v = cur[j - 1]
            c = prev[j - 1] + _cost(q, i - 1, t, j - 1)
            if c < v:
                v = c
            cur[j] = v
        prev, cur = cur, prev
    return prev[m]


@njit(cache=True)
def _envelope(q, w):
    n, d = q.shape
    upper = np.empty((n, d))
    lower = np.empty((n, d))
    for i in range(n):
        lo = max(0, i - w)
        hi = min(n, i + w + 1)
        for k in range(d):
            u = q[lo, k]
            l = q[lo, k]
            for j in range(lo + 1, hi):
                if q[j, k] > u:
                    u = q[j, k]
                if q[j, k] < l:
                    l = q[j, k]
            upper[i, k] = u
            lower[i, k] = l
    return upper, lower


@njit(cache=True)
def _window(t, start, length, normalize):
    win = t[start:start + length].copy()
    if normalize:
        top = win.max()
        if top > 0:
            win /= top
    return win


@njit(cache=True)
def _sliding_dtw(q, t, stride, w, normalize):
    """Minimum banded DTW of ``q`` over windows of ``t`` with the same length.

    Windows are visited in order of their LB_Keogh bound; the search stops
    once the bound reaches the best distance found.
    """
    n = q.shape[0]
    starts = np.arange(0, t.shape[0] - n + 1, stride)
    if starts[-1] != t.shape[0] - n:
        starts = np.append(starts, t.shape[0] - n)
    upper, lower = _envelope(q, w)
    bounds = np.empty(starts.shape[0])
    tails = np.zeros((starts.shape[0], n + 1))
    for s in range(starts.shape[0]):
        win = _window(t, starts[s], n, normalize)
        for i in range(n - 1, -1, -1):
            lb = 0.0
            for k in range(q.shape[1]):
                x = win[i, k]
                if x > upper[i, k]:
                    lb += (x - upper[i, k]) * (x - upper[i, k])
                elif x < lower[i, k]:
                    lb += (lower[i, k] - x) * (lower[i, k] - x)
            tails[s, i] = tails[s, i + 1] + lb
        bounds[s] = tails[s, 0]
    order = np.argsort(bounds, kind="mergesort")
    best = np.inf
    best_start = starts[0]
    for s in order:
        if bounds[s] >= best:
            break
        d = _dtw(q, _window(t, starts[s], n, normalize), w, best, tails[s])
        if d < best:
            best = d
            best_start = starts[s]
    return best, best_start


@njit(cache=True)
def _sliding_osb(q, t, stride, penalty, normalize):
    n = q.shape[0]
    starts = np.arange(0, t.shape[0] - n + 1, stride)
    if starts[-1] != t.shape[0] - n:
        starts = np.append(starts, t.shape[0] - n)
    best = np.inf
    best_start = starts[0]
    for s in starts:
        d = _osb(q, _window(t, s, n, normalize), penalty)
        if d < best:
            best = d
            best_start = s
    return best, best_start


def as_series(x) -> np.ndarray:
    """Coerce to a C-contiguous ``(n, d)`` float array."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise EmptySequence("sequences must be non-empty")
    return np.ascontiguousarray(arr)


def band_width(n: int, band: Optional[float]) -> int:
    """Sakoe-Chiba half-width in samples for a query of length ``n``; ``None`` means no band."""
    if band is None:
        return NO_BAND
    if band < 0:
        raise ValueError("band must be non-negative")
    return int(math.ceil(band * n))


def dtw(a, b, band: Optional[float] = None) -> float:
    a, b = as_series(a), as_series(b)
    if a.shape[1] != b.shape[1]:
        raise ValueError("sequences differ in dimension")
    return float(_dtw(a, b, band_width(len(a), band), np.inf, np.zeros(len(b) + 1)))


def mdtw(a, b, band: Optional[float] = None) -> float:
    a = as_series(np.asarray(a, dtype=float).reshape(-1, 3))
    b = as_series(np.asarray(b, dtype=float).reshape(-1, 3))
    return float(_dtw(a, b, band_width(len(a), band), np.inf, np.zeros(len(b) + 1)))


def osb(query, target, skip_penalty: float) -> float:
    if skip_penalty < 0:
        raise ValueError("skip_penalty must be non-negative")
    q, t = as_series(query), as_series(target)
    if q.shape[1] != t.shape[1]:
        raise ValueError("sequences differ in dimension")
    return float(_osb(q, t, float(skip_penalty)))


def sliding_distance(query, template, stride: int, metric: str = "dtw", band: Optional[float] = 0.1,
                     skip_penalty: float = 0.0, normalize: bool = True) -> tuple[float, int]:
    """Best distance of ``query`` against same-length windows of ``template``.

    Each window is rescaled to its own maximum when ``normalize`` is set.
    When the template is shorter than the query the whole template is used.
    Returns ``(distance, window start)``.
    """
    q, t = as_series(query), as_series(template)
    if len(t) < len(q):
        win = t / t.max() if normalize and t.max() > 0 else t
        if metric == "osb":
            return float(_osb(q, win, float(skip_penalty))), 0
        return float(_dtw(q, win, band_width(len(q), band), np.inf, np.zeros(len(win) + 1))), 0
    if metric == "osb":
        d, s = _sliding_osb(q, t, int(stride), float(skip_penalty), normalize)
    else:
        d, s = _sliding_dtw(q, t, int(stride), band_width(len(q), band), normalize)
    return float(d), int(s)
