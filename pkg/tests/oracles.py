"""Independent reference implementations used as test oracles."""

import math
from itertools import combinations


def hsb_oracle(r, g, b):
    """Hue from the atan2 chromaticity angle; no acos, no branch on b > g."""
    hue = math.degrees(math.atan2(math.sqrt(3.0) * (g - b), 2.0 * r - g - b)) % 360.0
    total = r + g + b
    sat = (total - 3.0 * min(r, g, b)) / total
    return hue, sat, max(r, g, b)


def _sq(x, y):
    # x*x is correctly rounded; pow(x, 2) in libm is not always
    d = x - y
    return d * d


def brute_dtw(a, b, cost=_sq):
    """Minimum over every monotone warping path, enumerated recursively."""
    n, m = len(a), len(b)
    best = math.inf

    def walk(i, j, acc):
        nonlocal best
        acc += cost(a[i], b[j])
        if acc >= best:
            return
        if i == n - 1 and j == m - 1:
            best = acc
            return
        if i + 1 < n and j + 1 < m:
            walk(i + 1, j + 1, acc)
        if i + 1 < n:
            walk(i + 1, j, acc)
        if j + 1 < m:
            walk(i, j + 1, acc)

    walk(0, 0, 0.0)
    return best


def brute_osb(query, target, penalty):
    """Enumerate every order-preserving one-to-one matching of a query
    subsequence onto target positions; unmatched query elements cost
    ``penalty`` each, unmatched target elements are free."""
    n, m = len(query), len(target)
    best = n * penalty
    for k in range(1, min(n, m) + 1):
        for qi in combinations(range(n), k):
            skip = (n - k) * penalty
            if skip >= best:
                continue
            for tj in combinations(range(m), k):
                c = skip + sum(_sq(query[i], target[j]) for i, j in zip(qi, tj))
                if c < best:
                    best = c
    return best
