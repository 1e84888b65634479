"""How many random-hue peaks it takes before every hue bin has been seen."""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np


def hue_coverage(k: int, n: int = 360) -> tuple[float, float]:
    """``(p_single, p_all)`` after ``k`` uniform draws over ``n`` bins.

    p_single: a given bin has been hit at least once.
    p_all: every bin has been hit. The alternating inclusion-exclusion sum
    cancels catastrophically in floating point for small k, so it is
    evaluated exactly over the integers and rounded once.
    """
    if k < 0 or n < 1:
        raise ValueError("need k >= 0 and n >= 1")
    p_single = float(1 - Fraction(n - 1, n) ** k)
    total = sum((-1) ** i * math.comb(n, i) * (n - i) ** k for i in range(n + 1))
    return p_single, total / n ** k


def occupancy_distribution(k: int, n: int) -> np.ndarray:
    """P(exactly j distinct bins occupied after k draws), j = 0..n, by forward recursion."""
    p = np.zeros(n + 1)
    p[0] = 1.0
    j = np.arange(n + 1)
    for _ in range(k):
        stay = p * j / n
        move = np.zeros_like(p)
        move[1:] = p[:-1] * (n - j[:-1]) / n
        p = stay + move
    return p


def draws_for_coverage(target_p_all: float, n: int = 360, max_draws: int = 10_000_000) -> int:
    """Smallest k whose probability of full coverage reaches ``target_p_all``."""
    if not 0 < target_p_all < 1:
        raise ValueError("target_p_all must lie in (0, 1)")
    p = np.zeros(n + 1)
    p[0] = 1.0
    j = np.arange(n + 1)
    for k in range(1, max_draws + 1):
        move = np.zeros_like(p)
        move[1:] = p[:-1] * (n - j[:-1]) / n
        p = p * j / n + move
        if p[n] >= target_p_all:
            return k
    raise ValueError(f"target not reached within {max_draws} draws")


def coverage_time_estimate(peaks_per_minute: float, target_p_all: float, n: int = 360) -> float:
    """Minutes of observation until all ``n`` hue bins are covered with the target probability."""
    if peaks_per_minute <= 0:
        raise ValueError("peaks_per_minute must be positive")
    return draws_for_coverage(target_p_all, n) / peaks_per_minute
