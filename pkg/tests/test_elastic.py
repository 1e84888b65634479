import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bulbleak.inference.elastic import EmptySequence, dtw, mdtw, osb, sliding_distance
from oracles import brute_dtw, brute_osb

short = st.lists(st.floats(-3, 3, allow_nan=False), min_size=1, max_size=10)
dyadic = st.lists(st.integers(-24, 24).map(lambda k: k / 8), min_size=1, max_size=8)


def test_examples():
    assert dtw([1, 2, 3], [1, 2, 3]) == 0
    assert dtw([0], [1]) == 1
    assert dtw([1, 2, 3], [1, 1, 2, 2, 3, 3]) == 0
    assert osb([1, 9, 2], [1, 2], 0.5) == 0.5
    assert osb([4, 5, 6], [4, 5, 6], 3.0) == 0
    assert mdtw([[0, 0, 0]], [[1, 1, 1]]) == 3.0
    assert mdtw([[0.2, 0.5, 0.1]] * 4, [[0.2, 0.5, 0.1]] * 4) == 0


def test_empty():
    for fn in (lambda: dtw([], [1]), lambda: osb([1], [], 1.0), lambda: mdtw([], [[1, 1, 1]])):
        with pytest.raises(EmptySequence):
            fn()


@settings(max_examples=300, deadline=None)
@given(short, short)
def test_dtw_equals_exhaustive_paths(a, b):
    assert dtw(a, b) == brute_dtw(a, b)


@settings(max_examples=200, deadline=None)
@given(dyadic, dyadic, st.integers(0, 24).map(lambda k: k / 8))
def test_osb_equals_exhaustive_bijections_exactly(a, b, p):
    assert osb(a, b, p) == brute_osb(a, b, p)


@settings(max_examples=200, deadline=None)
@given(short, short, st.floats(0, 4))
def test_osb_real_inputs(a, b, p):
    assert osb(a, b, p) == pytest.approx(brute_osb(a, b, p), rel=1e-12, abs=1e-12)


@settings(max_examples=150, deadline=None)
@given(st.integers(1, 8), st.integers(1, 8), st.integers(0, 2**31))
def test_mdtw_equals_exhaustive_paths(n, m, seed):
    rng = np.random.default_rng(seed)
    a, b = rng.uniform(size=(n, 3)), rng.uniform(size=(m, 3))

    def cost(x, y):
        s = 0.0
        for k in range(3):
            d = x[k] - y[k]
            s += d * d
        return s

    assert mdtw(a, b) == brute_dtw(list(a), list(b), cost)


@settings(max_examples=200, deadline=None)
@given(short, short)
def test_dtw_metric_properties(a, b):
    assert dtw(a, a) == 0
    assert dtw(a, b) >= 0
    assert dtw(a, b) == dtw(b, a)
    if len(a) == len(b):
        assert dtw(a, b) <= sum((x - y) ** 2 for x, y in zip(a, b)) + 1e-12


@settings(max_examples=200, deadline=None)
@given(short, short, st.floats(0, 1))
def test_band_only_restricts(a, b, band):
    assert dtw(a, b, band=band) >= dtw(a, b)


@settings(max_examples=200, deadline=None)
@given(short, short)
def test_mdtw_reduces_to_dtw(a, b):
    pad = lambda x: np.column_stack([x, np.zeros(len(x)), np.zeros(len(x))])
    assert mdtw(pad(a), pad(b)) == pytest.approx(dtw(a, b), abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 10), st.integers(0, 3), st.integers(0, 2**31))
def test_osb_large_penalty_bounds_dtw(n, extra, seed):
    # with every query element forced into a match, OSB is a lockstep-or-worse
    # alignment whenever the query is at least as long as the target
    rng = np.random.default_rng(seed)
    q, t = rng.normal(size=n + extra), rng.normal(size=n)
    assert osb(q, t, 1e6) >= dtw(q, t) - 1e-9


def test_osb_shorter_query_can_undercut_dtw():
    assert osb([0.0], [0.0, 5.0], 1e6) == 0
    assert dtw([0.0], [0.0, 5.0]) == 25


@settings(max_examples=100, deadline=None)
@given(short, short, st.floats(0, 4))
def test_osb_bounded_by_skipping_everything(a, b, p):
    assert 0 <= osb(a, b, p) <= len(a) * p + 1e-12


@pytest.mark.parametrize("metric", ["dtw", "osb"])
def test_sliding_finds_planted_window(metric):
    rng = np.random.default_rng(5)
    template = rng.uniform(0.1, 1.0, 400)
    query = template[120:220] / template[120:220].max()
    d, start = sliding_distance(query, template, stride=10, metric=metric, skip_penalty=0.1)
    assert d == pytest.approx(0, abs=1e-12)
    assert start == 120


def test_sliding_matches_exhaustive_window_scan():
    rng = np.random.default_rng(6)
    template = rng.uniform(0, 1, 230)
    query = rng.uniform(0, 1, 50)
    query /= query.max()
    best = min(dtw(query, template[s:s + 50] / template[s:s + 50].max(), band=0.1)
               for s in list(range(0, 181, 7)) + [180])
    d, _ = sliding_distance(query, template, stride=7, band=0.1)
    assert d == best


def test_sliding_short_template_uses_whole_series():
    d, start = sliding_distance([0.5, 1.0, 0.5], [1.0, 2.0], stride=1, band=None)
    assert start == 0
    assert d == dtw([0.5, 1.0, 0.5], [0.5, 1.0])
