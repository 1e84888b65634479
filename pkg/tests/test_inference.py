import math
from fractions import Fraction
from functools import lru_cache

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bulbleak import corpus
from bulbleak.inference import (AUDIO, VIDEO, AllDark, ColorProfile, EmptyLibrary, LuminanceProfile,
                                MatchResult, MissingGenre, ReferenceLibrary, Template, bin_maxima,
                                build_audio_template, build_video_template, color_profile,
                                coverage_time_estimate, detect_peaks, draws_for_coverage, genre_confusion,
                                hue_coverage, hue_sweep_table, luminance_profile, match_profile,
                                normalize_random, normalize_static)
from bulbleak.inference.library import TemplateFormatError
from bulbleak.inference.occupancy import occupancy_distribution
from bulbleak.optics import ChannelConfig, SensorKind, observe
from bulbleak.visualizer import (AudioTrack, EmptyTrack, RandomHue, StaticHue, VideoColorTrack,
                                 audio_visualize, video_visualize)


# ------------------------------------------------------------------ normalization

def test_normalize_static_examples():
    assert np.allclose(normalize_static(LuminanceProfile([2, 4, 8])), [0.25, 0.5, 1])
    with pytest.raises(AllDark):
        normalize_static(np.zeros(5))


@given(st.lists(st.floats(0, 1e3), min_size=1, max_size=40).filter(lambda v: max(v) > 0),
       st.floats(1e-3, 1e3))
def test_normalize_static_scale_invariant(values, c):
    a = normalize_static(np.array(values))
    assert a.max() == 1.0
    assert np.allclose(a, normalize_static(np.array(values) * c), rtol=1e-12, atol=1e-15)


def test_normalize_random_per_bin_example():
    p = LuminanceProfile([10, 5, 5, 2.5], hue_bins=[40, 300, 40, 300])
    assert np.allclose(normalize_random(p), [1, 1, 0.5, 0.5])


@given(st.lists(st.floats(0.01, 100), min_size=1, max_size=30), st.integers(0, 359))
def test_single_hue_matches_static(values, hue):
    p = LuminanceProfile(values, hue_bins=[hue] * len(values))
    assert np.allclose(normalize_random(p), normalize_static(p), rtol=0, atol=1e-15)


@given(st.lists(st.tuples(st.floats(0, 100), st.integers(-1, 359)), min_size=1, max_size=50)
       .filter(lambda rows: max(v for v, _ in rows) > 0))
def test_normalize_random_never_exceeds_one(rows):
    p = LuminanceProfile([v for v, _ in rows], hue_bins=[b for _, b in rows])
    out = normalize_random(p)
    assert out.min() >= 0 and out.max() <= 1.0 + 1e-15


def test_normalize_random_errors():
    with pytest.raises(ValueError):
        normalize_random(LuminanceProfile([1.0]))
    with pytest.raises(AllDark):
        normalize_random(LuminanceProfile([0.0, 0.0], hue_bins=[3, 4]))
    with pytest.raises(ValueError):
        normalize_random(LuminanceProfile([1.0], hue_bins=[3]), warm_start=np.ones(10))


def test_profile_invariants():
    with pytest.raises(ValueError):
        LuminanceProfile([-1.0])
    with pytest.raises(ValueError):
        LuminanceProfile([1.0, 2.0], hue_bins=[1])
    with pytest.raises(ValueError):
        ColorProfile([[0.1, -0.2, 0.3]])


def test_detect_peaks_and_bin_maxima():
    x = np.array([0.0, 3.0, 1.0, 1.0, 5.0, 2.0, 0.0])
    assert list(detect_peaks(x)) == [1, 4]
    bins = np.array([1, 2, 1, -1, 2, 7, 7])
    table = bin_maxima(x, bins)
    assert table[1] == 1.0 and table[2] == 5.0 and table[7] == 2.0 and table.sum() == 8.0
    peaks_only = bin_maxima(x, bins, peaks_only=True)
    assert peaks_only[2] == 5.0 and peaks_only.sum() == 5.0


def random_hue_profile(track, seed, cal, warm, start=3.0, window=40.0):
    tl = audio_visualize(track, RandomHue(seed=seed)).timeline
    cfg = ChannelConfig()
    lum = observe(tl, SensorKind.LUMINANCE, cfg, cal, start=start, duration=window)
    rgb = observe(tl, SensorKind.RGB, cfg, cal, start=start, duration=window)
    return normalize_random(luminance_profile(lum, rgb, cal), warm)


def test_random_hue_profiles_do_not_depend_on_hue_seed(cal):
    track = corpus.synth_song(5, "jazz", duration_s=60)
    warm = hue_sweep_table(ChannelConfig(), cal)
    a, b = (random_hue_profile(track, s, cal, warm) for s in (1, 2))
    assert np.abs(a - b).max() < 1e-6
    static = observe(audio_visualize(track, StaticHue(0)).timeline, SensorKind.LUMINANCE, ChannelConfig(), cal,
                     start=3.0, duration=40.0)
    assert np.allclose(a / a.max(), normalize_static(static.values), atol=1e-9)


def test_hue_sweep_table_covers_every_bin(cal):
    table = hue_sweep_table(ChannelConfig(), cal)
    assert table.shape == (360,) and (table > 0).all()
    assert np.allclose(table, cal.luminance)
    far = hue_sweep_table(ChannelConfig(distance_m=10), cal)
    assert 0 < far.max() <= cal.luminance.max() * 0.25 + 1e-12


def test_luminance_profile_marks_dark_samples(cal):
    tl = audio_visualize(AudioTrack(np.r_[np.zeros(800), np.ones(800)], 4000), RandomHue(seed=1)).timeline
    lum = observe(tl, SensorKind.LUMINANCE, ChannelConfig(), cal, start=0.1, duration=0.4)
    rgb = observe(tl, SensorKind.RGB, ChannelConfig(), cal, start=0.1, duration=0.4)
    p = luminance_profile(lum, rgb, cal)
    assert list(p.hue_bins[:2]) == [-1, -1] and (p.hue_bins[2:] >= 0).all()
    with pytest.raises(ValueError):
        luminance_profile(lum, observe(tl, SensorKind.RGB, ChannelConfig(), cal, start=0.1, duration=0.3), cal)


# ------------------------------------------------------------------ templates

def test_audio_template_examples():
    rate = 8000
    square = AudioTrack(np.sign(np.sin(2 * np.pi * 50 * np.arange(2 * rate) / rate) + 1e-9), rate)
    assert np.array_equal(build_audio_template(square).series, np.ones(20))
    silent = build_audio_template(AudioTrack(np.zeros(rate), rate))
    assert not silent.usable and not silent.series.any()
    with pytest.raises(EmptyTrack):
        build_audio_template(AudioTrack(np.zeros(0), rate))


def test_audio_template_matches_observed_profile(cal):
    track = corpus.synth_song(9, "rock", duration_s=30)
    tl = audio_visualize(track, StaticHue(75)).timeline
    lum = observe(tl, SensorKind.LUMINANCE, ChannelConfig(distance_m=12), cal, start=float(tl.t[0]))
    assert np.abs(normalize_static(lum.values) - build_audio_template(track).series).max() < 1e-6


def test_video_template_examples():
    red = VideoColorTrack(np.tile([1.0, 0.0, 0.0], (40, 1)), 4.0)
    assert np.array_equal(build_video_template(red).series, np.tile([1.0, 0.0, 0.0], (10, 1)))
    black = build_video_template(VideoColorTrack(np.zeros((8, 3)), 2.0))
    assert not black.usable


def test_video_template_matches_corrected_observation(cal):
    track = corpus.synth_video(3, duration_s=120)
    tl = video_visualize(track).timeline
    cfg = ChannelConfig(distance_m=7)
    rgb = observe(tl, SensorKind.RGB_VIDEO, cfg, cal, start=float(tl.t[0]))
    white = observe(tl.__class__(np.array([1.0]), 3.0, hsb=np.array([[0.0, 0.0, 1.0]])), SensorKind.RGB_VIDEO,
                    cfg, cal, start=1.0, duration=1.0).values[0]
    prof = color_profile(rgb, white, cal).values
    tpl = build_video_template(track).series
    assert prof.shape == tpl.shape
    assert np.abs(prof / prof.max() - tpl).max() < 0.05


def test_template_bytes_roundtrip():
    t = Template("x", VIDEO, np.random.default_rng(0).random((7, 3)), 1.0, "T", "rock", True)
    back = Template.from_bytes(t.to_bytes(), "x", "T", "rock")
    assert np.array_equal(back.series, t.series) and back.kind == VIDEO and back.rate_hz == 1.0
    with pytest.raises(TemplateFormatError):
        Template.from_bytes(t.to_bytes()[:-8], "x")
    with pytest.raises(TemplateFormatError):
        Template.from_bytes(b"nope" + t.to_bytes()[4:], "x")


# ------------------------------------------------------------------ library

def small_library(n=6, seconds=40):
    tracks = corpus.song_tracks(n, seed=2, song_s=seconds)
    return tracks, ReferenceLibrary.from_templates(build_audio_template(t) for t in tracks)


def test_library_persistence(tmp_path):
    tracks, lib = small_library()
    lib.save(tmp_path)
    back = ReferenceLibrary.load(tmp_path)
    assert [t.id for t in back] == [t.id for t in lib]
    for t in lib:
        b = back[t.id]
        assert np.array_equal(b.series, t.series) and (b.genre, b.title, b.usable) == (t.genre, t.title, t.usable)
    lib.save(tmp_path)  # a second save rewrites identical files
    assert ReferenceLibrary.load(tmp_path).templates.keys() == lib.templates.keys()


def test_library_rules():
    tracks, lib = small_library(2)
    with pytest.raises(ValueError):
        lib.add(build_audio_template(tracks[0]))
    with pytest.raises(ValueError):
        lib.add(build_video_template(VideoColorTrack(np.ones((4, 3)), 1.0, id="v")))
    assert len(lib.subset([tracks[1].id])) == 1 and lib.kind == AUDIO


# ------------------------------------------------------------------ matching

def test_single_template_is_always_rank_one():
    tracks, lib = small_library(3)
    one = lib.subset([tracks[0].id])
    r = match_profile(np.random.default_rng(1).random(50), one, truth=tracks[0].id)
    assert r.rank_of_truth == 1


@pytest.mark.parametrize("matcher,mode", [("dtw", "sliding"), ("dtw", "whole"), ("osb", "sliding"),
                                          ("osb", "whole")])
def test_full_template_query_is_distance_zero(matcher, mode):
    tracks, lib = small_library(4, seconds=20)
    target = lib[tracks[2].id]
    r = match_profile(target.series * 3.0, lib, matcher, mode, truth=target.id)
    assert r.rank_of_truth == 1 and r.ranking[0][1] == pytest.approx(0.0, abs=1e-12)
    distances = [d for _, d in r.ranking]
    assert distances == sorted(distances)


def test_ties_break_by_id():
    lib = ReferenceLibrary.from_templates(Template(i, AUDIO, np.ones(30), 10.0) for i in ("b", "c", "a"))
    r = match_profile(np.ones(30), lib)
    assert [m for m, _ in r.ranking] == ["a", "b", "c"]


def test_matching_rejects_wrong_kind():
    tracks, lib = small_library(2)
    with pytest.raises(ValueError):
        match_profile(np.ones((10, 3)), lib, matcher="mdtw")
    with pytest.raises(ValueError):
        match_profile(np.ones(10), lib, matcher="nope")
    with pytest.raises(EmptyLibrary):
        match_profile(np.ones(10), ReferenceLibrary())


def test_unusable_templates_are_skipped():
    lib = ReferenceLibrary.from_templates([Template("dark", AUDIO, np.zeros(40), 10.0, usable=False),
                                           Template("lit", AUDIO, np.linspace(0, 1, 40), 10.0)])
    r = match_profile(np.linspace(0, 1, 20), lib, truth="dark")
    assert [m for m, _ in r.ranking] == ["lit"] and r.rank_of_truth is None


def test_video_matching(cal):
    tracks = corpus.video_tracks(4, seed=1, video_s=90)
    lib = ReferenceLibrary.from_templates(build_video_template(t) for t in tracks)
    q = lib[tracks[1].id].series[20:60]
    r = match_profile(q, lib, matcher="mdtw", truth=tracks[1].id)
    assert r.rank_of_truth == 1 and r.ranking[0][1] == pytest.approx(0.0, abs=1e-12)


def test_match_result_csv(tmp_path):
    r = MatchResult([("a", 0.5), ("b", 1.0)], truth="b")
    r.to_csv(tmp_path / "r.csv")
    assert (tmp_path / "r.csv").read_text().splitlines() == [
        "rank,media_id,distance,is_truth", "1,a,0.5,0", "2,b,1.0,1"]


def test_genre_confusion():
    genres = {"a": "dance", "b": "dance", "c": "jazz", "d": "rock"}
    hit = MatchResult([("a", 0.0), ("c", 1.0)], "a", genres)
    same_genre = MatchResult([("b", 0.0), ("a", 1.0)], "a", genres)
    miss = MatchResult([("d", 0.0), ("c", 1.0)], "c", genres)
    m = genre_confusion([hit, same_genre, miss])
    assert m[1, 1] == 2 and m[2, 3] == 1 and m.sum() == 3
    assert not genre_confusion([]).any()
    with pytest.raises(MissingGenre):
        genre_confusion([MatchResult([("a", 0.0)], "x", genres)])


# ------------------------------------------------------------------ occupancy

@lru_cache(maxsize=None)
def stirling2(k, j):
    if k == j:
        return 1
    if j == 0 or j > k:
        return 0
    return j * stirling2(k - 1, j) + stirling2(k - 1, j - 1)


def occupancy_oracle(k, n, j):
    return Fraction(math.comb(n, j) * math.factorial(j) * stirling2(k, j), n ** k)


@settings(max_examples=60)
@given(st.integers(0, 40), st.integers(1, 12))
def test_coverage_matches_surjection_count(k, n):
    p_single, p_all = hue_coverage(k, n)
    assert p_all == float(occupancy_oracle(k, n, n))
    assert p_single == pytest.approx(1 - ((n - 1) / n) ** k, abs=1e-15)
    dist = occupancy_distribution(k, n)
    assert np.allclose(dist, [float(occupancy_oracle(k, n, j)) for j in range(n + 1)], atol=1e-13)


def test_coverage_examples():
    assert hue_coverage(0, 360) == (0.0, 0.0)
    p_single, p_all = hue_coverage(5000, 360)
    assert p_single > 0.99999
    assert p_all == pytest.approx(0.99967, abs=1e-4)
    assert draws_for_coverage(0.5, n=1) == 1


def test_coverage_time():
    minutes = coverage_time_estimate(20, 0.99967)
    assert minutes == pytest.approx(250, abs=5)
    assert coverage_time_estimate(40, 0.99967) == pytest.approx(minutes / 2)
    k = draws_for_coverage(0.99967)
    assert hue_coverage(k)[1] >= 0.99967 > hue_coverage(k - 1)[1]
    with pytest.raises(ValueError):
        coverage_time_estimate(0, 0.5)
    with pytest.raises(ValueError):
        draws_for_coverage(1.0)
