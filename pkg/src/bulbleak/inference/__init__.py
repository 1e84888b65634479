"""Adversary-side analysis: profiles, templates, elastic matching and coverage math."""

from .elastic import EmptySequence, dtw, mdtw, osb, sliding_distance
from .library import (AUDIO, VIDEO, EmptyLibrary, ReferenceLibrary, Template, build_audio_template,
                      build_video_template)
from .matching import GENRES, MatchResult, MissingGenre, genre_confusion, match_profile
from .occupancy import coverage_time_estimate, draws_for_coverage, hue_coverage
from .profiles import (AllDark, ColorProfile, LuminanceProfile, bin_maxima, color_profile,
                       detect_peaks, hue_sweep_table, luminance_profile, normalize_random, normalize_static)

__all__ = [
    "AUDIO", "VIDEO", "AllDark", "ColorProfile", "EmptyLibrary", "EmptySequence", "GENRES",
    "LuminanceProfile", "MatchResult", "MissingGenre", "ReferenceLibrary", "Template",
    "bin_maxima", "build_audio_template", "build_video_template", "color_profile",
    "coverage_time_estimate", "detect_peaks", "draws_for_coverage", "dtw", "genre_confusion",
    "hue_coverage", "hue_sweep_table", "luminance_profile", "match_profile", "mdtw", "normalize_random",
    "normalize_static", "osb", "sliding_distance",
]
