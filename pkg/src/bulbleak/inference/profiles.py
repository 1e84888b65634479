"""Observed profiles and their amplitude normalization."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..colorlab import (HUE_BINS, ResponseCalibration, correct_response_array, default_calibration,
                        identify_hue_array)
from ..optics import ChannelConfig, SampleStream, SensorKind, observe
from ..visualizer import AUDIO_TICK_S, Timeline

DARK_BIN = -1


class AllDark(ValueError):
    """Nothing brighter than zero was observed."""


@dataclass
class LuminanceProfile:
    values: np.ndarray
    hue_bins: Optional[np.ndarray] = None
    start_offset_s: float = 0.0
    rate_hz: float = 10.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if (self.values < 0).any():
            raise ValueError("luminance values must be non-negative")
        if self.hue_bins is not None:
            self.hue_bins = np.asarray(self.hue_bins, dtype=np.int64)
            if self.hue_bins.shape != self.values.shape:
                raise ValueError("hue_bins and values differ in length")


@dataclass
class ColorProfile:
    values: np.ndarray  # (n, 3)
    start_offset_s: float = 0.0
    rate_hz: float = 1.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(-1, 3)
        if (self.values < 0).any():
            raise ValueError("color components must be non-negative")


def normalize_static(p: LuminanceProfile | np.ndarray) -> np.ndarray:
    values = np.asarray(getattr(p, "values", p), dtype=float)
    top = values.max() if values.size else 0.0
    if top <= 0:
        raise AllDark("profile has no positive sample")
    return values / top


def detect_peaks(values) -> np.ndarray:
    """Indices of local maxima (not below either neighbour) that exceed the median."""
    x = np.asarray(values, dtype=float)
    if x.size < 3:
        return np.flatnonzero(x > np.median(x)) if x.size else np.array([], dtype=np.int64)
    left = np.r_[True, x[1:] >= x[:-1]]
    right = np.r_[x[:-1] >= x[1:], True]
    return np.flatnonzero(left & right & (x > np.median(x)))


def bin_maxima(values, hue_bins, peaks_only: bool = False) -> np.ndarray:
    """Largest observed value per hue bin; 0 for bins never seen."""
    values = np.asarray(values, dtype=float)
    bins = np.asarray(hue_bins, dtype=np.int64)
    idx = detect_peaks(values) if peaks_only else np.arange(len(values))
    idx = idx[bins[idx] >= 0]
    table = np.zeros(HUE_BINS)
    np.maximum.at(table, bins[idx], values[idx])
    return table


def normalize_random(p: LuminanceProfile, warm_start: Optional[np.ndarray] = None) -> np.ndarray:
    """Divide each sample by the largest value its hue bin reached in the recording.

    The per-bin maxima are gathered over the whole profile, on top of
    ``warm_start`` when given (a per-bin table from an earlier observation,
    e.g. ``hue_sweep_table``), so every bin that occurs has a positive
    maximum and no output exceeds 1. Samples with no identified hue are
    scaled by the largest maximum.
    """
    if p.hue_bins is None:
        raise ValueError("profile carries no hue bins")
    values = p.values
    if not values.size or values.max() <= 0:
        raise AllDark("profile has no positive sample")
    table = np.zeros(HUE_BINS) if warm_start is None else np.array(warm_start, dtype=float)
    if table.shape != (HUE_BINS,):
        raise ValueError("warm-start table needs one entry per hue bin")
    lit = p.hue_bins >= 0
    np.maximum.at(table, p.hue_bins[lit], values[lit])
    ref = np.full(len(values), max(table.max(), values.max()))
    ref[lit] = table[p.hue_bins[lit]]
    out = np.zeros_like(values)
    np.divide(values, ref, out=out, where=ref > 0)
    return out


def hue_sweep_table(cfg: ChannelConfig, cal: Optional[ResponseCalibration] = None,
                    saturation: float = 1.0) -> np.ndarray:
    """Per-bin luminance of a full-brightness sweep through every hue.

    The bulb holds each integer hue for one audio tick while the luminance
    and RGB sensors watch through ``cfg``; the result suits
    ``normalize_random(..., warm_start=...)``.
    """
    cal = cal or default_calibration()
    hsb = np.stack([np.arange(HUE_BINS, dtype=float), np.full(HUE_BINS, float(saturation)),
                    np.ones(HUE_BINS)], axis=1)
    t = np.round((np.arange(HUE_BINS) + 1) * AUDIO_TICK_S, 9)
    sweep = Timeline(t, float(t[-1] + AUDIO_TICK_S), hsb=hsb)
    span = HUE_BINS * AUDIO_TICK_S
    lum = observe(sweep, SensorKind.LUMINANCE, cfg, cal, start=float(t[0]), duration=span)
    rgb = observe(sweep, SensorKind.RGB, cfg, cal, start=float(t[0]), duration=span)
    p = luminance_profile(lum, rgb, cal)
    return bin_maxima(p.values, p.hue_bins)


def luminance_profile(lum: SampleStream, rgb: Optional[SampleStream] = None,
                      cal: Optional[ResponseCalibration] = None, noise_floor: float = 1e-9,
                      start_offset_s: float = 0.0) -> LuminanceProfile:
    """Pair luminance samples with hue bins read off a co-located RGB sensor."""
    bins = None
    if rgb is not None:
        if len(rgb) != len(lum):
            raise ValueError("luminance and RGB streams differ in length")
        cal = cal or default_calibration()
        bins = np.full(len(lum), DARK_BIN, dtype=np.int64)
        lit = rgb.values.max(axis=1) > noise_floor
        if lit.any():
            bins[lit] = identify_hue_array(rgb.values[lit], cal, noise_floor)
    return LuminanceProfile(lum.values, bins, start_offset_s)


def color_profile(rgb: SampleStream, white: np.ndarray, cal: Optional[ResponseCalibration] = None,
                  start_offset_s: float = 0.0) -> ColorProfile:
    """Corrected RGB composition per sample.

    ``white`` is the sensor's reading of the bulb at full white through the
    same channel; it rescales observations onto the calibration's response
    scale before the per-channel correction.
    """
    cal = cal or default_calibration()
    white = np.asarray(white, dtype=float)
    if white.max() <= 0:
        raise AllDark("white reference is dark")
    scale = cal.reference_peak / white.max()
    return ColorProfile(correct_response_array(rgb.values * scale, cal), start_offset_s)
