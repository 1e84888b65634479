"""Color math: RGB/HSB conversion, the RGB sensor model and response correction.

Hue follows the geometric (acos) definition, saturation is ``1 - 3*min/sum``
and brightness is the dominant component ``max(r, g, b)``. The inverse
:func:`hsb_to_rgb` rebuilds the chromaticity sector by sector and rescales so
the largest component equals the brightness, which makes the pair exact
inverses of each other.

The sensor model works on responses normalized so that the blue channel reads
1.0 for white at full brightness. Each channel maps a component value to a
response through the inverse of a monotone (PCHIP) curve fitted through the
calibration knots; the attacker-side correction uses Lagrange polynomials fitted
through the same knots.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator

CHANNELS = ("r", "g", "b")
HUE_BINS = 360
CORRECTION_CEILING = 1.02

# Observed responses of white at increasing brightness on a LIFX A19, normalized
# to the blue response at full brightness.
TABLE_BRIGHTNESS = (0.2, 0.4, 0.6, 0.8, 1.0)
TABLE_RESPONSES = {
    "r": (0.04052, 0.149747, 0.355869, 0.66887, 0.741883),
    "g": (0.013536, 0.050023, 0.115935, 0.218776, 0.242022),
    "b": (0.058512, 0.209917, 0.485289, 0.906446, 1.0),
}
# Rec. 709 relative luminance weights, used for the luminance meter's hue response.
LUMINANCE_WEIGHTS = (0.2126, 0.7152, 0.0722)


class CalibrationInvalid(ValueError):
    pass


class DuplicateKnot(ValueError):
    pass


class DarkSample(ValueError):
    """All response components are at or below the noise floor."""


@dataclass(frozen=True)
class RgbColor:
    r: float
    g: float
    b: float

    def __post_init__(self):
        for name in CHANNELS:
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")

    def __iter__(self):
        return iter((self.r, self.g, self.b))


@dataclass(frozen=True)
class HsbColor:
    hue: float
    saturation: float
    brightness: float

    def __post_init__(self):
        object.__setattr__(self, "hue", float(self.hue) % 360.0)
        object.__setattr__(self, "saturation", min(max(float(self.saturation), 0.0), 1.0))
        object.__setattr__(self, "brightness", min(max(float(self.brightness), 0.0), 1.0))

    def __iter__(self):
        return iter((self.hue, self.saturation, self.brightness))


@dataclass(frozen=True)
class RgbResponse:
    dr: float
    dg: float
    db: float

    def __post_init__(self):
        if min(self.dr, self.dg, self.db) < 0:
            raise ValueError("responses must be non-negative")

    def __iter__(self):
        return iter((self.dr, self.dg, self.db))


@dataclass(frozen=True)
class CorrectedComposition:
    gr: float
    gg: float
    gb: float

    def __iter__(self):
        return iter((self.gr, self.gg, self.gb))


# ---------------------------------------------------------------- conversions

def rgb_to_hsb_array(rgb) -> np.ndarray:
    """Vectorized :func:`rgb_to_hsb`; ``rgb`` has shape ``(..., 3)``."""
    rgb = np.asarray(rgb, dtype=float)
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    num = 0.5 * ((r - g) + (r - b))
    den = np.sqrt((r - g) ** 2 + (r - b) * (g - b))
    chromatic = den > 1e-15
    # acos(num / den), evaluated as atan2 of the exact half-chord
    # sqrt(den**2 - num**2) = sqrt(3)/2 * |g - b|; plain acos loses ~1e-8 rad near 0 and 180 degrees
    hue = np.degrees(np.arctan2(0.5 * np.sqrt(3.0) * np.abs(g - b), num))
    hue = np.where(b > g, 360.0 - hue, hue) % 360.0
    hue = np.where(chromatic, hue, 0.0)
    total = r + g + b
    with np.errstate(invalid="ignore", divide="ignore"):
        sat = np.where(total > 0, 1.0 - 3.0 * np.minimum(np.minimum(r, g), b) / np.where(total > 0, total, 1.0), 0.0)
    sat = np.where(chromatic, np.clip(sat, 0.0, 1.0), 0.0)
    return np.stack([hue, sat, np.maximum(np.maximum(r, g), b)], axis=-1)


def rgb_to_hsb(c: RgbColor) -> HsbColor:
    return HsbColor(*rgb_to_hsb_array(tuple(c)))


def hsb_to_rgb_array(hsb) -> np.ndarray:
    """Vectorized :func:`hsb_to_rgb`; ``hsb`` has shape ``(..., 3)``."""
    hsb = np.asarray(hsb, dtype=float)
    h = hsb[..., 0] % 360.0
    s = np.clip(hsb[..., 1], 0.0, 1.0)
    v = np.clip(hsb[..., 2], 0.0, 1.0)
    sector = np.minimum((h // 120.0).astype(int), 2)
    local = np.radians(h - 120.0 * sector)
    low = 1.0 - s
    lead = 1.0 + s * np.cos(local) / np.cos(np.pi / 3.0 - local)
    trail = 3.0 - low - lead
    # sector 0: (lead, trail, low); 1: (low, lead, trail); 2: (trail, low, lead)
    parts = np.stack([lead, trail, low], axis=-1)
    order = np.array([[0, 1, 2], [2, 0, 1], [1, 2, 0]])[sector]
    rgb = np.take_along_axis(parts, order, axis=-1)
    peak = rgb.max(axis=-1)
    return np.clip(rgb * (v / peak)[..., None], 0.0, 1.0)


def hsb_to_rgb(c: HsbColor) -> RgbColor:
    return RgbColor(*(float(x) for x in hsb_to_rgb_array(tuple(c))))


# --------------------------------------------------------- Lagrange polynomials

def fit_lagrange(knots: Sequence[tuple[float, float]]) -> np.ndarray:
    """Coefficients (highest degree first) of the interpolating polynomial.

    Built as the sum of ``y_j * prod_{k != j} (x - x_k) / (x_j - x_k)``.
    """
    xs = [float(x) for x, _ in knots]
    ys = [float(y) for _, y in knots]
    if len(xs) < 2:
        raise ValueError("need at least two knots")
    if len(set(xs)) != len(xs):
        raise DuplicateKnot(f"x values must be distinct: {xs}")
    n = len(xs)
    coeffs = np.zeros(n)
    for j in range(n):
        basis = np.array([1.0])
        denom = 1.0
        for k in range(n):
            if k != j:
                basis = np.convolve(basis, [1.0, -xs[k]])
                denom *= xs[j] - xs[k]
        coeffs += ys[j] * basis / denom
    return coeffs


# ---------------------------------------------------------------- calibration

@dataclass(frozen=True, eq=False)
class ResponseCalibration:
    """Per-channel response curves plus per-hue lookup tables.

    ``knots[c]`` lists observed responses (global-normalized, blue peak = 1)
    at the brightness levels in ``brightness``; the last level must be 1.0 so
    that the final knot is the channel's peak response.
    """

    brightness: tuple[float, ...]
    knots: dict[str, tuple[float, ...]]
    hue_factors: np.ndarray = field(repr=False)
    luminance: np.ndarray = field(repr=False)
    luminance_weights: tuple[float, float, float] = LUMINANCE_WEIGHTS
    name: str = "custom"

    def __post_init__(self):
        validate_knots(self.brightness, self.knots)
        factors = np.asarray(self.hue_factors, dtype=float)
        lum = np.asarray(self.luminance, dtype=float)
        if factors.shape != (HUE_BINS, 3) or lum.shape != (HUE_BINS,):
            raise CalibrationInvalid("hue tables must have 360 rows")
        if not np.allclose(factors.sum(axis=1), 1.0, atol=1e-9) or (factors < 0).any():
            raise CalibrationInvalid("response factors per bin must be non-negative and sum to 1")
        if (lum <= 0).any() or not math.isclose(lum.max(), 1.0, abs_tol=1e-12):
            raise CalibrationInvalid("luminance sensitivity must lie in (0, 1] with max 1")
        object.__setattr__(self, "hue_factors", factors)
        object.__setattr__(self, "luminance", lum)

    @property
    def peaks(self) -> np.ndarray:
        return np.array([self.knots[c][-1] for c in CHANNELS])

    @property
    def reference_peak(self) -> float:
        """Highest observable response, used to normalize before correction."""
        return float(self.peaks.max())

    @cached_property
    def polynomials(self) -> list[np.ndarray]:
        return [fit_lagrange(list(zip(self.knots[c], self.brightness))) for c in CHANNELS]

    @cached_property
    def _curves(self) -> list[PchipInterpolator]:
        # response -> component value, anchored at (0, 0)
        return [PchipInterpolator((0.0,) + tuple(self.knots[c]), (0.0,) + tuple(self.brightness),
                                  extrapolate=False) for c in CHANNELS]

    def to_dict(self) -> dict:
        return {
            "format": "bulbleak-calibration/1",
            "name": self.name,
            "brightness": list(self.brightness),
            "knots": {c: list(self.knots[c]) for c in CHANNELS},
            "luminance_weights": list(self.luminance_weights),
            "hue_factors": [[round(float(x), 12) for x in row] for row in self.hue_factors],
            "luminance": [round(float(x), 12) for x in self.luminance],
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")

    @classmethod
    def from_dict(cls, d: dict) -> "ResponseCalibration":
        if d.get("format") != "bulbleak-calibration/1":
            raise CalibrationInvalid(f"unsupported calibration format {d.get('format')!r}")
        factors = np.asarray(d["hue_factors"], dtype=float)
        factors = factors / factors.sum(axis=1, keepdims=True)
        return cls(tuple(d["brightness"]), {c: tuple(d["knots"][c]) for c in CHANNELS},
                   factors, np.asarray(d["luminance"], dtype=float),
                   tuple(d["luminance_weights"]), d.get("name", "custom"))

    @classmethod
    def load(cls, path) -> "ResponseCalibration":
        return cls.from_dict(json.loads(Path(path).read_text()))


def validate_knots(brightness, knots) -> None:
    levels = np.asarray(brightness, dtype=float)
    if len(levels) < 2 or np.any(np.diff(levels) <= 0) or levels[0] <= 0 or levels[-1] != 1.0:
        raise CalibrationInvalid("brightness grid must be strictly increasing in (0, 1] and end at 1.0")
    for c in CHANNELS:
        xs = np.asarray(knots.get(c, ()), dtype=float)
        if xs.shape != levels.shape:
            raise CalibrationInvalid(f"channel {c}: expected {len(levels)} knots")
        if xs[0] <= 0 or np.any(np.diff(xs) <= 0):
            raise CalibrationInvalid(f"channel {c}: knots must be positive and strictly increasing")


def build_calibration(brightness=TABLE_BRIGHTNESS, knots=None, name="lifx-a19",
                      luminance_weights=LUMINANCE_WEIGHTS) -> ResponseCalibration:
    """Derive the hue tables from the forward sensor model at full brightness."""
    knots = {c: tuple(v) for c, v in (knots or TABLE_RESPONSES).items()}
    validate_knots(brightness, knots)
    placeholder = ResponseCalibration(tuple(brightness), knots, np.full((HUE_BINS, 3), 1 / 3),
                                      np.ones(HUE_BINS), tuple(luminance_weights), name)
    hues = np.arange(HUE_BINS, dtype=float)
    rgb = hsb_to_rgb_array(np.stack([hues, np.ones(HUE_BINS), np.ones(HUE_BINS)], axis=-1))
    resp = sensor_response_array(rgb, placeholder)
    factors = resp / resp.sum(axis=1, keepdims=True)
    lum = resp @ np.asarray(luminance_weights)
    return ResponseCalibration(tuple(brightness), knots, factors, lum / lum.max(),
                               tuple(luminance_weights), name)


@lru_cache(maxsize=1)
def default_calibration() -> ResponseCalibration:
    ref = resources.files("bulbleak") / "calibrations" / "lifx-a19.cal"
    return ResponseCalibration.from_dict(json.loads(ref.read_text()))


# -------------------------------------------------------------- sensor model

def _invert_curve(curve: PchipInterpolator, values: np.ndarray, top: float) -> np.ndarray:
    """Solve curve(x) = v for x in [0, top], vectorized bisection on a monotone curve."""
    lo = np.zeros_like(values)
    hi = np.full_like(values, top)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        below = curve(mid) < values
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    out = 0.5 * (lo + hi)
    out[values <= 0.0] = 0.0
    out[values >= 1.0] = top
    return out


def sensor_response_array(rgb, cal: ResponseCalibration) -> np.ndarray:
    rgb = np.clip(np.asarray(rgb, dtype=float), 0.0, 1.0)
    out = np.empty_like(rgb)
    for i, curve in enumerate(cal._curves):
        flat = rgb[..., i].reshape(-1)
        out[..., i] = _invert_curve(curve, flat, cal.knots[CHANNELS[i]][-1]).reshape(rgb.shape[:-1])
    return out


def sensor_response(c: RgbColor, cal: ResponseCalibration) -> RgbResponse:
    return RgbResponse(*(float(x) for x in sensor_response_array(tuple(c), cal)))


def linearize_array(responses, cal: ResponseCalibration) -> np.ndarray:
    """Map calibrated responses back to component values through the monotone curves."""
    d = np.asarray(responses, dtype=float)
    out = np.empty_like(d)
    for i, curve in enumerate(cal._curves):
        x = np.clip(d[..., i], 0.0, cal.knots[CHANNELS[i]][-1])
        out[..., i] = curve(x)
    return out


# ---------------------------------------------------------------- correction

def correct_response_array(responses, cal: ResponseCalibration, below_knots: str = "taper") -> np.ndarray:
    """Normalize by the highest observable response, then apply the polynomials.

    Below the lowest knot the polynomials do not go through zero (constant
    terms near 0.117); ``below_knots="taper"`` replaces that stretch with a
    straight line from the origin to the lowest knot, ``"polynomial"`` keeps
    the raw polynomial.
    """
    if below_knots not in ("taper", "polynomial"):
        raise ValueError(f"unknown below_knots mode {below_knots!r}")
    d = np.asarray(responses, dtype=float) / cal.reference_peak
    out = np.empty_like(d)
    for i, coeffs in enumerate(cal.polynomials):
        x = d[..., i]
        y = np.polyval(coeffs, x)
        if below_knots == "taper":
            x0 = cal.knots[CHANNELS[i]][0]
            y = np.where(x < x0, cal.brightness[0] * x / x0, y)
        out[..., i] = y
    return np.clip(out, 0.0, CORRECTION_CEILING)


def correct_response(d: RgbResponse, cal: ResponseCalibration, below_knots: str = "taper") -> CorrectedComposition:
    return CorrectedComposition(*(float(x) for x in correct_response_array(tuple(d), cal, below_knots)))


# ------------------------------------------------------------- hue lookup

def identify_hue_array(responses, cal: ResponseCalibration, noise_floor: float = 1e-9) -> np.ndarray:
    """Hue bin for each response row.

    Each observation is first projected to its full-brightness equivalent
    (linearize, scale the largest component to 1, re-apply the forward model)
    so the response ratios it is compared with do not drift with brightness.
    Ties resolve to the lowest bin.
    """
    d = np.atleast_2d(np.asarray(responses, dtype=float))
    if (d.max(axis=1) <= noise_floor).any():
        raise DarkSample("response at or below the noise floor")
    lin = linearize_array(d, cal)
    scale = lin.max(axis=1, keepdims=True)
    if (scale <= 0).any():
        raise DarkSample("response at or below the noise floor")
    full = sensor_response_array(lin / scale, cal)
    factors = full / full.sum(axis=1, keepdims=True)
    dist = np.abs(factors[:, None, :] - cal.hue_factors[None, :, :]).sum(axis=2)
    return np.argmin(dist, axis=1)


def identify_hue(d: RgbResponse, cal: ResponseCalibration, noise_floor: float = 1e-9) -> int:
    return int(identify_hue_array(tuple(d), cal, noise_floor)[0])


def response_factors(d: RgbResponse) -> tuple[float, float, float]:
    total = d.dr + d.dg + d.db
    if total <= 0:
        raise DarkSample("all-zero response")
    return (d.dr / total, d.dg / total, d.db / total)


def luminance_sensitivity(hue_bin: int, cal: ResponseCalibration) -> float:
    if not 0 <= int(hue_bin) < HUE_BINS:
        raise ValueError(f"hue bin {hue_bin} outside 0..359")
    return float(cal.luminance[int(hue_bin)])
